//! Lists the Lean fixture catalog and, when `lake` is installed, builds every
//! fixture and compares against the recorded expectations.

use std::path::Path;
use std::time::Duration;

use leanloop::leanenv::{toolchain_available, verify_catalog, FixtureCatalog, LakeBackend, Workspace};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = FixtureCatalog::load(&root.join("catalog.toml")).unwrap();
    println!("toolchain {}", catalog.toolchain);
    for f in &catalog.fixtures {
        println!("{:<40} {:?}", f.id, f.category);
    }
    if !toolchain_available() {
        println!("\nlake not found; skipping builds");
        return;
    }
    let backend = LakeBackend::new(Workspace::open(&root, None).unwrap());
    for check in verify_catalog(&catalog, &backend, Duration::from_secs(300)).unwrap() {
        println!("{} {}", if check.passed { "ok  " } else { "FAIL" }, check.id);
    }
}
