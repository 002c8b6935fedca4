//! Prints the embedded 100-problem ablation manifest. Pass a dataset checkout
//! to check that every listed file exists.

use leanloop::harness::DatasetManifest;

fn main() {
    let m = DatasetManifest::ablation();
    println!("{} v{}: {} entries", m.name, m.version, m.entries.len());
    println!("toolchain {}, mathlib {}", m.pins.lean_toolchain, m.pins.mathlib_commit);
    for e in m.entries.iter().take(5) {
        println!("  {} -> {}", e.id, e.path.display());
    }
    if let Some(root) = std::env::args().nth(1) {
        match m.check_paths(root.as_ref()) {
            Ok(()) => println!("all files present under {root}"),
            Err(e) => println!("{e}"),
        }
    }
}
