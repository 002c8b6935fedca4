mod common;

use std::fs;
use std::time::Duration;

use leanloop::leanenv::{toolchain_available, verify_catalog, FixtureCatalog, FixtureCategory, LakeBackend, Workspace};
use leanloop::review::{default_denylist, detect_loopholes};

fn catalog() -> FixtureCatalog {
    FixtureCatalog::load(&common::fixtures_dir().join("catalog.toml")).unwrap()
}

const CATEGORIES: [FixtureCategory; 5] = [
    FixtureCategory::TrivialProof,
    FixtureCategory::CompileError,
    FixtureCategory::SorryGoals,
    FixtureCategory::LoopholePositive,
    FixtureCategory::LoopholeNegative,
];

#[test]
fn catalog_covers_every_category() {
    let c = catalog();
    for cat in CATEGORIES {
        assert!(c.by_category(cat).count() >= 3, "{cat:?}");
    }
    for f in &c.fixtures {
        assert!(c.root.join(&f.file).is_file(), "{}", f.file);
    }
    assert_eq!(
        fs::read_to_string(common::fixtures_dir().join("lean-toolchain")).unwrap().trim(),
        c.toolchain
    );
}

#[test]
fn loophole_corpus_is_classified_exactly() {
    let c = catalog();
    let deny = default_denylist();
    let positives: Vec<_> = c.by_category(FixtureCategory::LoopholePositive).collect();
    let negatives: Vec<_> = c.by_category(FixtureCategory::LoopholeNegative).collect();
    assert!(positives.len() >= 10 && negatives.len() >= 10);
    for f in positives {
        let src = fs::read_to_string(c.root.join(&f.file)).unwrap();
        assert!(!detect_loopholes(&src, &deny).is_clean(), "missed {}", f.id);
    }
    for f in negatives {
        let src = fs::read_to_string(c.root.join(&f.file)).unwrap();
        let r = detect_loopholes(&src, &deny);
        assert!(r.is_clean(), "false positive {}: {:?}", f.id, r.violations);
    }
}

#[test]
fn other_categories_are_clean_of_loopholes_except_sorry_goals() {
    let c = catalog();
    let deny = default_denylist();
    for f in c.by_category(FixtureCategory::TrivialProof).chain(c.by_category(FixtureCategory::CompileError)) {
        let src = fs::read_to_string(c.root.join(&f.file)).unwrap();
        assert!(detect_loopholes(&src, &deny).is_clean(), "{}", f.id);
    }
    for f in c.by_category(FixtureCategory::SorryGoals) {
        let src = fs::read_to_string(c.root.join(&f.file)).unwrap();
        let r = detect_loopholes(&src, &deny);
        assert!(r.others().next().is_none() && r.placeholders().count() == f.expect.unsolved_goals.len());
    }
}

/// Builds every fixture with the real toolchain. Skipped when `lake` is not
/// installed.
#[test]
fn real_toolchain_verifies_catalog() {
    if !toolchain_available() {
        eprintln!("skipped: lake not found on PATH");
        return;
    }
    let c = catalog();
    let ws = Workspace::open(common::fixtures_dir(), None).unwrap();
    let checks = verify_catalog(&c, &LakeBackend::new(ws), Duration::from_secs(300)).unwrap();
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:#?}");
}
