//! Scans Lean snippets for proof loopholes: placeholders, search tactics left
//! in the proof, new axioms. Comments and strings are ignored.

use leanloop::review::{default_denylist, detect_loopholes};

fn main() {
    let deny = default_denylist();
    let samples = [
        "theorem a : 1 = 1 := by rfl",
        "theorem a : 1 = 1 := by sorry",
        "theorem a (n : Nat) : n + 0 = n := by apply?",
        "axiom cheat : False\ntheorem a : 1 = 2 := cheat.elim",
        "-- no sorry here\ntheorem a : 1 = 1 := by rfl",
        "def msg := \"sorry\"\ntheorem sorry_free : True := trivial",
    ];
    for src in samples {
        let report = detect_loopholes(src, &deny);
        let first = src.lines().last().unwrap_or_default();
        if report.is_clean() {
            println!("clean    {first}");
        } else {
            let found: Vec<String> = report.violations.iter().map(|v| v.describe()).collect();
            println!("flagged  {first}\n         {}", found.join("; "));
        }
    }
}
