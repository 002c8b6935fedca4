//! Parses compiler output and pairs each stripped `sorry` with the goal
//! reported at its position.

use leanloop::leanenv::{extract_goal_states, format_diagnostics, parse_diagnostics};
use leanloop::review::strip_sorries;

const PROOF: &str = "theorem add_zero (n : Nat) : n + 0 = n := by
  induction n with
  | zero => sorry
  | succ n ih => sorry
";

const BUILD_OUTPUT: &str = "\u{2714} [2/3] Built Mathlib
error: ./Scratch.lean:3:12: unsolved goals
case zero
\u{22a2} 0 + 0 = 0
error: ./Scratch.lean:4:17: unsolved goals
case succ
n : Nat
ih : n + 0 = n
\u{22a2} n + 1 + 0 = n + 1
warning: ./Scratch.lean:1:8: declaration uses 'sorry'
";

fn main() {
    let (stripped, sites) = strip_sorries(PROOF);
    println!("{stripped}");
    println!("sorry sites: {sites:?}\n");
    let diags = parse_diagnostics(BUILD_OUTPUT);
    println!("{}\n", format_diagnostics(&diags));
    for g in extract_goal_states(&diags, &sites, "Scratch.lean") {
        println!("{g:?}");
    }
}
