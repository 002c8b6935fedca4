use serde::{Deserialize, Serialize};

use crate::lexer::{self, Token, TokenKind};

use super::ReviewError;

/// Tokens that leave a proof unfinished. Violations of these kinds fail check 2;
/// everything else on the denylist fails check 3.
pub const PLACEHOLDER_KINDS: &[&str] = &["sorry", "admit"];

pub const AXIOM_KIND: &str = "axiom-introduction";

pub fn default_denylist() -> Vec<String> {
    ["sorry", "admit", "apply?", "exact?", "rw?", "simp?", "axiom", "#exit"]
        .map(String::from)
        .to_vec()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub line: usize,
    /// The offending source line, trimmed.
    pub excerpt: String,
}

impl Violation {
    pub fn is_placeholder(&self) -> bool {
        PLACEHOLDER_KINDS.contains(&self.kind.as_str())
    }

    pub fn describe(&self) -> String {
        let what = match self.kind.as_str() {
            AXIOM_KIND => "new axiom declaration".to_string(),
            k if k.starts_with('#') => format!("command `{k}`"),
            k => format!("banned tactic `{k}`"),
        };
        format!("{what} at line {}: {}", self.line, self.excerpt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoopholeReport {
    pub violations: Vec<Violation>,
}

impl LoopholeReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.is_placeholder())
    }

    pub fn others(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| !v.is_placeholder())
    }
}

fn kind_for(entry: &str) -> String {
    if entry == "axiom" {
        AXIOM_KIND.to_string()
    } else {
        entry.to_string()
    }
}

/// Flags every code token whose text equals a denylist entry. Comments, string
/// literals and longer identifiers (`sorryless`, `exact?_helper`) never match.
pub fn detect_loopholes(source: &str, denylist: &[String]) -> LoopholeReport {
    let lines: Vec<&str> = source.lines().collect();
    let violations = lexer::code_tokens(source)
        .iter()
        .filter(|t| matches!(t.kind, TokenKind::Ident | TokenKind::HashCommand))
        .filter_map(|t| {
            let text = t.text(source);
            denylist.iter().find(|d| d.as_str() == text).map(|d| Violation {
                kind: kind_for(d),
                line: t.line,
                excerpt: lines.get(t.line - 1).map_or("", |l| l.trim()).to_string(),
            })
        })
        .collect();
    LoopholeReport { violations }
}

/// The text that loophole detection runs on: the proposal's injected import and
/// open lines followed by its theorem.
pub fn proposal_source(imports: &[String], opens: &[String], theorem: &str) -> String {
    let mut s = String::new();
    for i in imports {
        s.push_str(&format!("import {i}\n"));
    }
    for o in opens {
        s.push_str(&format!("open {o}\n"));
    }
    s.push_str(theorem);
    s
}

fn depth_delta(t: &str) -> i32 {
    match t {
        "(" | "[" | "{" | "⟨" | "⦃" => 1,
        ")" | "]" | "}" | "⟩" | "⦄" => -1,
        _ => 0,
    }
}

/// Code tokens of the header: from the `theorem`/`lemma` keyword up to the
/// depth-0 `:=`, `where`, or a line-leading `|` that starts an equation.
fn signature(src: &str) -> Result<Vec<&str>, ReviewError> {
    let toks = lexer::code_tokens(src);
    let start = toks
        .windows(2)
        .position(|w| {
            w[0].kind == TokenKind::Ident
                && matches!(w[0].text(src), "theorem" | "lemma")
                && w[1].kind == TokenKind::Ident
        })
        .ok_or(ReviewError::MalformedTheorem)?;
    let mut out = vec!["theorem"];
    let mut depth = 0i32;
    let mut prev_line = toks[start].line;
    for (i, t) in toks.iter().enumerate().skip(start + 1) {
        let text = t.text(src);
        if depth == 0 && (text == ":=" || text == "where" || equation_bar(&toks, i, prev_line, src)) {
            break;
        }
        depth += depth_delta(text);
        prev_line = t.line;
        out.push(text);
    }
    Ok(out)
}

fn equation_bar(toks: &[Token], i: usize, prev_line: usize, src: &str) -> bool {
    let t = &toks[i];
    t.text(src) == "|"
        && t.line > prev_line
        && toks[i + 1..]
            .iter()
            .take_while(|u| u.line == t.line)
            .any(|u| u.text(src) == "=>")
}

/// True when both headers have the same name, binders and goal, ignoring
/// whitespace, comments, attributes and `lemma`/`theorem`.
pub fn check_statement_preserved(original: &str, updated: &str) -> Result<bool, ReviewError> {
    Ok(signature(original)? == signature(updated)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<String> {
        detect_loopholes(src, &default_denylist())
            .violations
            .into_iter()
            .map(|v| v.kind)
            .collect()
    }

    #[test]
    fn apply_question_mark_is_flagged() {
        let r = detect_loopholes("theorem t (n : Nat) : n + 0 = n := by apply?", &default_denylist());
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, "apply?");
        assert_eq!(r.violations[0].line, 1);
        assert!(r.violations[0].describe().contains("`apply?`"));
    }

    #[test]
    fn clean_proof() {
        assert!(detect_loopholes("theorem t (n : Nat) : n + 0 = n := by omega", &default_denylist()).is_clean());
        assert!(detect_loopholes("theorem t : 2 + 2 = 4 := by native_decide", &default_denylist()).is_clean());
    }

    #[test]
    fn axiom_and_exit() {
        assert_eq!(kinds("axiom cheat : False\ntheorem t : 1 = 2 := cheat.elim"), ["axiom-introduction"]);
        assert_eq!(kinds("theorem t : 1 = 2 := by\n  simp\n#exit"), ["#exit"]);
    }

    #[test]
    fn decoys() {
        let src = "-- apply? would work here\n/- sorry -/\ntheorem sorryless : True := by\n  have h := \"exact?\"\n  exact trivial";
        assert!(kinds(src).is_empty());
        assert!(kinds("theorem t : True := by exact my_axiom_free_lemma").is_empty());
    }

    #[test]
    fn placeholder_split() {
        let r = detect_loopholes("theorem t : True := by\n  rw? \n  sorry", &default_denylist());
        assert_eq!(r.placeholders().count(), 1);
        assert_eq!(r.others().count(), 1);
    }

    #[test]
    fn custom_denylist_tightens() {
        let mut d = default_denylist();
        d.push("native_decide".into());
        assert_eq!(
            detect_loopholes("theorem t : 2 + 2 = 4 := by native_decide", &d).violations[0].kind,
            "native_decide"
        );
    }

    #[test]
    fn statement_typical_case() {
        let orig = "theorem foo (n : Nat) : n + 0 = n := sorry";
        assert!(check_statement_preserved(orig, "theorem foo (n : Nat) : n + 0 = n := by omega").unwrap());
        assert!(check_statement_preserved(orig, orig).unwrap());
        assert!(check_statement_preserved(
            orig,
            "lemma foo (n : Nat) :\n    n + 0 = n -- goal\n  := by\n  simp"
        )
        .unwrap());
    }

    #[test]
    fn statement_changed() {
        let orig = "theorem foo (n : Nat) : n + 0 = n := sorry";
        assert!(!check_statement_preserved(orig, "theorem foo (n m : Nat) : n + m = n := by simp").unwrap());
        assert!(!check_statement_preserved(orig, "theorem foo (n : Nat) : n + 0 = n ∨ True := by simp").unwrap());
        assert!(!check_statement_preserved(orig, "theorem bar (n : Nat) : n + 0 = n := by simp").unwrap());
    }

    #[test]
    fn statement_with_autoparam_and_abs() {
        let orig = "theorem t (x : ℝ) (h : 0 ≤ x := by positivity) : |x| = x := sorry";
        assert!(check_statement_preserved(orig, "theorem t (x : ℝ) (h : 0 ≤ x := by positivity) : |x| = x := abs_of_nonneg h").unwrap());
        assert!(!check_statement_preserved(orig, "theorem t (x : ℝ) (h : 0 ≤ x := by simp) : |x| = x := abs_of_nonneg h").unwrap());
    }

    #[test]
    fn statement_with_equations() {
        let orig = "theorem f : ∀ n : Nat, n + 0 = n := sorry";
        let eqns = "theorem f : ∀ n : Nat, n + 0 = n\n  | 0 => rfl\n  | n + 1 => rfl";
        assert!(check_statement_preserved(orig, eqns).unwrap());
    }

    #[test]
    fn malformed() {
        assert!(matches!(
            check_statement_preserved("example : True := trivial", "theorem t : True := trivial"),
            Err(ReviewError::MalformedTheorem)
        ));
    }
}
