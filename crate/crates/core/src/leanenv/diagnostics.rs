use std::sync::OnceLock;

use regex::Regex;

use crate::types::{Diagnostic, GoalState, Severity, SourcePos};

pub const NO_GOAL: &str = "no goal reported";

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // `path:line:col: severity: message` (lean) or `severity: path:line:col: message` (lake).
    RE.get_or_init(|| {
        Regex::new(r"^(?:(?P<pre>[a-z]+): )?(?P<file>[^:\s][^:]*?):(?P<line>\d+):(?P<col>\d+):(?P<rest>.*)$")
            .unwrap()
    })
}

fn split_severity(pre: Option<&str>, rest: &str) -> Option<(Severity, String)> {
    let rest = rest.strip_prefix(' ').unwrap_or(rest);
    if let Some((word, msg)) = rest.split_once(':') {
        if let Some(sev) = Severity::parse(word) {
            return Some((sev, msg.strip_prefix(' ').unwrap_or(msg).to_string()));
        }
    }
    pre.and_then(Severity::parse).map(|sev| (sev, rest.to_string()))
}

/// Parses captured build output into diagnostics.
///
/// A line of the form `<path>:<line>:<col>: <severity>: <message>` opens a
/// diagnostic and following non-matching lines extend its message. Headers
/// with an unknown severity close the open diagnostic and are dropped along
/// with their continuation lines.
pub fn parse_diagnostics(raw: &str) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = Vec::new();
    let mut open = false;
    for line in raw.lines() {
        if let Some(c) = header_re().captures(line) {
            let Some((severity, message)) =
                split_severity(c.name("pre").map(|m| m.as_str()), &c["rest"])
            else {
                open = false;
                continue;
            };
            out.push(Diagnostic {
                file: c["file"].to_string(),
                line: c["line"].parse().unwrap_or(1).max(1),
                column: c["col"].parse().unwrap_or(0),
                severity,
                message,
            });
            open = true;
        } else if open {
            let d = out.last_mut().unwrap();
            d.message.push('\n');
            d.message.push_str(line);
        }
    }
    out
}

/// Inverse of [`parse_diagnostics`] for well-formed diagnostics.
pub fn format_diagnostics(diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&format!(
            "{}:{}:{}: {}: {}\n",
            d.file, d.line, d.column, d.severity, d.message
        ));
    }
    out
}

fn same_file(a: &str, b: &str) -> bool {
    let norm = |s: &str| s.trim_start_matches("./").replace('\\', "/");
    let (a, b) = (norm(a), norm(b));
    a == b || a.ends_with(&format!("/{b}")) || b.ends_with(&format!("/{a}"))
}

/// Pairs each sorry site with the nearest unused "unsolved goals" diagnostic
/// in `file` located at or after it. Sites are processed in source order;
/// unmatched sites get [`NO_GOAL`].
pub fn extract_goal_states(
    diagnostics: &[Diagnostic],
    sorry_sites: &[SourcePos],
    file: &str,
) -> Vec<GoalState> {
    let mut candidates: Vec<(SourcePos, &Diagnostic)> = diagnostics
        .iter()
        .filter(|d| d.is_unsolved_goals() && same_file(&d.file, file))
        .map(|d| {
            (
                SourcePos {
                    line: d.line,
                    column: d.column,
                },
                d,
            )
        })
        .collect();
    candidates.sort_by_key(|(p, _)| *p);
    let mut used = vec![false; candidates.len()];
    let mut sites = sorry_sites.to_vec();
    sites.sort();
    sites
        .into_iter()
        .map(|site| {
            let hit = candidates
                .iter()
                .enumerate()
                .find(|(i, (pos, _))| !used[*i] && *pos >= site);
            let goal = match hit {
                Some((i, (_, d))) => {
                    used[i] = true;
                    d.message.clone()
                }
                None => NO_GOAL.to_string(),
            };
            GoalState { site, goal }
        })
        .collect()
}
