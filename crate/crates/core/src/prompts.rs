//! Prompt templates.
//!
//! The files under `templates/` are shipped verbatim and embedded at compile
//! time. Placeholders look like `{name}`; [`fill`] replaces only the names it is
//! given, so Lean braces (`{x : Real}`) and unrelated placeholders survive.

pub const PROPOSER_SYSTEM_ITERATIVE: &str =
    include_str!("../templates/proposer_system_iterative.txt");
pub const PROPOSER_SYSTEM_SINGLE_SHOT: &str =
    include_str!("../templates/proposer_system_single_shot.txt");
pub const PROPOSER_USER: &str = include_str!("../templates/proposer_user.txt");
pub const PROPOSER_EXPERIENCE: &str = include_str!("../templates/proposer_experience.txt");
pub const PROPOSER_PAST_ATTEMPTS: &str = include_str!("../templates/proposer_past_attempts.txt");
pub const PREVIOUS_ATTEMPT: &str = include_str!("../templates/previous_attempt.txt");
pub const ATTEMPT: &str = include_str!("../templates/attempt.txt");
pub const CONTEXT_SUMMARY_SYSTEM: &str = include_str!("../templates/context_summary_system.txt");
pub const CONTEXT_SUMMARY_USER: &str = include_str!("../templates/context_summary_user.txt");
pub const REVIEWER_SYSTEM: &str = include_str!("../templates/reviewer_system.txt");
pub const REVIEWER_USER: &str = include_str!("../templates/reviewer_user.txt");

/// Substitutes `{key}` for each `(key, value)` pair in a single left-to-right
/// pass. Values are inserted literally and never rescanned.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = vars.iter().find(|(k, _)| {
            after.starts_with(k) && after[k.len()..].starts_with('}')
        });
        match hit {
            Some((k, v)) => {
                out.push_str(v);
                rest = &after[k.len() + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn proposer_system(mode: crate::types::PromptMode, lean_version: &str) -> String {
    let template = match mode {
        crate::types::PromptMode::Iterative => PROPOSER_SYSTEM_ITERATIVE,
        crate::types::PromptMode::SingleShot => PROPOSER_SYSTEM_SINGLE_SHOT,
    };
    fill(template, &[("lean_version", lean_version)])
}

pub fn proposer_user(target_theorem: &str, complete_file: &str) -> String {
    fill(
        PROPOSER_USER,
        &[("target_theorem", target_theorem), ("complete_file", complete_file)],
    )
}

pub fn experience(experience: &str) -> String {
    fill(PROPOSER_EXPERIENCE, &[("experience", experience)])
}

pub fn attempt(reasoning: &str, code: &str, feedback: &str) -> String {
    fill(
        ATTEMPT,
        &[("reasoning", reasoning), ("code", code), ("feedback", feedback)],
    )
}

pub fn previous_attempt(rendered_attempt: &str) -> String {
    fill(PREVIOUS_ATTEMPT, &[("attempt", rendered_attempt)])
}

pub fn past_attempts(rendered_attempts: &str) -> String {
    fill(PROPOSER_PAST_ATTEMPTS, &[("previous_attempts", rendered_attempts)])
}

pub fn context_summary_user(
    reasoning: &str,
    code: &str,
    feedback: &str,
    previous_context: &str,
) -> String {
    fill(
        CONTEXT_SUMMARY_USER,
        &[
            ("reasoning", reasoning),
            ("code", code),
            ("feedback", feedback),
            ("previous_context", previous_context),
        ],
    )
}

pub fn reviewer_user(original_theorem: &str, proposed_proof: &str) -> String {
    fill(
        REVIEWER_USER,
        &[("original_theorem", original_theorem), ("proposed_proof", proposed_proof)],
    )
}
