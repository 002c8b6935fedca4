//! Carry-over context between iterations of one attempt loop.
//!
//! `None` forgets everything, `HistoryN(n)` keeps the last `n` attempts
//! verbatim, and `SelfManaged` keeps notes that a reflection call rewrites
//! after every attempt. Whatever the strategy, the transcript keeps every
//! attempt; memory only shapes the next prompt.

use std::collections::VecDeque;

use crate::llm::{LlmClient, LlmRequest, Message};
use crate::prompts;
use crate::types::{AttemptRecord, CallRole, MemoryStrategy, ModelUsage, ProverConfig};

const TRUNCATED: &str = "\n[truncated to fit the context budget]";
const NOTES_TRUNCATED: &str = "\n[notes truncated to fit the context budget]";

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    strategy: MemoryStrategy,
    attempts: VecDeque<AttemptRecord>,
    notes: String,
    notes_cap: usize,
    render_budget: usize,
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn head(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl MemoryState {
    pub fn new(strategy: MemoryStrategy, notes_cap: usize, render_budget: usize) -> Self {
        MemoryState {
            strategy,
            attempts: VecDeque::new(),
            notes: String::new(),
            notes_cap,
            render_budget,
        }
    }

    pub fn from_config(config: &ProverConfig) -> Self {
        Self::new(config.memory, config.notes_cap, config.render_budget)
    }

    pub fn strategy(&self) -> MemoryStrategy {
        self.strategy
    }

    /// Held attempts, oldest first.
    pub fn attempts(&self) -> impl Iterator<Item = &AttemptRecord> {
        self.attempts.iter()
    }

    pub fn notes(&self) -> &str {
        &self.notes
    }

    /// Folds a finished attempt into memory. Returns the reflection call's
    /// usage for `SelfManaged`.
    pub fn update(&mut self, attempt: &AttemptRecord, llm: &dyn LlmClient, config: &ProverConfig) -> Option<ModelUsage> {
        match self.strategy {
            MemoryStrategy::None => None,
            MemoryStrategy::HistoryN(n) => {
                self.attempts.push_back(attempt.clone());
                while self.attempts.len() > n {
                    self.attempts.pop_front();
                }
                None
            }
            MemoryStrategy::SelfManaged => self.reflect(attempt, llm, config),
        }
    }

    fn reflect(&mut self, attempt: &AttemptRecord, llm: &dyn LlmClient, config: &ProverConfig) -> Option<ModelUsage> {
        let request = LlmRequest {
            model: config.reflection_model().to_string(),
            role: CallRole::Reflector,
            messages: vec![
                Message::system(prompts::CONTEXT_SUMMARY_SYSTEM),
                Message::user(prompts::context_summary_user(
                    &attempt.proposal.reasoning,
                    &attempt.proposal.updated_theorem,
                    &attempt.feedback,
                    &self.notes,
                )),
            ],
            tools: Vec::new(),
            thinking: config.thinking_budget.clone(),
            seed: config.sampling_seed,
        };
        match llm.complete(&request) {
            Ok(resp) => {
                self.notes = head(resp.text.trim(), self.notes_cap).to_string();
                Some(ModelUsage {
                    model: request.model,
                    role: CallRole::Reflector,
                    tokens: resp.usage,
                })
            }
            Err(e) => {
                let reason = e.to_string().replace('\n', " ");
                let marker = format!("[reflection failed after attempt {}: {reason}]", attempt.iteration);
                let joined = if self.notes.is_empty() {
                    marker
                } else {
                    format!("{}\n{marker}", self.notes)
                };
                self.notes = head(&joined, self.notes_cap).to_string();
                None
            }
        }
    }

    /// User messages to append after the task prompt, in order.
    pub fn render(&self) -> Vec<String> {
        match self.strategy {
            MemoryStrategy::None => Vec::new(),
            MemoryStrategy::HistoryN(_) => self.render_history(),
            MemoryStrategy::SelfManaged => self.render_notes(),
        }
    }

    fn history_fragments(&self, keep: usize) -> Vec<String> {
        let mut recent = self.attempts.iter().rev().take(keep).map(|a| {
            prompts::attempt(&a.proposal.reasoning, &a.proposal.updated_theorem, &a.feedback)
        });
        let mut out = Vec::new();
        if let Some(latest) = recent.next() {
            out.push(prompts::previous_attempt(&latest));
        }
        let older: Vec<String> = recent.collect();
        if !older.is_empty() {
            out.push(prompts::past_attempts(&older.join("\n\n")));
        }
        let dropped = self.attempts.len() - keep.min(self.attempts.len());
        if dropped > 0 {
            if let Some(last) = out.last_mut() {
                last.push_str(&format!(
                    "\n[{dropped} older attempt(s) omitted to fit the context budget]"
                ));
            }
        }
        out
    }

    fn render_history(&self) -> Vec<String> {
        let budget = self.render_budget;
        for keep in (1..=self.attempts.len()).rev() {
            let frags = self.history_fragments(keep);
            if frags.iter().map(|f| char_len(f)).sum::<usize>() <= budget {
                return frags;
            }
        }
        // Even the latest attempt alone is too long: cut it.
        let mut frags = self.history_fragments(1);
        frags.truncate(1);
        match frags.first_mut() {
            Some(f) => {
                let room = budget.saturating_sub(char_len(TRUNCATED));
                *f = format!("{}{TRUNCATED}", head(f, room));
                if char_len(f) > budget {
                    return Vec::new();
                }
                frags
            }
            None => Vec::new(),
        }
    }

    fn render_notes(&self) -> Vec<String> {
        if self.notes.trim().is_empty() {
            return Vec::new();
        }
        let full = prompts::experience(&self.notes);
        if char_len(&full) <= self.render_budget {
            return vec![full];
        }
        let overhead = char_len(&prompts::experience("")) + char_len(NOTES_TRUNCATED);
        if overhead > self.render_budget {
            return Vec::new();
        }
        let room = self.render_budget - overhead;
        vec![prompts::experience(&format!("{}{NOTES_TRUNCATED}", head(&self.notes, room)))]
    }
}
