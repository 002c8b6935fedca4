//! The attempt loop: propose, review, remember, repeat.

use std::sync::Arc;
use std::time::Instant;

use crate::harness::PriceTable;
use crate::leanenv::LeanBackend;
use crate::llm::LlmClient;
use crate::memory::MemoryState;
use crate::proposer::{self, ProposeOutput};
use crate::review::{self, ReviewOutcome};
use crate::toolbox::Toolbox;
use crate::types::{AttemptRecord, AttemptStatus, Outcome, ProofProposal, ProofResult, ProverConfig, TheoremTask};

/// Everything a loop talks to. Cheap to clone and safe to share between
/// concurrently running loops.
#[derive(Clone)]
pub struct ServiceBundle {
    pub llm: Arc<dyn LlmClient>,
    pub lean: Arc<dyn LeanBackend>,
    pub toolbox: Arc<Toolbox>,
    pub prices: PriceTable,
}

impl ServiceBundle {
    pub fn new(llm: Arc<dyn LlmClient>, lean: Arc<dyn LeanBackend>) -> Self {
        ServiceBundle {
            llm,
            lean,
            toolbox: Arc::new(Toolbox::disabled()),
            prices: PriceTable::default(),
        }
    }

    pub fn with_toolbox(mut self, toolbox: Toolbox) -> Self {
        self.toolbox = Arc::new(toolbox);
        self
    }

    pub fn with_prices(mut self, prices: PriceTable) -> Self {
        self.prices = prices;
        self
    }
}

/// Called after every finished attempt, in order.
pub trait LoopObserver {
    fn on_attempt(&mut self, task: &TheoremTask, attempt: &AttemptRecord);
}

impl<F: FnMut(&TheoremTask, &AttemptRecord)> LoopObserver for F {
    fn on_attempt(&mut self, task: &TheoremTask, attempt: &AttemptRecord) {
        self(task, attempt)
    }
}

struct Silent;

impl LoopObserver for Silent {
    fn on_attempt(&mut self, _: &TheoremTask, _: &AttemptRecord) {}
}

pub fn run_attempt_loop(task: &TheoremTask, config: &ProverConfig, services: &ServiceBundle) -> ProofResult {
    run_attempt_loop_with(task, config, services, &mut Silent)
}

fn finish(task: &TheoremTask, outcome: Outcome, transcript: Vec<AttemptRecord>, prices: &PriceTable) -> ProofResult {
    let total_cost = transcript
        .iter()
        .flat_map(|a| a.usage.iter())
        .map(|u| prices.cost_or_zero(&u.model, &u.tokens))
        .sum();
    ProofResult {
        task_id: task.id.clone(),
        outcome,
        transcript,
        total_cost,
    }
}

/// Runs up to `config.max_iterations` propose/check cycles on `task`.
///
/// Per-cycle failures (bad build, loophole, rejection, unparseable output)
/// become feedback for the next cycle. Service failures end the loop with
/// `Outcome::Error`.
pub fn run_attempt_loop_with(
    task: &TheoremTask,
    config: &ProverConfig,
    services: &ServiceBundle,
    observer: &mut dyn LoopObserver,
) -> ProofResult {
    let fail = |reason: String, transcript| finish(task, Outcome::Error { reason }, transcript, &services.prices);
    if let Err(e) = config.validate() {
        return fail(format!("invalid config: {e}"), Vec::new());
    }
    if let Err(e) = task.validate() {
        return fail(format!("invalid task: {e}"), Vec::new());
    }
    let llm = services.llm.as_ref();
    let mut memory = MemoryState::from_config(config);
    let mut transcript: Vec<AttemptRecord> = Vec::new();

    for t in 1..=config.max_iterations {
        let started = Instant::now();
        let fragments = memory.render();
        let ProposeOutput {
            proposal,
            usage,
            raw_output,
            ..
        } = match proposer::propose(task, &fragments, config, llm, &services.toolbox) {
            Ok(out) => out,
            Err(e) => return fail(format!("iteration {t}: {e}"), transcript),
        };

        let mut record = AttemptRecord {
            iteration: t,
            proposal: ProofProposal::default(),
            feedback: String::new(),
            status: AttemptStatus::Malformed,
            usage,
            wall_time: 0.0,
        };
        let mut queue_wait = 0.0;
        let mut error = None;
        let mut proved_source = None;
        match proposal {
            Err(e) => {
                record.proposal.reasoning = raw_output;
                record.feedback = format!("malformed proposal: {e}");
            }
            Ok(p) => {
                match review::review_proposal(task, &p, services.lean.as_ref(), llm, config) {
                    Ok(ReviewOutcome {
                        result,
                        source,
                        usage,
                        queue_wait: qw,
                    }) => {
                        queue_wait = qw;
                        record.feedback = result.render();
                        record.status = result.status();
                        record.usage.extend(usage);
                        if result.is_approved() {
                            proved_source = Some(source);
                        }
                    }
                    Err(e) => {
                        record.feedback = format!("review error: {e}");
                        record.status = AttemptStatus::Error;
                        error = Some(e.to_string());
                    }
                }
                record.proposal = p;
            }
        }

        // The last failed cycle has no next prompt, so it skips reflection.
        if proved_source.is_none() && error.is_none() && t < config.max_iterations {
            record.usage.extend(memory.update(&record, llm, config));
        }
        record.wall_time = (started.elapsed().as_secs_f64() - queue_wait).max(0.0);
        observer.on_attempt(task, &record);
        transcript.push(record);

        if let Some(reason) = error {
            return fail(format!("iteration {t}: {reason}"), transcript);
        }
        if let Some(final_source) = proved_source {
            return finish(
                task,
                Outcome::Proved {
                    iteration: t,
                    final_source,
                },
                transcript,
                &services.prices,
            );
        }
    }
    finish(task, Outcome::Exhausted, transcript, &services.prices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leanenv::{BuildReport, MockLean, MockScript};
    use crate::llm::{ScriptFile, ScriptedLlm, ScriptedReply};
    use crate::types::{Diagnostic, MemoryStrategy, Severity};

    const TARGET: &str = "theorem add_zero (n : Nat) : n + 0 = n := sorry";

    fn task() -> TheoremTask {
        TheoremTask::new("add_zero", TARGET, format!("import Mathlib\n\n{TARGET}\n")).unwrap()
    }

    fn answer(body: &str) -> ScriptedReply {
        ScriptedReply::text(format!(
            "reasoning: try\nimports: []\nopens: []\nupdated_theorem:\n```lean\ntheorem add_zero (n : Nat) : n + 0 = n := by\n  {body}\n```"
        ))
        .with_usage(100, 50, 10)
    }

    fn lean() -> Arc<MockLean> {
        Arc::new(MockLean::new(MockScript::default().rule(
            &["bogus"],
            BuildReport::failed(vec![Diagnostic {
                file: String::new(),
                line: 4,
                column: 2,
                severity: Severity::Error,
                message: "unknown identifier 'bogus'".into(),
            }]),
        )))
    }

    fn approve() -> ScriptedReply {
        ScriptedReply::text("check1: True, check2: True, check3: True, approved: True\nreasoning: ok")
    }

    fn config(i: usize, memory: MemoryStrategy) -> ProverConfig {
        ProverConfig {
            max_iterations: i,
            memory,
            ..Default::default()
        }
    }

    #[test]
    fn fails_twice_then_proves() {
        let llm = Arc::new(ScriptedLlm::new(ScriptFile {
            proposer: vec![answer("exact bogus"), answer("exact bogus"), answer("omega")],
            reviewer: vec![approve()],
            ..Default::default()
        }));
        let services = ServiceBundle::new(llm.clone(), lean());
        let mut seen = Vec::new();
        let r = run_attempt_loop_with(&task(), &config(5, MemoryStrategy::HistoryN(2)), &services, &mut |_: &TheoremTask, a: &AttemptRecord| seen.push(a.iteration));
        assert_eq!(r.solved_at(), Some(3));
        assert_eq!(r.transcript.len(), 3);
        assert_eq!(seen, vec![1, 2, 3]);
        assert_eq!(r.transcript[0].status, AttemptStatus::BuildFailed);
        assert!(r.transcript[0].feedback.contains("line 4: unknown identifier 'bogus'"));
        let Outcome::Proved { final_source, .. } = &r.outcome else { panic!() };
        assert!(final_source.contains("omega"));
        // The third prompt carries attempt 2's feedback.
        let third = llm.calls().into_iter().filter(|c| c.role == crate::types::CallRole::Proposer).nth(2).unwrap().messages;
        assert!(third[2].content.contains("unknown identifier 'bogus'"));
    }

    #[test]
    fn always_sorry_exhausts() {
        let llm = Arc::new(ScriptedLlm::new(ScriptFile {
            default: Some(answer("sorry")),
            ..Default::default()
        }));
        let r = run_attempt_loop(&task(), &config(5, MemoryStrategy::None), &ServiceBundle::new(llm, lean()));
        assert_eq!(r.outcome, Outcome::Exhausted);
        assert_eq!(r.transcript.len(), 5);
        let its: Vec<usize> = r.transcript.iter().map(|a| a.iteration).collect();
        assert_eq!(its, vec![1, 2, 3, 4, 5]);
        assert!(r.transcript.iter().all(|a| a.status == AttemptStatus::Incomplete));
    }

    #[test]
    fn apply_question_never_proves() {
        let llm = Arc::new(ScriptedLlm::new(ScriptFile {
            proposer: vec![answer("apply?"), answer("omega")],
            reviewer: vec![approve()],
            ..Default::default()
        }));
        let r = run_attempt_loop(&task(), &config(3, MemoryStrategy::None), &ServiceBundle::new(llm.clone(), lean()));
        assert_eq!(r.solved_at(), Some(2));
        assert_eq!(r.transcript[0].status, AttemptStatus::Rejected);
        assert!(r.transcript[0].feedback.contains("`apply?`"));
        // Only the clean proof reached the reviewer.
        assert_eq!(llm.calls().iter().filter(|c| c.role == crate::types::CallRole::Reviewer).count(), 1);
    }

    #[test]
    fn malformed_output_consumes_iteration() {
        let llm = Arc::new(ScriptedLlm::new(ScriptFile {
            proposer: vec![ScriptedReply::text("I think omega works."), answer("omega")],
            reviewer: vec![approve()],
            ..Default::default()
        }));
        let r = run_attempt_loop(&task(), &config(3, MemoryStrategy::None), &ServiceBundle::new(llm, lean()));
        assert_eq!(r.solved_at(), Some(2));
        assert_eq!(r.transcript[0].feedback, "malformed proposal: missing updated_theorem");
    }

    #[test]
    fn llm_outage_is_error_outcome() {
        let llm = Arc::new(ScriptedLlm::new(ScriptFile {
            proposer: vec![answer("exact bogus"), ScriptedReply::fail_transport("connection refused")],
            ..Default::default()
        }));
        let r = run_attempt_loop(&task(), &config(3, MemoryStrategy::None), &ServiceBundle::new(llm, lean()));
        let Outcome::Error { reason } = &r.outcome else { panic!("{:?}", r.outcome) };
        assert!(reason.contains("connection refused"));
        assert_eq!(r.transcript.len(), 1);
    }

    #[test]
    fn invalid_config_is_error() {
        let llm = Arc::new(ScriptedLlm::fifo(Vec::<String>::new()));
        let r = run_attempt_loop(&task(), &config(0, MemoryStrategy::None), &ServiceBundle::new(llm, lean()));
        assert!(matches!(r.outcome, Outcome::Error { .. }));
        assert!(r.transcript.is_empty());
    }

    #[test]
    fn cost_sums_transcript_usage() {
        let llm = Arc::new(ScriptedLlm::new(ScriptFile {
            proposer: vec![answer("exact bogus"), answer("omega")],
            reviewer: vec![approve().with_usage(1000, 0, 0)],
            ..Default::default()
        }));
        let prices: PriceTable = toml::from_str("[mock]\ninput = 3.0\noutput = 15.0\n").unwrap();
        let services = ServiceBundle::new(llm, lean()).with_prices(prices);
        let r = run_attempt_loop(&task(), &config(3, MemoryStrategy::None), &services);
        // 2 proposer calls (100 in, 50 out, 10 thinking at the output rate) + 1 reviewer call.
        let expected = (2.0 * (100.0 * 3.0 + 60.0 * 15.0) + 1000.0 * 3.0) / 1e6;
        assert!((r.total_cost - expected).abs() < 1e-12);
    }
}
