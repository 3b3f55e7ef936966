//! Shared run machinery: per-run environment, call recording, and
//! intra-round parallel generation.
//!
//! Ledger appends funnel through a single owner. Parallel drafts are
//! collected by branch index and recorded in deterministic
//! (round, kind, branch) order, so completion order never influences the
//! ledger, the transcript, or any seeded decision.

use crate::backend::{Backend, CallCtx, Completion, GenParams};
use crate::budget::{per_call_allowance, BudgetLedger, CallKind, CallRecord, SeqPolicy};
use crate::error::Result;
use crate::prompting::{strip_think_spans, TemplateSet};
use crate::seeds;
use crate::types::{Draft, Outcome, Problem, RoundTranscript, TranscriptRecord, Workspace};
use crate::verify;

/// Generation settings shared by every call of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSettings {
    pub thinking_budget: u64,
    pub solution_reserve: u64,
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for GenSettings {
    fn default() -> Self {
        GenSettings {
            thinking_budget: 24_576,
            solution_reserve: 2_048,
            temperature: 1.0,
            top_p: 1.0,
        }
    }
}

impl GenSettings {
    pub fn allowance(&self) -> u64 {
        per_call_allowance(self.thinking_budget, self.solution_reserve)
    }
}

/// Everything an operator needs to issue calls for one run.
pub struct RunEnv<'a> {
    pub backend: &'a dyn Backend,
    pub templates: &'a TemplateSet,
    pub gen: GenSettings,
    pub seq_policy: SeqPolicy,
    /// Seed for this run (the cell seed under repeated evaluation).
    pub run_seed: u64,
    /// External verifier replacing the normalized-answer checker when set.
    pub verifier: Option<verify::PluginVerifier>,
}

impl RunEnv<'_> {
    pub fn call_params(
        &self,
        problem: &Problem,
        round: u32,
        branch: u32,
        kind: CallKind,
    ) -> GenParams {
        GenParams {
            max_tokens: self.gen.allowance(),
            temperature: self.gen.temperature,
            top_p: self.gen.top_p,
            seed: seeds::call_seed(self.run_seed, &problem.id, round, branch, kind.as_str()),
        }
    }

    /// Verifier boundary used for outcome verdicts and oracle selection.
    /// A missing answer is wrong without consulting any verifier.
    pub fn check_answer(&self, answer: Option<&str>, gold: &str) -> Result<bool> {
        let Some(answer) = answer else {
            return Ok(false);
        };
        match &self.verifier {
            Some(plugin) => plugin.check(answer, gold),
            None => Ok(verify::check(Some(answer), gold)),
        }
    }
}

/// Mutable accumulation for one run: ledger, transcript, counters.
#[derive(Debug)]
pub struct RunState {
    pub ledger: BudgetLedger,
    pub rounds: Vec<RoundTranscript>,
    pub records: Vec<TranscriptRecord>,
    pub kappa_violations: u32,
    pub warnings: Vec<String>,
}

impl RunState {
    pub fn new(seq_policy: SeqPolicy) -> Self {
        RunState {
            ledger: BudgetLedger::new(seq_policy),
            rounds: Vec::new(),
            records: Vec::new(),
            kappa_violations: 0,
            warnings: Vec::new(),
        }
    }

    /// Records one completed model call in the ledger and the flat
    /// transcript; returns the stripped solution and normalized answer.
    pub fn record_model_call(
        &mut self,
        round: u32,
        branch: u32,
        kind: CallKind,
        completion: &Completion,
    ) -> Result<(String, Option<String>)> {
        let solution = strip_think_spans(&completion.text);
        let answer = verify::extract_boxed(&solution).map(|a| verify::normalize_answer(&a));
        let call_id = self.ledger.next_call_id();
        self.ledger.record_call(CallRecord {
            call_id,
            round,
            branch,
            kind,
            in_tokens: completion.in_tokens,
            out_tokens: completion.out_tokens,
        })?;
        self.records.push(TranscriptRecord::Call {
            call_id,
            round,
            branch,
            kind,
            in_tokens: completion.in_tokens,
            out_tokens: completion.out_tokens,
            solution: solution.clone(),
            answer: answer.clone(),
        });
        Ok((solution, answer))
    }

    /// Records a workspace produced from `round`'s drafts for consumption
    /// by next-round branch `branch`.
    pub fn record_workspace(&mut self, round: u32, branch: u32, ws: &Workspace) {
        self.records.push(TranscriptRecord::Workspace {
            round,
            branch,
            kind: ws.kind,
            token_count: ws.token_count,
            kappa: ws.kappa,
            provenance: ws.provenance.clone(),
            fallback: ws.fallback,
            text: ws.text.clone(),
        });
    }

    pub fn push_round(&mut self, round: RoundTranscript) {
        self.rounds.push(round);
    }

    pub fn note_kappa_violation(&mut self, detail: &str) {
        self.kappa_violations += 1;
        self.warnings.push(format!("kappa violation: {detail}"));
        log::warn!("workspace exceeded kappa: {detail}");
    }

    /// Seals the run into an outcome, deriving the verdict through the
    /// run's verifier boundary iff the problem carries a gold answer.
    pub fn finish(
        self,
        env: &RunEnv<'_>,
        problem: &Problem,
        seed: u64,
        final_answer: Option<String>,
    ) -> Result<Outcome> {
        let verdict = match &problem.gold_answer {
            Some(gold) => Some(env.check_answer(final_answer.as_deref(), gold)?),
            None => None,
        };
        Ok(Outcome {
            final_answer,
            verdict,
            seed,
            kappa_violations: self.kappa_violations,
            warnings: self.warnings,
            ledger: self.ledger,
            transcript: self.rounds,
            records: self.records,
        })
    }
}

/// Issues one call per prompt concurrently (branch index = position) and
/// returns completions in branch order. Errors are reported for the lowest
/// failing branch.
pub fn generate_parallel(
    env: &RunEnv<'_>,
    problem: &Problem,
    round: u32,
    kind: CallKind,
    prompts: &[String],
) -> Result<Vec<Completion>> {
    if prompts.len() == 1 {
        let params = env.call_params(problem, round, 0, kind);
        let ctx = CallCtx {
            problem,
            round,
            branch: 0,
            kind,
        };
        return Ok(vec![env.backend.generate(&prompts[0], &params, &ctx)?]);
    }

    let mut slots: Vec<Option<std::result::Result<Completion, crate::error::BackendError>>> =
        (0..prompts.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(prompts.len());
        for (branch, prompt) in prompts.iter().enumerate() {
            let params = env.call_params(problem, round, branch as u32, kind);
            let backend = env.backend;
            handles.push(scope.spawn(move || {
                let ctx = CallCtx {
                    problem,
                    round,
                    branch: branch as u32,
                    kind,
                };
                backend.generate(prompt, &params, &ctx)
            }));
        }
        for (slot, handle) in slots.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("generation thread panicked"));
        }
    });

    let mut completions = Vec::with_capacity(prompts.len());
    for slot in slots {
        completions.push(slot.expect("slot filled")?);
    }
    Ok(completions)
}

/// Builds the draft artifact from a recorded call.
pub fn make_draft(
    round: u32,
    branch: u32,
    completion: &Completion,
    solution: String,
    answer: Option<String>,
) -> Draft {
    Draft {
        round,
        branch,
        raw_text: completion.text.clone(),
        solution,
        answer,
        in_tokens: completion.in_tokens,
        out_tokens: completion.out_tokens,
    }
}
