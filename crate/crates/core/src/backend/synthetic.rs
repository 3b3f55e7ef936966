//! Parameterized stochastic synthetic solver.
//!
//! Models the anchoring phenomenon: a draft's latent correctness is drawn
//! from a conditional probability chosen by the composition of the
//! workspace visible in its prompt (empty / all correct / mixed / all
//! incorrect). Drafts embed correctness only by emitting either the gold
//! answer or a seeded wrong answer inside the standard boxed format, so the
//! verification path is exercised end to end; there is no side channel.
//!
//! The solver reads its conditioning from the prompt text itself: candidate
//! blocks and summary sections are parsed for boxed answers and compared
//! against the gold answer. Summaries written by the solver list the
//! candidates' boxed answers; when every candidate was correct, the correct
//! signal is lost with probability 1 - summary_recall by injecting a wrong
//! value, which degrades the composition seen downstream to mixed.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::budget::CallKind;
use crate::error::BackendError;
use crate::seeds::{fnv1a, substream, unit};
use crate::verify;

use super::{Backend, CallCtx, Completion, FinishReason, GenParams};

/// Composition of the workspace conditioning a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkspaceComposition {
    Empty,
    AllCorrect,
    Mixed,
    AllIncorrect,
}

/// Fixed (input, output) token counts reported per call kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenProfile {
    pub draft: (u64, u64),
    pub distill: (u64, u64),
    pub grade: (u64, u64),
    pub refine: (u64, u64),
    #[serde(rename = "final")]
    pub final_call: (u64, u64),
}

impl Default for TokenProfile {
    fn default() -> Self {
        TokenProfile {
            draft: (200, 800),
            distill: (1000, 200),
            grade: (600, 50),
            refine: (400, 900),
            final_call: (400, 900),
        }
    }
}

impl TokenProfile {
    pub fn for_kind(&self, kind: CallKind) -> (u64, u64) {
        match kind {
            CallKind::Draft => self.draft,
            CallKind::Distill => self.distill,
            CallKind::Grade => self.grade,
            CallKind::Refine => self.refine,
            CallKind::Final => self.final_call,
        }
    }
}

/// Solver parameters. All probabilities live in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    /// P(correct) for a fresh draft on an empty workspace.
    pub p_empty: f64,
    /// P(correct) given an all-correct workspace.
    pub p_all_correct: f64,
    /// P(correct) given a mixed workspace.
    pub p_mixed: f64,
    /// P(correct) given an all-incorrect workspace.
    pub p_all_incorrect: f64,
    /// Probability a pairwise grade ranks a correct candidate above an
    /// incorrect one.
    pub grader_quality: f64,
    /// Probability a correct candidate's signal survives global
    /// summarization.
    pub summary_recall: f64,
    pub token_profile: TokenProfile,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            p_empty: 0.5,
            p_all_correct: 0.9,
            p_mixed: 0.6,
            p_all_incorrect: 0.2,
            grader_quality: 1.0,
            summary_recall: 1.0,
            token_profile: TokenProfile::default(),
        }
    }
}

impl SyntheticParams {
    /// Conditional correctness probability for a workspace composition.
    pub fn correctness(&self, composition: WorkspaceComposition) -> f64 {
        match composition {
            WorkspaceComposition::Empty => self.p_empty,
            WorkspaceComposition::AllCorrect => self.p_all_correct,
            WorkspaceComposition::Mixed => self.p_mixed,
            WorkspaceComposition::AllIncorrect => self.p_all_incorrect,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("p_empty", self.p_empty),
            ("p_all_correct", self.p_all_correct),
            ("p_mixed", self.p_mixed),
            ("p_all_incorrect", self.p_all_incorrect),
            ("grader_quality", self.grader_quality),
            ("summary_recall", self.summary_recall),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SyntheticBackend {
    params: SyntheticParams,
}

impl SyntheticBackend {
    pub fn new(params: SyntheticParams) -> Self {
        SyntheticBackend { params }
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    fn gold_for(&self, ctx: &CallCtx<'_>) -> String {
        match &ctx.problem.gold_answer {
            Some(g) => verify::normalize_answer(g),
            // Problems without gold still get a stable target so replies
            // stay deterministic; no verdict will be derived from them.
            None => (fnv1a(ctx.problem.id.as_bytes()) % 1000).to_string(),
        }
    }

    fn solve(&self, prompt: &str, params: &GenParams, ctx: &CallCtx<'_>) -> String {
        let gold = self.gold_for(ctx);
        let composition = infer_composition(prompt, &gold);
        let p = self.params.correctness(composition);
        let correct = unit(substream(params.seed, "correct")) < p;
        let answer = if correct {
            gold
        } else {
            wrong_answer(substream(params.seed, "wrong"), &gold)
        };
        format!(
            "<think>\nExploring the problem with the provided context.\n</think>\nWorking through the computation step by step, the result is {answer}. The final answer is $\\boxed{{{answer}}}$."
        )
    }

    fn summarize(&self, prompt: &str, params: &GenParams, ctx: &CallCtx<'_>) -> String {
        let gold = self.gold_for(ctx);
        let mut answers: Vec<String> = Vec::new();
        let mut verdicts: Vec<bool> = Vec::new();
        for block in candidate_block_texts(prompt) {
            let answer = verify::extract_boxed(&block).map(|a| verify::normalize_answer(&a));
            verdicts.push(verify::check(answer.as_deref(), &gold));
            if let Some(a) = answer {
                if !answers.contains(&a) {
                    answers.push(a);
                }
            }
        }
        let all_correct = !verdicts.is_empty() && verdicts.iter().all(|&v| v);
        if all_correct && unit(substream(params.seed, "recall")) < 1.0 - self.params.summary_recall
        {
            // Recall loss: a spurious value enters the summary, so readers
            // see a mixed signal.
            answers.push(wrong_answer(substream(params.seed, "recall-wrong"), &gold));
        }
        let listed = if answers.is_empty() {
            "none stated".to_string()
        } else {
            answers
                .iter()
                .map(|a| format!("$\\boxed{{{a}}}$"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let contradictions = if answers.len() > 1 {
            "the candidates disagree on the final value"
        } else {
            "no contradictions among the candidates"
        };
        format!(
            "<think>\nComparing the candidate solutions.\n</think>\nSummary of the candidate solutions:\n- Agreements: the candidates propose these final answers: {listed}.\n- Contradictions: {contradictions}.\n- Derived facts: the intermediate computations were consistent with the proposals above.\n- Open subgoals: verify each proposed value independently."
        )
    }

    fn grade(&self, prompt: &str, params: &GenParams, ctx: &CallCtx<'_>) -> String {
        let gold = self.gold_for(ctx);
        // Perceived verdicts flip independently with probability
        // 1 - sqrt(q), so a (correct, incorrect) pair is ranked correctly
        // with probability q.
        let flip_p = 1.0 - self.params.grader_quality.max(0.0).sqrt();
        let mut lines = vec!["<think>\nScoring each candidate.\n</think>".to_string()];
        for (i, block) in candidate_block_texts(prompt).into_iter().enumerate() {
            let answer = verify::extract_boxed(&block).map(|a| verify::normalize_answer(&a));
            let correct = verify::check(answer.as_deref(), &gold);
            let flipped = unit(substream(params.seed, &format!("flip:{i}"))) < flip_p;
            let perceived = correct != flipped;
            let score = if perceived { 8 } else { 3 };
            lines.push(format!("Candidate {}: {}", i + 1, score));
        }
        lines.join("\n")
    }
}

impl Backend for SyntheticBackend {
    fn generate(
        &self,
        prompt: &str,
        params: &GenParams,
        ctx: &CallCtx<'_>,
    ) -> Result<Completion, BackendError> {
        params.validate()?;
        if prompt.is_empty() {
            return Err(BackendError::InvalidParams("empty prompt".into()));
        }
        let text = match ctx.kind {
            CallKind::Draft | CallKind::Refine | CallKind::Final => self.solve(prompt, params, ctx),
            CallKind::Distill => self.summarize(prompt, params, ctx),
            CallKind::Grade => self.grade(prompt, params, ctx),
        };
        let (in_tokens, profile_out) = self.params.token_profile.for_kind(ctx.kind);
        let (out_tokens, finish) = if profile_out > params.max_tokens {
            (params.max_tokens, FinishReason::Length)
        } else {
            (profile_out, FinishReason::Stop)
        };
        Ok(Completion {
            text,
            in_tokens,
            out_tokens,
            finish,
        })
    }
}

/// Workspace composition visible in a prompt: a summary section wins over
/// candidate blocks; neither means an empty workspace.
fn infer_composition(prompt: &str, gold: &str) -> WorkspaceComposition {
    if let Some(summary) = summary_text(prompt) {
        let answers = verify::extract_boxed_all(&summary);
        if answers.is_empty() {
            // Truncation can destroy the signal entirely; readers treat
            // such a summary as an uncertain mixture.
            return WorkspaceComposition::Mixed;
        }
        return composition_of(
            &answers
                .iter()
                .map(|a| verify::check(Some(a), gold))
                .collect::<Vec<_>>(),
        );
    }
    let blocks = candidate_block_texts(prompt);
    if blocks.is_empty() {
        return WorkspaceComposition::Empty;
    }
    let verdicts: Vec<bool> = blocks
        .iter()
        .map(|b| {
            let answer = verify::extract_boxed(b);
            verify::check(answer.as_deref(), gold)
        })
        .collect();
    composition_of(&verdicts)
}

fn composition_of(verdicts: &[bool]) -> WorkspaceComposition {
    if verdicts.is_empty() {
        return WorkspaceComposition::Mixed;
    }
    if verdicts.iter().all(|&v| v) {
        WorkspaceComposition::AllCorrect
    } else if verdicts.iter().all(|&v| !v) {
        WorkspaceComposition::AllIncorrect
    } else {
        WorkspaceComposition::Mixed
    }
}

fn block_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?s)<model_response(?:_\d+)?>(.*?)</model_response(?:_\d+)?>")
            .expect("valid regex")
    })
}

fn summary_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<summary>(.*?)</summary>").expect("valid regex"))
}

fn candidate_block_texts(prompt: &str) -> Vec<String> {
    block_re()
        .captures_iter(prompt)
        .map(|c| c[1].to_string())
        .collect()
}

fn summary_text(prompt: &str) -> Option<String> {
    summary_re().captures(prompt).map(|c| c[1].to_string())
}

/// Deterministic wrong answer distinct from gold under `verify::check`.
fn wrong_answer(seed: u64, gold: &str) -> String {
    for t in 0..1000u64 {
        let candidate = ((seed % 1000) + t) % 1000;
        let s = candidate.to_string();
        if !verify::check(Some(&s), gold) {
            return s;
        }
    }
    unreachable!("at most one residue matches gold");
}
