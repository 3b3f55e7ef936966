//! The distillation operator: builds bounded workspaces from a round's
//! drafts under each strategy, plus the oracle interventions used to probe
//! verification effects.
//!
//! Workspaces are rebuilt fresh each round from the immediately preceding
//! round's drafts only; nothing persists across rounds.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::backend::count_tokens;
use crate::budget::CallKind;
use crate::error::{Error, Result};
use crate::prompting::{PromptKind, PromptPayload};
use crate::runtime::{generate_parallel, RunEnv, RunState};
use crate::seeds;
use crate::types::{Draft, Problem, Workspace, WorkspaceKind};

/// Oracle intervention: which verdict class is admitted to the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Correct,
    Incorrect,
}

/// Distillation context: one round's drafts being compressed for the next.
pub struct DistillCtx<'e, 'b, 's> {
    pub env: &'e RunEnv<'b>,
    pub problem: &'e Problem,
    /// Round whose drafts are being distilled.
    pub round: u32,
    pub state: &'s mut RunState,
}

impl DistillCtx<'_, '_, '_> {
    fn select_seed(&self, tag: &str) -> u64 {
        seeds::call_seed(self.env.run_seed, &self.problem.id, self.round, 0, tag)
    }

    /// One distill call over all draft solutions, producing a single
    /// kappa-enforced summary workspace shared downstream.
    pub fn global_summary(&mut self, drafts: &[Draft], kappa: u64) -> Result<Workspace> {
        if drafts.is_empty() {
            return Err(Error::Prompt(
                "global_summary needs at least one draft".into(),
            ));
        }
        let solutions: Vec<String> = drafts.iter().map(|d| d.solution.clone()).collect();
        let prompt = self.env.templates.render_prompt(
            PromptKind::DistillSummary,
            self.problem,
            &PromptPayload::CandidatesWithLimit(&solutions, kappa),
        )?;
        let completion = generate_parallel(
            self.env,
            self.problem,
            self.round,
            CallKind::Distill,
            &[prompt],
        )?
        .remove(0);
        let (solution, _) =
            self.state
                .record_model_call(self.round, 0, CallKind::Distill, &completion)?;
        let provenance = drafts.iter().map(|d| (d.round, d.branch)).collect();
        let ws = Workspace::summary(solution, provenance, kappa);
        self.enforce_kappa(ws, kappa)
    }

    /// One grade call scores every draft; the k highest-scoring solutions
    /// form a single candidate workspace shared by every next-round branch.
    /// Ties break toward the lower branch index.
    pub fn topk_shared(&mut self, drafts: &[Draft], k: u32, kappa: u64) -> Result<Workspace> {
        let scores = self.grade_drafts(drafts, 0)?;
        let ws = select_topk(drafts, &scores, k, kappa);
        self.enforce_kappa(ws, kappa)
    }

    /// One independent grade call per downstream branch; branch j receives
    /// its own top-k workspace.
    pub fn topk_per_sample(
        &mut self,
        drafts: &[Draft],
        k: u32,
        branches: u32,
        kappa: u64,
    ) -> Result<Vec<Workspace>> {
        if branches == 0 {
            return Err(Error::Config(
                "topk_per_sample needs at least one branch".into(),
            ));
        }
        let solutions: Vec<String> = drafts.iter().map(|d| d.solution.clone()).collect();
        let prompt = self.env.templates.render_prompt(
            PromptKind::Grade,
            self.problem,
            &PromptPayload::Candidates(&solutions),
        )?;
        let prompts: Vec<String> = (0..branches).map(|_| prompt.clone()).collect();
        let completions = generate_parallel(
            self.env,
            self.problem,
            self.round,
            CallKind::Grade,
            &prompts,
        )?;
        let mut workspaces = Vec::with_capacity(branches as usize);
        for (j, completion) in completions.into_iter().enumerate() {
            let (solution, _) =
                self.state
                    .record_model_call(self.round, j as u32, CallKind::Grade, &completion)?;
            let scores = self.parse_scores(&solution, drafts.len());
            let ws = select_topk(drafts, &scores, k, kappa);
            workspaces.push(self.enforce_kappa(ws, kappa)?);
        }
        Ok(workspaces)
    }

    /// Each branch receives k drafts sampled uniformly without replacement,
    /// independently per branch.
    pub fn random_k(
        &mut self,
        drafts: &[Draft],
        k: u32,
        branches: u32,
        kappa: u64,
    ) -> Result<Vec<Workspace>> {
        let raw = random_k(drafts, k, branches, self.select_seed("random_k"), kappa)?;
        raw.into_iter()
            .map(|ws| self.enforce_kappa(ws, kappa))
            .collect()
    }

    /// Oracle intervention shared downstream; verdicts come from the run's
    /// verifier boundary against the problem's gold answer.
    pub fn oracle(
        &mut self,
        drafts: &[Draft],
        mode: OracleMode,
        k: u32,
        kappa: u64,
    ) -> Result<Workspace> {
        let gold =
            self.problem.gold_answer.as_deref().ok_or_else(|| {
                Error::Config("oracle distill modes require a gold answer".into())
            })?;
        let verdicts: Vec<bool> = drafts
            .iter()
            .map(|d| self.env.check_answer(d.answer.as_deref(), gold))
            .collect::<Result<_>>()?;
        let ws = oracle_select(
            drafts,
            &verdicts,
            mode,
            k,
            self.select_seed("oracle"),
            kappa,
        )?;
        self.enforce_kappa(ws, kappa)
    }

    fn grade_drafts(&mut self, drafts: &[Draft], branch: u32) -> Result<Vec<u32>> {
        let solutions: Vec<String> = drafts.iter().map(|d| d.solution.clone()).collect();
        let prompt = self.env.templates.render_prompt(
            PromptKind::Grade,
            self.problem,
            &PromptPayload::Candidates(&solutions),
        )?;
        let completion = generate_parallel(
            self.env,
            self.problem,
            self.round,
            CallKind::Grade,
            &[prompt],
        )?
        .remove(0);
        let (solution, _) =
            self.state
                .record_model_call(self.round, branch, CallKind::Grade, &completion)?;
        Ok(self.parse_scores(&solution, drafts.len()))
    }

    /// Expects one `Candidate <i>: <score>` line per draft with a bare
    /// integer 0-10; anything unparseable scores 0 with a recorded warning
    /// so flaky graders never kill a run.
    fn parse_scores(&mut self, text: &str, n: usize) -> Vec<u32> {
        let parsed = parse_grade_lines(text, n);
        let mut scores = Vec::with_capacity(n);
        for (i, score) in parsed.into_iter().enumerate() {
            match score {
                Some(s) => scores.push(s),
                None => {
                    self.state.warnings.push(format!(
                        "round {}: grade for candidate {} unparseable; scored 0",
                        self.round,
                        i + 1
                    ));
                    scores.push(0);
                }
            }
        }
        scores
    }

    /// Kappa enforcement with the backend available: summaries over budget
    /// get one re-summarization attempt under a stricter limit before the
    /// lossy fallback.
    pub fn enforce_kappa(&mut self, ws: Workspace, kappa: u64) -> Result<Workspace> {
        if ws.token_count <= kappa {
            return Ok(ws);
        }
        let ws = if ws.kind == WorkspaceKind::Summary {
            let stricter = (kappa * 3 / 4).max(1);
            let body = vec![ws.text.clone()];
            let prompt = self.env.templates.render_prompt(
                PromptKind::DistillSummary,
                self.problem,
                &PromptPayload::CandidatesWithLimit(&body, stricter),
            )?;
            let completion = generate_parallel(
                self.env,
                self.problem,
                self.round,
                CallKind::Distill,
                &[prompt],
            )?
            .remove(0);
            let (solution, _) =
                self.state
                    .record_model_call(self.round, 0, CallKind::Distill, &completion)?;
            Workspace::summary(solution, ws.provenance.clone(), ws.kappa)
        } else {
            ws
        };
        let (enforced, truncated) = enforce_kappa(ws, kappa);
        if truncated {
            self.state.note_kappa_violation(&format!(
                "round {} {} workspace forced to {} tokens",
                self.round,
                match enforced.kind {
                    WorkspaceKind::Summary => "summary",
                    WorkspaceKind::CandidateList => "candidate",
                    WorkspaceKind::Empty => "empty",
                },
                kappa
            ));
        }
        Ok(enforced)
    }
}

/// Pure kappa enforcement (no backend): candidate lists drop their
/// lowest-ranked entries until within bound; any text still over budget is
/// hard-truncated at the token boundary. Returns the workspace and whether
/// a lossy step was taken.
pub fn enforce_kappa(mut ws: Workspace, kappa: u64) -> (Workspace, bool) {
    if ws.token_count <= kappa {
        return (ws, false);
    }
    let mut lossy = false;
    if ws.kind == WorkspaceKind::CandidateList {
        while ws.candidates.len() > 1 && ws.token_count > kappa {
            ws.candidates.pop();
            ws.provenance.truncate(ws.candidates.len());
            let rebuilt = Workspace::candidate_list(
                std::mem::take(&mut ws.candidates),
                std::mem::take(&mut ws.provenance),
                ws.kappa,
                ws.fallback,
            );
            ws = rebuilt;
            lossy = true;
        }
    }
    if ws.token_count > kappa {
        // Keep the first kappa tokens; the counter is ceil(chars/4), so a
        // 4*kappa character prefix is exactly kappa tokens.
        let keep_chars = (kappa * 4) as usize;
        ws.text = ws.text.chars().take(keep_chars).collect();
        ws.token_count = count_tokens(&ws.text);
        lossy = true;
    }
    debug_assert!(ws.token_count <= kappa);
    (ws, lossy)
}

/// Rank order: score descending, then lower branch index.
fn select_topk(drafts: &[Draft], scores: &[u32], k: u32, kappa: u64) -> Workspace {
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .cmp(&scores[a])
            .then(drafts[a].branch.cmp(&drafts[b].branch))
    });
    order.truncate((k as usize).min(drafts.len()));
    let candidates = order.iter().map(|&i| drafts[i].solution.clone()).collect();
    let provenance = order
        .iter()
        .map(|&i| (drafts[i].round, drafts[i].branch))
        .collect();
    Workspace::candidate_list(candidates, provenance, kappa, false)
}

/// Uniform k-without-replacement per branch from a seeded generator. Bound
/// enforcement is left to the caller.
pub fn random_k(
    drafts: &[Draft],
    k: u32,
    branches: u32,
    base_seed: u64,
    kappa: u64,
) -> Result<Vec<Workspace>> {
    let k = k as usize;
    if k > drafts.len() {
        return Err(Error::Config(format!(
            "random_k: k={k} exceeds draft count {}",
            drafts.len()
        )));
    }
    let mut workspaces = Vec::with_capacity(branches as usize);
    for j in 0..branches {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::substream(base_seed, &format!("branch:{j}")));
        let mut indices: Vec<usize> = (0..drafts.len()).collect();
        indices.shuffle(&mut rng);
        indices.truncate(k);
        indices.sort_unstable();
        let candidates = indices
            .iter()
            .map(|&i| drafts[i].solution.clone())
            .collect();
        let provenance = indices
            .iter()
            .map(|&i| (drafts[i].round, drafts[i].branch))
            .collect();
        workspaces.push(Workspace::candidate_list(
            candidates, provenance, kappa, false,
        ));
    }
    Ok(workspaces)
}

/// Selects k drafts uniformly among those whose verdict matches the mode;
/// when fewer than k match, takes every match and fills the remainder
/// uniformly from the complement, flagging the fallback.
pub fn oracle_select(
    drafts: &[Draft],
    verdicts: &[bool],
    mode: OracleMode,
    k: u32,
    seed: u64,
    kappa: u64,
) -> Result<Workspace> {
    if verdicts.len() != drafts.len() {
        return Err(Error::Config(format!(
            "oracle_select: {} verdicts for {} drafts",
            verdicts.len(),
            drafts.len()
        )));
    }
    let k = (k as usize).min(drafts.len());
    let want = |v: bool| match mode {
        OracleMode::Correct => v,
        OracleMode::Incorrect => !v,
    };
    let mut matching: Vec<usize> = (0..drafts.len()).filter(|&i| want(verdicts[i])).collect();
    let mut complement: Vec<usize> = (0..drafts.len()).filter(|&i| !want(verdicts[i])).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize>;
    let fallback;
    if matching.len() >= k {
        matching.shuffle(&mut rng);
        selected = matching[..k].to_vec();
        fallback = false;
    } else {
        selected = matching.clone();
        complement.shuffle(&mut rng);
        selected.extend_from_slice(&complement[..k - matching.len()]);
        fallback = true;
    }
    selected.sort_unstable();
    let candidates = selected
        .iter()
        .map(|&i| drafts[i].solution.clone())
        .collect();
    let provenance = selected
        .iter()
        .map(|&i| (drafts[i].round, drafts[i].branch))
        .collect();
    Ok(Workspace::candidate_list(
        candidates, provenance, kappa, fallback,
    ))
}

fn grade_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*Candidate\s+(\d+)\s*:\s*(-?\d+)\s*$").expect("valid regex"))
}

/// Per-candidate scores from grade output: `Some(score)` for a bare 0-10
/// integer on a marked line, `None` otherwise.
fn parse_grade_lines(text: &str, n: usize) -> Vec<Option<u32>> {
    let mut found: Vec<Option<u32>> = vec![None; n];
    for line in text.lines() {
        if let Some(caps) = grade_line_re().captures(line) {
            let idx: usize = match caps[1].parse() {
                Ok(v) => v,
                Err(_) => continue,
            };
            if idx == 0 || idx > n {
                continue;
            }
            let score: i64 = match caps[2].parse() {
                Ok(v) => v,
                Err(_) => continue,
            };
            if (0..=10).contains(&score) {
                found[idx - 1] = Some(score as u32);
            }
        }
    }
    found
}
