//! The three inference regimes.
//!
//! - Long-CoT: one base-prompt call.
//! - SR: a single artifact revised over R rounds, conditioned only on the
//!   previous stripped solution.
//! - PDR: per round, parallel drafts conditioned on the previous round's
//!   workspace(s), distilled into fresh bounded workspace(s); the final
//!   round is a single generation.
//!
//! Degeneracies hold by construction: PDR with fanout [1] and SR with R=1
//! both reduce to exactly the Long-CoT transcript under the same seed.

use serde::{Deserialize, Serialize};

use crate::budget::CallKind;
use crate::distill::{DistillCtx, OracleMode};
use crate::error::{Error, Result};
use crate::prompting::{PromptKind, PromptPayload};
use crate::runtime::{generate_parallel, make_draft, RunEnv, RunState};
use crate::types::{
    DistillMode, Draft, Outcome, Problem, RoundSchedule, RoundTranscript, Workspace, WorkspaceKind,
};

/// SR prompt variant: plain refinement, or error analysis followed by the
/// revised solution in the same call (one call keeps the sequential budget
/// comparable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrVariant {
    #[default]
    Plain,
    ErrorAnalysis,
}

/// Checks the schedule rules: at least one round, positive fan-outs,
/// k within the smallest draft-producing fan-out, and a single generation
/// in the last round.
pub fn validate_schedule(schedule: &RoundSchedule) -> Result<()> {
    let g = &schedule.fanout;
    if g.is_empty() {
        return Err(Error::Config(
            "schedule must have at least one round (R >= 1)".into(),
        ));
    }
    if let Some(bad) = g.iter().find(|&&x| x == 0) {
        return Err(Error::Config(format!(
            "fan-out entries must be positive integers, found {bad}"
        )));
    }
    if schedule.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    // The final single-generation round produces no candidate pool, so it
    // is exempt from the k bound when well-formed.
    let pool: &[u32] = if *g.last().unwrap() == 1 && g.len() >= 2 {
        &g[..g.len() - 1]
    } else {
        g
    };
    if let Some(&min_g) = pool.iter().min() {
        if schedule.k > min_g {
            return Err(Error::Config(format!(
                "k = {} exceeds the smallest fan-out {} (k <= min g_r required)",
                schedule.k, min_g
            )));
        }
    }
    if *g.last().unwrap() != 1 {
        return Err(Error::Config(format!(
            "the last round must have fan-out 1, found {}",
            g.last().unwrap()
        )));
    }
    Ok(())
}

/// One base-prompt call; the answer comes from the stripped solution.
pub fn run_long_cot(env: &RunEnv<'_>, problem: &Problem) -> Result<Outcome> {
    let mut state = RunState::new(env.seq_policy);
    let prompt = env
        .templates
        .render_prompt(PromptKind::Base, problem, &PromptPayload::None)?;
    let completion = generate_parallel(env, problem, 1, CallKind::Final, &[prompt])?.remove(0);
    let (solution, answer) = state.record_model_call(1, 0, CallKind::Final, &completion)?;
    let draft = make_draft(1, 0, &completion, solution, answer.clone());
    state.push_round(RoundTranscript {
        round: 1,
        drafts: vec![draft],
        workspaces: Vec::new(),
    });
    state.finish(env, problem, env.run_seed, answer)
}

/// Sequential refinement: round 1 uses the base prompt, rounds 2..R refine
/// the previous stripped solution only. The final answer comes from round R.
pub fn run_sr(
    env: &RunEnv<'_>,
    problem: &Problem,
    rounds: u32,
    variant: SrVariant,
) -> Result<Outcome> {
    if rounds == 0 {
        return Err(Error::Config("SR needs at least one round".into()));
    }
    let mut state = RunState::new(env.seq_policy);
    let refine_kind = match variant {
        SrVariant::Plain => PromptKind::SrRefine,
        SrVariant::ErrorAnalysis => PromptKind::SrErrorRefine,
    };
    let mut prev_solution = String::new();
    let mut final_answer = None;
    for round in 1..=rounds {
        let prompt = if round == 1 {
            env.templates
                .render_prompt(PromptKind::Base, problem, &PromptPayload::None)?
        } else {
            env.templates.render_prompt(
                refine_kind,
                problem,
                &PromptPayload::PrevSolution(&prev_solution),
            )?
        };
        let call_kind = if round == rounds {
            CallKind::Final
        } else if round == 1 {
            CallKind::Draft
        } else {
            CallKind::Refine
        };
        let completion = generate_parallel(env, problem, round, call_kind, &[prompt])?.remove(0);
        let (solution, answer) = state.record_model_call(round, 0, call_kind, &completion)?;
        let draft = make_draft(round, 0, &completion, solution.clone(), answer.clone());
        state.push_round(RoundTranscript {
            round,
            drafts: vec![draft],
            workspaces: Vec::new(),
        });
        prev_solution = solution;
        if round == rounds {
            final_answer = answer;
        }
    }
    state.finish(env, problem, env.run_seed, final_answer)
}

/// Parallel-distill-refine over a validated schedule.
pub fn run_pdr(
    env: &RunEnv<'_>,
    problem: &Problem,
    schedule: &RoundSchedule,
    kappa: u64,
) -> Result<Outcome> {
    validate_schedule(schedule)?;
    if kappa == 0 {
        return Err(Error::Config("kappa must be positive".into()));
    }
    let total_rounds = schedule.fanout.len();
    let mut state = RunState::new(env.seq_policy);
    let mut workspaces = vec![Workspace::empty(kappa)];
    let mut final_answer = None;

    for (ri, &fanout) in schedule.fanout.iter().enumerate() {
        let round = ri as u32 + 1;
        let is_final = ri + 1 == total_rounds;
        let call_kind = if is_final {
            CallKind::Final
        } else {
            CallKind::Draft
        };

        let mut prompts = Vec::with_capacity(fanout as usize);
        for branch in 0..fanout as usize {
            let ws = &workspaces[branch % workspaces.len()];
            prompts.push(prompt_for_workspace(env, problem, ws)?);
        }
        let completions = generate_parallel(env, problem, round, call_kind, &prompts)?;

        let mut drafts = Vec::with_capacity(fanout as usize);
        for (branch, completion) in completions.into_iter().enumerate() {
            let (solution, answer) =
                state.record_model_call(round, branch as u32, call_kind, &completion)?;
            drafts.push(make_draft(
                round,
                branch as u32,
                &completion,
                solution,
                answer,
            ));
        }

        if is_final {
            final_answer = drafts[0].answer.clone();
            state.push_round(RoundTranscript {
                round,
                drafts,
                workspaces: Vec::new(),
            });
        } else {
            let next_fanout = schedule.fanout[ri + 1];
            let built = build_workspaces(
                env,
                &mut state,
                problem,
                round,
                &drafts,
                schedule,
                next_fanout,
                kappa,
            )?;
            for (j, ws) in built.iter().enumerate() {
                state.record_workspace(round, j as u32, ws);
            }
            state.push_round(RoundTranscript {
                round,
                drafts,
                workspaces: built.clone(),
            });
            workspaces = built;
        }
    }
    state.finish(env, problem, env.run_seed, final_answer)
}

fn prompt_for_workspace(env: &RunEnv<'_>, problem: &Problem, ws: &Workspace) -> Result<String> {
    match ws.kind {
        WorkspaceKind::Empty => {
            env.templates
                .render_prompt(PromptKind::Base, problem, &PromptPayload::None)
        }
        WorkspaceKind::CandidateList => env.templates.render_prompt(
            PromptKind::PdrCandidates,
            problem,
            &PromptPayload::Candidates(&ws.candidates),
        ),
        WorkspaceKind::Summary => env.templates.render_prompt(
            PromptKind::PdrSummary,
            problem,
            &PromptPayload::Summary(&ws.text),
        ),
    }
}

/// Builds next-round workspaces from this round's drafts: shared modes
/// produce one workspace (replicated across branches by the caller),
/// per-branch modes produce exactly `next_fanout`.
#[allow(clippy::too_many_arguments)]
fn build_workspaces(
    env: &RunEnv<'_>,
    state: &mut RunState,
    problem: &Problem,
    round: u32,
    drafts: &[Draft],
    schedule: &RoundSchedule,
    next_fanout: u32,
    kappa: u64,
) -> Result<Vec<Workspace>> {
    let mut ctx = DistillCtx {
        env,
        problem,
        round,
        state,
    };
    let k = schedule.k;
    match schedule.distill_mode {
        DistillMode::GlobalSummary => Ok(vec![ctx.global_summary(drafts, kappa)?]),
        DistillMode::TopkShared => Ok(vec![ctx.topk_shared(drafts, k, kappa)?]),
        DistillMode::TopkPerSample => ctx.topk_per_sample(drafts, k, next_fanout, kappa),
        DistillMode::RandomK => ctx.random_k(drafts, k, next_fanout, kappa),
        DistillMode::OracleCorrect => {
            Ok(vec![ctx.oracle(drafts, OracleMode::Correct, k, kappa)?])
        }
        DistillMode::OracleIncorrect => {
            Ok(vec![ctx.oracle(drafts, OracleMode::Incorrect, k, kappa)?])
        }
    }
}
