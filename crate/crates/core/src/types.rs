//! Domain types shared by every module.

use serde::{Deserialize, Serialize};

use crate::budget::{BudgetLedger, CallKind};

/// A task instance with an optional gold answer for verification.
///
/// Datasets always carry gold answers; problems constructed ad hoc may omit
/// one, in which case outcomes carry no verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub statement: String,
    /// Normalized answer string, when known.
    pub gold_answer: Option<String>,
}

impl Problem {
    pub fn new(
        id: impl Into<String>,
        statement: impl Into<String>,
        gold: impl Into<String>,
    ) -> Self {
        Problem {
            id: id.into(),
            statement: statement.into(),
            gold_answer: Some(gold.into()),
        }
    }
}

/// One model attempt: the raw completion, the solution with think spans
/// removed, and the answer extracted from the solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    /// 1-based round index.
    pub round: u32,
    /// 0-based branch index within the round.
    pub branch: u32,
    pub raw_text: String,
    pub solution: String,
    /// Normalized extracted answer, when the solution contains one.
    pub answer: Option<String>,
    /// Backend-reported usage for the producing call.
    pub in_tokens: u64,
    pub out_tokens: u64,
}

/// Shape of the bounded context carried between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkspaceKind {
    Empty,
    Summary,
    CandidateList,
}

/// Bounded context conditioning a round: either a distilled summary or a
/// list of candidate solutions, rebuilt fresh from the previous round's
/// drafts and never persisted across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub kind: WorkspaceKind,
    /// Rendered content exactly as it enters the next round's prompt.
    pub text: String,
    /// Local token count of `text`; at most `kappa` after enforcement.
    pub token_count: u64,
    pub kappa: u64,
    /// (round, branch) of each contributing draft, in rank order.
    pub provenance: Vec<(u32, u32)>,
    /// Set when oracle selection had to fill from the complement.
    pub fallback: bool,
    /// Individual candidate solutions in rank order; kept in memory for
    /// prompt rendering and kappa-dropping, derived from `text` otherwise.
    #[serde(skip)]
    pub candidates: Vec<String>,
}

impl Workspace {
    pub fn empty(kappa: u64) -> Self {
        Workspace {
            kind: WorkspaceKind::Empty,
            text: String::new(),
            token_count: 0,
            kappa,
            provenance: Vec::new(),
            fallback: false,
            candidates: Vec::new(),
        }
    }

    pub fn summary(text: String, provenance: Vec<(u32, u32)>, kappa: u64) -> Self {
        let token_count = crate::backend::count_tokens(&text);
        Workspace {
            kind: WorkspaceKind::Summary,
            text,
            token_count,
            kappa,
            provenance,
            fallback: false,
            candidates: Vec::new(),
        }
    }

    pub fn candidate_list(
        candidates: Vec<String>,
        provenance: Vec<(u32, u32)>,
        kappa: u64,
        fallback: bool,
    ) -> Self {
        let text = crate::prompting::candidate_blocks(&candidates);
        let token_count = crate::backend::count_tokens(&text);
        Workspace {
            kind: WorkspaceKind::CandidateList,
            text,
            token_count,
            kappa,
            provenance,
            fallback,
            candidates,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == WorkspaceKind::Empty
    }
}

/// How a round's drafts are distilled into next-round workspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillMode {
    /// One model-written summary shared by every next-round branch.
    #[default]
    GlobalSummary,
    /// One graded top-k candidate list shared by every branch.
    TopkShared,
    /// Each downstream branch grades and selects its own top-k.
    TopkPerSample,
    /// Each branch receives k candidates sampled uniformly without
    /// replacement.
    RandomK,
    /// Diagnostic: admit only verified-correct candidates when available.
    OracleCorrect,
    /// Diagnostic: admit only verified-incorrect candidates when available.
    OracleIncorrect,
}

impl DistillMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistillMode::GlobalSummary => "global_summary",
            DistillMode::TopkShared => "topk_shared",
            DistillMode::TopkPerSample => "topk_per_sample",
            DistillMode::RandomK => "random_k",
            DistillMode::OracleCorrect => "oracle_correct",
            DistillMode::OracleIncorrect => "oracle_incorrect",
        }
    }
}

/// Fan-out schedule for a PDR run: `fanout[r]` parallel generations in
/// round r+1, k candidates carried forward, and the distillation strategy.
/// The last round must have fan-out 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSchedule {
    pub fanout: Vec<u32>,
    pub k: u32,
    pub distill_mode: DistillMode,
}

impl RoundSchedule {
    pub fn new(fanout: Vec<u32>, k: u32, distill_mode: DistillMode) -> Self {
        RoundSchedule {
            fanout,
            k,
            distill_mode,
        }
    }

    pub fn rounds(&self) -> u32 {
        self.fanout.len() as u32
    }
}

/// One round of a run: its solve-call drafts and the workspaces built from
/// them for the following round (empty for the final round).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round: u32,
    pub drafts: Vec<Draft>,
    pub workspaces: Vec<Workspace>,
}

/// Flat transcript line: one record per model call and per workspace, in
/// ledger order. This is the unit of the transcript JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptRecord {
    Call {
        call_id: u64,
        round: u32,
        branch: u32,
        kind: CallKind,
        in_tokens: u64,
        out_tokens: u64,
        solution: String,
        answer: Option<String>,
    },
    Workspace {
        round: u32,
        branch: u32,
        kind: WorkspaceKind,
        token_count: u64,
        kappa: u64,
        provenance: Vec<(u32, u32)>,
        fallback: bool,
        text: String,
    },
}

/// Result of one operator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub final_answer: Option<String>,
    /// Present iff the problem carried a gold answer.
    pub verdict: Option<bool>,
    pub seed: u64,
    /// Lossy kappa enforcements (hard truncations or candidate drops).
    pub kappa_violations: u32,
    pub warnings: Vec<String>,
    pub ledger: BudgetLedger,
    pub transcript: Vec<RoundTranscript>,
    pub records: Vec<TranscriptRecord>,
}

impl Outcome {
    /// Transcript JSONL, one record per line in ledger order.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("transcript record serializes"));
            out.push('\n');
        }
        out
    }
}
