//! Token budget accounting.
//!
//! Every model call appends one [`CallRecord`] to a [`BudgetLedger`]. Two
//! budgets are derived from the ledger:
//!
//! - **total budget**: input + output tokens summed over every call,
//!   including discarded parallel drafts (compute/cost proxy);
//! - **sequential budget**: tokens along the accepted path only — one
//!   representative draft per round, every distill/grade call whose output
//!   conditions the next round, and every refine/final call in full
//!   (latency proxy).
//!
//! Token counts are the backend-reported usage for the producing call; the
//! engine never re-tokenizes backend output.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role of a model call within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    /// Parallel candidate generation (or the single SR round-1 generation).
    Draft,
    /// Workspace synthesis over a round's drafts.
    Distill,
    /// Candidate scoring used by top-k selection.
    Grade,
    /// Intermediate SR revision.
    Refine,
    /// The last call of a run; its stripped solution is the final artifact.
    Final,
}

impl CallKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CallKind::Draft => "draft",
            CallKind::Distill => "distill",
            CallKind::Grade => "grade",
            CallKind::Refine => "refine",
            CallKind::Final => "final",
        }
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One ledger entry. Field order is the wire order of the ledger JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallRecord {
    pub call_id: u64,
    pub round: u32,
    pub branch: u32,
    pub kind: CallKind,
    pub in_tokens: u64,
    pub out_tokens: u64,
}

impl CallRecord {
    pub fn tokens(&self) -> u64 {
        self.in_tokens + self.out_tokens
    }
}

/// Which call stands in for a parallel stage on the accepted path.
///
/// `Max` charges the largest draft of the round (stage latency is governed
/// by its slowest call); `Mean` charges the rounded mean for sensitivity
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqPolicy {
    #[default]
    Max,
    Mean,
}

/// Ordered log of every model call in a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub calls: Vec<CallRecord>,
    #[serde(default)]
    pub seq_policy: SeqPolicy,
}

impl BudgetLedger {
    pub fn new(seq_policy: SeqPolicy) -> Self {
        BudgetLedger {
            calls: Vec::new(),
            seq_policy,
        }
    }

    /// The call_id the next record must carry.
    pub fn next_call_id(&self) -> u64 {
        self.calls.last().map(|c| c.call_id + 1).unwrap_or(1)
    }

    /// Appends a record. call_id must be strictly greater than every
    /// existing one.
    pub fn record_call(&mut self, rec: CallRecord) -> Result<()> {
        if let Some(last) = self.calls.last() {
            if rec.call_id <= last.call_id {
                return Err(Error::Ledger(format!(
                    "call_id {} not greater than last recorded id {}",
                    rec.call_id, last.call_id
                )));
            }
        }
        self.calls.push(rec);
        Ok(())
    }

    /// Total budget: all tokens over all calls, discarded branches included.
    pub fn total_budget(&self) -> u64 {
        self.calls.iter().map(CallRecord::tokens).sum()
    }

    /// Sequential budget along the accepted path, under the given
    /// representative-draft policy.
    ///
    /// Depends only on (round, kind, tokens), never on insertion order.
    pub fn seq_budget(&self, policy: SeqPolicy) -> u64 {
        let mut draft_tokens: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
        let mut accepted = 0u64;
        for call in &self.calls {
            match call.kind {
                CallKind::Draft => draft_tokens
                    .entry(call.round)
                    .or_default()
                    .push(call.tokens()),
                // Distill and grade outputs condition the next round; refine
                // and final calls are the accepted chain itself.
                CallKind::Distill | CallKind::Grade | CallKind::Refine | CallKind::Final => {
                    accepted += call.tokens();
                }
            }
        }
        for tokens in draft_tokens.values() {
            accepted += match policy {
                SeqPolicy::Max => *tokens.iter().max().expect("non-empty round group"),
                SeqPolicy::Mean => {
                    let sum: u64 = tokens.iter().sum();
                    let n = tokens.len() as u64;
                    (sum + n / 2) / n
                }
            };
        }
        accepted
    }

    /// Sequential budget under the ledger's own policy.
    pub fn seq_budget_default(&self) -> u64 {
        self.seq_budget(self.seq_policy)
    }

    /// Serializes to JSONL, one record per line with fields exactly
    /// call_id, round, branch, kind, in_tokens, out_tokens.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for call in &self.calls {
            out.push_str(&serde_json::to_string(call).expect("ledger record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the JSONL form produced by [`BudgetLedger::to_jsonl`].
    pub fn from_jsonl(text: &str, seq_policy: SeqPolicy) -> Result<Self> {
        let mut ledger = BudgetLedger::new(seq_policy);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CallRecord = serde_json::from_str(line)
                .map_err(|e| Error::Ledger(format!("line {}: {e}", i + 1)))?;
            ledger.record_call(rec)?;
        }
        Ok(ledger)
    }
}

/// Per-call max generation length: the thinking budget plus the tokens
/// reserved for the final solution.
pub fn per_call_allowance(thinking_budget: u64, solution_reserve: u64) -> u64 {
    thinking_budget + solution_reserve
}
