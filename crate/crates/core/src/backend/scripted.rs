//! Scripted replay backend: completions stored per (round, branch, kind),
//! returned verbatim.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::budget::CallKind;
use crate::error::{BackendError, Error, Result};

use super::{Backend, CallCtx, Completion, FinishReason, GenParams};

/// One stored completion, as held in memory or on a script JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub round: u32,
    pub branch: u32,
    pub kind: CallKind,
    pub text: String,
    pub in_tokens: u64,
    pub out_tokens: u64,
    #[serde(default = "default_finish")]
    pub finish: FinishReason,
}

fn default_finish() -> FinishReason {
    FinishReason::Stop
}

#[derive(Debug, Default)]
pub struct ScriptedBackend {
    entries: HashMap<(u32, u32, CallKind), ScriptEntry>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entries(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut backend = Self::new();
        for e in entries {
            backend.insert(e);
        }
        backend
    }

    pub fn insert(&mut self, entry: ScriptEntry) {
        self.entries
            .insert((entry.round, entry.branch, entry.kind), entry);
    }

    /// Convenience for tests: text plus token counts under the given key.
    pub fn script(
        &mut self,
        round: u32,
        branch: u32,
        kind: CallKind,
        text: &str,
        inp: u64,
        out: u64,
    ) {
        self.insert(ScriptEntry {
            round,
            branch,
            kind,
            text: text.to_string(),
            in_tokens: inp,
            out_tokens: out,
            finish: FinishReason::Stop,
        });
    }

    /// Loads a script from JSONL, one [`ScriptEntry`] per line.
    pub fn from_jsonl_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut backend = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line).map_err(|e| Error::Dataset {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            backend.insert(entry);
        }
        Ok(backend)
    }
}

impl Backend for ScriptedBackend {
    fn generate(
        &self,
        _prompt: &str,
        params: &GenParams,
        ctx: &CallCtx<'_>,
    ) -> std::result::Result<Completion, BackendError> {
        params.validate()?;
        let entry = self.entries.get(&(ctx.round, ctx.branch, ctx.kind)).ok_or(
            BackendError::ScriptMiss {
                round: ctx.round,
                branch: ctx.branch,
                kind: ctx.kind.as_str().to_string(),
            },
        )?;
        Ok(Completion {
            text: entry.text.clone(),
            in_tokens: entry.in_tokens,
            out_tokens: entry.out_tokens,
            finish: entry.finish,
        })
    }
}
