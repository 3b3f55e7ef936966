//! Prompt template rendering and think-span stripping.
//!
//! Templates are plain text with `{{ name }}` placeholders, embedded at
//! compile time and overridable from a directory of files with the same
//! names (`base.txt`, `sr_refine.txt`, ...).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Problem;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";

/// Template selector. Each tag maps to exactly one template; the grade tag
/// resolves to the per-instance or shared-rubric variant chosen at load
/// time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Base,
    SrRefine,
    SrErrorRefine,
    PdrCandidates,
    PdrSummary,
    DistillSummary,
    Grade,
}

/// Grading prompt variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradeRubric {
    #[default]
    PerInstance,
    Shared,
}

/// Payload accompanying a render request; must match the template kind.
#[derive(Debug, Clone)]
pub enum PromptPayload<'a> {
    None,
    /// Previous stripped solution for SR refinement.
    PrevSolution(&'a str),
    /// Candidate solutions in rank order.
    Candidates(&'a [String]),
    Summary(&'a str),
    /// Candidates plus the token limit stated in the distill instruction.
    CandidatesWithLimit(&'a [String], u64),
}

/// The seven templates, resolved at load time.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    base: String,
    sr_refine: String,
    sr_error_refine: String,
    pdr_candidates: String,
    pdr_summary: String,
    distill_summary: String,
    grade: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin(GradeRubric::PerInstance)
    }
}

impl TemplateSet {
    /// Compiled-in templates with the chosen grading variant.
    pub fn builtin(rubric: GradeRubric) -> Self {
        let grade = match rubric {
            GradeRubric::PerInstance => include_str!("../templates/grade_per_instance.txt"),
            GradeRubric::Shared => include_str!("../templates/grade_shared_rubric.txt"),
        };
        TemplateSet {
            base: trim_template(include_str!("../templates/base.txt")),
            sr_refine: trim_template(include_str!("../templates/sr_refine.txt")),
            sr_error_refine: trim_template(include_str!("../templates/sr_error_refine.txt")),
            pdr_candidates: trim_template(include_str!("../templates/pdr_candidates.txt")),
            pdr_summary: trim_template(include_str!("../templates/pdr_summary.txt")),
            distill_summary: trim_template(include_str!("../templates/distill_summary.txt")),
            grade: trim_template(grade),
        }
    }

    /// Loads overrides from a directory; files not present fall back to the
    /// built-in template.
    pub fn from_dir(dir: &Path, rubric: GradeRubric) -> Result<Self> {
        let mut set = Self::builtin(rubric);
        let grade_file = match rubric {
            GradeRubric::PerInstance => "grade_per_instance.txt",
            GradeRubric::Shared => "grade_shared_rubric.txt",
        };
        let slots: [(&str, &mut String); 7] = [
            ("base.txt", &mut set.base),
            ("sr_refine.txt", &mut set.sr_refine),
            ("sr_error_refine.txt", &mut set.sr_error_refine),
            ("pdr_candidates.txt", &mut set.pdr_candidates),
            ("pdr_summary.txt", &mut set.pdr_summary),
            ("distill_summary.txt", &mut set.distill_summary),
            (grade_file, &mut set.grade),
        ];
        for (name, slot) in slots {
            let path = dir.join(name);
            if path.exists() {
                *slot = trim_template(
                    &std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?,
                );
            }
        }
        Ok(set)
    }

    fn template(&self, kind: PromptKind) -> &str {
        match kind {
            PromptKind::Base => &self.base,
            PromptKind::SrRefine => &self.sr_refine,
            PromptKind::SrErrorRefine => &self.sr_error_refine,
            PromptKind::PdrCandidates => &self.pdr_candidates,
            PromptKind::PdrSummary => &self.pdr_summary,
            PromptKind::DistillSummary => &self.distill_summary,
            PromptKind::Grade => &self.grade,
        }
    }

    /// Fills the template for `kind` with the problem statement and payload.
    pub fn render_prompt(
        &self,
        kind: PromptKind,
        problem: &Problem,
        payload: &PromptPayload<'_>,
    ) -> Result<String> {
        let text = self
            .template(kind)
            .replace("{{ problem }}", &problem.statement);
        let mismatch = |needed: &str| {
            Err(Error::Prompt(format!(
                "template {kind:?} needs {needed} payload"
            )))
        };
        match (kind, payload) {
            (PromptKind::Base, PromptPayload::None) => Ok(text),
            (
                PromptKind::SrRefine | PromptKind::SrErrorRefine,
                PromptPayload::PrevSolution(prev),
            ) => Ok(text.replace("{{ response }}", prev)),
            (PromptKind::PdrCandidates | PromptKind::Grade, PromptPayload::Candidates(cands)) => {
                if cands.is_empty() {
                    return Err(Error::Prompt(format!(
                        "template {kind:?} needs >= 1 candidate"
                    )));
                }
                Ok(text.replace("{{ candidates }}", &candidate_blocks(cands)))
            }
            (PromptKind::PdrSummary, PromptPayload::Summary(summary)) => {
                if summary.is_empty() {
                    return Err(Error::Prompt(
                        "template PdrSummary needs a non-empty summary".into(),
                    ));
                }
                Ok(text.replace("{{ summary }}", summary))
            }
            (PromptKind::DistillSummary, PromptPayload::CandidatesWithLimit(cands, limit)) => {
                if cands.is_empty() {
                    return Err(Error::Prompt(
                        "template DistillSummary needs >= 1 candidate".into(),
                    ));
                }
                Ok(text
                    .replace("{{ limit }}", &limit.to_string())
                    .replace("{{ candidates }}", &candidate_blocks(cands)))
            }
            (PromptKind::Base, _) => mismatch("no"),
            (PromptKind::SrRefine | PromptKind::SrErrorRefine, _) => {
                mismatch("a previous-solution")
            }
            (PromptKind::PdrCandidates | PromptKind::Grade, _) => mismatch("a candidate-list"),
            (PromptKind::PdrSummary, _) => mismatch("a summary"),
            (PromptKind::DistillSummary, _) => mismatch("a candidates-with-limit"),
        }
    }
}

/// Wraps each candidate in `<model_response_i>` tags indexed from 1,
/// separated by blank lines.
pub fn candidate_blocks(candidates: &[String]) -> String {
    let mut out = String::new();
    for (i, cand) in candidates.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let n = i + 1;
        out.push_str(&format!(
            "<model_response_{n}>\n{cand}\n</model_response_{n}>"
        ));
    }
    out
}

/// Removes every well-formed `<think>...</think>` span. An unmatched
/// opening delimiter drops everything from it to the end of the text;
/// stray closing delimiters are removed so no delimiter survives.
pub fn strip_think_spans(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    loop {
        match rest.find(THINK_OPEN) {
            Some(open) => {
                out.push_str(&rest[..open]);
                let after_open = &rest[open + THINK_OPEN.len()..];
                match after_open.find(THINK_CLOSE) {
                    Some(close) => rest = &after_open[close + THINK_CLOSE.len()..],
                    None => break,
                }
            }
            None => {
                out.push_str(rest);
                break;
            }
        }
    }
    out.replace(THINK_CLOSE, "")
}

fn trim_template(raw: &str) -> String {
    raw.trim_end_matches(['\n', '\r']).to_string()
}
