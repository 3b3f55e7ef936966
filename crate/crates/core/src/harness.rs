//! Dataset ingestion, repeated-seed evaluation, Pareto-frontier
//! extraction, the hard-case mechanics report, and results persistence.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::config::{FailurePolicy, OperatorConfig, RunConfig};
use crate::error::{Error, Result};
use crate::operators::{run_long_cot, run_pdr, run_sr};
use crate::prompting::TemplateSet;
use crate::runtime::RunEnv;
use crate::seeds;
use crate::types::{Outcome, Problem, TranscriptRecord};
use crate::verify;

/// One line of a dataset file. Extra keys are tolerated; the three named
/// fields are required.
#[derive(Debug, Deserialize)]
struct DatasetLine {
    id: Option<String>,
    problem: Option<String>,
    answer: Option<String>,
}

/// Loads a JSONL dataset with fields id, problem, answer. Duplicate ids and
/// malformed lines are rejected with their line number.
pub fn load_dataset(path: &Path) -> Result<Vec<Problem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut problems = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let err = |msg: String| Error::Dataset {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let parsed: DatasetLine =
            serde_json::from_str(line).map_err(|e| err(format!("malformed JSON: {e}")))?;
        let id = parsed
            .id
            .ok_or_else(|| err("missing field \"id\"".into()))?;
        let statement = parsed
            .problem
            .ok_or_else(|| err("missing field \"problem\"".into()))?;
        let answer = parsed
            .answer
            .ok_or_else(|| err("missing field \"answer\"".into()))?;
        if statement.is_empty() {
            return Err(err("empty problem statement".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(err(format!("duplicate id {id:?}")));
        }
        problems.push(Problem {
            id,
            statement,
            gold_answer: Some(verify::normalize_answer(&answer)),
        });
    }
    Ok(problems)
}

/// One problem x seed evaluation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    /// None when the run failed; the failure policy decides how it counts.
    pub verdict: Option<bool>,
    pub b_seq: u64,
    pub b_total: u64,
    pub kappa_violations: u32,
    pub final_answer: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemEval {
    pub problem_id: String,
    pub cells: Vec<CellResult>,
}

/// Aggregated evaluation of one configuration over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_id: String,
    pub mean_at_n: f64,
    pub mean_b_seq: f64,
    pub mean_b_total: f64,
    pub total_kappa_violations: u64,
    pub config: RunConfig,
    pub problems: Vec<ProblemEval>,
}

/// A stored transcript file: one problem x seed run.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptFile {
    pub name: String,
    pub content: String,
}

/// Evaluation result plus the per-cell transcripts destined for disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    pub transcripts: Vec<TranscriptFile>,
}

/// Dispatches one run according to the configured operator.
pub fn run_configured(op: &OperatorConfig, env: &RunEnv<'_>, problem: &Problem) -> Result<Outcome> {
    match op {
        OperatorConfig::LongCot => run_long_cot(env, problem),
        OperatorConfig::Sr { rounds, variant } => run_sr(env, problem, *rounds, *variant),
        OperatorConfig::Pdr { kappa, .. } => {
            let schedule = op.schedule().expect("pdr schedule");
            run_pdr(env, problem, &schedule, *kappa)
        }
    }
}

/// Runs the configured operator n_seeds times per problem. Cell seeds are
/// derived from (run_seed, problem_id, repeat index); cells are independent
/// and run concurrently, aggregated in (problem, seed) order.
pub fn run_eval(config: &RunConfig, dataset: &[Problem]) -> Result<EvalRun> {
    let backend = config.build_backend()?;
    let templates = config.build_templates()?;
    run_eval_with(config, dataset, backend.as_ref(), &templates)
}

pub fn run_eval_with(
    config: &RunConfig,
    dataset: &[Problem],
    backend: &dyn Backend,
    templates: &TemplateSet,
) -> Result<EvalRun> {
    let n_seeds = config.eval.n_seeds;
    let cells: Vec<(usize, u32)> = (0..dataset.len())
        .flat_map(|p| (0..n_seeds).map(move |r| (p, r)))
        .collect();
    let verifier = match &config.verify.plugin {
        Some(cmd) => Some(verify::PluginVerifier::new(cmd.clone())?),
        None => None,
    };

    let outcomes: Vec<(CellResult, Option<String>)> = cells
        .par_iter()
        .map(|&(p, repeat)| {
            let problem = &dataset[p];
            let seed = seeds::cell_seed(config.eval.run_seed, &problem.id, repeat);
            let env = RunEnv {
                backend,
                templates,
                gen: config.gen.settings(),
                seq_policy: config.operator.seq_policy(),
                run_seed: seed,
                verifier: verifier.clone(),
            };
            match run_configured(&config.operator, &env, problem) {
                Ok(outcome) => {
                    let cell = CellResult {
                        seed,
                        verdict: outcome.verdict,
                        b_seq: outcome.ledger.seq_budget(env.seq_policy),
                        b_total: outcome.ledger.total_budget(),
                        kappa_violations: outcome.kappa_violations,
                        final_answer: outcome.final_answer.clone(),
                        error: None,
                    };
                    (cell, Some(outcome.transcript_jsonl()))
                }
                Err(e) => (
                    CellResult {
                        seed,
                        verdict: None,
                        b_seq: 0,
                        b_total: 0,
                        kappa_violations: 0,
                        final_answer: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut problems: Vec<ProblemEval> = dataset
        .iter()
        .map(|p| ProblemEval {
            problem_id: p.id.clone(),
            cells: Vec::with_capacity(n_seeds as usize),
        })
        .collect();
    let mut transcripts = Vec::with_capacity(outcomes.len());
    for (&(p, repeat), (cell, jsonl)) in cells.iter().zip(outcomes) {
        if let Some(content) = jsonl {
            transcripts.push(TranscriptFile {
                name: format!("{}-s{}.jsonl", sanitize(&dataset[p].id), repeat),
                content,
            });
        }
        problems[p].cells.push(cell);
    }

    let matrix: Vec<Vec<Option<bool>>> = problems
        .iter()
        .map(|p| p.cells.iter().map(|c| c.verdict).collect())
        .collect();
    let mean_at_n = grand_mean(&matrix, config.eval.failure_policy);
    let ok_cells: Vec<&CellResult> = problems
        .iter()
        .flat_map(|p| p.cells.iter())
        .filter(|c| c.error.is_none())
        .collect();
    let mean_b_seq = mean_of(ok_cells.iter().map(|c| c.b_seq as f64));
    let mean_b_total = mean_of(ok_cells.iter().map(|c| c.b_total as f64));
    let total_kappa_violations = ok_cells.iter().map(|c| c.kappa_violations as u64).sum();

    Ok(EvalRun {
        report: EvalReport {
            config_id: config.config_id(),
            mean_at_n,
            mean_b_seq,
            mean_b_total,
            total_kappa_violations,
            config: config.clone(),
            problems,
        },
        transcripts,
    })
}

/// Grand mean of a verdict matrix. A failed cell (None) counts as
/// incorrect under the default policy and is excluded under Skip.
pub fn grand_mean(matrix: &[Vec<Option<bool>>], policy: FailurePolicy) -> f64 {
    let mut hits = 0u64;
    let mut total = 0u64;
    for row in matrix {
        for cell in row {
            match (cell, policy) {
                (Some(true), _) => {
                    hits += 1;
                    total += 1;
                }
                (Some(false), _) => total += 1,
                (None, FailurePolicy::Incorrect) => total += 1,
                (None, FailurePolicy::Skip) => {}
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One accuracy-vs-budget point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub b_seq: f64,
    pub b_total: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetAxis {
    Seq,
    Total,
}

impl FrontierPoint {
    fn budget(&self, axis: BudgetAxis) -> f64 {
        match axis {
            BudgetAxis::Seq => self.b_seq,
            BudgetAxis::Total => self.b_total,
        }
    }
}

/// Indices of the points not dominated on the chosen budget axis (another
/// point with <= budget and >= accuracy, at least one strict), sorted by
/// budget. Ties that neither dominate survive together.
pub fn pareto_frontier(points: &[FrontierPoint], axis: BudgetAxis) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .budget(axis)
            .partial_cmp(&points[b].budget(axis))
            .expect("finite budgets")
    });

    let mut result = Vec::new();
    let mut best_before = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        // Group of equal budgets.
        let mut j = i;
        while j < order.len() && points[order[j]].budget(axis) == points[order[i]].budget(axis) {
            j += 1;
        }
        let group = &order[i..j];
        let group_max = group
            .iter()
            .map(|&idx| points[idx].accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        for &idx in group {
            let acc = points[idx].accuracy;
            if acc == group_max && acc > best_before {
                result.push(idx);
            }
        }
        best_before = best_before.max(group_max);
        i = j;
    }
    result
}

/// Per-problem inputs for the mechanics report: round-1 hits from the
/// high-compute configuration and verdict counts under both configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanicsEntry {
    pub problem_id: String,
    pub round1_hits: u32,
    pub round1_drafts: u32,
    pub correct_less: u32,
    pub seeds_less: u32,
    pub correct_more: u32,
    pub seeds_more: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanicsClass {
    Gain,
    Drop,
    Flat,
}

impl MechanicsClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MechanicsClass::Gain => "Gain",
            MechanicsClass::Drop => "Drop",
            MechanicsClass::Flat => "Flat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanicsRow {
    pub problem_id: String,
    pub round1_hits: u32,
    pub round1_drafts: u32,
    pub acc_less: f64,
    pub acc_more: f64,
    pub delta: f64,
    pub class: MechanicsClass,
}

/// Classifies each problem by the exact sign of the accuracy change
/// between the two configurations (integer cross-multiplication, so Flat
/// is exact).
pub fn mechanics_report(entries: &[MechanicsEntry]) -> Vec<MechanicsRow> {
    entries
        .iter()
        .map(|e| {
            let acc_less = ratio(e.correct_less, e.seeds_less);
            let acc_more = ratio(e.correct_more, e.seeds_more);
            let lhs = e.correct_more as u64 * e.seeds_less.max(1) as u64;
            let rhs = e.correct_less as u64 * e.seeds_more.max(1) as u64;
            let class = match lhs.cmp(&rhs) {
                std::cmp::Ordering::Greater => MechanicsClass::Gain,
                std::cmp::Ordering::Less => MechanicsClass::Drop,
                std::cmp::Ordering::Equal => MechanicsClass::Flat,
            };
            MechanicsRow {
                problem_id: e.problem_id.clone(),
                round1_hits: e.round1_hits,
                round1_drafts: e.round1_drafts,
                acc_less,
                acc_more,
                delta: acc_more - acc_less,
                class,
            }
        })
        .collect()
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts correct round-1 drafts in a stored transcript.
pub fn round1_hits(records: &[TranscriptRecord], gold: &str) -> (u32, u32) {
    let mut hits = 0;
    let mut total = 0;
    for rec in records {
        if let TranscriptRecord::Call {
            round: 1,
            kind,
            answer,
            ..
        } = rec
        {
            if matches!(
                kind,
                crate::budget::CallKind::Draft | crate::budget::CallKind::Final
            ) {
                total += 1;
                if verify::check(answer.as_deref(), gold) {
                    hits += 1;
                }
            }
        }
    }
    (hits, total)
}

/// Parses a transcript JSONL file.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(records)
}

pub const RESULTS_CSV_HEADER: [&str; 8] = [
    "config_id",
    "operator",
    "schedule",
    "distill",
    "thinking_budget",
    "b_seq_mean",
    "b_total_mean",
    "accuracy",
];

/// Writes results.csv (one row per configuration), report.json (the full
/// reports), and transcripts/<config_id>/*.jsonl. All writes truncate, so
/// rerunning with the same run seed overwrites with identical bytes.
pub fn write_results(runs: &[EvalRun], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let csv_path = out_dir.join("results.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    writer
        .write_record(RESULTS_CSV_HEADER)
        .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    for run in runs {
        let r = &run.report;
        writer
            .write_record([
                r.config_id.clone(),
                r.config.operator.operator_name().to_string(),
                r.config.operator.schedule_string(),
                r.config.operator.distill_string(),
                r.config.gen.thinking_budget.to_string(),
                r.mean_b_seq.to_string(),
                r.mean_b_total.to_string(),
                r.mean_at_n.to_string(),
            ])
            .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(&csv_path, e))?;

    let reports: Vec<&EvalReport> = runs.iter().map(|r| &r.report).collect();
    let json_path = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&reports).expect("report serializes");
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    for run in runs {
        let dir = out_dir.join("transcripts").join(&run.report.config_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for t in &run.transcripts {
            let path = dir.join(&t.name);
            std::fs::write(&path, &t.content).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// A parsed results.csv row; the frontier command works over these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub config_id: String,
    pub operator: String,
    pub schedule: String,
    pub distill: String,
    pub thinking_budget: u64,
    pub b_seq_mean: f64,
    pub b_total_mean: f64,
    pub accuracy: f64,
}

impl ResultsRow {
    pub fn point(&self) -> FrontierPoint {
        FrontierPoint {
            b_seq: self.b_seq_mean,
            b_total: self.b_total_mean,
            accuracy: self.accuracy,
        }
    }
}

/// Reads one or more results.csv files into rows.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultsRow>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: ResultsRow = record.map_err(|e| {
            Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            )
        })?;
        rows.push(row);
    }
    Ok(rows)
}
