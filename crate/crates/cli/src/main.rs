//! Command-line driver: single runs, dataset evaluation, Pareto frontiers,
//! and the hard-case mechanics report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pdr_core::budget::SeqPolicy;
use pdr_core::config::{parse_config, RunConfig};
use pdr_core::harness::{
    self, load_dataset, mechanics_report, pareto_frontier, read_results_csv, read_transcript,
    round1_hits, run_eval, write_results, BudgetAxis, EvalReport, MechanicsEntry, ResultsRow,
    RESULTS_CSV_HEADER,
};
use pdr_core::runtime::RunEnv;
use pdr_core::types::Problem;

#[derive(Parser)]
#[command(name = "pdr", version, about = "Budget-aware inference orchestration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Seq,
    Total,
}

impl From<AxisArg> for BudgetAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Seq => BudgetAxis::Seq,
            AxisArg::Total => BudgetAxis::Total,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem and print the outcome summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Dataset override.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Run-seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Problem to run; the dataset's first problem otherwise.
        #[arg(long)]
        problem_id: Option<String>,
    },
    /// Evaluate one or more configs over a dataset and persist results.
    Eval {
        /// Config path; may be given several times for one combined report.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Dataset override applied to every config.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run-seed override applied to every config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute the Pareto frontier over one or more results.csv files.
    Frontier {
        /// Budget axis to dominate on.
        #[arg(long, value_enum, default_value = "seq")]
        axis: AxisArg,
        /// Write the frontier CSV here as well as printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// results.csv files.
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
    /// Hard-case mechanics report comparing two stored eval runs.
    Report {
        /// Output directory of the low-compute run.
        #[arg(long)]
        less: PathBuf,
        /// Output directory of the high-compute run (round-1 hits come
        /// from its transcripts).
        #[arg(long)]
        more: PathBuf,
        /// Dataset with gold answers.
        #[arg(long)]
        dataset: PathBuf,
        /// Write mechanics.csv here as well as printing the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            dataset,
            seed,
            problem_id,
        } => cmd_run(&config, dataset.as_deref(), seed, problem_id.as_deref()),
        Command::Eval {
            config,
            dataset,
            out,
            seed,
        } => cmd_eval(&config, dataset.as_deref(), out.as_deref(), seed),
        Command::Frontier { axis, out, results } => {
            cmd_frontier(axis.into(), out.as_deref(), &results)
        }
        Command::Report {
            less,
            more,
            dataset,
            out,
        } => cmd_report(&less, &more, &dataset, out.as_deref()),
    }
}

fn load_config(path: &Path, dataset: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut config = parse_config(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(d) = dataset {
        config.eval.dataset = d.to_path_buf();
    }
    if let Some(s) = seed {
        config.eval.run_seed = s;
    }
    Ok(config)
}

fn cmd_run(
    config_path: &Path,
    dataset_override: Option<&Path>,
    seed: Option<u64>,
    problem_id: Option<&str>,
) -> Result<()> {
    let config = load_config(config_path, dataset_override, seed)?;
    let dataset = load_dataset(&config.eval.dataset)?;
    if dataset.is_empty() {
        bail!("dataset {} is empty", config.eval.dataset.display());
    }
    let problem: &Problem = match problem_id {
        Some(id) => dataset
            .iter()
            .find(|p| p.id == id)
            .with_context(|| format!("problem id {id:?} not found in dataset"))?,
        None => &dataset[0],
    };
    let backend = config.build_backend()?;
    let templates = config.build_templates()?;
    let verifier = match &config.verify.plugin {
        Some(cmd) => Some(pdr_core::verify::PluginVerifier::new(cmd.clone())?),
        None => None,
    };
    let env = RunEnv {
        backend: backend.as_ref(),
        templates: &templates,
        gen: config.gen.settings(),
        seq_policy: config.operator.seq_policy(),
        run_seed: config.eval.run_seed,
        verifier,
    };
    let outcome = harness::run_configured(&config.operator, &env, problem)?;

    println!("problem:          {}", problem.id);
    println!("operator:         {}", config.operator.operator_name());
    println!("schedule:         {}", config.operator.schedule_string());
    println!(
        "final answer:     {}",
        outcome.final_answer.as_deref().unwrap_or("(none)")
    );
    println!(
        "verdict:          {}",
        match outcome.verdict {
            Some(true) => "correct",
            Some(false) => "incorrect",
            None => "(no gold answer)",
        }
    );
    println!("calls:            {}", outcome.ledger.calls.len());
    println!(
        "b_seq:            {}",
        outcome.ledger.seq_budget(env.seq_policy)
    );
    println!(
        "b_seq (mean):     {}",
        outcome.ledger.seq_budget(SeqPolicy::Mean)
    );
    println!("b_total:          {}", outcome.ledger.total_budget());
    println!("kappa violations: {}", outcome.kappa_violations);
    for w in &outcome.warnings {
        println!("warning:          {w}");
    }
    Ok(())
}

fn cmd_eval(
    config_paths: &[PathBuf],
    dataset_override: Option<&Path>,
    out_override: Option<&Path>,
    seed: Option<u64>,
) -> Result<()> {
    let mut runs = Vec::new();
    let mut out_dir: Option<PathBuf> = out_override.map(Path::to_path_buf);
    for path in config_paths {
        let config = load_config(path, dataset_override, seed)?;
        let dataset = load_dataset(&config.eval.dataset)?;
        if out_dir.is_none() {
            out_dir = Some(config.eval.out_dir.clone());
        }
        let run = run_eval(&config, &dataset)?;
        println!(
            "{} {} schedule={} distill={} mean@{}={:.4} b_seq={:.1} b_total={:.1}",
            run.report.config_id,
            config.operator.operator_name(),
            config.operator.schedule_string(),
            config.operator.distill_string(),
            config.eval.n_seeds,
            run.report.mean_at_n,
            run.report.mean_b_seq,
            run.report.mean_b_total,
        );
        runs.push(run);
    }
    let out_dir = out_dir.expect("at least one config");
    write_results(&runs, &out_dir)?;
    println!("wrote {}", out_dir.join("results.csv").display());
    println!("wrote {}", out_dir.join("report.json").display());
    Ok(())
}

fn cmd_frontier(axis: BudgetAxis, out: Option<&Path>, paths: &[PathBuf]) -> Result<()> {
    let mut rows: Vec<ResultsRow> = Vec::new();
    for path in paths {
        rows.extend(read_results_csv(path)?);
    }
    if rows.is_empty() {
        bail!("no rows found in the given results files");
    }
    let points: Vec<_> = rows.iter().map(ResultsRow::point).collect();
    let surviving = pareto_frontier(&points, axis);

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RESULTS_CSV_HEADER)?;
    for &i in &surviving {
        let r = &rows[i];
        writer.write_record([
            r.config_id.clone(),
            r.operator.clone(),
            r.schedule.clone(),
            r.distill.clone(),
            r.thinking_budget.to_string(),
            r.b_seq_mean.to_string(),
            r.b_total_mean.to_string(),
            r.accuracy.to_string(),
        ])?;
    }
    let text = String::from_utf8(writer.into_inner()?)?;
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn load_first_report(dir: &Path) -> Result<EvalReport> {
    let path = dir.join("report.json");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut reports: Vec<EvalReport> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if reports.is_empty() {
        bail!("{} holds no reports", path.display());
    }
    Ok(reports.remove(0))
}

fn verdict_counts(report: &EvalReport) -> BTreeMap<String, (u32, u32)> {
    report
        .problems
        .iter()
        .map(|p| {
            let correct = p.cells.iter().filter(|c| c.verdict == Some(true)).count() as u32;
            (p.problem_id.clone(), (correct, p.cells.len() as u32))
        })
        .collect()
}

fn cmd_report(less: &Path, more: &Path, dataset_path: &Path, out: Option<&Path>) -> Result<()> {
    let less_report = load_first_report(less)?;
    let more_report = load_first_report(more)?;
    let dataset = load_dataset(dataset_path)?;
    let golds: BTreeMap<&str, &str> = dataset
        .iter()
        .filter_map(|p| p.gold_answer.as_deref().map(|g| (p.id.as_str(), g)))
        .collect();

    let less_counts = verdict_counts(&less_report);
    let more_counts = verdict_counts(&more_report);

    // Round-1 hits come from the high-compute run's stored transcripts.
    let transcripts_dir = more.join("transcripts").join(&more_report.config_id);
    let mut entries = Vec::new();
    for problem in &dataset {
        let (Some(&(correct_less, seeds_less)), Some(&(correct_more, seeds_more))) =
            (less_counts.get(&problem.id), more_counts.get(&problem.id))
        else {
            continue;
        };
        let gold = golds[problem.id.as_str()];
        let mut hits = 0;
        let mut drafts = 0;
        if transcripts_dir.is_dir() {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&transcripts_dir)
                .with_context(|| format!("reading {}", transcripts_dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with(&format!("{}-s", sanitize(&problem.id))))
                })
                .collect();
            paths.sort();
            for path in paths {
                let records = read_transcript(&path)?;
                let (h, d) = round1_hits(&records, gold);
                hits += h;
                drafts += d;
            }
        }
        entries.push(MechanicsEntry {
            problem_id: problem.id.clone(),
            round1_hits: hits,
            round1_drafts: drafts,
            correct_less,
            seeds_less,
            correct_more,
            seeds_more,
        });
    }

    let rows = mechanics_report(&entries);
    println!(
        "{:<12} {:>12} {:>10} {:>10} {:>9}  class",
        "problem", "round1_hits", "acc_less", "acc_more", "delta"
    );
    for row in &rows {
        println!(
            "{:<12} {:>9}/{:<2} {:>10.4} {:>10.4} {:>+9.4}  {}",
            row.problem_id,
            row.round1_hits,
            row.round1_drafts,
            row.acc_less,
            row.acc_more,
            row.delta,
            row.class.as_str()
        );
    }
    if let Some(path) = out {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record([
            "problem_id",
            "round1_hits",
            "round1_drafts",
            "acc_less",
            "acc_more",
            "delta",
            "class",
        ])?;
        for row in &rows {
            writer.write_record([
                row.problem_id.clone(),
                row.round1_hits.to_string(),
                row.round1_drafts.to_string(),
                row.acc_less.to_string(),
                row.acc_more.to_string(),
                row.delta.to_string(),
                row.class.as_str().to_string(),
            ])?;
        }
        writer.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(())
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
