//! Acceptance suite: one test per criterion, each printing a pass line and
//! holding its stated runtime bound. Run with
//! `cargo test -p pdr-core --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdr_core::backend::{ScriptedBackend, SyntheticBackend};
use pdr_core::budget::{CallKind, SeqPolicy};
use pdr_core::config::{FailurePolicy, RunConfig};
use pdr_core::harness::{
    grand_mean, load_dataset, mechanics_report, pareto_frontier, run_eval, write_results,
    BudgetAxis, FrontierPoint, MechanicsClass, MechanicsEntry,
};
use pdr_core::operators::{run_long_cot, run_pdr, run_sr, SrVariant};
use pdr_core::prompting::{PromptKind, PromptPayload, TemplateSet};
use pdr_core::runtime::{GenSettings, RunEnv};
use pdr_core::types::{DistillMode, Outcome, Problem, RoundSchedule, TranscriptRecord};

const GOLD: &str = "42";
const WRONG: &str = "13";

fn env<'a>(
    backend: &'a dyn pdr_core::backend::Backend,
    templates: &'a TemplateSet,
    seed: u64,
) -> RunEnv<'a> {
    RunEnv {
        backend,
        templates,
        gen: GenSettings::default(),
        seq_policy: SeqPolicy::Max,
        run_seed: seed,
        verifier: None,
    }
}

/// Every workspace in the transcript respects its bound.
fn assert_workspaces_bounded(outcome: &Outcome) {
    for rec in &outcome.records {
        if let TranscriptRecord::Workspace {
            token_count, kappa, ..
        } = rec
        {
            assert!(
                token_count <= kappa,
                "workspace {token_count} tokens over kappa {kappa}"
            );
        }
    }
}

enum Plan {
    LongCot,
    Sr { rounds: u32, variant: SrVariant },
    Pdr { schedule: RoundSchedule },
}

/// Builds a random run plan with a scripted backend covering exactly the
/// calls the operator is expected to make; an unexpected call fails the run
/// with a script miss.
fn random_scripted_run(rng: &mut ChaCha8Rng, tag: usize) -> (Plan, ScriptedBackend, Problem) {
    let problem = Problem::new(format!("p{tag}"), "scripted task", GOLD);
    let mut backend = ScriptedBackend::new();
    let draft_text = |rng: &mut ChaCha8Rng| {
        let answer = if rng.gen_bool(0.5) { GOLD } else { WRONG };
        format!("<think>w</think>work shows $\\boxed{{{answer}}}$.")
    };
    let grade_text = |rng: &mut ChaCha8Rng, n: u32| {
        let mut lines = Vec::new();
        for i in 1..=n {
            if rng.gen_bool(0.1) {
                lines.push(format!("Candidate {i}: excellent"));
            } else {
                lines.push(format!("Candidate {i}: {}", rng.gen_range(0..=10)));
            }
        }
        lines.join("\n")
    };

    let plan = match rng.gen_range(0..3) {
        0 => Plan::LongCot,
        1 => Plan::Sr {
            rounds: rng.gen_range(1..=4),
            variant: if rng.gen_bool(0.5) {
                SrVariant::Plain
            } else {
                SrVariant::ErrorAnalysis
            },
        },
        _ => {
            let rounds = rng.gen_range(1..=3);
            let mut fanout: Vec<u32> = (0..rounds - 1).map(|_| rng.gen_range(1..=5)).collect();
            fanout.push(1);
            let min_g = fanout[..fanout.len().saturating_sub(1)]
                .iter()
                .min()
                .copied()
                .unwrap_or(1);
            let k = rng.gen_range(1..=min_g);
            let distill_mode = match rng.gen_range(0..6) {
                0 => DistillMode::GlobalSummary,
                1 => DistillMode::TopkShared,
                2 => DistillMode::TopkPerSample,
                3 => DistillMode::RandomK,
                4 => DistillMode::OracleCorrect,
                _ => DistillMode::OracleIncorrect,
            };
            Plan::Pdr {
                schedule: RoundSchedule::new(fanout, k, distill_mode),
            }
        }
    };

    let tok = |rng: &mut ChaCha8Rng| rng.gen_range(0..1500u64);
    match &plan {
        Plan::LongCot => {
            let text = draft_text(rng);
            backend.script(1, 0, CallKind::Final, &text, tok(rng), tok(rng));
        }
        Plan::Sr { rounds, .. } => {
            for r in 1..=*rounds {
                let kind = if r == *rounds {
                    CallKind::Final
                } else if r == 1 {
                    CallKind::Draft
                } else {
                    CallKind::Refine
                };
                let text = draft_text(rng);
                backend.script(r, 0, kind, &text, tok(rng), tok(rng));
            }
        }
        Plan::Pdr { schedule } => {
            let total = schedule.fanout.len();
            for (ri, &g) in schedule.fanout.iter().enumerate() {
                let round = ri as u32 + 1;
                let kind = if ri + 1 == total {
                    CallKind::Final
                } else {
                    CallKind::Draft
                };
                for b in 0..g {
                    let text = draft_text(rng);
                    backend.script(round, b, kind, &text, tok(rng), tok(rng));
                }
                if ri + 1 < total {
                    match schedule.distill_mode {
                        DistillMode::GlobalSummary => {
                            let text = format!(
                                "<think>s</think>candidates proposed $\\boxed{{{GOLD}}}$ and $\\boxed{{{WRONG}}}$."
                            );
                            backend.script(round, 0, CallKind::Distill, &text, tok(rng), tok(rng));
                        }
                        DistillMode::TopkShared => {
                            let text = grade_text(rng, g);
                            backend.script(round, 0, CallKind::Grade, &text, tok(rng), tok(rng));
                        }
                        DistillMode::TopkPerSample => {
                            let next_g = schedule.fanout[ri + 1];
                            for j in 0..next_g {
                                let text = grade_text(rng, g);
                                backend.script(
                                    round,
                                    j,
                                    CallKind::Grade,
                                    &text,
                                    tok(rng),
                                    tok(rng),
                                );
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    (plan, backend, problem)
}

#[test]
fn criterion_01_budget_identities_over_randomized_runs() {
    let start = Instant::now();
    let templates = TemplateSet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE9701);
    let mut counts = [0usize; 3];
    for i in 0..1000 {
        let (plan, backend, problem) = random_scripted_run(&mut rng, i);
        let env = env(&backend, &templates, i as u64);
        let outcome = match &plan {
            Plan::LongCot => {
                counts[0] += 1;
                run_long_cot(&env, &problem).unwrap()
            }
            Plan::Sr { rounds, variant } => {
                counts[1] += 1;
                run_sr(&env, &problem, *rounds, *variant).unwrap()
            }
            Plan::Pdr { schedule } => {
                counts[2] += 1;
                run_pdr(&env, &problem, schedule, 100_000).unwrap()
            }
        };
        for policy in [SeqPolicy::Max, SeqPolicy::Mean] {
            let seq = outcome.ledger.seq_budget(policy);
            let total = outcome.ledger.total_budget();
            assert!(seq <= total, "run {i}: seq {seq} > total {total}");
            if matches!(plan, Plan::LongCot | Plan::Sr { .. }) {
                assert_eq!(seq, total, "run {i}: no parallelism, budgets must match");
            }
        }
        assert_workspaces_bounded(&outcome);
        assert_eq!(outcome.kappa_violations, 0, "run {i}");
    }
    assert!(
        counts.iter().all(|&c| c > 100),
        "all operators exercised: {counts:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!(
        "criterion 01 PASS: budget identities over 1000 randomized scripted runs \
         (long_cot={}, sr={}, pdr={}) in {elapsed:?}",
        counts[0], counts[1], counts[2]
    );
}

#[test]
fn criterion_02_scripted_ledger_fixture() {
    let start = Instant::now();
    let templates = TemplateSet::default();
    let mut backend = ScriptedBackend::new();
    backend.script(
        1,
        0,
        CallKind::Draft,
        "draft one gives $\\boxed{5}$",
        100,
        500,
    );
    backend.script(
        1,
        1,
        CallKind::Draft,
        "draft two gives $\\boxed{7}$",
        100,
        500,
    );
    backend.script(
        1,
        0,
        CallKind::Distill,
        "candidates proposed $\\boxed{5}$ and $\\boxed{7}$",
        1100,
        200,
    );
    backend.script(2, 0, CallKind::Final, "settle on $\\boxed{7}$", 350, 600);
    let problem = Problem::new("fixture", "two-round task", "7");
    let schedule = RoundSchedule::new(vec![2, 1], 1, DistillMode::GlobalSummary);
    let outcome = run_pdr(&env(&backend, &templates, 0), &problem, &schedule, 100_000).unwrap();
    assert_eq!(outcome.ledger.total_budget(), 3450);
    assert_eq!(outcome.ledger.seq_budget(SeqPolicy::Max), 2850);
    assert_eq!(outcome.ledger.seq_budget(SeqPolicy::Mean), 2850);
    assert_workspaces_bounded(&outcome);
    assert_eq!(outcome.kappa_violations, 0);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "criterion 02 PASS: scripted 2-round PDR fixture B_seq=2850 B_total=3450 in {elapsed:?}"
    );
}

fn synthetic_eval_config(
    distill: DistillMode,
    n_seeds: u32,
    run_seed: u64,
    kappa: u64,
) -> RunConfig {
    let config: RunConfig = serde_json::from_value(serde_json::json!({
        "backend": {"type": "synthetic"},
        "operator": {"type": "pdr", "g": [2, 1], "k": 1, "distill": distill.as_str(), "kappa": kappa},
        "eval": {"dataset": "unused.jsonl", "n_seeds": n_seeds, "run_seed": run_seed}
    }))
    .unwrap();
    config.finalize().unwrap()
}

fn synthetic_problems(n: usize) -> Vec<Problem> {
    (0..n)
        .map(|i| {
            Problem::new(
                format!("p{i:03}"),
                format!("synthetic task {i}"),
                format!("{}", (i * 7 + 11) % 1000),
            )
        })
        .collect()
}

#[test]
fn criterion_03_anchoring_ordering() {
    let start = Instant::now();
    let problems = synthetic_problems(200);
    let n_seeds = 16u32;
    let trials = (problems.len() as u32 * n_seeds) as f64;

    // Closed forms for g=[2,1], k=1 under defaults 0.5/0.9/0.6/0.2:
    //   oracle-correct   0.75*0.9 + 0.25*0.2                    = 0.725
    //   random-k         0.25*0.9 + 0.5*(0.55) + 0.25*0.2       = 0.550
    //   oracle-incorrect 0.75*0.2 + 0.25*0.9                    = 0.375
    let cases = [
        (DistillMode::OracleCorrect, 0.725),
        (DistillMode::RandomK, 0.55),
        (DistillMode::OracleIncorrect, 0.375),
    ];
    let mut measured = Vec::new();
    for (mode, expected) in cases {
        let config = synthetic_eval_config(mode, n_seeds, 0xA11C, 2048);
        let run = run_eval(&config, &problems).unwrap();
        let acc = run.report.mean_at_n;
        let sigma = (expected * (1.0 - expected) / trials).sqrt();
        assert!(
            (acc - expected).abs() < 3.0 * sigma,
            "{mode:?}: measured {acc:.4}, expected {expected} +- {:.4}",
            3.0 * sigma
        );
        assert_eq!(run.report.total_kappa_violations, 0);
        measured.push((mode, acc));
    }
    assert!(
        measured[0].1 > measured[1].1 && measured[1].1 > measured[2].1,
        "strict ordering violated: {measured:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 03 PASS: anchoring ordering {:.4} > {:.4} > {:.4} within 3-sigma of 0.725/0.55/0.375 in {elapsed:?}",
        measured[0].1, measured[1].1, measured[2].1
    );
}

#[test]
fn criterion_04_degeneracy_equivalences() {
    let start = Instant::now();
    let templates = TemplateSet::default();

    let synthetic = SyntheticBackend::default();
    let mut scripted = ScriptedBackend::new();
    scripted.script(1, 0, CallKind::Final, "single call $\\boxed{42}$", 300, 700);

    let problem = Problem::new("degen", "one-call task", GOLD);
    let schedule = RoundSchedule::new(vec![1], 1, DistillMode::RandomK);
    for seed in [0u64, 1, 7, 99, 12345] {
        for backend in [&synthetic as &dyn pdr_core::backend::Backend, &scripted] {
            let lc = run_long_cot(&env(backend, &templates, seed), &problem).unwrap();
            let pdr = run_pdr(&env(backend, &templates, seed), &problem, &schedule, 2048).unwrap();
            let sr = run_sr(
                &env(backend, &templates, seed),
                &problem,
                1,
                SrVariant::Plain,
            )
            .unwrap();
            let lc_json = serde_json::to_string(&lc).unwrap();
            assert_eq!(
                lc_json,
                serde_json::to_string(&pdr).unwrap(),
                "pdr[1] != long_cot"
            );
            assert_eq!(
                lc_json,
                serde_json::to_string(&sr).unwrap(),
                "sr[1] != long_cot"
            );
            assert_eq!(lc.transcript_jsonl(), pdr.transcript_jsonl());
            assert_eq!(lc.transcript_jsonl(), sr.transcript_jsonl());
            assert_eq!(lc.ledger.to_jsonl(), pdr.ledger.to_jsonl());
            assert_eq!(lc.ledger.to_jsonl(), sr.ledger.to_jsonl());
            assert_workspaces_bounded(&lc);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!("criterion 04 PASS: PDR g=[1] and SR R=1 byte-identical to Long-CoT in {elapsed:?}");
}

#[test]
fn criterion_05_kappa_bound_and_violation_counter() {
    let start = Instant::now();
    let problems = synthetic_problems(8);

    // Generous bound: every workspace fits, counter stays zero.
    let roomy = synthetic_eval_config(DistillMode::GlobalSummary, 4, 7, 2048);
    let run = run_eval(&roomy, &problems).unwrap();
    assert_eq!(run.report.total_kappa_violations, 0);
    for t in &run.transcripts {
        for line in t.content.lines() {
            let rec: TranscriptRecord = serde_json::from_str(line).unwrap();
            if let TranscriptRecord::Workspace {
                token_count, kappa, ..
            } = rec
            {
                assert!(token_count <= kappa);
            }
        }
    }

    //

    // Starved bound: the synthetic summary cannot fit in 8 tokens, so
    // enforcement truncates, the bound still holds, and violations count.
    let starved = synthetic_eval_config(DistillMode::GlobalSummary, 4, 7, 8);
    let run = run_eval(&starved, &problems).unwrap();
    assert!(
        run.report.total_kappa_violations > 0,
        "truncations must be counted"
    );
    let mut workspaces_seen = 0;
    for t in &run.transcripts {
        for line in t.content.lines() {
            let rec: TranscriptRecord = serde_json::from_str(line).unwrap();
            if let TranscriptRecord::Workspace {
                token_count, kappa, ..
            } = rec
            {
                workspaces_seen += 1;
                assert!(token_count <= kappa, "{token_count} > {kappa}");
                assert_eq!(kappa, 8);
            }
        }
    }
    assert!(workspaces_seen > 0);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "criterion 05 PASS: all workspaces within kappa; zero violations when roomy, {} logged when starved, in {elapsed:?}",
        run.report.total_kappa_violations
    );
}

#[test]
fn criterion_06_mean_at_n_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE9706);
    for _ in 0..50 {
        let problems = rng.gen_range(1..=20);
        let seeds = rng.gen_range(1..=16);
        let matrix: Vec<Vec<Option<bool>>> = (0..problems)
            .map(|_| (0..seeds).map(|_| Some(rng.gen_bool(0.5))).collect())
            .collect();
        // Independent brute force over the stored matrix.
        let mut hits = 0u64;
        let mut total = 0u64;
        for row in &matrix {
            for cell in row {
                total += 1;
                if *cell == Some(true) {
                    hits += 1;
                }
            }
        }
        let brute = hits as f64 / total as f64;
        let mean = grand_mean(&matrix, FailurePolicy::Incorrect);
        assert_eq!(mean, brute, "exact equality required");
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "criterion 06 PASS: mean@N equals brute-force average on 50 random matrices in {elapsed:?}"
    );
}

#[test]
fn criterion_07_mechanics_fixture() {
    let start = Instant::now();
    let entries = vec![
        MechanicsEntry {
            problem_id: "Q1".into(),
            round1_hits: 3,
            round1_drafts: 32,
            correct_less: 7,
            seeds_less: 16,
            correct_more: 10,
            seeds_more: 16,
        },
        MechanicsEntry {
            problem_id: "Q2".into(),
            round1_hits: 0,
            round1_drafts: 32,
            correct_less: 1,
            seeds_less: 16,
            correct_more: 0,
            seeds_more: 16,
        },
        MechanicsEntry {
            problem_id: "Q3".into(),
            round1_hits: 3,
            round1_drafts: 32,
            correct_less: 3,
            seeds_less: 16,
            correct_more: 3,
            seeds_more: 16,
        },
        MechanicsEntry {
            problem_id: "Q4".into(),
            round1_hits: 0,
            round1_drafts: 32,
            correct_less: 0,
            seeds_less: 16,
            correct_more: 0,
            seeds_more: 16,
        },
    ];
    let rows = mechanics_report(&entries);
    assert_eq!(rows[0].round1_hits, 3);
    assert_eq!(rows[0].round1_drafts, 32);
    assert_eq!((rows[0].acc_less, rows[0].acc_more), (0.4375, 0.6250));
    assert_eq!(rows[0].delta, 0.1875);
    assert_eq!(rows[0].class, MechanicsClass::Gain);

    assert_eq!(rows[1].round1_hits, 0);
    assert_eq!((rows[1].acc_less, rows[1].acc_more), (0.0625, 0.0));
    assert_eq!(rows[1].delta, -0.0625);
    assert_eq!(rows[1].class, MechanicsClass::Drop);

    assert_eq!(rows[2].class, MechanicsClass::Flat);
    assert_eq!(rows[2].delta, 0.0);
    assert_eq!(rows[3].class, MechanicsClass::Flat);
    assert_eq!(rows[3].delta, 0.0);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 07 PASS: mechanics fixture rows reproduced exactly in {elapsed:?}");
}

#[test]
fn criterion_08_frontier_matches_quadratic_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE9708);
    for case in 0..100 {
        let n = rng.gen_range(1..=64);
        // Small grids force budget and accuracy ties.
        let points: Vec<FrontierPoint> = (0..n)
            .map(|_| {
                let b_seq = rng.gen_range(1..=20) as f64 * 50.0;
                let b_total = rng.gen_range(1..=20) as f64 * 100.0;
                let accuracy = rng.gen_range(0..=10) as f64 / 10.0;
                FrontierPoint {
                    b_seq,
                    b_total,
                    accuracy,
                }
            })
            .collect();
        for axis in [BudgetAxis::Seq, BudgetAxis::Total] {
            let budget = |p: &FrontierPoint| match axis {
                BudgetAxis::Seq => p.b_seq,
                BudgetAxis::Total => p.b_total,
            };
            // O(n^2) dominance oracle.
            let mut oracle: Vec<usize> = Vec::new();
            for i in 0..points.len() {
                let dominated = (0..points.len()).any(|j| {
                    j != i
                        && budget(&points[j]) <= budget(&points[i])
                        && points[j].accuracy >= points[i].accuracy
                        && (budget(&points[j]) < budget(&points[i])
                            || points[j].accuracy > points[i].accuracy)
                });
                if !dominated {
                    oracle.push(i);
                }
            }
            let frontier = pareto_frontier(&points, axis);
            // Sorted-by-budget output.
            for w in frontier.windows(2) {
                assert!(budget(&points[w[0]]) <= budget(&points[w[1]]));
            }
            let mut sorted = frontier.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, oracle, "case {case} axis {axis:?}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "criterion 08 PASS: frontier equals O(n^2) oracle on 100 random point sets in {elapsed:?}"
    );
}

#[test]
fn criterion_09_eval_determinism_with_parallelism() {
    let start = Instant::now();
    let problems = synthetic_problems(12);
    let config: RunConfig = serde_json::from_value(serde_json::json!({
        "backend": {"type": "synthetic"},
        "operator": {"type": "pdr", "g": [4, 2, 1], "k": 2, "distill": "topk_per_sample"},
        "eval": {"dataset": "unused.jsonl", "n_seeds": 4, "run_seed": 99}
    }))
    .unwrap();
    let config = config.finalize().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let run_a = run_eval(&config, &problems).unwrap();
    write_results(std::slice::from_ref(&run_a), &out_a).unwrap();
    let run_b = run_eval(&config, &problems).unwrap();
    write_results(std::slice::from_ref(&run_b), &out_b).unwrap();

    let files = ["results.csv", "report.json"];
    for f in files {
        let a = std::fs::read(out_a.join(f)).unwrap();
        let b = std::fs::read(out_b.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
    let tdir_a = out_a.join("transcripts").join(&run_a.report.config_id);
    let tdir_b = out_b.join("transcripts").join(&run_b.report.config_id);
    let mut names: Vec<String> = std::fs::read_dir(&tdir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), problems.len() * 4);
    for name in &names {
        let a = std::fs::read(tdir_a.join(name)).unwrap();
        let b = std::fs::read(tdir_b.join(name)).unwrap();
        assert_eq!(a, b, "transcript {name} differs between runs");
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 09 PASS: two evals byte-identical across results.csv, report.json, {} transcripts in {elapsed:?}",
        names.len()
    );
}

#[test]
fn criterion_10_prompt_fixture_fidelity() {
    let start = Instant::now();
    let templates = TemplateSet::default();
    let problem = Problem::new(
        "fx",
        "Find the remainder when 2^10 is divided by 1000.",
        "24",
    );
    let cand1 =
        "We compute 2^10 = 1024, so the remainder modulo 1000 is $\\boxed{24}$.".to_string();
    let cand2 =
        "Doubling repeatedly gives 1024; subtracting 1000 leaves $\\boxed{24}$.".to_string();
    let summary = "Both solvers computed 2^10 = 1024 and reduced modulo 1000; they agree the remainder is 24.";

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prompts");
    let golden = |name: &str| -> String {
        let path = fixtures.join(name);
        std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("fixture {}: {e}", path.display()))
            .trim_end_matches('\n')
            .to_string()
    };

    let base = templates
        .render_prompt(PromptKind::Base, &problem, &PromptPayload::None)
        .unwrap();
    assert_eq!(base, golden("base.golden.txt"), "base prompt fixture");

    let sr = templates
        .render_prompt(
            PromptKind::SrRefine,
            &problem,
            &PromptPayload::PrevSolution(&cand1),
        )
        .unwrap();
    assert_eq!(sr, golden("sr_refine.golden.txt"), "SR prompt fixture");

    let cands = vec![cand1, cand2];
    let pdr_c = templates
        .render_prompt(
            PromptKind::PdrCandidates,
            &problem,
            &PromptPayload::Candidates(&cands),
        )
        .unwrap();
    assert_eq!(
        pdr_c,
        golden("pdr_candidates.golden.txt"),
        "PDR candidates fixture"
    );
    assert!(pdr_c.contains("<model_response_1>") && pdr_c.contains("<model_response_2>"));

    let pdr_s = templates
        .render_prompt(
            PromptKind::PdrSummary,
            &problem,
            &PromptPayload::Summary(summary),
        )
        .unwrap();
    assert_eq!(
        pdr_s,
        golden("pdr_summary.golden.txt"),
        "PDR summary fixture"
    );
    assert!(pdr_s.contains("Treat the summary as unverified"));

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "criterion 10 PASS: rendered prompts match golden fixtures byte-for-byte in {elapsed:?}"
    );
}

/// Criterion 3's closed forms double-checked by a direct Monte Carlo run of
/// the operator (not through the harness), plus the load_dataset path used
/// by the CLI.
#[test]
fn supplementary_closed_form_monte_carlo_and_dataset_io() {
    let templates = TemplateSet::default();
    let backend = SyntheticBackend::default();
    let problems = synthetic_problems(100);
    let mut hits = 0u32;
    let mut n = 0u32;
    let schedule = RoundSchedule::new(vec![2, 1], 1, DistillMode::OracleCorrect);
    for problem in &problems {
        for repeat in 0..10 {
            let seed = pdr_core::seeds::cell_seed(77, &problem.id, repeat);
            let outcome =
                run_pdr(&env(&backend, &templates, seed), problem, &schedule, 2048).unwrap();
            n += 1;
            if outcome.verdict == Some(true) {
                hits += 1;
            }
        }
    }
    let acc = hits as f64 / n as f64;
    let sigma = (0.725 * 0.275 / n as f64).sqrt();
    assert!((acc - 0.725).abs() < 4.0 * sigma, "acc {acc}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.jsonl");
    let lines: Vec<String> = problems
        .iter()
        .map(|p| {
            format!(
                r#"{{"id": {:?}, "problem": {:?}, "answer": {:?}}}"#,
                p.id,
                p.statement,
                p.gold_answer.clone().unwrap()
            )
        })
        .collect();
    std::fs::write(&path, lines.join("\n")).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(loaded, problems);
}
