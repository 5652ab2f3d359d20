//! Acceptance suite: one test per release criterion, each printing a
//! `ACCEPTANCE <id> ...: PASS/FAIL` line (run with `--nocapture` to see
//! them).
//!
//! Criteria 4 and 5 assert measured scaling behavior of the splitvote-reset
//! adversary; the suite records the observed medians and ratios either way.

use agreesim::adversaries::ADVERSARY_NAMES;
use agreesim::concentration::{lemma_interpolation_demo, talagrand_sweep};
use agreesim::properties::{
    check_agreement, check_fully_communicative, check_forgetful, check_validity,
    estimate_termination, run_single_trial, scaling_experiment, InputSpec, TrialConfig,
};
use agreesim::rng::{derive_seed, stream};

const JOBS: usize = 2;

fn verdict(id: &str, name: &str, pass: bool, detail: &str) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {id} {name}: {status} ({detail})");
    pass
}

/// 1. Unanimous inputs decide the input value at window 1 under every
///    adversary, for n in {7, 13, 19} with t = n/7.
#[test]
fn acceptance_1_first_window_unanimity() {
    let mut runs = 0u32;
    let mut clean = 0u32;
    for n in [7u32, 13, 19] {
        let t = n / 7;
        for adversary in ADVERSARY_NAMES {
            for value in [0u8, 1] {
                let cfg =
                    TrialConfig::with_default_thresholds(n, t, InputSpec::Unanimous(value))
                        .unwrap();
                for trial in 0..100 {
                    runs += 1;
                    let (record, _) =
                        run_single_trial(&cfg, adversary, trial, 0xACC1, 5).unwrap();
                    if record.windows_to_decision == Some(1)
                        && record.decision_value == Some(value)
                    {
                        clean += 1;
                    }
                }
            }
        }
    }
    let pass = clean == runs;
    assert!(
        verdict(
            "1",
            "first-window unanimity",
            pass,
            &format!("{clean}/{runs} runs decided the input at window 1"),
        ),
        "{clean}/{runs}"
    );
}

/// 2. Zero agreement violations and zero validity violations across at
///    least 10,000 seeded runs, every adversary, n in 7..=28, random and
///    balanced inputs.
#[test]
fn acceptance_2_agreement_and_validity() {
    use rayon::prelude::*;

    let mut cases = Vec::new();
    for n in 7u32..=28 {
        let t = n / 7;
        for adversary in ADVERSARY_NAMES {
            for inputs in [InputSpec::Random, InputSpec::Balanced] {
                cases.push((n, t, adversary, inputs));
            }
        }
    }
    let reps: u32 = 46; // 22 sizes x 5 adversaries x 2 input modes x 46 = 10,120 runs
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(JOBS)
        .build()
        .unwrap();
    let outcomes: Vec<(u64, u64, u64)> = pool.install(|| {
        cases
            .par_iter()
            .map(|(n, t, adversary, inputs)| {
                let cfg =
                    TrialConfig::with_default_thresholds(*n, *t, inputs.clone()).unwrap();
                let seed = derive_seed(0xACC2, stream::TRIAL, u64::from(*n) << 8);
                let mut runs = 0;
                let mut agreement_failures = 0;
                let mut validity_failures = 0;
                for trial in 0..reps {
                    let (_, trace) =
                        run_single_trial(&cfg, adversary, trial, seed, 1000).unwrap();
                    runs += 1;
                    if !check_agreement(&trace).passed() {
                        agreement_failures += 1;
                    }
                    if !check_validity(&trace).passed() {
                        validity_failures += 1;
                    }
                }
                (runs, agreement_failures, validity_failures)
            })
            .collect()
    });
    let runs: u64 = outcomes.iter().map(|o| o.0).sum();
    let agreement_failures: u64 = outcomes.iter().map(|o| o.1).sum();
    let validity_failures: u64 = outcomes.iter().map(|o| o.2).sum();
    let pass = runs >= 10_000 && agreement_failures == 0 && validity_failures == 0;
    assert!(
        verdict(
            "2",
            "agreement and validity",
            pass,
            &format!(
                "{runs} runs, {agreement_failures} agreement violations, {validity_failures} validity violations"
            ),
        ),
        "{runs} runs, {agreement_failures}/{validity_failures} violations"
    );
}

/// 3. Fair-adversary termination: 1,000 random-input runs at n = 7 decide
///    within 500 windows in at least 99% of trials.
#[test]
fn acceptance_3_termination_under_benign_scheduling() {
    let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Random).unwrap();
    let report = estimate_termination(&cfg, "fair", 1000, 500, 0xACC3, 0.99, JOBS).unwrap();
    let stats = report.statistics.clone().unwrap();
    assert!(
        verdict(
            "3",
            "termination under benign scheduling",
            report.passed(),
            &format!(
                "decided fraction {:.4} over {} trials, median {:?} windows",
                stats.decided_fraction, stats.trials, stats.median_windows
            ),
        ),
        "{report}"
    );
}

/// 4. Exponential-delay trend under splitvote-reset: medians strictly
///    increasing across n in {8, 12, 16, 20} with successive ratios >= 1.5.
#[test]
fn acceptance_4_exponential_delay_trend() {
    let table = scaling_experiment(
        &[8, 12, 16, 20],
        0.125,
        200,
        "splitvote-reset",
        0xACC4,
        200_000,
        InputSpec::Balanced,
        JOBS,
    )
    .unwrap();
    let medians: Vec<f64> = table
        .summaries
        .iter()
        .map(|s| s.median_windows.expect("every trial decided"))
        .collect();
    let ratios: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    let pass = medians.windows(2).all(|w| w[1] > w[0]) && ratios.iter().all(|&r| r >= 1.5);
    assert!(
        verdict(
            "4",
            "exponential-delay trend",
            pass,
            &format!("medians {medians:?}, successive ratios {ratios:?}"),
        ),
        "medians {medians:?}, ratios {ratios:?}"
    );
}

/// 5. Paired-seed dominance: splitvote-reset delay >= fair delay on the
///    same seed in at least 95% of 200 paired seeds, for each n.
#[test]
fn acceptance_5_paired_seed_dominance() {
    let mut pass = true;
    let mut details = Vec::new();
    for n in [8u32, 12, 16, 20] {
        let t = n / 8;
        let cfg = TrialConfig::with_default_thresholds(n, t, InputSpec::Balanced).unwrap();
        let mut dominated = 0u32;
        for trial in 0..200 {
            let (slow, _) =
                run_single_trial(&cfg, "splitvote-reset", trial, 0xACC5, 200_000).unwrap();
            let (fast, _) = run_single_trial(&cfg, "fair", trial, 0xACC5, 200_000).unwrap();
            let (Some(sv), Some(fair)) = (slow.windows_to_decision, fast.windows_to_decision)
            else {
                continue;
            };
            if sv >= fair {
                dominated += 1;
            }
        }
        let fraction = f64::from(dominated) / 200.0;
        details.push(format!("n={n}: {fraction:.3}"));
        pass &= fraction >= 0.95;
    }
    assert!(
        verdict(
            "5",
            "paired-seed dominance",
            pass,
            &details.join(", "),
        ),
        "{details:?}"
    );
}

/// 6. Exhaustive concentration-inequality sweep: every subset of {0,1}^n
///    for n <= 4, every d, uniform plus 100 random product distributions,
///    zero violations within 1e-12.
#[test]
fn acceptance_6_talagrand_sweep() {
    let mut instances = 0u64;
    let mut violations = 0u64;
    for n in 1..=4 {
        let report = talagrand_sweep(n, 100, 0xACC6).unwrap();
        instances += report.instances;
        violations += report.violations;
    }
    let pass = violations == 0;
    assert!(
        verdict(
            "6",
            "talagrand sweep",
            pass,
            &format!("{instances} instances checked, {violations} violations"),
        ),
        "{violations} violations"
    );
}

/// 7. Interpolation demonstrator: 100 random separated instances; the
///    selected mixture bounds both sets by eta, and the ball-shift
///    inequality holds on every adjacent prefix pair.
#[test]
fn acceptance_7_interpolation_demonstrator() {
    let report = lemma_interpolation_demo(100, 0xACC7).unwrap();
    let pass = report.interpolation_violations == 0 && report.ball_shift_violations == 0;
    assert!(
        verdict(
            "7",
            "interpolation demonstrator",
            pass,
            &format!(
                "{} instances, {} interpolation violations; {} ball-shift pairs, {} violations",
                report.instances,
                report.interpolation_violations,
                report.ball_shift_pairs,
                report.ball_shift_violations
            ),
        ),
        "{report:?}"
    );
}

/// 8. Algorithm-class certification: forgetfulness over 10,000 fuzzed state
///    pairs and full communication over 1,000 traces.
#[test]
fn acceptance_8_algorithm_class_certification() {
    let forgetful = check_forgetful(7, 10_000, 0xACC8);
    let mut traces = 0u32;
    let mut fully_failures = 0u32;
    for n in [7u32, 13] {
        let t = n / 7;
        for inputs in [InputSpec::Random, InputSpec::Balanced] {
            let cfg = TrialConfig::with_default_thresholds(n, t, inputs).unwrap();
            for (idx, adversary) in ADVERSARY_NAMES.iter().enumerate() {
                for trial in 0..50 {
                    let seed = derive_seed(0xACC8, stream::TRIAL, idx as u64);
                    let (_, trace) =
                        run_single_trial(&cfg, adversary, trial, seed, 500).unwrap();
                    traces += 1;
                    if !check_fully_communicative(&trace, n).passed() {
                        fully_failures += 1;
                    }
                }
            }
        }
    }
    let pass = forgetful.passed() && traces >= 1000 && fully_failures == 0;
    assert!(
        verdict(
            "8",
            "algorithm-class certification",
            pass,
            &format!(
                "forgetful over 10000 pairs: {}, fully-communicative over {traces} traces: {fully_failures} failures",
                if forgetful.passed() { "clean" } else { "violated" }
            ),
        ),
        "forgetful {forgetful}, {fully_failures} full-communication failures"
    );
}

/// 9. Determinism: identical command lines give byte-identical outputs;
///    20 spot checks across all subcommands.
#[test]
fn acceptance_9_determinism() {
    use std::process::Command;

    let bin = env!("CARGO_BIN_EXE_agreesim");
    let dir = tempfile::tempdir().unwrap();
    let as_path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let mut commands: Vec<Vec<String>> = Vec::new();
    for (i, (inputs, adversary, seed)) in [
        ("unanimous0", "fair", "42"),
        ("unanimous1", "crash", "7"),
        ("0101010", "splitvote", "7"),
        ("balanced", "splitvote-reset", "3"),
        ("random", "random", "11"),
        ("1100110", "random", "100"),
        ("balanced", "splitvote", "200"),
        ("random", "fair", "300"),
    ]
    .iter()
    .enumerate()
    {
        commands.push(
            [
                "run",
                "--n",
                "7",
                "--t",
                "1",
                "--inputs",
                inputs,
                "--adversary",
                adversary,
                "--seed",
                seed,
                "--max-windows",
                "5000",
                "--trace-out",
                &as_path(&format!("run{i}.json")),
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
    }
    for (i, (nlist, c, adversary, trials)) in [
        ("7,13", "0.143", "fair", "20"),
        ("8,10", "0.125", "splitvote-reset", "15"),
        ("8,12", "0.125", "random", "15"),
        ("9", "0.111", "crash", "25"),
        ("8", "0.125", "splitvote", "25"),
        ("10,12", "0.083", "fair", "20"),
    ]
    .iter()
    .enumerate()
    {
        commands.push(
            [
                "scale",
                "--n-list",
                nlist,
                "--c",
                c,
                "--adversary",
                adversary,
                "--trials",
                trials,
                "--seed",
                "5",
                "--max-windows",
                "20000",
                "--jobs",
                "2",
                "--rows-out",
                &as_path(&format!("rows{i}.csv")),
                "--summary-out",
                &as_path(&format!("summary{i}.csv")),
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
    }
    for (n, dists, seed) in [("2", "20", "1"), ("3", "10", "9"), ("3", "25", "17")] {
        commands.push(
            [
                "check-math",
                "--n",
                n,
                "--dists",
                dists,
                "--instances",
                "10",
                "--seed",
                seed,
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
    }
    for seed in ["1", "2", "3"] {
        commands.push(
            [
                "check-properties",
                "--n",
                "7",
                "--t",
                "1",
                "--trials",
                "20",
                "--traces",
                "20",
                "--fuzz",
                "500",
                "--seed",
                seed,
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
    }
    assert_eq!(commands.len(), 20);

    let mut checks = 0;
    for args in &commands {
        let run_once = || {
            let output = Command::new(bin)
                .args(args)
                .current_dir(dir.path())
                .output()
                .expect("binary runs");
            // Collect stdout plus every file the command wrote.
            let mut blob = output.stdout.clone();
            let mut names: Vec<_> = std::fs::read_dir(dir.path())
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            for p in names {
                blob.extend_from_slice(&std::fs::read(&p).unwrap());
            }
            (output.status.code(), blob)
        };
        let first = run_once();
        let second = run_once();
        assert_eq!(
            first, second,
            "command {args:?} produced differing outputs"
        );
        checks += 1;
    }
    assert!(
        verdict(
            "9",
            "determinism",
            checks == 20,
            &format!("{checks} command spot checks, all byte-identical"),
        ),
        "{checks} checks"
    );
}
