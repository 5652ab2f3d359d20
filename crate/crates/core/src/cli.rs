//! Command-line front end: single runs, scaling experiments, inequality
//! sweeps, and the property suite.
//!
//! Exit codes: 0 for a clean run, 1 when an enabled checker reports a
//! violation, 2 for usage or configuration errors. All randomness flows
//! from `--seed` through named sub-streams, and identical command lines
//! produce byte-identical outputs.

use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::adversaries::{make_adversary, ADVERSARY_NAMES};
use crate::concentration::{lemma_interpolation_demo, talagrand_sweep};
use crate::properties::{
    check_agreement, check_fully_communicative, check_forgetful, check_validity,
    estimate_termination, rows_to_csv, run_single_trial, scaling_experiment, summaries_to_csv,
    InputSpec, PropertyReport, TrialConfig,
};
use crate::protocol::Thresholds;
use crate::rng::{derive_seed, stream};
use crate::simnet::{run, Execution};
use crate::trace::TraceFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "agreesim",
    about = "Deterministic simulator for randomized asynchronous binary agreement under resetting and crash failures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and write its JSON trace
    Run(RunArgs),
    /// Measure windows-to-decision across sizes and write CSV tables
    Scale(ScaleArgs),
    /// Exhaustive concentration-inequality sweep and interpolation demo
    CheckMath(CheckMathArgs),
    /// Statistical property suite over seeded runs
    CheckProperties(CheckPropertiesArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Processor count
    #[arg(long)]
    n: u32,
    /// Per-window fault budget
    #[arg(long)]
    t: u32,
    /// "default" or explicit "T1,T2,T3"
    #[arg(long, default_value = "default")]
    thresholds: String,
    /// Bit string, "unanimous0", "unanimous1", "balanced", or "random"
    #[arg(long)]
    inputs: String,
    /// fair | random | splitvote | splitvote-reset | crash
    #[arg(long, default_value = "fair")]
    adversary: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_windows: u32,
    /// Where the JSON trace is written
    #[arg(long, default_value = "trace.json")]
    trace_out: PathBuf,
    /// Skip the agreement/validity checks on the finished trace
    #[arg(long)]
    no_check: bool,
}

#[derive(Args)]
struct ScaleArgs {
    /// Comma-separated processor counts, e.g. "8,12,16,20"
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<u32>,
    /// Fault fraction; each size runs with t = floor(c * n)
    #[arg(long)]
    c: f64,
    #[arg(long, default_value = "splitvote-reset")]
    adversary: String,
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    max_windows: u32,
    /// "balanced", "unanimous0", "unanimous1", "random", or a bit string
    /// (bit strings require a single n)
    #[arg(long, default_value = "balanced")]
    inputs: String,
    #[arg(long, default_value = "scale_rows.csv")]
    rows_out: PathBuf,
    #[arg(long, default_value = "scale_summary.csv")]
    summary_out: PathBuf,
    /// Parallel trial workers; output bytes do not depend on this
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CheckMathArgs {
    /// Coordinates of the binary universe for the exhaustive sweep (<= 4)
    #[arg(long)]
    n: usize,
    /// Number of random product distributions besides the uniform one
    #[arg(long, default_value_t = 100)]
    dists: usize,
    /// Number of random interpolation instances
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckPropertiesArgs {
    #[arg(long, default_value_t = 7)]
    n: u32,
    #[arg(long, default_value_t = 1)]
    t: u32,
    /// Seeded runs per adversary for the agreement/validity sweep
    #[arg(long, default_value_t = 200)]
    trials: u32,
    #[arg(long, default_value_t = 500)]
    max_windows: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fuzzed state pairs for the forgetfulness check
    #[arg(long, default_value_t = 10_000)]
    fuzz: u32,
    /// Traces inspected by the full-communication check
    #[arg(long, default_value_t = 200)]
    traces: u32,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    run_from(args)
}

/// Parses and executes a full argument vector (including the program name).
pub fn run_from(args: Vec<String>) -> i32 {
    let args = match apply_config_file(args) {
        Ok(args) => args,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Scale(args) => cmd_scale(args),
        Command::CheckMath(args) => cmd_checkmath(args),
        Command::CheckProperties(args) => cmd_checkproperties(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

/// Optional flat `key=value` config file named by `--config`; keys are long
/// flag names and explicit flags win.
fn apply_config_file(mut args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(idx) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    if idx + 1 >= args.len() {
        return Err("--config requires a path".to_string());
    }
    let path = args.remove(idx + 1);
    args.remove(idx);
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("config {path}:{}: expected key=value", lineno + 1));
        };
        let (key, value) = (key.trim(), value.trim());
        let flag = format!("--{key}");
        if args.contains(&flag) {
            continue;
        }
        match value {
            "true" => args.push(flag),
            "false" => {}
            _ => {
                args.push(flag);
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

fn parse_inputs(spec: &str, n: u32) -> Result<InputSpec, String> {
    match spec {
        "unanimous0" => Ok(InputSpec::Unanimous(0)),
        "unanimous1" => Ok(InputSpec::Unanimous(1)),
        "balanced" => Ok(InputSpec::Balanced),
        "random" => Ok(InputSpec::Random),
        bits if bits.chars().all(|c| c == '0' || c == '1') && !bits.is_empty() => {
            if bits.len() != n as usize {
                return Err(format!(
                    "input bit string has length {}, expected n = {n}",
                    bits.len()
                ));
            }
            Ok(InputSpec::Explicit(
                bits.chars().map(|c| (c == '1') as u8).collect(),
            ))
        }
        other => Err(format!(
            "unrecognized inputs {other:?}; use a bit string, unanimous0, unanimous1, balanced, or random"
        )),
    }
}

fn parse_thresholds(spec: &str, n: u32, t: u32) -> Result<Thresholds, String> {
    let th = if spec == "default" {
        Thresholds::default_for(n, t).map_err(|e| e.to_string())?
    } else {
        let parts: Vec<u32> = spec
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("cannot parse thresholds {spec:?}: {e}"))?;
        let [t1, t2, t3] = parts[..] else {
            return Err(format!("thresholds {spec:?} must be T1,T2,T3"));
        };
        Thresholds::new(n, t, t1, t2, t3)
    };
    th.validate().map_err(|v| {
        format!(
            "invalid thresholds: {}",
            crate::protocol::ViolationList(v)
        )
    })?;
    Ok(th)
}

fn cmd_run(args: RunArgs) -> Result<i32, String> {
    let thresholds = parse_thresholds(&args.thresholds, args.n, args.t)?;
    let inputs_spec = parse_inputs(&args.inputs, args.n)?;
    if args.max_windows == 0 {
        return Err("max-windows must be at least 1".to_string());
    }
    if !ADVERSARY_NAMES.contains(&args.adversary.as_str()) {
        return Err(format!(
            "unknown adversary {:?}; expected one of {:?}",
            args.adversary, ADVERSARY_NAMES
        ));
    }
    let inputs = inputs_spec.materialize(args.n, derive_seed(args.seed, stream::INPUTS, 0));
    let mut exec = Execution::new(args.n, args.t, &inputs, thresholds, args.seed)
        .map_err(|e| e.to_string())?;
    let mut adversary = make_adversary(
        &args.adversary,
        derive_seed(args.seed, stream::ADVERSARY, 0),
        args.n,
        args.t,
    )
    .map_err(|e| e.to_string())?;
    let trace = run(&mut exec, adversary.as_mut(), args.max_windows).map_err(|e| e.to_string())?;

    let file = TraceFile::from_run(&exec, &trace, &args.adversary);
    let json = file.to_json().map_err(|e| e.to_string())?;
    fs::write(&args.trace_out, &json)
        .map_err(|e| format!("cannot write {}: {e}", args.trace_out.display()))?;

    println!(
        "run: n={} t={} thresholds=({},{},{}) adversary={} seed={}",
        args.n, args.t, thresholds.t1, thresholds.t2, thresholds.t3, args.adversary, args.seed
    );
    println!(
        "inputs: {}",
        inputs.iter().map(|b| b.to_string()).collect::<String>()
    );
    match trace.windows_to_decision() {
        Some(window) => {
            let value = trace.decisions[0].value;
            let deciders = trace.decisions.len();
            println!("decision: value {value} at window {window} ({deciders} deciders)");
        }
        None => println!("decision: none within {} windows", args.max_windows),
    }
    println!("digest: {}", trace.digest);
    println!("trace written to {}", args.trace_out.display());

    if !args.no_check {
        let mut violated = false;
        for report in [check_agreement(&trace), check_validity(&trace)] {
            println!("{report}");
            violated |= !report.passed();
        }
        if violated {
            return Ok(EXIT_VIOLATION);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_scale(args: ScaleArgs) -> Result<i32, String> {
    if args.n_list.is_empty() {
        return Err("n-list must name at least one size".to_string());
    }
    let inputs = match args.inputs.as_str() {
        bits if bits.chars().all(|c| c == '0' || c == '1') && !bits.is_empty() => {
            let [n] = args.n_list[..] else {
                return Err("explicit input bit strings require a single n".to_string());
            };
            parse_inputs(bits, n)?
        }
        named => parse_inputs(named, 0).map_err(|e| e.to_string())?,
    };
    if !ADVERSARY_NAMES.contains(&args.adversary.as_str()) {
        return Err(format!(
            "unknown adversary {:?}; expected one of {:?}",
            args.adversary, ADVERSARY_NAMES
        ));
    }
    let table = scaling_experiment(
        &args.n_list,
        args.c,
        args.trials,
        &args.adversary,
        args.seed,
        args.max_windows,
        inputs,
        args.jobs,
    )
    .map_err(|e| e.to_string())?;

    fs::write(&args.rows_out, rows_to_csv(&table.rows))
        .map_err(|e| format!("cannot write {}: {e}", args.rows_out.display()))?;
    fs::write(&args.summary_out, summaries_to_csv(&table.summaries))
        .map_err(|e| format!("cannot write {}: {e}", args.summary_out.display()))?;

    print!("{}", summaries_to_csv(&table.summaries));
    println!(
        "rows written to {}, summary written to {}",
        args.rows_out.display(),
        args.summary_out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_checkmath(args: CheckMathArgs) -> Result<i32, String> {
    let sweep = talagrand_sweep(args.n, args.dists, args.seed).map_err(|e| e.to_string())?;
    println!(
        "talagrand sweep: n={}, {} instances checked, {} violations (worst margin {:+.3e})",
        args.n, sweep.instances, sweep.violations, sweep.worst_margin
    );
    let demo = lemma_interpolation_demo(args.instances, derive_seed(args.seed, stream::TRIAL, 1))
        .map_err(|e| e.to_string())?;
    println!(
        "interpolation demo: {} instances, {} violations; ball-shift: {} pairs, {} violations",
        demo.instances,
        demo.interpolation_violations,
        demo.ball_shift_pairs,
        demo.ball_shift_violations
    );
    let clean =
        sweep.violations == 0 && demo.interpolation_violations == 0 && demo.ball_shift_violations == 0;
    Ok(if clean { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_checkproperties(args: CheckPropertiesArgs) -> Result<i32, String> {
    if args.trials == 0 || args.traces == 0 {
        return Err("trials and traces must be at least 1".to_string());
    }
    Thresholds::default_for(args.n, args.t).map_err(|e| e.to_string())?;
    let mut reports: Vec<PropertyReport> = Vec::new();

    // Agreement and validity over seeded runs across every adversary, with
    // random and balanced inputs.
    let mut agreement_runs = 0u64;
    let mut first_agreement_failure: Option<PropertyReport> = None;
    let mut first_validity_failure: Option<PropertyReport> = None;
    for (a_idx, adversary) in ADVERSARY_NAMES.iter().enumerate() {
        for (i_idx, inputs) in [InputSpec::Random, InputSpec::Balanced].into_iter().enumerate() {
            let cfg = TrialConfig::with_default_thresholds(args.n, args.t, inputs)
                .map_err(|e| e.to_string())?;
            let batch_seed = derive_seed(args.seed, stream::TRIAL, (a_idx * 2 + i_idx) as u64);
            for trial in 0..args.trials {
                let (_, trace) =
                    run_single_trial(&cfg, adversary, trial, batch_seed, args.max_windows)
                        .map_err(|e| e.to_string())?;
                agreement_runs += 1;
                let agreement = check_agreement(&trace);
                if !agreement.passed() && first_agreement_failure.is_none() {
                    first_agreement_failure = Some(agreement);
                }
                let validity = check_validity(&trace);
                if !validity.passed() && first_validity_failure.is_none() {
                    first_validity_failure = Some(validity);
                }
            }
        }
    }
    reports.push(first_agreement_failure.unwrap_or(PropertyReport {
        property: format!("agreement ({agreement_runs} runs)"),
        verdict: crate::properties::Verdict::Pass,
        counterexample: None,
        statistics: None,
    }));
    reports.push(first_validity_failure.unwrap_or(PropertyReport {
        property: format!("validity ({agreement_runs} runs)"),
        verdict: crate::properties::Verdict::Pass,
        counterexample: None,
        statistics: None,
    }));

    // Termination under benign scheduling.
    let cfg = TrialConfig::with_default_thresholds(args.n, args.t, InputSpec::Random)
        .map_err(|e| e.to_string())?;
    reports.push(
        estimate_termination(
            &cfg,
            "fair",
            args.trials.max(100),
            args.max_windows,
            derive_seed(args.seed, stream::TRIAL, 100),
            0.99,
            1,
        )
        .map_err(|e| e.to_string())?,
    );

    // Algorithm-class certification.
    reports.push(check_forgetful(args.n, args.fuzz, args.seed));
    let mut fully = None;
    let cfg_balanced = TrialConfig::with_default_thresholds(args.n, args.t, InputSpec::Balanced)
        .map_err(|e| e.to_string())?;
    for trial in 0..args.traces {
        let adversary = ADVERSARY_NAMES[(trial as usize) % ADVERSARY_NAMES.len()];
        let (_, trace) = run_single_trial(
            &cfg_balanced,
            adversary,
            trial,
            derive_seed(args.seed, stream::TRIAL, 200),
            args.max_windows,
        )
        .map_err(|e| e.to_string())?;
        let report = check_fully_communicative(&trace, args.n);
        if !report.passed() {
            fully = Some(report);
            break;
        }
    }
    reports.push(fully.unwrap_or(PropertyReport {
        property: format!("fully-communicative ({} traces)", args.traces),
        verdict: crate::properties::Verdict::Pass,
        counterexample: None,
        statistics: None,
    }));

    let mut all_pass = true;
    for report in &reports {
        println!("{report}");
        all_pass &= report.passed();
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_VIOLATION })
}
