//! Executable checkers for the correctness and termination definitions, the
//! algorithm-class properties, and the statistical harness over many seeded
//! runs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::adversaries::{make_adversary, AdversaryError};
use crate::protocol::{Bit, ProcessorId, ProcessorState, Round, Thresholds};
use crate::rng::{derive_seed, stream};
use crate::simnet::{run, Execution, ExecutionTrace, SimError};

#[derive(Debug, Error)]
pub enum PropertiesError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("infeasible scale point: n = {n}, c = {c} gives t = {t}, need 1 <= t and 6t < n")]
    InfeasibleScalePoint { n: u32, c: f64, t: u32 },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(crate::protocol::ViolationList),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// Evidence attached to every failing report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub digest: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub trials: u64,
    pub decided: u64,
    pub decided_fraction: f64,
    pub median_windows: Option<f64>,
    pub mean_windows: Option<f64>,
    pub p90_windows: Option<u32>,
}

/// Outcome of one property check; failing reports always carry a
/// counterexample.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub property: String,
    pub verdict: Verdict,
    pub counterexample: Option<Counterexample>,
    pub statistics: Option<RunStatistics>,
}

impl PropertyReport {
    fn pass(property: &str) -> Self {
        PropertyReport {
            property: property.to_string(),
            verdict: Verdict::Pass,
            counterexample: None,
            statistics: None,
        }
    }

    fn fail(property: &str, counterexample: Counterexample) -> Self {
        PropertyReport {
            property: property.to_string(),
            verdict: Verdict::Fail,
            counterexample: Some(counterexample),
            statistics: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

impl std::fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        };
        write!(f, "{}: {}", self.property, verdict)?;
        if let Some(stats) = &self.statistics {
            write!(
                f,
                " (trials={}, decided_fraction={:.4}",
                stats.trials, stats.decided_fraction
            )?;
            if let Some(m) = stats.median_windows {
                write!(f, ", median_windows={m:.1}")?;
            }
            write!(f, ")")?;
        }
        if let Some(ce) = &self.counterexample {
            write!(f, " [{} @ {}]", ce.detail, ce.digest)?;
        }
        Ok(())
    }
}

/// No two decision events carry different bits.
pub fn check_agreement(trace: &ExecutionTrace) -> PropertyReport {
    for pair in trace.decisions.windows(2) {
        if pair[0].value != pair[1].value {
            return PropertyReport::fail(
                "agreement",
                Counterexample {
                    digest: trace.digest.clone(),
                    detail: format!(
                        "processor {} decided {} but processor {} decided {}",
                        pair[0].pid, pair[0].value, pair[1].pid, pair[1].value
                    ),
                },
            );
        }
    }
    PropertyReport::pass("agreement")
}

/// Every decided value appears among the initial inputs.
pub fn check_validity(trace: &ExecutionTrace) -> PropertyReport {
    for d in &trace.decisions {
        if !trace.inputs.contains(&d.value) {
            return PropertyReport::fail(
                "validity",
                Counterexample {
                    digest: trace.digest.clone(),
                    detail: format!(
                        "processor {} decided {} but no input equals it",
                        d.pid, d.value
                    ),
                },
            );
        }
    }
    PropertyReport::pass("validity")
}

/// How the initial bit vector is chosen for a trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSpec {
    Unanimous(Bit),
    /// `ceil(n/2)` ones assigned to the lowest ids.
    Balanced,
    /// Independent fair bits from the trial's input stream.
    Random,
    Explicit(Vec<Bit>),
}

impl InputSpec {
    pub fn materialize(&self, n: u32, seed: u64) -> Vec<Bit> {
        match self {
            InputSpec::Unanimous(v) => vec![*v; n as usize],
            InputSpec::Balanced => {
                let ones = n.div_ceil(2) as usize;
                (0..n as usize).map(|i| u8::from(i < ones)).collect()
            }
            InputSpec::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.gen_range(0..=1u8)).collect()
            }
            InputSpec::Explicit(bits) => bits.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InputSpec::Unanimous(v) => format!("unanimous{v}"),
            InputSpec::Balanced => "balanced".to_string(),
            InputSpec::Random => "random".to_string(),
            InputSpec::Explicit(bits) => bits.iter().map(|b| b.to_string()).collect(),
        }
    }
}

/// Parameters shared by every trial of an experiment.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub n: u32,
    pub t: u32,
    pub thresholds: Thresholds,
    pub inputs: InputSpec,
}

impl TrialConfig {
    pub fn with_default_thresholds(
        n: u32,
        t: u32,
        inputs: InputSpec,
    ) -> Result<Self, PropertiesError> {
        let thresholds = Thresholds::default_for(n, t).map_err(|e| match e {
            crate::protocol::ProtocolError::InvalidThresholds(v) => {
                PropertiesError::InvalidThresholds(v)
            }
            other => PropertiesError::Sim(SimError::Protocol(other)),
        })?;
        Ok(TrialConfig {
            n,
            t,
            thresholds,
            inputs,
        })
    }
}

/// One row of the per-trial table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub n: u32,
    pub t: u32,
    pub c: Option<f64>,
    pub seed: u64,
    pub trial: u32,
    pub adversary: String,
    pub inputs: String,
    pub decided: bool,
    pub decision_value: Option<Bit>,
    pub windows_to_decision: Option<u32>,
    pub digest: String,
}

/// Runs trial `trial` of the experiment and returns both the record and the
/// full trace.
///
/// The trial seed feeds the protocol coins directly, so paired comparisons
/// across adversaries share coin streams wherever rounds and reset counts
/// line up.
pub fn run_single_trial(
    cfg: &TrialConfig,
    adversary_name: &str,
    trial: u32,
    base_seed: u64,
    max_windows: u32,
) -> Result<(TrialRecord, ExecutionTrace), PropertiesError> {
    let trial_seed = derive_seed(base_seed, stream::TRIAL, u64::from(trial));
    let inputs = cfg
        .inputs
        .materialize(cfg.n, derive_seed(trial_seed, stream::INPUTS, 0));
    let mut exec = Execution::new(cfg.n, cfg.t, &inputs, cfg.thresholds, trial_seed)?;
    let mut adversary = make_adversary(
        adversary_name,
        derive_seed(trial_seed, stream::ADVERSARY, 0),
        cfg.n,
        cfg.t,
    )?;
    let trace = run(&mut exec, adversary.as_mut(), max_windows)?;
    let first = trace.decisions.first().copied();
    let record = TrialRecord {
        n: cfg.n,
        t: cfg.t,
        c: None,
        seed: trial_seed,
        trial,
        adversary: adversary_name.to_string(),
        inputs: inputs.iter().map(|b| b.to_string()).collect(),
        decided: first.is_some(),
        decision_value: first.map(|d| d.value),
        windows_to_decision: first.map(|d| d.window),
        digest: trace.digest.clone(),
    };
    Ok((record, trace))
}

/// Runs `trials` independent seeded executions, optionally in parallel.
/// Records come back in trial order, so parallelism never changes output.
pub fn run_trials(
    cfg: &TrialConfig,
    adversary_name: &str,
    trials: u32,
    base_seed: u64,
    max_windows: u32,
    jobs: usize,
) -> Result<Vec<TrialRecord>, PropertiesError> {
    if trials == 0 {
        return Err(PropertiesError::NoTrials);
    }
    let one = |trial: u32| {
        run_single_trial(cfg, adversary_name, trial, base_seed, max_windows)
            .map(|(record, _)| record)
    };
    if jobs <= 1 {
        (0..trials).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool construction");
        pool.install(|| (0..trials).into_par_iter().map(one).collect())
    }
}

/// Windows-to-decision statistics over a batch of records.
pub fn summarize(records: &[TrialRecord]) -> RunStatistics {
    let trials = records.len() as u64;
    let mut windows: Vec<u32> = records
        .iter()
        .filter_map(|r| r.windows_to_decision)
        .collect();
    windows.sort_unstable();
    let decided = windows.len() as u64;
    let median = match windows.len() {
        0 => None,
        k if k % 2 == 1 => Some(f64::from(windows[k / 2])),
        k => Some((f64::from(windows[k / 2 - 1]) + f64::from(windows[k / 2])) / 2.0),
    };
    let mean = if windows.is_empty() {
        None
    } else {
        Some(windows.iter().map(|&w| f64::from(w)).sum::<f64>() / windows.len() as f64)
    };
    let p90 = if windows.is_empty() {
        None
    } else {
        let rank = ((windows.len() as f64) * 0.9).ceil() as usize;
        Some(windows[rank.max(1) - 1])
    };
    RunStatistics {
        trials,
        decided,
        decided_fraction: if trials == 0 {
            0.0
        } else {
            decided as f64 / trials as f64
        },
        median_windows: median,
        mean_windows: mean,
        p90_windows: p90,
    }
}

/// Termination estimate: decided fraction and delay distribution over
/// `trials` seeded runs, judged against a caller-supplied threshold.
pub fn estimate_termination(
    cfg: &TrialConfig,
    adversary_name: &str,
    trials: u32,
    max_windows: u32,
    base_seed: u64,
    min_decided_fraction: f64,
    jobs: usize,
) -> Result<PropertyReport, PropertiesError> {
    let records = run_trials(cfg, adversary_name, trials, base_seed, max_windows, jobs)?;
    let stats = summarize(&records);
    let mut report = if stats.decided_fraction + 1e-9 >= min_decided_fraction {
        PropertyReport::pass("termination")
    } else {
        let witness = records
            .iter()
            .find(|r| !r.decided)
            .expect("fraction below threshold implies an undecided trial");
        PropertyReport::fail(
            "termination",
            Counterexample {
                digest: witness.digest.clone(),
                detail: format!(
                    "decided fraction {:.4} < {:.4}; trial {} undecided after {} windows",
                    stats.decided_fraction, min_decided_fraction, witness.trial, max_windows
                ),
            },
        )
    };
    report.statistics = Some(stats);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Algorithm-class properties
// ---------------------------------------------------------------------------

fn fuzz_inbox(
    rng: &mut ChaCha8Rng,
    n: u32,
    rounds: impl Iterator<Item = Round>,
) -> BTreeMap<Round, Vec<(ProcessorId, Bit)>> {
    let mut inbox = BTreeMap::new();
    for round in rounds {
        let len = rng.gen_range(0..=n.min(6)) as usize;
        let mut senders: Vec<ProcessorId> = (1..=n).collect();
        for i in (1..senders.len()).rev() {
            let j = rng.gen_range(0..=i);
            senders.swap(i, j);
        }
        let votes: Vec<(ProcessorId, Bit)> = senders
            .into_iter()
            .take(len)
            .map(|s| (s, rng.gen_range(0..=1u8)))
            .collect();
        if !votes.is_empty() {
            inbox.insert(round, votes);
        }
    }
    inbox
}

/// Compares the sending behavior of two states; `None` means they agree.
fn compare_sends(a: &ProcessorState, b: &ProcessorState, n: u32) -> Option<String> {
    let mut a = a.clone();
    let mut b = b.clone();
    let out_a = a.on_send(n);
    let out_b = b.on_send(n);
    (out_a != out_b).then(|| {
        format!(
            "states agreeing on recent history emitted {} vs {} messages",
            out_a.len(),
            out_b.len()
        )
    })
}

/// Sent messages must depend only on the input bit plus messages and
/// randomness since the previous sending event: state pairs agreeing on
/// `(input, round, value, catch-up, current-round inbox, pending-send)` but
/// differing in older history must emit identical message lists.
pub fn check_forgetful(n: u32, fuzz_budget: u32, seed: u64) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::FUZZ, 0));
    for case in 0..fuzz_budget {
        let id = rng.gen_range(1..=n);
        let input: Bit = rng.gen_range(0..=1);
        let output = match rng.gen_range(0..3u8) {
            0 => None,
            _ => Some(rng.gen_range(0..=1u8)),
        };
        let catch_up = rng.gen_bool(0.25);
        let pending_send = rng.gen_bool(0.8);
        let round: Round = rng.gen_range(2..40);
        let value: Bit = rng.gen_range(0..=1);

        // Shared recent history: the current-round inbox (and any buffered
        // future votes).
        let shared = fuzz_inbox(&mut rng, n, round..=round + 1);

        // Divergent old history: per-state junk for earlier rounds plus a
        // different reset count.
        let mut inbox_a = fuzz_inbox(&mut rng, n, 1..round);
        let mut inbox_b = fuzz_inbox(&mut rng, n, 1..round);
        inbox_a.extend(shared.clone());
        inbox_b.extend(shared);
        let resets_a = rng.gen_range(0..3);
        let resets_b = rng.gen_range(3..6);

        let a = ProcessorState::from_parts(
            id,
            input,
            output,
            Some(round),
            Some(value),
            resets_a,
            catch_up,
            if catch_up { BTreeMap::new() } else { inbox_a },
            pending_send,
        );
        let b = ProcessorState::from_parts(
            id,
            input,
            output,
            Some(round),
            Some(value),
            resets_b,
            catch_up,
            if catch_up { BTreeMap::new() } else { inbox_b },
            pending_send,
        );
        if let Some(detail) = compare_sends(&a, &b, n) {
            return PropertyReport::fail(
                "forgetful",
                Counterexample {
                    digest: format!("fuzz case {case}"),
                    detail,
                },
            );
        }
    }
    PropertyReport::pass("forgetful")
}

/// Every processor that completed a round in normal mode (received its
/// `T1`-th current-round vote) and was not reset at the end of that window
/// must broadcast to all `n` processors at its next sending step.
pub fn check_fully_communicative(trace: &ExecutionTrace, n: u32) -> PropertyReport {
    for (idx, events) in trace.window_events.iter().enumerate() {
        let Some(next_events) = trace.window_events.get(idx + 1) else {
            break;
        };
        let resets = &trace.windows[idx].resets;
        for completion in &events.completions {
            if completion.was_catching_up || resets.contains(&completion.pid) {
                continue;
            }
            let sent = next_events
                .sends
                .iter()
                .find(|s| s.pid == completion.pid);
            let ok = sent.map(|s| s.receivers == n).unwrap_or(false);
            if !ok {
                return PropertyReport::fail(
                    "fully-communicative",
                    Counterexample {
                        digest: trace.digest.clone(),
                        detail: format!(
                            "processor {} completed round {} in window {} but did not broadcast to all {} processors next window",
                            completion.pid,
                            completion.round,
                            idx + 1,
                            n
                        ),
                    },
                );
            }
        }
    }
    PropertyReport::pass("fully-communicative")
}

// ---------------------------------------------------------------------------
// Scaling experiments
// ---------------------------------------------------------------------------

/// Per-`n` summary of a scaling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: u32,
    pub t: u32,
    pub adversary: String,
    pub trials: u32,
    pub decided_fraction: f64,
    pub median_windows: Option<f64>,
    pub mean_windows: Option<f64>,
    pub p90_windows: Option<u32>,
}

/// Full output of a scaling experiment: one row per `(n, trial)` and one
/// summary row per `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<TrialRecord>,
    pub summaries: Vec<SummaryRow>,
}

/// Measures windows-to-first-decision across sizes with `t = floor(c * n)`.
#[allow(clippy::too_many_arguments)]
pub fn scaling_experiment(
    n_list: &[u32],
    c: f64,
    trials: u32,
    adversary_name: &str,
    seed: u64,
    max_windows: u32,
    inputs: InputSpec,
    jobs: usize,
) -> Result<ScalingTable, PropertiesError> {
    if trials == 0 {
        return Err(PropertiesError::NoTrials);
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (point, &n) in n_list.iter().enumerate() {
        let t = (c * f64::from(n)).floor() as u32;
        if t < 1 || 6 * t >= n {
            return Err(PropertiesError::InfeasibleScalePoint { n, c, t });
        }
        let cfg = TrialConfig::with_default_thresholds(n, t, inputs.clone())?;
        let point_seed = derive_seed(seed, stream::TRIAL, 0x5ca1e ^ point as u64);
        let mut records = run_trials(&cfg, adversary_name, trials, point_seed, max_windows, jobs)?;
        for r in &mut records {
            r.c = Some(c);
        }
        let stats = summarize(&records);
        summaries.push(SummaryRow {
            n,
            t,
            adversary: adversary_name.to_string(),
            trials,
            decided_fraction: stats.decided_fraction,
            median_windows: stats.median_windows,
            mean_windows: stats.mean_windows,
            p90_windows: stats.p90_windows,
        });
        rows.extend(records);
    }
    Ok(ScalingTable { rows, summaries })
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn opt_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// One row per trial: `n,t,c,seed,trial,adversary,inputs,decided,decision_value,windows_to_decision,digest`.
pub fn rows_to_csv(rows: &[TrialRecord]) -> String {
    let mut out =
        String::from("n,t,c,seed,trial,adversary,inputs,decided,decision_value,windows_to_decision,digest\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.t,
            opt_string(&r.c),
            r.seed,
            r.trial,
            r.adversary,
            r.inputs,
            r.decided,
            opt_string(&r.decision_value),
            opt_string(&r.windows_to_decision),
            r.digest,
        ));
    }
    out
}

/// One row per size: `n,t,adversary,trials,decided_fraction,median_windows,mean_windows,p90_windows`.
pub fn summaries_to_csv(rows: &[SummaryRow]) -> String {
    let mut out =
        String::from("n,t,adversary,trials,decided_fraction,median_windows,mean_windows,p90_windows\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{},{},{}\n",
            r.n,
            r.t,
            r.adversary,
            r.trials,
            r.decided_fraction,
            r.median_windows.map(|m| format!("{m:.1}")).unwrap_or_default(),
            r.mean_windows.map(|m| format!("{m:.3}")).unwrap_or_default(),
            opt_string(&r.p90_windows),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::Decision;

    fn trace_with_decisions(inputs: Vec<Bit>, decisions: Vec<(ProcessorId, Bit)>) -> ExecutionTrace {
        let mut exec = Execution::new(
            inputs.len() as u32,
            1,
            &inputs,
            Thresholds::default_for(inputs.len() as u32, 1).unwrap(),
            0,
        )
        .unwrap();
        let mut adv = crate::adversaries::fair_adversary();
        let _ = run(&mut exec, adv.as_mut(), 1).unwrap();
        let mut trace = exec.trace().clone();
        trace.decisions = decisions
            .into_iter()
            .map(|(pid, value)| Decision {
                pid,
                value,
                window: 1,
            })
            .collect();
        trace
    }

    #[test]
    fn agreement_passes_on_agreeing_or_empty_decision_lists() {
        let trace = trace_with_decisions(vec![0, 1, 0, 1, 0, 1, 0], vec![(1, 0), (3, 0)]);
        assert!(check_agreement(&trace).passed());
        let trace = trace_with_decisions(vec![0, 1, 0, 1, 0, 1, 0], vec![]);
        assert!(check_agreement(&trace).passed());
    }

    #[test]
    fn agreement_fails_with_a_counterexample() {
        let trace = trace_with_decisions(vec![0, 1, 0, 1, 0, 1, 0], vec![(1, 0), (2, 1)]);
        let report = check_agreement(&trace);
        assert!(!report.passed());
        assert!(report.counterexample.is_some());
    }

    #[test]
    fn validity_requires_decisions_to_match_an_input() {
        let trace = trace_with_decisions(vec![0; 7], vec![(1, 0)]);
        assert!(check_validity(&trace).passed());
        let trace = trace_with_decisions(vec![0; 7], vec![(1, 1)]);
        assert!(!check_validity(&trace).passed());
        let trace = trace_with_decisions(vec![0, 1, 0, 1, 0, 1, 0], vec![(1, 1), (2, 0)]);
        assert!(check_validity(&trace).passed());
    }

    #[test]
    fn input_specs_materialize_deterministically() {
        assert_eq!(InputSpec::Unanimous(1).materialize(4, 0), vec![1, 1, 1, 1]);
        assert_eq!(InputSpec::Balanced.materialize(5, 0), vec![1, 1, 1, 0, 0]);
        assert_eq!(InputSpec::Balanced.materialize(8, 0), vec![1, 1, 1, 1, 0, 0, 0, 0]);
        let a = InputSpec::Random.materialize(16, 7);
        let b = InputSpec::Random.materialize(16, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|&bit| bit <= 1));
    }

    #[test]
    fn termination_estimate_passes_for_the_fair_adversary() {
        let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Random).unwrap();
        let report = estimate_termination(&cfg, "fair", 100, 500, 11, 0.99, 1).unwrap();
        assert!(report.passed(), "{report}");
        let stats = report.statistics.unwrap();
        assert_eq!(stats.trials, 100);
        assert!(stats.decided_fraction >= 0.99);
    }

    #[test]
    fn termination_estimate_rejects_zero_trials() {
        let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Random).unwrap();
        assert!(matches!(
            estimate_termination(&cfg, "fair", 0, 500, 11, 0.99, 1),
            Err(PropertiesError::NoTrials)
        ));
    }

    #[test]
    fn unanimous_inputs_decide_at_window_one_for_every_adversary() {
        for name in crate::adversaries::ADVERSARY_NAMES {
            let cfg =
                TrialConfig::with_default_thresholds(7, 1, InputSpec::Unanimous(1)).unwrap();
            let records = run_trials(&cfg, name, 20, 3, 10, 1).unwrap();
            assert!(
                records
                    .iter()
                    .all(|r| r.windows_to_decision == Some(1) && r.decision_value == Some(1)),
                "adversary {name}"
            );
        }
    }

    #[test]
    fn parallel_trials_match_sequential_trials() {
        let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Random).unwrap();
        let seq = run_trials(&cfg, "splitvote", 40, 9, 500, 1).unwrap();
        let par = run_trials(&cfg, "splitvote", 40, 9, 500, 4).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn forgetful_holds_for_the_protocol() {
        let report = check_forgetful(7, 2000, 5);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn forgetful_comparator_detects_differing_sends() {
        let a = ProcessorState::from_parts(
            1,
            0,
            None,
            Some(5),
            Some(0),
            0,
            false,
            BTreeMap::new(),
            true,
        );
        let b = ProcessorState::from_parts(
            1,
            0,
            None,
            Some(5),
            Some(1),
            0,
            false,
            BTreeMap::new(),
            true,
        );
        assert!(compare_sends(&a, &b, 7).is_some());
    }

    #[test]
    fn fully_communicative_holds_on_real_traces() {
        for name in crate::adversaries::ADVERSARY_NAMES {
            let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Balanced).unwrap();
            let (_, trace) = run_single_trial(&cfg, name, 0, 13, 300).unwrap();
            let report = check_fully_communicative(&trace, 7);
            assert!(report.passed(), "adversary {name}: {report}");
        }
    }

    #[test]
    fn fully_communicative_fails_on_a_doctored_trace() {
        let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Balanced).unwrap();
        let (_, mut trace) = run_single_trial(&cfg, "fair", 0, 13, 50).unwrap();
        assert!(trace.window_events.len() >= 2);
        // Erase one broadcast from the second window.
        trace.window_events[1].sends.retain(|s| s.pid != 3);
        let report = check_fully_communicative(&trace, 7);
        assert!(!report.passed());
        assert!(report.counterexample.is_some());
    }

    #[test]
    fn catch_up_only_completions_pass_vacuously() {
        let cfg = TrialConfig::with_default_thresholds(7, 1, InputSpec::Balanced).unwrap();
        let (_, mut trace) = run_single_trial(&cfg, "fair", 0, 13, 50).unwrap();
        for events in &mut trace.window_events {
            for c in &mut events.completions {
                c.was_catching_up = true;
            }
            events.sends.clear();
        }
        assert!(check_fully_communicative(&trace, 7).passed());
    }

    #[test]
    fn scaling_experiment_reports_rows_and_summaries() {
        let table = scaling_experiment(
            &[7],
            0.15,
            10,
            "fair",
            1,
            100,
            InputSpec::Unanimous(1),
            1,
        )
        .unwrap();
        assert_eq!(table.rows.len(), 10);
        assert_eq!(table.summaries.len(), 1);
        assert_eq!(table.summaries[0].median_windows, Some(1.0));
        assert_eq!(table.summaries[0].decided_fraction, 1.0);
    }

    #[test]
    fn scaling_experiment_rejects_infeasible_points() {
        let err = scaling_experiment(
            &[8],
            0.5,
            10,
            "fair",
            1,
            100,
            InputSpec::Balanced,
            1,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PropertiesError::InfeasibleScalePoint { n: 8, t: 4, .. }
        ));
    }

    #[test]
    fn csv_output_is_stable_and_matches_the_schema() {
        let table = scaling_experiment(
            &[7],
            0.15,
            4,
            "fair",
            1,
            100,
            InputSpec::Balanced,
            1,
        )
        .unwrap();
        let rows = rows_to_csv(&table.rows);
        assert!(rows.starts_with(
            "n,t,c,seed,trial,adversary,inputs,decided,decision_value,windows_to_decision,digest\n"
        ));
        assert_eq!(rows.lines().count(), 5);
        let summary = summaries_to_csv(&table.summaries);
        assert!(summary.starts_with(
            "n,t,adversary,trials,decided_fraction,median_windows,mean_windows,p90_windows\n"
        ));
        assert_eq!(rows, rows_to_csv(&table.rows));
    }

    #[test]
    fn summarize_handles_even_counts_and_undecided_runs() {
        let mut records = Vec::new();
        for (i, w) in [Some(2u32), Some(4), Some(6), Some(8), None].iter().enumerate() {
            records.push(TrialRecord {
                n: 7,
                t: 1,
                c: None,
                seed: i as u64,
                trial: i as u32,
                adversary: "fair".into(),
                inputs: "0000000".into(),
                decided: w.is_some(),
                decision_value: w.map(|_| 0),
                windows_to_decision: *w,
                digest: String::new(),
            });
        }
        let stats = summarize(&records);
        assert_eq!(stats.trials, 5);
        assert_eq!(stats.decided, 4);
        assert_eq!(stats.median_windows, Some(5.0));
        assert_eq!(stats.mean_windows, Some(5.0));
        assert_eq!(stats.p90_windows, Some(8));
    }
}
