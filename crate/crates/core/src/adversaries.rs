//! Pluggable scheduling strategies.
//!
//! Each adversary builds the next window from full read access to the
//! execution: a benign full-delivery baseline, a seeded random scheduler, a
//! crash-failure scheduler, and the split-vote scheduler that shows every
//! processor a near-balanced sample of votes to force coin flips.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{Bit, ProcessorId, Round};
use crate::simnet::{AcceptableWindow, Adversary, Execution};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("crash set has {got} members, at most t = {t} allowed")]
    CrashSetTooLarge { got: usize, t: u32 },
    #[error("crash target {pid} out of range 1..={n}")]
    CrashTargetOutOfRange { pid: ProcessorId, n: u32 },
    #[error("unknown adversary name {0:?}")]
    UnknownName(String),
}

/// Canonical delivery order: receiver id first, then sender id.
fn canonical_order(sender_sets: &[BTreeSet<ProcessorId>]) -> Vec<(ProcessorId, ProcessorId)> {
    let mut order = Vec::new();
    for (idx, set) in sender_sets.iter().enumerate() {
        let receiver = idx as u32 + 1;
        for &sender in set {
            order.push((receiver, sender));
        }
    }
    order
}

/// Benign baseline: full delivery in canonical order, no resets.
struct Fair;

impl Adversary for Fair {
    fn name(&self) -> &str {
        "fair"
    }

    fn next_window(&mut self, exec: &Execution) -> AcceptableWindow {
        let n = exec.n();
        let all: BTreeSet<ProcessorId> = (1..=n).collect();
        let sender_sets = vec![all; n as usize];
        let delivery_order = canonical_order(&sender_sets);
        AcceptableWindow {
            sender_sets,
            resets: BTreeSet::new(),
            delivery_order,
        }
    }
}

pub fn fair_adversary() -> Box<dyn Adversary> {
    Box::new(Fair)
}

/// Stress baseline: uniformly random `(n-t)`-subsets, a uniformly sized
/// random reset set, and a uniformly shuffled delivery order.
struct RandomAdversary {
    rng: ChaCha8Rng,
}

impl Adversary for RandomAdversary {
    fn name(&self) -> &str {
        "random"
    }

    fn next_window(&mut self, exec: &Execution) -> AcceptableWindow {
        let n = exec.n();
        let t = exec.t();
        let ids: Vec<ProcessorId> = (1..=n).collect();
        let mut sender_sets = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let mut pool = ids.clone();
            pool.shuffle(&mut self.rng);
            sender_sets.push(pool.into_iter().take((n - t) as usize).collect());
        }
        let reset_size = self.rng.gen_range(0..=t) as usize;
        let mut pool = ids;
        pool.shuffle(&mut self.rng);
        let resets: BTreeSet<ProcessorId> = pool.into_iter().take(reset_size).collect();
        let mut delivery_order = canonical_order(&sender_sets);
        delivery_order.shuffle(&mut self.rng);
        AcceptableWindow {
            sender_sets,
            resets,
            delivery_order,
        }
    }
}

pub fn random_adversary(seed: u64) -> Box<dyn Adversary> {
    Box::new(RandomAdversary {
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

/// Crash failures as permanent omission: the processors in `F` are excluded
/// from every sender set, so their messages never leave the buffer.
struct Crash {
    failed: BTreeSet<ProcessorId>,
}

impl Adversary for Crash {
    fn name(&self) -> &str {
        "crash"
    }

    fn next_window(&mut self, exec: &Execution) -> AcceptableWindow {
        let n = exec.n();
        let alive: BTreeSet<ProcessorId> = (1..=n).filter(|p| !self.failed.contains(p)).collect();
        let sender_sets = vec![alive; n as usize];
        let delivery_order = canonical_order(&sender_sets);
        AcceptableWindow {
            sender_sets,
            resets: BTreeSet::new(),
            delivery_order,
        }
    }
}

pub fn crash_adversary(
    failed: BTreeSet<ProcessorId>,
    n: u32,
    t: u32,
) -> Result<Box<dyn Adversary>, AdversaryError> {
    if failed.len() > t as usize {
        return Err(AdversaryError::CrashSetTooLarge {
            got: failed.len(),
            t,
        });
    }
    if let Some(&pid) = failed.iter().find(|&&p| p < 1 || p > n) {
        return Err(AdversaryError::CrashTargetOutOfRange { pid, n });
    }
    Ok(Box::new(Crash { failed }))
}

/// The delaying scheduler: per receiver, order deliveries so the first `T1`
/// votes of the relevant round are as balanced as the vote population
/// allows, keeping both counts below `T3` whenever possible so every
/// processor falls back to its coin. Optionally resets holders of the more
/// common value each window.
struct SplitVote {
    use_resets: bool,
    // Seed kept for determinism of any tie-breaking extensions; the base
    // strategy is fully deterministic in the observed view.
    _rng: ChaCha8Rng,
}

impl SplitVote {
    fn window_for(&self, exec: &Execution) -> AcceptableWindow {
        let n = exec.n();
        let t = exec.t();
        let th = exec.thresholds();
        let t1 = th.t1 as usize;

        // Who sends this window, and what they will send.
        let mut silent: Vec<ProcessorId> = Vec::new();
        let mut emitters: Vec<(ProcessorId, Round, Bit)> = Vec::new();
        for s in exec.states() {
            match (s.is_catching_up(), s.round(), s.value()) {
                (false, Some(round), Some(value)) if s.pending_send() => {
                    emitters.push((s.id(), round, value));
                }
                _ => silent.push(s.id()),
            }
        }

        // Reset targets: up to t holders of the globally more common value,
        // lowest ids first. A tie elects value 1.
        let resets: BTreeSet<ProcessorId> = if self.use_resets {
            let ones = emitters.iter().filter(|&&(_, _, v)| v == 1).count();
            let zeros = emitters.len() - ones;
            let majority: Bit = if ones >= zeros { 1 } else { 0 };
            emitters
                .iter()
                .filter(|&&(_, _, v)| v == majority)
                .map(|&(pid, _, _)| pid)
                .take(t as usize)
                .collect()
        } else {
            BTreeSet::new()
        };

        // The round every receiver will tally: its own for normal
        // processors, the most common (largest on ties) emitted round for
        // processors that are catching up.
        let modal_round = {
            let mut rounds: Vec<Round> = emitters.iter().map(|&(_, r, _)| r).collect();
            rounds.sort_unstable();
            let mut best: Option<(usize, Round)> = None;
            let mut idx = 0;
            while idx < rounds.len() {
                let r = rounds[idx];
                let count = rounds[idx..].iter().take_while(|&&x| x == r).count();
                if best.map(|(c, br)| (count, r) >= (c, br)).unwrap_or(true) {
                    best = Some((count, r));
                }
                idx += count;
            }
            best.map(|(_, r)| r)
        };

        let mut sender_sets: Vec<BTreeSet<ProcessorId>> = Vec::with_capacity(n as usize);
        let mut delivery_order: Vec<(ProcessorId, ProcessorId)> = Vec::new();

        for receiver in 1..=n {
            let state = exec.state(receiver);
            let target_round = state.round().or(modal_round);

            // Omit exactly t processors: silent ones cost nothing, then
            // emitters from the currently larger value side, lowest ids
            // first (alternating once the sides are level).
            let mut omitted: BTreeSet<ProcessorId> = BTreeSet::new();
            for &pid in silent.iter().take(t as usize) {
                omitted.insert(pid);
            }
            let relevant = |pid: ProcessorId, omitted: &BTreeSet<ProcessorId>| {
                !omitted.contains(&pid)
            };
            while omitted.len() < t as usize {
                let mut zeros = emitters
                    .iter()
                    .filter(|&&(pid, r, v)| {
                        v == 0 && Some(r) == target_round && relevant(pid, &omitted)
                    })
                    .map(|&(pid, _, _)| pid);
                let mut ones = emitters
                    .iter()
                    .filter(|&&(pid, r, v)| {
                        v == 1 && Some(r) == target_round && relevant(pid, &omitted)
                    })
                    .map(|&(pid, _, _)| pid);
                let z_count = zeros.clone().count();
                let o_count = ones.clone().count();
                let victim = if o_count >= z_count { ones.next() } else { zeros.next() };
                match victim.or_else(|| {
                    // Nothing relevant left to omit: fall back to any
                    // remaining processor, lowest id first.
                    (1..=n).find(|pid| !omitted.contains(pid))
                }) {
                    Some(pid) => {
                        omitted.insert(pid);
                    }
                    None => break,
                }
            }

            let set: BTreeSet<ProcessorId> = (1..=n).filter(|p| !omitted.contains(p)).collect();

            // Delivered votes for the target round, split by value.
            let mut zeros: Vec<ProcessorId> = Vec::new();
            let mut ones: Vec<ProcessorId> = Vec::new();
            for &(pid, round, value) in &emitters {
                if set.contains(&pid) && Some(round) == target_round {
                    if value == 0 {
                        zeros.push(pid);
                    } else {
                        ones.push(pid);
                    }
                }
            }

            // First-T1 composition: as balanced as availability allows.
            let avail = zeros.len() + ones.len();
            let prefix: Vec<ProcessorId> = if avail >= t1 {
                let lo = t1.saturating_sub(ones.len());
                let hi = zeros.len().min(t1);
                let z_take = (t1 + 1) / 2;
                let z_take = z_take.clamp(lo, hi);
                zeros
                    .iter()
                    .take(z_take)
                    .chain(ones.iter().take(t1 - z_take))
                    .copied()
                    .collect()
            } else {
                Vec::new()
            };

            let prefix_set: BTreeSet<ProcessorId> = prefix.iter().copied().collect();
            for &pid in &prefix {
                delivery_order.push((receiver, pid));
            }
            for &pid in &set {
                if !prefix_set.contains(&pid) {
                    delivery_order.push((receiver, pid));
                }
            }
            sender_sets.push(set);
        }

        AcceptableWindow {
            sender_sets,
            resets,
            delivery_order,
        }
    }
}

impl Adversary for SplitVote {
    fn name(&self) -> &str {
        if self.use_resets {
            "splitvote-reset"
        } else {
            "splitvote"
        }
    }

    fn next_window(&mut self, exec: &Execution) -> AcceptableWindow {
        self.window_for(exec)
    }
}

pub fn splitvote_adversary(seed: u64, use_resets: bool) -> Box<dyn Adversary> {
    Box::new(SplitVote {
        use_resets,
        _rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

/// Looks up an adversary by its CLI name. The crash adversary silences the
/// `t` highest ids.
pub fn make_adversary(
    name: &str,
    seed: u64,
    n: u32,
    t: u32,
) -> Result<Box<dyn Adversary>, AdversaryError> {
    match name {
        "fair" => Ok(fair_adversary()),
        "random" => Ok(random_adversary(seed)),
        "splitvote" => Ok(splitvote_adversary(seed, false)),
        "splitvote-reset" => Ok(splitvote_adversary(seed, true)),
        "crash" => crash_adversary((n - t + 1..=n).collect(), n, t),
        other => Err(AdversaryError::UnknownName(other.to_string())),
    }
}

/// All selectable adversary names, in CLI order.
pub const ADVERSARY_NAMES: [&str; 5] = ["fair", "random", "splitvote", "splitvote-reset", "crash"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Thresholds;
    use crate::simnet::{run, validate_window};

    fn exec_with_inputs(inputs: &[Bit], seed: u64) -> Execution {
        let n = inputs.len() as u32;
        let th = Thresholds::default_for(n, 1).unwrap();
        Execution::new(n, 1, inputs, th, seed).unwrap()
    }

    #[test]
    fn fair_adversary_delivers_everything() {
        let exec = exec_with_inputs(&[0; 7], 1);
        let mut adv = Fair;
        let w = adv.next_window(&exec);
        assert!(w.sender_sets.iter().all(|s| s.len() == 7));
        assert!(w.resets.is_empty());
        assert!(validate_window(&w, 7, 1).is_ok());
    }

    #[test]
    fn random_adversary_is_deterministic_per_seed() {
        let exec = exec_with_inputs(&[0, 1, 0, 1, 0, 1, 0], 1);
        let mut a = RandomAdversary {
            rng: ChaCha8Rng::seed_from_u64(9),
        };
        let mut b = RandomAdversary {
            rng: ChaCha8Rng::seed_from_u64(9),
        };
        for _ in 0..20 {
            assert_eq!(a.next_window(&exec), b.next_window(&exec));
        }
    }

    #[test]
    fn random_adversary_windows_validate_and_reset_sizes_average_half() {
        let exec = exec_with_inputs(&[0, 1, 0, 1, 0, 1, 0], 1);
        let mut adv = RandomAdversary {
            rng: ChaCha8Rng::seed_from_u64(3),
        };
        let mut total_resets = 0usize;
        for _ in 0..1000 {
            let w = adv.next_window(&exec);
            assert!(validate_window(&w, 7, 1).is_ok());
            total_resets += w.resets.len();
        }
        let mean = total_resets as f64 / 1000.0;
        assert!((0.4..=0.6).contains(&mean), "mean |R| = {mean}");
    }

    #[test]
    fn splitvote_balances_the_first_t1_deliveries() {
        // x-vector (1,1,1,1,0,0,0): every receiver's first five votes must
        // tally (3,2) or (2,3), below T3 = 4.
        let exec = exec_with_inputs(&[1, 1, 1, 1, 0, 0, 0], 1);
        let mut adv = SplitVote {
            use_resets: false,
            _rng: ChaCha8Rng::seed_from_u64(0),
        };
        let w = adv.next_window(&exec);
        assert!(validate_window(&w, 7, 1).is_ok());
        let values: Vec<Bit> = exec.states().iter().map(|s| s.value().unwrap()).collect();
        for receiver in 1..=7u32 {
            let first5: Vec<Bit> = w
                .delivery_order
                .iter()
                .filter(|&&(r, _)| r == receiver)
                .take(5)
                .map(|&(_, s)| values[(s - 1) as usize])
                .collect();
            let ones = first5.iter().filter(|&&v| v == 1).count();
            let zeros = 5 - ones;
            assert!(ones.max(zeros) < 4, "receiver {receiver}: {first5:?}");
        }
    }

    #[test]
    fn splitvote_cannot_balance_unanimous_votes() {
        let mut exec = exec_with_inputs(&[1; 7], 1);
        let mut adv = SplitVote {
            use_resets: false,
            _rng: ChaCha8Rng::seed_from_u64(0),
        };
        let trace = run(&mut exec, &mut adv, 10).unwrap();
        assert_eq!(trace.windows_to_decision(), Some(1));
        assert!(trace.decisions.iter().all(|d| d.value == 1));
    }

    #[test]
    fn splitvote_reset_targets_lowest_id_majority_holder() {
        let exec = exec_with_inputs(&[1, 1, 1, 1, 1, 0, 0], 1);
        let mut adv = SplitVote {
            use_resets: true,
            _rng: ChaCha8Rng::seed_from_u64(0),
        };
        let w = adv.next_window(&exec);
        assert_eq!(w.resets.iter().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn splitvote_stays_valid_across_long_runs_with_resets() {
        let inputs = [1, 1, 1, 1, 0, 0, 0, 0];
        let th = Thresholds::default_for(8, 1).unwrap();
        let mut exec = Execution::new(8, 1, &inputs, th, 77).unwrap();
        let mut adv = SplitVote {
            use_resets: true,
            _rng: ChaCha8Rng::seed_from_u64(0),
        };
        // Apply windows manually so validation happens every step even
        // after a decision would stop `run`.
        for _ in 0..50 {
            let w = adv.next_window(&exec);
            assert!(validate_window(&w, 8, 1).is_ok());
            exec.apply_window(&w).unwrap();
        }
    }

    #[test]
    fn crash_adversary_checks_the_fault_budget() {
        assert!(crash_adversary([7].into(), 7, 1).is_ok());
        assert_eq!(
            crash_adversary([6, 7].into(), 7, 1).err(),
            Some(AdversaryError::CrashSetTooLarge { got: 2, t: 1 })
        );
        assert!(matches!(
            crash_adversary([9].into(), 7, 1).err(),
            Some(AdversaryError::CrashTargetOutOfRange { pid: 9, n: 7 })
        ));
    }

    #[test]
    fn crash_silences_the_failed_processor_but_the_rest_decide() {
        let th = Thresholds::default_for(7, 1).unwrap();
        let mut exec = Execution::new(7, 1, &[1; 7], th, 5).unwrap();
        let mut adv = crash_adversary([7].into(), 7, 1).unwrap();
        let trace = run(&mut exec, adv.as_mut(), 10).unwrap();
        assert_eq!(trace.windows_to_decision(), Some(1));
        let deciders: Vec<ProcessorId> = trace.decisions.iter().map(|d| d.pid).collect();
        assert!(deciders.len() >= 6);
        assert!(trace.decisions.iter().all(|d| d.value == 1));
        // No message from processor 7 was ever delivered.
        for w in &trace.windows {
            assert!(w.delivery_order.iter().all(|&(_, s)| s != 7));
        }
    }

    #[test]
    fn make_adversary_rejects_unknown_names() {
        assert!(make_adversary("fair", 0, 7, 1).is_ok());
        assert!(matches!(
            make_adversary("byzantine", 0, 7, 1),
            Err(AdversaryError::UnknownName(_))
        ));
    }

    #[test]
    fn unanimous_inputs_decide_in_window_one_under_every_adversary() {
        for name in ADVERSARY_NAMES {
            for v in [0u8, 1] {
                let th = Thresholds::default_for(7, 1).unwrap();
                let mut exec = Execution::new(7, 1, &[v; 7], th, 2).unwrap();
                let mut adv = make_adversary(name, 4, 7, 1).unwrap();
                let trace = run(&mut exec, adv.as_mut(), 5).unwrap();
                assert_eq!(trace.windows_to_decision(), Some(1), "adversary {name}");
                assert!(trace.decisions.iter().all(|d| d.value == v));
            }
        }
    }
}
