//! The threshold-parameterized randomized agreement state machine.
//!
//! Each processor repeatedly broadcasts a `(round, value)` vote, waits for
//! `T1` votes matching its current round, and then either decides (`T2`
//! matching values), adopts the dominant value (`T3` matching values), or
//! falls back to a fresh fair coin. A reset erases everything except the
//! input bit, the output bit, the identity, and the reset counter; a reset
//! processor stays silent until it has re-synchronized from `T1` votes that
//! share a common round.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Processor identity, `1..=n`.
pub type ProcessorId = u32;

/// A binary value; always `0` or `1`.
pub type Bit = u8;

/// Round counter, starting at 1.
pub type Round = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("processor id {id} out of range 1..={n}")]
    IdOutOfRange { id: ProcessorId, n: u32 },
    #[error("message for processor {receiver} delivered to processor {actual}")]
    MisroutedMessage {
        receiver: ProcessorId,
        actual: ProcessorId,
    },
    #[error("tally count {k} exceeds vote list length {len}")]
    TallyCountTooLarge { k: usize, len: usize },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(ViolationList),
}

/// Named threshold constraints, reported by `Thresholds::validate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdViolation {
    /// `t >= 1` fails.
    FaultBudgetPositive,
    /// `6t < n` fails.
    FaultBudgetSixth,
    /// `T1 <= n - 2t` fails.
    T1AtMostNMinus2T,
    /// `T1 >= T2` fails.
    T1AtLeastT2,
    /// `T2 >= T3 + t` fails.
    T2AtLeastT3PlusT,
    /// `2*T3 > n` fails.
    T3Majority,
}

impl std::fmt::Display for ThresholdViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ThresholdViolation::FaultBudgetPositive => "t >= 1",
            ThresholdViolation::FaultBudgetSixth => "6t < n",
            ThresholdViolation::T1AtMostNMinus2T => "T1 <= n - 2t",
            ThresholdViolation::T1AtLeastT2 => "T1 >= T2",
            ThresholdViolation::T2AtLeastT3PlusT => "T2 >= T3 + t",
            ThresholdViolation::T3Majority => "2*T3 > n",
        };
        f.write_str(name)
    }
}

/// A list of violated constraints, used in error displays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationList(pub Vec<ThresholdViolation>);

impl std::fmt::Display for ViolationList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&names.join(", "))
    }
}

/// Protocol parameters: processor count, per-window fault budget, and the
/// three message-count thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub n: u32,
    pub t: u32,
    pub t1: u32,
    pub t2: u32,
    pub t3: u32,
}

impl Thresholds {
    pub fn new(n: u32, t: u32, t1: u32, t2: u32, t3: u32) -> Self {
        Thresholds { n, t, t1, t2, t3 }
    }

    /// The canonical setting `T1 = T2 = n - 2t`, `T3 = n - 3t`.
    pub fn default_for(n: u32, t: u32) -> Result<Self, ProtocolError> {
        let th = Thresholds::new(n, t, n.saturating_sub(2 * t), n.saturating_sub(2 * t), n.saturating_sub(3 * t));
        th.validate()
            .map_err(|v| ProtocolError::InvalidThresholds(ViolationList(v)))?;
        Ok(th)
    }

    /// Checks every threshold constraint, returning the violated ones by name.
    pub fn validate(&self) -> Result<(), Vec<ThresholdViolation>> {
        let mut violations = Vec::new();
        if self.t < 1 {
            violations.push(ThresholdViolation::FaultBudgetPositive);
        }
        if 6 * self.t >= self.n {
            violations.push(ThresholdViolation::FaultBudgetSixth);
        }
        if self.t1 + 2 * self.t > self.n {
            violations.push(ThresholdViolation::T1AtMostNMinus2T);
        }
        if self.t1 < self.t2 {
            violations.push(ThresholdViolation::T1AtLeastT2);
        }
        if self.t2 < self.t3 + self.t {
            violations.push(ThresholdViolation::T2AtLeastT3PlusT);
        }
        if 2 * self.t3 <= self.n {
            violations.push(ThresholdViolation::T3Majority);
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

/// A `(round, value)` vote tagged with sender and receiver identities.
///
/// Self-votes exist: every broadcast includes the sender itself, and the
/// self-vote counts toward the thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteMessage {
    pub sender: ProcessorId,
    pub receiver: ProcessorId,
    pub round: Round,
    pub value: Bit,
}

/// Source of fresh fair coins for the randomized fallback in vote
/// processing.
///
/// Implementations must return a bit that is a deterministic function of
/// `(pid, reset_count, round)` plus the implementation's own seed, so that
/// a flip is reproducible no matter how the adversary interleaves
/// deliveries.
pub trait CoinSource {
    fn flip(&mut self, pid: ProcessorId, reset_count: u32, round: Round) -> Bit;
}

/// What a single vote delivery did to the receiving processor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReceiveOutcome {
    /// Freshly written output bit, if this delivery triggered the decision.
    pub decided: Option<Bit>,
    /// Coin flipped by the randomized fallback: `(round, bit)`.
    pub coin: Option<(Round, Bit)>,
    /// Value adopted deterministically via the `T3` rule, if any.
    pub forced_value: Option<Bit>,
    /// `(round, was_catching_up)` when this delivery completed a round.
    pub completed_round: Option<(Round, bool)>,
}

/// One processor's local memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessorState {
    id: ProcessorId,
    input: Bit,
    output: Option<Bit>,
    round: Option<Round>,
    value: Option<Bit>,
    reset_count: u32,
    catch_up: bool,
    inbox: BTreeMap<Round, Vec<(ProcessorId, Bit)>>,
    pending_send: bool,
}

impl ProcessorState {
    /// Fresh state: round 1, value equal to the input bit, ready to send.
    pub fn init(id: ProcessorId, input: Bit, n: u32) -> Result<Self, ProtocolError> {
        if id < 1 || id > n {
            return Err(ProtocolError::IdOutOfRange { id, n });
        }
        Ok(ProcessorState {
            id,
            input: input & 1,
            output: None,
            round: Some(1),
            value: Some(input & 1),
            reset_count: 0,
            catch_up: false,
            inbox: BTreeMap::new(),
            pending_send: true,
        })
    }

    pub fn id(&self) -> ProcessorId {
        self.id
    }

    pub fn input(&self) -> Bit {
        self.input
    }

    pub fn output(&self) -> Option<Bit> {
        self.output
    }

    /// Current round; `None` while catching up after a reset.
    pub fn round(&self) -> Option<Round> {
        self.round
    }

    /// Current vote value; `None` while catching up after a reset.
    pub fn value(&self) -> Option<Bit> {
        self.value
    }

    pub fn reset_count(&self) -> u32 {
        self.reset_count
    }

    pub fn is_catching_up(&self) -> bool {
        self.catch_up
    }

    pub fn pending_send(&self) -> bool {
        self.pending_send
    }

    /// Votes buffered for `round`, in arrival order.
    pub fn inbox(&self, round: Round) -> &[(ProcessorId, Bit)] {
        self.inbox.get(&round).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Assembles an arbitrary state for the property fuzzers. Catch-up
    /// states carry blank round and value regardless of the arguments.
    pub(crate) fn from_parts(
        id: ProcessorId,
        input: Bit,
        output: Option<Bit>,
        round: Option<Round>,
        value: Option<Bit>,
        reset_count: u32,
        catch_up: bool,
        inbox: BTreeMap<Round, Vec<(ProcessorId, Bit)>>,
        pending_send: bool,
    ) -> Self {
        let (round, value) = if catch_up { (None, None) } else { (round, value) };
        ProcessorState {
            id,
            input,
            output,
            round,
            value,
            reset_count,
            catch_up,
            inbox,
            pending_send,
        }
    }

    /// Sending step. Broadcasts `(round, value)` to all `n` processors,
    /// including the sender itself.
    ///
    /// A second sending step with no intervening receive or reset has no
    /// effect, and a processor that is catching up after a reset stays
    /// silent until it has re-synchronized.
    pub fn on_send(&mut self, n: u32) -> Vec<VoteMessage> {
        if !self.pending_send {
            return Vec::new();
        }
        self.pending_send = false;
        if self.catch_up {
            return Vec::new();
        }
        let round = self.round.expect("normal-mode state has a round");
        let value = self.value.expect("normal-mode state has a value");
        (1..=n)
            .map(|receiver| VoteMessage {
                sender: self.id,
                receiver,
                round,
                value,
            })
            .collect()
    }

    /// Receiving step: buffer the vote and, once `T1` votes for the
    /// relevant round are available, process that round.
    ///
    /// Stale votes (`round < r_p`) and duplicate `(sender, round)` votes are
    /// discarded. In normal mode the round processed is the current one; in
    /// catch-up mode the processor adopts the largest round holding at least
    /// `T1` votes and resumes normal operation from there.
    pub fn on_receive(
        &mut self,
        msg: &VoteMessage,
        th: &Thresholds,
        coins: &mut dyn CoinSource,
    ) -> Result<ReceiveOutcome, ProtocolError> {
        if msg.receiver != self.id {
            return Err(ProtocolError::MisroutedMessage {
                receiver: msg.receiver,
                actual: self.id,
            });
        }
        self.pending_send = true;

        let stale = match self.round {
            Some(r) => msg.round < r,
            None => false,
        };
        if !stale {
            let entry = self.inbox.entry(msg.round).or_default();
            if !entry.iter().any(|&(sender, _)| sender == msg.sender) {
                entry.push((msg.sender, msg.value & 1));
            }
        }

        let t1 = th.t1 as usize;
        if self.catch_up {
            // Re-synchronize from the largest round holding T1 votes.
            let ready = self
                .inbox
                .iter()
                .rev()
                .find(|(_, votes)| votes.len() >= t1)
                .map(|(&round, _)| round);
            if let Some(round) = ready {
                self.round = Some(round);
                self.catch_up = false;
                return Ok(self.process_round(round, th, coins, true));
            }
            return Ok(ReceiveOutcome::default());
        }

        let current = self.round.expect("normal-mode state has a round");
        if self.inbox(current).len() >= t1 {
            return Ok(self.process_round(current, th, coins, false));
        }
        Ok(ReceiveOutcome::default())
    }

    /// Resetting step: erase everything except input, output, identity, and
    /// the reset counter, which increments.
    pub fn on_reset(&mut self) {
        self.round = None;
        self.value = None;
        self.inbox.clear();
        self.catch_up = true;
        self.reset_count += 1;
        self.pending_send = true;
    }

    fn process_round(
        &mut self,
        round: Round,
        th: &Thresholds,
        coins: &mut dyn CoinSource,
        was_catching_up: bool,
    ) -> ReceiveOutcome {
        let votes = self.inbox(round);
        let values: Vec<Bit> = votes.iter().map(|&(_, v)| v).collect();
        let (c0, c1) = tally(&values, th.t1 as usize).expect("caller checked T1 votes available");

        let mut outcome = ReceiveOutcome {
            completed_round: Some((round, was_catching_up)),
            ..ReceiveOutcome::default()
        };
        let (leader, count) = if c1 >= c0 { (1, c1) } else { (0, c0) };
        if count >= th.t2 as usize && self.output.is_none() {
            self.output = Some(leader);
            outcome.decided = Some(leader);
        }
        if count >= th.t3 as usize {
            self.value = Some(leader);
            outcome.forced_value = Some(leader);
        } else {
            let bit = coins.flip(self.id, self.reset_count, round);
            self.value = Some(bit);
            outcome.coin = Some((round, bit));
        }
        let next = round + 1;
        self.round = Some(next);
        self.inbox.retain(|&r, _| r >= next);
        outcome
    }
}

/// Counts of zeros and ones among the first `k` votes in arrival order.
pub fn tally(values: &[Bit], k: usize) -> Result<(usize, usize), ProtocolError> {
    if k > values.len() {
        return Err(ProtocolError::TallyCountTooLarge {
            k,
            len: values.len(),
        });
    }
    let ones = values[..k].iter().filter(|&&v| v == 1).count();
    Ok((k - ones, ones))
}
