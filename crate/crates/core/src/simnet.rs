//! The windowed execution model: configurations, fine-grained steps, the
//! message buffer, window validation and application, and deterministic
//! seeded runs.
//!
//! Every run is a concatenation of validated windows. A window first lets
//! all `n` processors take sending steps, then delivers to each processor
//! `i` the messages just sent by the senders in `S_i` (in the order the
//! window prescribes), and finally resets the processors in `R`. Undelivered
//! messages do not survive the window.
//!
//! An incremental content hash covers every step, coin draw, and post-window
//! configuration snapshot, so equal `(inputs, thresholds, seed, adversary)`
//! always yield equal trace digests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::protocol::{
    Bit, ProcessorId, ProcessorState, ProtocolError, Round, Thresholds, VoteMessage,
};
use crate::rng::SeededCoins;

/// One fine-grained step of an execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Sending(ProcessorId),
    Receiving(u64),
    Resetting(ProcessorId),
}

/// Named window constraints, reported by `validate_window`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowViolation {
    /// Number of sender sets differs from `n`.
    SenderSetCount { got: usize, n: u32 },
    /// `|S_i| >= n - t` fails.
    SenderSetTooSmall { receiver: ProcessorId, size: usize },
    /// A sender set member lies outside `1..=n`.
    SenderOutOfRange { receiver: ProcessorId, sender: ProcessorId },
    /// `|R| <= t` fails.
    TooManyResets { size: usize, t: u32 },
    /// A reset target lies outside `1..=n`.
    ResetOutOfRange { pid: ProcessorId },
    /// The delivery order is not a permutation of `{(i, s) : s in S_i}`.
    DeliveryOrderMismatch,
}

impl std::fmt::Display for WindowViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowViolation::SenderSetCount { got, n } => {
                write!(f, "expected {n} sender sets, got {got}")
            }
            WindowViolation::SenderSetTooSmall { receiver, size } => {
                write!(f, "sender set for receiver {receiver} has size {size} < n - t")
            }
            WindowViolation::SenderOutOfRange { receiver, sender } => {
                write!(f, "sender {sender} for receiver {receiver} out of range")
            }
            WindowViolation::TooManyResets { size, t } => {
                write!(f, "reset set has size {size} > t = {t}")
            }
            WindowViolation::ResetOutOfRange { pid } => write!(f, "reset target {pid} out of range"),
            WindowViolation::DeliveryOrderMismatch => {
                f.write_str("delivery order is not a permutation of the scheduled pairs")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("input vector has length {got}, expected {expected}")]
    InputLength { got: usize, expected: usize },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(crate::protocol::ViolationList),
    #[error("thresholds disagree with execution parameters (n, t)")]
    ThresholdMismatch,
    #[error("invalid window: {}", format_violations(.0))]
    InvalidWindow(Vec<WindowViolation>),
    #[error("adversary {name} produced an invalid window at index {window}: {}", format_violations(.violations))]
    AdversaryWindow {
        name: String,
        window: u32,
        violations: Vec<WindowViolation>,
    },
    #[error("max_windows must be at least 1")]
    MaxWindowsZero,
    #[error("protocol error during window application: {0}")]
    Protocol(#[from] ProtocolError),
}

fn format_violations(v: &[WindowViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A schedule unit: per-receiver sender sets, a reset set, and the order in
/// which the scheduled `(receiver, sender)` deliveries happen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptableWindow {
    /// `S_1..S_n`, indexed by receiver id minus one.
    #[serde(rename = "S")]
    pub sender_sets: Vec<BTreeSet<ProcessorId>>,
    /// Processors reset at the end of the window.
    #[serde(rename = "R")]
    pub resets: BTreeSet<ProcessorId>,
    /// Exactly one `(receiver, sender)` pair per scheduled delivery.
    pub delivery_order: Vec<(ProcessorId, ProcessorId)>,
}

/// Checks every window invariant for `(n, t)`, returning the violations.
pub fn validate_window(
    w: &AcceptableWindow,
    n: u32,
    t: u32,
) -> Result<(), Vec<WindowViolation>> {
    let mut violations = Vec::new();
    if w.sender_sets.len() != n as usize {
        violations.push(WindowViolation::SenderSetCount {
            got: w.sender_sets.len(),
            n,
        });
    }
    let min_size = (n - t) as usize;
    for (idx, set) in w.sender_sets.iter().enumerate().take(n as usize) {
        let receiver = idx as u32 + 1;
        if set.len() < min_size {
            violations.push(WindowViolation::SenderSetTooSmall {
                receiver,
                size: set.len(),
            });
        }
        for &s in set {
            if s < 1 || s > n {
                violations.push(WindowViolation::SenderOutOfRange { receiver, sender: s });
            }
        }
    }
    if w.resets.len() > t as usize {
        violations.push(WindowViolation::TooManyResets {
            size: w.resets.len(),
            t,
        });
    }
    for &pid in &w.resets {
        if pid < 1 || pid > n {
            violations.push(WindowViolation::ResetOutOfRange { pid });
        }
    }
    // The delivery order must cover each scheduled pair exactly once.
    let mut scheduled: BTreeSet<(ProcessorId, ProcessorId)> = BTreeSet::new();
    for (idx, set) in w.sender_sets.iter().enumerate() {
        let receiver = idx as u32 + 1;
        for &s in set {
            scheduled.insert((receiver, s));
        }
    }
    let mut seen: BTreeSet<(ProcessorId, ProcessorId)> = BTreeSet::new();
    let mut duplicates = false;
    for &pair in &w.delivery_order {
        if !seen.insert(pair) {
            duplicates = true;
        }
    }
    if duplicates || seen != scheduled {
        violations.push(WindowViolation::DeliveryOrderMismatch);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A decision event: the first write of `value` to `pid`'s output bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub pid: ProcessorId,
    pub value: Bit,
    pub window: u32,
}

/// One processor's broadcast during a window's sending phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendRecord {
    pub pid: ProcessorId,
    pub round: Round,
    pub value: Bit,
    pub receivers: u32,
}

/// A completed round: the delivery that brought a processor its `T1`-th
/// relevant vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionRecord {
    pub pid: ProcessorId,
    pub round: Round,
    pub was_catching_up: bool,
}

/// Per-window event log, parallel to `ExecutionTrace::windows`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowEvents {
    pub sends: Vec<SendRecord>,
    pub completions: Vec<CompletionRecord>,
    /// Values adopted through the deterministic threshold rule.
    pub forced: Vec<(ProcessorId, Bit)>,
    pub delivered: u32,
}

/// Recorded history of a run: applied windows, decision events, the initial
/// inputs, and the running content digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub inputs: Vec<Bit>,
    pub windows: Vec<AcceptableWindow>,
    pub decisions: Vec<Decision>,
    pub window_events: Vec<WindowEvents>,
    pub digest: String,
}

impl ExecutionTrace {
    fn new(inputs: Vec<Bit>) -> Self {
        ExecutionTrace {
            inputs,
            windows: Vec::new(),
            decisions: Vec::new(),
            window_events: Vec::new(),
            digest: hex::encode(Sha256::new().finalize()),
        }
    }

    /// The window index of the first decision, if any processor decided.
    pub fn windows_to_decision(&self) -> Option<u32> {
        self.decisions.first().map(|d| d.window)
    }
}

/// Stable content hash over the recorded step/state history.
pub fn trace_digest(trace: &ExecutionTrace) -> &str {
    &trace.digest
}

#[derive(Debug, Clone)]
struct BufferedMessage {
    id: u64,
    msg: VoteMessage,
    window: u32,
}

/// Global configuration, message buffer, and seeded randomness for one run.
#[derive(Debug, Clone)]
pub struct Execution {
    states: Vec<ProcessorState>,
    buffer: Vec<BufferedMessage>,
    thresholds: Thresholds,
    seed: u64,
    window_index: u32,
    next_msg_id: u64,
    coins: SeededCoins,
    hasher: Sha256,
    trace: ExecutionTrace,
}

impl Execution {
    /// Fresh execution over `inputs`, with validated thresholds.
    pub fn new(
        n: u32,
        t: u32,
        inputs: &[Bit],
        thresholds: Thresholds,
        seed: u64,
    ) -> Result<Self, SimError> {
        if inputs.len() != n as usize {
            return Err(SimError::InputLength {
                got: inputs.len(),
                expected: n as usize,
            });
        }
        thresholds
            .validate()
            .map_err(|v| SimError::InvalidThresholds(crate::protocol::ViolationList(v)))?;
        if thresholds.n != n || thresholds.t != t {
            return Err(SimError::ThresholdMismatch);
        }
        let states = inputs
            .iter()
            .enumerate()
            .map(|(idx, &bit)| ProcessorState::init(idx as u32 + 1, bit, n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Execution {
            states,
            buffer: Vec::new(),
            thresholds,
            seed,
            window_index: 0,
            next_msg_id: 0,
            coins: SeededCoins::new(seed),
            hasher: Sha256::new(),
            trace: ExecutionTrace::new(inputs.to_vec()),
        })
    }

    pub fn n(&self) -> u32 {
        self.thresholds.n
    }

    pub fn t(&self) -> u32 {
        self.thresholds.t
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window_index(&self) -> u32 {
        self.window_index
    }

    /// Read access to the full configuration, in id order.
    pub fn states(&self) -> &[ProcessorState] {
        &self.states
    }

    pub fn state(&self, pid: ProcessorId) -> &ProcessorState {
        &self.states[(pid - 1) as usize]
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    /// Undelivered messages currently in the buffer.
    pub fn buffered_messages(&self) -> impl Iterator<Item = &VoteMessage> {
        self.buffer.iter().map(|b| &b.msg)
    }

    fn hash_step(&mut self, bytes: &[u8]) {
        self.hasher.update(bytes);
    }

    fn current_digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    /// Applies a validated window: sending phase, scheduled deliveries,
    /// buffer cleanup, resets, and bookkeeping.
    pub fn apply_window(&mut self, w: &AcceptableWindow) -> Result<(), SimError> {
        let n = self.n();
        let t = self.t();
        validate_window(w, n, t).map_err(SimError::InvalidWindow)?;

        let window = self.window_index + 1;
        let mut events = WindowEvents::default();

        // Window header.
        let mut header = vec![0x06u8];
        header.extend_from_slice(&window.to_le_bytes());
        for set in &w.sender_sets {
            header.push(0xfe);
            for &s in set {
                header.extend_from_slice(&s.to_le_bytes());
            }
        }
        header.push(0xfd);
        for &r in &w.resets {
            header.extend_from_slice(&r.to_le_bytes());
        }
        for &(recv, send) in &w.delivery_order {
            header.extend_from_slice(&recv.to_le_bytes());
            header.extend_from_slice(&send.to_le_bytes());
        }
        self.hash_step(&header);

        // Sending steps, in id order.
        for pid in 1..=n {
            let msgs = self.states[(pid - 1) as usize].on_send(n);
            if msgs.is_empty() {
                continue;
            }
            let (round, value) = (msgs[0].round, msgs[0].value);
            events.sends.push(SendRecord {
                pid,
                round,
                value,
                receivers: msgs.len() as u32,
            });
            let mut rec = vec![0x01u8];
            rec.extend_from_slice(&pid.to_le_bytes());
            rec.extend_from_slice(&round.to_le_bytes());
            rec.push(value);
            rec.extend_from_slice(&(msgs.len() as u32).to_le_bytes());
            self.hash_step(&rec);
            for msg in msgs {
                let id = self.next_msg_id;
                self.next_msg_id += 1;
                self.buffer.push(BufferedMessage { id, msg, window });
            }
        }

        // Receiving steps, following the window's delivery order. Pairs whose
        // sender emitted nothing this window are skipped.
        for &(receiver, sender) in &w.delivery_order {
            let slot = self.buffer.iter().position(|b| {
                b.window == window && b.msg.sender == sender && b.msg.receiver == receiver
            });
            let Some(slot) = slot else { continue };
            let buffered = self.buffer.swap_remove(slot);
            events.delivered += 1;

            let mut rec = vec![0x02u8];
            rec.extend_from_slice(&buffered.id.to_le_bytes());
            rec.extend_from_slice(&receiver.to_le_bytes());
            rec.extend_from_slice(&sender.to_le_bytes());
            rec.extend_from_slice(&buffered.msg.round.to_le_bytes());
            rec.push(buffered.msg.value);
            self.hash_step(&rec);

            let state = &mut self.states[(receiver - 1) as usize];
            let outcome = state.on_receive(&buffered.msg, &self.thresholds, &mut self.coins)?;
            let reset_count = state.reset_count();

            if let Some((round, bit)) = outcome.coin {
                let mut rec = vec![0x04u8];
                rec.extend_from_slice(&receiver.to_le_bytes());
                rec.extend_from_slice(&reset_count.to_le_bytes());
                rec.extend_from_slice(&round.to_le_bytes());
                rec.push(bit);
                self.hash_step(&rec);
            }
            if let Some((round, was_catching_up)) = outcome.completed_round {
                events.completions.push(CompletionRecord {
                    pid: receiver,
                    round,
                    was_catching_up,
                });
            }
            if let Some(value) = outcome.forced_value {
                events.forced.push((receiver, value));
            }
            if let Some(value) = outcome.decided {
                self.trace.decisions.push(Decision {
                    pid: receiver,
                    value,
                    window,
                });
                let mut rec = vec![0x05u8];
                rec.extend_from_slice(&receiver.to_le_bytes());
                rec.push(value);
                rec.extend_from_slice(&window.to_le_bytes());
                self.hash_step(&rec);
            }
        }

        // No two processors may adopt conflicting values deterministically
        // within one window.
        debug_assert!(
            events.forced.windows(2).all(|p| p[0].1 == p[1].1),
            "conflicting deterministic value adoption within one window"
        );

        // Undelivered messages from this window are dropped.
        self.buffer.retain(|b| b.window != window);

        // Resetting steps, in increasing id order.
        for &pid in &w.resets {
            let state = &mut self.states[(pid - 1) as usize];
            state.on_reset();
            let mut rec = vec![0x03u8];
            rec.extend_from_slice(&pid.to_le_bytes());
            rec.extend_from_slice(&state.reset_count().to_le_bytes());
            self.hash_step(&rec);
        }

        // Post-window configuration snapshot.
        let mut snap = vec![0x07u8];
        for s in &self.states {
            snap.extend_from_slice(&s.id().to_le_bytes());
            snap.extend_from_slice(&s.round().unwrap_or(0).to_le_bytes());
            snap.push(s.value().unwrap_or(2));
            snap.push(s.output().unwrap_or(2));
            snap.extend_from_slice(&s.reset_count().to_le_bytes());
            snap.push(u8::from(s.is_catching_up()));
            snap.push(u8::from(s.pending_send()));
        }
        self.hash_step(&snap);

        self.window_index = window;
        self.trace.windows.push(w.clone());
        self.trace.window_events.push(events);
        self.trace.digest = self.current_digest();
        Ok(())
    }
}

/// Strategy interface: produce the next window from full read access to the
/// execution. Implementations must be deterministic given their seed and
/// the observed view.
pub trait Adversary {
    fn name(&self) -> &str;
    fn next_window(&mut self, exec: &Execution) -> AcceptableWindow;
}

/// Drives an execution window by window until the first window containing a
/// decision, or until `max_windows` windows have been applied.
pub fn run(
    exec: &mut Execution,
    adversary: &mut dyn Adversary,
    max_windows: u32,
) -> Result<ExecutionTrace, SimError> {
    if max_windows == 0 {
        return Err(SimError::MaxWindowsZero);
    }
    for _ in 0..max_windows {
        let window = adversary.next_window(exec);
        if let Err(violations) = validate_window(&window, exec.n(), exec.t()) {
            return Err(SimError::AdversaryWindow {
                name: adversary.name().to_string(),
                window: exec.window_index() + 1,
                violations,
            });
        }
        exec.apply_window(&window)?;
        if !exec.trace.decisions.is_empty() {
            break;
        }
    }
    // Run postcondition in test builds: all recorded decisions agree.
    debug_assert!(
        {
            let mut values = exec.trace.decisions.iter().map(|d| d.value);
            let first = values.next();
            first.is_none() || values.all(|v| Some(v) == first)
        },
        "conflicting decisions recorded in one run"
    );
    Ok(exec.trace.clone())
}
