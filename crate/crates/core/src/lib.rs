//! Deterministic simulator and analysis toolkit for randomized asynchronous
//! binary agreement against powerful adversaries.
//!
//! The crate has five pieces:
//!
//! - [`protocol`]: the threshold-parameterized agreement state machine,
//!   including reset detection and catch-up.
//! - [`simnet`]: the windowed execution model — configurations, the message
//!   buffer, window validation and application, seeded deterministic runs.
//! - [`adversaries`]: pluggable schedulers, from a benign full-delivery
//!   baseline to the split-vote strategy that forces coin flips every round.
//! - [`concentration`]: Hamming-distance machinery and product-measure
//!   concentration checks on small finite universes, all by exact
//!   enumeration.
//! - [`properties`]: executable checkers for agreement, validity,
//!   termination, forgetfulness, and full communication, plus the
//!   statistical harness behind the scaling experiments.
//!
//! The `agreesim` binary exposes all of it as `run`, `scale`, `check-math`,
//! and `check-properties` subcommands.

pub mod adversaries;
pub mod cli;
pub mod concentration;
pub mod properties;
pub mod protocol;
pub mod rng;
pub mod simnet;
pub mod trace;

pub use adversaries::{
    crash_adversary, fair_adversary, make_adversary, random_adversary, splitvote_adversary,
};
pub use protocol::{Bit, ProcessorId, ProcessorState, Round, Thresholds, VoteMessage};
pub use simnet::{
    run, validate_window, AcceptableWindow, Adversary, Decision, Execution, ExecutionTrace,
};
pub use trace::TraceFile;
