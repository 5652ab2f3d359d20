//! Self-describing JSON trace files.
//!
//! A trace file captures everything needed to reproduce and audit a run:
//! parameters, inputs, seed, adversary name, the applied windows, the
//! decision events, and the content digest. Serialization round-trips
//! bit-exactly: serialize → parse → serialize is the identity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{Bit, Thresholds};
use crate::simnet::{AcceptableWindow, Decision, Execution, ExecutionTrace};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace serialization failed: {0}")]
    Serialize(#[source] serde_json::Error),
    #[error("trace parsing failed: {0}")]
    Parse(#[source] serde_json::Error),
}

/// Threshold triple as stored in trace files; `n` and `t` live top-level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub t1: u32,
    pub t2: u32,
    pub t3: u32,
}

/// The on-disk trace schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub n: u32,
    pub t: u32,
    pub thresholds: ThresholdsFile,
    pub inputs: Vec<Bit>,
    pub seed: u64,
    #[serde(rename = "adversary-name")]
    pub adversary_name: String,
    pub windows: Vec<AcceptableWindow>,
    pub decisions: Vec<Decision>,
    pub digest: String,
}

impl TraceFile {
    /// Assemble a trace file from a completed run.
    pub fn from_run(exec: &Execution, trace: &ExecutionTrace, adversary_name: &str) -> Self {
        let th: &Thresholds = exec.thresholds();
        TraceFile {
            n: th.n,
            t: th.t,
            thresholds: ThresholdsFile {
                t1: th.t1,
                t2: th.t2,
                t3: th.t3,
            },
            inputs: trace.inputs.clone(),
            seed: exec.seed(),
            adversary_name: adversary_name.to_string(),
            windows: trace.windows.clone(),
            decisions: trace.decisions.clone(),
            digest: trace.digest.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, TraceError> {
        let mut text = serde_json::to_string_pretty(self).map_err(TraceError::Serialize)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        serde_json::from_str(text).map_err(TraceError::Parse)
    }
}
