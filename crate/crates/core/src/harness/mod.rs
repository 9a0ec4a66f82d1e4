//! End-to-end streaming sessions: features (or precomputed posteriors) in,
//! transcript, metrics and an event log out.
//!
//! [`run_session`] is the incremental engine. [`naive_replay_oracle`] replays
//! the same revision schedule without any caches and with a full re-decode
//! at every event; it is the reference the engine is checked against.

mod log;
mod metrics;
mod oracle;
mod session;
mod trace;

pub use log::{EventLog, LogRecord};
pub use metrics::{average_lookahead_ms, edit_distance, metrics_csv, wer, SessionMetrics};
pub use oracle::{naive_replay_oracle, OracleOutput};
pub use session::{compare_modes, run_session, SessionOutput};
pub use trace::{emit_blank_dominance_trace, trace_csv, TraceRow};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::encoder::{EncoderConfig, WeightSource};
use crate::error::{Error, Result};
use crate::formats;
use crate::scheduler::RevisionPolicy;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Strictly causal streaming, no revisions.
    Causal,
    /// Causal streaming with scheduled revisions of past frames.
    Revision,
    /// Whole-utterance pass with full context.
    Offline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Causal => "causal",
            Mode::Revision => "revision",
            Mode::Offline => "offline",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(Mode::Causal),
            "revision" => Ok(Mode::Revision),
            "offline" => Ok(Mode::Offline),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected causal, revision or offline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    /// Frame features run through the encoder.
    Features(Matrix),
    /// Decoder-only input. Revisions take their rows from `revised`; without
    /// it a revision reproduces the causal rows.
    Posteriors {
        causal: Matrix,
        revised: Option<Matrix>,
    },
}

impl SessionInput {
    pub fn features_from(path: &Path) -> Result<Self> {
        Ok(Self::Features(formats::load_matrix(path)?))
    }

    pub fn posteriors_from(causal: &Path, revised: Option<&Path>) -> Result<Self> {
        Ok(Self::Posteriors {
            causal: formats::load_matrix(causal)?,
            revised: revised.map(formats::load_matrix).transpose()?,
        })
    }

    pub fn frames(&self) -> usize {
        match self {
            Self::Features(m) | Self::Posteriors { causal: m, .. } => m.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub encoder: EncoderConfig,
    pub weights: WeightSource,
    pub policy: RevisionPolicy,
    pub mode: Mode,
    pub input: SessionInput,
    pub reference: Option<Vec<u32>>,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.input.frames() == 0 {
            return Err(Error::invalid("session input has no frames"));
        }
        match &self.input {
            SessionInput::Features(f) => {
                self.encoder.validate()?;
                if f.cols() != self.encoder.d_in {
                    return Err(Error::invalid(format!(
                        "features have {} columns, encoder expects d_in = {}",
                        f.cols(),
                        self.encoder.d_in
                    )));
                }
            }
            SessionInput::Posteriors { causal, revised } => {
                if causal.cols() < 2 {
                    return Err(Error::invalid("posterior rows need at least 2 labels"));
                }
                if let Some(r) = revised {
                    if (r.rows(), r.cols()) != (causal.rows(), causal.cols()) {
                        return Err(Error::invalid(format!(
                            "revised posteriors are {}x{}, causal {}x{}",
                            r.rows(),
                            r.cols(),
                            causal.rows(),
                            causal.cols()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn frame_ms(&self) -> f64 {
        self.encoder.frame_ms
    }
}
