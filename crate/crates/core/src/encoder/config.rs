use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many past frames a query may attend in addition to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum History {
    All,
    Frames(usize),
}

impl History {
    /// First key index visible from query frame `t`.
    pub fn window_start(self, t: usize) -> usize {
        match self {
            History::All => 0,
            History::Frames(h) => t.saturating_sub(h),
        }
    }
}

impl std::fmt::Display for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            History::All => f.write_str("all"),
            History::Frames(h) => write!(f, "{h}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    /// Output labels including the blank (id 0).
    pub vocab: usize,
    /// Input feature width.
    pub d_in: usize,
    pub history: History,
    pub conv_kernel: usize,
    pub frame_ms: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 2,
            d_model: 32,
            d_ff: 64,
            vocab: 8,
            d_in: 16,
            history: History::All,
            conv_kernel: 15,
            frame_ms: 20.0,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::invalid("encoder needs at least one layer"));
        }
        if self.heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.d_ff == 0 || self.d_in == 0 {
            return Err(Error::invalid("d_ff and d_in must be positive"));
        }
        if self.vocab < 2 {
            return Err(Error::invalid(format!(
                "vocabulary size {} must be >= 2 (blank plus one label)",
                self.vocab
            )));
        }
        if self.history == History::Frames(0) {
            return Err(Error::invalid("history window must be >= 1 frame or all"));
        }
        if self.conv_kernel == 0 {
            return Err(Error::invalid("conv kernel must be >= 1"));
        }
        if !(self.frame_ms.is_finite() && self.frame_ms > 0.0) {
            return Err(Error::invalid("frame_ms must be positive"));
        }
        Ok(())
    }
}
