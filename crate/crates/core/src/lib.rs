//! Streaming transformer-encoder inference with encoder-state revision.
//!
//! A causal encoder emits CTC posteriors frame by frame. Every `nu` frames
//! the last `sigma` frames are recomputed with the context received so far,
//! and a spike-position alignment between the old and revised label streams
//! limits how much of the hypothesis gets re-decoded.
//!
//! - [`masks`]: causal, chunk and revision attention masks, plus export.
//! - [`encoder`]: the encoder, its offline forward pass and the streaming state.
//! - [`scheduler`]: revision boundaries and the recompute cost model.
//! - [`ctcdec`]: greedy/blank-skipping decoding and spike alignment.
//! - [`harness`]: end-to-end sessions, the naive replay oracle, metrics and traces.
//! - [`config`] and [`cli`]: the `streamrev` command line.

pub mod cli;
pub mod config;
pub mod ctcdec;
pub mod encoder;
pub mod error;
pub mod formats;
pub mod harness;
pub mod masks;
pub mod scheduler;
pub mod tensor;

pub use error::{Error, Result};
