//! Frame-by-frame encoding with key/value caches, checked against the
//! whole-sequence pass, followed by a revision of the most recent frames.
//!
//! `cargo run --example streaming_encoder`

use streamrev::encoder::{synthetic_features, EncoderConfig, EncoderState, WeightSource};
use streamrev::masks::{causal_mask, AttentionMask};
use streamrev::Result;

fn main() -> Result<()> {
    let cfg = EncoderConfig::default();
    let mut state = EncoderState::init(cfg.clone(), &WeightSource::Seeded(7))?;
    let feats = synthetic_features(1, 24, cfg.d_in);
    for row in feats.iter_rows() {
        state.stream_step(row)?;
    }
    let offline = state.model().forward_offline(&feats, &causal_mask(24)?)?;
    let diff = state.posteriors().max_abs_diff(&offline).unwrap_or(0.0);
    println!("streamed vs offline causal: max diff {diff:e}");

    // revise the last 10 frames with context up to the newest one
    let revised = state.revise(24, 10)?;
    println!(
        "revised {} rows; cache versions of layer 0:",
        revised.rows()
    );
    let versions: Vec<u32> = (0..24).map(|t| state.cache(0).version(t)).collect();
    println!("{versions:?}");

    // revising every frame at once gives each one the whole stream as context
    state.revise(24, 24)?;
    let full = state
        .model()
        .forward_offline(&feats, &AttentionMask::full(24)?)?;
    let gap = state.posteriors().max_abs_diff(&full).unwrap_or(0.0);
    println!("after revising all 24 frames vs full-context pass: max diff {gap:e}");
    Ok(())
}
