//! Causal, revision and offline decoding of one input, side by side.
//!
//! `cargo run --release --example compare_modes`

use std::path::Path;

use streamrev::config::RunConfig;
use streamrev::harness::{compare_modes, metrics_csv, Mode};
use streamrev::Result;

fn main() -> Result<()> {
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/session.conf");
    let cfg = RunConfig::load(&conf)?.session()?;
    let rows = compare_modes(&cfg, &[Mode::Causal, Mode::Revision, Mode::Offline], 3)?;
    print!("{}", metrics_csv(&rows, true));
    Ok(())
}
