//! The bundled fixture session, checked against the cache-free replay.
//!
//! `cargo run --release --example session`

use std::path::Path;

use streamrev::config::RunConfig;
use streamrev::harness::{naive_replay_oracle, run_session};
use streamrev::Result;

fn main() -> Result<()> {
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/session.conf");
    let cfg = RunConfig::load(&conf)?.session()?;
    let out = run_session(&cfg)?;
    println!("transcript: {:?}", out.transcript);
    println!("{}", out.metrics.to_json_line(true));
    for (event, tau) in out.events.iter().zip(out.log.taus()) {
        println!(
            "  n={:>3} {:<11} frames {:>2}..={:<3} tau {tau}",
            event.n,
            event.kind.to_string(),
            event.lo,
            event.hi
        );
    }

    let oracle = naive_replay_oracle(&cfg)?;
    let diff = out
        .posteriors
        .max_abs_diff(&oracle.posteriors)
        .unwrap_or(0.0);
    println!(
        "replay oracle: max posterior diff {diff:e}, same transcript: {}",
        oracle.transcript == out.transcript
    );
    Ok(())
}
