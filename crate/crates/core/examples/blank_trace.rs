//! Share of blank-dominant frames per 20-frame window, before and after revision.
//!
//! `cargo run --example blank_trace`

use std::path::Path;

use streamrev::encoder::WeightSource;
use streamrev::harness::{
    emit_blank_dominance_trace, run_session, trace_csv, Mode, SessionConfig, SessionInput,
};
use streamrev::scheduler::RevisionPolicy;
use streamrev::Result;

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let input = SessionInput::posteriors_from(
        &dir.join("posteriors.csv"),
        Some(&dir.join("posteriors_revised.csv")),
    )?;
    let cfg = SessionConfig {
        encoder: Default::default(),
        weights: WeightSource::Seeded(0),
        policy: RevisionPolicy::new(20, 10, true, 0.3)?,
        mode: Mode::Revision,
        input,
        reference: None,
    };
    let out = run_session(&cfg)?;
    print!("{}", trace_csv(&emit_blank_dominance_trace(&out, 20)?));
    println!("taus: {:?}", out.log.taus());
    println!("transcript: {:?}", out.transcript);
    Ok(())
}
