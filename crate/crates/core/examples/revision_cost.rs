//! Revision schedules and their cost: the closed form against the exact plan.
//!
//! `cargo run --example revision_cost`

use streamrev::scheduler::{cost_report, events_to_csv, plan, RevisionPolicy};
use streamrev::Result;

fn main() -> Result<()> {
    // "1-0.4" model at 20 ms frames: revise the last 50 frames every 20
    let policy = RevisionPolicy::new(50, 20, true, 0.3)?;
    print!("{}", events_to_csv(&plan(100, &policy)?));

    println!("\n   T  sigma  nu  final  predicted  measured");
    for (frames, sigma, nu, fin) in [
        (100, 50, 20, false),
        (100, 50, 20, true),
        (60, 50, 20, false),
        (110, 50, 20, false),
    ] {
        let r = cost_report(frames, &RevisionPolicy::new(sigma, nu, fin, 0.3)?)?;
        let predicted = r.predicted.map_or("-".to_string(), |p| p.to_string());
        println!(
            "{frames:>4} {sigma:>6} {nu:>3} {fin:>6} {predicted:>10} {:>9}",
            r.measured
        );
    }
    println!("(the closed form is exact when nu divides T)");
    Ok(())
}
