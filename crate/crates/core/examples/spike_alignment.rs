//! Aligning a previous and a revised top-two stream, then re-decoding only
//! from the first frame that really changed.
//!
//! `cargo run --example spike_alignment`

use streamrev::ctcdec::{align_spikes, redecode_from, Hypothesis, TopTwo, BLANK};
use streamrev::Result;

fn dom(label: u32, runner_up: u32) -> TopTwo {
    TopTwo {
        l1: label,
        p1: 0.9,
        l2: runner_up,
        p2: 0.05,
    }
}

fn main() -> Result<()> {
    let (a, b) = (1, 2);
    let theta = 0.3;
    // the B spike moved one frame earlier in the revised stream
    let old = [dom(a, b), dom(BLANK, a), dom(b, a), dom(BLANK, b)];
    let new = [dom(a, b), dom(b, a), dom(BLANK, b), dom(BLANK, a)];

    let alignment = align_spikes(&old, &new, theta)?;
    println!("tau = {} of {}", alignment.tau, alignment.tau_max());
    for step in &alignment.trace {
        println!("  {step:?}");
    }

    let hyp = Hypothesis::decode(&old, theta);
    let mut next = new.to_vec();
    next.push(dom(a, BLANK)); // newest frame
    let res = redecode_from(&hyp, &alignment, &next, theta)?;
    println!(
        "kept {:?}, re-decoded {} frame(s) -> {:?}",
        hyp.tokens(),
        res.frames_redecoded,
        res.hypothesis.tokens()
    );
    println!(
        "full decode of the new stream  -> {:?}",
        Hypothesis::decode(&next, theta).tokens()
    );
    Ok(())
}
