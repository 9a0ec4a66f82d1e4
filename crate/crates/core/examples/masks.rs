//! Attention masks as per-row context ends, plus the seeded causal/revision sampler.
//!
//! `cargo run --example masks`

use streamrev::masks::{
    causal_mask, chunk_mask, export_mask, import_mask, revision_mask, DynamicMaskSampler,
    MaskFormat, MaskKind, MaskSpec,
};
use streamrev::Result;

fn main() -> Result<()> {
    let frames = 6;
    println!("causal   {:?}", causal_mask(frames)?.ends());
    println!("chunk=4  {:?}", chunk_mask(frames, 4)?.ends());
    let rev = revision_mask(frames, 4, 2)?;
    println!(
        "revision {:?} (max lookahead {})",
        rev.ends(),
        rev.max_lookahead()
    );
    println!("\n{}", rev.to_csv());

    // training-time mixing: causal with probability 0.3, revision otherwise
    let spec = MaskSpec {
        frames,
        kind: MaskKind::Revision { sigma: 4, nu: 2 },
    };
    let mut sampler = DynamicMaskSampler::new(0.3, spec, 1)?;
    let draws = 10_000;
    let causal = (0..draws).filter(|_| sampler.next_is_causal()).count();
    println!("causal draws: {causal} of {draws}");

    let path = std::env::temp_dir().join("streamrev-revision.srm");
    export_mask(&rev, &path, MaskFormat::Bin)?;
    assert_eq!(import_mask(&path, MaskFormat::Bin)?, rev);
    println!("round-tripped through {}", path.display());
    Ok(())
}
