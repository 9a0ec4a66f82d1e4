//! Regenerates the files in `fixtures/`.
//!
//! `cargo run --example make_fixtures`

use std::path::Path;

use streamrev::encoder::synthetic_features;
use streamrev::formats::save_matrix;
use streamrev::tensor::Matrix;
use streamrev::Result;

const VOCAB: usize = 8;

/// One row per frame: `peak` on the given label (blank where none), the rest
/// spread evenly, so every frame is dominant at any practical threshold.
fn spiky(frames: usize, spikes: &[(usize, u32)]) -> Result<Matrix> {
    let peak = 0.86f32;
    let rest = (1.0 - peak) / (VOCAB - 1) as f32;
    let mut m = Matrix::zeros(0, VOCAB);
    for t in 0..frames {
        let label = spikes.iter().find(|&&(f, _)| f == t).map_or(0, |&(_, l)| l);
        let mut row = vec![rest; VOCAB];
        row[label as usize] = peak;
        m.push_row(&row)?;
    }
    Ok(m)
}

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir).map_err(|e| streamrev::Error::Io {
        path: dir.clone(),
        source: e,
    })?;

    save_matrix(
        &synthetic_features(2024, 120, 16),
        &dir.join("features.srf"),
    )?;

    let old = [
        (5, 3),
        (12, 1),
        (13, 1),
        (19, 4),
        (26, 1),
        (33, 5),
        (40, 2),
        (47, 6),
    ];
    // the same labels in the same order, some spikes moved by a frame or two
    let new = [
        (6, 3),
        (12, 1),
        (13, 1),
        (19, 4),
        (28, 1),
        (33, 5),
        (41, 2),
        (47, 6),
    ];
    save_matrix(&spiky(60, &old)?, &dir.join("posteriors.csv"))?;
    save_matrix(&spiky(60, &new)?, &dir.join("posteriors_revised.csv"))?;

    println!("fixtures written to {}", dir.display());
    Ok(())
}
