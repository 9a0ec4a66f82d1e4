//! Attention-mask families: causal, chunked, and the static revision mask,
//! plus a seeded causal/revision sampler for dynamic-mask training.
//!
//! Every mask in this crate has the row-interval shape: query frame `q` may
//! attend keys `0..=e(q)` with `e(q) >= q`. Masks therefore store only the
//! per-row context end `e(q)`, which keeps `T = 10^4` masks at 40 kB. Any
//! history window is applied by the encoder on top of the mask.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formats::ByteReader;

pub const SRM1_MAGIC: &[u8; 4] = b"SRM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Causal,
    Chunk { chunk: usize },
    Revision { sigma: usize, nu: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSpec {
    pub frames: usize,
    pub kind: MaskKind,
}

impl MaskSpec {
    pub fn build(&self) -> Result<AttentionMask> {
        match self.kind {
            MaskKind::Causal => causal_mask(self.frames),
            MaskKind::Chunk { chunk } => chunk_mask(self.frames, chunk),
            MaskKind::Revision { sigma, nu } => revision_mask(self.frames, sigma, nu),
        }
    }

    /// Largest number of future frames any query sees under this spec.
    pub fn lookahead(&self) -> Result<usize> {
        Ok(self.build()?.max_lookahead())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    ends: Vec<u32>,
}

impl AttentionMask {
    /// Builds a mask from explicit per-row context ends.
    pub fn from_ends(ends: Vec<u32>) -> Result<Self> {
        let t = ends.len();
        if t == 0 {
            return Err(Error::invalid("mask must cover at least one frame"));
        }
        if t > u32::MAX as usize {
            return Err(Error::invalid("mask too large for u32 indices"));
        }
        for (q, &e) in ends.iter().enumerate() {
            if (e as usize) < q || (e as usize) >= t {
                return Err(Error::invalid(format!(
                    "row {q}: context end {e} outside [{q}, {})",
                    t - 1
                )));
            }
        }
        Ok(Self { ends })
    }

    /// Every query sees the same context end.
    pub fn constant(frames: usize, end: usize) -> Result<Self> {
        let end = u32::try_from(end).map_err(|_| Error::invalid("context end too large"))?;
        Self::from_ends(vec![end; frames])
    }

    pub fn full(frames: usize) -> Result<Self> {
        Self::constant(frames, frames.saturating_sub(1))
    }

    pub fn frames(&self) -> usize {
        self.ends.len()
    }

    pub fn ends(&self) -> &[u32] {
        &self.ends
    }

    pub fn context_end(&self, q: usize) -> usize {
        self.ends[q] as usize
    }

    pub fn allowed(&self, q: usize, k: usize) -> bool {
        k <= self.context_end(q)
    }

    pub fn lookahead(&self, q: usize) -> usize {
        self.context_end(q) - q
    }

    pub fn max_lookahead(&self) -> usize {
        (0..self.frames())
            .map(|q| self.lookahead(q))
            .max()
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let t = self.frames();
        let mut out = String::with_capacity(t * t * 2);
        for q in 0..t {
            for k in 0..t {
                if k > 0 {
                    out.push(',');
                }
                out.push(if self.allowed(q, k) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let t = rows.len();
        let mut ends = Vec::with_capacity(t);
        for (q, line) in rows.iter().enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != t {
                return Err(Error::format(
                    "mask CSV",
                    format!("row {q} has {} cells, expected {t}", cells.len()),
                ));
            }
            let ones = cells.iter().take_while(|c| **c == "1").count();
            if ones == 0 || cells[ones..].iter().any(|c| *c != "0") {
                return Err(Error::format(
                    "mask CSV",
                    format!("row {q} is not a contiguous 1..1,0..0 interval"),
                ));
            }
            ends.push((ones - 1) as u32);
        }
        Self::from_ends(ends).map_err(|e| Error::format("mask CSV", e.to_string()))
    }

    pub fn to_srm1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.frames());
        out.extend_from_slice(SRM1_MAGIC);
        out.extend_from_slice(&(self.frames() as u32).to_le_bytes());
        for e in &self.ends {
            out.extend_from_slice(&e.to_le_bytes());
        }
        out
    }

    pub fn from_srm1(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "SRM1 mask");
        r.expect_magic(SRM1_MAGIC)?;
        let t = r.u32()? as usize;
        let mut ends = Vec::with_capacity(t.min(1 << 20));
        for _ in 0..t {
            ends.push(r.u32()?);
        }
        r.finish()?;
        Self::from_ends(ends).map_err(|e| Error::format("SRM1 mask", e.to_string()))
    }
}

pub fn causal_mask(frames: usize) -> Result<AttentionMask> {
    if frames == 0 {
        return Err(Error::invalid("causal mask needs T >= 1"));
    }
    AttentionMask::from_ends((0..frames as u32).collect())
}

/// Each frame sees everything through the end of its own chunk.
pub fn chunk_mask(frames: usize, chunk: usize) -> Result<AttentionMask> {
    if frames == 0 {
        return Err(Error::invalid("chunk mask needs T >= 1"));
    }
    if chunk == 0 {
        return Err(Error::invalid("chunk size must be >= 1"));
    }
    let ends = (0..frames)
        .map(|q| (((q / chunk) + 1) * chunk).min(frames) as u32 - 1)
        .collect();
    AttentionMask::from_ends(ends)
}

/// Static per-frame context of the final revision that touches each frame.
///
/// A frame `t` is revised at boundary `n = k*nu` iff `n - sigma <= t <= n - 1`,
/// and a revision at `n` attends context through `n - 1`. The last such
/// boundary not beyond `T` fixes `e(t)`; frames that no boundary covers stay causal.
pub fn revision_mask(frames: usize, sigma: usize, nu: usize) -> Result<AttentionMask> {
    if frames == 0 {
        return Err(Error::invalid("revision mask needs T >= 1"));
    }
    if nu == 0 {
        return Err(Error::invalid("revision interval must be >= 1"));
    }
    if nu > sigma {
        return Err(Error::invalid(format!(
            "revision interval {nu} exceeds revision step {sigma}"
        )));
    }
    if sigma > frames {
        return Err(Error::invalid(format!(
            "revision step {sigma} exceeds frame count {frames}"
        )));
    }
    let ends = (0..frames)
        .map(|t| {
            let last = (t + sigma).min(frames);
            let n_last = (last / nu) * nu;
            let e = if n_last > t { n_last - 1 } else { t };
            e as u32
        })
        .collect();
    AttentionMask::from_ends(ends)
}

/// Seeded stream of mask draws: causal with probability `p_causal`, else the
/// mask described by `spec` (normally a revision mask).
#[derive(Debug, Clone)]
pub struct DynamicMaskSampler {
    p_causal: f64,
    spec: MaskSpec,
    rng: ChaCha8Rng,
}

impl DynamicMaskSampler {
    pub fn new(p_causal: f64, spec: MaskSpec, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_causal) {
            return Err(Error::invalid(format!(
                "p_causal {p_causal} outside [0, 1]"
            )));
        }
        Ok(Self {
            p_causal,
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// `true` when the next draw picks the causal mask.
    pub fn next_is_causal(&mut self) -> bool {
        self.rng.gen::<f64>() < self.p_causal
    }

    pub fn next_mask(&mut self) -> Result<AttentionMask> {
        if self.next_is_causal() {
            causal_mask(self.spec.frames)
        } else {
            self.spec.build()
        }
    }
}

/// First draw of a [`DynamicMaskSampler`] seeded with `seed`.
pub fn dynamic_mask_sample(p_causal: f64, spec: MaskSpec, seed: u64) -> Result<AttentionMask> {
    DynamicMaskSampler::new(p_causal, spec, seed)?.next_mask()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    Csv,
    Bin,
}

pub fn export_mask(mask: &AttentionMask, destination: &Path, format: MaskFormat) -> Result<()> {
    let bytes = match format {
        MaskFormat::Csv => mask.to_csv().into_bytes(),
        MaskFormat::Bin => mask.to_srm1(),
    };
    fs::write(destination, bytes).map_err(|e| Error::io(destination, e))
}

pub fn import_mask(source: &Path, format: MaskFormat) -> Result<AttentionMask> {
    let bytes = fs::read(source).map_err(|e| Error::io(source, e))?;
    match format {
        MaskFormat::Bin => AttentionMask::from_srm1(&bytes),
        MaskFormat::Csv => {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::format("mask CSV", "file is not UTF-8"))?;
            AttentionMask::from_csv(&text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_revision_ends(t_total: usize, sigma: usize, nu: usize) -> Vec<u32> {
        // enumerate every boundary and keep the last one whose revised range covers t
        (0..t_total)
            .map(|t| {
                let mut e = t;
                let mut n = nu;
                while n <= t_total {
                    let lo = n.saturating_sub(sigma);
                    if lo <= t && t < n {
                        e = e.max(n - 1);
                    }
                    n += nu;
                }
                e as u32
            })
            .collect()
    }

    #[test]
    fn causal_small_cases() {
        let m = causal_mask(3).unwrap();
        assert_eq!(m.ends(), &[0, 1, 2]);
        assert!(m.allowed(1, 0) && m.allowed(1, 1) && !m.allowed(1, 2));
        assert_eq!(causal_mask(1).unwrap().ends(), &[0]);
        let m16 = causal_mask(16).unwrap();
        assert!((0..16).all(|q| m16.context_end(q) == q));
        assert!(matches!(causal_mask(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn chunk_cases() {
        assert_eq!(chunk_mask(4, 2).unwrap().ends(), &[1, 1, 3, 3]);
        assert_eq!(chunk_mask(5, 9).unwrap(), AttentionMask::full(5).unwrap());
        assert_eq!(chunk_mask(7, 1).unwrap(), causal_mask(7).unwrap());
        assert!(chunk_mask(4, 0).is_err());
    }

    #[test]
    fn revision_golden_vector() {
        assert_eq!(revision_mask(6, 4, 2).unwrap().ends(), &[3, 3, 5, 5, 5, 5]);
        assert_eq!(
            revision_mask(9, 9, 9).unwrap(),
            AttentionMask::full(9).unwrap()
        );
        assert_eq!(revision_mask(9, 1, 1).unwrap(), causal_mask(9).unwrap());
        assert!(revision_mask(6, 2, 4).is_err());
        assert!(revision_mask(6, 2, 0).is_err());
    }

    #[test]
    fn empty_mask_rejected_before_any_write() {
        assert!(AttentionMask::from_ends(vec![]).is_err());
    }

    #[test]
    fn csv_export_literal() {
        assert_eq!(causal_mask(2).unwrap().to_csv(), "1,0\n1,1\n");
    }

    #[test]
    fn export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = revision_mask(11, 5, 2).unwrap();
        for (fmt, name) in [(MaskFormat::Bin, "m.srm"), (MaskFormat::Csv, "m.csv")] {
            let p = dir.path().join(name);
            export_mask(&mask, &p, fmt).unwrap();
            assert_eq!(import_mask(&p, fmt).unwrap(), mask);
        }
        let err = export_mask(&mask, &dir.path().join("missing/x.srm"), MaskFormat::Bin);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn non_interval_csv_rejected() {
        assert!(AttentionMask::from_csv("1,0\n0,1\n").is_err());
        assert!(AttentionMask::from_csv("1,0,1\n1,1,0\n1,1,1\n").is_err());
    }

    #[test]
    fn sampler_extremes() {
        let spec = MaskSpec {
            frames: 6,
            kind: MaskKind::Revision { sigma: 4, nu: 2 },
        };
        let causal = causal_mask(6).unwrap();
        let rev = spec.build().unwrap();
        let mut never = DynamicMaskSampler::new(0.0, spec, 7).unwrap();
        let mut always = DynamicMaskSampler::new(1.0, spec, 7).unwrap();
        for _ in 0..200 {
            assert_eq!(never.next_mask().unwrap(), rev);
            assert_eq!(always.next_mask().unwrap(), causal);
        }
        assert!(DynamicMaskSampler::new(1.5, spec, 0).is_err());
    }

    #[test]
    fn sampler_ratio_and_reproducibility() {
        let spec = MaskSpec {
            frames: 8,
            kind: MaskKind::Revision { sigma: 4, nu: 2 },
        };
        let draws = |seed| {
            let mut s = DynamicMaskSampler::new(0.3, spec, seed).unwrap();
            (0..10_000).map(|_| s.next_is_causal()).collect::<Vec<_>>()
        };
        let a = draws(2024);
        assert_eq!(a, draws(2024));
        let frac = a.iter().filter(|c| **c).count() as f64 / a.len() as f64;
        assert!((frac - 0.3).abs() <= 0.02, "causal fraction {frac}");
    }

    proptest! {
        #[test]
        fn revision_matches_enumeration(t in 1usize..60, sigma_off in 0usize..60, nu_off in 0usize..60) {
            let sigma = 1 + sigma_off % t;
            let nu = 1 + nu_off % sigma;
            let m = revision_mask(t, sigma, nu).unwrap();
            prop_assert_eq!(m.ends().to_vec(), brute_revision_ends(t, sigma, nu));
        }

        #[test]
        fn causal_contained_in_revision(t in 1usize..80, s in 0usize..80, v in 0usize..80) {
            let sigma = 1 + s % t;
            let nu = 1 + v % sigma;
            let rev = revision_mask(t, sigma, nu).unwrap();
            for q in 0..t {
                prop_assert!(rev.context_end(q) >= q);
            }
        }

        #[test]
        fn lookahead_monotone_in_sigma(t in 2usize..80, s in 0usize..80, v in 0usize..80) {
            let nu = 1 + v % t;
            let sigma = nu + s % (t - nu + 1);
            if sigma < t {
                let a = revision_mask(t, sigma, nu).unwrap();
                let b = revision_mask(t, sigma + 1, nu).unwrap();
                for q in 0..t {
                    prop_assert!(b.context_end(q) >= a.context_end(q));
                }
            }
        }

        #[test]
        fn chunk_end_constant_within_chunk(t in 1usize..100, chunk in 1usize..20) {
            let m = chunk_mask(t, chunk).unwrap();
            for q in 0..t {
                let chunk_end = ((q / chunk + 1) * chunk).min(t) - 1;
                prop_assert_eq!(m.context_end(q), chunk_end);
            }
        }

        #[test]
        fn srm1_round_trip(t in 1usize..50, s in 0usize..50, v in 0usize..50) {
            let sigma = 1 + s % t;
            let nu = 1 + v % sigma;
            let m = revision_mask(t, sigma, nu).unwrap();
            prop_assert_eq!(AttentionMask::from_srm1(&m.to_srm1()).unwrap(), m);
        }
    }
}
