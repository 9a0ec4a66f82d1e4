//! CTC decoding over posterior rows.
//!
//! Greedy collapse with blank-frame skipping driven by dominant labels, and
//! the spike-position alignment that decides where a revised posterior
//! stream has to be re-decoded.

mod align;

pub use align::{
    align_spikes, find_next, redecode_from, spike_align, AlignStep, RedecodeResult, SpikeAlignment,
};

use crate::error::{Error, Result};

/// The CTC blank label.
pub const BLANK: u32 = 0;

/// Two most probable labels of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopTwo {
    pub l1: u32,
    pub p1: f32,
    pub l2: u32,
    pub p2: f32,
}

/// Picks the two largest entries of a posterior row; ties go to the smaller label id.
pub fn top_two(row: &[f32]) -> Result<TopTwo> {
    if row.len() < 2 {
        return Err(Error::invalid(format!(
            "top-two needs at least 2 labels, row has {}",
            row.len()
        )));
    }
    let (mut b1, mut b2) = if row[1] > row[0] { (1, 0) } else { (0, 1) };
    for (i, &p) in row.iter().enumerate().skip(2) {
        if p > row[b1] {
            b2 = b1;
            b1 = i;
        } else if p > row[b2] {
            b2 = i;
        }
    }
    Ok(TopTwo {
        l1: b1 as u32,
        p1: row[b1],
        l2: b2 as u32,
        p2: row[b2],
    })
}

pub fn top_two_rows<'a>(rows: impl IntoIterator<Item = &'a [f32]>) -> Result<Vec<TopTwo>> {
    rows.into_iter().map(top_two).collect()
}

/// The top label when its relative margin `(p1 - p2) / p1` reaches `theta`.
pub fn dominant_label(tt: &TopTwo, theta: f64) -> Option<u32> {
    let p1 = f64::from(tt.p1);
    if p1 <= 0.0 {
        return None;
    }
    ((p1 - f64::from(tt.p2)) / p1 >= theta).then_some(tt.l1)
}

pub fn dominant_seq(tops: &[TopTwo], theta: f64) -> Vec<Option<u32>> {
    tops.iter().map(|tt| dominant_label(tt, theta)).collect()
}

/// Standard CTC collapse: merge adjacent repeats, then drop blanks.
pub fn greedy_collapse(labels: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let mut prev = None;
    for &l in labels {
        if l != BLANK && prev != Some(l) {
            out.push(l);
        }
        prev = Some(l);
    }
    out
}

/// Running CTC decode state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Hypothesis {
    tokens: Vec<u32>,
    /// Frame that emitted each token.
    sources: Vec<usize>,
    /// Last raw symbol seen, for repeat merging.
    last: Option<u32>,
    frames: usize,
    skipped: usize,
}

impl Hypothesis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn last_symbol(&self) -> Option<u32> {
        self.last
    }

    /// Frames consumed so far.
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Frames skipped as blank-dominant.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Consumes one frame. A blank-dominant frame is skipped without
    /// expansion but still separates repeats; any other frame feeds its top
    /// label through the collapse. Returns whether the frame was skipped.
    pub fn psd_step(&mut self, tt: &TopTwo, theta: f64) -> bool {
        let t = self.frames;
        self.frames += 1;
        if dominant_label(tt, theta) == Some(BLANK) {
            self.last = Some(BLANK);
            self.skipped += 1;
            return true;
        }
        if tt.l1 != BLANK && self.last != Some(tt.l1) {
            self.tokens.push(tt.l1);
            self.sources.push(t);
        }
        self.last = Some(tt.l1);
        false
    }

    pub fn decode(tops: &[TopTwo], theta: f64) -> Self {
        let mut h = Self::new();
        for tt in tops {
            h.psd_step(tt, theta);
        }
        h
    }
}

/// Symbol the collapse state records for a frame.
pub(crate) fn psd_symbol(tt: &TopTwo, theta: f64) -> u32 {
    if dominant_label(tt, theta) == Some(BLANK) {
        BLANK
    } else {
        tt.l1
    }
}
