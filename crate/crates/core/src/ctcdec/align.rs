//! Spike-position alignment between a previous and a revised top-two stream.
//!
//! Positions exposed through the public API are 1-based like the returned
//! re-decode index `tau`; the comparison covers frames `1..tau_max - 1` and
//! frame `tau_max` is the newest input, which always gets propagated.

use super::{dominant_seq, psd_symbol, Hypothesis, TopTwo, BLANK};
use crate::error::{Error, Result};

/// How one stretch of frames was consumed during alignment (0-based frames).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignStep {
    /// Equal top-1 and both dominant.
    Dominant { old: usize, new: usize },
    /// Equal top-1 and top-2, neither dominant.
    Weak { old: usize, new: usize },
    /// A blank-dominant run on one side skipped to the next equal dominant label;
    /// `old`/`new` is the matched pair.
    Shift {
        old_from: usize,
        new_from: usize,
        old: usize,
        new: usize,
    },
    /// Non-dominant blank whose runner-up equals the other side's top label.
    BlankRunnerUp { old: usize, new: usize },
    /// One stream ran out; the other's remaining frames were all blank-dominant.
    BlankTail { old_from: usize, new_from: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeAlignment {
    /// 1-based frame from which the new stream must be re-decoded.
    pub tau: usize,
    /// Number of frames compared (`tau_max - 1`).
    pub compared: usize,
    /// Old-stream cursor when alignment stopped: old frames `< old_stop`
    /// are equivalent to new frames `< tau - 1`.
    pub old_stop: usize,
    pub trace: Vec<AlignStep>,
}

impl SpikeAlignment {
    /// An alignment that trusts both streams up to `tau` frame-for-frame.
    pub fn at(tau: usize, compared: usize) -> Self {
        Self {
            tau,
            compared,
            old_stop: tau - 1,
            trace: Vec::new(),
        }
    }

    pub fn tau_max(&self) -> usize {
        self.compared + 1
    }

    /// New-stream frame for each old frame consumed before `old_stop`.
    fn old_to_new(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.old_stop];
        let mut set = |old: usize, new: usize| {
            if let Some(slot) = map.get_mut(old) {
                *slot = Some(new);
            }
        };
        for step in &self.trace {
            match *step {
                AlignStep::Dominant { old, new }
                | AlignStep::Weak { old, new }
                | AlignStep::BlankRunnerUp { old, new }
                | AlignStep::Shift { old, new, .. } => set(old, new),
                AlignStep::BlankTail { .. } => {}
            }
        }
        map
    }
}

/// Scans the blank-dominant side forward to its next dominant non-blank label
/// and pairs it with the other side's dominant label. Cursors are 0-based; on
/// success both come back one past the matched pair.
pub fn find_next(
    i: usize,
    j: usize,
    old_dom: &[Option<u32>],
    new_dom: &[Option<u32>],
) -> Option<(usize, usize)> {
    let next_label = |seq: &[Option<u32>], mut k: usize| {
        while seq.get(k).copied().flatten() == Some(BLANK) {
            k += 1;
        }
        seq.get(k).copied().flatten().map(|l| (k, l))
    };
    let old_here = old_dom.get(i).copied().flatten();
    let new_here = new_dom.get(j).copied().flatten();
    match (old_here, new_here) {
        (Some(BLANK), Some(target)) if target != BLANK => {
            let (k, l) = next_label(old_dom, i)?;
            (l == target).then_some((k + 1, j + 1))
        }
        (Some(target), Some(BLANK)) if target != BLANK => {
            let (k, l) = next_label(new_dom, j)?;
            (l == target).then_some((i + 1, k + 1))
        }
        _ => None,
    }
}

/// Compares the previous and revised top-two streams (equal length
/// `tau_max - 1`) and returns the full alignment record.
pub fn align_spikes(old: &[TopTwo], new: &[TopTwo], theta: f64) -> Result<SpikeAlignment> {
    if old.len() != new.len() {
        return Err(Error::invalid(format!(
            "previous stream has {} frames, revised stream {}",
            old.len(),
            new.len()
        )));
    }
    let len = old.len();
    let psi = dominant_seq(old, theta);
    let phi = dominant_seq(new, theta);
    let mut trace = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut tau = None;

    while j < len {
        if i >= len {
            // old stream exhausted first
            if phi[j..].iter().all(|d| *d == Some(BLANK)) {
                trace.push(AlignStep::BlankTail {
                    old_from: i,
                    new_from: j,
                });
            } else {
                tau = Some(j + 1);
            }
            break;
        }
        let (a, b) = (&old[i], &new[j]);
        if a.l1 == b.l1 {
            if psi[i].is_some() && phi[j].is_some() {
                trace.push(AlignStep::Dominant { old: i, new: j });
            } else if psi[i].is_none() && phi[j].is_none() && a.l2 == b.l2 {
                trace.push(AlignStep::Weak { old: i, new: j });
            } else {
                tau = Some(j + 1);
                break;
            }
            i += 1;
            j += 1;
        } else if psi[i].is_some() && phi[j].is_some() && (a.l1 == BLANK || b.l1 == BLANK) {
            match find_next(i, j, &psi, &phi) {
                Some((ni, nj)) => {
                    trace.push(AlignStep::Shift {
                        old_from: i,
                        new_from: j,
                        old: ni - 1,
                        new: nj - 1,
                    });
                    i = ni;
                    j = nj;
                }
                None => {
                    tau = Some(j + 1);
                    break;
                }
            }
        } else if (psi[i].is_none() && a.l1 == BLANK && a.l2 == b.l1)
            || (phi[j].is_none() && b.l1 == BLANK && b.l2 == a.l1)
        {
            trace.push(AlignStep::BlankRunnerUp { old: i, new: j });
            i += 1;
            j += 1;
        } else {
            tau = Some(j + 1);
            break;
        }
    }

    if tau.is_none() && i < len && psi[i..].iter().all(|d| *d == Some(BLANK)) {
        // new stream exhausted first with only blanks left on the old side
        trace.push(AlignStep::BlankTail {
            old_from: i,
            new_from: len,
        });
        i = len;
    }
    Ok(SpikeAlignment {
        tau: tau.unwrap_or(len + 1),
        compared: len,
        old_stop: i,
        trace,
    })
}

/// 1-based frame from which the revised stream must be re-decoded.
pub fn spike_align(old: &[TopTwo], new: &[TopTwo], theta: f64) -> Result<usize> {
    Ok(align_spikes(old, new, theta)?.tau)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedecodeResult {
    pub tau: usize,
    pub frames_redecoded: usize,
    pub hypothesis: Hypothesis,
}

/// Keeps the tokens the alignment vouches for and propagates the new stream
/// from `tau` onward.
///
/// `hyp` must have consumed exactly the compared frames. `new` holds the
/// revised stream and may carry one extra frame, the newest input.
pub fn redecode_from(
    hyp: &Hypothesis,
    alignment: &SpikeAlignment,
    new: &[TopTwo],
    theta: f64,
) -> Result<RedecodeResult> {
    let tau = alignment.tau;
    if tau == 0 || tau > alignment.tau_max() {
        return Err(Error::invalid(format!(
            "tau {tau} outside [1, {}]",
            alignment.tau_max()
        )));
    }
    if hyp.frames() != alignment.compared {
        return Err(Error::invalid(format!(
            "hypothesis consumed {} frames, alignment compared {}",
            hyp.frames(),
            alignment.compared
        )));
    }
    if new.len() != alignment.compared && new.len() != alignment.tau_max() {
        return Err(Error::invalid(format!(
            "new stream has {} frames, expected {} or {}",
            new.len(),
            alignment.compared,
            alignment.tau_max()
        )));
    }
    let start = tau - 1;
    let map = alignment.old_to_new();
    let mut out = Hypothesis::new();
    for (&tok, &src) in hyp.tokens.iter().zip(&hyp.sources) {
        if src >= alignment.old_stop {
            break;
        }
        out.tokens.push(tok);
        out.sources
            .push(map.get(src).copied().flatten().unwrap_or(src));
    }
    out.frames = start;
    // skip count is cumulative work, re-decoded frames included
    out.skipped = hyp.skipped;
    out.last = start.checked_sub(1).map(|p| psd_symbol(&new[p], theta));
    for tt in &new[start..] {
        out.psd_step(tt, theta);
    }
    Ok(RedecodeResult {
        tau,
        frames_redecoded: new.len() - start,
        hypothesis: out,
    })
}
