use serde::Serialize;

use super::Mode;
use crate::scheduler::RevisionEvent;

/// Word (token) error rate: Levenshtein distance over reference length.
/// An empty reference scores the hypothesis length, so empty/empty is 0.
pub fn wer(hypothesis: &[u32], reference: &[u32]) -> f64 {
    let dist = edit_distance(hypothesis, reference);
    if reference.is_empty() {
        return dist as f64;
    }
    dist as f64 / reference.len() as f64
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Mean final lookahead in milliseconds for a realized schedule: each frame's
/// context ends at `n - 1` of the last event that revised it, else at itself.
pub fn average_lookahead_ms(frames: usize, events: &[RevisionEvent], frame_ms: f64) -> f64 {
    if frames == 0 {
        return 0.0;
    }
    let mut ends: Vec<usize> = (0..frames).collect();
    for e in events {
        for end in &mut ends[e.lo..=e.hi.min(frames - 1)] {
            *end = (*end).max(e.n - 1);
        }
    }
    let total: usize = ends.iter().enumerate().map(|(t, e)| e - t).sum();
    total as f64 / frames as f64 * frame_ms
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionMetrics {
    pub mode: Mode,
    pub frames: usize,
    /// Frames recomputed by revisions, counted from the engine.
    pub recomputed_frames: u64,
    pub predicted_extra_frames: Option<u64>,
    pub revision_events: usize,
    pub avg_lookahead_ms: f64,
    /// Edits to finalized tokens after they were first emitted.
    pub stability: usize,
    pub redecoded_frames: u64,
    pub skipped_frames: usize,
    pub wer: Option<f64>,
    #[serde(skip)]
    pub processing_secs: f64,
    #[serde(skip)]
    pub rtf_proxy: f64,
}

#[derive(Serialize)]
struct Timed<'a> {
    #[serde(flatten)]
    metrics: &'a SessionMetrics,
    processing_secs: f64,
    rtf_proxy: f64,
}

impl SessionMetrics {
    /// One JSON object. Wall-clock fields are only included with `timing`,
    /// so the untimed form is reproducible byte for byte.
    pub fn to_json_line(&self, timing: bool) -> String {
        let out = if timing {
            serde_json::to_string(&Timed {
                metrics: self,
                processing_secs: self.processing_secs,
                rtf_proxy: self.rtf_proxy,
            })
        } else {
            serde_json::to_string(self)
        };
        out.expect("metrics serialize")
    }
}

pub fn metrics_csv(rows: &[SessionMetrics], timing: bool) -> String {
    let mut out = String::from(
        "mode,frames,recomputed_frames,predicted_extra_frames,revision_events,avg_lookahead_ms,stability,redecoded_frames,skipped_frames,wer",
    );
    if timing {
        out.push_str(",processing_secs,rtf_proxy");
    }
    out.push('\n');
    let opt = |v: Option<String>| v.unwrap_or_default();
    for m in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3},{},{},{},{}",
            m.mode,
            m.frames,
            m.recomputed_frames,
            opt(m.predicted_extra_frames.map(|v| v.to_string())),
            m.revision_events,
            m.avg_lookahead_ms,
            m.stability,
            m.redecoded_frames,
            m.skipped_frames,
            opt(m.wer.map(|v| format!("{v:.4}"))),
        ));
        if timing {
            out.push_str(&format!(",{:.6},{:.6}", m.processing_secs, m.rtf_proxy));
        }
        out.push('\n');
    }
    out
}
