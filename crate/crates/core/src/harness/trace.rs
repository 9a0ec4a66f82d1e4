use super::SessionOutput;
use crate::ctcdec::{dominant_label, top_two, BLANK};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub window_start: usize,
    pub causal_blank_frac: f64,
    pub revised_blank_frac: f64,
}

fn blank_dominant(m: &Matrix, theta: f64) -> Result<Vec<bool>> {
    m.iter_rows()
        .map(|row| Ok(dominant_label(&top_two(row)?, theta) == Some(BLANK)))
        .collect()
}

/// Fraction of blank-dominant frames per window, for the first-pass
/// outputs and for the outputs after revision.
pub fn emit_blank_dominance_trace(session: &SessionOutput, window: usize) -> Result<Vec<TraceRow>> {
    if window == 0 {
        return Err(Error::invalid("trace window must be >= 1 frame"));
    }
    let causal = blank_dominant(&session.first_pass, session.theta)?;
    let revised = blank_dominant(&session.posteriors, session.theta)?;
    let frac = |flags: &[bool]| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64;
    Ok(causal
        .chunks(window)
        .zip(revised.chunks(window))
        .enumerate()
        .map(|(k, (c, r))| TraceRow {
            window_start: k * window,
            causal_blank_frac: frac(c),
            revised_blank_frac: frac(r),
        })
        .collect())
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("window_start,causal_blank_frac,revised_blank_frac\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            r.window_start, r.causal_blank_frac, r.revised_blank_frac
        ));
    }
    out
}
