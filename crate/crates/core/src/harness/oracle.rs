use std::collections::HashMap;

use super::{Mode, SessionConfig, SessionInput};
use crate::ctcdec::{top_two_rows, Hypothesis};
use crate::encoder::{Encoder, Qkv};
use crate::error::Result;
use crate::masks::AttentionMask;
use crate::scheduler::plan;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub posteriors: Matrix,
    pub transcript: Vec<u32>,
    /// Transcript after each revision event, keyed by boundary `n`.
    pub snapshots: Vec<(usize, Vec<u32>)>,
}

#[derive(Debug, Clone, Copy)]
enum Stamp {
    Arrival(usize),
    Revision { n: usize, lo: usize },
}

/// Pure recomputation of the streaming schedule. The state of frame `i` at
/// layer `l` as of stamp `c` (the last stamp that computed `i`) is derived
/// from `i`'s lower-layer state as of `c` and from every visible frame `j`'s
/// lower-layer keys and values as of `j`'s own last computation before `c`.
/// Nothing survives between evaluations.
struct Replay<'a> {
    model: &'a Encoder,
    features: &'a Matrix,
    stamps: &'a [Stamp],
    /// Stamps that computed each frame, ascending.
    computed_at: &'a [Vec<usize>],
    hidden: HashMap<(usize, usize, usize), Vec<f32>>,
    qkv: HashMap<(usize, usize, usize), Qkv>,
}

impl<'a> Replay<'a> {
    fn last_comp(&self, i: usize, s: usize) -> usize {
        let at = &self.computed_at[i];
        at[at.partition_point(|&c| c <= s) - 1]
    }

    fn context_end(&self, c: usize, i: usize) -> usize {
        match self.stamps[c] {
            Stamp::Arrival(_) => i,
            Stamp::Revision { n, .. } => n - 1,
        }
    }

    /// Input of block `layer` for frame `i` as computed at stamp `c`.
    fn hidden(&mut self, layer: usize, i: usize, c: usize) -> Vec<f32> {
        if layer == 0 {
            return self.model.frontend(self.features, i);
        }
        if let Some(h) = self.hidden.get(&(layer, i, c)) {
            return h.clone();
        }
        let block = layer - 1;
        let x = self.hidden(block, i, c);
        let q = self.qkv(block, i, c).q;
        let ws = self.model.config().history.window_start(i);
        let visible: Vec<Qkv> = (ws..=self.context_end(c, i))
            .map(|j| {
                let cj = self.last_comp(j, c);
                self.qkv(block, j, cj)
            })
            .collect();
        let keys: Vec<&[f32]> = visible.iter().map(|e| e.k.as_slice()).collect();
        let values: Vec<&[f32]> = visible.iter().map(|e| e.v.as_slice()).collect();
        let ctx = self.model.attend(&q, &keys, &values);
        let y = self.model.finish_block(block, &x, &ctx);
        self.hidden.insert((layer, i, c), y.clone());
        y
    }

    fn qkv(&mut self, block: usize, j: usize, c: usize) -> Qkv {
        if let Some(e) = self.qkv.get(&(block, j, c)) {
            return e.clone();
        }
        let x = self.hidden(block, j, c);
        let e = self.model.project(block, &x);
        self.qkv.insert((block, j, c), e.clone());
        e
    }

    /// Posteriors of frames `0..frames` as of stamp `s`, from scratch.
    fn evaluate(&mut self, s: usize, frames: usize) -> Result<Matrix> {
        self.hidden.clear();
        self.qkv.clear();
        let top = self.model.config().layers;
        let mut out = Matrix::zeros(0, self.model.config().vocab);
        for i in 0..frames {
            let c = self.last_comp(i, s);
            let y = self.hidden(top, i, c);
            out.push_row(&self.model.posterior(&y))?;
        }
        Ok(out)
    }
}

fn decode(posteriors: &Matrix, theta: f64) -> Result<Vec<u32>> {
    let tops = top_two_rows(posteriors.iter_rows())?;
    Ok(Hypothesis::decode(&tops, theta).tokens().to_vec())
}

/// Reference run: the schedule `run_session` would follow, recomputed without
/// caches, with a full decode after every revision event.
pub fn naive_replay_oracle(cfg: &SessionConfig) -> Result<OracleOutput> {
    cfg.validate()?;
    let frames = cfg.input.frames();
    let theta = cfg.policy.theta;

    let mut stamps = Vec::new();
    let events = match cfg.mode {
        Mode::Revision => plan(frames, &cfg.policy)?,
        _ => Vec::new(),
    };
    let mut pending = events.iter().peekable();
    for t in 0..frames {
        stamps.push(Stamp::Arrival(t));
        while let Some(e) = pending.next_if(|e| e.n == t + 1) {
            stamps.push(Stamp::Revision { n: e.n, lo: e.lo });
        }
    }

    let mut snapshots = Vec::new();
    let posteriors = match (&cfg.input, cfg.mode) {
        (SessionInput::Features(features), Mode::Offline) => {
            let model = Encoder::init(cfg.encoder.clone(), &cfg.weights)?;
            model.forward_offline(features, &AttentionMask::full(frames)?)?
        }
        (SessionInput::Features(features), _) => {
            let model = Encoder::init(cfg.encoder.clone(), &cfg.weights)?;
            model.check_features(features)?;
            let mut computed_at = vec![Vec::new(); frames];
            for (s, stamp) in stamps.iter().enumerate() {
                match *stamp {
                    Stamp::Arrival(t) => computed_at[t].push(s),
                    Stamp::Revision { n, lo } => (lo..n).for_each(|i| computed_at[i].push(s)),
                }
            }
            let mut replay = Replay {
                model: &model,
                features,
                stamps: &stamps,
                computed_at: &computed_at,
                hidden: HashMap::new(),
                qkv: HashMap::new(),
            };
            for (s, stamp) in stamps.iter().enumerate() {
                if let Stamp::Revision { n, .. } = *stamp {
                    let snap = replay.evaluate(s, n)?;
                    snapshots.push((n, decode(&snap, theta)?));
                }
            }
            replay.evaluate(stamps.len() - 1, frames)?
        }
        (SessionInput::Posteriors { causal, revised }, mode) => {
            let mut current = causal.clone();
            if mode == Mode::Revision {
                let source = revised.as_ref().unwrap_or(causal);
                for e in &events {
                    for t in e.lo..=e.hi {
                        current.row_mut(t).copy_from_slice(source.row(t));
                    }
                    let mut prefix = Matrix::zeros(0, current.cols());
                    for t in 0..e.n {
                        prefix.push_row(current.row(t))?;
                    }
                    snapshots.push((e.n, decode(&prefix, theta)?));
                }
            }
            current
        }
    };
    Ok(OracleOutput {
        transcript: decode(&posteriors, theta)?,
        posteriors,
        snapshots,
    })
}
