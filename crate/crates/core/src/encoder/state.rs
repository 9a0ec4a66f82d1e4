use std::sync::Arc;

use super::{Encoder, EncoderConfig, WeightSource};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Cached keys and values of one layer, one entry per received frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerCache {
    keys: Vec<Vec<f32>>,
    values: Vec<Vec<f32>>,
    versions: Vec<u32>,
}

impl LayerCache {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, t: usize) -> &[f32] {
        &self.keys[t]
    }

    pub fn value(&self, t: usize) -> &[f32] {
        &self.values[t]
    }

    /// Number of times frame `t` has been rewritten by a revision.
    pub fn version(&self, t: usize) -> u32 {
        self.versions[t]
    }

    fn push(&mut self, k: Vec<f32>, v: Vec<f32>) {
        self.keys.push(k);
        self.values.push(v);
        self.versions.push(0);
    }

    fn overwrite(&mut self, t: usize, k: Vec<f32>, v: Vec<f32>) {
        self.keys[t] = k;
        self.values[t] = v;
        self.versions[t] += 1;
    }

    fn span(&self, lo: usize, hi: usize) -> (Vec<&[f32]>, Vec<&[f32]>) {
        (
            self.keys[lo..=hi].iter().map(Vec::as_slice).collect(),
            self.values[lo..=hi].iter().map(Vec::as_slice).collect(),
        )
    }
}

/// Streaming encoder session: received features, per-layer hidden states
/// and key/value caches, and the latest posterior row of every frame.
#[derive(Debug, Clone)]
pub struct EncoderState {
    model: Arc<Encoder>,
    features: Matrix,
    /// `hidden[0]` is the front-end output, `hidden[l]` the output of block `l`.
    hidden: Vec<Vec<Vec<f32>>>,
    caches: Vec<LayerCache>,
    posteriors: Matrix,
}

impl EncoderState {
    pub fn new(model: Arc<Encoder>) -> Self {
        let layers = model.config().layers;
        let d_in = model.config().d_in;
        Self {
            features: Matrix::zeros(0, d_in),
            hidden: vec![Vec::new(); layers + 1],
            caches: vec![LayerCache::default(); layers],
            posteriors: Matrix::zeros(0, model.config().vocab),
            model,
        }
    }

    pub fn init(config: EncoderConfig, source: &WeightSource) -> Result<Self> {
        Ok(Self::new(Arc::new(Encoder::init(config, source)?)))
    }

    pub fn model(&self) -> &Arc<Encoder> {
        &self.model
    }

    /// Frames received so far.
    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    pub fn cache(&self, layer: usize) -> &LayerCache {
        &self.caches[layer]
    }

    /// Latest output of block `layer` (1-based; 0 is the front-end) at frame `t`.
    pub fn hidden(&self, layer: usize, t: usize) -> &[f32] {
        &self.hidden[layer][t]
    }

    /// Current posterior matrix, latest revision of every frame.
    pub fn posteriors(&self) -> &Matrix {
        &self.posteriors
    }

    /// Encodes the next frame causally against the cached (possibly revised)
    /// keys and values and returns its posterior row.
    pub fn stream_step(&mut self, frame: &[f32]) -> Result<Vec<f32>> {
        let cfg = self.model.config();
        if frame.len() != cfg.d_in {
            return Err(Error::invalid(format!(
                "frame width {} does not match d_in {}",
                frame.len(),
                cfg.d_in
            )));
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input frame".into()));
        }
        let t = self.frames();
        self.features.push_row(frame)?;
        let model = Arc::clone(&self.model);
        let x0 = model.frontend(&self.features, t);
        self.hidden[0].push(x0);
        let ws = cfg.history.window_start(t);
        for layer in 0..cfg.layers {
            let qkv = model.project(layer, &self.hidden[layer][t]);
            let cache = &mut self.caches[layer];
            cache.push(qkv.k, qkv.v);
            let (keys, values) = cache.span(ws, t);
            let ctx = model.attend(&qkv.q, &keys, &values);
            let y = model.finish_block(layer, &self.hidden[layer][t], &ctx);
            self.hidden[layer + 1].push(y);
        }
        let row = model.posterior(&self.hidden[cfg.layers][t]);
        self.posteriors.push_row(&row)?;
        Ok(row)
    }

    /// Revises frames `[max(0, n - sigma), n - 1]` layer by layer: their
    /// queries, keys and values are recomputed from the freshly revised lower
    /// layer, and each attends every cached frame through `n - 1` inside the
    /// history window. Older frames are read, never written. Returns the
    /// revised posterior rows in frame order.
    pub fn revise(&mut self, n: usize, sigma: usize) -> Result<Matrix> {
        if n > self.frames() {
            return Err(Error::invalid(format!(
                "revision boundary {n} beyond {} received frames",
                self.frames()
            )));
        }
        if sigma == 0 {
            return Err(Error::invalid("revision step must be >= 1"));
        }
        let vocab = self.model.config().vocab;
        if n == 0 {
            return Ok(Matrix::zeros(0, vocab));
        }
        let lo = n.saturating_sub(sigma);
        let hi = n - 1;
        let model = Arc::clone(&self.model);
        let cfg = model.config();
        for layer in 0..cfg.layers {
            let mut queries = Vec::with_capacity(n - lo);
            for t in lo..=hi {
                let qkv = model.project(layer, &self.hidden[layer][t]);
                self.caches[layer].overwrite(t, qkv.k, qkv.v);
                queries.push(qkv.q);
            }
            for (t, q) in (lo..=hi).zip(&queries) {
                let (keys, values) = self.caches[layer].span(cfg.history.window_start(t), hi);
                let ctx = model.attend(q, &keys, &values);
                let y = model.finish_block(layer, &self.hidden[layer][t], &ctx);
                self.hidden[layer + 1][t] = y;
            }
        }
        let mut revised = Matrix::zeros(0, vocab);
        for t in lo..=hi {
            let row = model.posterior(&self.hidden[cfg.layers][t]);
            self.posteriors.row_mut(t).copy_from_slice(&row);
            revised.push_row(&row)?;
        }
        Ok(revised)
    }
}
