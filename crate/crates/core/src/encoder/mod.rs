//! A small pre-norm transformer encoder over frame features.
//!
//! Per frame: a causal convolution front-end (left zero padding, stride 1)
//! plus a sinusoidal position code, then `L` blocks of masked multi-head
//! self-attention and a ReLU feed-forward, each wrapped as
//! `x + sublayer(LayerNorm(x))`, and finally layer norm, a projection to the
//! vocabulary and a softmax.
//!
//! [`Encoder::forward_offline`] evaluates a whole sequence under an
//! [`AttentionMask`]. [`EncoderState`] runs the same blocks incrementally with
//! per-layer key/value caches and supports revising a span of past frames.

mod config;
mod state;
mod weights;

pub use config::{EncoderConfig, History};
pub use state::{EncoderState, LayerCache};
pub use weights::{LayerWeights, WeightSource, Weights, SRW1_MAGIC};

use crate::error::{Error, Result};
use crate::masks::AttentionMask;
use crate::tensor::{self, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    config: EncoderConfig,
    weights: Weights,
}

impl Encoder {
    pub fn new(config: EncoderConfig, weights: Weights) -> Result<Self> {
        config.validate()?;
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::format(what, "shape does not match encoder config"))
            }
        };
        check(weights.layers.len() == config.layers, "layers")?;
        check(
            weights.conv_taps.len() == config.conv_kernel,
            "frontend.weight",
        )?;
        check(
            weights.out_w.rows() == config.vocab && weights.out_w.cols() == config.d_model,
            "output.weight",
        )?;
        Ok(Self { config, weights })
    }

    pub fn init(config: EncoderConfig, source: &WeightSource) -> Result<Self> {
        config.validate()?;
        let weights = match source {
            WeightSource::Seeded(seed) => Weights::seeded(&config, *seed),
            WeightSource::File(path) => Weights::load(&config, path)?,
        };
        Self::new(config, weights)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Convolution front-end output plus position code for frame `t`.
    /// Only rows `t - K + 1 ..= t` of `features` are read.
    pub fn frontend(&self, features: &Matrix, t: usize) -> Vec<f32> {
        let w = &self.weights;
        let k = w.conv_taps.len();
        let mut acc: Vec<f64> = w.conv_bias.iter().map(|b| f64::from(*b)).collect();
        for (tap, m) in w.conv_taps.iter().enumerate() {
            // tap k-1 sees the current frame, tap 0 the oldest
            let Some(src) = (t + tap + 1).checked_sub(k) else {
                continue;
            };
            let x = features.row(src);
            for (r, a) in acc.iter_mut().enumerate() {
                *a += tensor::dot(m.row(r), x);
            }
        }
        let pe = position_code(t, self.config.d_model);
        acc.iter().zip(pe).map(|(a, p)| (*a + p) as f32).collect()
    }

    /// Query, key and value for one frame's layer input.
    pub fn project(&self, layer: usize, x: &[f32]) -> Qkv {
        let lw = &self.weights.layers[layer];
        let u = tensor::layer_norm(x, &lw.ln1_scale, &lw.ln1_offset);
        Qkv {
            q: tensor::affine(&lw.wq, &u, None),
            k: tensor::affine(&lw.wk, &u, None),
            v: tensor::affine(&lw.wv, &u, None),
        }
    }

    /// Multi-head attention of `q` over the given key/value rows (`d_model` wide).
    pub fn attend(&self, q: &[f32], keys: &[&[f32]], values: &[&[f32]]) -> Vec<f32> {
        let dh = self.config.head_dim();
        let mut out = Vec::with_capacity(self.config.d_model);
        for h in 0..self.config.heads {
            let span = h * dh..(h + 1) * dh;
            let ks: Vec<&[f32]> = keys.iter().map(|k| &k[span.clone()]).collect();
            let vs: Vec<&[f32]> = values.iter().map(|v| &v[span.clone()]).collect();
            out.extend(head_context(&q[span.clone()], &ks, &vs));
        }
        out
    }

    /// Output projection, residual, and the feed-forward sublayer.
    pub fn finish_block(&self, layer: usize, x: &[f32], context: &[f32]) -> Vec<f32> {
        let lw = &self.weights.layers[layer];
        let mut h = tensor::affine(&lw.wo, context, None);
        tensor::add_in_place(&mut h, x);
        let f = tensor::layer_norm(&h, &lw.ln2_scale, &lw.ln2_offset);
        let mut mid = tensor::affine(&lw.ff_w1, &f, Some(&lw.ff_b1));
        tensor::relu_in_place(&mut mid);
        let ff = tensor::affine(&lw.ff_w2, &mid, Some(&lw.ff_b2));
        tensor::add_in_place(&mut h, &ff);
        h
    }

    /// Label posteriors from the top layer's output.
    pub fn posterior(&self, y: &[f32]) -> Vec<f32> {
        let w = &self.weights;
        let u = tensor::layer_norm(y, &w.final_scale, &w.final_offset);
        tensor::softmax(&tensor::affine(&w.out_w, &u, Some(&w.out_b)))
    }

    pub fn check_features(&self, features: &Matrix) -> Result<()> {
        if features.cols() != self.config.d_in {
            return Err(Error::invalid(format!(
                "feature width {} does not match d_in {}",
                features.cols(),
                self.config.d_in
            )));
        }
        if !features.is_finite() {
            return Err(Error::Numeric("non-finite input features".into()));
        }
        Ok(())
    }

    /// Full-sequence forward pass: frame `q` attends keys in
    /// `[window_start(q), e(q)]`. Returns a `T x V` posterior matrix.
    pub fn forward_offline(&self, features: &Matrix, mask: &AttentionMask) -> Result<Matrix> {
        self.check_features(features)?;
        let t_total = features.rows();
        if mask.frames() != t_total {
            return Err(Error::invalid(format!(
                "mask covers {} frames, features have {t_total}",
                mask.frames()
            )));
        }
        let mut hidden: Vec<Vec<f32>> = (0..t_total).map(|t| self.frontend(features, t)).collect();
        for layer in 0..self.config.layers {
            let qkv: Vec<Qkv> = hidden.iter().map(|x| self.project(layer, x)).collect();
            hidden = (0..t_total)
                .map(|q| {
                    let span = self.config.history.window_start(q)..=mask.context_end(q);
                    let keys: Vec<&[f32]> =
                        qkv[span.clone()].iter().map(|e| e.k.as_slice()).collect();
                    let values: Vec<&[f32]> = qkv[span].iter().map(|e| e.v.as_slice()).collect();
                    let ctx = self.attend(&qkv[q].q, &keys, &values);
                    self.finish_block(layer, &hidden[q], &ctx)
                })
                .collect();
        }
        let mut out = Matrix::zeros(0, 0);
        for y in &hidden {
            out.push_row(&self.posterior(y))?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qkv {
    pub q: Vec<f32>,
    pub k: Vec<f32>,
    pub v: Vec<f32>,
}

/// Sinusoidal absolute position code.
pub fn position_code(t: usize, d_model: usize) -> Vec<f64> {
    (0..d_model)
        .map(|i| {
            let pair = (i / 2) as f64;
            let angle = t as f64 / 10_000f64.powf(2.0 * pair / d_model as f64);
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Attention weights `softmax_j(q . k_j / sqrt(d_k))`.
pub fn attention_weights(q: &[f32], keys: &[&[f32]]) -> Vec<f64> {
    let scale = 1.0 / (q.len() as f64).sqrt();
    let scores: Vec<f64> = keys.iter().map(|k| tensor::dot(q, k) * scale).collect();
    tensor::softmax64(&scores)
}

fn head_context(q: &[f32], keys: &[&[f32]], values: &[&[f32]]) -> Vec<f32> {
    let weights = attention_weights(q, keys);
    let width = values.first().map_or(0, |v| v.len());
    let mut acc = vec![0.0f64; width];
    for (w, v) in weights.iter().zip(values) {
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += w * f64::from(*x);
        }
    }
    acc.into_iter().map(|a| a as f32).collect()
}

/// One attention head: `sum_j softmax_j(q . k_j / sqrt(d_k)) v_j`.
pub fn attention_head(q: &[f32], keys: &[&[f32]], values: &[&[f32]]) -> Result<Vec<f32>> {
    if keys.is_empty() {
        return Err(Error::invalid("attention over an empty key set"));
    }
    if keys.len() != values.len() {
        return Err(Error::invalid(format!(
            "{} keys but {} values",
            keys.len(),
            values.len()
        )));
    }
    if keys.iter().any(|k| k.len() != q.len()) {
        return Err(Error::invalid("key width differs from query width"));
    }
    let dv = values[0].len();
    if values.iter().any(|v| v.len() != dv) {
        return Err(Error::invalid("ragged value vectors"));
    }
    Ok(head_context(q, keys, values))
}

/// Seeded features uniform in `[-1, 1)`, a stand-in for real acoustic frames.
pub fn synthetic_features(seed: u64, frames: usize, d_in: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..frames * d_in)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    Matrix::from_vec(frames, d_in, data).expect("shape matches data")
}
