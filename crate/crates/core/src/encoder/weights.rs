//! Encoder parameters, seeded initialization, and the `SRW1` weights file.
//!
//! `SRW1` layout: magic `SRW1`, `u32` tensor count, then per tensor a `u32`
//! name length, the UTF-8 name, `u32` rank, `rank` `u32` dims, and the
//! little-endian `f32` payload in row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EncoderConfig;
use crate::error::{Error, Result};
use crate::formats::ByteReader;
use crate::tensor::Matrix;

pub const SRW1_MAGIC: &[u8; 4] = b"SRW1";

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_scale: Vec<f32>,
    pub ln1_offset: Vec<f32>,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ln2_scale: Vec<f32>,
    pub ln2_offset: Vec<f32>,
    pub ff_w1: Matrix,
    pub ff_b1: Vec<f32>,
    pub ff_w2: Matrix,
    pub ff_b2: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// One `[d_model, d_in]` tap per kernel position, oldest input first.
    pub conv_taps: Vec<Matrix>,
    pub conv_bias: Vec<f32>,
    pub layers: Vec<LayerWeights>,
    pub final_scale: Vec<f32>,
    pub final_offset: Vec<f32>,
    pub out_w: Matrix,
    pub out_b: Vec<f32>,
}

/// Where encoder parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Seeded(u64),
    File(std::path::PathBuf),
}

struct Init {
    rng: ChaCha8Rng,
    bound: f32,
}

impl Init {
    fn vec(&mut self, n: usize) -> Vec<f32> {
        (0..n)
            .map(|_| self.rng.gen_range(-self.bound..=self.bound))
            .collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, self.vec(rows * cols)).expect("shape is consistent")
    }
}

impl Weights {
    /// Uniform `[-s, s]` with `s = 1/sqrt(d_model)` for every matrix and bias;
    /// layer-norm scales start at one and offsets at zero.
    pub fn seeded(config: &EncoderConfig, seed: u64) -> Self {
        let d = config.d_model;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bound: 1.0 / (d as f32).sqrt(),
        };
        let conv_taps = (0..config.conv_kernel)
            .map(|_| init.matrix(d, config.d_in))
            .collect();
        let conv_bias = init.vec(d);
        let layers = (0..config.layers)
            .map(|_| LayerWeights {
                ln1_scale: vec![1.0; d],
                ln1_offset: vec![0.0; d],
                wq: init.matrix(d, d),
                wk: init.matrix(d, d),
                wv: init.matrix(d, d),
                wo: init.matrix(d, d),
                ln2_scale: vec![1.0; d],
                ln2_offset: vec![0.0; d],
                ff_w1: init.matrix(config.d_ff, d),
                ff_b1: init.vec(config.d_ff),
                ff_w2: init.matrix(d, config.d_ff),
                ff_b2: init.vec(d),
            })
            .collect();
        Self {
            conv_taps,
            conv_bias,
            layers,
            final_scale: vec![1.0; d],
            final_offset: vec![0.0; d],
            out_w: init.matrix(config.vocab, d),
            out_b: init.vec(config.vocab),
        }
    }

    /// Named tensors in file order, each as `(name, dims, row-major data)`.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        let mut out = Vec::new();
        let k = self.conv_taps.len();
        let (d, d_in) = (
            self.conv_bias.len(),
            self.conv_taps.first().map_or(0, Matrix::cols),
        );
        let conv: Vec<f32> = self
            .conv_taps
            .iter()
            .flat_map(|m| m.data().to_vec())
            .collect();
        out.push(("frontend.weight".to_string(), vec![k, d, d_in], conv));
        out.push(("frontend.bias".to_string(), vec![d], self.conv_bias.clone()));
        let mat = |m: &Matrix| (vec![m.rows(), m.cols()], m.data().to_vec());
        let vec1 = |v: &Vec<f32>| (vec![v.len()], v.clone());
        for (l, lw) in self.layers.iter().enumerate() {
            let entries = [
                ("ln1.scale", vec1(&lw.ln1_scale)),
                ("ln1.offset", vec1(&lw.ln1_offset)),
                ("attn.wq", mat(&lw.wq)),
                ("attn.wk", mat(&lw.wk)),
                ("attn.wv", mat(&lw.wv)),
                ("attn.wo", mat(&lw.wo)),
                ("ln2.scale", vec1(&lw.ln2_scale)),
                ("ln2.offset", vec1(&lw.ln2_offset)),
                ("ff.w1", mat(&lw.ff_w1)),
                ("ff.b1", vec1(&lw.ff_b1)),
                ("ff.w2", mat(&lw.ff_w2)),
                ("ff.b2", vec1(&lw.ff_b2)),
            ];
            for (name, (dims, data)) in entries {
                out.push((format!("layers.{l}.{name}"), dims, data));
            }
        }
        out.push((
            "final_ln.scale".to_string(),
            vec![d],
            self.final_scale.clone(),
        ));
        out.push((
            "final_ln.offset".to_string(),
            vec![d],
            self.final_offset.clone(),
        ));
        let (dims, data) = mat(&self.out_w);
        out.push(("output.weight".to_string(), dims, data));
        out.push((
            "output.bias".to_string(),
            vec![self.out_b.len()],
            self.out_b.clone(),
        ));
        out
    }

    pub fn to_srw1(&self) -> Vec<u8> {
        let tensors = self.named_tensors();
        let mut out = Vec::new();
        out.extend_from_slice(SRW1_MAGIC);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, dims, data) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
            for d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_srw1(config: &EncoderConfig, bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "SRW1 weights");
        r.expect_magic(SRW1_MAGIC)?;
        let count = r.u32()? as usize;
        let mut table: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.bytes(name_len)?)
                .map_err(|_| Error::format("SRW1 weights", "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len = dims.iter().product::<usize>();
            let data = r.f32s(len)?;
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(name, "non-finite entries"));
            }
            table.insert(name, (dims, data));
        }
        r.finish()?;
        Self::from_table(config, table)
    }

    fn from_table(
        config: &EncoderConfig,
        mut table: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
    ) -> Result<Self> {
        let d = config.d_model;
        let mut take = |name: String, want: &[usize]| -> Result<Vec<f32>> {
            let (dims, data) = table
                .remove(&name)
                .ok_or_else(|| Error::format(name.clone(), "tensor missing"))?;
            if dims != want {
                return Err(Error::format(
                    name,
                    format!("dimension mismatch: file has {dims:?}, config needs {want:?}"),
                ));
            }
            Ok(data)
        };
        let mat = |rows: usize, cols: usize, data: Vec<f32>| {
            Matrix::from_vec(rows, cols, data).expect("dims checked")
        };

        let conv = take(
            "frontend.weight".into(),
            &[config.conv_kernel, d, config.d_in],
        )?;
        let conv_taps = conv
            .chunks_exact(d * config.d_in)
            .map(|c| mat(d, config.d_in, c.to_vec()))
            .collect();
        let conv_bias = take("frontend.bias".into(), &[d])?;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let p = |s: &str| format!("layers.{l}.{s}");
            layers.push(LayerWeights {
                ln1_scale: take(p("ln1.scale"), &[d])?,
                ln1_offset: take(p("ln1.offset"), &[d])?,
                wq: mat(d, d, take(p("attn.wq"), &[d, d])?),
                wk: mat(d, d, take(p("attn.wk"), &[d, d])?),
                wv: mat(d, d, take(p("attn.wv"), &[d, d])?),
                wo: mat(d, d, take(p("attn.wo"), &[d, d])?),
                ln2_scale: take(p("ln2.scale"), &[d])?,
                ln2_offset: take(p("ln2.offset"), &[d])?,
                ff_w1: mat(config.d_ff, d, take(p("ff.w1"), &[config.d_ff, d])?),
                ff_b1: take(p("ff.b1"), &[config.d_ff])?,
                ff_w2: mat(d, config.d_ff, take(p("ff.w2"), &[d, config.d_ff])?),
                ff_b2: take(p("ff.b2"), &[d])?,
            });
        }
        let final_scale = take("final_ln.scale".into(), &[d])?;
        let final_offset = take("final_ln.offset".into(), &[d])?;
        let out_w = mat(
            config.vocab,
            d,
            take("output.weight".into(), &[config.vocab, d])?,
        );
        let out_b = take("output.bias".into(), &[config.vocab])?;
        if let Some(extra) = table.keys().next() {
            return Err(Error::format(
                extra.clone(),
                "unexpected tensor for this config",
            ));
        }
        Ok(Self {
            conv_taps,
            conv_bias,
            layers,
            final_scale,
            final_offset,
            out_w,
            out_b,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_srw1()).map_err(|e| Error::io(path, e))
    }

    pub fn load(config: &EncoderConfig, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_srw1(config, &bytes)
    }
}
