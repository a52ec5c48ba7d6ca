//! Channel-transposed self-attention.
//!
//! Q, K and V come from a 1×1 convolution followed by a 3×3 depth-wise
//! convolution. Within each head the channels are split into `d_k`-wide
//! groups; with `Q`, `K`, `V` viewed as `(pixels × d_k)` matrices the head
//! computes
//!
//! ```text
//! L = Kᵀ·Q / √d_k              (d_k × d_k)
//! S[:, j] = softmax(L[:, j])   each output channel's weights sum to 1
//! A = V·S
//! ```
//!
//! and a final 1×1 convolution mixes the heads. The attention map never
//! grows with the pixel count.

use ndarray::{s, Array2, Array3};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layers::{Conv1x1, DepthwiseConv3};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CtsaWeights {
    /// `3C × C`, rows ordered Q, K, V.
    pub qkv: Conv1x1,
    pub qkv_dw: DepthwiseConv3,
    pub project: Conv1x1,
    pub heads: usize,
}

impl CtsaWeights {
    pub fn zeros(channels: usize, heads: usize) -> Self {
        CtsaWeights {
            qkv: Conv1x1::zeros(3 * channels, channels, false),
            qkv_dw: DepthwiseConv3::zeros(3 * channels),
            project: Conv1x1::zeros(channels, channels, false),
            heads,
        }
    }

    pub fn random(channels: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        CtsaWeights {
            qkv: Conv1x1::random(3 * channels, channels, false, rng),
            qkv_dw: DepthwiseConv3::random(3 * channels, rng),
            project: Conv1x1::random(channels, channels, false, rng),
            heads,
        }
    }

    pub fn channels(&self) -> usize {
        self.project.out_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        if self.heads == 0 || !c.is_multiple_of(self.heads) {
            return Err(Error::invalid(
                "heads",
                format!("{} heads do not divide {c} channels", self.heads),
            ));
        }
        if self.qkv.out_channels() != 3 * c || self.qkv.in_channels() != c {
            return Err(Error::mismatch(
                "qkv projection",
                &[3 * c, c],
                &[self.qkv.out_channels(), self.qkv.in_channels()],
            ));
        }
        if self.qkv_dw.channels() != 3 * c {
            return Err(Error::mismatch(
                "qkv depth-wise conv",
                &[3 * c],
                &[self.qkv_dw.channels()],
            ));
        }
        if self.project.in_channels() != c {
            return Err(Error::mismatch(
                "output projection",
                &[c, c],
                &[c, self.project.in_channels()],
            ));
        }
        Ok(())
    }

    /// The `(Q, K, V)` maps of one frame, each `(C, H, W)`.
    fn qkv(&self, x: &Array3<f32>) -> Result<(Array3<f32>, Array3<f32>, Array3<f32>)> {
        let t = self.qkv_dw.forward(&self.qkv.forward(x)?)?;
        let c = self.channels();
        Ok((
            t.slice(s![..c, .., ..]).to_owned(),
            t.slice(s![c..2 * c, .., ..]).to_owned(),
            t.slice(s![2 * c.., .., ..]).to_owned(),
        ))
    }
}

fn softmax_columns(logits: &mut Array2<f64>) {
    for mut col in logits.columns_mut() {
        let m = col.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        col.mapv_inplace(|v| (v - m).exp());
        let s = col.sum();
        col /= s;
    }
}

/// Per-head `(d_k × d_k)` attention maps of one frame; column `j` holds the
/// weights producing output channel `j`.
pub fn ctsa_attention(x: &Array3<f32>, w: &CtsaWeights) -> Result<Vec<Array2<f64>>> {
    w.validate()?;
    let (q, k, _) = w.qkv(x)?;
    Ok(attention_from(&q, &k, w.heads))
}

fn attention_from(q: &Array3<f32>, k: &Array3<f32>, heads: usize) -> Vec<Array2<f64>> {
    let (c, h, wd) = q.dim();
    let dk = c / heads;
    let npx = h * wd;
    let scale = 1.0 / (dk as f64).sqrt();
    let q2 = q
        .view()
        .into_shape_with_order((c, npx))
        .expect("contiguous")
        .mapv(f64::from);
    let k2 = k
        .view()
        .into_shape_with_order((c, npx))
        .expect("contiguous")
        .mapv(f64::from);
    (0..heads)
        .map(|hd| {
            let qh = q2.slice(s![hd * dk..(hd + 1) * dk, ..]);
            let kh = k2.slice(s![hd * dk..(hd + 1) * dk, ..]);
            // L[i, j] = Σ_p K[i, p]·Q[j, p]
            let mut logits = kh.dot(&qh.t()) * scale;
            softmax_columns(&mut logits);
            logits
        })
        .collect()
}

fn ctsa_frame(x: &Array3<f32>, w: &CtsaWeights) -> Result<Array3<f32>> {
    let (c, h, wd) = x.dim();
    let (q, k, v) = w.qkv(x)?;
    let maps = attention_from(&q, &k, w.heads);
    let dk = c / w.heads;
    let v2 = v
        .into_shape_with_order((c, h * wd))
        .expect("contiguous")
        .mapv(f64::from);
    let mut attended = Array2::<f64>::zeros((c, h * wd));
    for (hd, s_map) in maps.iter().enumerate() {
        let vh = v2.slice(s![hd * dk..(hd + 1) * dk, ..]);
        // out[j, p] = Σ_i V[i, p]·S[i, j]
        attended
            .slice_mut(s![hd * dk..(hd + 1) * dk, ..])
            .assign(&s_map.t().dot(&vh));
    }
    let attended = attended
        .mapv(|v| v as f32)
        .into_shape_with_order((c, h, wd))
        .expect("contiguous");
    w.project.forward(&attended)
}

/// Attention output for every frame; same shape as the input.
pub fn ctsa_forward(x: &Tensor4, w: &CtsaWeights) -> Result<Tensor4> {
    w.validate()?;
    if x.channels() != w.channels() {
        return Err(Error::mismatch("CTSA channels", &[w.channels()], &[x.channels()]));
    }
    let frames: Vec<Array3<f32>> = (0..x.frames())
        .into_par_iter()
        .map(|t| ctsa_frame(&x.frame(t).to_owned(), w))
        .collect::<Result<_>>()?;
    Tensor4::from_frames(&frames)
}
