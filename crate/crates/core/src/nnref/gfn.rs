//! Gated feed-forward network:
//!
//! ```text
//! Y1  = GELU(Wd1 ∗ (Wp1 ∗ LN(x)))
//! Y2  = Wd2 ∗ (Wp2 ∗ LN(x))
//! out = x + Wp0 ∗ (Y1 ⊙ Y2)
//! ```

use ndarray::{Array3, Zip};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layers::{gelu, Conv1x1, DepthwiseConv3, LayerNorm};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GfnWeights {
    pub norm: LayerNorm,
    pub wp1: Conv1x1,
    pub wd1: DepthwiseConv3,
    pub wp2: Conv1x1,
    pub wd2: DepthwiseConv3,
    pub wp0: Conv1x1,
}

impl GfnWeights {
    pub fn zeros(channels: usize, hidden: usize) -> Self {
        GfnWeights {
            norm: LayerNorm::zeros(channels),
            wp1: Conv1x1::zeros(hidden, channels, false),
            wd1: DepthwiseConv3::zeros(hidden),
            wp2: Conv1x1::zeros(hidden, channels, false),
            wd2: DepthwiseConv3::zeros(hidden),
            wp0: Conv1x1::zeros(channels, hidden, false),
        }
    }

    pub fn random(channels: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        GfnWeights {
            norm: LayerNorm::identity(channels),
            wp1: Conv1x1::random(hidden, channels, false, rng),
            wd1: DepthwiseConv3::random(hidden, rng),
            wp2: Conv1x1::random(hidden, channels, false, rng),
            wd2: DepthwiseConv3::random(hidden, rng),
            wp0: Conv1x1::random(channels, hidden, false, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.norm.channels()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        let hid = self.wp1.out_channels();
        let ok = self.wp1.in_channels() == c
            && self.wp2.in_channels() == c
            && self.wp2.out_channels() == hid
            && self.wd1.channels() == hid
            && self.wd2.channels() == hid
            && self.wp0.in_channels() == hid
            && self.wp0.out_channels() == c;
        if !ok {
            return Err(Error::invalid(
                "GFN weights",
                format!("inconsistent kernel shapes for {c} channels, {hid} hidden"),
            ));
        }
        Ok(())
    }
}

pub(crate) fn gfn_frame(x: &Array3<f32>, w: &GfnWeights) -> Result<Array3<f32>> {
    let n = w.norm.forward(x)?;
    let y1 = w.wd1.forward(&w.wp1.forward(&n)?)?.mapv(gelu);
    let y2 = w.wd2.forward(&w.wp2.forward(&n)?)?;
    let mut gated = y1;
    Zip::from(&mut gated).and(&y2).for_each(|a, &b| *a *= b);
    Ok(x + &w.wp0.forward(&gated)?)
}

pub fn gfn_forward(x: &Tensor4, w: &GfnWeights) -> Result<Tensor4> {
    w.validate()?;
    if x.channels() != w.channels() {
        return Err(Error::mismatch("GFN channels", &[w.channels()], &[x.channels()]));
    }
    let frames: Vec<Array3<f32>> = (0..x.frames())
        .into_par_iter()
        .map(|t| gfn_frame(&x.frame(t).to_owned(), w))
        .collect::<Result<_>>()?;
    Tensor4::from_frames(&frames)
}
