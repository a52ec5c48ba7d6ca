use ndarray::{Array3, Axis};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ctsa::{ctsa_forward, CtsaWeights};
use super::gfn::{gfn_frame, GfnWeights};
use super::layers::LayerNorm;
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Hidden width of the GFN relative to the block width.
pub const GFN_EXPANSION: usize = 2;

/// One transformer block: `y = x + CTSA(LN(x))`, then `out = GFN(y)` (the
/// GFN carries its own norm and residual).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub norm: LayerNorm,
    pub ctsa: CtsaWeights,
    pub gfn: GfnWeights,
    pub seed: u64,
}

impl BlockWeights {
    pub fn zeros(channels: usize, heads: usize) -> Self {
        BlockWeights {
            norm: LayerNorm::zeros(channels),
            ctsa: CtsaWeights::zeros(channels, heads),
            gfn: GfnWeights::zeros(channels, GFN_EXPANSION * channels),
            seed: 0,
        }
    }

    pub fn random(channels: usize, heads: usize, seed: u64) -> Self {
        let mut rng: ChaCha8Rng = rng_for(seed, &[]);
        BlockWeights {
            norm: LayerNorm::identity(channels),
            ctsa: CtsaWeights::random(channels, heads, &mut rng),
            gfn: GfnWeights::random(channels, GFN_EXPANSION * channels, &mut rng),
            seed,
        }
    }

    pub fn channels(&self) -> usize {
        self.norm.channels()
    }

    pub fn heads(&self) -> usize {
        self.ctsa.heads
    }

    pub fn validate(&self) -> Result<()> {
        self.ctsa.validate()?;
        self.gfn.validate()?;
        let c = self.channels();
        if self.ctsa.channels() != c || self.gfn.channels() != c {
            return Err(Error::invalid("block weights", "sub-block channel counts disagree"));
        }
        Ok(())
    }
}

pub(crate) fn block_frame(x: &Array3<f32>, w: &BlockWeights) -> Result<Array3<f32>> {
    let normed = Tensor4::from_frame(w.norm.forward(x)?)?;
    let attn = ctsa_forward(&normed, &w.ctsa)?;
    let y = x + &attn.data.index_axis(Axis(0), 0);
    gfn_frame(&y, &w.gfn)
}

pub fn transformer_block_forward(x: &Tensor4, w: &BlockWeights) -> Result<Tensor4> {
    w.validate()?;
    if x.channels() != w.channels() {
        return Err(Error::mismatch("block channels", &[w.channels()], &[x.channels()]));
    }
    let frames: Vec<Array3<f32>> = (0..x.frames())
        .into_par_iter()
        .map(|t| block_frame(&x.frame(t).to_owned(), w))
        .collect::<Result<_>>()?;
    Tensor4::from_frames(&frames)
}
