use ndarray::{concatenate, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::block::{block_frame, BlockWeights};
use super::layers::{upsample_nearest, Conv1x1};
use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::rng::{rng_for, sub_seed};
use crate::sequence::FrameSequence;

pub(crate) fn block_seed(seed: u64, index: usize) -> u64 {
    sub_seed(seed, &[1, index as u64])
}

/// The three raw output maps of the 2-D reconstructor, in network units.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMaps {
    pub cn2: Array2<f32>,
    pub ct2: Array2<f32>,
    pub temp: Array2<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reconstruct2dConfig {
    pub in_channels: usize,
    pub channels: usize,
    pub heads: usize,
    pub n_blocks: usize,
    /// Each stage doubles the resolution (nearest) and applies a 1×1 conv.
    pub n_upsample: usize,
    /// Output block grid `(rows, cols)`; the input must be this size divided
    /// by `2^n_upsample`.
    pub grid: (usize, usize),
    pub seed: u64,
}

impl Default for Reconstruct2dConfig {
    fn default() -> Self {
        Reconstruct2dConfig {
            in_channels: 8,
            channels: 8,
            heads: 2,
            n_blocks: 4,
            n_upsample: 1,
            grid: (30, 40),
            seed: 0,
        }
    }
}

/// Transformer trunk plus upsampling stages mapping features to the
/// `[Cn², CT², T]` triple at block resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstructor2d {
    pub config: Reconstruct2dConfig,
    pub embed: Conv1x1,
    pub blocks: Vec<BlockWeights>,
    pub upsample: Vec<Conv1x1>,
    /// `3 × channels` with bias.
    pub head: Conv1x1,
}

impl Reconstructor2d {
    pub fn zeros(config: Reconstruct2dConfig) -> Result<Self> {
        let c = config.channels;
        let r = Reconstructor2d {
            embed: Conv1x1::zeros(c, config.in_channels, false),
            blocks: (0..config.n_blocks)
                .map(|i| BlockWeights {
                    seed: block_seed(config.seed, i),
                    ..BlockWeights::zeros(c, config.heads)
                })
                .collect(),
            upsample: (0..config.n_upsample).map(|_| Conv1x1::zeros(c, c, false)).collect(),
            head: Conv1x1::zeros(3, c, true),
            config,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn random(config: Reconstruct2dConfig) -> Result<Self> {
        let c = config.channels;
        let s = config.seed;
        let mut rng = rng_for(s, &[0]);
        let r = Reconstructor2d {
            embed: Conv1x1::random(c, config.in_channels, false, &mut rng),
            blocks: (0..config.n_blocks)
                .map(|i| BlockWeights::random(c, config.heads, block_seed(s, i)))
                .collect(),
            upsample: (0..config.n_upsample)
                .map(|_| Conv1x1::random(c, c, false, &mut rng))
                .collect(),
            head: Conv1x1::random(3, c, true, &mut rng),
            config,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = &self.config;
        if cfg.in_channels == 0 || cfg.channels == 0 {
            return Err(Error::invalid("reconstructor", "channel counts must be positive"));
        }
        if cfg.grid.0 == 0 || cfg.grid.1 == 0 {
            return Err(Error::invalid("grid", "must be non-empty"));
        }
        let f = 1usize << cfg.n_upsample;
        if !cfg.grid.0.is_multiple_of(f) || !cfg.grid.1.is_multiple_of(f) {
            return Err(Error::invalid(
                "grid",
                format!("{:?} is not divisible by 2^{}", cfg.grid, cfg.n_upsample),
            ));
        }
        for b in &self.blocks {
            b.validate()?;
        }
        Ok(())
    }

    /// Expected input `(height, width)`.
    pub fn input_dims(&self) -> (usize, usize) {
        let f = 1usize << self.config.n_upsample;
        (self.config.grid.0 / f, self.config.grid.1 / f)
    }

    /// Map single-frame features `(1, in_channels, h, w)` to the field triple.
    pub fn forward(&self, features: &Tensor4) -> Result<FieldMaps> {
        let (l, c, h, w) = features.dims();
        let (ih, iw) = self.input_dims();
        if l != 1 || c != self.config.in_channels || (h, w) != (ih, iw) {
            return Err(Error::mismatch(
                "reconstructor input",
                &[1, self.config.in_channels, ih, iw],
                &[l, c, h, w],
            ));
        }
        let mut x = self.embed.forward(&features.frame(0).to_owned())?;
        for b in &self.blocks {
            x = block_frame(&x, b)?;
        }
        for up in &self.upsample {
            x = up.forward(&upsample_nearest(&x, 2))?;
        }
        let out = self.head.forward(&x)?;
        Ok(FieldMaps {
            cn2: out.index_axis(Axis(0), 0).to_owned(),
            ct2: out.index_axis(Axis(0), 1).to_owned(),
            temp: out.index_axis(Axis(0), 2).to_owned(),
        })
    }
}

/// Frames fused per output frame.
pub const WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reconstruct3dConfig {
    pub in_channels: usize,
    pub channels: usize,
    pub heads: usize,
    pub n_blocks: usize,
    /// Accept any length ≥ 5 instead of exactly 15 frames.
    pub allow_any_length: bool,
    pub seed: u64,
}

impl Default for Reconstruct3dConfig {
    fn default() -> Self {
        Reconstruct3dConfig {
            in_channels: 1,
            channels: 8,
            heads: 2,
            n_blocks: 4,
            allow_any_length: false,
            seed: 0,
        }
    }
}

/// Sliding-window sequence restorer: each output frame is the center
/// input frame's first channel plus a correction computed from the 5-frame
/// window (channels stacked, fused by a 1×1 conv, transformer trunk, 1×1
/// head).
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstructor3d {
    pub config: Reconstruct3dConfig,
    /// `channels × (5·in_channels)`
    pub fuse: Conv1x1,
    pub blocks: Vec<BlockWeights>,
    /// `1 × channels` with bias.
    pub head: Conv1x1,
}

impl Reconstructor3d {
    pub fn zeros(config: Reconstruct3dConfig) -> Result<Self> {
        let c = config.channels;
        let r = Reconstructor3d {
            fuse: Conv1x1::zeros(c, WINDOW * config.in_channels, false),
            blocks: (0..config.n_blocks)
                .map(|i| BlockWeights {
                    seed: block_seed(config.seed, i),
                    ..BlockWeights::zeros(c, config.heads)
                })
                .collect(),
            head: Conv1x1::zeros(1, c, true),
            config,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn random(config: Reconstruct3dConfig) -> Result<Self> {
        let c = config.channels;
        let s = config.seed;
        let mut rng = rng_for(s, &[0]);
        let r = Reconstructor3d {
            fuse: Conv1x1::random(c, WINDOW * config.in_channels, false, &mut rng),
            blocks: (0..config.n_blocks)
                .map(|i| BlockWeights::random(c, config.heads, block_seed(s, i)))
                .collect(),
            head: Conv1x1::random(1, c, true, &mut rng),
            config,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.config.in_channels == 0 || self.config.channels == 0 {
            return Err(Error::invalid("reconstructor", "channel counts must be positive"));
        }
        for b in &self.blocks {
            b.validate()?;
        }
        Ok(())
    }

    fn window(&self, seq: &Tensor4, start: usize) -> Result<Array3<f32>> {
        let views: Vec<_> = (start..start + WINDOW).map(|t| seq.frame(t)).collect();
        let stacked = concatenate(Axis(0), &views).map_err(|e| Error::invalid("window", e.to_string()))?;
        let mut x = self.fuse.forward(&stacked)?;
        for b in &self.blocks {
            x = block_frame(&x, b)?;
        }
        let correction = self.head.forward(&x)?;
        let center = seq.frame(start + WINDOW / 2);
        Ok(&correction + &center.slice(ndarray::s![0..1, .., ..]))
    }

    /// `(L, in_channels, H, W)` → `L − 4` frames of `(H, W)`.
    pub fn forward(&self, seq: &Tensor4) -> Result<FrameSequence> {
        use rayon::prelude::*;
        let (l, c, _, _) = seq.dims();
        crate::coop::check_length(l, self.config.allow_any_length)?;
        if c != self.config.in_channels {
            return Err(Error::mismatch(
                "reconstructor channels",
                &[self.config.in_channels],
                &[c],
            ));
        }
        let frames: Vec<Array2<f64>> = (0..l - (WINDOW - 1))
            .into_par_iter()
            .map(|j| self.window(seq, j).map(|f| f.index_axis(Axis(0), 0).mapv(f64::from)))
            .collect::<Result<_>>()?;
        FrameSequence::from_frames(&frames)
    }
}
