//! Minimal feature-extraction and prior-injection stand-ins.

use ndarray::{concatenate, Array2, Array3, Axis};
use rand_chacha::ChaCha8Rng;

use super::layers::{upsample_nearest, Conv1x1, Conv3dDown};
use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Two 3×3×3 convolutions, each halving the spatial size.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor3d {
    pub conv1: Conv3dDown,
    pub conv2: Conv3dDown,
}

impl FeatureExtractor3d {
    /// Spatial reduction of [`forward`](Self::forward).
    pub const STRIDE: usize = 4;

    pub fn zeros(in_channels: usize, channels: usize) -> Self {
        FeatureExtractor3d {
            conv1: Conv3dDown::zeros(channels, in_channels),
            conv2: Conv3dDown::zeros(channels, channels),
        }
    }

    pub fn random(in_channels: usize, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        FeatureExtractor3d {
            conv1: Conv3dDown::random(channels, in_channels, rng),
            conv2: Conv3dDown::random(channels, channels, rng),
        }
    }

    pub fn forward(&self, seq: &Tensor4) -> Result<Tensor4> {
        Tensor4::new(self.conv2.forward(&self.conv1.forward(&seq.data)?)?)
    }
}

/// Concatenates a block-resolution field triple, upsampled to the feature
/// resolution, as three extra channels and mixes with a 1×1 conv.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorInjection {
    /// `out × (in + 3)`
    pub conv: Conv1x1,
}

impl PriorInjection {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        PriorInjection {
            conv: Conv1x1::zeros(out_channels, in_channels + 3, true),
        }
    }

    pub fn random(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        PriorInjection {
            conv: Conv1x1::random(out_channels, in_channels + 3, true, rng),
        }
    }

    /// `prior` holds three `(grid_h, grid_w)` maps; the feature map must be
    /// an integer multiple of the grid.
    pub fn forward(&self, x: &Array3<f32>, prior: &[Array2<f32>; 3]) -> Result<Array3<f32>> {
        let (_, h, w) = x.dim();
        let (gh, gw) = prior[0].dim();
        if gh == 0 || h % gh != 0 || w % gw != 0 || h / gh != w / gw {
            return Err(Error::mismatch("prior grid vs feature map", &[h, w], &[gh, gw]));
        }
        let views: Vec<_> = prior.iter().map(|p| p.view().insert_axis(Axis(0))).collect();
        let grid = concatenate(Axis(0), &views).map_err(|e| Error::invalid("prior", e.to_string()))?;
        let up = upsample_nearest(&grid, h / gh);
        let stacked =
            concatenate(Axis(0), &[x.view(), up.view()]).map_err(|e| Error::invalid("prior", e.to_string()))?;
        self.conv.forward(&stacked)
    }
}
