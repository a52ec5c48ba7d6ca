//! The reference networks behind the cooperative measurer/restorer
//! interfaces. With random weights their outputs are meaningless; they
//! exist so the cycle can be exercised end-to-end at the shape level.

use ndarray::{Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

use super::extractor::{FeatureExtractor3d, PriorInjection};
use super::layers::avg_pool;
use super::reconstruct::{Reconstruct2dConfig, Reconstruct3dConfig, Reconstructor2d, Reconstructor3d};
use super::tensor::Tensor4;
use crate::coop::{InputMode, Measurer, Restorer, TsEstimate};
use crate::error::{Error, Result};
use crate::fields::{
    ct2_from_cn2, CN2_RANGE_MAX, DEFAULT_BLOCK_SIZE_PX, DEFAULT_PRESSURE_HPA, TEMP_RANGE_MAX, TEMP_RANGE_MIN,
};
use crate::radiometry::SensorModel;
use crate::rng::rng_for;
use crate::sequence::FrameSequence;

fn softplus(x: f32) -> f64 {
    let x = x as f64;
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f32) -> f64 {
    1.0 / (1.0 + (-(x as f64)).exp())
}

fn ct2_scale() -> f64 {
    ct2_from_cn2(CN2_RANGE_MAX, TEMP_RANGE_MAX, DEFAULT_PRESSURE_HPA).unwrap_or(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnConfig {
    pub block_size_px: usize,
    pub channels: usize,
    pub heads: usize,
    pub n_blocks: usize,
    pub seed: u64,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            block_size_px: DEFAULT_BLOCK_SIZE_PX,
            channels: 8,
            heads: 2,
            n_blocks: 2,
            seed: 0,
        }
    }
}

/// Measurer: `[turbulent, reference]` channel pairs → 3-D features →
/// temporal mean → pooled → 2-D reconstructor → bounded physical maps.
#[derive(Debug, Clone)]
pub struct NnMeasurer {
    pub extractor: FeatureExtractor3d,
    pub reconstructor: Reconstructor2d,
    pub block_size_px: usize,
}

impl NnMeasurer {
    pub fn random(config: &NnConfig, grid: (usize, usize)) -> Result<Self> {
        let b = config.block_size_px;
        if !b.is_multiple_of(FeatureExtractor3d::STRIDE) {
            return Err(Error::invalid(
                "block_size_px",
                format!("{b} must be a multiple of {}", FeatureExtractor3d::STRIDE),
            ));
        }
        let mut rng = rng_for(config.seed, &[10]);
        Ok(NnMeasurer {
            extractor: FeatureExtractor3d::random(2, config.channels, &mut rng),
            reconstructor: Reconstructor2d::random(Reconstruct2dConfig {
                in_channels: config.channels,
                channels: config.channels,
                heads: config.heads,
                n_blocks: config.n_blocks,
                n_upsample: 1,
                grid,
                seed: config.seed,
            })?,
            block_size_px: b,
        })
    }

    fn pairs(turb: &FrameSequence, reference: Option<&FrameSequence>) -> Result<Tensor4> {
        let (h, w) = turb.frame_dims();
        let (frames, refs): (FrameSequence, FrameSequence) = match reference {
            None => {
                let mean = turb.temporal_mean();
                let refs = Array3::from_shape_fn(turb.frames.dim(), |(_, r, c)| mean[[r, c]]);
                (turb.clone(), FrameSequence::new(refs)?)
            }
            Some(r) => {
                turb.ensure_same_frame_dims(r, "reference frame dimensions")?;
                if r.len() == turb.len() {
                    (turb.clone(), r.clone())
                } else if turb.len() >= 5 && r.len() == turb.len() - 4 {
                    (turb.slice_frames(2, turb.len() - 2)?, r.clone())
                } else {
                    return Err(Error::mismatch("reference frame count", &[turb.len()], &[r.len()]));
                }
            }
        };
        let mut data = Array4::zeros((frames.len(), 2, h, w));
        data.index_axis_mut(Axis(1), 0)
            .assign(&frames.frames.mapv(|v| v as f32));
        data.index_axis_mut(Axis(1), 1).assign(&refs.frames.mapv(|v| v as f32));
        Tensor4::new(data)
    }
}

impl Measurer for NnMeasurer {
    fn measure(
        &self,
        turb: &FrameSequence,
        reference: Option<&FrameSequence>,
        _sensor: &SensorModel,
    ) -> Result<TsEstimate> {
        let (h, w) = turb.frame_dims();
        let (gh, gw) = self.reconstructor.config.grid;
        if (h, w) != (gh * self.block_size_px, gw * self.block_size_px) {
            return Err(Error::mismatch(
                "frame vs network grid",
                &[gh * self.block_size_px, gw * self.block_size_px],
                &[h, w],
            ));
        }
        let feats = self.extractor.forward(&Self::pairs(turb, reference)?)?;
        let pooled = feats.data.mean_axis(Axis(0)).expect("non-empty");
        // Features sit at 1/STRIDE resolution; the reconstructor wants half the grid.
        let factor = 2 * self.block_size_px / FeatureExtractor3d::STRIDE;
        let x = Tensor4::from_frame(avg_pool(&pooled, factor)?)?;
        let maps = self.reconstructor.forward(&x)?;
        let est = TsEstimate {
            cn2: maps.cn2.mapv(|v| CN2_RANGE_MAX * softplus(v)),
            ct2: maps.ct2.mapv(|v| ct2_scale() * softplus(v)),
            temp: maps
                .temp
                .mapv(|v| TEMP_RANGE_MIN + (TEMP_RANGE_MAX - TEMP_RANGE_MIN) * sigmoid(v)),
            mode: if reference.is_some() {
                InputMode::Dual
            } else {
                InputMode::Single
            },
            source: "nn_measurer".into(),
        };
        est.validate()?;
        Ok(est)
    }

    fn name(&self) -> &str {
        "nn_measurer"
    }
}

/// Restorer: gray frames plus the injected prior → 3-D reconstructor.
#[derive(Debug, Clone)]
pub struct NnRestorer {
    pub injection: PriorInjection,
    pub reconstructor: Reconstructor3d,
    pub block_size_px: usize,
}

impl NnRestorer {
    pub fn random(config: &NnConfig) -> Result<Self> {
        let mut rng = rng_for(config.seed, &[20]);
        let c = config.channels;
        Ok(NnRestorer {
            injection: PriorInjection::random(1, c, &mut rng),
            reconstructor: Reconstructor3d::random(Reconstruct3dConfig {
                in_channels: 1 + c,
                channels: c,
                heads: config.heads,
                n_blocks: config.n_blocks,
                allow_any_length: false,
                seed: config.seed,
            })?,
            block_size_px: config.block_size_px,
        })
    }
}

impl Restorer for NnRestorer {
    fn restore(&self, turb: &FrameSequence, prior: &TsEstimate) -> Result<FrameSequence> {
        let (h, w) = turb.frame_dims();
        let b = self.block_size_px;
        let (gh, gw) = prior.dim();
        if (h, w) != (gh * b, gw * b) {
            return Err(Error::mismatch("frame vs prior grid", &[gh * b, gw * b], &[h, w]));
        }
        let norm = |g: &Array2<f64>, s: f64| g.mapv(|v| (v / s) as f32);
        let triple = [
            norm(&prior.cn2, CN2_RANGE_MAX),
            norm(&prior.ct2, ct2_scale()),
            norm(&prior.temp, TEMP_RANGE_MAX),
        ];
        let c = self.injection.conv.out_channels();
        let mut data = Array4::zeros((turb.len(), 1 + c, h, w));
        for t in 0..turb.len() {
            let gray = turb.frame(t).mapv(|v| v as f32).insert_axis(Axis(0));
            let injected = self.injection.forward(&gray, &triple)?;
            let mut slot = data.index_axis_mut(Axis(0), t);
            slot.index_axis_mut(Axis(0), 0).assign(&gray.index_axis(Axis(0), 0));
            slot.slice_mut(ndarray::s![1.., .., ..]).assign(&injected);
        }
        let out = self.reconstructor.forward(&Tensor4::new(data)?)?;
        Ok(FrameSequence {
            frames: out.frames,
            sensor: turb.sensor,
        })
    }

    fn name(&self) -> &str {
        "nn_restorer"
    }
}
