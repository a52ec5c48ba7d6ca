//! Restorers: the Cn²-adaptive temporal filter plus two reference stand-ins.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::TsEstimate;
use crate::error::{Error, Result};
use crate::fields::{upsample_field, CN2_RANGE_MAX, DEFAULT_BLOCK_SIZE_PX};
use crate::sequence::FrameSequence;
use crate::util::gaussian_blur_reflect;

/// Frames consumed per output frame.
pub const WINDOW: usize = 5;
/// Expected input length; output is `INPUT_FRAMES − 4`.
pub const INPUT_FRAMES: usize = 15;

/// Restores a turbulent sequence given a turbulence prior.
pub trait Restorer: Send + Sync {
    fn restore(&self, turb: &FrameSequence, prior: &TsEstimate) -> Result<FrameSequence>;

    fn name(&self) -> &str;
}

pub(crate) fn check_length(frames: usize, allow_any_length: bool) -> Result<()> {
    if allow_any_length {
        if frames < WINDOW {
            return Err(Error::invalid(
                "input sequence",
                format!("{frames} frames; at least {WINDOW} are required"),
            ));
        }
    } else if frames != INPUT_FRAMES {
        return Err(Error::invalid(
            "input sequence",
            format!("{frames} frames; exactly {INPUT_FRAMES} are required"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalRestorerConfig {
    pub block_size_px: usize,
    /// Cn² at which the temporal spread reaches `max_spread_frames`.
    pub cn2_ref: f64,
    /// Gaussian temporal sigma, in frames, at `cn2_ref`.
    pub max_spread_frames: f64,
    /// 0 disables unsharp masking.
    pub unsharp_amount: f64,
    pub unsharp_sigma_px: f64,
    /// Accept any length ≥ 5 instead of exactly 15 frames.
    pub allow_any_length: bool,
}

impl Default for TemporalRestorerConfig {
    fn default() -> Self {
        TemporalRestorerConfig {
            block_size_px: DEFAULT_BLOCK_SIZE_PX,
            cn2_ref: CN2_RANGE_MAX,
            max_spread_frames: 4.0,
            unsharp_amount: 0.0,
            unsharp_sigma_px: 1.0,
            allow_any_length: false,
        }
    }
}

/// Per-pixel Gaussian-weighted average over the 5-frame window centered on
/// each output frame. The temporal sigma grows linearly with the local
/// upsampled Cn² prior, so zero Cn² passes the center frame through.
#[derive(Debug, Clone, Default)]
pub struct TemporalRestorer {
    pub config: TemporalRestorerConfig,
}

impl TemporalRestorer {
    pub fn new(config: TemporalRestorerConfig) -> Result<Self> {
        if config.block_size_px == 0 {
            return Err(Error::invalid("block_size_px", "must be at least 1"));
        }
        if !(config.cn2_ref > 0.0) || !(config.max_spread_frames >= 0.0) {
            return Err(Error::invalid(
                "temporal restorer",
                "cn2_ref must be positive and spread non-negative",
            ));
        }
        if !(config.unsharp_amount >= 0.0) || !(config.unsharp_sigma_px > 0.0) {
            return Err(Error::invalid("unsharp mask", "amount must be ≥ 0 and sigma > 0"));
        }
        Ok(TemporalRestorer { config })
    }

    fn weights(&self, cn2: f64) -> Option<[f64; WINDOW]> {
        let s = self.config.max_spread_frames * (cn2 / self.config.cn2_ref).clamp(0.0, 1.0);
        if s <= 0.0 {
            return None;
        }
        let mut w = [0.0; WINDOW];
        for (k, v) in w.iter_mut().enumerate() {
            let off = k as f64 - 2.0;
            *v = (-(off * off) / (2.0 * s * s)).exp();
        }
        Some(w)
    }

    fn unsharp(&self, img: &Array2<f64>) -> Array2<f64> {
        let blurred = gaussian_blur_reflect(img, self.config.unsharp_sigma_px);
        img + &((img - &blurred) * self.config.unsharp_amount)
    }
}

impl Restorer for TemporalRestorer {
    fn restore(&self, turb: &FrameSequence, prior: &TsEstimate) -> Result<FrameSequence> {
        check_length(turb.len(), self.config.allow_any_length)?;
        let cn2_up = upsample_field(&prior.cn2, self.config.block_size_px)?;
        let (h, w) = turb.frame_dims();
        if cn2_up.dim() != (h, w) {
            return Err(Error::mismatch(
                "upsampled prior",
                &[h, w],
                &[cn2_up.nrows(), cn2_up.ncols()],
            ));
        }
        let weights = cn2_up.mapv(|c| self.weights(c));
        let out_len = turb.len() - (WINDOW - 1);
        let frames: Vec<Array2<f64>> = (0..out_len)
            .into_par_iter()
            .map(|j| {
                let center = j + WINDOW / 2;
                let mut out = Array2::from_shape_fn((h, w), |(r, c)| match &weights[[r, c]] {
                    None => turb.frames[[center, r, c]],
                    Some(wt) => {
                        let (mut acc, mut norm) = (0.0, 0.0);
                        for (k, &wk) in wt.iter().enumerate() {
                            acc += wk * turb.frames[[j + k, r, c]];
                            norm += wk;
                        }
                        acc / norm
                    }
                });
                if self.config.unsharp_amount > 0.0 {
                    out = self.unsharp(&out);
                }
                out
            })
            .collect();
        let mut data = Array3::zeros((out_len, h, w));
        for (j, f) in frames.into_iter().enumerate() {
            data.index_axis_mut(Axis(0), j).assign(&f);
        }
        Ok(FrameSequence {
            frames: data,
            sensor: turb.sensor,
        })
    }

    fn name(&self) -> &str {
        "temporal"
    }
}

/// Returns the middle input frames unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRestorer;

impl Restorer for IdentityRestorer {
    fn restore(&self, turb: &FrameSequence, _prior: &TsEstimate) -> Result<FrameSequence> {
        check_length(turb.len(), true)?;
        turb.slice_frames(WINDOW / 2, turb.len() - WINDOW / 2)
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Returns the matching frames of a known clean sequence.
#[derive(Debug, Clone)]
pub struct OracleRestorer {
    pub clean: FrameSequence,
}

impl Restorer for OracleRestorer {
    fn restore(&self, turb: &FrameSequence, _prior: &TsEstimate) -> Result<FrameSequence> {
        turb.ensure_same_dims(&self.clean, "oracle clean sequence")?;
        check_length(turb.len(), true)?;
        self.clean.slice_frames(WINDOW / 2, turb.len() - WINDOW / 2)
    }

    fn name(&self) -> &str {
        "oracle"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coop::InputMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prior(cn2: f64, gh: usize, gw: usize) -> TsEstimate {
        TsEstimate {
            cn2: Array2::from_elem((gh, gw), cn2),
            ct2: Array2::zeros((gh, gw)),
            temp: Array2::from_elem((gh, gw), 300.0),
            mode: InputMode::Single,
            source: "test".into(),
        }
    }

    fn noisy(frames: usize, sigma: f64, seed: u64) -> FrameSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FrameSequence::new(Array3::from_shape_fn((frames, 32, 32), |(_, r, c)| {
            let base = 0.3 + 0.01 * r as f64 + 0.005 * c as f64;
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            base + sigma * n
        }))
        .unwrap()
    }

    #[test]
    fn zero_prior_passes_center_frames() {
        let turb = noisy(15, 0.02, 1);
        let out = TemporalRestorer::default().restore(&turb, &prior(0.0, 2, 2)).unwrap();
        assert_eq!(out.len(), 11);
        for j in 0..11 {
            assert_eq!(out.frame(j), turb.frame(j + 2));
        }
    }

    #[test]
    fn strong_prior_reduces_noise() {
        let sigma = 0.02;
        let turb = noisy(15, sigma, 2);
        let out = TemporalRestorer::default().restore(&turb, &prior(6e-12, 2, 2)).unwrap();
        let mut var = 0.0;
        let mut n = 0.0;
        for j in 0..11 {
            for ((r, c), v) in out.frame(j).indexed_iter() {
                let base = 0.3 + 0.01 * r as f64 + 0.005 * c as f64;
                var += (v - base).powi(2);
                n += 1.0;
            }
        }
        var /= n;
        assert!(sigma * sigma / var >= 3.0, "reduction {}", sigma * sigma / var);
    }

    #[test]
    fn length_contract() {
        let r = TemporalRestorer::default();
        assert!(r.restore(&noisy(14, 0.0, 1), &prior(0.0, 2, 2)).is_err());
        let relaxed = TemporalRestorer::new(TemporalRestorerConfig {
            allow_any_length: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(
            relaxed.restore(&noisy(5, 0.0, 1), &prior(1e-12, 2, 2)).unwrap().len(),
            1
        );
        assert!(relaxed.restore(&noisy(4, 0.0, 1), &prior(1e-12, 2, 2)).is_err());
        assert!(r.restore(&noisy(15, 0.0, 1), &prior(1e-12, 3, 2)).is_err());
    }

    #[test]
    fn unsharp_keeps_constant_frames() {
        let r = TemporalRestorer::new(TemporalRestorerConfig {
            unsharp_amount: 0.8,
            ..Default::default()
        })
        .unwrap();
        let flat = FrameSequence::new(Array3::from_elem((15, 32, 32), 0.4)).unwrap();
        let out = r.restore(&flat, &prior(3e-12, 2, 2)).unwrap();
        assert!(out.frames.iter().all(|v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn stand_in_restorers() {
        let turb = noisy(15, 0.01, 3);
        let clean = noisy(15, 0.0, 3);
        let id = IdentityRestorer.restore(&turb, &prior(0.0, 2, 2)).unwrap();
        assert_eq!(id.frames, turb.slice_frames(2, 13).unwrap().frames);
        let or = OracleRestorer { clean: clean.clone() }
            .restore(&turb, &prior(0.0, 2, 2))
            .unwrap();
        assert_eq!(or.frames, clean.slice_frames(2, 13).unwrap().frames);
    }
}
