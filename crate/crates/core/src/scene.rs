//! Procedural thermal scenes rendered on top of a turbulence field.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{upsample_field, TurbulenceField};
use crate::radiometry::SensorModel;
use crate::rng::rng_for;
use crate::sequence::FrameSequence;
use crate::util::gaussian_blur_reflect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Linear ramp in a random direction.
    Gradient,
    /// Square-wave bars.
    Bars,
    /// Hard-edged disks.
    Disks,
    /// Sinusoidal bars.
    SoftBars,
    /// Gaussian hot and cold spots.
    Blobs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub patterns: Vec<Pattern>,
    /// Peak-to-peak contrast of each pattern, K.
    pub amplitude_k: f64,
    pub bar_period_px: f64,
    /// Disks or blobs per pattern.
    pub spot_count: usize,
    /// Gaussian sigma of the base temperature map. 0 keeps the block-constant
    /// base; otherwise the base is smoothed while preserving every block mean.
    pub base_smoothing_px: f64,
    /// Temperature drift rate at the right image edge, K/frame. The drift is
    /// proportional to the column and centered on the middle frame.
    pub drift_k_per_frame: f64,
    pub frames: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            patterns: vec![Pattern::Gradient, Pattern::Bars, Pattern::Disks],
            amplitude_k: 4.0,
            bar_period_px: 32.0,
            spot_count: 3,
            base_smoothing_px: 0.0,
            drift_k_per_frame: 0.0,
            frames: 15,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("frames", "must be at least 1"));
        }
        if !self.amplitude_k.is_finite() || !self.drift_k_per_frame.is_finite() {
            return Err(Error::invalid("scene", "amplitude and drift must be finite"));
        }
        if !(self.bar_period_px > 0.0) || !(self.base_smoothing_px >= 0.0) {
            return Err(Error::invalid(
                "scene",
                "bar period must be positive and smoothing non-negative",
            ));
        }
        Ok(())
    }
}

fn block_means(img: &Array2<f64>, b: usize) -> Array2<f64> {
    let (h, w) = img.dim();
    Array2::from_shape_fn((h / b, w / b), |(br, bc)| {
        img.slice(ndarray::s![br * b..(br + 1) * b, bc * b..(bc + 1) * b])
            .mean()
            .unwrap_or(0.0)
    })
}

/// Smooth version of the block-constant temperature map whose block means
/// equal the field temperatures (to ~1e-9 K).
fn smooth_base(field: &TurbulenceField, sigma: f64) -> Result<Array2<f64>> {
    let b = field.block_size_px;
    let mut target = field.temp.clone();
    let mut base = gaussian_blur_reflect(&upsample_field(&target, b)?, sigma);
    for _ in 0..200 {
        let err = &field.temp - &block_means(&base, b);
        if err.iter().all(|e| e.abs() < 1e-9) {
            break;
        }
        target += &err;
        base = gaussian_blur_reflect(&upsample_field(&target, b)?, sigma);
    }
    Ok(base)
}

fn pattern_layer<R: Rng>(pattern: Pattern, spec: &SceneSpec, h: usize, w: usize, rng: &mut R) -> Array2<f64> {
    let amp = spec.amplitude_k;
    let (hf, wf) = (h as f64, w as f64);
    let theta = rng.random_range(0.0..PI);
    let (ct, st) = (theta.cos(), theta.sin());
    let proj = move |r: usize, c: usize| c as f64 * ct + r as f64 * st;
    match pattern {
        Pattern::Gradient => {
            let span = wf * ct.abs() + hf * st.abs();
            let lo = if ct < 0.0 { wf * ct } else { 0.0 };
            Array2::from_shape_fn((h, w), |(r, c)| amp * ((proj(r, c) - lo) / span - 0.5))
        }
        Pattern::Bars | Pattern::SoftBars => {
            let phase = rng.random_range(0.0..2.0 * PI);
            let k = 2.0 * PI / spec.bar_period_px;
            Array2::from_shape_fn((h, w), |(r, c)| {
                let s = (k * proj(r, c) + phase).sin();
                if pattern == Pattern::Bars {
                    0.5 * amp * s.signum()
                } else {
                    0.5 * amp * s
                }
            })
        }
        Pattern::Disks | Pattern::Blobs => {
            let m = hf.min(wf);
            let spots: Vec<(f64, f64, f64, f64)> = (0..spec.spot_count)
                .map(|_| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    (
                        rng.random_range(0.0..hf),
                        rng.random_range(0.0..wf),
                        rng.random_range(m / 10.0..m / 4.0),
                        sign * 0.5 * amp,
                    )
                })
                .collect();
            Array2::from_shape_fn((h, w), |(r, c)| {
                spots
                    .iter()
                    .map(|&(y, x, rad, a)| {
                        let d2 = (r as f64 - y).powi(2) + (c as f64 - x).powi(2);
                        if pattern == Pattern::Disks {
                            if d2 <= rad * rad {
                                a
                            } else {
                                0.0
                            }
                        } else {
                            a * (-d2 / (2.0 * (rad / 2.0).powi(2))).exp()
                        }
                    })
                    .sum()
            })
        }
    }
}

/// Render a temperature sequence (K), shape `(frames, h, w)`, matching the
/// field's pixel dimensions. The base is the field temperature map.
pub fn render_temperature(field: &TurbulenceField, spec: &SceneSpec) -> Result<Array3<f64>> {
    spec.validate()?;
    field.validate()?;
    let (h, w) = field.pixel_dims();
    let mut still = if spec.base_smoothing_px > 0.0 {
        smooth_base(field, spec.base_smoothing_px)?
    } else {
        upsample_field(&field.temp, field.block_size_px)?
    };
    for (i, &p) in spec.patterns.iter().enumerate() {
        let mut rng = rng_for(spec.seed, &[i as u64]);
        still += &pattern_layer(p, spec, h, w, &mut rng);
    }
    let mid = (spec.frames as f64 - 1.0) / 2.0;
    let xden = (w.max(2) - 1) as f64;
    let mut out = Array3::zeros((spec.frames, h, w));
    for (t, mut frame) in out.axis_iter_mut(Axis(0)).enumerate() {
        let dt = t as f64 - mid;
        frame.assign(&still);
        if spec.drift_k_per_frame != 0.0 {
            for ((_, c), v) in frame.indexed_iter_mut() {
                *v += spec.drift_k_per_frame * dt * c as f64 / xden;
            }
        }
    }
    if out.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(
            "scene contrast drives temperature to or below 0 K".into(),
        ));
    }
    Ok(out)
}

/// Render the scene and map it to grayscale through the sensor.
pub fn render_scene(field: &TurbulenceField, spec: &SceneSpec, sensor: &SensorModel) -> Result<FrameSequence> {
    sensor.validate()?;
    let temp = render_temperature(field, spec)?;
    Ok(FrameSequence::new(temp.mapv(|t| sensor.gray(t)))?.with_sensor(*sensor))
}
