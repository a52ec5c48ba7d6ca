//! Tilt + blur + noise degradation driven by a block Cn² field.
//!
//! Per frame and per block:
//! * tilt: a subpixel shift with standard deviation
//!   `tilt_gain·sqrt(Cn²/cn2_ref)` pixels on each axis, redrawn every frame;
//! * blur: a Gaussian with `sigma = blur_gain·Cn²/cn2_ref` pixels, truncated
//!   at `3·sigma` and at `blur_kernel_max_px`;
//! * noise: i.i.d. additive Gaussian with `noise_sigma`.
//!
//! Warping is bilinear with reflected borders. Output is not clamped.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::screen::fried_parameter;
use crate::error::{Error, Result};
use crate::fields::{TurbulenceField, CN2_RANGE_MAX};
use crate::rng::rng_for;
use crate::sequence::FrameSequence;
use crate::util::reflect_index;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegradationConfig {
    /// m
    pub wavelength: f64,
    /// m
    pub path_length: f64,
    /// Screens per path for the wave-optics route.
    pub n_steps: usize,
    /// Grayscale units.
    pub noise_sigma: f64,
    /// Tilt standard deviation in pixels at `cn2_ref`.
    pub tilt_gain: f64,
    /// Blur sigma in pixels at `cn2_ref`.
    pub blur_gain: f64,
    pub blur_kernel_max_px: usize,
    /// Cn² at which the tilt and blur gains apply, m^(-2/3).
    pub cn2_ref: f64,
    pub seed: u64,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        DegradationConfig {
            wavelength: 10e-6,
            path_length: 1000.0,
            n_steps: 1,
            noise_sigma: 0.002,
            tilt_gain: 0.5,
            blur_gain: 1.0,
            blur_kernel_max_px: 9,
            cn2_ref: CN2_RANGE_MAX,
            seed: 0,
        }
    }
}

impl DegradationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be positive"));
        }
        if !(self.path_length > 0.0) {
            return Err(Error::invalid("path_length", "must be positive"));
        }
        if self.n_steps < 1 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be non-negative"));
        }
        if !(self.tilt_gain >= 0.0) || !(self.blur_gain >= 0.0) {
            return Err(Error::invalid("tilt_gain/blur_gain", "must be non-negative"));
        }
        if self.blur_kernel_max_px.is_multiple_of(2) {
            return Err(Error::invalid("blur_kernel_max_px", "must be odd and at least 1"));
        }
        if !(self.cn2_ref > 0.0) {
            return Err(Error::invalid("cn2_ref", "must be positive"));
        }
        Ok(())
    }

    pub fn tilt_sigma_px(&self, cn2: f64) -> f64 {
        self.tilt_gain * (cn2 / self.cn2_ref).max(0.0).sqrt()
    }

    pub fn blur_sigma_px(&self, cn2: f64) -> f64 {
        self.blur_gain * (cn2 / self.cn2_ref).max(0.0)
    }

    /// Fried parameter for a path of uniform `cn2`; `None` without turbulence.
    pub fn fried_parameter(&self, cn2: f64) -> Option<f64> {
        fried_parameter(cn2 * self.path_length, self.wavelength).ok()
    }
}

/// Normalized square Gaussian kernel, or `None` for the identity.
fn blur_kernel(sigma: f64, max_px: usize) -> Option<(usize, Vec<f64>)> {
    let half = ((3.0 * sigma).ceil() as usize).min((max_px - 1) / 2);
    if sigma <= 1e-12 || half == 0 {
        return None;
    }
    let size = 2 * half + 1;
    let mut k = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (y, x) = (i as f64 - half as f64, j as f64 - half as f64);
            k.push((-(x * x + y * y) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Some((half, k))
}

fn bilinear_reflect(img: &ArrayView2<'_, f64>, y: f64, x: f64) -> f64 {
    let (h, w) = img.dim();
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |r: isize, c: isize| img[[reflect_index(r, h), reflect_index(c, w)]];
    if fx == 0.0 && fy == 0.0 {
        return at(y0, x0);
    }
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
    let bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
    top * (1.0 - fy) + bot * fy
}

fn degrade_frame(
    clean: &ArrayView2<'_, f64>,
    field: &TurbulenceField,
    cfg: &DegradationConfig,
    frame_idx: usize,
) -> Array2<f64> {
    let (h, w) = clean.dim();
    let b = field.block_size_px;
    let (gh, gw) = field.grid_dims();

    let mut tilts = Vec::with_capacity(gh * gw);
    let mut kernels = Vec::with_capacity(gh * gw);
    for br in 0..gh {
        for bc in 0..gw {
            let cn2 = field.cn2[[br, bc]];
            let mut rng = rng_for(cfg.seed, &[1, frame_idx as u64, (br * gw + bc) as u64]);
            let s = cfg.tilt_sigma_px(cn2);
            let ty: f64 = rng.sample::<f64, _>(StandardNormal) * s;
            let tx: f64 = rng.sample::<f64, _>(StandardNormal) * s;
            tilts.push((ty, tx));
            kernels.push(blur_kernel(cfg.blur_sigma_px(cn2), cfg.blur_kernel_max_px));
        }
    }

    let warped = Array2::from_shape_fn((h, w), |(r, c)| {
        let (ty, tx) = tilts[(r / b) * gw + c / b];
        bilinear_reflect(clean, r as f64 + ty, c as f64 + tx)
    });

    let mut out = Array2::from_shape_fn((h, w), |(r, c)| match &kernels[(r / b) * gw + c / b] {
        None => warped[[r, c]],
        Some((half, k)) => {
            let size = 2 * half + 1;
            let mut acc = 0.0;
            for i in 0..size {
                let rr = reflect_index(r as isize + i as isize - *half as isize, h);
                for j in 0..size {
                    let cc = reflect_index(c as isize + j as isize - *half as isize, w);
                    acc += k[i * size + j] * warped[[rr, cc]];
                }
            }
            acc
        }
    });

    if cfg.noise_sigma > 0.0 {
        let mut rng = rng_for(cfg.seed, &[2, frame_idx as u64]);
        for v in out.iter_mut() {
            *v += cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// Apply tilt, blur and noise to every frame of `clean`.
pub fn degrade_sequence(
    clean: &FrameSequence,
    field: &TurbulenceField,
    cfg: &DegradationConfig,
) -> Result<FrameSequence> {
    cfg.validate()?;
    field.validate()?;
    let (h, w) = clean.frame_dims();
    if (h, w) != field.pixel_dims() {
        let (fh, fw) = field.pixel_dims();
        return Err(Error::mismatch("frame vs field pixel dimensions", &[fh, fw], &[h, w]));
    }
    let frames: Vec<Array2<f64>> = (0..clean.len())
        .into_par_iter()
        .map(|t| degrade_frame(&clean.frame(t), field, cfg, t))
        .collect();
    let mut data = Array3::zeros(clean.frames.dim());
    for (t, f) in frames.into_iter().enumerate() {
        data.index_axis_mut(Axis(0), t).assign(&f);
    }
    Ok(FrameSequence {
        frames: data,
        sensor: clean.sensor,
    })
}
