//! Per-block temperature fluctuations with a prescribed structure function.
//!
//! Inside each block the fluctuation field is Gaussian with
//! `<[T(x) − T(x+r)]²> = CT²·|r|^(2/3)` for every in-block pixel pair, where
//! `r` is in meters (pixel distance times plate scale). Samples are drawn
//! from the exact covariance `A − ½·|r|^(2/3)` via its Cholesky factor, then
//! the block mean is removed, which leaves all in-block differences intact.
//! Blocks and frames are independent.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::TurbulenceField;
use crate::rng::rng_for;
use crate::sequence::FrameSequence;

/// Sampler for unit-CT² fluctuations over one `block × block` patch.
#[derive(Debug, Clone)]
pub struct ThermalSynth {
    block: usize,
    factor: DMatrix<f64>,
}

impl ThermalSynth {
    pub fn new(block_size_px: usize, plate_scale_m_per_px: f64) -> Result<Self> {
        if block_size_px < 2 {
            return Err(Error::invalid(
                "block_size_px",
                "thermal synthesis needs blocks of at least 2×2",
            ));
        }
        if !(plate_scale_m_per_px > 0.0) {
            return Err(Error::invalid("plate_scale_m_per_px", "must be positive"));
        }
        let n = block_size_px * block_size_px;
        let pos = |i: usize| ((i / block_size_px) as f64, (i % block_size_px) as f64);
        let variogram = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (pos(i), pos(j));
            let r = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() * plate_scale_m_per_px;
            0.5 * r.powf(2.0 / 3.0)
        });
        let diag = (2.0f64).sqrt() * block_size_px as f64 * plate_scale_m_per_px;
        let mut sill = diag.powf(2.0 / 3.0);
        for _ in 0..40 {
            let cov = DMatrix::from_element(n, n, sill) - &variogram;
            if let Some(ch) = cov.cholesky() {
                return Ok(ThermalSynth {
                    block: block_size_px,
                    factor: ch.unpack(),
                });
            }
            sill *= 2.0;
        }
        Err(Error::invalid(
            "thermal covariance",
            "could not find a positive-definite sill",
        ))
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    /// One zero-mean unit-CT² patch, row-major.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Array2<f64> {
        let n = self.block * self.block;
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &self.factor * z;
        let mean = v.mean();
        Array2::from_shape_fn((self.block, self.block), |(r, c)| v[r * self.block + c] - mean)
    }
}

/// Temperature fluctuations (K) for `frames` frames covering `field`.
pub fn thermal_fluctuations(field: &TurbulenceField, frames: usize, seed: u64) -> Result<Array3<f64>> {
    field.validate()?;
    let synth = ThermalSynth::new(field.block_size_px, field.plate_scale_m_per_px)?;
    let (h, w) = field.pixel_dims();
    let (gh, gw) = field.grid_dims();
    let b = field.block_size_px;
    let per_frame: Vec<Array2<f64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let mut out = Array2::zeros((h, w));
            for br in 0..gh {
                for bc in 0..gw {
                    let amp = field.ct2[[br, bc]].sqrt();
                    if amp == 0.0 {
                        continue;
                    }
                    let mut rng = rng_for(seed, &[3, t as u64, (br * gw + bc) as u64]);
                    let patch = synth.sample(&mut rng);
                    for r in 0..b {
                        for c in 0..b {
                            out[[br * b + r, bc * b + c]] = amp * patch[[r, c]];
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut data = Array3::zeros((frames, h, w));
    for (t, f) in per_frame.into_iter().enumerate() {
        data.index_axis_mut(Axis(0), t).assign(&f);
    }
    Ok(data)
}

/// Add thermal fluctuations to a grayscale sequence, mapped through
/// `gain` gray units per kelvin.
pub fn add_thermal_fluctuations(
    seq: &FrameSequence,
    field: &TurbulenceField,
    gain: f64,
    seed: u64,
) -> Result<FrameSequence> {
    if seq.frame_dims() != field.pixel_dims() {
        let (fh, fw) = field.pixel_dims();
        let (h, w) = seq.frame_dims();
        return Err(Error::mismatch("frame vs field pixel dimensions", &[fh, fw], &[h, w]));
    }
    let fluct = thermal_fluctuations(field, seq.len(), seed)?;
    Ok(FrameSequence {
        frames: &seq.frames + &(fluct * gain),
        sensor: seq.sensor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn patch_structure_function_matches_law() {
        let synth = ThermalSynth::new(8, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut acc = [0.0; 3];
        let mut n = [0usize; 3];
        for _ in 0..4000 {
            let p = synth.sample(&mut rng);
            assert!(p.sum().abs() < 1e-9);
            for d in 1..=3 {
                for r in 0..8 {
                    for c in 0..8 - d {
                        acc[d - 1] += (p[[r, c]] - p[[r, c + d]]).powi(2);
                        acc[d - 1] += (p[[c, r]] - p[[c + d, r]]).powi(2);
                        n[d - 1] += 2;
                    }
                }
            }
        }
        for d in 1..=3 {
            let emp = acc[d - 1] / n[d - 1] as f64;
            let want = (d as f64 * 0.01).powf(2.0 / 3.0);
            assert!((emp - want).abs() / want < 0.03, "d={d}: {emp} vs {want}");
        }
    }

    #[test]
    fn zero_ct2_adds_nothing() {
        let f = TurbulenceField::new(
            Array2::zeros((2, 2)),
            Array2::zeros((2, 2)),
            Array2::from_elem((2, 2), 300.0),
            8,
            1013.25,
            0.01,
        )
        .unwrap();
        let t = thermal_fluctuations(&f, 3, 1).unwrap();
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_tiny_blocks() {
        assert!(ThermalSynth::new(1, 0.01).is_err());
        assert!(ThermalSynth::new(4, 0.0).is_err());
    }
}
