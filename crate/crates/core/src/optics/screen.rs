//! Kolmogorov phase screens by spectral synthesis with low-order subharmonics.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::spectral::Fft2;

/// Phase in radians over a regular grid, indexed `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub phase: Array2<f64>,
    /// Fried parameter, m.
    pub r0: f64,
    /// Sample spacing, m.
    pub dx: f64,
    pub seed: u64,
}

impl PhaseScreen {
    /// Flat screen (no aberration).
    pub fn flat(rows: usize, cols: usize, dx: f64) -> Self {
        PhaseScreen {
            phase: Array2::zeros((rows, cols)),
            r0: f64::INFINITY,
            dx,
            seed: 0,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.phase.dim()
    }
}

/// Fried coherence length `r0 = (0.423·k²·∫Cn² dz)^(-3/5)`, `k = 2π/λ`.
///
/// `cn2_path_integral` is in m^(1/3). A zero integral (no turbulence) is a
/// domain error; callers treat it as infinite r0.
pub fn fried_parameter(cn2_path_integral: f64, wavelength: f64) -> Result<f64> {
    if !(cn2_path_integral > 0.0) {
        return Err(Error::Domain(format!(
            "Cn² path integral {cn2_path_integral} must be positive"
        )));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength {wavelength} must be positive")));
    }
    let k = 2.0 * PI / wavelength;
    Ok((0.423 * k * k * cn2_path_integral).powf(-3.0 / 5.0))
}

/// Kolmogorov phase power spectrum, `f` in cycles per meter.
#[inline]
fn kolmogorov_psd(r0: f64, f: f64) -> f64 {
    0.023 * r0.powf(-5.0 / 3.0) * f.powf(-11.0 / 3.0)
}

/// Mean of the PSD over the `wx × wy` cell centered on `(fx, fy)`.
fn cell_mean_psd(r0: f64, fx: f64, fy: f64, wx: f64, wy: f64) -> f64 {
    const M: usize = 16;
    let mut sum = 0.0;
    for a in 0..M {
        for b in 0..M {
            let u = fx + ((a as f64 + 0.5) / M as f64 - 0.5) * wx;
            let v = fy + ((b as f64 + 0.5) / M as f64 - 0.5) * wy;
            sum += kolmogorov_psd(r0, (u * u + v * v).sqrt());
        }
    }
    sum / (M * M) as f64
}

/// Signed FFT frequency index for bin `i` of `n`.
#[inline]
fn fft_index(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Draw a screen with structure function `6.88·(r/r0)^(5/3)`.
///
/// High frequencies come from an FFT over the grid; three levels of 3×3
/// subharmonics, weighted by the cell-averaged spectrum, restore the
/// large-scale power the grid cannot represent.
/// The mean (piston) is removed.
pub fn make_phase_screen(r0: f64, dims: (usize, usize), dx: f64, seed: u64) -> Result<PhaseScreen> {
    let (cols, rows) = dims;
    if cols < 8 || rows < 8 {
        return Err(Error::invalid(
            "screen size",
            format!("{cols}×{rows} is below the 8×8 minimum"),
        ));
    }
    if !(r0 > 0.0) {
        return Err(Error::invalid("r0", "must be positive"));
    }
    if !(dx > 0.0) {
        return Err(Error::invalid("dx", "must be positive"));
    }
    let mut rng = rng_for(seed, &[0x5C4EE4]);
    let (len_x, len_y) = (cols as f64 * dx, rows as f64 * dx);
    let (dfx, dfy) = (1.0 / len_x, 1.0 / len_y);

    let mut spec = Array2::<Complex64>::zeros((rows, cols));
    for ((r, c), z) in spec.indexed_iter_mut() {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if r == 0 && c == 0 {
            continue;
        }
        let fx = fft_index(c, cols) * dfx;
        let fy = fft_index(r, rows) * dfy;
        let amp = (kolmogorov_psd(r0, (fx * fx + fy * fy).sqrt()) * dfx * dfy).sqrt();
        *z = Complex64::new(a, b) * amp;
    }
    Fft2::new(rows, cols).inverse_unscaled(&mut spec);
    let mut phase = spec.mapv(|z| z.re);

    let mut low = Array2::<f64>::zeros((rows, cols));
    for level in 1..=3 {
        let scale = 3f64.powi(level);
        let (sfx, sfy) = (dfx / scale, dfy / scale);
        for j in -1i32..=1 {
            for i in -1i32..=1 {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                if i == 0 && j == 0 {
                    continue;
                }
                let (fx, fy) = (i as f64 * sfx, j as f64 * sfy);
                let amp = (cell_mean_psd(r0, fx, fy, sfx, sfy) * sfx * sfy).sqrt();
                let coef = Complex64::new(a, b) * amp;
                for ((r, c), v) in low.indexed_iter_mut() {
                    let x = (c as f64 - cols as f64 / 2.0) * dx;
                    let y = (r as f64 - rows as f64 / 2.0) * dx;
                    *v += (coef * Complex64::from_polar(1.0, 2.0 * PI * (fx * x + fy * y))).re;
                }
            }
        }
    }
    phase += &low;
    let mean = phase.mean().unwrap_or(0.0);
    phase.mapv_inplace(|v| v - mean);

    Ok(PhaseScreen { phase, r0, dx, seed })
}

/// Mean squared phase difference at integer lag `lag`, pooled over
/// horizontal and vertical pairs.
pub fn structure_function(phase: &Array2<f64>, lag: usize) -> f64 {
    let (rows, cols) = phase.dim();
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in 0..rows {
        for c in 0..cols {
            if c + lag < cols {
                sum += (phase[[r, c]] - phase[[r, c + lag]]).powi(2);
                n += 1;
            }
            if r + lag < rows {
                sum += (phase[[r, c]] - phase[[r + lag, c]]).powi(2);
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Analytic Kolmogorov phase structure function.
pub fn kolmogorov_structure(r: f64, r0: f64) -> f64 {
    6.88 * (r / r0).powf(5.0 / 3.0)
}
