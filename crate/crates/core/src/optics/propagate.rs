//! Split-step (phase screen + angular spectrum) propagation.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use std::f64::consts::PI;

use super::screen::PhaseScreen;
use crate::error::{Error, Result};
use crate::spectral::Fft2;

/// Complex optical field sampled on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub field: Array2<Complex64>,
    /// m
    pub wavelength: f64,
    /// m per sample
    pub dx: f64,
}

impl ComplexField {
    pub fn new(field: Array2<Complex64>, wavelength: f64, dx: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !(dx > 0.0) {
            return Err(Error::invalid("complex field", "wavelength and dx must be positive"));
        }
        if field.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("complex field", "entries must be finite"));
        }
        Ok(ComplexField { field, wavelength, dx })
    }

    /// Collimated Gaussian beam `exp(-r²/w0²)` centered on the grid.
    pub fn gaussian_beam(n: usize, dx: f64, waist: f64, wavelength: f64) -> Result<Self> {
        let c = (n as f64 - 1.0) / 2.0;
        let field = Array2::from_shape_fn((n, n), |(r, col)| {
            let x = (col as f64 - c) * dx;
            let y = (r as f64 - c) * dx;
            Complex64::new((-(x * x + y * y) / (waist * waist)).exp(), 0.0)
        });
        ComplexField::new(field, wavelength, dx)
    }

    /// Σ|E|²
    pub fn power(&self) -> f64 {
        self.field.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.field.mapv(|z| z.norm_sqr())
    }

    /// 1/e² intensity radius from the second moment along x, `2·sqrt(<x²>)`.
    pub fn second_moment_radius(&self) -> f64 {
        let (mut p, mut mx, mut mxx, mut my, mut myy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((r, c), z) in self.field.indexed_iter() {
            let i = z.norm_sqr();
            let x = c as f64 * self.dx;
            let y = r as f64 * self.dx;
            p += i;
            mx += i * x;
            mxx += i * x * x;
            my += i * y;
            myy += i * y * y;
        }
        let var_x = mxx / p - (mx / p).powi(2);
        let var_y = myy / p - (my / p).powi(2);
        // average the two axes
        2.0 * (0.5 * (var_x + var_y)).sqrt()
    }
}

/// Angular-spectrum transfer function `exp(i·kz·dz)` with
/// `kz = sqrt(k² − kx² − ky²)`; evanescent bins are zeroed when `dz > 0`.
fn transfer_function(rows: usize, cols: usize, dx: f64, wavelength: f64, dz: f64) -> Array2<Complex64> {
    let k = 2.0 * PI / wavelength;
    let freq = |i: usize, n: usize| {
        let s = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        2.0 * PI * s / (n as f64 * dx)
    };
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (kx, ky) = (freq(c, cols), freq(r, rows));
        let kz2 = k * k - kx * kx - ky * ky;
        if dz == 0.0 {
            Complex64::new(1.0, 0.0)
        } else if kz2 < 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(1.0, kz2.sqrt() * dz)
        }
    })
}

/// One split step: apply `exp(iφ)` in space, then free-space diffraction
/// over `dz` in the frequency domain.
pub fn split_step(field: &ComplexField, screen: &PhaseScreen, dz: f64) -> Result<ComplexField> {
    if field.field.dim() != screen.phase.dim() {
        let (a, b) = field.field.dim();
        let (c, d) = screen.phase.dim();
        return Err(Error::mismatch("phase screen", &[a, b], &[c, d]));
    }
    if !(dz >= 0.0) {
        return Err(Error::invalid("dz", "must be non-negative"));
    }
    let (rows, cols) = field.field.dim();
    let mut work = field.field.clone();
    Zip::from(&mut work)
        .and(&screen.phase)
        .for_each(|z, &phi| *z *= Complex64::from_polar(1.0, phi));
    let plan = Fft2::new(rows, cols);
    plan.forward(&mut work);
    work *= &transfer_function(rows, cols, field.dx, field.wavelength, dz);
    plan.inverse(&mut work);
    Ok(ComplexField {
        field: work,
        wavelength: field.wavelength,
        dx: field.dx,
    })
}

/// Apply `screens` in order, each followed by a step of `dz`.
pub fn propagate(field: &ComplexField, screens: &[PhaseScreen], dz: f64) -> Result<ComplexField> {
    let mut cur = field.clone();
    for s in screens {
        cur = split_step(&cur, s, dz)?;
    }
    Ok(cur)
}

/// Far-field point-source PSF of a circular pupil of radius `aperture`
/// (m) aberrated by `screen`, normalized to unit sum.
pub fn point_source_psf(screen: &PhaseScreen, aperture: f64) -> Result<Array2<f64>> {
    if !(aperture > 0.0) {
        return Err(Error::invalid("aperture", "must be positive"));
    }
    let (rows, cols) = screen.dim();
    let (cy, cx) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let mut pupil = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let x = (c as f64 - cx) * screen.dx;
        let y = (r as f64 - cy) * screen.dx;
        if x * x + y * y <= aperture * aperture {
            Complex64::from_polar(1.0, screen.phase[[r, c]])
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Fft2::new(rows, cols).forward(&mut pupil);
    let mut psf = pupil.mapv(|z| z.norm_sqr());
    let total: f64 = psf.sum();
    if total == 0.0 {
        return Err(Error::invalid("aperture", "contains no samples"));
    }
    psf /= total;
    // centre the zero-frequency bin
    let shifted = Array2::from_shape_fn((rows, cols), |(r, c)| {
        psf[[(r + rows - rows / 2) % rows, (c + cols - cols / 2) % cols]]
    });
    Ok(shifted)
}
