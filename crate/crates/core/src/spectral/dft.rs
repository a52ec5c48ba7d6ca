//! Unnormalized forward 2D DFT, `1/MN` inverse.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Spectrum of an `M×N` image, indexed `(u, v)` like the source `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub data: Array2<Complex64>,
}

impl Spectrum {
    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Sum of complex moduli over all bins.
    pub fn manhattan_modulus(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }
}

/// Cached row/column plans for one frame shape.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft(cols, FftDirection::Forward),
            col_fwd: planner.plan_fft(rows, FftDirection::Forward),
            row_inv: planner.plan_fft(cols, FftDirection::Inverse),
            col_inv: planner.plan_fft(rows, FftDirection::Inverse),
        }
    }

    fn run(&self, data: &mut Array2<Complex64>, row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.dim(), (self.rows, self.cols), "plan shape mismatch");
        let mut buf = vec![Complex64::default(); self.rows.max(self.cols)];
        for mut r in data.axis_iter_mut(Axis(0)) {
            let b = &mut buf[..self.cols];
            for (d, s) in b.iter_mut().zip(r.iter()) {
                *d = *s;
            }
            row.process(b);
            for (s, d) in r.iter_mut().zip(b.iter()) {
                *s = *d;
            }
        }
        for mut c in data.axis_iter_mut(Axis(1)) {
            let b = &mut buf[..self.rows];
            for (d, s) in b.iter_mut().zip(c.iter()) {
                *d = *s;
            }
            col.process(b);
            for (s, d) in c.iter_mut().zip(b.iter()) {
                *s = *d;
            }
        }
    }

    /// In-place forward transform, no scaling.
    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// In-place inverse transform including the `1/MN` factor.
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        data.mapv_inplace(|z| z * scale);
    }

    /// In-place inverse transform without scaling (plain sum over frequencies).
    pub fn inverse_unscaled(&self, data: &mut Array2<Complex64>) {
        self.run(data, &self.row_inv, &self.col_inv);
    }
}

pub fn dft2(image: &Array2<f64>) -> Result<Spectrum> {
    let (m, n) = image.dim();
    if m == 0 || n == 0 {
        return Err(Error::invalid("image", "cannot transform an empty grid"));
    }
    let mut data = image.mapv(|v| Complex64::new(v, 0.0));
    Fft2::new(m, n).forward(&mut data);
    Ok(Spectrum { data })
}

pub fn dft2_complex(image: &Array2<Complex64>) -> Result<Spectrum> {
    let (m, n) = image.dim();
    if m == 0 || n == 0 {
        return Err(Error::invalid("image", "cannot transform an empty grid"));
    }
    let mut data = image.clone();
    Fft2::new(m, n).forward(&mut data);
    Ok(Spectrum { data })
}

pub fn idft2(spectrum: &Spectrum) -> Result<Array2<Complex64>> {
    let (m, n) = spectrum.dim();
    if m == 0 || n == 0 {
        return Err(Error::invalid("spectrum", "cannot transform an empty grid"));
    }
    let mut data = spectrum.data.clone();
    Fft2::new(m, n).inverse(&mut data);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct double sum, O(M²N²).
    fn naive_dft(x: &Array2<f64>) -> Array2<Complex64> {
        let (m, n) = x.dim();
        Array2::from_shape_fn((m, n), |(u, v)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..m {
                for b in 0..n {
                    let ang = -2.0 * std::f64::consts::PI * ((u * a) as f64 / m as f64 + (v * b) as f64 / n as f64);
                    acc += x[[a, b]] * Complex64::from_polar(1.0, ang);
                }
            }
            acc
        })
    }

    fn random(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn impulse_and_constant() {
        let mut x = Array2::zeros((5, 7));
        x[[0, 0]] = 1.0;
        let s = dft2(&x).unwrap();
        assert!(s.data.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let c = Array2::from_elem((6, 4), 0.3);
        let s = dft2(&c).unwrap();
        assert!((s.data[[0, 0]].re - 0.3 * 24.0).abs() < 1e-12);
        for ((u, v), z) in s.data.indexed_iter() {
            if (u, v) != (0, 0) {
                assert!(z.norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let x = random(64, 64, 11);
        let s = dft2(&x).unwrap();
        let e_space: f64 = x.iter().map(|v| v * v).sum();
        let e_freq: f64 = s.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / 4096.0;
        assert!((e_space - e_freq).abs() / e_space < 1e-9);
        let back = idft2(&s).unwrap();
        let err: f64 = x
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b.re).powi(2) + b.im.powi(2))
            .sum();
        assert!(err.sqrt() / e_space.sqrt() < 1e-9);
    }

    #[test]
    fn matches_naive_for_small_sizes() {
        for m in 1..=16 {
            for n in [1, 3, 4, 8, 13, 16] {
                let x = random(m, n, (m * 100 + n) as u64);
                let fast = dft2(&x).unwrap().data;
                let slow = naive_dft(&x);
                let scale = slow.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
                let err = fast
                    .iter()
                    .zip(slow.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(err / scale < 1e-9, "{m}x{n}: {err}");
            }
        }
    }

    #[test]
    fn empty_rejected() {
        assert!(dft2(&Array2::zeros((0, 3))).is_err());
    }
}
