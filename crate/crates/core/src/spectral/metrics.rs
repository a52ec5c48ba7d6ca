//! Image-restoration and field-estimation metrics.
//!
//! All reductions run sequentially in a fixed order so results are
//! bit-stable regardless of thread count.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::FrameSequence;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Per-frame metrics averaged over the sequence. PSNR uses a peak of 1.0 and
/// is `+inf` for identical inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub nrmse: f64,
    #[serde(with = "crate::serde_float")]
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub msle: f64,
    pub r2: f64,
}

pub fn mse(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> f64 {
    let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    s / a.len() as f64
}

/// PSNR in dB for a peak value of 1.0.
pub fn psnr(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> f64 {
    let m = mse(a, b);
    if m == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * m.log10()
    }
}

/// RMSE divided by the value range of `gt` (1.0 if `gt` is flat).
pub fn nrmse(rest: &ArrayView2<'_, f64>, gt: &ArrayView2<'_, f64>) -> f64 {
    let (lo, hi) = gt.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    let denom = if range > 0.0 { range } else { 1.0 };
    mse(rest, gt).sqrt() / denom
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(h − k + 1) × (w − k + 1)`.
fn filter_valid(img: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let k = taps.len();
    let (h, w) = img.dim();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let rows = Array2::from_shape_fn((h, ow), |(r, c)| (0..k).map(|i| taps[i] * img[[r, c + i]]).sum::<f64>());
    Array2::from_shape_fn((oh, ow), |(r, c)| {
        (0..k).map(|i| taps[i] * rows[[r + i, c]]).sum::<f64>()
    })
}

/// SSIM map over all window positions that fit entirely inside the image.
pub fn ssim_map(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::mismatch(
            "SSIM inputs",
            &[a.nrows(), a.ncols()],
            &[b.nrows(), b.ncols()],
        ));
    }
    let (h, w) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(
            "SSIM input",
            format!("{h}×{w} is smaller than the 11×11 window"),
        ));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let a = a.to_owned();
    let b = b.to_owned();
    let mu_a = filter_valid(&a, &taps);
    let mu_b = filter_valid(&b, &taps);
    let aa = filter_valid(&(&a * &a), &taps);
    let bb = filter_valid(&(&b * &b), &taps);
    let ab = filter_valid(&(&a * &b), &taps);
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    Ok(Array2::from_shape_fn(mu_a.dim(), |idx| {
        let (ma, mb) = (mu_a[idx], mu_b[idx]);
        let va = aa[idx] - ma * ma;
        let vb = bb[idx] - mb * mb;
        let cov = ab[idx] - ma * mb;
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    }))
}

pub fn ssim(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Result<f64> {
    let m = ssim_map(a, b)?;
    Ok(m.iter().sum::<f64>() / m.len() as f64)
}

pub fn metrics_image(rest: &FrameSequence, gt: &FrameSequence) -> Result<ImageMetrics> {
    rest.ensure_same_dims(gt, "restored vs ground-truth sequence")?;
    let n = rest.len() as f64;
    let mut out = ImageMetrics {
        nrmse: 0.0,
        psnr_db: 0.0,
        ssim: 0.0,
    };
    for i in 0..rest.len() {
        let (r, g) = (rest.frame(i), gt.frame(i));
        out.nrmse += nrmse(&r, &g);
        out.psnr_db += psnr(&r, &g);
        out.ssim += ssim(&r, &g)?;
    }
    out.nrmse /= n;
    out.psnr_db /= n;
    out.ssim /= n;
    Ok(out)
}

/// Field accuracy on values divided by `normalizer`.
///
/// MSLE uses `ln(1 + x)`. R² pools every entry; a constant ground truth gives
/// R² = 1 for an exact prediction and 0 otherwise.
pub fn metrics_field(pred: &Array2<f64>, gt: &Array2<f64>, normalizer: f64) -> Result<FieldMetrics> {
    if pred.dim() != gt.dim() {
        return Err(Error::mismatch(
            "field metrics",
            &[gt.nrows(), gt.ncols()],
            &[pred.nrows(), pred.ncols()],
        ));
    }
    if pred.is_empty() {
        return Err(Error::invalid("field", "empty grid"));
    }
    if !(normalizer > 0.0) {
        return Err(Error::invalid("normalizer", "must be positive"));
    }
    let n = pred.len() as f64;
    let mean_gt = gt.iter().map(|g| g / normalizer).sum::<f64>() / n;
    let (mut abs, mut sq, mut sl, mut tot) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &g) in pred.iter().zip(gt.iter()) {
        let (p, g) = (p / normalizer, g / normalizer);
        if p <= -1.0 || g <= -1.0 {
            return Err(Error::Domain("MSLE undefined for normalized values ≤ -1".into()));
        }
        let e = p - g;
        abs += e.abs();
        sq += e * e;
        sl += (p.ln_1p() - g.ln_1p()).powi(2);
        tot += (g - mean_gt) * (g - mean_gt);
    }
    let r2 = if tot > 0.0 {
        1.0 - sq / tot
    } else if sq == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(FieldMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        msle: sl / n,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = FrameSequence::new(Array3::from_shape_fn((2, 16, 16), |_| rng.random())).unwrap();
        let m = metrics_image(&a, &a).unwrap();
        assert_eq!(m.nrmse, 0.0);
        assert_eq!(m.psnr_db, f64::INFINITY);
        assert!((m.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offset_gives_twenty_db() {
        let gt = Array3::from_shape_fn((1, 16, 16), |(_, r, c)| (r * 16 + c) as f64 / 255.0);
        let rest = gt.mapv(|v| v + 0.1);
        let m = metrics_image(&FrameSequence::new(rest).unwrap(), &FrameSequence::new(gt).unwrap()).unwrap();
        assert!((m.psnr_db - 20.0).abs() < 1e-9, "{}", m.psnr_db);
        assert!((m.nrmse - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ssim_requires_window() {
        let a = Array2::zeros((10, 20));
        assert!(ssim(&a.view(), &a.view()).is_err());
    }

    #[test]
    fn field_metric_bases() {
        let gt = Array2::from_shape_fn((4, 4), |(r, c)| (r * 4 + c) as f64 * 1e-13);
        let m = metrics_field(&gt, &gt, 6e-12).unwrap();
        assert_eq!((m.mae, m.rmse, m.msle, m.r2), (0.0, 0.0, 0.0, 1.0));
        let mean = gt.mean().unwrap();
        let m = metrics_field(&Array2::from_elem((4, 4), mean), &gt, 6e-12).unwrap();
        assert!(m.r2.abs() < 1e-12, "{}", m.r2);
        assert!(metrics_field(&gt, &gt, 0.0).is_err());
        assert!(metrics_field(&Array2::zeros((3, 4)), &gt, 1.0).is_err());
        let flat = Array2::from_elem((2, 2), 1.0);
        assert_eq!(metrics_field(&flat, &flat, 1.0).unwrap().r2, 1.0);
        assert_eq!(metrics_field(&Array2::zeros((2, 2)), &flat, 1.0).unwrap().r2, 0.0);
    }

    #[test]
    fn metrics_serialize_infinite_psnr() {
        let m = ImageMetrics {
            nrmse: 0.0,
            psnr_db: f64::INFINITY,
            ssim: 1.0,
        };
        let s = serde_json::to_string(&m).unwrap();
        let back: ImageMetrics = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
