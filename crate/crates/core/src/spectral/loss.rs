//! Training-objective terms, evaluated as plain functions (no gradients).

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dft::Fft2;
use crate::coop::{FieldTriple, TsEstimate};
use crate::error::{Error, Result};
use crate::fields::relation_factor;
use crate::sequence::FrameSequence;

/// Weights of the two composite objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Feature (perceptual) term.
    pub lambda1: f64,
    /// Cn²-weighted frequency term.
    pub lambda2: f64,
    /// Physical-consistency term.
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 0.001,
            lambda2: 0.001,
            lambda3: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(name, format!("{v} is negative")));
            }
        }
        Ok(())
    }
}

/// Sum of complex moduli of `F(w⊙rest) − F(w⊙gt)`, averaged over frames.
///
/// The transform is linear, so it is applied once to `w⊙(rest − gt)`.
pub fn loss_cn2(rest: &FrameSequence, gt: &FrameSequence, cn2_up: &Array2<f64>) -> Result<f64> {
    rest.ensure_same_dims(gt, "restored vs ground-truth sequence")?;
    let (h, w) = rest.frame_dims();
    if cn2_up.dim() != (h, w) {
        return Err(Error::mismatch(
            "upsampled Cn² weight",
            &[h, w],
            &[cn2_up.nrows(), cn2_up.ncols()],
        ));
    }
    let plan = Fft2::new(h, w);
    let mut buf = Array2::<Complex64>::zeros((h, w));
    let mut total = 0.0;
    for (r, g) in rest.frames.outer_iter().zip(gt.frames.outer_iter()) {
        Zip::from(&mut buf)
            .and(&r)
            .and(&g)
            .and(cn2_up)
            .for_each(|b, &r, &g, &wt| *b = Complex64::new(wt * (r - g), 0.0));
        plan.forward(&mut buf);
        total += buf.iter().map(|z| z.norm()).sum::<f64>();
    }
    Ok(total / rest.len() as f64)
}

/// How the physical-consistency residual is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicMode {
    /// Mean of `|Cn² − (kP/T²)²·CT²|`.
    #[default]
    Absolute,
    /// Mean of the signed residual; symmetric errors cancel.
    Signed,
}

pub fn loss_physic(cn2: &Array2<f64>, ct2: &Array2<f64>, temp: &Array2<f64>, pressure_hpa: f64) -> Result<f64> {
    loss_physic_with(cn2, ct2, temp, pressure_hpa, PhysicMode::Absolute)
}

pub fn loss_physic_with(
    cn2: &Array2<f64>,
    ct2: &Array2<f64>,
    temp: &Array2<f64>,
    pressure_hpa: f64,
    mode: PhysicMode,
) -> Result<f64> {
    let d = cn2.dim();
    for (name, g) in [("CT² grid", ct2), ("temperature grid", temp)] {
        if g.dim() != d {
            return Err(Error::mismatch(name, &[d.0, d.1], &[g.nrows(), g.ncols()]));
        }
    }
    if cn2.is_empty() {
        return Err(Error::invalid("Cn² grid", "empty"));
    }
    if !(pressure_hpa > 0.0) {
        return Err(Error::Domain(format!("pressure {pressure_hpa} hPa is not positive")));
    }
    if let Some(t) = temp.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::Domain(format!("temperature {t} K is not positive")));
    }
    let mut sum = 0.0;
    Zip::from(cn2).and(ct2).and(temp).for_each(|&n, &c, &t| {
        let r = n - relation_factor(t, pressure_hpa) * c;
        sum += match mode {
            PhysicMode::Absolute => r.abs(),
            PhysicMode::Signed => r,
        };
    });
    Ok(sum / cn2.len() as f64)
}

fn mean_abs_diff(a: &Array2<f64>, b: &Array2<f64>, name: &'static str) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::mismatch(name, &[a.nrows(), a.ncols()], &[b.nrows(), b.ncols()]));
    }
    let s: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / a.len() as f64)
}

/// Sum of the mean absolute errors of CT², T and Cn².
pub fn loss_p<P: FieldTriple + ?Sized, G: FieldTriple + ?Sized>(pred: &P, gt: &G) -> Result<f64> {
    Ok(mean_abs_diff(pred.ct2(), gt.ct2(), "CT² grid")?
        + mean_abs_diff(pred.temp(), gt.temp(), "temperature grid")?
        + mean_abs_diff(pred.cn2(), gt.cn2(), "Cn² grid")?)
}

/// Mean absolute difference over all pixels and frames.
pub fn loss_l1(rest: &FrameSequence, gt: &FrameSequence) -> Result<f64> {
    rest.ensure_same_dims(gt, "restored vs ground-truth sequence")?;
    let s: f64 = rest
        .frames
        .iter()
        .zip(gt.frames.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(s / rest.frames.len() as f64)
}

/// Stand-in for a learned perceptual feature network.
pub trait FeatureExtractor {
    fn extract(&self, seq: &FrameSequence) -> Result<Vec<f64>>;
}

/// Features are the pixels themselves, so the feature loss reduces to L1.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityFeatures;

impl FeatureExtractor for IdentityFeatures {
    fn extract(&self, seq: &FrameSequence) -> Result<Vec<f64>> {
        Ok(seq.frames.iter().copied().collect())
    }
}

pub fn loss_feature(rest: &FrameSequence, gt: &FrameSequence, extractor: &dyn FeatureExtractor) -> Result<f64> {
    rest.ensure_same_dims(gt, "restored vs ground-truth sequence")?;
    let a = extractor.extract(rest)?;
    let b = extractor.extract(gt)?;
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::mismatch("feature vector", &[b.len()], &[a.len()]));
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Every term of both objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l1: f64,
    pub feature: f64,
    pub cn2_frequency: f64,
    pub p: f64,
    pub physic: f64,
    pub restorer_total: f64,
    pub measurer_total: f64,
}

/// Inputs to [`total_losses`].
pub struct LossInputs<'a> {
    pub rest: &'a FrameSequence,
    pub gt: &'a FrameSequence,
    pub cn2_up: &'a Array2<f64>,
    pub estimate: &'a TsEstimate,
    pub gt_field: &'a dyn FieldTriple,
    pub pressure_hpa: f64,
}

/// `L_restorer = L1 + λ1·L_feat + λ2·L_Cn²`, `L_measurer = L_p + λ3·L_physic`.
pub fn total_losses(
    inputs: &LossInputs<'_>,
    weights: &LossWeights,
    extractor: &dyn FeatureExtractor,
) -> Result<LossBreakdown> {
    weights.validate()?;
    let l1 = loss_l1(inputs.rest, inputs.gt)?;
    let feature = loss_feature(inputs.rest, inputs.gt, extractor)?;
    let cn2_frequency = loss_cn2(inputs.rest, inputs.gt, inputs.cn2_up)?;
    let p = loss_p(inputs.estimate, inputs.gt_field)?;
    let e = inputs.estimate;
    let physic = loss_physic(&e.cn2, &e.ct2, &e.temp, inputs.pressure_hpa)?;
    Ok(LossBreakdown {
        l1,
        feature,
        cn2_frequency,
        p,
        physic,
        restorer_total: l1 + weights.lambda1 * feature + weights.lambda2 * cn2_frequency,
        measurer_total: p + weights.lambda3 * physic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coop::InputMode;
    use crate::fields::{generate_field, FieldSpec};
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(data: Array3<f64>) -> FrameSequence {
        FrameSequence::new(data).unwrap()
    }

    fn random_seq(t: usize, h: usize, w: usize, seed: u64) -> FrameSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seq(Array3::from_shape_fn((t, h, w), |_| rng.random::<f64>()))
    }

    fn estimate(cn2: Array2<f64>, ct2: Array2<f64>, temp: Array2<f64>) -> TsEstimate {
        TsEstimate {
            cn2,
            ct2,
            temp,
            mode: InputMode::Single,
            source: "test".into(),
        }
    }

    #[test]
    fn cn2_loss_impulse_case() {
        let gt = seq(Array3::zeros((1, 4, 4)));
        let mut r = Array3::zeros((1, 4, 4));
        r[[0, 0, 0]] = 1.0;
        let rest = seq(r);
        let w = Array2::ones((4, 4));
        let l = loss_cn2(&rest, &gt, &w).unwrap();
        assert!((l - 16.0).abs() < 1e-12);
        assert_eq!(loss_cn2(&gt, &gt, &w).unwrap(), 0.0);
    }

    #[test]
    fn cn2_loss_homogeneous() {
        let a = random_seq(3, 8, 8, 1);
        let b = random_seq(3, 8, 8, 2);
        let w = Array2::from_shape_fn((8, 8), |(r, c)| 1e-12 * (1 + r + c) as f64);
        let base = loss_cn2(&a, &b, &w).unwrap();
        let scaled = loss_cn2(&a, &b, &(&w * 3.7)).unwrap();
        assert!((scaled - 3.7 * base).abs() / scaled < 1e-9);
        assert!(loss_cn2(&a, &b, &Array2::ones((8, 7))).is_err());
    }

    #[test]
    fn physic_loss_cases() {
        let f = generate_field(&FieldSpec {
            grid_w: 9,
            grid_h: 7,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let zero = loss_physic(&f.cn2, &f.ct2, &f.temp, f.pressure_hpa).unwrap();
        assert!(zero <= 1e-18);
        let delta = 2e-13;
        let shifted = f.cn2.mapv(|v| v + delta);
        let l = loss_physic(&shifted, &f.ct2, &f.temp, f.pressure_hpa).unwrap();
        assert!((l - delta).abs() < 1e-24);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noisy = f.cn2.mapv(|v| v + rng.random_range(-1e-12..1e-12));
        let l = loss_physic(&noisy, &f.ct2, &f.temp, f.pressure_hpa).unwrap();
        let mut naive = 0.0;
        for i in 0..7 {
            for j in 0..9 {
                let k = 79e-6 * f.pressure_hpa / (f.temp[[i, j]] * f.temp[[i, j]]);
                naive += (noisy[[i, j]] - k * k * f.ct2[[i, j]]).abs();
            }
        }
        assert!((l - naive / 63.0).abs() <= 1e-9 * l);
        let signed = loss_physic_with(&noisy, &f.ct2, &f.temp, f.pressure_hpa, PhysicMode::Signed).unwrap();
        assert!(signed.abs() <= l);
    }

    #[test]
    fn physic_loss_errors() {
        let g = Array2::zeros((2, 2));
        assert!(loss_physic(&g, &g, &Array2::zeros((2, 2)), 1000.0).is_err());
        assert!(loss_physic(&g, &Array2::zeros((2, 3)), &Array2::ones((2, 2)), 1000.0).is_err());
    }

    #[test]
    fn p_loss_cases() {
        let t = Array2::from_elem((3, 3), 300.0);
        let z = Array2::zeros((3, 3));
        let gt = estimate(z.clone(), z.clone(), t.clone());
        assert_eq!(loss_p(&gt, &gt).unwrap(), 0.0);
        let hot = estimate(z.clone(), z.clone(), t.mapv(|v| v + 1.0));
        assert!((loss_p(&hot, &gt).unwrap() - 1.0).abs() < 1e-12);
        let bad = estimate(Array2::zeros((2, 3)), z.clone(), t.clone());
        assert!(loss_p(&bad, &gt).is_err());
    }

    #[test]
    fn p_loss_random_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = || Array2::from_shape_fn((4, 5), |_| rng.random::<f64>());
        let a = estimate(g(), g(), g());
        let b = estimate(g(), g(), g());
        let mut naive = 0.0;
        for (x, y) in [(&a.ct2, &b.ct2), (&a.temp, &b.temp), (&a.cn2, &b.cn2)] {
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..5 {
                    s += (x[[i, j]] - y[[i, j]]).abs();
                }
            }
            naive += s / 20.0;
        }
        assert!((loss_p(&a, &b).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn l1_cases() {
        let a = random_seq(2, 5, 5, 3);
        assert_eq!(loss_l1(&a, &a).unwrap(), 0.0);
        let b = seq(a.frames.mapv(|v| v + 0.1));
        assert!((loss_l1(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        let c = random_seq(2, 5, 5, 4);
        let naive: f64 = (0..2)
            .flat_map(|t| (0..5).flat_map(move |i| (0..5).map(move |j| (t, i, j))))
            .map(|(t, i, j)| (a.frames[[t, i, j]] - c.frames[[t, i, j]]).abs())
            .sum::<f64>()
            / 50.0;
        assert!((loss_l1(&a, &c).unwrap() - naive).abs() < 1e-12);
        assert!(loss_l1(&a, &random_seq(3, 5, 5, 1)).is_err());
    }

    #[test]
    fn totals() {
        let gt = seq(Array3::zeros((1, 4, 4)));
        let mut r = Array3::zeros((1, 4, 4));
        r[[0, 0, 0]] = 1.0;
        let rest = seq(r);
        let w = Array2::ones((4, 4));
        let t = Array2::from_elem((1, 1), 300.0);
        let z = Array2::zeros((1, 1));
        let est = estimate(z.clone(), z.clone(), t.clone());
        let inputs = LossInputs {
            rest: &rest,
            gt: &gt,
            cn2_up: &w,
            estimate: &est,
            gt_field: &est,
            pressure_hpa: 1000.0,
        };

        let zero = LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
        };
        let l = total_losses(&inputs, &zero, &IdentityFeatures).unwrap();
        assert_eq!(l.restorer_total, l.l1);
        assert_eq!(l.measurer_total, l.p);

        let only_freq = LossWeights {
            lambda1: 0.0,
            lambda2: 0.001,
            lambda3: 0.0,
        };
        let l = total_losses(&inputs, &only_freq, &IdentityFeatures).unwrap();
        assert!((l.restorer_total - l.l1 - 0.016).abs() < 1e-15);

        let d = LossWeights::default();
        let l = total_losses(&inputs, &d, &IdentityFeatures).unwrap();
        assert_eq!(l.feature, l.l1);

        let perfect = LossInputs { rest: &gt, ..inputs };
        let l = total_losses(&perfect, &d, &IdentityFeatures).unwrap();
        assert_eq!((l.restorer_total, l.measurer_total), (0.0, 0.0));
        assert!(LossWeights { lambda1: -1.0, ..d }.validate().is_err());
    }
}
