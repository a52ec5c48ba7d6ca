//! Structure-function measurement against an independent brute-force oracle.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use turbkit::benchmark::BenchmarkSpec;
use turbkit::coop::{InputMode, Measurer, StructureFunctionMeasurer};
use turbkit::radiometry::SensorModel;
use turbkit::FrameSequence;

const PLATE: f64 = 0.01;

/// Gaussian patches with `<[T(x) − T(y)]²> = |x − y|^(2/3)` for every pixel
/// pair (distance in meters), built from an explicit covariance.
struct LawSampler {
    chol: DMatrix<f64>,
    b: usize,
}

impl LawSampler {
    fn new(b: usize) -> Self {
        let n = b * b;
        let sill = 2.0 * ((b as f64) * 2f64.sqrt() * PLATE).powf(2.0 / 3.0);
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let (dy, dx) = ((i / b) as f64 - (j / b) as f64, (i % b) as f64 - (j % b) as f64);
            sill - 0.5 * ((dx * dx + dy * dy).sqrt() * PLATE).powf(2.0 / 3.0)
        });
        LawSampler {
            chol: cov.cholesky().expect("positive definite").l(),
            b,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let z = DVector::from_fn(self.b * self.b, |_, _| StandardNormal.sample(rng));
        let v = &self.chol * z;
        Array2::from_shape_fn((self.b, self.b), |(r, c)| v[r * self.b + c])
    }
}

/// Per block: mean over every in-block pixel pair closer than `max_px` and
/// every frame of `(ΔT)²/(r·plate)^(2/3)`.
fn brute_force_ct2(temp: &Array3<f64>, b: usize, max_px: f64) -> Array2<f64> {
    let (l, h, w) = temp.dim();
    let mut offsets = Vec::new();
    for dy in 0..b as isize {
        for dx in -(b as isize) + 1..b as isize {
            if (dy == 0 && dx <= 0) || ((dx * dx + dy * dy) as f64).sqrt() > max_px {
                continue;
            }
            offsets.push((dy, dx));
        }
    }
    Array2::from_shape_fn((h / b, w / b), |(br, bc)| {
        let (mut sum, mut n) = (0.0, 0usize);
        for t in 0..l {
            for r in 0..b as isize {
                for c in 0..b as isize {
                    for &(dy, dx) in &offsets {
                        let (r2, c2) = (r + dy, c + dx);
                        if r2 >= b as isize || c2 < 0 || c2 >= b as isize {
                            continue;
                        }
                        let a = temp[[t, br * b + r as usize, bc * b + c as usize]];
                        let z = temp[[t, br * b + r2 as usize, bc * b + c2 as usize]];
                        let dist = ((dx * dx + dy * dy) as f64).sqrt() * PLATE;
                        sum += (a - z).powi(2) / dist.powf(2.0 / 3.0);
                        n += 1;
                    }
                }
            }
        }
        sum / n as f64
    })
}

#[test]
fn recovers_engineered_ct2() {
    let (b, gh, gw, frames) = (16, 4, 5, 200);
    let sampler = LawSampler::new(b);
    let truth = Array2::from_shape_fn((gh, gw), |(r, c)| 0.5 + 0.4 * (r * gw + c) as f64);
    let base = Array2::from_shape_fn((gh, gw), |(r, c)| 300.0 + (r + 2 * c) as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut temp = Array3::zeros((frames, gh * b, gw * b));
    for t in 0..frames {
        for br in 0..gh {
            for bc in 0..gw {
                let p = sampler.sample(&mut rng);
                let amp = truth[[br, bc]].sqrt();
                for r in 0..b {
                    for c in 0..b {
                        temp[[t, br * b + r, bc * b + c]] = base[[br, bc]] + amp * p[[r, c]];
                    }
                }
            }
        }
    }
    let oracle = brute_force_ct2(&temp, b, 3.0);
    for (o, t) in oracle.iter().zip(truth.iter()) {
        assert!((o / t - 1.0).abs() < 0.05, "oracle {o} vs {t}");
    }

    let sensor = SensorModel {
        gain: 1e-3,
        offset: 0.0,
        ..SensorModel::default()
    };
    let seq = FrameSequence::new(temp.mapv(|v| sensor.gray(v))).unwrap();
    let est = StructureFunctionMeasurer::default()
        .measure(&seq, None, &sensor)
        .unwrap();
    assert_eq!(est.mode, InputMode::Single);
    for ((e, t), o) in est.ct2.iter().zip(truth.iter()).zip(oracle.iter()) {
        assert!((e / t - 1.0).abs() < 0.10, "estimate {e} vs truth {t}");
        assert!((e / o - 1.0).abs() < 0.10, "estimate {e} vs oracle {o}");
    }
    for (e, t) in est.temp.iter().zip(base.iter()) {
        assert!((e - t).abs() < 0.5, "temp {e} vs {t}");
    }
}

#[test]
fn clean_reference_beats_temporal_mean_under_drift() {
    let spec = BenchmarkSpec::standard();
    let m = StructureFunctionMeasurer::default();
    for case in spec.cases().unwrap() {
        let single = m.measure(&case.turb, None, &case.sensor).unwrap();
        let dual = m.measure(&case.turb, Some(&case.clean), &case.sensor).unwrap();
        assert_eq!(dual.mode, InputMode::Dual);
        let mae = |e: &Array2<f64>| (e - &case.field.ct2).mapv(f64::abs).mean().unwrap();
        assert!(mae(&dual.ct2) < mae(&single.ct2), "seed {}", case.seed);
    }
}
