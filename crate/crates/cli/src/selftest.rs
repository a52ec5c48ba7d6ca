//! Invariant checks run by `turbkit selftest`.

use std::time::Instant;

use ndarray::{Array2, Array3, Array4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use turbkit::coop::{Measurer, MeasurerConfig, StructureFunctionMeasurer};
use turbkit::fields::{generate_field, FieldSpec};
use turbkit::io::{decode, encode, TbtArray};
use turbkit::nnref::{
    ctsa_forward, gfn_forward, transformer_block_forward, BlockWeights, CtsaWeights, GfnWeights, Reconstruct3dConfig,
    Reconstructor3d, Tensor4,
};
use turbkit::optics::{make_phase_screen, split_step, ComplexField, PhaseScreen, ThermalSynth};
use turbkit::radiometry::SensorModel;
use turbkit::spectral::{dft2, idft2, loss_physic};
use turbkit::FrameSequence;

/// Faults that can be seeded to confirm the suite catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Scale the forward DFT by `1/√(MN)` as if it were unitary.
    DftNormalization,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(Option<Fault>) -> (bool, String);

const CHECKS: &[(&str, Check)] = &[
    ("parseval", parseval),
    ("dft_round_trip", dft_round_trip),
    ("energy_conservation", energy_conservation),
    ("beam_width", beam_width),
    ("cn2_ct2_relation", relation),
    ("structure_function_oracle", structure_oracle),
    ("residual_identities", residual_identities),
    ("tbt_round_trip", tbt_round_trip),
];

pub fn run(fault: Option<Fault>) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let t = Instant::now();
            let (passed, detail) = check(fault);
            CheckResult {
                name,
                passed,
                detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn parseval(fault: Option<Fault>) -> (bool, String) {
    let mut r = rng(1);
    let (m, n) = (16, 24);
    let x = Array2::from_shape_fn((m, n), |_| r.sample::<f64, _>(StandardNormal));
    let mut spec = match dft2(&x) {
        Ok(s) => s.data,
        Err(e) => return (false, e.to_string()),
    };
    if fault == Some(Fault::DftNormalization) {
        let s = 1.0 / ((m * n) as f64).sqrt();
        spec.mapv_inplace(|z: Complex64| z * s);
    }
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let spectral: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / (m * n) as f64;
    let err = rel(spectral, energy);
    (err < 1e-9, format!("relative error {err:.2e}"))
}

fn dft_round_trip(_: Option<Fault>) -> (bool, String) {
    let mut r = rng(2);
    let x = Array2::from_shape_fn((12, 20), |_| r.random::<f64>());
    let back = dft2(&x).and_then(|s| idft2(&s));
    match back {
        Ok(b) => {
            let err = b
                .iter()
                .zip(x.iter())
                .map(|(z, v)| (z.re - v).abs().max(z.im.abs()))
                .fold(0.0, f64::max);
            (err < 1e-12, format!("max error {err:.2e}"))
        }
        Err(e) => (false, e.to_string()),
    }
}

fn energy_conservation(_: Option<Fault>) -> (bool, String) {
    let run = || -> turbkit::Result<f64> {
        let beam = ComplexField::gaussian_beam(64, 2e-3, 0.02, 10e-6)?;
        let mut worst = 0.0f64;
        for seed in 0..5 {
            let screen = make_phase_screen(0.05, (64, 64), 2e-3, seed)?;
            let out = split_step(&beam, &screen, 100.0)?;
            worst = worst.max(rel(out.power(), beam.power()));
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => (w < 1e-6, format!("worst relative power change {w:.2e}")),
        Err(e) => (false, e.to_string()),
    }
}

fn beam_width(_: Option<Fault>) -> (bool, String) {
    let (n, dx, w0, lambda, z) = (256, 1e-3, 0.02, 10e-6, 125.0);
    let run = || -> turbkit::Result<f64> {
        let beam = ComplexField::gaussian_beam(n, dx, w0, lambda)?;
        let out = split_step(&beam, &PhaseScreen::flat(n, n, dx), z)?;
        let zr = std::f64::consts::PI * w0 * w0 / lambda;
        Ok(rel(out.second_moment_radius(), w0 * (1.0 + (z / zr).powi(2)).sqrt()))
    };
    match run() {
        Ok(e) => (e < 0.01, format!("width error {:.3}%", 100.0 * e)),
        Err(e) => (false, e.to_string()),
    }
}

fn relation(_: Option<Fault>) -> (bool, String) {
    let run = || -> turbkit::Result<(f64, f64)> {
        let f = generate_field(&FieldSpec {
            seed: 7,
            ..FieldSpec::default()
        })?;
        Ok((
            f.max_relation_residual(),
            loss_physic(&f.cn2, &f.ct2, &f.temp, f.pressure_hpa)?,
        ))
    };
    match run() {
        Ok((res, loss)) => (
            res <= 1e-18 && loss <= 1e-18,
            format!("residual {res:.1e}, physic loss {loss:.1e}"),
        ),
        Err(e) => (false, e.to_string()),
    }
}

/// Brute-force mean of `(ΔT)²/(r·plate)^(2/3)` over in-block pairs closer
/// than 3 px, against the estimator on the same data.
fn structure_oracle(_: Option<Fault>) -> (bool, String) {
    let (b, gh, gw, frames, plate) = (8usize, 2usize, 2usize, 160usize, 0.01);
    let run = || -> turbkit::Result<f64> {
        let synth = ThermalSynth::new(b, plate)?;
        let truth: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
        let mut r = rng(3);
        let mut temp = Array3::<f64>::from_elem((frames, gh * b, gw * b), 300.0);
        for t in 0..frames {
            for (k, ct2) in truth.iter().enumerate() {
                let p = synth.sample(&mut r);
                let (br, bc) = (k / gw, k % gw);
                for y in 0..b {
                    for x in 0..b {
                        temp[[t, br * b + y, bc * b + x]] += ct2.sqrt() * p[[y, x]];
                    }
                }
            }
        }
        let mut fluct = temp.clone();
        let mean = temp.mean_axis(ndarray::Axis(0)).expect("frames");
        for mut f in fluct.outer_iter_mut() {
            f -= &mean;
        }
        let sensor = SensorModel {
            gain: 1e-3,
            offset: 0.0,
            ..SensorModel::default()
        };
        let seq = FrameSequence::new(temp.mapv(|v| sensor.gray(v)))?;
        let cfg = MeasurerConfig {
            block_size_px: b,
            plate_scale_m_per_px: plate,
            ..MeasurerConfig::default()
        };
        let est = StructureFunctionMeasurer::new(cfg)?.measure(&seq, None, &sensor)?;
        let mut worst = 0.0f64;
        for k in 0..gh * gw {
            let (br, bc) = (k / gw, k % gw);
            let (mut sum, mut count) = (0.0, 0usize);
            for t in 0..frames {
                for y in 0..b as isize {
                    for x in 0..b as isize {
                        for dy in 0..=3isize {
                            for dx in -3..=3isize {
                                let d2 = dx * dx + dy * dy;
                                if (dy == 0 && dx <= 0) || d2 > 9 {
                                    continue;
                                }
                                let (y2, x2) = (y + dy, x + dx);
                                if y2 >= b as isize || x2 < 0 || x2 >= b as isize {
                                    continue;
                                }
                                let at = |yy: isize, xx: isize| fluct[[t, br * b + yy as usize, bc * b + xx as usize]];
                                let dist = (d2 as f64).sqrt() * plate;
                                sum += (at(y, x) - at(y2, x2)).powi(2) / dist.powf(2.0 / 3.0);
                                count += 1;
                            }
                        }
                    }
                }
            }
            worst = worst.max(rel(est.ct2[[br, bc]], sum / count as f64));
        }
        Ok(worst)
    };
    match run() {
        Ok(w) => (w < 0.1, format!("worst deviation from oracle {:.1}%", 100.0 * w)),
        Err(e) => (false, e.to_string()),
    }
}

fn residual_identities(_: Option<Fault>) -> (bool, String) {
    let run = || -> turbkit::Result<Vec<&'static str>> {
        let mut r = rng(4);
        let x = Tensor4::new(Array4::from_shape_fn((2, 8, 6, 6), |_| {
            r.sample::<f32, _>(StandardNormal)
        }))?;
        let mut failed = Vec::new();
        if ctsa_forward(&x, &CtsaWeights::zeros(8, 2))?
            .data
            .iter()
            .any(|&v| v != 0.0)
        {
            failed.push("ctsa");
        }
        if gfn_forward(&x, &GfnWeights::zeros(8, 16))? != x {
            failed.push("gfn");
        }
        if transformer_block_forward(&x, &BlockWeights::zeros(8, 2))? != x {
            failed.push("block");
        }
        let seq = Tensor4::new(Array4::from_shape_fn((15, 1, 8, 8), |_| r.random::<f32>()))?;
        let out = Reconstructor3d::zeros(Reconstruct3dConfig::default())?.forward(&seq)?;
        let centered = (0..out.len()).all(|j| {
            out.frame(j)
                .iter()
                .zip(seq.frame(j + 2).iter())
                .all(|(a, b)| *a == f64::from(*b))
        });
        if out.len() != 11 || !centered {
            failed.push("reconstruct3d");
        }
        Ok(failed)
    };
    match run() {
        Ok(f) if f.is_empty() => (true, "ctsa, gfn, block, reconstruct3d".into()),
        Ok(f) => (false, format!("failed: {}", f.join(", "))),
        Err(e) => (false, e.to_string()),
    }
}

fn tbt_round_trip(_: Option<Fault>) -> (bool, String) {
    let mut r = rng(5);
    let a = TbtArray::F64(ndarray::ArrayD::from_shape_fn(vec![3, 4, 5], |_| {
        r.sample(StandardNormal)
    }));
    let mut bytes = encode(&a);
    let ok = decode(&bytes).map(|b| b == a).unwrap_or(false);
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    let caught = decode(&bytes).is_err();
    (
        ok && caught,
        format!("round trip {}, corruption detected {}", ok, caught),
    )
}
