//! Block-resolution turbulence-strength fields.
//!
//! A [`TurbulenceField`] holds co-registered Cn², CT² and temperature grids,
//! one value per `block_size_px × block_size_px` image block. Cn² and CT² are
//! tied by `Cn² = (k·P/T²)²·CT²` with `k = 79e-6`, pressure `P` in hPa and
//! temperature `T` in kelvin.

use ndarray::{Array2, Zip};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Fixed physical constants.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants;

impl PhysicalConstants {
    /// Coefficient of the Cn²/CT² relation, for P in hPa and T in K.
    pub const K: f64 = 79e-6;
    /// W·m⁻²·K⁻⁴
    pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;
}

pub const DEFAULT_PRESSURE_HPA: f64 = 1013.25;
pub const DEFAULT_BLOCK_SIZE_PX: usize = 16;
pub const DEFAULT_PLATE_SCALE_M_PER_PX: f64 = 0.01;
/// Upper end of the dataset's Cn² sampling range, m^(-2/3).
pub const CN2_RANGE_MAX: f64 = 6e-12;
pub const TEMP_RANGE_MIN: f64 = 298.15;
pub const TEMP_RANGE_MAX: f64 = 320.0;

/// Parameters for [`generate_field`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSpec {
    pub grid_w: usize,
    pub grid_h: usize,
    pub cn2_min: f64,
    pub cn2_max: f64,
    pub temp_min: f64,
    pub temp_max: f64,
    pub pressure_hpa: f64,
    pub block_size_px: usize,
    pub plate_scale_m_per_px: f64,
    pub seed: u64,
}

impl Default for FieldSpec {
    /// 640×480 frames in 16-pixel blocks.
    fn default() -> Self {
        FieldSpec {
            grid_w: 40,
            grid_h: 30,
            cn2_min: 0.0,
            cn2_max: CN2_RANGE_MAX,
            temp_min: TEMP_RANGE_MIN,
            temp_max: TEMP_RANGE_MAX,
            pressure_hpa: DEFAULT_PRESSURE_HPA,
            block_size_px: DEFAULT_BLOCK_SIZE_PX,
            plate_scale_m_per_px: DEFAULT_PLATE_SCALE_M_PER_PX,
            seed: 0,
        }
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_w == 0 || self.grid_h == 0 {
            return Err(Error::invalid("grid_w/grid_h", "grid must be at least 1×1"));
        }
        if !(self.cn2_min >= 0.0) {
            return Err(Error::invalid("cn2_min", format!("{} is negative", self.cn2_min)));
        }
        if !(self.cn2_max >= self.cn2_min) {
            return Err(Error::invalid(
                "cn2_max",
                format!("{} is below cn2_min {}", self.cn2_max, self.cn2_min),
            ));
        }
        if !(self.temp_min > 0.0) {
            return Err(Error::invalid(
                "temp_min",
                format!("{} K is not positive", self.temp_min),
            ));
        }
        if !(self.temp_max >= self.temp_min) {
            return Err(Error::invalid(
                "temp_max",
                format!("{} is below temp_min {}", self.temp_max, self.temp_min),
            ));
        }
        if !(self.pressure_hpa > 0.0) {
            return Err(Error::invalid("pressure_hpa", "must be positive"));
        }
        if self.block_size_px == 0 {
            return Err(Error::invalid("block_size_px", "must be at least 1"));
        }
        if !(self.plate_scale_m_per_px > 0.0) {
            return Err(Error::invalid("plate_scale_m_per_px", "must be positive"));
        }
        Ok(())
    }
}

/// Co-registered Cn², CT² and temperature grids at block resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceField {
    /// m^(-2/3), indexed `(block_row, block_col)`.
    pub cn2: Array2<f64>,
    /// K²·m^(-2/3)
    pub ct2: Array2<f64>,
    /// K
    pub temp: Array2<f64>,
    pub block_size_px: usize,
    pub pressure_hpa: f64,
    pub plate_scale_m_per_px: f64,
    /// Generating seed, if the field came from [`generate_field`].
    pub seed: Option<u64>,
}

/// Metadata written next to the three field tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMetadata {
    pub block_size_px: usize,
    pub pressure_hpa: f64,
    pub plate_scale_m_per_px: f64,
    pub seed: Option<u64>,
}

impl TurbulenceField {
    /// Assemble a field from explicit grids, checking every invariant.
    pub fn new(
        cn2: Array2<f64>,
        ct2: Array2<f64>,
        temp: Array2<f64>,
        block_size_px: usize,
        pressure_hpa: f64,
        plate_scale_m_per_px: f64,
    ) -> Result<Self> {
        let field = TurbulenceField {
            cn2,
            ct2,
            temp,
            block_size_px,
            pressure_hpa,
            plate_scale_m_per_px,
            seed: None,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.cn2.dim();
        for (name, g) in [("ct2", &self.ct2), ("temp", &self.temp)] {
            if g.dim() != dims {
                return Err(Error::mismatch(name, &[dims.0, dims.1], &[g.nrows(), g.ncols()]));
            }
        }
        if self.cn2.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("cn2", "entries must be finite and non-negative"));
        }
        if self.ct2.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("ct2", "entries must be finite and non-negative"));
        }
        if self.temp.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("temp", "entries must be finite and positive"));
        }
        if self.block_size_px == 0 {
            return Err(Error::invalid("block_size_px", "must be at least 1"));
        }
        if !(self.pressure_hpa > 0.0) {
            return Err(Error::invalid("pressure_hpa", "must be positive"));
        }
        if !(self.plate_scale_m_per_px > 0.0) {
            return Err(Error::invalid("plate_scale_m_per_px", "must be positive"));
        }
        Ok(())
    }

    /// `(grid_h, grid_w)`
    pub fn grid_dims(&self) -> (usize, usize) {
        self.cn2.dim()
    }

    /// `(height_px, width_px)` of images this field covers.
    pub fn pixel_dims(&self) -> (usize, usize) {
        let (h, w) = self.grid_dims();
        (h * self.block_size_px, w * self.block_size_px)
    }

    pub fn metadata(&self) -> FieldMetadata {
        FieldMetadata {
            block_size_px: self.block_size_px,
            pressure_hpa: self.pressure_hpa,
            plate_scale_m_per_px: self.plate_scale_m_per_px,
            seed: self.seed,
        }
    }

    /// Largest entrywise violation of the Cn²/CT² relation.
    pub fn max_relation_residual(&self) -> f64 {
        let p = self.pressure_hpa;
        let mut worst = 0.0f64;
        Zip::from(&self.cn2)
            .and(&self.ct2)
            .and(&self.temp)
            .for_each(|&cn2, &ct2, &t| {
                worst = worst.max((cn2 - relation_factor(t, p) * ct2).abs());
            });
        worst
    }
}

/// `(k·P/T²)²`, the CT²→Cn² multiplier.
#[inline]
pub fn relation_factor(temp_k: f64, pressure_hpa: f64) -> f64 {
    let a = PhysicalConstants::K * pressure_hpa / (temp_k * temp_k);
    a * a
}

fn check_relation_inputs(temp_k: f64, pressure_hpa: f64) -> Result<()> {
    if !(temp_k > 0.0) {
        return Err(Error::Domain(format!("temperature {temp_k} K is not positive")));
    }
    if !(pressure_hpa > 0.0) {
        return Err(Error::Domain(format!("pressure {pressure_hpa} hPa is not positive")));
    }
    Ok(())
}

pub fn cn2_from_ct2(ct2: f64, temp_k: f64, pressure_hpa: f64) -> Result<f64> {
    check_relation_inputs(temp_k, pressure_hpa)?;
    if !(ct2 >= 0.0) {
        return Err(Error::Domain(format!("CT² {ct2} is negative")));
    }
    Ok(relation_factor(temp_k, pressure_hpa) * ct2)
}

pub fn ct2_from_cn2(cn2: f64, temp_k: f64, pressure_hpa: f64) -> Result<f64> {
    check_relation_inputs(temp_k, pressure_hpa)?;
    if !(cn2 >= 0.0) {
        return Err(Error::Domain(format!("Cn² {cn2} is negative")));
    }
    Ok(cn2 / relation_factor(temp_k, pressure_hpa))
}

fn zip_grids(
    a: &Array2<f64>,
    temp: &Array2<f64>,
    pressure_hpa: f64,
    f: fn(f64, f64, f64) -> Result<f64>,
) -> Result<Array2<f64>> {
    if a.dim() != temp.dim() {
        return Err(Error::mismatch(
            "temperature grid",
            &[a.nrows(), a.ncols()],
            &[temp.nrows(), temp.ncols()],
        ));
    }
    let mut out = Array2::zeros(a.dim());
    for ((o, &x), &t) in out.iter_mut().zip(a.iter()).zip(temp.iter()) {
        *o = f(x, t, pressure_hpa)?;
    }
    Ok(out)
}

/// Entrywise [`cn2_from_ct2`].
pub fn cn2_from_ct2_grid(ct2: &Array2<f64>, temp: &Array2<f64>, pressure_hpa: f64) -> Result<Array2<f64>> {
    zip_grids(ct2, temp, pressure_hpa, cn2_from_ct2)
}

/// Entrywise [`ct2_from_cn2`].
pub fn ct2_from_cn2_grid(cn2: &Array2<f64>, temp: &Array2<f64>, pressure_hpa: f64) -> Result<Array2<f64>> {
    zip_grids(cn2, temp, pressure_hpa, ct2_from_cn2)
}

/// Sample a field: Cn² and T i.i.d. uniform per block, CT² from the exact
/// inverse of the Cn²/CT² relation.
///
/// Each block draws from its own generator seeded by `(seed, block index)`,
/// so the result does not depend on how many threads run it.
pub fn generate_field(spec: &FieldSpec) -> Result<TurbulenceField> {
    spec.validate()?;
    let (gh, gw) = (spec.grid_h, spec.grid_w);
    let samples: Vec<(f64, f64, f64)> = (0..gh * gw)
        .into_par_iter()
        .map(|idx| {
            let mut rng = rng_for(spec.seed, &[idx as u64]);
            let cn2 = sample_closed(&mut rng, spec.cn2_min, spec.cn2_max);
            let temp = sample_closed(&mut rng, spec.temp_min, spec.temp_max);
            let ct2 = cn2 / relation_factor(temp, spec.pressure_hpa);
            (cn2, ct2, temp)
        })
        .collect();

    let cn2 = Array2::from_shape_fn((gh, gw), |(r, c)| samples[r * gw + c].0);
    let ct2 = Array2::from_shape_fn((gh, gw), |(r, c)| samples[r * gw + c].1);
    let temp = Array2::from_shape_fn((gh, gw), |(r, c)| samples[r * gw + c].2);
    Ok(TurbulenceField {
        cn2,
        ct2,
        temp,
        block_size_px: spec.block_size_px,
        pressure_hpa: spec.pressure_hpa,
        plate_scale_m_per_px: spec.plate_scale_m_per_px,
        seed: Some(spec.seed),
    })
}

fn sample_closed<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Block-grid dimensions `(grid_w, grid_h)` for an image.
pub fn blocks_for_image(width_px: usize, height_px: usize, block_size_px: usize) -> Result<(usize, usize)> {
    if block_size_px == 0 {
        return Err(Error::invalid("block_size_px", "must be at least 1"));
    }
    if !width_px.is_multiple_of(block_size_px) || !height_px.is_multiple_of(block_size_px) {
        return Err(Error::invalid(
            "image size",
            format!(
                "{width_px}×{height_px} is not divisible by block size {block_size_px}; crop or pad the image first"
            ),
        ));
    }
    Ok((width_px / block_size_px, height_px / block_size_px))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Upsampling {
    /// Block replication; keeps the block-constant structure exactly.
    #[default]
    Nearest,
    /// Bilinear interpolation between block centers, clamped at the borders.
    Bilinear,
}

pub fn upsample_field(grid: &Array2<f64>, factor: usize) -> Result<Array2<f64>> {
    upsample_field_with(grid, factor, Upsampling::Nearest)
}

pub fn upsample_field_with(grid: &Array2<f64>, factor: usize, mode: Upsampling) -> Result<Array2<f64>> {
    if factor < 1 {
        return Err(Error::invalid("upsampling factor", "must be at least 1"));
    }
    let (h, w) = grid.dim();
    let out = match mode {
        Upsampling::Nearest => Array2::from_shape_fn((h * factor, w * factor), |(r, c)| grid[[r / factor, c / factor]]),
        Upsampling::Bilinear => {
            let f = factor as f64;
            let coord = |i: usize, n: usize| {
                let x = ((i as f64 + 0.5) / f - 0.5).clamp(0.0, (n - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(n - 1);
                (i0, i1, x - i0 as f64)
            };
            Array2::from_shape_fn((h * factor, w * factor), |(r, c)| {
                let (r0, r1, fy) = coord(r, h);
                let (c0, c1, fx) = coord(c, w);
                let top = grid[[r0, c0]] * (1.0 - fx) + grid[[r0, c1]] * fx;
                let bot = grid[[r1, c0]] * (1.0 - fx) + grid[[r1, c1]] * fx;
                top * (1.0 - fy) + bot * fy
            })
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(w: usize, h: usize, seed: u64) -> FieldSpec {
        FieldSpec {
            grid_w: w,
            grid_h: h,
            seed,
            ..FieldSpec::default()
        }
    }

    #[test]
    fn generated_field_respects_ranges() {
        let f = generate_field(&spec(40, 30, 7)).unwrap();
        assert_eq!(f.grid_dims(), (30, 40));
        assert!(f.cn2.iter().all(|&v| (0.0..=6e-12).contains(&v)));
        assert!(f.temp.iter().all(|&v| (298.15..=320.0).contains(&v)));
        assert!(f.max_relation_residual() <= 1e-18);
        f.validate().unwrap();
    }

    #[test]
    fn zero_turbulence_gives_zero_constants() {
        let s = FieldSpec {
            cn2_max: 0.0,
            ..spec(8, 6, 1)
        };
        let f = generate_field(&s).unwrap();
        assert!(f.cn2.iter().all(|&v| v == 0.0));
        assert!(f.ct2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_field(&spec(40, 30, 99)).unwrap();
        let b = generate_field(&spec(40, 30, 99)).unwrap();
        assert_eq!(a, b);
        let c = generate_field(&spec(40, 30, 100)).unwrap();
        assert_ne!(a.cn2, c.cn2);
    }

    #[test]
    fn generation_ignores_thread_count() {
        let s = spec(40, 30, 5);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_field(&s)).unwrap();
        let b = four.install(|| generate_field(&s)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_sampling_mean() {
        let f = generate_field(&spec(400, 250, 3)).unwrap();
        let mean = f.cn2.mean().unwrap();
        assert!((mean - 3e-12).abs() / 3e-12 < 0.01, "mean {mean}");
    }

    #[test]
    fn invalid_spec_names_bound() {
        let err = generate_field(&FieldSpec {
            cn2_min: 1e-12,
            cn2_max: 1e-13,
            ..FieldSpec::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("cn2_max"), "{err}");
        let err = generate_field(&FieldSpec {
            temp_min: 0.0,
            ..FieldSpec::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("temp_min"), "{err}");
    }

    #[test]
    fn block_counts() {
        assert_eq!(blocks_for_image(640, 480, 16).unwrap(), (40, 30));
        assert_eq!(blocks_for_image(16, 16, 16).unwrap(), (1, 1));
        let err = blocks_for_image(630, 480, 16).unwrap_err();
        assert!(err.to_string().contains("crop or pad"));
    }

    #[test]
    fn upsample_shapes_and_identity() {
        let g = Array2::from_shape_fn((30, 40), |(r, c)| (r * 40 + c) as f64);
        let up = upsample_field(&g, 16).unwrap();
        assert_eq!(up.dim(), (480, 640));
        assert_eq!(up[[17, 33]], g[[1, 2]]);
        assert_eq!(upsample_field(&g, 1).unwrap(), g);
        assert!(upsample_field(&g, 0).is_err());
        let c = Array2::from_elem((3, 2), 2.5);
        assert!(upsample_field(&c, 4).unwrap().iter().all(|&v| v == 2.5));
        assert!(upsample_field_with(&c, 4, Upsampling::Bilinear)
            .unwrap()
            .iter()
            .all(|&v| v == 2.5));
    }

    #[test]
    fn relation_hand_value() {
        assert_eq!(cn2_from_ct2(0.0, 300.0, 1000.0).unwrap(), 0.0);
        let v = cn2_from_ct2(1.0, 300.0, 1000.0).unwrap();
        assert!((v - 7.704938271604938e-13).abs() / v < 1e-12);
        let x = 3e-12;
        let rt = cn2_from_ct2(ct2_from_cn2(x, 310.0, 1013.25).unwrap(), 310.0, 1013.25).unwrap();
        assert!((rt - x).abs() / x < 1e-12);
        assert!(matches!(cn2_from_ct2(1.0, 0.0, 1000.0), Err(Error::Domain(_))));
        assert!(matches!(ct2_from_cn2(1.0, -5.0, 1000.0), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_relation_mismatch() {
        let a = Array2::zeros((2, 2));
        let t = Array2::from_elem((2, 3), 300.0);
        assert!(cn2_from_ct2_grid(&a, &t, 1000.0).is_err());
    }

    #[test]
    fn new_field_checks_invariants() {
        let z = Array2::<f64>::zeros((2, 2));
        let t = Array2::from_elem((2, 2), 300.0);
        assert!(TurbulenceField::new(z.clone(), z.clone(), t.clone(), 16, 1000.0, 0.01).is_ok());
        assert!(TurbulenceField::new(z.clone(), z.clone(), z.clone(), 16, 1000.0, 0.01).is_err());
        assert!(TurbulenceField::new(z.clone(), z.clone(), t.clone(), 0, 1000.0, 0.01).is_err());
        let neg = Array2::from_elem((2, 2), -1.0);
        assert!(TurbulenceField::new(neg, z, t, 16, 1000.0, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn nearest_upsampling_composes(a in 1usize..5, b in 1usize..5, seed in any::<u64>()) {
            let f = generate_field(&spec(3, 2, seed)).unwrap();
            let direct = upsample_field(&f.cn2, a * b).unwrap();
            let nested = upsample_field(&upsample_field(&f.cn2, a).unwrap(), b).unwrap();
            prop_assert_eq!(direct, nested);
        }

        #[test]
        fn relation_round_trip(ct2 in 0.0f64..100.0, t in 200.0f64..400.0, p in 500.0f64..1100.0) {
            let cn2 = cn2_from_ct2(ct2, t, p).unwrap();
            let back = ct2_from_cn2(cn2, t, p).unwrap();
            prop_assert!((back - ct2).abs() <= 1e-12 * ct2.max(1e-300));
        }
    }
}
