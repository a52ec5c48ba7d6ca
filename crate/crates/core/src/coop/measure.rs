//! Structure-function turbulence measurement from thermal frames.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::{InputMode, TsEstimate};
use crate::error::{Error, Result};
use crate::fields::{relation_factor, DEFAULT_BLOCK_SIZE_PX, DEFAULT_PLATE_SCALE_M_PER_PX, DEFAULT_PRESSURE_HPA};
use crate::radiometry::SensorModel;
use crate::sequence::FrameSequence;

/// Measures turbulence strength from a sequence, optionally against a reference.
pub trait Measurer: Send + Sync {
    /// `reference == None` is single mode; the implementation builds its own
    /// reference from the input.
    fn measure(
        &self,
        turb: &FrameSequence,
        reference: Option<&FrameSequence>,
        sensor: &SensorModel,
    ) -> Result<TsEstimate>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurerConfig {
    pub block_size_px: usize,
    pub plate_scale_m_per_px: f64,
    pub pressure_hpa: f64,
    /// Pixel separations averaged into the CT² estimate.
    pub d_set: Vec<usize>,
}

impl Default for MeasurerConfig {
    fn default() -> Self {
        MeasurerConfig {
            block_size_px: DEFAULT_BLOCK_SIZE_PX,
            plate_scale_m_per_px: DEFAULT_PLATE_SCALE_M_PER_PX,
            pressure_hpa: DEFAULT_PRESSURE_HPA,
            d_set: vec![1, 2, 3],
        }
    }
}

impl MeasurerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size_px < 2 {
            return Err(Error::invalid("block_size_px", "must be at least 2"));
        }
        if !(self.plate_scale_m_per_px > 0.0) {
            return Err(Error::invalid("plate_scale_m_per_px", "must be positive"));
        }
        if !(self.pressure_hpa > 0.0) {
            return Err(Error::invalid("pressure_hpa", "must be positive"));
        }
        if self.d_set.is_empty() {
            return Err(Error::invalid("d_set", "must not be empty"));
        }
        if let Some(&d) = self.d_set.iter().find(|&&d| d == 0 || d >= self.block_size_px) {
            return Err(Error::invalid(
                "d_set",
                format!("separation {d} must be in 1..{}", self.block_size_px),
            ));
        }
        Ok(())
    }
}

/// Per-block structure functions behind one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureDetail {
    pub estimate: TsEstimate,
    /// `D(d)` in K², indexed `(d index, block row, block col)`.
    pub structure: Array3<f64>,
    /// Mean over blocks of the fitted log-log exponent of `D(d)`; expected
    /// near 2/3. `None` with fewer than two separations or no signal.
    pub slope: Option<f64>,
}

/// Classical measurer: CT² from the mean squared temperature increment
/// `<[T(x) − T(x+d)]²>·d^(-2/3)` over in-block pixel pairs and time, T from
/// the reference, Cn² from the Cn²/CT² relation.
#[derive(Debug, Clone, Default)]
pub struct StructureFunctionMeasurer {
    pub config: MeasurerConfig,
}

impl StructureFunctionMeasurer {
    pub fn new(config: MeasurerConfig) -> Result<Self> {
        config.validate()?;
        Ok(StructureFunctionMeasurer { config })
    }

    /// Pair input frames with reference frames.
    ///
    /// A reference of `L − 4` frames (a restoration) is aligned with input
    /// frames `2..L−2`; a single-frame reference is broadcast.
    fn align<'a>(turb: &'a FrameSequence, reference: &'a FrameSequence) -> Result<Vec<(usize, usize)>> {
        if reference.frame_dims() != turb.frame_dims() {
            let (h, w) = turb.frame_dims();
            let (rh, rw) = reference.frame_dims();
            return Err(Error::mismatch("reference frame dimensions", &[h, w], &[rh, rw]));
        }
        let (l, rl) = (turb.len(), reference.len());
        if rl == l {
            Ok((0..l).map(|t| (t, t)).collect())
        } else if rl == 1 {
            Ok((0..l).map(|t| (t, 0)).collect())
        } else if l >= 5 && rl == l - 4 {
            Ok((0..rl).map(|j| (j + 2, j)).collect())
        } else {
            Err(Error::mismatch("reference frame count", &[l], &[rl]))
        }
    }

    pub fn measure_detailed(
        &self,
        turb: &FrameSequence,
        reference: Option<&FrameSequence>,
        sensor: &SensorModel,
    ) -> Result<StructureDetail> {
        let cfg = &self.config;
        cfg.validate()?;
        sensor.validate()?;
        if turb.len() < 2 {
            return Err(Error::invalid(
                "input sequence",
                format!("{} frame(s); at least 2 are required", turb.len()),
            ));
        }
        let (h, w) = turb.frame_dims();
        let b = cfg.block_size_px;
        if h % b != 0 || w % b != 0 {
            return Err(Error::invalid(
                "frame size",
                format!("{w}×{h} is not divisible by block size {b}"),
            ));
        }

        let pooled;
        let (reference, mode) = match reference {
            Some(r) => (r, InputMode::Dual),
            None => {
                pooled = FrameSequence::new(turb.temporal_mean().insert_axis(Axis(0)))?;
                (&pooled, InputMode::Single)
            }
        };
        let pairs = Self::align(turb, reference)?;
        let to_temp = |g: f64| sensor.temp(g);

        let fluct: Vec<Array2<f64>> = pairs
            .iter()
            .map(|&(t, r)| {
                let mut f = turb.frame(t).mapv(to_temp);
                f -= &reference.frame(r).mapv(to_temp);
                f
            })
            .collect();
        let mut ref_ids: Vec<usize> = pairs.iter().map(|&(_, r)| r).collect();
        ref_ids.dedup();

        let (gh, gw) = (h / b, w / b);
        let nd = cfg.d_set.len();
        let per_block: Vec<(Vec<f64>, f64)> = (0..gh * gw)
            .into_par_iter()
            .map(|idx| {
                let (r0, c0) = ((idx / gw) * b, (idx % gw) * b);
                let structure = cfg
                    .d_set
                    .iter()
                    .map(|&d| {
                        let mut sum = 0.0;
                        let mut n = 0usize;
                        for f in &fluct {
                            for r in r0..r0 + b {
                                for c in c0..c0 + b {
                                    if c + d < c0 + b {
                                        sum += (f[[r, c]] - f[[r, c + d]]).powi(2);
                                        n += 1;
                                    }
                                    if r + d < r0 + b {
                                        sum += (f[[r, c]] - f[[r + d, c]]).powi(2);
                                        n += 1;
                                    }
                                }
                            }
                        }
                        sum / n as f64
                    })
                    .collect::<Vec<f64>>();
                let mut tsum = 0.0;
                for &rid in &ref_ids {
                    let frame = reference.frame(rid);
                    for r in r0..r0 + b {
                        for c in c0..c0 + b {
                            tsum += to_temp(frame[[r, c]]);
                        }
                    }
                }
                (structure, tsum / (ref_ids.len() * b * b) as f64)
            })
            .collect();

        let mut structure = Array3::zeros((nd, gh, gw));
        let mut ct2 = Array2::zeros((gh, gw));
        let mut temp = Array2::zeros((gh, gw));
        let mut slopes = Vec::new();
        for (idx, (ds, t)) in per_block.iter().enumerate() {
            let (br, bc) = (idx / gw, idx % gw);
            let mut acc = 0.0;
            for (k, (&d, &dv)) in cfg.d_set.iter().zip(ds.iter()).enumerate() {
                structure[[k, br, bc]] = dv;
                acc += dv * (d as f64 * cfg.plate_scale_m_per_px).powf(-2.0 / 3.0);
            }
            ct2[[br, bc]] = acc / nd as f64;
            temp[[br, bc]] = *t;
            if let Some(s) = loglog_slope(&cfg.d_set, ds) {
                slopes.push(s);
            }
        }
        if let Some(bad) = temp.iter().find(|&&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::Domain(format!(
                "reference maps to a nonphysical temperature ({bad} K); check the sensor model"
            )));
        }
        let cn2 = Array2::from_shape_fn((gh, gw), |idx| relation_factor(temp[idx], cfg.pressure_hpa) * ct2[idx]);
        let slope = if slopes.is_empty() {
            None
        } else {
            Some(slopes.iter().sum::<f64>() / slopes.len() as f64)
        };
        Ok(StructureDetail {
            estimate: TsEstimate {
                cn2,
                ct2,
                temp,
                mode,
                source: self.name().to_string(),
            },
            structure,
            slope,
        })
    }
}

/// Least-squares slope of `ln D` against `ln d`.
fn loglog_slope(ds: &[usize], values: &[f64]) -> Option<f64> {
    if ds.len() < 2 || values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = ds.iter().map(|&d| (d as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

impl Measurer for StructureFunctionMeasurer {
    fn measure(
        &self,
        turb: &FrameSequence,
        reference: Option<&FrameSequence>,
        sensor: &SensorModel,
    ) -> Result<TsEstimate> {
        Ok(self.measure_detailed(turb, reference, sensor)?.estimate)
    }

    fn name(&self) -> &str {
        "structure_function"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_seq(frames: usize, gray: f64) -> FrameSequence {
        FrameSequence::new(Array3::from_elem((frames, 32, 32), gray)).unwrap()
    }

    #[test]
    fn constant_scene_has_no_turbulence() {
        let m = StructureFunctionMeasurer::default();
        let s = SensorModel::default();
        let est = m.measure(&constant_seq(15, 0.05), None, &s).unwrap();
        assert_eq!(est.mode, InputMode::Single);
        assert!(est.cn2.iter().all(|&v| v == 0.0));
        assert!(est.ct2.iter().all(|&v| v == 0.0));
        assert!(est.temp.iter().all(|&t| (t - 300.0).abs() < 1e-9));
        let dual = m
            .measure(&constant_seq(15, 0.05), Some(&constant_seq(11, 0.05)), &s)
            .unwrap();
        assert_eq!(dual.mode, InputMode::Dual);
        assert_eq!(dual.dim(), (2, 2));
    }

    #[test]
    fn error_paths() {
        let m = StructureFunctionMeasurer::default();
        let s = SensorModel::default();
        assert!(m.measure(&constant_seq(1, 0.05), None, &s).is_err());
        assert!(m
            .measure(&constant_seq(15, 0.05), Some(&constant_seq(7, 0.05)), &s)
            .is_err());
        let odd = FrameSequence::new(Array3::zeros((3, 30, 32))).unwrap();
        assert!(m.measure(&odd, None, &s).is_err());
        let cold = constant_seq(4, 0.0);
        let s_bad = SensorModel { offset: 0.5, ..s };
        assert!(matches!(m.measure(&cold, None, &s_bad), Err(Error::Domain(_))));
        assert!(StructureFunctionMeasurer::new(MeasurerConfig {
            d_set: vec![],
            ..Default::default()
        })
        .is_err());
        assert!(StructureFunctionMeasurer::new(MeasurerConfig {
            d_set: vec![16],
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn slope_fit() {
        let ds = [1, 2, 3];
        let v: Vec<f64> = ds.iter().map(|&d| 2.0 * (d as f64).powf(2.0 / 3.0)).collect();
        assert!((loglog_slope(&ds, &v).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(loglog_slope(&[1], &[1.0]).is_none());
        assert!(loglog_slope(&ds, &[0.0, 1.0, 2.0]).is_none());
    }
}
