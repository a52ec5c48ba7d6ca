//! The measure → restore → re-measure cycle and its report.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::estimate::{InputMode, TsEstimate};
use super::measure::Measurer;
use super::restore::{Restorer, WINDOW};
use crate::error::{Error, Result};
use crate::fields::{
    ct2_from_cn2, upsample_field, TurbulenceField, CN2_RANGE_MAX, DEFAULT_PRESSURE_HPA, TEMP_RANGE_MAX,
};
use crate::radiometry::SensorModel;
use crate::sequence::FrameSequence;
use crate::spectral::{
    metrics_field, metrics_image, total_losses, FieldMetrics, IdentityFeatures, ImageMetrics, LossBreakdown,
    LossInputs, LossWeights,
};

pub const STAGE_MEASURE_SINGLE: &str = "measure_single";
pub const STAGE_RESTORE: &str = "restore";
pub const STAGE_MEASURE_DUAL: &str = "measure_dual";
pub const STAGE_METRICS: &str = "metrics";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CycleConfig {
    pub loss_weights: LossWeights,
    /// Cn² divisor applied before field metrics.
    pub cn2_normalizer: f64,
    pub pressure_hpa: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            loss_weights: LossWeights::default(),
            cn2_normalizer: CN2_RANGE_MAX,
            pressure_hpa: DEFAULT_PRESSURE_HPA,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss_weights.validate()?;
        if !(self.cn2_normalizer > 0.0) || !(self.pressure_hpa > 0.0) {
            return Err(Error::invalid(
                "cycle",
                "cn2_normalizer and pressure_hpa must be positive",
            ));
        }
        Ok(())
    }

    /// CT² equivalent of the Cn² normalizer at the warmest dataset temperature.
    pub fn ct2_normalizer(&self) -> f64 {
        ct2_from_cn2(self.cn2_normalizer, TEMP_RANGE_MAX, self.pressure_hpa).unwrap_or(1.0)
    }
}

/// Known truths for scoring a cycle. Either part may be absent.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruth<'a> {
    pub field: Option<&'a TurbulenceField>,
    /// Clean frames, either the full input length or already aligned with
    /// the restored output.
    pub clean: Option<&'a FrameSequence>,
}

/// Field metrics of one estimate against the ground-truth field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub cn2: FieldMetrics,
    pub ct2: FieldMetrics,
    pub temp: FieldMetrics,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub measure_single_s: f64,
    pub restore_s: f64,
    pub measure_dual_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub measurer: String,
    pub restorer: String,
    pub input_frames: usize,
    pub restored_frames: usize,
    pub grid: (usize, usize),
    pub single_mode: Option<StageMetrics>,
    pub dual_mode: Option<StageMetrics>,
    /// Restored frames against the aligned clean frames.
    pub restored: Option<ImageMetrics>,
    /// Aligned degraded input frames against the same clean frames.
    pub turbulent: Option<ImageMetrics>,
    pub losses: Option<LossBreakdown>,
    pub mae_cn2_single: Option<f64>,
    pub mae_cn2_dual: Option<f64>,
    pub r2_cn2_single: Option<f64>,
    pub r2_cn2_dual: Option<f64>,
    /// Whether the dual-mode Cn² MAE is strictly below the single-mode one.
    pub dual_improved: Option<bool>,
    pub wall_time: WallTimes,
}

impl CycleReport {
    /// The report with every wall-time field zeroed, for reproducibility checks.
    pub fn without_wall_times(&self) -> CycleReport {
        CycleReport {
            wall_time: WallTimes::default(),
            ..self.clone()
        }
    }
}

/// Everything a cycle produces. `dual` is the final estimate.
#[derive(Debug, Clone)]
pub struct CycleRun {
    pub report: CycleReport,
    pub single: TsEstimate,
    pub restored: FrameSequence,
    pub dual: TsEstimate,
}

fn check_estimate(est: &TsEstimate, mode: InputMode, grid: Option<(usize, usize)>) -> Result<()> {
    est.validate()?;
    if est.mode != mode {
        return Err(Error::invalid(
            "estimate mode",
            format!("expected {mode:?}, measurer reported {:?}", est.mode),
        ));
    }
    if let Some((gh, gw)) = grid {
        if est.dim() != (gh, gw) {
            let (h, w) = est.dim();
            return Err(Error::mismatch("estimate grid", &[gh, gw], &[h, w]));
        }
    }
    Ok(())
}

fn stage_metrics(est: &TsEstimate, field: &TurbulenceField, cfg: &CycleConfig) -> Result<StageMetrics> {
    Ok(StageMetrics {
        cn2: metrics_field(&est.cn2, &field.cn2, cfg.cn2_normalizer)?,
        ct2: metrics_field(&est.ct2, &field.ct2, cfg.ct2_normalizer())?,
        temp: metrics_field(&est.temp, &field.temp, TEMP_RANGE_MAX)?,
    })
}

fn aligned_clean(clean: &FrameSequence, input_len: usize, restored_len: usize) -> Result<FrameSequence> {
    if clean.len() == restored_len {
        Ok(clean.clone())
    } else if clean.len() == input_len {
        clean.slice_frames(WINDOW / 2, input_len - WINDOW / 2)
    } else {
        Err(Error::mismatch("clean frame count", &[input_len], &[clean.len()]))
    }
}

/// Run the cycle: single-mode measurement, restoration under that prior,
/// then dual-mode measurement with the restoration as reference.
///
/// Errors are wrapped with the stage that raised them. Ground truth, when
/// given, only feeds the report; it never reaches the measurer or restorer.
pub fn pgcl_cycle(
    turb: &FrameSequence,
    sensor: &SensorModel,
    measurer: &dyn Measurer,
    restorer: &dyn Restorer,
    truth: GroundTruth<'_>,
    config: &CycleConfig,
) -> Result<CycleRun> {
    config.validate()?;
    let start = Instant::now();

    let t0 = Instant::now();
    let single = measurer
        .measure(turb, None, sensor)
        .and_then(|e| check_estimate(&e, InputMode::Single, None).map(|_| e))
        .map_err(|e| e.in_stage(STAGE_MEASURE_SINGLE))?;
    let measure_single_s = t0.elapsed().as_secs_f64();
    let grid = single.dim();

    let t0 = Instant::now();
    let restored = restorer
        .restore(turb, &single)
        .and_then(|r| {
            turb.ensure_same_frame_dims(&r, "restored frame dimensions")?;
            if r.len() + (WINDOW - 1) != turb.len() {
                return Err(Error::mismatch(
                    "restored frame count",
                    &[turb.len().saturating_sub(WINDOW - 1)],
                    &[r.len()],
                ));
            }
            Ok(r)
        })
        .map_err(|e| e.in_stage(STAGE_RESTORE))?;
    let restore_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let dual = measurer
        .measure(turb, Some(&restored), sensor)
        .and_then(|e| check_estimate(&e, InputMode::Dual, Some(grid)).map(|_| e))
        .map_err(|e| e.in_stage(STAGE_MEASURE_DUAL))?;
    let measure_dual_s = t0.elapsed().as_secs_f64();

    let mut report = CycleReport {
        measurer: measurer.name().to_string(),
        restorer: restorer.name().to_string(),
        input_frames: turb.len(),
        restored_frames: restored.len(),
        grid,
        single_mode: None,
        dual_mode: None,
        restored: None,
        turbulent: None,
        losses: None,
        mae_cn2_single: None,
        mae_cn2_dual: None,
        r2_cn2_single: None,
        r2_cn2_dual: None,
        dual_improved: None,
        wall_time: WallTimes::default(),
    };
    fill_metrics(&mut report, turb, &single, &restored, &dual, truth, config).map_err(|e| e.in_stage(STAGE_METRICS))?;
    report.wall_time = WallTimes {
        measure_single_s,
        restore_s,
        measure_dual_s,
        total_s: start.elapsed().as_secs_f64(),
    };
    Ok(CycleRun {
        report,
        single,
        restored,
        dual,
    })
}

fn fill_metrics(
    report: &mut CycleReport,
    turb: &FrameSequence,
    single: &TsEstimate,
    restored: &FrameSequence,
    dual: &TsEstimate,
    truth: GroundTruth<'_>,
    config: &CycleConfig,
) -> Result<()> {
    if let Some(field) = truth.field {
        if field.grid_dims() != single.dim() {
            let (gh, gw) = field.grid_dims();
            let (h, w) = single.dim();
            return Err(Error::mismatch("ground-truth grid", &[gh, gw], &[h, w]));
        }
        let s = stage_metrics(single, field, config)?;
        let d = stage_metrics(dual, field, config)?;
        report.mae_cn2_single = Some(s.cn2.mae);
        report.mae_cn2_dual = Some(d.cn2.mae);
        report.r2_cn2_single = Some(s.cn2.r2);
        report.r2_cn2_dual = Some(d.cn2.r2);
        report.dual_improved = Some(d.cn2.mae < s.cn2.mae);
        report.single_mode = Some(s);
        report.dual_mode = Some(d);
    }
    if let Some(clean) = truth.clean {
        turb.ensure_same_frame_dims(clean, "clean frame dimensions")?;
        let gt = aligned_clean(clean, turb.len(), restored.len())?;
        let turb_mid = turb.slice_frames(WINDOW / 2, turb.len() - WINDOW / 2)?;
        report.restored = Some(metrics_image(restored, &gt)?);
        report.turbulent = Some(metrics_image(&turb_mid, &gt)?);
        if let Some(field) = truth.field {
            let (h, _) = turb.frame_dims();
            let cn2_up = upsample_field(&single.cn2, h / single.dim().0)?;
            let inputs = LossInputs {
                rest: restored,
                gt: &gt,
                cn2_up: &cn2_up,
                estimate: dual,
                gt_field: field,
                pressure_hpa: config.pressure_hpa,
            };
            report.losses = Some(total_losses(&inputs, &config.loss_weights, &IdentityFeatures)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coop::{IdentityRestorer, OracleRestorer, StructureFunctionMeasurer};
    use ndarray::{Array2, Array3};

    fn ramp_sequence(frames: usize) -> FrameSequence {
        FrameSequence::new(Array3::from_shape_fn((frames, 32, 32), |(t, r, c)| {
            0.3 + 0.002 * r as f64 + 0.001 * c as f64 + 0.0005 * ((t * 7 + r * 3 + c) % 5) as f64
        }))
        .unwrap()
    }

    struct WrongMode;
    impl Measurer for WrongMode {
        fn measure(&self, turb: &FrameSequence, _r: Option<&FrameSequence>, _s: &SensorModel) -> Result<TsEstimate> {
            let (h, w) = turb.frame_dims();
            let g = (h / 16, w / 16);
            Ok(TsEstimate {
                cn2: Array2::zeros(g),
                ct2: Array2::zeros(g),
                temp: Array2::from_elem(g, 300.0),
                mode: InputMode::Dual,
                source: "wrong".into(),
            })
        }
        fn name(&self) -> &str {
            "wrong"
        }
    }

    struct ShortRestorer;
    impl Restorer for ShortRestorer {
        fn restore(&self, turb: &FrameSequence, _p: &TsEstimate) -> Result<FrameSequence> {
            turb.slice_frames(0, 3)
        }
        fn name(&self) -> &str {
            "short"
        }
    }

    #[test]
    fn stage_attribution() {
        let turb = ramp_sequence(15);
        let sensor = SensorModel::default();
        let cfg = CycleConfig::default();
        let err = pgcl_cycle(
            &turb,
            &sensor,
            &WrongMode,
            &IdentityRestorer,
            GroundTruth::default(),
            &cfg,
        )
        .unwrap_err();
        assert!(err.to_string().contains(STAGE_MEASURE_SINGLE), "{err}");
        let m = StructureFunctionMeasurer::default();
        let err = pgcl_cycle(&turb, &sensor, &m, &ShortRestorer, GroundTruth::default(), &cfg).unwrap_err();
        assert!(err.to_string().contains(STAGE_RESTORE), "{err}");
    }

    #[test]
    fn modes_and_lengths() {
        let turb = ramp_sequence(15);
        let m = StructureFunctionMeasurer::default();
        let run = pgcl_cycle(
            &turb,
            &SensorModel::default(),
            &m,
            &IdentityRestorer,
            GroundTruth::default(),
            &CycleConfig::default(),
        )
        .unwrap();
        assert_eq!(run.single.mode, InputMode::Single);
        assert_eq!(run.dual.mode, InputMode::Dual);
        assert_eq!(run.restored.len(), 11);
        assert!(run.report.single_mode.is_none());
        assert!(run.report.dual_improved.is_none());
    }

    #[test]
    fn oracle_run_fills_report() {
        let turb = ramp_sequence(15);
        let clean = FrameSequence::new(Array3::from_shape_fn((15, 32, 32), |(_, r, c)| {
            0.3 + 0.002 * r as f64 + 0.001 * c as f64
        }))
        .unwrap();
        let cn2 = Array2::from_elem((2, 2), 1e-13);
        let temp = Array2::from_elem((2, 2), 300.0);
        let ct2 = crate::fields::ct2_from_cn2_grid(&cn2, &temp, DEFAULT_PRESSURE_HPA).unwrap();
        let field = TurbulenceField::new(cn2, ct2, temp, 16, DEFAULT_PRESSURE_HPA, 0.01).unwrap();
        let m = StructureFunctionMeasurer::default();
        let oracle = OracleRestorer { clean: clean.clone() };
        let truth = GroundTruth {
            field: Some(&field),
            clean: Some(&clean),
        };
        let run = pgcl_cycle(
            &turb,
            &SensorModel::default(),
            &m,
            &oracle,
            truth,
            &CycleConfig::default(),
        )
        .unwrap();
        let r = &run.report;
        assert!(r.single_mode.is_some() && r.dual_mode.is_some() && r.losses.is_some());
        assert!(r.restored.unwrap().psnr_db.is_infinite());
        let json = serde_json::to_string(r).unwrap();
        let back: CycleReport = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, r);
    }
}
