//! Simulation pipeline and the fixed benchmark suites.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{generate_field, FieldSpec, TurbulenceField};
use crate::optics::{add_thermal_fluctuations, degrade_sequence, DegradationConfig};
use crate::radiometry::SensorModel;
use crate::rng::sub_seed;
use crate::scene::{render_scene, Pattern, SceneSpec};
use crate::sequence::FrameSequence;

/// A clean sequence and its degraded counterpart.
#[derive(Debug, Clone)]
pub struct SimulatedPair {
    pub clean: FrameSequence,
    pub turb: FrameSequence,
}

/// Render the scene, then apply tilt, blur and noise, then add thermal
/// fluctuations whose structure function follows each block's CT².
pub fn simulate(
    field: &TurbulenceField,
    scene: &SceneSpec,
    sensor: &SensorModel,
    degradation: &DegradationConfig,
    thermal_seed: Option<u64>,
) -> Result<SimulatedPair> {
    let clean = render_scene(field, scene, sensor)?;
    let mut turb = degrade_sequence(&clean, field, degradation)?;
    if let Some(seed) = thermal_seed {
        turb = add_thermal_fluctuations(&turb, field, sensor.gain, seed)?;
    }
    Ok(SimulatedPair { clean, turb })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSpec {
    pub seeds: Vec<u64>,
    /// `seed` fields inside these are replaced per case.
    pub field: FieldSpec,
    pub scene: SceneSpec,
    pub sensor: SensorModel,
    pub degradation: DegradationConfig,
    pub thermal: bool,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec::standard()
    }
}

impl BenchmarkSpec {
    /// Ten 64×64, 15-frame cases with smooth scenes, a column-proportional
    /// drift and no sensor noise.
    pub fn standard() -> Self {
        BenchmarkSpec {
            seeds: (0..10).collect(),
            field: FieldSpec {
                grid_w: 4,
                grid_h: 4,
                ..FieldSpec::default()
            },
            scene: SceneSpec {
                patterns: vec![Pattern::SoftBars, Pattern::Blobs],
                amplitude_k: 2.0,
                bar_period_px: 48.0,
                spot_count: 2,
                base_smoothing_px: 8.0,
                drift_k_per_frame: 3.0,
                frames: 15,
                seed: 0,
            },
            sensor: SensorModel::default(),
            degradation: DegradationConfig {
                noise_sigma: 0.0,
                ..DegradationConfig::default()
            },
            thermal: true,
        }
    }

    /// The standard suite with sensor noise of 0.01 gray levels.
    pub fn noisy() -> Self {
        let mut spec = BenchmarkSpec::standard();
        spec.degradation.noise_sigma = 0.01;
        spec
    }

    pub fn case(&self, seed: u64) -> Result<BenchmarkCase> {
        let field = generate_field(&FieldSpec {
            seed: sub_seed(seed, &[1]),
            ..self.field.clone()
        })?;
        let scene = SceneSpec {
            seed: sub_seed(seed, &[2]),
            ..self.scene.clone()
        };
        let degradation = DegradationConfig {
            seed: sub_seed(seed, &[3]),
            ..self.degradation.clone()
        };
        let thermal_seed = self.thermal.then(|| sub_seed(seed, &[4]));
        let SimulatedPair { clean, turb } = simulate(&field, &scene, &self.sensor, &degradation, thermal_seed)?;
        Ok(BenchmarkCase {
            seed,
            field,
            clean,
            turb,
            sensor: self.sensor,
        })
    }

    pub fn cases(&self) -> Result<Vec<BenchmarkCase>> {
        self.seeds.iter().map(|&s| self.case(s)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub seed: u64,
    pub field: TurbulenceField,
    pub clean: FrameSequence,
    pub turb: FrameSequence,
    pub sensor: SensorModel,
}
