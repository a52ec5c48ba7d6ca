//! The JSON run configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use turbkit::coop::{CycleConfig, IdentityRestorer, Measurer, MeasurerConfig, Restorer, StructureFunctionMeasurer};
use turbkit::coop::{TemporalRestorer, TemporalRestorerConfig};
use turbkit::fields::FieldSpec;
use turbkit::nnref::{NnConfig, NnMeasurer, NnRestorer};
use turbkit::optics::DegradationConfig;
use turbkit::radiometry::SensorModel;
use turbkit::rng::sub_seed;
use turbkit::scene::SceneSpec;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Every random stream used by a run. The `seed` fields of the nested
/// sections are replaced by these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub field: u64,
    pub scene: u64,
    pub degradation: u64,
    pub thermal: u64,
    pub model: u64,
}

impl Seeds {
    /// Derive all streams from one base seed, matching the benchmark suites.
    pub fn from_base(seed: u64) -> Self {
        Seeds {
            field: sub_seed(seed, &[1]),
            scene: sub_seed(seed, &[2]),
            degradation: sub_seed(seed, &[3]),
            thermal: sub_seed(seed, &[4]),
            model: sub_seed(seed, &[5]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurerKind {
    #[default]
    StructureFunction,
    Nn,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurerSection {
    pub kind: MeasurerKind,
    pub structure_function: MeasurerConfig,
    pub nn: NnConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestorerKind {
    #[default]
    Temporal,
    Identity,
    Nn,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestorerSection {
    pub kind: RestorerKind,
    pub temporal: TemporalRestorerConfig,
    pub nn: NnConfig,
}

/// File names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoPaths {
    pub out_dir: PathBuf,
    pub field_stem: String,
    pub clean: String,
    pub turb: String,
    pub restored: String,
    pub report: String,
}

impl Default for IoPaths {
    fn default() -> Self {
        IoPaths {
            out_dir: PathBuf::from("out"),
            field_stem: "field".into(),
            clean: "clean.tbt".into(),
            turb: "turb.tbt".into(),
            restored: "restored.tbt".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seeds: Seeds,
    #[serde(default)]
    pub field_spec: FieldSpec,
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub degradation: DegradationConfig,
    /// Add thermal fluctuations that follow each block's CT².
    #[serde(default = "yes")]
    pub thermal: bool,
    #[serde(default)]
    pub measurer: MeasurerSection,
    #[serde(default)]
    pub restorer: RestorerSection,
    #[serde(default)]
    pub cycle: CycleConfig,
    #[serde(default)]
    pub io: IoPaths,
}

fn yes() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            schema_version: SCHEMA_VERSION,
            seeds: Seeds::from_base(0),
            field_spec: FieldSpec::default(),
            scene: SceneSpec::default(),
            sensor: SensorModel::default(),
            degradation: DegradationConfig::default(),
            thermal: true,
            measurer: MeasurerSection::default(),
            restorer: RestorerSection::default(),
            cycle: CycleConfig::default(),
            io: IoPaths::default(),
        };
        cfg.apply_seeds();
        cfg
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        cfg.apply_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn with_base_seed(mut self, seed: u64) -> Self {
        self.seeds = Seeds::from_base(seed);
        self.apply_seeds();
        self
    }

    fn apply_seeds(&mut self) {
        self.field_spec.seed = self.seeds.field;
        self.scene.seed = self.seeds.scene;
        self.degradation.seed = self.seeds.degradation;
        self.measurer.nn.seed = self.seeds.model;
        self.restorer.nn.seed = sub_seed(self.seeds.model, &[1]);
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let wrap = |e: turbkit::Error| CliError::config(e.to_string());
        self.field_spec.validate().map_err(wrap)?;
        self.scene.validate().map_err(wrap)?;
        self.sensor.validate().map_err(wrap)?;
        self.degradation.validate().map_err(wrap)?;
        self.measurer.structure_function.validate().map_err(wrap)?;
        self.cycle.validate().map_err(wrap)?;
        let m = &self.measurer.structure_function;
        let f = &self.field_spec;
        if m.block_size_px != f.block_size_px
            || m.plate_scale_m_per_px != f.plate_scale_m_per_px
            || m.pressure_hpa != f.pressure_hpa
            || self.cycle.pressure_hpa != f.pressure_hpa
        {
            return Err(CliError::config(
                "measurer and cycle block size, plate scale and pressure must match field_spec",
            ));
        }
        if self.restorer.temporal.block_size_px != f.block_size_px {
            return Err(CliError::config(
                "restorer.temporal.block_size_px must match field_spec",
            ));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        &self.io.out_dir
    }

    pub fn measurer(&self) -> CliResult<Box<dyn Measurer>> {
        Ok(match self.measurer.kind {
            MeasurerKind::StructureFunction => Box::new(StructureFunctionMeasurer::new(
                self.measurer.structure_function.clone(),
            )?),
            MeasurerKind::Nn => Box::new(NnMeasurer::random(
                &self.measurer.nn,
                (self.field_spec.grid_h, self.field_spec.grid_w),
            )?),
        })
    }

    pub fn restorer(&self) -> CliResult<Box<dyn Restorer>> {
        Ok(match self.restorer.kind {
            RestorerKind::Temporal => Box::new(TemporalRestorer::new(self.restorer.temporal.clone())?),
            RestorerKind::Identity => Box::new(IdentityRestorer),
            RestorerKind::Nn => Box::new(NnRestorer::random(&self.restorer.nn)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn seeds_and_version_are_required() {
        assert!(RunConfig::from_json(r#"{"schema_version": 1}"#).is_err());
        let seeds = r#"{"field":1,"scene":2,"degradation":3,"thermal":4,"model":5}"#;
        assert!(RunConfig::from_json(&format!(r#"{{"seeds": {seeds}}}"#)).is_err());
        let cfg = RunConfig::from_json(&format!(r#"{{"schema_version": 1, "seeds": {seeds}}}"#)).unwrap();
        assert_eq!(cfg.field_spec.seed, 1);
        assert_eq!(cfg.degradation.seed, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        v["colour"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        v["field_spec"]["gridw"] = serde_json::json!(3);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn inconsistent_block_size_is_a_config_error() {
        let mut cfg = RunConfig::default();
        cfg.measurer.structure_function.block_size_px = 8;
        assert_eq!(cfg.validate().unwrap_err().code, crate::error::ExitCode::Config);
    }
}
