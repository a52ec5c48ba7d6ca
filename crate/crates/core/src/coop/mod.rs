//! Cooperative measurement/restoration: interfaces, classical
//! implementations, the cycle, data mixing and the alternating schedule.

mod cycle;
mod estimate;
mod measure;
mod mixing;
mod restore;
mod schedule;

pub use cycle::{
    pgcl_cycle, CycleConfig, CycleReport, CycleRun, GroundTruth, StageMetrics, WallTimes, STAGE_MEASURE_DUAL,
    STAGE_MEASURE_SINGLE, STAGE_METRICS, STAGE_RESTORE,
};
pub use estimate::{FieldTriple, InputMode, TsEstimate};
pub use measure::{Measurer, MeasurerConfig, StructureDetail, StructureFunctionMeasurer};
pub use mixing::{data_mixing, ModeAssignment};
pub(crate) use restore::check_length;
pub use restore::{
    IdentityRestorer, OracleRestorer, Restorer, TemporalRestorer, TemporalRestorerConfig, INPUT_FRAMES, WINDOW,
};
pub use schedule::{alternating_schedule, Role, ScheduleHooks, TraceEntry};
