//! Configuration, data batteries, dispatch and persistence for experiments.

mod battery;
mod config;
mod generators;
mod report;
mod run;

pub use battery::{seeded_battery, BATTERY_IDS, DEFAULT_BATTERY, NOISE_BATTERY};
pub use config::{
    restriction_side, CubeLayout, CubeParams, DecayParams, Experiment, ExperimentConfig, LocalGlobalParams,
    OrthogonalityParams, ScanParams, ScheduleParams, SparseParams, SquarefnParams,
};
pub use generators::{orthogonality_sweep, random_cube_set, CrossRow, OrthogonalityRow, OrthogonalitySweep};
pub use report::{fmt17, Artifact, Collector, ReportRecord};
pub use run::run;
