//! Grid experiments: specification, execution, persistence and analysis.

pub mod report;
pub mod runner;
pub mod spec;
pub mod store;

pub use report::{intra_group_distances, stability_report, GroupSummary, MetricReport, RankCorrelation, StabilityReport};
pub use runner::{run_experiment, FailHook, RunOptions, RunSummary};
pub use spec::{
    cell_seed, enumerate_grid, param_distance, ExperimentSpec, GraphSource, Grid, MetricsSpec, ParamSet, StatsSpec,
    TrainingSpec,
};
pub use store::{CellStatus, DistanceRow, Manifest, RunRecord, Store};
