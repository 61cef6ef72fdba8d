//! Optimal-transport based global sensitivity indices computed from a single
//! given-data sample of inputs and outputs.

pub mod bootstrap;
pub mod cost;
pub mod data;
pub mod error;
pub mod estimators;
pub mod io;
pub mod models;
pub mod partition;
pub mod solvers;

pub use bootstrap::{bootstrap_from, bootstrap_indices, BootstrapResult, BootstrapStat, CiType, Statistic};
pub use cost::{cost_matrix, upper_bound, CostMatrix, CustomCost, GroundCost};
pub use data::{SampleMatrix, SensitivityDataset};
pub use error::{Error, Result};
pub use estimators::{
    estimate, irrelevance_threshold, local_separations, ot_indices, ot_indices_1d, ot_indices_smap, ot_indices_wb,
    Components, DummyDistribution, EstimatorConfig, IndexEstimate, InputIndex, SensitivityMap, SeparationRow, Weighting,
};
pub use partition::{build_partition, default_class_count, partition_all, Partitioning};
pub use solvers::{SolveOutcome, SolverConfig, SolverKind, TransportPlan};
