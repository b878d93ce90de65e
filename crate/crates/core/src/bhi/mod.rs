//! Experiment batteries: the boundary Harnack ratio over random domains, the
//! escape/upper/factorization constants, and the scaling exponents.

mod battery;
mod config;
mod domains;
mod lemmas;
mod scaling;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

pub use battery::{ratio_statistic, run_bhi, BhiReport, InstanceRatio, LevelSummary, Stability, Truncation};
pub use config::{DomainFamily, ExperimentConfig, LemmaConfig, Resolved, ScalingConfig, TargetSpec};
pub use domains::{ball_mask, target_vertices, CellCover, DomainSampler};
pub use lemmas::{run_lemma_battery, LemmaAggregate, LemmaReport, LemmaRow, LemmaStability, Sweep};
pub use scaling::{
    exit_exponent_fit, lambda_identity, run_scaling_suite, walk_dimension_fit, ExitFit, Fit, LambdaIdentity,
    ScalingReport, WalkFit,
};
