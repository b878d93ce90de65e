//! Monte Carlo oracle: the base walk and the subordinated jump chain
//! simulated path by path, with per-path seed streams.

mod engine;
mod estimate;
mod sampler;
mod seed;
mod validate;

pub use engine::{
    simulate_stable_exit, simulate_walk_exit, walk_step, DyadicPowers, Exit, JumpEngine, PathOutcome,
    DYADIC_STATE_CAP, JUMP_CAP, STEP_CAP,
};
pub use estimate::{
    cell_exit_steps, clopper_pearson, estimate_harmonic_measure, CellExit, HarmonicEstimate, StartEstimate,
    FLAGGED_FRACTION_CAP,
};
pub use sampler::{
    sample_positive_stable, tail_constant_estimate, StepCountSampler, TailReport, EXACT_PREFIX, STEP_SATURATION,
};
pub use seed::{with_workers, workers_from_env, SeedPlan, WORKERS_ENV};
pub(crate) use seed::splitmix64;
pub use validate::{
    oracle_battery, sampler_battery, JumpCheck, OracleConfig, OracleReport, SamplerConfig, SamplerReport, TargetCheck,
    LaplaceCheck, TailConstants, WeightCheck,
};
