//! The discrete stable-like process on a window: subordination weights, the
//! fractional generator `L_beta = (I - P)^beta`, and the linear solves for
//! harmonic functions, exit times and Green tables.

mod lambda;
mod lemmas;
mod linalg;
mod operator;
mod params;
mod solve;
mod weights;

pub use lambda::{lambda_functional, lambda_nodes, lambda_tail_bound, LambdaNode};
pub use lemmas::{
    escape_check, factorization_check, upper_check, EscapeEstimate, FactorizationEstimate, LemmaDomain,
    LemmaScale, UpperEstimate,
};
pub use linalg::SpdSolver;
pub use operator::{
    FractionalOperator, KernelMode, RimPolicy, SpectralWalk, WalkOperator, DEFAULT_SPECTRAL_CAP,
};
pub use params::{hausdorff_dim, walk_dim, StableParams};
pub use solve::{
    exit_time_solve, green_table, harmonic_solve, DomainSolver, ExitTimes, GreenTable,
    HarmonicSolution, DEFAULT_GREEN_CAP,
};
pub use weights::{SubordinationWeights, TailPolicy};
