//! Subsampled nonmonotone spectral gradient methods for finite-sum minimization.
//!
//! The crate implements a family of Barzilai-Borwein (spectral) gradient
//! methods for objectives of the form `f(x) = (1/N) Σ f_j(x)`, where each
//! iteration works on a randomly drawn, geometrically growing subsample of the
//! component functions. Globalization is a nonmonotone backtracking line
//! search with a summable slack sequence, so occasional increases of the
//! sampled objective are tolerated.
//!
//! Five method variants are provided:
//!
//! | name     | subsample  | gradient displacement for the BB coefficient |
//! |----------|------------|-----------------------------------------------|
//! | `SG_N_1` | nested     | both gradients sampled on the current set      |
//! | `SG_N_2` | nested     | difference of the stored aggregate gradients   |
//! | `SG_I_1` | non-nested | both gradients sampled on the current set      |
//! | `SG_I_3` | non-nested | gradients restricted to the sample overlap     |
//! | `SGFull` | full set   | exact full-gradient difference                 |
//!
//! Evaluation cost is tracked with four integer counters: scalar products
//! (`SP`), component function evaluations (`FE`), component gradient
//! evaluations that require a fresh scalar product (`GE_1`) and all component
//! gradient evaluations (`GE_2`). For the regularized logistic loss the
//! expensive part of both `f_j` and `∇f_j` is the single scalar product
//! `a_jᵀx`, so `SP = FE + GE_1` holds as an exact integer identity and is the
//! cost measure the experiment harness reports.
//!
//! All numeric code is generic over the scalar type (see [`Scalar`]); the
//! concrete aliases at the crate root fix `f64`, which is what the CLI uses.

pub mod dataset;
pub mod diagnostics;
pub mod linalg;
pub mod linesearch;
pub mod objective;
pub mod report;
pub mod sampling;
mod scalar;
pub mod solver;
pub mod spectral;

pub use scalar::Scalar;

pub use dataset::{Dataset, Split};
pub use objective::{CostCounters, ExpCache, FiniteSumObjective, LogisticObjective};
pub use sampling::{GeometricSchedule, SampleSchedule, SampleSet};
pub use solver::{
    run, run_full, IterationRecord, MethodName, RunResult, RunStatus, SolverConfig, StopRule,
};

/// Concrete `f64` instantiations used by the CLI and most callers.
pub type Dataset64 = Dataset<f64>;
pub type LogisticObjective64 = LogisticObjective<f64>;
pub type RunResult64 = RunResult<f64>;
pub type IterationRecord64 = IterationRecord<f64>;
pub type SolverConfig64 = SolverConfig<f64>;

/// Seed for run `i` of a repeated experiment with base seed `base`.
///
/// Uses a `splitmix64` scramble of the run index so consecutive runs get
/// decorrelated streams while staying reproducible from `(base, i)`.
pub fn seed_for_run(base: u64, run_index: usize) -> u64 {
    base ^ splitmix64(run_index as u64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
