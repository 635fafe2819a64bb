//! Mean-field equilibria of discrete-time mean-field games on finite grids,
//! computed by value iteration on the pair (Q-function, population measure).
//!
//! * [`model`]: game primitives, JSON loading, built-in benchmark family and
//!   constant estimation.
//! * [`measure_ot`]: state measures, exact Wasserstein-1 transport, pushforward.
//! * [`inner_opt`]: the per-state minimization behind greedy policies.
//! * [`mfe_discounted`] / [`mfe_average`]: the equilibrium operators and solvers.
//! * [`verify`]: independent certificates and the finite-population simulator.
//! * [`cli`]: the `mfe` command-line front end.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fixed_point;
pub mod inner_opt;
pub mod measure_ot;
pub mod mfe_average;
pub mod mfe_discounted;
pub mod model;
pub mod qfunction;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use fixed_point::{
    estimate_contraction, sample_pair, stop_threshold, ContractionEstimate, PerturbationMode, Residual, SolveOptions,
    SolveReport, SolveStatus,
};
pub use inner_opt::{greedy_policy, minimize_f, FEvaluator, GreedyPolicy, KernelMode};
pub use measure_ot::{pushforward, w1, w1_distance, w1_dual_certificate, StateMeasure, TransportPlan};
pub use mfe_average::{solve_average, solve_average_default, AverageSolution};
pub use mfe_discounted::{solve_discounted, solve_discounted_default};
pub use model::{estimate_constants, load_model, load_model_file, Criterion, Model, ModelConstants};
pub use qfunction::{MfePair, QFunction};
