// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ground-truth oracles and checks of the finite-sample and truncation
//! bias theory.

mod bounds;
mod ordering;
mod truth;

pub use bounds::{
    bias_bound_report, bias_bounds, mc_restricted_mean, thm1_bounds, thm2_bounds, BoundOptions, BoundReport,
    ParametricCensorModel, TimeLaw,
};
pub use ordering::{
    ordering_from_estimates, simulated_observations, thm3_ordering_check, thm4_ordering_check,
    truncation_bias_parametric, OracleOptions, OrderingReport, Target, TruncationBias, Verdict,
};
pub use truth::{
    delay_mc, run_length_mc, true_add_mc, true_arl_mc, MonteCarloEstimate, OracleChangepoint, MAX_CAP_FRACTION,
};
