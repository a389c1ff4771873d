//! Step schedules `l_k` with their derived sequences, and the analytic error
//! and convergence bounds of the continuous surrogate.

mod bounds;
mod sequence;

pub use bounds::{
    accel_bound_terms, case_b, constant, convergence_terms, cumulative_trapezoid, gronwall_error_bound,
    gronwall_terms, piecewise_linear, trapezoid, trapezoid_samples, BoundCase, BoundInputs, ConvergenceTerms,
    Sampler, DEFAULT_PANELS,
};
pub use sequence::{GammaPolicy, HPolicy, Schedule, ScheduleKind};
