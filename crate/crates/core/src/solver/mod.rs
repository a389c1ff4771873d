//! The PnP-Flow iteration, its extrapolated variant, full restoration runs
//! and the step-sum diagnostic.

mod run;
mod step;

pub use run::{
    cauchy_diagnostic, restore, restore_from, CauchyReport, InitMode, RestoreRun, SolverConfig, StepRecord,
    Trajectory, DIVERGENCE_THRESHOLD, INIT_STREAM, NOISE_STREAM,
};
pub use step::{extrapolate, ipnpflow_step, pnpflow_step, step_from};
