//! Metrics, image and report I/O, experiment configuration and drivers.

mod ablate;
mod config;
mod experiment;
mod metrics;
mod netpbm;
mod synthetic;

pub use metrics::{format_psnr, psnr, ssim};
pub use netpbm::{parse_netpbm, read_image, read_netpbm, write_image, write_netpbm, Encoding, NetpbmImage};
pub use synthetic::{synthetic_image, Generator};
pub use ablate::{
    ablate, jacobian_points, mean_reach, train_field, AblationRow, AblationTable, Axis, JACOBIAN_POINTS, JACOBIAN_PROBES,
    REACH_MARGIN_DB,
};
pub use config::{ExperimentConfig, FieldSpec, GammaRule, GammaSpec, HShape, SolverSection, Task};
pub use experiment::{
    evaluate, load_field, run_experiment, run_seed, test_problem, Aggregate, ImageOutputs, ImageRow, MetricsReport,
    SeedCurve, Summary, IMAGE_STREAM, OBSERVE_STREAM,
};
