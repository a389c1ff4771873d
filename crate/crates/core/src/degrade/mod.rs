//! Linear degradation operators `A`, noisy observations `w = A x + noise`
//! and the quadratic data-fidelity term built from them.

mod fidelity;
mod operator;

pub use fidelity::{DataTerm, FidelityProblem, NoData};
pub use operator::{gaussian_kernel, DegradationOperator, OperatorKind};
