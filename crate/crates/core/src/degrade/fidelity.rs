use super::DegradationOperator;
use crate::error::Result;
use crate::numerics::{RngStream, Tensor};

/// The data-fidelity term `f(x) = 1/2 ||A x - w||^2` for a fixed observation `w`.
#[derive(Clone, Debug)]
pub struct FidelityProblem {
    operator: DegradationOperator,
    observation: Tensor,
}

impl FidelityProblem {
    pub fn new(operator: DegradationOperator, observation: Tensor) -> Result<Self> {
        let expected = Tensor::zeros(&operator.output_shape())?;
        expected.check_same_shape(&observation)?;
        Ok(Self {
            operator,
            observation,
        })
    }

    /// Degrades `clean` with a fresh noise draw and wraps the result.
    pub fn observe(operator: DegradationOperator, clean: &Tensor, rng: &mut RngStream) -> Result<Self> {
        let observation = operator.observe(clean, rng)?;
        Self::new(operator, observation)
    }

    pub fn operator(&self) -> &DegradationOperator {
        &self.operator
    }

    pub fn observation(&self) -> &Tensor {
        &self.observation
    }

    fn residual(&self, x: &Tensor) -> Result<Tensor> {
        self.operator.apply(x)?.sub(&self.observation)
    }

    pub fn value(&self, x: &Tensor) -> Result<f64> {
        Ok(0.5 * self.residual(x)?.norm_sq())
    }

    /// `A^T (A x - w)`.
    pub fn grad(&self, x: &Tensor) -> Result<Tensor> {
        self.operator.adjoint(&self.residual(x)?)
    }

    /// `A^T w`, the usual warm start.
    pub fn adjoint_observation(&self) -> Result<Tensor> {
        self.operator.adjoint(&self.observation)
    }

    /// Estimated Lipschitz constant of the gradient, `||A^T A||_2`.
    pub fn lipschitz_constant(&self, rng: &mut RngStream) -> Result<f64> {
        self.operator.normal_operator_norm(200, rng)
    }
}

/// A smooth data term `f` that the solver and the SDE lab differentiate.
pub trait DataTerm: Send + Sync {
    fn value(&self, x: &Tensor) -> Result<f64>;
    fn grad(&self, x: &Tensor) -> Result<Tensor>;
}

impl DataTerm for FidelityProblem {
    fn value(&self, x: &Tensor) -> Result<f64> {
        FidelityProblem::value(self, x)
    }

    fn grad(&self, x: &Tensor) -> Result<Tensor> {
        FidelityProblem::grad(self, x)
    }
}

/// `f == 0`: the iteration is driven by the prior alone.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoData;

impl DataTerm for NoData {
    fn value(&self, _x: &Tensor) -> Result<f64> {
        Ok(0.0)
    }

    fn grad(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.zeros_like())
    }
}
