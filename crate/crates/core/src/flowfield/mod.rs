//! Time-dependent vector fields `u_t(x)` on `t in [0, 1]` and the
//! flow-matching denoiser `D_t = Id + (1 - t) u_t`.
//!
//! Two families matter in practice: [`MlpField`], a small trainable network
//! with exact reverse-mode parameter gradients and forward-mode Jacobian-vector
//! products, and [`GaussianOracleField`], the closed-form marginal field for a
//! Gaussian target that serves as ground truth, with its stationary
//! image-prior counterpart [`StationaryGaussianField`]. A few trivial fields
//! (zero, constant, linear, shifted) exist for tests and for the SDE lab.

mod checkpoint;
mod jacobian;
mod mlp;
mod oracle;
mod stationary;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use jacobian::{estimate_jacobian_norm, hutchinson_samples, lipschitz_estimate, spectral_norm_estimate};
pub use mlp::{Activation, MlpField, Recording, Tangent, TimeEmbedding};
pub use oracle::GaussianOracleField;
pub use stationary::StationaryGaussianField;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("field time {t} outside [0, 1]")));
    }
    Ok(())
}

fn check_dim(field: &dyn VectorField, x: &Tensor) -> Result<()> {
    if let Some(n) = field.dim() {
        if x.len() != n {
            return Err(Error::invalid(format!(
                "field expects {n} state entries, got shape {:?}",
                x.shape()
            )));
        }
    }
    Ok(())
}

/// A time-dependent vector field on flattened states.
///
/// Implementations accept any tensor whose element count matches [`dim`](Self::dim)
/// and return a tensor of the same shape.
pub trait VectorField: Send + Sync {
    /// State dimension, or `None` if any dimension is accepted.
    fn dim(&self) -> Option<usize>;

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor>;

    /// `(grad_x u_t)(x) v`. The default uses central differences.
    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        x.check_same_shape(v)?;
        let norm = v.norm_l2();
        if norm == 0.0 {
            return Ok(x.zeros_like());
        }
        let delta = 1e-6 * (1.0 + x.norm_l2()) / norm;
        let plus = self.eval(t, &x.axpy(delta, v)?)?;
        let minus = self.eval(t, &x.axpy(-delta, v)?)?;
        Ok(plus.sub(&minus)?.scale(0.5 / delta))
    }

    /// `(grad_x u_t)(x)^T w`. The default assembles the Jacobian column by column.
    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        x.check_same_shape(w)?;
        let n = x.len();
        let mut out = x.zeros_like();
        let mut basis = x.zeros_like();
        for j in 0..n {
            basis.data_mut()[j] = 1.0;
            let column = self.jvp(t, x, &basis)?;
            basis.data_mut()[j] = 0.0;
            out.data_mut()[j] = column.dot(w)?;
        }
        Ok(out)
    }

    /// Jacobian-vector products for several probes at one point.
    fn jvp_many(&self, t: f64, x: &Tensor, probes: &[Tensor]) -> Result<Vec<Tensor>> {
        probes.iter().map(|v| self.jvp(t, x, v)).collect()
    }
}

/// `u_t(x) = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        Ok(x.zeros_like())
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        x.check_same_shape(v)?;
        Ok(x.zeros_like())
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        self.jvp(t, x, w)
    }
}

/// `u_t(x) = c` for a fixed tensor `c`.
#[derive(Clone, Debug)]
pub struct ConstantField {
    value: Tensor,
}

impl ConstantField {
    pub fn new(value: Tensor) -> Self {
        Self { value }
    }
}

impl VectorField for ConstantField {
    fn dim(&self) -> Option<usize> {
        Some(self.value.len())
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        check_dim(self, x)?;
        self.value.reshape(x.shape())
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        x.check_same_shape(v)?;
        Ok(x.zeros_like())
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        self.jvp(t, x, w)
    }
}

/// `u_t(x) = M x` for a square row-major matrix `M`.
#[derive(Clone, Debug)]
pub struct LinearField {
    n: usize,
    matrix: Vec<f64>,
}

impl LinearField {
    pub fn new(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != n * n || n == 0 {
            return Err(Error::invalid(format!(
                "linear field needs {n}x{n} entries, got {}",
                matrix.len()
            )));
        }
        Ok(Self { n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        Self { n, matrix }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.iter().map(|v| v * v).sum()
    }

    fn matvec(&self, v: &Tensor, transpose: bool) -> Tensor {
        let n = self.n;
        let x = v.data();
        let out = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let m = if transpose {
                            self.matrix[j * n + i]
                        } else {
                            self.matrix[i * n + j]
                        };
                        m * x[j]
                    })
                    .sum()
            })
            .collect();
        Tensor::from_parts(v.shape().to_vec(), out)
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> Option<usize> {
        Some(self.n)
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        check_dim(self, x)?;
        Ok(self.matvec(x, false))
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        check_dim(self, x)?;
        x.check_same_shape(v)?;
        Ok(self.matvec(v, false))
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        check_dim(self, x)?;
        x.check_same_shape(w)?;
        Ok(self.matvec(w, true))
    }
}

/// `u_t(x) + shift`: a base field with a constant offset, used as a
/// controlled "learned" approximation of a known field.
pub struct ShiftedField<'a> {
    base: &'a dyn VectorField,
    shift: Tensor,
}

impl<'a> ShiftedField<'a> {
    pub fn new(base: &'a dyn VectorField, shift: Tensor) -> Self {
        Self { base, shift }
    }
}

impl VectorField for ShiftedField<'_> {
    fn dim(&self) -> Option<usize> {
        Some(self.shift.len())
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_dim(self, x)?;
        self.base.eval(t, x)?.add(&self.shift.reshape(x.shape())?)
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        self.base.jvp(t, x, v)
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        self.base.vjp(t, x, w)
    }
}

/// The flow-matching denoiser `D_t(x) = x + (1 - t) u_t(x)`: the field's
/// estimate of the clean endpoint given a point on the straight-line path.
#[derive(Clone, Copy)]
pub struct Denoiser<'a> {
    field: &'a dyn VectorField,
}

impl<'a> Denoiser<'a> {
    pub fn new(field: &'a dyn VectorField) -> Self {
        Self { field }
    }

    pub fn field(&self) -> &'a dyn VectorField {
        self.field
    }

    pub fn denoise(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        if t == 1.0 {
            return Ok(x.clone());
        }
        let u = self.field.eval(t, x)?;
        x.axpy(1.0 - t, &u)
    }
}
