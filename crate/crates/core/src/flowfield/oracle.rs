use super::{check_time, VectorField};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Exact marginal field of straight-line flow matching from the prior
/// `N(0, I)` to the target `N(mu, s^2 I)` with independently drawn endpoints.
///
/// With `x_t = (1 - t) x_0 + t x_1` the marginal at time `t` is
/// `N(t mu, c_t^2 I)` where `c_t^2 = (1 - t)^2 + t^2 s^2`, and
///
/// `u_t(x) = E[x_1 - x_0 | x_t = x] = mu + (t s^2 - (1 - t)) / c_t^2 * (x - t mu)`.
///
/// The Jacobian is the scalar multiple `(t s^2 - (1 - t)) / c_t^2` of the identity.
#[derive(Clone, Debug)]
pub struct GaussianOracleField {
    mean: Tensor,
    std: f64,
}

impl GaussianOracleField {
    pub fn new(mean: Tensor, std: f64) -> Result<Self> {
        if !(std.is_finite() && std > 0.0) {
            return Err(Error::invalid(format!("target std must be positive, got {std}")));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    /// Standard deviation of the marginal at time `t`.
    pub fn marginal_std(&self, t: f64) -> f64 {
        ((1.0 - t).powi(2) + (t * self.std).powi(2)).sqrt()
    }

    /// The scalar Jacobian `d u_t / d x`.
    pub fn jacobian_scale(&self, t: f64) -> f64 {
        let s2 = self.std * self.std;
        let c2 = (1.0 - t).powi(2) + t * t * s2;
        (t * s2 - (1.0 - t)) / c2
    }

    /// Largest `|jacobian_scale(t)|` over `t in [0, 1]`, the field's exact
    /// Lipschitz constant in `x`. The extremum sits at `t = (1 -+ s) / (1 + s^2)`
    /// where the scale equals `-+(1 + s^2) / (2 s)`, which dominates the
    /// endpoint values `-1` and `1`.
    pub fn lipschitz_sup(&self) -> f64 {
        (1.0 + self.std * self.std) / (2.0 * self.std)
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::invalid(format!(
                "oracle field has dimension {}, got shape {:?}",
                self.mean.len(),
                x.shape()
            )));
        }
        Ok(())
    }
}

impl VectorField for GaussianOracleField {
    fn dim(&self) -> Option<usize> {
        Some(self.mean.len())
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        self.check(x)?;
        let coef = self.jacobian_scale(t);
        let out = x
            .data()
            .iter()
            .zip(self.mean.data())
            .map(|(&xi, &mi)| mi + coef * (xi - t * mi))
            .collect();
        Ok(Tensor::from_parts(x.shape().to_vec(), out))
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        self.check(x)?;
        x.check_same_shape(v)?;
        Ok(v.scale(self.jacobian_scale(t)))
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        self.jvp(t, x, w)
    }
}
