use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar function of pseudo-time.
pub type Sampler = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default number of trapezoid panels for bound integrals.
pub const DEFAULT_PANELS: usize = 1024;

pub fn constant(value: f64) -> Sampler {
    Arc::new(move |_| value)
}

/// Piecewise-linear interpolation through `(ts[i], vs[i])`, held constant
/// outside the knots.
pub fn piecewise_linear(ts: Vec<f64>, vs: Vec<f64>) -> Result<Sampler> {
    if ts.is_empty() || ts.len() != vs.len() {
        return Err(Error::invalid("interpolation needs matching, non-empty knots and values"));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("interpolation knots must be strictly increasing"));
    }
    Ok(Arc::new(move |t| interpolate(&ts, &vs, t)))
}

pub(crate) fn interpolate(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if t <= ts[0] {
        return vs[0];
    }
    if t >= ts[n - 1] {
        return vs[n - 1];
    }
    let j = ts.partition_point(|&k| k <= t) - 1;
    let w = (t - ts[j]) / (ts[j + 1] - ts[j]);
    vs[j] + w * (vs[j + 1] - vs[j])
}

/// Composite trapezoid rule with `panels` equal panels on `[a, b]`.
pub fn trapezoid(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut sum = 0.5 * (f(a) + f(b));
    for i in 1..panels {
        sum += f(a + i as f64 * h);
    }
    sum * h
}

/// Trapezoid rule over tabulated values on a (possibly non-uniform) grid.
pub fn trapezoid_samples(ts: &[f64], vs: &[f64]) -> f64 {
    ts.windows(2)
        .zip(vs.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Cumulative trapezoid integrals, `out[j] = int_{ts[0]}^{ts[j]}`.
pub fn cumulative_trapezoid(ts: &[f64], vs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    if !ts.is_empty() {
        out.push(0.0);
    }
    for (t, v) in ts.windows(2).zip(vs.windows(2)) {
        acc += 0.5 * (t[1] - t[0]) * (v[0] + v[1]);
        out.push(acc);
    }
    out
}

/// Constants and coefficient functions entering the error and convergence bounds.
#[derive(Clone)]
pub struct BoundInputs {
    /// `E||X_{t0} - X~_{t0}||`, the initial coupling error.
    pub eps0: f64,
    /// `s -> E||u_s - u~_s||` along the learned process.
    pub approx_error: Sampler,
    /// Lipschitz constant of the field in `x`.
    pub lip_u: f64,
    /// Lipschitz constant of `grad f`.
    pub lip_f: f64,
    /// Bound on `||grad f||`.
    pub grad_bound: f64,
    /// Strong convexity modulus of `f` (0 if merely convex).
    pub strong_convexity: f64,
    /// Free Young's-inequality weight, strictly positive.
    pub eta: f64,
    pub beta: Sampler,
    pub sigma: Sampler,
    pub t0: f64,
    pub t: f64,
    /// State dimension.
    pub dim: usize,
    /// `E||X_{t0} - X_T||^2`, the first term of `A`.
    pub initial_gap: f64,
    pub panels: usize,
}

impl fmt::Debug for BoundInputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundInputs")
            .field("eps0", &self.eps0)
            .field("lip_u", &self.lip_u)
            .field("lip_f", &self.lip_f)
            .field("grad_bound", &self.grad_bound)
            .field("strong_convexity", &self.strong_convexity)
            .field("eta", &self.eta)
            .field("t0", &self.t0)
            .field("t", &self.t)
            .field("dim", &self.dim)
            .field("initial_gap", &self.initial_gap)
            .finish_non_exhaustive()
    }
}

impl BoundInputs {
    /// Zero constants, `eta = 1`, and zero samplers on `[t0, t]`.
    pub fn new(t0: f64, t: f64, dim: usize) -> Self {
        Self {
            eps0: 0.0,
            approx_error: constant(0.0),
            lip_u: 0.0,
            lip_f: 0.0,
            grad_bound: 0.0,
            strong_convexity: 0.0,
            eta: 1.0,
            beta: constant(0.0),
            sigma: constant(0.0),
            t0,
            t,
            dim,
            initial_gap: 0.0,
            panels: DEFAULT_PANELS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.t0 >= 0.0 && self.t >= self.t0) {
            return Err(Error::invalid(format!("need t >= t0 >= 0, got t0 {} t {}", self.t0, self.t)));
        }
        for (name, v) in [
            ("eps0", self.eps0),
            ("lip_u", self.lip_u),
            ("lip_f", self.lip_f),
            ("grad_bound", self.grad_bound),
            ("strong_convexity", self.strong_convexity),
            ("initial_gap", self.initial_gap),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Same inputs on the shorter horizon `[t0, t]`.
    pub fn until(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }
}

/// Error-bound ingredients: `C = eps0 + int E||u - u~||` and `B = int (1 + beta L_f + L_u)`.
pub fn gronwall_terms(inputs: &BoundInputs) -> Result<(f64, f64)> {
    inputs.validate()?;
    let approx = &inputs.approx_error;
    let c = inputs.eps0 + trapezoid(&|s| approx(s), inputs.t0, inputs.t, inputs.panels);
    let beta = &inputs.beta;
    let (lf, lu) = (inputs.lip_f, inputs.lip_u);
    let b = trapezoid(&|s| 1.0 + beta(s) * lf + lu, inputs.t0, inputs.t, inputs.panels);
    Ok((c, b))
}

/// `C e^B`, an upper bound on `E||X_t - X~_t||` for coupled true and learned processes.
pub fn gronwall_error_bound(inputs: &BoundInputs) -> Result<f64> {
    let (c, b) = gronwall_terms(inputs)?;
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * b.exp())
}

/// Regularity class of the fidelity term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundCase {
    Lipschitz,
    Convex,
    StronglyConvex,
}

impl FromStr for BoundCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz" => Ok(BoundCase::Lipschitz),
            "convex" => Ok(BoundCase::Convex),
            "strongly-convex" => Ok(BoundCase::StronglyConvex),
            other => Err(Error::invalid(format!(
                "unknown bound case '{other}' (expected lipschitz, convex or strongly-convex)"
            ))),
        }
    }
}

/// Coefficient `B(s)` multiplying `E||X_s - X_T||^2` in the convergence inequality.
pub fn case_b(case: BoundCase, lip_u: f64, lip_f: f64, mu_f: f64, beta: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let base = -1.0 + lip_u + eta * beta / 2.0;
    Ok(match case {
        BoundCase::Lipschitz => base + beta * lip_f,
        BoundCase::Convex => base,
        BoundCase::StronglyConvex => base - beta * mu_f,
    })
}

/// The deterministic part of the convergence right-hand side together with the
/// (possibly rescaled) coefficient `B(s) / (1 - alpha(s))`.
#[derive(Clone)]
pub struct ConvergenceTerms {
    /// `A` (or `A_alpha`).
    pub a: f64,
    /// `s -> B(s) / (1 - alpha(s))`.
    pub b_scaled: Sampler,
}

fn drive_integrand(inputs: &BoundInputs, s: f64) -> f64 {
    let sigma = (inputs.sigma)(s);
    let beta = (inputs.beta)(s);
    inputs.dim as f64 * sigma * sigma + inputs.grad_bound * inputs.grad_bound * beta / (2.0 * inputs.eta)
}

/// Terms of the accelerated convergence bound
/// `A_alpha = E||X_{t0} - X_T||^2 + int (n sigma^2 + M_f^2 beta / (2 eta)) / (1 - alpha)^2`
/// and the scaled coefficient `B(s) / (1 - alpha(s))`. With `alpha == 0` these
/// are exactly the unaccelerated terms.
pub fn accel_bound_terms(inputs: &BoundInputs, case: BoundCase, alpha: Sampler) -> Result<ConvergenceTerms> {
    inputs.validate()?;
    let panels = inputs.panels.max(1);
    let h = (inputs.t - inputs.t0) / panels as f64;
    for i in 0..=panels {
        let s = inputs.t0 + i as f64 * h;
        let a = alpha(s);
        if !(0.0..1.0).contains(&a) {
            return Err(Error::invalid(format!("alpha({s}) = {a} outside [0, 1)")));
        }
    }
    let integral = trapezoid(
        &|s| {
            let scale = 1.0 - alpha(s);
            drive_integrand(inputs, s) / (scale * scale)
        },
        inputs.t0,
        inputs.t,
        panels,
    );
    let a = inputs.initial_gap + integral;
    let ins = inputs.clone();
    let b_scaled: Sampler = Arc::new(move |s| {
        let b = case_b(case, ins.lip_u, ins.lip_f, ins.strong_convexity, (ins.beta)(s), ins.eta)
            .expect("eta validated above");
        b / (1.0 - alpha(s))
    });
    Ok(ConvergenceTerms { a, b_scaled })
}

/// Unaccelerated convergence terms `A` and `B(s)`.
pub fn convergence_terms(inputs: &BoundInputs, case: BoundCase) -> Result<ConvergenceTerms> {
    accel_bound_terms(inputs, case, constant(0.0))
}
