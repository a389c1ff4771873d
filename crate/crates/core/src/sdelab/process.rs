use std::sync::Arc;

use rayon::prelude::*;

use crate::degrade::DataTerm;
use crate::error::{Error, Result};
use crate::flowfield::VectorField;
use crate::numerics::{derive_stream, gaussian_sample, RngStream, Tensor};
use crate::schedule::{constant, piecewise_linear, Sampler, Schedule};

/// Base stream id for per-path Wiener increments.
pub const PATH_STREAM_BASE: u64 = 0x7061_7468_0000;

/// The surrogate SDE
/// `dX = b_t(X) / (1 - alpha(t)) dt + sigma(t) / (1 - alpha(t)) dW` with
/// drift `b_t(x) = -x - beta(t) grad f(x) + u_{tau(t)}(x)` on `[t0, t_end]`.
///
/// `tau` maps pseudo-time to the field's own time in `[0, 1]`; it defaults
/// to the identity.
#[derive(Clone)]
pub struct SdeProcess<'a> {
    pub field: &'a dyn VectorField,
    pub data: &'a dyn DataTerm,
    pub beta: Sampler,
    pub sigma: Sampler,
    pub alpha: Sampler,
    pub flow_time: Sampler,
    pub t0: f64,
    pub t_end: f64,
}

impl<'a> SdeProcess<'a> {
    /// Drift `-x + u_t(x)` only: no data term, no noise, no rescaling.
    pub fn new(field: &'a dyn VectorField, data: &'a dyn DataTerm, t0: f64, t_end: f64) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && t_end >= t0) {
            return Err(Error::invalid(format!("bad horizon [{t0}, {t_end}]")));
        }
        Ok(Self {
            field,
            data,
            beta: constant(0.0),
            sigma: constant(0.0),
            alpha: constant(0.0),
            flow_time: Arc::new(|t| t),
            t0,
            t_end,
        })
    }

    /// The continuous counterpart of iterations `start..=N` of `schedule`:
    /// knots at the pseudo-times `t_j`, with `beta`, `sigma = sqrt(1 - l)`
    /// and the flow time `l` interpolated linearly between them. The last
    /// knot (`k = N`) carries `beta = 0` when `l_N` is exactly one.
    pub fn from_schedule(
        field: &'a dyn VectorField,
        data: &'a dyn DataTerm,
        schedule: &Schedule,
        start: usize,
    ) -> Result<Self> {
        let n = schedule.iterations();
        if start >= n {
            return Err(Error::invalid(format!("start {start} leaves no iterations out of {n}")));
        }
        let knots = schedule.pseudo_times(start, n);
        let ks: Vec<usize> = (start..=n).collect();
        let beta = ks.iter().map(|&k| schedule.beta(k).unwrap_or(0.0)).collect();
        let sigma = ks.iter().map(|&k| schedule.sigma(k)).collect();
        let tau = ks.iter().map(|&k| schedule.l(k)).collect();
        let mut p = Self::new(field, data, knots[0], *knots.last().expect("non-empty"))?;
        p.beta = piecewise_linear(knots.clone(), beta)?;
        p.sigma = piecewise_linear(knots.clone(), sigma)?;
        p.flow_time = piecewise_linear(knots, tau)?;
        Ok(p)
    }

    /// Adds the inertial rescaling `alpha_k` of an extrapolated schedule,
    /// interpolated on the same knots as [`from_schedule`](Self::from_schedule).
    pub fn with_schedule_alpha(mut self, schedule: &Schedule, start: usize) -> Result<Self> {
        let n = schedule.iterations();
        let knots = schedule.pseudo_times(start, n);
        let alpha = (start..=n)
            .map(|k| if k == 0 { Ok(0.0) } else { schedule.alpha(k).or(Ok(0.0)) })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(a) = alpha.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::invalid(format!("rescale alpha {a} outside [0, 1)")));
        }
        self.alpha = piecewise_linear(knots, alpha)?;
        Ok(self)
    }

    pub fn drift(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        let tau = (self.flow_time)(t).clamp(0.0, 1.0);
        let u = self.field.eval(tau, x)?;
        let mut b = u.sub(x)?;
        let beta = (self.beta)(t);
        if beta != 0.0 {
            b = b.axpy(-beta, &self.data.grad(x)?)?;
        }
        Ok(b)
    }

    /// One Euler-Maruyama step with Wiener increment `dw`.
    pub fn em_step(&self, t: f64, dt: f64, x: &Tensor, dw: &Tensor) -> Result<Tensor> {
        let drift = self.drift(t, x)?;
        let sigma = (self.sigma)(t);
        let alpha = (self.alpha)(t);
        let next = if alpha == 0.0 {
            x.axpy(dt, &drift)?.axpy(sigma, dw)?
        } else {
            let scale = 1.0 / (1.0 - alpha);
            x.axpy(dt * scale, &drift)?.axpy(sigma * scale, dw)?
        };
        Ok(next)
    }

    /// Checks `sigma >= 0` non-increasing and `alpha in [0, 1)` at the grid points.
    pub fn validate_on(&self, grid: &[f64]) -> Result<()> {
        check_grid(grid, self.t0)?;
        if *grid.last().expect("checked") > self.t_end * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid("grid extends past the horizon"));
        }
        let mut prev = f64::INFINITY;
        for &t in grid {
            let s = (self.sigma)(t);
            if !(s >= 0.0) || s > prev * (1.0 + 1e-12) {
                return Err(Error::invalid(format!("sigma must be non-negative and non-increasing, got {s} at {t}")));
            }
            prev = s;
            let a = (self.alpha)(t);
            if !(0.0..1.0).contains(&a) {
                return Err(Error::invalid(format!("alpha({t}) = {a} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_grid(grid: &[f64], t0: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    if (grid[0] - t0).abs() > 1e-12 * (1.0 + t0.abs()) {
        return Err(Error::invalid(format!("grid starts at {} instead of t0 = {t0}", grid[0])));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// `n + 1` equally spaced points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

/// One simulated path and the Wiener increments that drove it.
#[derive(Clone, Debug)]
pub struct Path {
    pub states: Vec<Tensor>,
    pub increments: Vec<Tensor>,
}

/// Integrates with given increments `dW_j`, one per grid interval.
pub fn euler_maruyama_with(process: &SdeProcess<'_>, x0: &Tensor, grid: &[f64], dws: &[Tensor]) -> Result<Vec<Tensor>> {
    check_grid(grid, process.t0)?;
    if dws.len() + 1 != grid.len() {
        return Err(Error::invalid(format!(
            "{} increments for a grid of {} points",
            dws.len(),
            grid.len()
        )));
    }
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.clone());
    for (j, dw) in dws.iter().enumerate() {
        let dt = grid[j + 1] - grid[j];
        let next = process.em_step(grid[j], dt, &states[j], dw)?;
        if !next.all_finite() {
            return Err(Error::Diverged {
                step: j,
                reason: format!("non-finite state at t = {}", grid[j + 1]),
            });
        }
        states.push(next);
    }
    Ok(states)
}

/// Wiener increments `sqrt(dt_j) xi_j` over a grid.
pub fn wiener_increments(grid: &[f64], shape: &[usize], rng: &mut RngStream) -> Result<Vec<Tensor>> {
    grid.windows(2)
        .map(|w| Ok(gaussian_sample(rng, shape)?.scale((w[1] - w[0]).sqrt())))
        .collect()
}

/// Euler-Maruyama
/// `X_{j+1} = X_j + dt b(X_j) / (1 - alpha) + sigma / (1 - alpha) sqrt(dt) xi_j`.
pub fn euler_maruyama(process: &SdeProcess<'_>, x0: &Tensor, grid: &[f64], rng: &mut RngStream) -> Result<Path> {
    let increments = wiener_increments(grid, x0.shape(), rng)?;
    let states = euler_maruyama_with(process, x0, grid, &increments)?;
    Ok(Path { states, increments })
}

/// `M` paths from a common start on a shared grid.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub grid: Vec<f64>,
    pub paths: Vec<Path>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Per-path `||X_{t_j} - X_T||^2` with `X_T` the terminal state.
    pub fn squared_gaps(&self) -> Result<Vec<Vec<f64>>> {
        self.paths
            .iter()
            .map(|p| {
                let last = p.states.last().expect("non-empty path");
                p.states.iter().map(|x| Ok(x.sub(last)?.norm_sq())).collect()
            })
            .collect()
    }
}

/// Stream of path `p` under `seed`.
pub fn path_rng(seed: u64, p: usize) -> RngStream {
    RngStream::new(seed, derive_stream(PATH_STREAM_BASE, p as u64))
}

/// Simulates `paths` independent paths in parallel; path `p` uses its own
/// stream, so the result does not depend on the thread count.
pub fn simulate_ensemble(
    process: &SdeProcess<'_>,
    x0: &Tensor,
    grid: &[f64],
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    process.validate_on(grid)?;
    let paths = (0..paths)
        .into_par_iter()
        .map(|p| euler_maruyama(process, x0, grid, &mut path_rng(seed, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble {
        grid: grid.to_vec(),
        paths,
    })
}
