use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::process::{euler_maruyama_with, SdeProcess};
use crate::degrade::DataTerm;
use crate::error::{Error, Result};
use crate::flowfield::VectorField;
use crate::numerics::{gaussian_sample, RngStream, Tensor};
use crate::schedule::{constant, Schedule};
use crate::solver::{step_from, SolverConfig, NOISE_STREAM};

/// Stream for the extra normals of Brownian-bridge refinement.
pub const BRIDGE_STREAM: u64 = 0x6272_6964_6765;

/// How the continuous path is integrated between two iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridPolicy {
    /// One Euler-Maruyama step per iteration, on the schedule's own knots.
    Schedule,
    /// `m` equal sub-steps per iteration; the iteration's increment is split
    /// by a Brownian bridge, so the coupling to `xi_k` is kept exactly.
    Refined(usize),
}

impl GridPolicy {
    fn substeps(self) -> usize {
        match self {
            GridPolicy::Schedule => 1,
            GridPolicy::Refined(m) => m.max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscrepancyRow {
    /// Iteration index of the step's start.
    pub k: usize,
    /// Pseudo-time at the end of the step.
    pub t: f64,
    /// Step size `1 - l_k`.
    pub dt: f64,
    /// `||x_{k+1} - Phi_k(x_k)||`: one step of the integrator started from
    /// the iterate itself.
    pub local: f64,
    /// `||x_{k+1} - X(t_{k+1})||` along the continuous path from `X(t_K) = x_K`.
    pub global: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiscrepancyReport {
    pub rows: Vec<DiscrepancyRow>,
}

impl DiscrepancyReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn sup_local(&self) -> f64 {
        self.rows.iter().map(|r| r.local).fold(0.0, f64::max)
    }

    pub fn sup_global(&self) -> f64 {
        self.rows.iter().map(|r| r.global).fold(0.0, f64::max)
    }

    /// The largest step in the window, `1 - l_K` for decreasing schedules.
    pub fn max_step(&self) -> f64 {
        self.rows.iter().map(|r| r.dt).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,dt,local,global\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.10},{:.10e},{:.10e},{:.10e}", r.k, r.t, r.dt, r.local, r.global);
        }
        out
    }
}

/// Options for [`discrete_vs_sde`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscrepancyOptions {
    pub policy: GridPolicy,
    /// Forces `xi_k = 0` in the iteration and `sigma = 0` in the SDE.
    pub zero_noise: bool,
}

impl Default for DiscrepancyOptions {
    fn default() -> Self {
        Self {
            policy: GridPolicy::Schedule,
            zero_noise: false,
        }
    }
}

/// Smallest `K` whose remaining pseudo-time `sum_{K <= k < N} (1 - l_k)`
/// is at most `window`.
pub fn anchor_for_window(schedule: &Schedule, window: f64) -> usize {
    let n = schedule.iterations();
    let mut remaining = 0.0;
    for k in (0..n).rev() {
        remaining += schedule.one_minus_l(k);
        if remaining > window {
            return k + 1;
        }
    }
    0
}

fn bridge(total: &Tensor, dt: f64, m: usize, rng: &mut RngStream) -> Result<Vec<Tensor>> {
    if m == 1 {
        return Ok(vec![total.clone()]);
    }
    let sub = (dt / m as f64).sqrt();
    let zs = (0..m)
        .map(|_| Ok(gaussian_sample(rng, total.shape())?.scale(sub)))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = total.zeros_like();
    for z in &zs {
        sum = sum.add(z)?;
    }
    let correction = total.sub(&sum)?.scale(1.0 / m as f64);
    zs.iter().map(|z| z.add(&correction)).collect()
}

/// Runs the plain iteration from `x0` and, from the warm-up index
/// `K = cfg.warmup` on, the Euler-Maruyama discretization of its SDE limit
/// anchored at `X(t_K) = x_K`. The iteration's draw `xi_k` and the SDE's
/// increment over `[t_k, t_{k+1}]` are matched: `dW = sqrt(1 - l_k) xi_k`.
pub fn discrete_vs_sde(
    data: &dyn DataTerm,
    x0: &Tensor,
    field: &dyn VectorField,
    cfg: &SolverConfig,
    opts: &DiscrepancyOptions,
) -> Result<DiscrepancyReport> {
    cfg.validate()?;
    let schedule = &cfg.schedule;
    if schedule.max_h() != 0.0 {
        return Err(Error::Config("the comparison covers the plain iteration; set h = 0".into()));
    }
    if cfg.noise_draws != 1 {
        return Err(Error::Config("the comparison needs exactly one noise draw per step".into()));
    }
    let n = schedule.iterations();
    let k0 = cfg.warmup;
    let mut noise_rng = RngStream::new(cfg.seed, NOISE_STREAM);
    let mut bridge_rng = RngStream::new(cfg.seed, BRIDGE_STREAM);
    let draw = |rng: &mut RngStream| -> Result<Tensor> {
        let xi = gaussian_sample(rng, x0.shape())?;
        Ok(if opts.zero_noise { xi.zeros_like() } else { xi })
    };

    let mut x = x0.clone();
    for k in 0..k0 {
        let xi = draw(&mut noise_rng)?;
        x = step_from(&x, k, field, data, schedule, &[xi])?;
    }
    if k0 == n {
        return Ok(DiscrepancyReport::default());
    }

    let mut process = SdeProcess::from_schedule(field, data, schedule, k0)?;
    if opts.zero_noise {
        process.sigma = constant(0.0);
    }
    let knots = schedule.pseudo_times(k0, n);
    let m = opts.policy.substeps();
    let mut continuous = x.clone();
    let mut rows = Vec::with_capacity(n - k0);
    for (j, k) in (k0..n).enumerate() {
        let (ta, tb) = (knots[j], knots[j + 1]);
        let dt = tb - ta;
        let xi = draw(&mut noise_rng)?;
        let next = step_from(&x, k, field, data, schedule, std::slice::from_ref(&xi))?;
        let dws = bridge(&xi.scale(dt.sqrt()), dt, m, &mut bridge_rng)?;
        let sub_grid: Vec<f64> = (0..=m)
            .map(|i| if i == m { tb } else { ta + dt * i as f64 / m as f64 })
            .collect();
        let mut local_proc = process.clone();
        local_proc.t0 = ta;
        let from_iterate = euler_maruyama_with(&local_proc, &x, &sub_grid, &dws)?;
        let from_path = euler_maruyama_with(&local_proc, &continuous, &sub_grid, &dws)?;
        let local = next.sub(from_iterate.last().expect("non-empty"))?.norm_l2();
        continuous = from_path.into_iter().last().expect("non-empty");
        let global = next.sub(&continuous)?.norm_l2();
        rows.push(DiscrepancyRow {
            k,
            t: tb,
            dt: schedule.one_minus_l(k),
            local,
            global,
        });
        x = next;
    }
    Ok(DiscrepancyReport { rows })
}
