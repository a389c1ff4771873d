use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::step::{extrapolate, step_from};
use crate::degrade::{DataTerm, FidelityProblem};
use crate::error::{Error, Result};
use crate::flowfield::VectorField;
use crate::harness::{format_psnr, psnr, ssim};
use crate::numerics::{gaussian_sample, RngStream, Tensor};
use crate::schedule::Schedule;

/// Stream ids under the run seed.
pub const NOISE_STREAM: u64 = 0x6e6f_6973_65;
pub const INIT_STREAM: u64 = 0x696e_6974;

/// Divergence guard on `||x||_inf` and on step norms.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Starting point of the iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// `x_0 = A^T w`.
    #[default]
    ObservationAdjoint,
    Zeros,
    /// `x_0 ~ N(0, I)` from the run's init stream.
    Gaussian,
}

/// Everything a restoration run needs besides the problem and the field.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub schedule: Schedule,
    /// Warm-up index `K`, where the continuous picture is anchored.
    pub warmup: usize,
    /// Hard cap `zeta < 1` on the extrapolation coefficient.
    pub max_extrapolation: f64,
    /// Lifts the cap; only for demonstrating divergence.
    pub unsafe_h: bool,
    pub noise_draws: usize,
    pub seed: u64,
    pub init: InitMode,
}

impl SolverConfig {
    pub fn new(schedule: Schedule, seed: u64) -> Self {
        Self {
            warmup: schedule.iterations(),
            schedule,
            max_extrapolation: 0.95,
            unsafe_h: false,
            noise_draws: 1,
            seed,
            init: InitMode::ObservationAdjoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_extrapolation >= 0.0 && self.max_extrapolation < 1.0) {
            return Err(Error::Config(format!(
                "extrapolation cap must lie in [0, 1), got {}",
                self.max_extrapolation
            )));
        }
        if self.noise_draws == 0 {
            return Err(Error::Config("noise_draws must be at least 1".into()));
        }
        if self.warmup > self.schedule.iterations() {
            return Err(Error::Config(format!(
                "warm-up index {} exceeds the {} iterations",
                self.warmup,
                self.schedule.iterations()
            )));
        }
        Ok(())
    }

    /// The extrapolation coefficient actually used at step `k`.
    pub fn effective_h(&self, k: usize) -> f64 {
        let h = self.schedule.h(k);
        if self.unsafe_h {
            h
        } else {
            h.min(self.max_extrapolation)
        }
    }

    pub fn initial_state(&self, problem: &FidelityProblem) -> Result<Tensor> {
        let shape = problem.operator().input_shape().to_vec();
        match self.init {
            InitMode::ObservationAdjoint => problem.adjoint_observation(),
            InitMode::Zeros => Tensor::zeros(&shape),
            InitMode::Gaussian => gaussian_sample(&mut RngStream::new(self.seed, INIT_STREAM), &shape),
        }
    }
}

/// One iterate and its diagnostics.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    pub l: f64,
    pub h: f64,
    pub state: Tensor,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub fidelity: f64,
    /// `||x_k - x_{k-1}||`, zero for the first record.
    pub step_norm: f64,
    /// `||x_k - w_{k-1}|| / (1 - l_{k-1})`: the non-inertial part of the
    /// step per unit step size, zero for the first record.
    pub driver_norm: f64,
}

/// Ordered iterates `x_0, x_1, ...` of one run.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_state(&self) -> Option<&Tensor> {
        self.records.last().map(|r| &r.state)
    }

    pub fn state(&self, k: usize) -> Option<&Tensor> {
        self.records.get(k).map(|r| &r.state)
    }

    /// CSV with columns `k,l_k,psnr,ssim,fidelity,step_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,l_k,psnr,ssim,fidelity,step_norm\n");
        for r in &self.records {
            let p = r.psnr.map(format_psnr).unwrap_or_default();
            let s = r.ssim.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:.10},{},{},{:.10e},{:.10e}", r.k, r.l, p, s, r.fidelity, r.step_norm);
        }
        out
    }
}

/// Result of a restoration run. A diverged run keeps its partial trajectory.
#[derive(Clone, Debug)]
pub struct RestoreRun {
    pub trajectory: Trajectory,
    pub divergence: Option<(usize, String)>,
}

impl RestoreRun {
    pub fn final_state(&self) -> &Tensor {
        self.trajectory.last_state().expect("trajectory holds the initial state")
    }

    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// The final state, or [`Error::Diverged`] if the guard fired.
    pub fn into_result(self) -> Result<(Tensor, Trajectory)> {
        if let Some((step, reason)) = self.divergence {
            return Err(Error::Diverged { step, reason });
        }
        let x = self.final_state().clone();
        Ok((x, self.trajectory))
    }
}

fn metrics(reference: Option<&Tensor>, x: &Tensor) -> Result<(Option<f64>, Option<f64>)> {
    let Some(r) = reference else {
        return Ok((None, None));
    };
    let p = psnr(r, x)?;
    let s = if x.shape().len() >= 2 { Some(ssim(r, x)?) } else { None };
    Ok((Some(p), s))
}

/// Runs `N` iterations from the configured start, extrapolating whenever the
/// schedule's `h_k` is non-zero. Noise comes from the `NOISE_STREAM` of the
/// run seed, so equal seeds give identical runs.
pub fn restore(
    problem: &FidelityProblem,
    field: &dyn VectorField,
    cfg: &SolverConfig,
    reference: Option<&Tensor>,
) -> Result<RestoreRun> {
    let x0 = cfg.initial_state(problem)?;
    restore_from(x0, problem, field, cfg, reference)
}

/// [`restore`] from an explicit starting point.
pub fn restore_from(
    x0: Tensor,
    data: &dyn DataTerm,
    field: &dyn VectorField,
    cfg: &SolverConfig,
    reference: Option<&Tensor>,
) -> Result<RestoreRun> {
    cfg.validate()?;
    let schedule = &cfg.schedule;
    let mut rng = RngStream::new(cfg.seed, NOISE_STREAM);
    let (p, s) = metrics(reference, &x0)?;
    let mut traj = Trajectory {
        records: vec![StepRecord {
            k: 0,
            l: schedule.l(0),
            h: 0.0,
            fidelity: data.value(&x0)?,
            state: x0.clone(),
            psnr: p,
            ssim: s,
            step_norm: 0.0,
            driver_norm: 0.0,
        }],
    };
    let mut x_prev = x0.clone();
    let mut x = x0;
    for k in 0..schedule.iterations() {
        let h = cfg.effective_h(k);
        let w = extrapolate(&x, &x_prev, h)?;
        let noise = (0..cfg.noise_draws)
            .map(|_| gaussian_sample(&mut rng, x.shape()))
            .collect::<Result<Vec<_>>>()?;
        let next = match step_from(&w, k, field, data, schedule, &noise) {
            Ok(v) => v,
            Err(Error::Diverged { step, reason }) => {
                return Ok(RestoreRun {
                    trajectory: traj,
                    divergence: Some((step, reason)),
                })
            }
            Err(e) => return Err(e),
        };
        let step_norm = next.sub(&x)?.norm_l2();
        let driver_norm = next.sub(&w)?.norm_l2() / schedule.one_minus_l(k);
        let blown = next.norm_inf() > DIVERGENCE_THRESHOLD || step_norm > DIVERGENCE_THRESHOLD;
        if blown || !step_norm.is_finite() {
            return Ok(RestoreRun {
                trajectory: traj,
                divergence: Some((k, format!("state norm exceeded {DIVERGENCE_THRESHOLD:e}"))),
            });
        }
        let (p, s) = metrics(reference, &next)?;
        let fidelity = data.value(&next)?;
        traj.records.push(StepRecord {
            k: k + 1,
            l: schedule.l(k + 1),
            h,
            state: next.clone(),
            psnr: p,
            ssim: s,
            fidelity,
            step_norm,
            driver_norm,
        });
        x_prev = std::mem::replace(&mut x, next);
    }
    Ok(RestoreRun {
        trajectory: traj,
        divergence: None,
    })
}

/// Running sums of step norms and the envelope they must respect.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyReport {
    /// `S_j = sum_{k < j} ||x_{k+1} - x_k||`.
    pub partial_sums: Vec<f64>,
    /// `M = max_k ||x_{k+1} - w_k|| / (1 - l_k)`.
    pub driver_max: f64,
    /// Largest extrapolation coefficient used, the `zeta` of the envelope.
    pub zeta: f64,
    /// `M sum_k (1 - l_k) / (1 - zeta)`, infinite when `zeta >= 1`.
    pub envelope: f64,
    /// Whether the final running sum stays within the envelope.
    pub bounded: bool,
}

impl CauchyReport {
    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Step-norm sums of a trajectory against the inertial envelope
/// `||x_{k+1} - x_k|| <= h ||x_k - x_{k-1}|| + M (1 - l_k)`, which sums to
/// `M sum (1 - l_k) / (1 - zeta)`.
pub fn cauchy_diagnostic(traj: &Trajectory) -> Result<CauchyReport> {
    if traj.len() < 2 {
        return Err(Error::invalid("the diagnostic needs at least two states"));
    }
    let mut partial_sums = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    partial_sums.push(0.0);
    let mut driver_max: f64 = 0.0;
    let mut zeta: f64 = 0.0;
    let mut pseudo = 0.0;
    for pair in traj.records.windows(2) {
        let r = &pair[1];
        acc += r.step_norm;
        partial_sums.push(acc);
        driver_max = driver_max.max(r.driver_norm);
        zeta = zeta.max(r.h);
        pseudo += 1.0 - pair[0].l;
    }
    let envelope = if zeta < 1.0 {
        driver_max * pseudo / (1.0 - zeta)
    } else {
        f64::INFINITY
    };
    let bounded = envelope.is_finite() && acc <= envelope * (1.0 + 1e-12);
    Ok(CauchyReport {
        partial_sums,
        driver_max,
        zeta,
        envelope,
        bounded,
    })
}
