use std::fmt::Write as _;

use super::process::{PathEnsemble, SdeProcess};
use crate::degrade::DataTerm;
use crate::error::{Error, Result};
use crate::flowfield::lipschitz_estimate;
use crate::numerics::{mean_and_stderr, RngStream};
use crate::schedule::{accel_bound_terms, convergence_terms, cumulative_trapezoid, BoundCase, BoundInputs, Sampler};

/// Both sides of the convergence inequality at one grid time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateRow {
    pub t: f64,
    /// `E ||X_t - X_T||^2`.
    pub lhs: f64,
    /// `A(t) + 2 E int_{t0}^{t} B(s) ||X_s - X_T||^2 ds`.
    pub rhs: f64,
    pub margin: f64,
    /// Standard error of the margin across paths.
    pub stderr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Certificate {
    pub rows: Vec<CertificateRow>,
}

impl Certificate {
    /// Rows whose margin falls below `-z` standard errors.
    pub fn violations(&self, z: f64) -> usize {
        self.rows.iter().filter(|r| r.margin < -z * r.stderr).count()
    }

    /// Smallest margin in units of its standard error; rows with zero error
    /// count as `-inf` if negative and are skipped otherwise.
    pub fn worst_z(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                if r.stderr > 0.0 {
                    r.margin / r.stderr
                } else if r.margin < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lhs,rhs,margin,stderr\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.10},{:.10e},{:.10e},{:.10e},{:.10e}",
                r.t, r.lhs, r.rhs, r.margin, r.stderr
            );
        }
        out
    }
}

/// Monte-Carlo check of
/// `E ||X_t - X_T||^2 <= A(t) + 2 E int_{t0}^{t} B(s) ||X_s - X_T||^2 ds`
/// at every grid time, with `X_T` each path's terminal state.
///
/// `A(t) = E ||X_{t0} - X_T||^2 + int (n sigma^2 + M_f^2 beta / (2 eta))`;
/// with a rescale `alpha` the integrand is divided by `(1 - alpha)^2` and
/// `B` by `1 - alpha`. The initial gap is measured from the ensemble and
/// overrides `inputs.initial_gap`; `inputs.t` is ignored.
pub fn convergence_certificate(
    ensemble: &PathEnsemble,
    inputs: &BoundInputs,
    case: BoundCase,
    alpha: Option<Sampler>,
) -> Result<Certificate> {
    if ensemble.is_empty() {
        return Err(Error::invalid("the ensemble has no paths"));
    }
    let grid = &ensemble.grid;
    if (grid[0] - inputs.t0).abs() > 1e-12 * (1.0 + inputs.t0.abs()) {
        return Err(Error::invalid(format!(
            "bound inputs start at {} but the ensemble at {}",
            inputs.t0, grid[0]
        )));
    }
    let gaps = ensemble.squared_gaps()?;
    let lhs: Vec<f64> = (0..grid.len())
        .map(|j| gaps.iter().map(|g| g[j]).sum::<f64>() / gaps.len() as f64)
        .collect();

    let mut base = inputs.clone();
    base.initial_gap = lhs[0];
    let terms_at = |t: f64| match &alpha {
        None => convergence_terms(&base.until(t), case),
        Some(a) => accel_bound_terms(&base.until(t), case, a.clone()),
    };
    let last = terms_at(*grid.last().expect("non-empty grid"))?;
    let b: Vec<f64> = grid.iter().map(|&s| (last.b_scaled)(s)).collect();
    let integrals: Vec<Vec<f64>> = gaps
        .iter()
        .map(|g| {
            let weighted: Vec<f64> = g.iter().zip(&b).map(|(v, bs)| v * bs).collect();
            cumulative_trapezoid(grid, &weighted)
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for (j, &t) in grid.iter().enumerate() {
        let a = terms_at(t)?.a;
        let mean_integral = integrals.iter().map(|i| i[j]).sum::<f64>() / integrals.len() as f64;
        let rhs = a + 2.0 * mean_integral;
        let per_path: Vec<f64> = integrals
            .iter()
            .zip(&gaps)
            .map(|(i, g)| a + 2.0 * i[j] - g[j])
            .collect();
        let (_, stderr) = mean_and_stderr(&per_path);
        rows.push(CertificateRow {
            t,
            lhs: lhs[j],
            rhs,
            margin: rhs - lhs[j],
            stderr,
        });
    }
    Ok(Certificate { rows })
}

/// `max ||grad f(X)||` over every state of the ensemble: the measured `M_f`.
pub fn measured_grad_bound(ensemble: &PathEnsemble, data: &dyn DataTerm) -> Result<f64> {
    let mut best: f64 = 0.0;
    for p in &ensemble.paths {
        for x in &p.states {
            best = best.max(data.grad(x)?.norm_l2());
        }
    }
    Ok(best)
}

/// Power-iteration estimate of the field's Lipschitz constant at up to
/// `points` states sampled along the first path, at their flow times.
pub fn measured_field_lipschitz(
    process: &SdeProcess<'_>,
    ensemble: &PathEnsemble,
    points: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let path = ensemble.paths.first().ok_or_else(|| Error::invalid("the ensemble has no paths"))?;
    let stride = (path.states.len() / points.max(1)).max(1);
    let sample: Vec<(f64, _)> = ensemble
        .grid
        .iter()
        .zip(&path.states)
        .step_by(stride)
        .map(|(&t, x)| ((process.flow_time)(t).clamp(0.0, 1.0), x.clone()))
        .collect();
    lipschitz_estimate(process.field, &sample, rng)
}
