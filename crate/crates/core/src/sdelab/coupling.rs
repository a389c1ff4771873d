use std::fmt::Write as _;

use rayon::prelude::*;

use super::process::{euler_maruyama_with, path_rng, wiener_increments, SdeProcess};
use crate::error::{Error, Result};
use crate::numerics::{mean_and_stderr, Tensor};

/// Monte-Carlo mean of a per-path quantity at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorCurve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl ErrorCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean,stderr\n");
        for ((t, m), s) in self.grid.iter().zip(&self.mean).zip(&self.stderr) {
            let _ = writeln!(out, "{t:.10},{m:.10e},{s:.10e}");
        }
        out
    }
}

/// `E ||X_t - X~_t||` for two processes driven by the same Wiener increments,
/// started at `x0` and `x0_tilde`.
pub fn coupled_error_paths(
    process: &SdeProcess<'_>,
    process_tilde: &SdeProcess<'_>,
    x0: &Tensor,
    x0_tilde: &Tensor,
    grid: &[f64],
    paths: usize,
    seed: u64,
) -> Result<ErrorCurve> {
    if paths == 0 {
        return Err(Error::invalid("at least one path is required"));
    }
    if process.t0 != process_tilde.t0 || process.t_end != process_tilde.t_end {
        return Err(Error::invalid("coupled processes must share the horizon"));
    }
    x0.check_same_shape(x0_tilde)?;
    process.validate_on(grid)?;
    process_tilde.validate_on(grid)?;
    for &t in grid {
        let (a, b) = ((process.sigma)(t), (process_tilde.sigma)(t));
        if a != b {
            return Err(Error::invalid(format!("diffusions differ at t = {t}: {a} vs {b}")));
        }
    }
    let per_path = (0..paths)
        .into_par_iter()
        .map(|p| {
            let dws = wiener_increments(grid, x0.shape(), &mut path_rng(seed, p))?;
            let xs = euler_maruyama_with(process, x0, grid, &dws)?;
            let ys = euler_maruyama_with(process_tilde, x0_tilde, grid, &dws)?;
            xs.iter().zip(&ys).map(|(x, y)| Ok(x.sub(y)?.norm_l2())).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let column: Vec<f64> = per_path.iter().map(|p| p[j]).collect();
        let (m, s) = mean_and_stderr(&column);
        mean.push(m);
        stderr.push(s);
    }
    Ok(ErrorCurve {
        grid: grid.to_vec(),
        mean,
        stderr,
    })
}
