//! Continuous-limit laboratory: Euler-Maruyama simulation of the surrogate
//! SDE and its rescaled form, iteration-vs-SDE comparison, and Monte-Carlo
//! checks of the error and convergence bounds.

mod certificate;
mod coupling;
mod discrete;
mod process;

pub use certificate::{
    convergence_certificate, measured_field_lipschitz, measured_grad_bound, Certificate, CertificateRow,
};
pub use coupling::{coupled_error_paths, ErrorCurve};
pub use discrete::{
    anchor_for_window, discrete_vs_sde, DiscrepancyOptions, DiscrepancyReport, DiscrepancyRow, GridPolicy,
    BRIDGE_STREAM,
};
pub use process::{
    euler_maruyama, euler_maruyama_with, path_rng, simulate_ensemble, uniform_grid, wiener_increments, Path,
    PathEnsemble, SdeProcess, PATH_STREAM_BASE,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{DegradationOperator, FidelityProblem, NoData, OperatorKind};
    use crate::flowfield::{ConstantField, GaussianOracleField, ShiftedField, VectorField, ZeroField};
    use crate::numerics::{gaussian_sample, RngStream, Tensor};
    use crate::schedule::{constant, BoundCase, BoundInputs, GammaPolicy, Schedule};
    use crate::solver::SolverConfig;
    use std::sync::Arc;

    fn vec2(a: f64, b: f64) -> Tensor {
        Tensor::from_vec(&[2], vec![a, b]).unwrap()
    }

    #[test]
    fn pure_decay_matches_exponential() {
        let p = SdeProcess::new(&ZeroField, &NoData, 0.5, 1.5).unwrap();
        let grid = uniform_grid(0.5, 1.5, 10_000);
        let x0 = vec2(1.0, -3.0);
        let path = euler_maruyama(&p, &x0, &grid, &mut RngStream::new(0, 0)).unwrap();
        let exact = x0.scale((-1.0f64).exp());
        let end = path.states.last().unwrap();
        assert!(end.sub(&exact).unwrap().norm_l2() / exact.norm_l2() < 1e-3);
    }

    #[test]
    fn affine_drift_relaxes_to_mean() {
        let mu = vec2(2.0, -1.0);
        let field = ConstantField::new(mu.clone());
        let p = SdeProcess::new(&field, &NoData, 0.0, 2.0).unwrap();
        let grid = uniform_grid(0.0, 2.0, 10_000);
        let x0 = vec2(-1.0, 4.0);
        let path = euler_maruyama(&p, &x0, &grid, &mut RngStream::new(0, 0)).unwrap();
        for (j, &t) in grid.iter().enumerate().step_by(1000) {
            let exact = mu.axpy((-t).exp(), &x0.sub(&mu).unwrap()).unwrap();
            let err = path.states[j].sub(&exact).unwrap().norm_l2();
            assert!(err <= 1e-3 * exact.norm_l2(), "t {t}: {err}");
        }
    }

    #[test]
    fn zero_alpha_is_the_plain_scheme() {
        let oracle = GaussianOracleField::new(vec2(1.0, 0.5), 0.7).unwrap();
        let mut p = SdeProcess::new(&oracle, &NoData, 0.0, 1.0).unwrap();
        p.sigma = Arc::new(|t| 1.0 - 0.5 * t);
        p.alpha = constant(0.0);
        let grid = uniform_grid(0.0, 1.0, 50);
        let x0 = vec2(0.3, -0.2);
        let path = euler_maruyama(&p, &x0, &grid, &mut RngStream::new(4, 1)).unwrap();
        // the unrescaled recursion written out directly
        let mut x = x0.clone();
        for (j, dw) in path.increments.iter().enumerate() {
            let (t, dt) = (grid[j], grid[j + 1] - grid[j]);
            let b = oracle.eval(t, &x).unwrap().sub(&x).unwrap();
            x = x.axpy(dt, &b).unwrap().axpy(1.0 - 0.5 * t, dw).unwrap();
            assert!(x.bit_eq(&path.states[j + 1]));
        }
        p.alpha = constant(0.5);
        let rescaled = euler_maruyama(&p, &x0, &grid, &mut RngStream::new(4, 1)).unwrap();
        assert!(!rescaled.states.last().unwrap().bit_eq(path.states.last().unwrap()));
    }

    #[test]
    fn invalid_processes_and_grids_rejected() {
        let mut p = SdeProcess::new(&ZeroField, &NoData, 0.0, 1.0).unwrap();
        assert!(p.validate_on(&[0.0, 0.5, 0.5]).is_err());
        assert!(p.validate_on(&[0.1, 0.5]).is_err());
        assert!(p.validate_on(&[0.0, 2.0]).is_err());
        p.sigma = Arc::new(|t| t);
        assert!(p.validate_on(&[0.0, 0.5, 1.0]).is_err());
        p.sigma = constant(1.0);
        p.alpha = constant(1.0);
        assert!(p.validate_on(&[0.0, 1.0]).is_err());
        assert!(SdeProcess::new(&ZeroField, &NoData, 1.0, 0.0).is_err());
    }

    #[test]
    fn ensembles_are_reproducible() {
        let mut p = SdeProcess::new(&ZeroField, &NoData, 0.0, 1.0).unwrap();
        p.sigma = constant(0.5);
        let grid = uniform_grid(0.0, 1.0, 20);
        let x0 = vec2(1.0, 1.0);
        let a = simulate_ensemble(&p, &x0, &grid, 16, 3).unwrap();
        let b = simulate_ensemble(&p, &x0, &grid, 16, 3).unwrap();
        for (pa, pb) in a.paths.iter().zip(&b.paths) {
            assert!(pa.states.iter().zip(&pb.states).all(|(x, y)| x.bit_eq(y)));
        }
        let p5 = euler_maruyama(&p, &x0, &grid, &mut path_rng(3, 5)).unwrap();
        assert!(p5.states.last().unwrap().bit_eq(a.paths[5].states.last().unwrap()));
    }

    /// Mean terminal error of coarse EM against a fine-grid reference driven
    /// by the same Brownian path, for `coarse` and `2 * coarse` steps.
    fn strong_errors(sigma: f64, coarse: usize, paths: usize) -> (f64, f64) {
        let mut p = SdeProcess::new(&ZeroField, &NoData, 0.0, 1.0).unwrap();
        p.sigma = constant(sigma);
        let fine = 1024;
        let grid_f = uniform_grid(0.0, 1.0, fine);
        let x0 = Tensor::filled(&[1], 1.0).unwrap();
        let mut errs = (0.0, 0.0);
        for k in 0..paths {
            let dws = wiener_increments(&grid_f, &[1], &mut path_rng(17, k)).unwrap();
            let reference = euler_maruyama_with(&p, &x0, &grid_f, &dws).unwrap();
            let reference = reference.last().unwrap();
            let err = |steps: usize| {
                let ratio = fine / steps;
                let grid = uniform_grid(0.0, 1.0, steps);
                let coarse_dw: Vec<Tensor> = dws
                    .chunks(ratio)
                    .map(|c| c.iter().skip(1).fold(c[0].clone(), |a, b| a.add(b).unwrap()))
                    .collect();
                let path = euler_maruyama_with(&p, &x0, &grid, &coarse_dw).unwrap();
                path.last().unwrap().sub(reference).unwrap().norm_l2()
            };
            errs.0 += err(coarse);
            errs.1 += err(2 * coarse);
        }
        (errs.0 / paths as f64, errs.1 / paths as f64)
    }

    #[test]
    fn strong_order_on_linear_problem() {
        let (e1, e2) = strong_errors(0.0, 16, 1);
        let det = e1 / e2;
        assert!((1.9..=2.1).contains(&det), "deterministic factor {det}");
        // additive noise: Euler-Maruyama coincides with Milstein, order one
        let (n1, n2) = strong_errors(0.8, 16, 500);
        let noisy = n1 / n2;
        assert!((1.7..=2.3).contains(&noisy), "noisy factor {noisy}");
    }

    #[test]
    fn identical_drifts_couple_exactly() {
        let oracle = GaussianOracleField::new(vec2(2.0, -1.0), 0.5).unwrap();
        let mut p = SdeProcess::new(&oracle, &NoData, 0.0, 0.9).unwrap();
        p.sigma = Arc::new(|t| (1.0 - t).sqrt());
        let grid = uniform_grid(0.0, 0.9, 64);
        let x0 = vec2(0.1, 0.2);
        let curve = coupled_error_paths(&p, &p.clone(), &x0, &x0, &grid, 50, 1).unwrap();
        assert!(curve.mean.iter().all(|m| *m == 0.0));
        assert_eq!(curve.grid.len(), 65);
    }

    #[test]
    fn coupling_rejects_mismatched_processes() {
        let a = SdeProcess::new(&ZeroField, &NoData, 0.0, 1.0).unwrap();
        let mut b = a.clone();
        b.sigma = constant(0.3);
        let grid = uniform_grid(0.0, 1.0, 4);
        let x0 = vec2(0.0, 0.0);
        assert!(coupled_error_paths(&a, &b, &x0, &x0, &grid, 2, 0).is_err());
        let c = SdeProcess::new(&ZeroField, &NoData, 0.0, 2.0).unwrap();
        assert!(coupled_error_paths(&a, &c, &x0, &x0, &grid, 2, 0).is_err());
    }

    #[test]
    fn linear_response_to_field_perturbation() {
        let oracle = GaussianOracleField::new(vec2(2.0, -1.0), 0.5).unwrap();
        let mut p = SdeProcess::new(&oracle, &NoData, 0.0, 0.95).unwrap();
        p.sigma = Arc::new(|t| (1.0 - t).sqrt());
        let grid = uniform_grid(0.0, 0.95, 64);
        let x0 = vec2(0.0, 0.0);
        let terminal = |delta: f64| {
            let shifted = ShiftedField::new(&oracle, vec2(delta, -0.5 * delta));
            let mut q = p.clone();
            q.field = &shifted;
            let c = coupled_error_paths(&p, &q, &x0, &x0, &grid, 200, 2).unwrap();
            *c.mean.last().unwrap()
        };
        for delta in [1e-3, 5e-3, 1e-2] {
            let ratio = terminal(2.0 * delta) / terminal(delta);
            assert!((ratio - 2.0).abs() < 0.1, "delta {delta}: ratio {ratio}");
        }
    }

    fn identity_problem(dim: usize, seed: u64) -> FidelityProblem {
        let op = DegradationOperator::new(&OperatorKind::IdentityNoise, &[dim], 0.1).unwrap();
        let clean = Tensor::filled(&[dim], 0.5).unwrap();
        FidelityProblem::observe(op, &clean, &mut RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn empty_window_gives_empty_report() {
        let problem = identity_problem(3, 0);
        let cfg = SolverConfig::new(Schedule::geometric(0.9, 20).unwrap(), 0);
        assert_eq!(cfg.warmup, 20);
        let rep = discrete_vs_sde(&problem, &Tensor::zeros(&[3]).unwrap(), &ZeroField, &cfg, &Default::default())
            .unwrap();
        assert!(rep.is_empty());
        assert_eq!(rep.to_csv().lines().count(), 1);
    }

    #[test]
    fn matched_noise_couples_draw_for_draw() {
        // zero field, no data: x_{k+1} = (1 - l) xi + l x and the Euler step
        // x - dt x + sqrt(dt) sqrt(dt) xi agree up to rounding
        let mut cfg = SolverConfig::new(Schedule::geometric(0.9, 50).unwrap(), 7);
        cfg.warmup = 10;
        let x0 = Tensor::filled(&[4], 0.5).unwrap();
        let rep = discrete_vs_sde(&NoData, &x0, &ZeroField, &cfg, &DiscrepancyOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 40);
        assert!(rep.sup_global() < 1e-12, "{}", rep.sup_global());
        assert!(rep.rows.iter().all(|r| r.local <= 1e-12));
    }

    #[test]
    fn extrapolated_configs_rejected() {
        let s = Schedule::geometric(0.9, 10).unwrap().with_h(crate::schedule::HPolicy::Constant(0.3)).unwrap();
        let cfg = SolverConfig::new(s, 0);
        let x0 = Tensor::zeros(&[2]).unwrap();
        assert!(discrete_vs_sde(&NoData, &x0, &ZeroField, &cfg, &Default::default()).is_err());
    }

    #[test]
    fn zero_field_schedule_grid_is_exact() {
        // deterministic contraction: x_{k+1} = l_k x_k equals one Euler step
        let mut cfg = SolverConfig::new(
            Schedule::geometric(0.9, 60).unwrap().with_gamma(GammaPolicy::Constant(0.0)).unwrap(),
            0,
        );
        cfg.warmup = 20;
        let opts = DiscrepancyOptions {
            policy: GridPolicy::Schedule,
            zero_noise: true,
        };
        let x0 = Tensor::filled(&[3], 1.0).unwrap();
        let rep = discrete_vs_sde(&NoData, &x0, &ZeroField, &cfg, &opts).unwrap();
        assert!(rep.sup_global() < 1e-14, "{}", rep.sup_global());
    }

    fn deterministic_local(lambda: f64) -> (f64, f64) {
        // The first geometric step has l_0 = 0 and maps any start to D_0(0),
        // so a fidelity pull keeps the anchored state away from a fixed point.
        let n = ((0.01 * (1.0 - lambda)).ln() / lambda.ln()).ceil() as usize;
        let schedule = Schedule::geometric(lambda, n).unwrap();
        let mut cfg = SolverConfig::new(schedule, 0);
        cfg.warmup = anchor_for_window(&schedule, 1.0);
        let opts = DiscrepancyOptions {
            policy: GridPolicy::Refined(64),
            zero_noise: true,
        };
        let op = DegradationOperator::new(&OperatorKind::IdentityNoise, &[3], 0.0).unwrap();
        let problem = FidelityProblem::new(op, Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap()).unwrap();
        let x0 = Tensor::zeros(&[3]).unwrap();
        let rep = discrete_vs_sde(&problem, &x0, &ZeroField, &cfg, &opts).unwrap();
        (rep.max_step(), rep.sup_local())
    }

    #[test]
    fn local_error_is_second_order() {
        let pts: Vec<(f64, f64)> = [0.9, 0.95, 0.99].iter().map(|&l| deterministic_local(l)).collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(d, e)| (d.ln(), e.ln())).unzip();
        let slope = crate::numerics::least_squares_slope(&lx, &ly);
        assert!(slope >= 1.9, "slope {slope}, points {pts:?}");
    }

    #[test]
    fn anchor_window() {
        let s = Schedule::geometric(0.9, 200).unwrap();
        let k = anchor_for_window(&s, 1.0);
        let rest: f64 = (k..200).map(|j| s.one_minus_l(j)).sum();
        assert!(rest <= 1.0 && rest + s.one_minus_l(k - 1) > 1.0);
    }

    #[test]
    fn certificate_reduces_at_start_and_for_zero_alpha() {
        let problem = identity_problem(2, 3);
        let oracle = GaussianOracleField::new(vec2(2.0, -1.0), 0.5).unwrap();
        let schedule = Schedule::geometric(0.9, 60).unwrap();
        let p = SdeProcess::from_schedule(&oracle, &problem, &schedule, 5).unwrap();
        let grid = uniform_grid(p.t0, p.t_end, 32);
        let x0 = gaussian_sample(&mut RngStream::new(1, 1), &[2]).unwrap();
        let ens = simulate_ensemble(&p, &x0, &grid, 100, 9).unwrap();
        let mut inputs = BoundInputs::new(p.t0, p.t_end, 2);
        inputs.lip_u = oracle.lipschitz_sup();
        inputs.lip_f = 1.0;
        inputs.strong_convexity = 1.0;
        inputs.beta = p.beta.clone();
        inputs.sigma = p.sigma.clone();
        inputs.grad_bound = measured_grad_bound(&ens, &problem).unwrap();
        let plain = convergence_certificate(&ens, &inputs, BoundCase::StronglyConvex, None).unwrap();
        let zero = convergence_certificate(&ens, &inputs, BoundCase::StronglyConvex, Some(constant(0.0))).unwrap();
        assert_eq!(plain, zero);
        assert_eq!(plain.rows[0].margin, 0.0);
        assert_eq!(plain.rows.len(), 33);
        assert_eq!(plain.to_csv().lines().count(), 34);
    }
}
