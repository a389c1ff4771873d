//! Conditional flow-matching training of [`MlpField`](crate::flowfield::MlpField)
//! on straight-line paths, with an optional Hutchinson Jacobian penalty.

mod data;
mod loss;
mod train;

pub use data::{DataSource, Dataset};
pub use loss::{cfm_loss, cfm_loss_on, lipschitz_penalty, lipschitz_penalty_with_probes, CfmBatch, LossGrad};
pub use train::{
    train, Adam, LossHistory, LossRecord, ModelConfig, TrainConfig, DATA_STREAM, INIT_STREAM, PATH_STREAM,
    PROBE_STREAM,
};

use crate::error::{Error, Result};
use crate::flowfield::{estimate_jacobian_norm, GaussianOracleField, VectorField};
use crate::numerics::{RngStream, Tensor};

/// Evaluation points for a 2-D Gaussian toy: at each time, a `side x side`
/// lattice on `[-2, 2]^2` in standardized coordinates, mapped through the
/// marginal `x = t mu + c_t g` so every time slice covers its own bulk.
pub fn oracle_grid(oracle: &GaussianOracleField, side: usize, times: &[f64]) -> Result<Vec<(f64, Tensor)>> {
    if oracle.mean().len() != 2 || side < 2 {
        return Err(Error::invalid("the toy grid is two-dimensional with at least two points per side"));
    }
    let mu = oracle.mean().data();
    let mut points = Vec::with_capacity(side * side * times.len());
    for &t in times {
        let c = oracle.marginal_std(t);
        for i in 0..side {
            for j in 0..side {
                let g = |k: usize| -2.0 + 4.0 * k as f64 / (side - 1) as f64;
                let x = vec![t * mu[0] + c * g(i), t * mu[1] + c * g(j)];
                points.push((t, Tensor::from_vec(&[2], x)?));
            }
        }
    }
    Ok(points)
}

/// Mean over points of the squared distance `||a_t(x) - b_t(x)||^2`.
pub fn field_mse(a: &dyn VectorField, b: &dyn VectorField, points: &[(f64, Tensor)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("no evaluation points"));
    }
    let mut acc = 0.0;
    for (t, x) in points {
        acc += a.eval(*t, x)?.sub(&b.eval(*t, x)?)?.norm_sq();
    }
    Ok(acc / points.len() as f64)
}

/// Mean Hutchinson estimate of `||J||_F^2` over the points.
pub fn mean_jacobian_norm(
    field: &dyn VectorField,
    points: &[(f64, Tensor)],
    rng: &mut RngStream,
    probes: usize,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("no evaluation points"));
    }
    let mut acc = 0.0;
    for (t, x) in points {
        acc += estimate_jacobian_norm(field, *t, x, rng, probes)?;
    }
    Ok(acc / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowfield::{Activation, MlpField, TimeEmbedding};

    fn toy() -> (Dataset, GaussianOracleField) {
        let src = DataSource::GaussianToy {
            mean: vec![2.0, -1.0],
            std: 0.5,
        };
        let mean = Tensor::from_vec(&[2], vec![2.0, -1.0]).unwrap();
        (src.open().unwrap(), GaussianOracleField::new(mean, 0.5).unwrap())
    }

    fn small_model() -> ModelConfig {
        ModelConfig {
            hidden: vec![16, 16],
            activation: Activation::Silu,
            embedding: TimeEmbedding::Fourier,
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (data, _) = toy();
        let mut cfg = TrainConfig::new(30, 4);
        cfg.batch_size = 32;
        let mut a = small_model().build(2, 1).unwrap();
        let mut b = small_model().build(2, 1).unwrap();
        let ha = train(&mut a, &data, &cfg).unwrap();
        let hb = train(&mut b, &data, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha.to_csv(), hb.to_csv());
        let mut c = small_model().build(2, 1).unwrap();
        cfg.seed = 5;
        train(&mut c, &data, &cfg).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn zero_coefficient_matches_plain_regression_loop() {
        let (data, _) = toy();
        let mut cfg = TrainConfig::new(25, 8);
        cfg.batch_size = 16;
        cfg.lipschitz_coeff = 0.0;
        let mut trained = small_model().build(2, 3).unwrap();
        let hist = train(&mut trained, &data, &cfg).unwrap();

        let mut manual = small_model().build(2, 3).unwrap();
        let mut data_rng = RngStream::new(8, DATA_STREAM);
        let mut path_rng = RngStream::new(8, PATH_STREAM);
        let mut adam = Adam::new(manual.param_count(), cfg.learning_rate);
        for rec in &hist.records {
            let x1 = data.sample(&mut data_rng, 16).unwrap();
            let lg = cfm_loss(&manual, x1.view(), &mut path_rng).unwrap();
            assert_eq!(lg.value.to_bits(), rec.cfm.to_bits());
            assert_eq!(rec.penalty, 0.0);
            adam.step(manual.params_mut(), &lg.grad);
        }
        assert_eq!(manual.params(), trained.params());
    }

    #[test]
    fn single_and_multi_probe_paths_agree_in_expectation() {
        // P = 1 uses the fused backward pass; P = 2 goes through
        // lipschitz_penalty. Both must produce finite, comparable penalties.
        let (data, _) = toy();
        for probes in [1, 2] {
            let mut cfg = TrainConfig::new(5, 2);
            cfg.batch_size = 64;
            cfg.probes_per_batch = probes;
            let mut f = small_model().build(2, 0).unwrap();
            let h = train(&mut f, &data, &cfg).unwrap();
            assert!(h.records.iter().all(|r| r.penalty > 0.0 && r.total.is_finite()));
        }
    }

    #[test]
    fn loss_decreases_on_toy() {
        let (data, oracle) = toy();
        let mut cfg = TrainConfig::new(400, 1);
        cfg.batch_size = 128;
        cfg.lipschitz_coeff = 0.0;
        cfg.learning_rate = 3e-3;
        let mut f = small_model().build(2, 1).unwrap();
        let grid = oracle_grid(&oracle, 10, &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let before = field_mse(&f, &oracle, &grid).unwrap();
        let hist = train(&mut f, &data, &cfg).unwrap();
        let after = field_mse(&f, &oracle, &grid).unwrap();
        assert!(after < 0.25 * before, "{before} -> {after}");
        let w = hist.window_means(100);
        assert!(w.last().unwrap() < w.first().unwrap());
    }

    #[test]
    fn dimension_mismatch_and_bad_config_rejected() {
        let (data, _) = toy();
        let mut f = MlpField::new(3, &[4], Activation::Tanh, TimeEmbedding::None, &mut RngStream::new(0, 0)).unwrap();
        assert!(matches!(train(&mut f, &data, &TrainConfig::new(1, 0)), Err(Error::Config(_))));
        let mut cfg = TrainConfig::new(1, 0);
        cfg.probes_per_batch = 0;
        assert!(cfg.validate().is_err());
        cfg.probes_per_batch = 1;
        cfg.lipschitz_coeff = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let src = DataSource::GaussianToy {
            mean: vec![1e200, 0.0],
            std: 1.0,
        };
        let data = src.open().unwrap();
        let mut f = small_model().build(2, 0).unwrap();
        let mut cfg = TrainConfig::new(3, 0);
        cfg.batch_size = 4;
        assert!(matches!(train(&mut f, &data, &cfg), Err(Error::NonFinite(_))));
    }

    #[test]
    fn config_aliases_and_defaults() {
        let cfg: TrainConfig = toml::from_str("epochs = 10\nseed = 3\n").unwrap();
        assert_eq!(cfg, TrainConfig::new(10, 3));
        assert_eq!(cfg.lipschitz_coeff, 0.1);
        assert!(toml::from_str::<TrainConfig>("steps = 1\nlearning_rat = 0.1\n").is_err());
        let model: ModelConfig = toml::from_str("hidden = [8]\nactivation = \"tanh\"\n").unwrap();
        assert_eq!(model.embedding, TimeEmbedding::Fourier);
    }

    #[test]
    fn csv_and_windows() {
        let h = LossHistory {
            records: (0..5)
                .map(|i| LossRecord {
                    step: i,
                    cfm: i as f64,
                    penalty: 0.0,
                    total: i as f64,
                })
                .collect(),
        };
        assert_eq!(h.window_means(2), vec![0.5, 2.5]);
        let csv = h.to_csv();
        assert!(csv.starts_with("step,cfm_loss,penalty,total\n0,"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn grid_layout() {
        let (_, oracle) = toy();
        let g = oracle_grid(&oracle, 10, &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        assert_eq!(g.len(), 500);
        assert_eq!(field_mse(&oracle, &oracle, &g).unwrap(), 0.0);
    }
}
