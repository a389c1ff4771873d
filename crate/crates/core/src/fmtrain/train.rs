use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::loss::{cfm_from_recording, lipschitz_penalty, CfmBatch};
use crate::error::{Error, Result};
use crate::flowfield::{Activation, MlpField, TimeEmbedding};
use crate::numerics::RngStream;

/// Stream ids under the training seed.
pub const DATA_STREAM: u64 = 0x6461_7461;
pub const PATH_STREAM: u64 = 0x7061_7468;
pub const PROBE_STREAM: u64 = 0x7072_6f62;
pub const INIT_STREAM: u64 = 0x696e_6974;

fn default_batch() -> usize {
    256
}
fn default_lr() -> f64 {
    1e-3
}
fn default_coeff() -> f64 {
    0.1
}
fn default_probes() -> usize {
    1
}

/// Optimizer settings. One step draws a fresh batch; `epochs` is accepted
/// as an alias of `steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(alias = "epochs")]
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Weight of the Jacobian penalty; zero skips it entirely.
    #[serde(default = "default_coeff")]
    pub lipschitz_coeff: f64,
    #[serde(default = "default_probes")]
    pub probes_per_batch: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        Self {
            steps,
            batch_size: default_batch(),
            learning_rate: default_lr(),
            lipschitz_coeff: default_coeff(),
            probes_per_batch: default_probes(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.lipschitz_coeff >= 0.0 && self.lipschitz_coeff.is_finite()) {
            return Err(Error::Config(format!(
                "lipschitz_coeff must be non-negative, got {}",
                self.lipschitz_coeff
            )));
        }
        if self.probes_per_batch == 0 {
            return Err(Error::Config("probes_per_batch must be positive".into()));
        }
        Ok(())
    }
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_activation() -> Activation {
    Activation::Silu
}
fn default_embedding() -> TimeEmbedding {
    TimeEmbedding::Fourier
}

/// Architecture of a freshly initialized [`MlpField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_embedding")]
    pub embedding: TimeEmbedding,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            activation: default_activation(),
            embedding: default_embedding(),
        }
    }
}

impl ModelConfig {
    /// A new field for `state_dim`-dimensional data, initialized from the
    /// seed's init stream.
    pub fn build(&self, state_dim: usize, seed: u64) -> Result<MlpField> {
        MlpField::new(
            state_dim,
            &self.hidden,
            self.activation,
            self.embedding,
            &mut RngStream::new(seed, INIT_STREAM),
        )
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Losses of one optimizer step, evaluated before the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub cfm: f64,
    pub penalty: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

impl LossHistory {
    /// CSV with columns `step,cfm_loss,penalty,total`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,cfm_loss,penalty,total\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.10e},{:.10e},{:.10e}", r.step, r.cfm, r.penalty, r.total);
        }
        out
    }

    /// Mean total loss over consecutive windows; a trailing partial window
    /// is dropped.
    pub fn window_means(&self, window: usize) -> Vec<f64> {
        if window == 0 {
            return Vec::new();
        }
        self.records
            .chunks_exact(window)
            .map(|c| c.iter().map(|r| r.total).sum::<f64>() / window as f64)
            .collect()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }
}

/// Trains `field` in place on samples from `data`, minimizing
/// `cfm_loss + lipschitz_coeff * lipschitz_penalty` with Adam. The penalty
/// is evaluated at the same `(t, x_t)` points as the regression term.
pub fn train(field: &mut MlpField, data: &Dataset, cfg: &TrainConfig) -> Result<LossHistory> {
    cfg.validate()?;
    if data.dim() != field.state_dim() {
        return Err(Error::Config(format!(
            "data dimension {} does not match the field's {}",
            data.dim(),
            field.state_dim()
        )));
    }
    let mut data_rng = RngStream::new(cfg.seed, DATA_STREAM);
    let mut path_rng = RngStream::new(cfg.seed, PATH_STREAM);
    let mut probe_rng = RngStream::new(cfg.seed, PROBE_STREAM);
    let mut adam = Adam::new(field.param_count(), cfg.learning_rate);
    let mut history = LossHistory::default();
    for step in 0..cfg.steps {
        let x1 = data.sample(&mut data_rng, cfg.batch_size)?;
        let batch = CfmBatch::draw(x1.view(), &mut path_rng)?;
        let rec = field.record(&batch.ts, batch.xt.view())?;
        let (cfm, adj) = cfm_from_recording(&rec, &batch);
        let (penalty, grad) = if cfg.lipschitz_coeff == 0.0 {
            (0.0, field.grad_theta(&rec, adj.view())?)
        } else if cfg.probes_per_batch == 1 {
            // one probe per example: a single backward pass serves both terms
            let mut eps = Array2::zeros(batch.xt.dim());
            probe_rng.fill_normal(eps.as_slice_mut().expect("standard layout"));
            let tan = field.tangent(&rec, eps.view())?;
            let jv = tan.output();
            let rows = batch.len() as f64;
            let penalty = jv.iter().map(|v| v * v).sum::<f64>() / rows;
            let t_adj = jv.mapv(|v| cfg.lipschitz_coeff * 2.0 * v / rows);
            (penalty, field.grad_theta_with_tangent(&rec, &tan, Some(adj.view()), t_adj.view())?)
        } else {
            let mut grad = field.grad_theta(&rec, adj.view())?;
            let pen = lipschitz_penalty(field, &batch.ts, batch.xt.view(), &mut probe_rng, cfg.probes_per_batch)?;
            grad.iter_mut().zip(&pen.grad).for_each(|(g, p)| *g += cfg.lipschitz_coeff * p);
            (pen.value, grad)
        };
        let total = cfm + cfg.lipschitz_coeff * penalty;
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "training loss at step {step}: cfm {cfm}, penalty {penalty}"
            )));
        }
        history.records.push(LossRecord {
            step,
            cfm,
            penalty,
            total,
        });
        adam.step(field.params_mut(), &grad);
    }
    Ok(history)
}
