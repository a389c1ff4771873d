use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::flowfield::{MlpField, Recording};
use crate::numerics::RngStream;

/// A scalar loss and its gradient with respect to the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Points on straight-line paths: `x_t = (1 - t) x_0 + t x_1` with the
/// conditional target `x_1 - x_0`.
#[derive(Clone, Debug)]
pub struct CfmBatch {
    pub ts: Vec<f64>,
    pub xt: Array2<f64>,
    pub target: Array2<f64>,
}

impl CfmBatch {
    pub fn new(x1: ArrayView2<'_, f64>, x0: ArrayView2<'_, f64>, ts: &[f64]) -> Result<Self> {
        if x1.nrows() == 0 {
            return Err(Error::invalid("the batch is empty"));
        }
        if x1.dim() != x0.dim() || ts.len() != x1.nrows() {
            return Err(Error::invalid("x_0, x_1 and t must describe the same batch"));
        }
        let mut xt = x1.to_owned();
        for ((mut row, r0), &t) in xt.rows_mut().into_iter().zip(x0.rows()).zip(ts) {
            row.zip_mut_with(&r0, |v, &a| *v = (1.0 - t) * a + t * *v);
        }
        Ok(Self {
            ts: ts.to_vec(),
            xt,
            target: &x1 - &x0,
        })
    }

    /// Draws `x_0 ~ N(0, I)` for the whole batch, then one `t ~ U[0, 1)` per example.
    pub fn draw(x1: ArrayView2<'_, f64>, rng: &mut RngStream) -> Result<Self> {
        let mut x0 = Array2::zeros(x1.dim());
        rng.fill_normal(x0.as_slice_mut().expect("standard layout"));
        let ts: Vec<f64> = (0..x1.nrows()).map(|_| rng.uniform()).collect();
        Self::new(x1, x0.view(), &ts)
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

/// Loss value and `dL/d(output)` from a recorded pass over the batch.
pub(crate) fn cfm_from_recording(rec: &Recording, batch: &CfmBatch) -> (f64, Array2<f64>) {
    let residual = &rec.output() - &batch.target;
    let b = batch.len() as f64;
    let value = residual.iter().map(|v| v * v).sum::<f64>() / b;
    (value, residual * (2.0 / b))
}

/// Mean over the batch of `||u_t(x_t) - (x_1 - x_0)||^2` and its exact
/// parameter gradient.
pub fn cfm_loss_on(field: &MlpField, batch: &CfmBatch) -> Result<LossGrad> {
    let rec = field.record(&batch.ts, batch.xt.view())?;
    let (value, adj) = cfm_from_recording(&rec, batch);
    Ok(LossGrad {
        value,
        grad: field.grad_theta(&rec, adj.view())?,
    })
}

/// [`cfm_loss_on`] at freshly drawn `x_0` and `t`.
pub fn cfm_loss(field: &MlpField, x1: ArrayView2<'_, f64>, rng: &mut RngStream) -> Result<LossGrad> {
    cfm_loss_on(field, &CfmBatch::draw(x1, rng)?)
}

/// Mean of `||J_x u_t(x) eps||^2` over rows, given one probe per row, with
/// its parameter gradient taken by reverse mode through the tangent pass.
pub fn lipschitz_penalty_with_probes(
    field: &MlpField,
    ts: &[f64],
    xs: ArrayView2<'_, f64>,
    probes: ArrayView2<'_, f64>,
) -> Result<LossGrad> {
    if ts.is_empty() {
        return Err(Error::invalid("the batch is empty"));
    }
    let rec = field.record(ts, xs)?;
    let tan = field.tangent(&rec, probes)?;
    let jv = tan.output();
    let rows = ts.len() as f64;
    let value = jv.iter().map(|v| v * v).sum::<f64>() / rows;
    let adj = jv.mapv(|v| 2.0 * v / rows);
    Ok(LossGrad {
        value,
        grad: field.grad_theta_with_tangent(&rec, &tan, None, adj.view())?,
    })
}

/// Hutchinson estimate of the mean squared Jacobian Frobenius norm at the
/// points `(t_i, x_i)` with `probes` Gaussian probes per point.
pub fn lipschitz_penalty(
    field: &MlpField,
    ts: &[f64],
    xs: ArrayView2<'_, f64>,
    rng: &mut RngStream,
    probes: usize,
) -> Result<LossGrad> {
    if probes == 0 {
        return Err(Error::invalid("at least one probe per point is required"));
    }
    if ts.len() != xs.nrows() {
        return Err(Error::invalid("one time per point is required"));
    }
    let (ts, xs) = replicate(ts, xs, probes);
    let mut eps = Array2::zeros(xs.dim());
    rng.fill_normal(eps.as_slice_mut().expect("standard layout"));
    lipschitz_penalty_with_probes(field, &ts, xs.view(), eps.view())
}

/// Each row repeated `p` times in place, so probes of one point are adjacent.
pub(crate) fn replicate(ts: &[f64], xs: ArrayView2<'_, f64>, p: usize) -> (Vec<f64>, Array2<f64>) {
    if p == 1 {
        return (ts.to_vec(), xs.to_owned());
    }
    let ts_rep = ts.iter().flat_map(|&t| std::iter::repeat(t).take(p)).collect();
    let idx: Vec<usize> = (0..xs.nrows()).flat_map(|i| std::iter::repeat(i).take(p)).collect();
    (ts_rep, xs.select(Axis(0), &idx))
}
