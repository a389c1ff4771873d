use std::f64::consts::PI;

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{check_time, VectorField};
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

/// Smooth hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Silu,
}

impl Activation {
    pub fn id(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Silu => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Silu),
            _ => None,
        }
    }

    #[inline]
    fn value(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Silu => a / (1.0 + (-a).exp()),
        }
    }

    #[inline]
    fn d1(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let th = a.tanh();
                1.0 - th * th
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-a).exp());
                s * (1.0 + a * (1.0 - s))
            }
        }
    }

    #[inline]
    fn d2(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let th = a.tanh();
                -2.0 * th * (1.0 - th * th)
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-a).exp());
                s * (1.0 - s) * (2.0 + a * (1.0 - 2.0 * s))
            }
        }
    }
}

/// How the scalar time enters the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeEmbedding {
    /// No time input; the field is autonomous.
    None,
    /// `[t, sin 2 pi t, cos 2 pi t, sin 4 pi t, cos 4 pi t]`.
    Fourier,
}

impl TimeEmbedding {
    pub fn id(self) -> u8 {
        match self {
            TimeEmbedding::None => 0,
            TimeEmbedding::Fourier => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(TimeEmbedding::None),
            1 => Some(TimeEmbedding::Fourier),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            TimeEmbedding::None => 0,
            TimeEmbedding::Fourier => 5,
        }
    }

    fn write(self, t: f64, out: &mut [f64]) {
        if let TimeEmbedding::Fourier = self {
            let w = 2.0 * PI * t;
            out[0] = t;
            out[1] = w.sin();
            out[2] = w.cos();
            out[3] = (2.0 * w).sin();
            out[4] = (2.0 * w).cos();
        }
    }
}

/// Fully connected field `u_t(x; theta)`: input `[x, embed(t)]`, smooth hidden
/// layers, linear output of the same dimension as `x`.
///
/// Parameters live in one flat vector, layer by layer, each layer stored as
/// its row-major `out x in` weight matrix followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpField {
    widths: Vec<usize>,
    activation: Activation,
    embedding: TimeEmbedding,
    params: Vec<f64>,
}

/// Activations saved by a batched forward pass, needed for gradients.
#[derive(Clone, Debug)]
pub struct Recording {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl Recording {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.pre.last().expect("at least one layer").view()
    }

    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

/// Forward-mode tangents through a recorded pass.
#[derive(Clone, Debug)]
pub struct Tangent {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
}

impl Tangent {
    /// Output tangent `J v`, one row per probe.
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.pre.last().expect("at least one layer").view()
    }
}

fn param_count_for(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl MlpField {
    /// Fresh network with fan-in scaled uniform initialization
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(
        state_dim: usize,
        hidden: &[usize],
        activation: Activation,
        embedding: TimeEmbedding,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let widths = Self::layout(state_dim, hidden, embedding)?;
        let mut params = Vec::with_capacity(param_count_for(&widths));
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] + 1) * w[1] {
                params.push(bound * (2.0 * rng.uniform() - 1.0));
            }
        }
        Ok(Self {
            widths,
            activation,
            embedding,
            params,
        })
    }

    pub fn from_params(
        state_dim: usize,
        hidden: &[usize],
        activation: Activation,
        embedding: TimeEmbedding,
        params: Vec<f64>,
    ) -> Result<Self> {
        let widths = Self::layout(state_dim, hidden, embedding)?;
        let expected = param_count_for(&widths);
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "widths {widths:?} need {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(Self {
            widths,
            activation,
            embedding,
            params,
        })
    }

    fn layout(state_dim: usize, hidden: &[usize], embedding: TimeEmbedding) -> Result<Vec<usize>> {
        if state_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut widths = vec![state_dim + embedding.width()];
        widths.extend_from_slice(hidden);
        widths.push(state_dim);
        Ok(widths)
    }

    /// Full layer widths `[input, hidden.., output]`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn state_dim(&self) -> usize {
        *self.widths.last().expect("non-empty widths")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn embedding(&self) -> TimeEmbedding {
        self.embedding
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let offset: usize = self.widths[..=l]
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum();
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[offset..offset + fan_in * fan_out])
            .expect("layer slice matches layout");
        let b = ArrayView1::from(&self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out]);
        (w, b)
    }

    fn layer_offset(&self, l: usize) -> usize {
        self.widths[..=l].windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Network input rows `[x_i, embed(t_i)]`.
    pub fn input_matrix(&self, ts: &[f64], xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let n = self.state_dim();
        if xs.ncols() != n || xs.nrows() != ts.len() {
            return Err(Error::invalid(format!(
                "batch of {} states with {} columns and {} times does not fit state dim {n}",
                xs.nrows(),
                xs.ncols(),
                ts.len()
            )));
        }
        let mut input = Array2::zeros((ts.len(), self.widths[0]));
        input.slice_mut(s![.., ..n]).assign(&xs);
        for (i, &t) in ts.iter().enumerate() {
            check_time(t)?;
            let mut row = input.row_mut(i);
            let slot = row.as_slice_mut().expect("standard layout");
            self.embedding.write(t, &mut slot[n..]);
        }
        Ok(input)
    }

    /// Batched forward pass keeping the activations.
    pub fn record(&self, ts: &[f64], xs: ArrayView2<'_, f64>) -> Result<Recording> {
        let input = self.input_matrix(ts, xs)?;
        Ok(self.record_input(input))
    }

    fn record_input(&self, input: Array2<f64>) -> Recording {
        let layers = self.num_layers();
        let mut pre = Vec::with_capacity(layers);
        let mut post = Vec::with_capacity(layers - 1);
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let h_in = if l == 0 { &input } else { &post[l - 1] };
            let mut a = h_in.dot(&w.t());
            a += &b;
            if l + 1 < layers {
                post.push(a.mapv(|v| self.activation.value(v)));
            }
            pre.push(a);
        }
        Recording { input, pre, post }
    }

    /// Batched evaluation, one state per row.
    pub fn forward_batch(&self, ts: &[f64], xs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut rec = self.record(ts, xs)?;
        Ok(rec.pre.pop().expect("at least one layer"))
    }

    /// Propagates state-space tangents (one per recorded row) forward.
    pub fn tangent(&self, rec: &Recording, probes: ArrayView2<'_, f64>) -> Result<Tangent> {
        let n = self.state_dim();
        if probes.nrows() != rec.batch_size() || probes.ncols() != n {
            return Err(Error::invalid("probe batch does not match the recording"));
        }
        let mut input = Array2::zeros((probes.nrows(), self.widths[0]));
        input.slice_mut(s![.., ..n]).assign(&probes);
        let layers = self.num_layers();
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut h = input.clone();
        for l in 0..layers {
            let (w, _) = self.layer(l);
            let ta = h.dot(&w.t());
            if l + 1 < layers {
                let act = self.activation;
                let mut next = ta.clone();
                next.zip_mut_with(&rec.pre[l], |tv, &a| *tv *= act.d1(a));
                h = next;
            }
            pre.push(ta);
        }
        Ok(Tangent { input, pre })
    }

    /// Exact gradient of a scalar loss with respect to all parameters, given
    /// `dL/d(output)` for every recorded row.
    pub fn grad_theta(&self, rec: &Recording, output_adjoint: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.backward(rec, None, Some(output_adjoint), None)
    }

    /// Gradient of a loss that depends on both the outputs and the output
    /// tangents `J v` (reverse mode over the forward-mode pass). Either
    /// adjoint may be omitted.
    pub fn grad_theta_with_tangent(
        &self,
        rec: &Recording,
        tangent: &Tangent,
        output_adjoint: Option<ArrayView2<'_, f64>>,
        tangent_adjoint: ArrayView2<'_, f64>,
    ) -> Result<Vec<f64>> {
        self.backward(rec, Some(tangent), output_adjoint, Some(tangent_adjoint))
    }

    fn backward(
        &self,
        rec: &Recording,
        tangent: Option<&Tangent>,
        output_adjoint: Option<ArrayView2<'_, f64>>,
        tangent_adjoint: Option<ArrayView2<'_, f64>>,
    ) -> Result<Vec<f64>> {
        let layers = self.num_layers();
        let rows = rec.batch_size();
        let out_dim = self.state_dim();
        let check = |m: &ArrayView2<'_, f64>| -> Result<()> {
            if m.nrows() != rows || m.ncols() != out_dim {
                return Err(Error::invalid("output adjoint does not match the recording"));
            }
            Ok(())
        };
        let mut a_adj = match output_adjoint {
            Some(adj) => {
                check(&adj)?;
                adj.to_owned()
            }
            None => Array2::zeros((rows, out_dim)),
        };
        let mut t_adj = match (tangent, tangent_adjoint) {
            (Some(_), Some(adj)) => {
                check(&adj)?;
                Some(adj.to_owned())
            }
            (None, None) => None,
            _ => return Err(Error::invalid("tangent adjoint requires a tangent pass")),
        };

        let act = self.activation;
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..layers).rev() {
            let (w, _) = self.layer(l);
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let offset = self.layer_offset(l);
            let h_in = if l == 0 { &rec.input } else { &rec.post[l - 1] };

            let mut dw = a_adj.t().dot(h_in);
            if let (Some(ta), Some(tan)) = (&t_adj, tangent) {
                let th_in = if l == 0 {
                    tan.input.clone()
                } else {
                    let mut th = tan.pre[l - 1].clone();
                    th.zip_mut_with(&rec.pre[l - 1], |v, &a| *v *= act.d1(a));
                    th
                };
                dw += &ta.t().dot(&th_in);
            }
            let db = a_adj.sum_axis(Axis(0));
            grad[offset..offset + fan_in * fan_out]
                .copy_from_slice(dw.as_standard_layout().as_slice().expect("contiguous"));
            grad[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out]
                .copy_from_slice(db.as_slice().expect("contiguous"));

            if l == 0 {
                break;
            }
            let pre = &rec.pre[l - 1];
            let h_adj = a_adj.dot(&w);
            let mut next_a = h_adj;
            next_a.zip_mut_with(pre, |v, &a| *v *= act.d1(a));
            if let (Some(ta), Some(tan)) = (&t_adj, tangent) {
                let th_adj = ta.dot(&w);
                let mut next_t = th_adj.clone();
                next_t.zip_mut_with(pre, |v, &a| *v *= act.d1(a));
                // second-order term: the tangent's dependence on the primal pre-activation
                ndarray::Zip::from(&mut next_a)
                    .and(&th_adj)
                    .and(pre)
                    .and(&tan.pre[l - 1])
                    .for_each(|na, &tha, &a, &ta_pre| *na += tha * act.d2(a) * ta_pre);
                t_adj = Some(next_t);
            }
            a_adj = next_a;
        }
        Ok(grad)
    }

    /// Gradient of `sum_i <adjoint_i, output_i>` with respect to the state inputs.
    pub fn input_adjoint(&self, rec: &Recording, output_adjoint: ArrayView2<'_, f64>) -> Array2<f64> {
        let act = self.activation;
        let mut adj = output_adjoint.to_owned();
        for l in (0..self.num_layers()).rev() {
            let (w, _) = self.layer(l);
            let h_adj = adj.dot(&w);
            if l == 0 {
                return h_adj.slice(s![.., ..self.state_dim()]).to_owned();
            }
            adj = h_adj;
            adj.zip_mut_with(&rec.pre[l - 1], |v, &a| *v *= act.d1(a));
        }
        unreachable!("network has at least one layer")
    }

    fn single_row(x: &Tensor) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((1, x.len()), x.data()).expect("contiguous tensor")
    }

    fn check_state(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::invalid(format!(
                "network expects {} state entries, got shape {:?}",
                self.state_dim(),
                x.shape()
            )));
        }
        Ok(())
    }
}

impl VectorField for MlpField {
    fn dim(&self) -> Option<usize> {
        Some(self.state_dim())
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        self.check_state(x)?;
        let out = self.forward_batch(&[t], Self::single_row(x))?;
        Ok(Tensor::from_parts(x.shape().to_vec(), out.into_raw_vec()))
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        x.check_same_shape(v)?;
        let mut out = self.jvp_many(t, x, std::slice::from_ref(v))?;
        Ok(out.pop().expect("one probe"))
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        self.check_state(x)?;
        x.check_same_shape(w)?;
        let rec = self.record(&[t], Self::single_row(x))?;
        let adj = self.input_adjoint(&rec, Self::single_row(w));
        Ok(Tensor::from_parts(x.shape().to_vec(), adj.into_raw_vec()))
    }

    fn jvp_many(&self, t: f64, x: &Tensor, probes: &[Tensor]) -> Result<Vec<Tensor>> {
        check_time(t)?;
        self.check_state(x)?;
        if probes.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.state_dim();
        let rows = probes.len();
        let xs = Self::single_row(x).broadcast((rows, n)).expect("row broadcast").to_owned();
        let mut pm = Array2::zeros((rows, n));
        for (i, p) in probes.iter().enumerate() {
            x.check_same_shape(p)?;
            pm.row_mut(i).assign(&ArrayView1::from(p.data()));
        }
        let ts = vec![t; rows];
        let rec = self.record(&ts, xs.view())?;
        let tan = self.tangent(&rec, pm.view())?;
        Ok(tan
            .output()
            .outer_iter()
            .map(|row| Tensor::from_parts(x.shape().to_vec(), row.to_vec()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_sample;
    use ndarray::Array2;

    fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.normal())
    }

    fn random_times(rng: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform()).collect()
    }

    #[test]
    fn parameter_count_matches_layout() {
        let mut rng = RngStream::new(1, 0);
        let f = MlpField::new(6, &[16, 8], Activation::Silu, TimeEmbedding::Fourier, &mut rng).unwrap();
        assert_eq!(f.widths(), &[11, 16, 8, 6]);
        assert_eq!(f.param_count(), 12 * 16 + 17 * 8 + 9 * 6);
    }

    #[test]
    fn zero_adjoint_gives_zero_gradient() {
        let mut rng = RngStream::new(2, 0);
        let f = MlpField::new(3, &[7], Activation::Tanh, TimeEmbedding::Fourier, &mut rng).unwrap();
        let xs = random_matrix(&mut rng, 4, 3);
        let ts = random_times(&mut rng, 4);
        let rec = f.record(&ts, xs.view()).unwrap();
        let g = f.grad_theta(&rec, Array2::zeros((4, 3)).view()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_gradient_closed_form() {
        // L = ||W x + b - y||^2 => dL/dW = 2 r x^T, dL/db = 2 r.
        let mut rng = RngStream::new(3, 0);
        let f = MlpField::new(4, &[], Activation::Tanh, TimeEmbedding::None, &mut rng).unwrap();
        let x = random_matrix(&mut rng, 1, 4);
        let y = random_matrix(&mut rng, 1, 4);
        let rec = f.record(&[0.5], x.view()).unwrap();
        let r = &rec.output() - &y;
        let g = f.grad_theta(&rec, (&r * 2.0).view()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = 2.0 * r[[0, i]] * x[[0, j]];
                assert!((g[i * 4 + j] - expected).abs() <= 1e-12);
            }
            assert!((g[16 + i] - 2.0 * r[[0, i]]).abs() <= 1e-12);
        }
    }

    /// Scalar `g(theta) = sum_i <v_i, u(t_i, x_i; theta)>` for finite differences.
    fn weighted_output(f: &MlpField, ts: &[f64], xs: &Array2<f64>, vs: &Array2<f64>) -> f64 {
        (&f.forward_batch(ts, xs.view()).unwrap() * vs).sum()
    }

    fn check_grad_matrix(activation: Activation, hidden: &[usize], state: usize, seed: u64) {
        let mut rng = RngStream::new(seed, 0);
        let f = MlpField::new(state, hidden, activation, TimeEmbedding::Fourier, &mut rng).unwrap();
        let xs = random_matrix(&mut rng, 3, state);
        let vs = random_matrix(&mut rng, 3, state);
        let ts = random_times(&mut rng, 3);
        let rec = f.record(&ts, xs.view()).unwrap();
        let g = f.grad_theta(&rec, vs.view()).unwrap();
        let h = 1e-6;
        for _ in 0..50 {
            let i = (rng.uniform() * f.param_count() as f64) as usize;
            let mut fp = f.clone();
            fp.params_mut()[i] += h;
            let mut fm = f.clone();
            fm.params_mut()[i] -= h;
            let fd = (weighted_output(&fp, &ts, &xs, &vs) - weighted_output(&fm, &ts, &xs, &vs)) / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-3);
            assert!((fd - g[i]).abs() / denom < 1e-5, "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn reverse_mode_matches_finite_differences() {
        check_grad_matrix(Activation::Silu, &[12, 9], 4, 10);
        check_grad_matrix(Activation::Tanh, &[6], 2, 11);
        check_grad_matrix(Activation::Silu, &[], 3, 12);
    }

    #[test]
    fn jvp_matches_finite_differences() {
        let mut rng = RngStream::new(4, 0);
        for activation in [Activation::Silu, Activation::Tanh] {
            let f = MlpField::new(5, &[10, 10], activation, TimeEmbedding::Fourier, &mut rng).unwrap();
            let x = gaussian_sample(&mut rng, &[5]).unwrap();
            let v = gaussian_sample(&mut rng, &[5]).unwrap();
            let t = 0.37;
            let j = f.jvp(t, &x, &v).unwrap();
            let d = 1e-6;
            let fd = f
                .eval(t, &x.axpy(d, &v).unwrap())
                .unwrap()
                .sub(&f.eval(t, &x.axpy(-d, &v).unwrap()).unwrap())
                .unwrap()
                .scale(0.5 / d);
            let rel = j.sub(&fd).unwrap().norm_l2() / j.norm_l2();
            assert!(rel < 1e-6, "relative error {rel}");
        }
    }

    #[test]
    fn jvp_of_zero_probe_is_zero() {
        let mut rng = RngStream::new(5, 0);
        let f = MlpField::new(3, &[4], Activation::Silu, TimeEmbedding::Fourier, &mut rng).unwrap();
        let x = gaussian_sample(&mut rng, &[3]).unwrap();
        let j = f.jvp(0.2, &x, &x.zeros_like()).unwrap();
        assert_eq!(j.norm_inf(), 0.0);
    }

    #[test]
    fn linear_network_jvp_is_weight_block() {
        let mut rng = RngStream::new(6, 0);
        let f = MlpField::new(3, &[], Activation::Tanh, TimeEmbedding::Fourier, &mut rng).unwrap();
        let x = gaussian_sample(&mut rng, &[3]).unwrap();
        let v = gaussian_sample(&mut rng, &[3]).unwrap();
        let j = f.jvp(0.6, &x, &v).unwrap();
        // weight matrix is 3 x 8 (state + 5 embedding columns)
        for i in 0..3 {
            let expected: f64 = (0..3).map(|k| f.params()[i * 8 + k] * v.data()[k]).sum();
            assert!((j.data()[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn vjp_is_transpose_of_jvp() {
        let mut rng = RngStream::new(7, 0);
        let f = MlpField::new(4, &[8, 8], Activation::Silu, TimeEmbedding::Fourier, &mut rng).unwrap();
        let x = gaussian_sample(&mut rng, &[4]).unwrap();
        let v = gaussian_sample(&mut rng, &[4]).unwrap();
        let w = gaussian_sample(&mut rng, &[4]).unwrap();
        let lhs = f.jvp(0.4, &x, &v).unwrap().dot(&w).unwrap();
        let rhs = v.dot(&f.vjp(0.4, &x, &w).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn tangent_gradient_matches_finite_differences() {
        // P(theta) = sum_i ||J_i v_i||^2 differentiated through the tangent pass.
        let mut rng = RngStream::new(8, 0);
        for activation in [Activation::Silu, Activation::Tanh] {
            let f = MlpField::new(3, &[7, 5], activation, TimeEmbedding::Fourier, &mut rng).unwrap();
            let xs = random_matrix(&mut rng, 4, 3);
            let ps = random_matrix(&mut rng, 4, 3);
            let ts = random_times(&mut rng, 4);
            let penalty = |net: &MlpField| {
                let rec = net.record(&ts, xs.view()).unwrap();
                let tan = net.tangent(&rec, ps.view()).unwrap();
                tan.output().mapv(|v| v * v).sum()
            };
            let rec = f.record(&ts, xs.view()).unwrap();
            let tan = f.tangent(&rec, ps.view()).unwrap();
            let adj = tan.output().mapv(|v| 2.0 * v);
            let g = f.grad_theta_with_tangent(&rec, &tan, None, adj.view()).unwrap();
            let h = 1e-6;
            for _ in 0..50 {
                let i = (rng.uniform() * f.param_count() as f64) as usize;
                let mut fp = f.clone();
                fp.params_mut()[i] += h;
                let mut fm = f.clone();
                fm.params_mut()[i] -= h;
                let fd = (penalty(&fp) - penalty(&fm)) / (2.0 * h);
                let denom = g[i].abs().max(fd.abs()).max(1e-3);
                assert!((fd - g[i]).abs() / denom < 1e-5, "param {i}: fd {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn eval_is_deterministic_and_shape_preserving() {
        let mut rng = RngStream::new(9, 0);
        let f = MlpField::new(6, &[5], Activation::Silu, TimeEmbedding::Fourier, &mut rng).unwrap();
        let x = gaussian_sample(&mut rng, &[2, 3]).unwrap();
        let a = f.eval(0.1, &x).unwrap();
        let b = f.eval(0.1, &x).unwrap();
        assert!(a.bit_eq(&b));
        assert_eq!(a.shape(), &[2, 3]);
        assert!(f.eval(0.1, &Tensor::zeros(&[5]).unwrap()).is_err());
        assert!(f.eval(1.2, &x).is_err());
    }
}
