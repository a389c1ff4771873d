use crate::degrade::DataTerm;
use crate::error::{Error, Result};
use crate::flowfield::{Denoiser, VectorField};
use crate::numerics::{gaussian_sample, RngStream, Tensor};
use crate::schedule::Schedule;

/// The extrapolated point `w = x_k + h (x_k - x_{k-1})`. With `h == 0` the
/// current iterate is returned untouched so both iterations agree bit for bit.
pub fn extrapolate(x: &Tensor, x_prev: &Tensor, h: f64) -> Result<Tensor> {
    if h == 0.0 {
        x.check_same_shape(x_prev)?;
        return Ok(x.clone());
    }
    x.axpy(h, &x.sub(x_prev)?)
}

/// One update from the (possibly extrapolated) point `w` with explicit
/// noise draws: `z = w - gamma_k grad f(w)`, `y = (1 - l_k) xi + l_k z`,
/// result `D_{l_k}(y)`, averaged over the draws.
pub fn step_from(
    w: &Tensor,
    k: usize,
    field: &dyn VectorField,
    data: &dyn DataTerm,
    schedule: &Schedule,
    noise: &[Tensor],
) -> Result<Tensor> {
    if noise.is_empty() {
        return Err(Error::invalid("at least one noise draw is required"));
    }
    let l = schedule.l(k);
    if !(0.0..1.0).contains(&l) {
        return Err(Error::invalid(format!("step {k} has l = {l}, outside [0, 1)")));
    }
    let gamma = schedule.gamma(k);
    let z = if gamma == 0.0 { w.clone() } else { w.axpy(-gamma, &data.grad(w)?)? };
    let denoiser = Denoiser::new(field);
    let mut acc: Option<Tensor> = None;
    for xi in noise {
        let y = xi.scale(1.0 - l).axpy(l, &z)?;
        let d = denoiser.denoise(l, &y)?;
        acc = Some(match acc {
            None => d,
            Some(a) => a.add(&d)?,
        });
    }
    let mut out = acc.expect("non-empty noise");
    if noise.len() > 1 {
        out = out.scale(1.0 / noise.len() as f64);
    }
    if !out.all_finite() {
        return Err(Error::Diverged {
            step: k,
            reason: "non-finite state".into(),
        });
    }
    Ok(out)
}

fn draw_noise(rng: &mut RngStream, shape: &[usize], draws: usize) -> Result<Vec<Tensor>> {
    (0..draws.max(1)).map(|_| gaussian_sample(rng, shape)).collect()
}

/// One plain iteration `x_{k+1} = D_{l_k}((1 - l_k) xi + l_k (x_k - gamma_k grad f(x_k)))`.
pub fn pnpflow_step(
    x: &Tensor,
    k: usize,
    field: &dyn VectorField,
    data: &dyn DataTerm,
    schedule: &Schedule,
    rng: &mut RngStream,
    draws: usize,
) -> Result<Tensor> {
    let noise = draw_noise(rng, x.shape(), draws)?;
    step_from(x, k, field, data, schedule, &noise)
}

/// One extrapolated iteration: the plain update applied at
/// `w = x_k + h (x_k - x_{k-1})`.
#[allow(clippy::too_many_arguments)]
pub fn ipnpflow_step(
    x: &Tensor,
    x_prev: &Tensor,
    k: usize,
    field: &dyn VectorField,
    data: &dyn DataTerm,
    schedule: &Schedule,
    h: f64,
    rng: &mut RngStream,
    draws: usize,
) -> Result<Tensor> {
    let w = extrapolate(x, x_prev, h)?;
    let noise = draw_noise(rng, x.shape(), draws)?;
    step_from(&w, k, field, data, schedule, &noise)
}
