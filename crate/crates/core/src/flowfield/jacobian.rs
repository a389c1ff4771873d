use super::VectorField;
use crate::error::{Error, Result};
use crate::numerics::{gaussian_sample, RngStream, Tensor};

/// Probes per batched JVP call.
const PROBE_CHUNK: usize = 256;

/// Individual Hutchinson samples `||J eps||^2`, `eps ~ N(0, I)`, each an
/// unbiased estimate of `||J||_F^2` for `J = grad_x u_t(x)`.
pub fn hutchinson_samples(
    field: &dyn VectorField,
    t: f64,
    x: &Tensor,
    rng: &mut RngStream,
    n_probes: usize,
) -> Result<Vec<f64>> {
    if n_probes == 0 {
        return Err(Error::invalid("at least one probe is required"));
    }
    let mut out = Vec::with_capacity(n_probes);
    let mut remaining = n_probes;
    while remaining > 0 {
        let batch = remaining.min(PROBE_CHUNK);
        let probes = (0..batch)
            .map(|_| gaussian_sample(rng, x.shape()))
            .collect::<Result<Vec<_>>>()?;
        for jv in field.jvp_many(t, x, &probes)? {
            out.push(jv.norm_sq());
        }
        remaining -= batch;
    }
    Ok(out)
}

/// Hutchinson estimate of the squared Frobenius norm of the field Jacobian.
pub fn estimate_jacobian_norm(
    field: &dyn VectorField,
    t: f64,
    x: &Tensor,
    rng: &mut RngStream,
    n_probes: usize,
) -> Result<f64> {
    let samples = hutchinson_samples(field, t, x, rng, n_probes)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Lower estimate of the spectral norm `||J||_2` by power iteration on
/// `J^T J`, returning the largest `||J v|| / ||v||` seen.
pub fn spectral_norm_estimate(
    field: &dyn VectorField,
    t: f64,
    x: &Tensor,
    rng: &mut RngStream,
    iterations: usize,
) -> Result<f64> {
    let mut v = gaussian_sample(rng, x.shape())?;
    let mut best: f64 = 0.0;
    for _ in 0..iterations.max(1) {
        let norm = v.norm_l2();
        if norm == 0.0 {
            break;
        }
        v = v.scale(1.0 / norm);
        let jv = field.jvp(t, x, &v)?;
        best = best.max(jv.norm_l2());
        v = field.vjp(t, x, &jv)?;
    }
    Ok(best)
}

/// Empirical Lipschitz constant in `x`: the largest spectral-norm estimate
/// over the supplied `(t, x)` points, 20 power steps each.
pub fn lipschitz_estimate(field: &dyn VectorField, points: &[(f64, Tensor)], rng: &mut RngStream) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (t, x) in points {
        best = best.max(spectral_norm_estimate(field, *t, x, rng, 20)?);
    }
    Ok(best)
}
