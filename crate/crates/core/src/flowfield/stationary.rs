use std::f64::consts::PI;

use super::{check_time, VectorField};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_sample, spectral_filter, RngStream, Tensor};

/// Exact marginal field for a stationary Gaussian image prior on a periodic
/// `side x side` grid.
///
/// Targets are `x_1 = m + C^{1/2} g` with a circulant covariance `C` whose
/// eigenvalues are the power spectrum `S(a, b)` on the 2-D DFT frequencies.
/// Each Fourier mode is then an independent scalar Gaussian target, and the
/// field applies the scalar gain of [`GaussianOracleField`](super::GaussianOracleField)
/// mode by mode:
///
/// `u_t(x) = m + F^{-1} [ (t S - (1 - t)) / ((1 - t)^2 + t^2 S) . F(x - t m) ]`.
#[derive(Clone, Debug)]
pub struct StationaryGaussianField {
    side: usize,
    mean: f64,
    spectrum: Vec<f64>,
}

fn mirror(i: usize, n: usize) -> usize {
    (n - i) % n
}

impl StationaryGaussianField {
    pub fn new(side: usize, mean: f64, spectrum: Vec<f64>) -> Result<Self> {
        if side == 0 || spectrum.len() != side * side {
            return Err(Error::invalid(format!(
                "a {side} x {side} field needs {} spectral values, got {}",
                side * side,
                spectrum.len()
            )));
        }
        if !mean.is_finite() || spectrum.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("the mean must be finite and the spectrum positive"));
        }
        for a in 0..side {
            for b in 0..side {
                let twin = spectrum[mirror(a, side) * side + mirror(b, side)];
                if spectrum[a * side + b] != twin {
                    return Err(Error::invalid("the spectrum must be symmetric for a real field"));
                }
            }
        }
        Ok(Self { side, mean, spectrum })
    }

    /// White noise smoothed by a Gaussian filter of `correlation` pixels,
    /// scaled to an average pixel standard deviation `amplitude`, plus a white
    /// floor of standard deviation `floor` that keeps every mode non-degenerate.
    pub fn smooth(side: usize, mean: f64, amplitude: f64, correlation: f64, floor: f64) -> Result<Self> {
        if !(amplitude > 0.0 && correlation >= 0.0 && floor > 0.0) {
            return Err(Error::invalid(format!(
                "need amplitude > 0, correlation >= 0 and floor > 0, got {amplitude}, {correlation}, {floor}"
            )));
        }
        let freq = |i: usize| i.min(side - i) as f64 / side as f64;
        let mut shape = Vec::with_capacity(side * side);
        for a in 0..side {
            for b in 0..side {
                let w2 = (2.0 * PI).powi(2) * (freq(a).powi(2) + freq(b).powi(2));
                shape.push((-w2 * correlation * correlation).exp());
            }
        }
        let norm = shape.iter().sum::<f64>() / shape.len() as f64;
        let spectrum = shape
            .iter()
            .map(|s| amplitude * amplitude * s / norm + floor * floor)
            .collect();
        Self::new(side, mean, spectrum)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Pixel standard deviation of the prior.
    pub fn pixel_std(&self) -> f64 {
        (self.spectrum.iter().sum::<f64>() / self.spectrum.len() as f64).sqrt()
    }

    /// One prior sample, shaped `[side, side]`.
    pub fn sample(&self, rng: &mut RngStream) -> Result<Tensor> {
        let n = self.side;
        let white = gaussian_sample(rng, &[n, n])?;
        let gains: Vec<f64> = self.spectrum.iter().map(|s| s.sqrt()).collect();
        let data = spectral_filter(white.data(), n, n, &gains)
            .into_iter()
            .map(|v| v + self.mean)
            .collect();
        Tensor::from_vec(&[n, n], data)
    }

    fn gains(&self, t: f64) -> Vec<f64> {
        self.spectrum
            .iter()
            .map(|&s| (t * s - (1.0 - t)) / ((1.0 - t).powi(2) + t * t * s))
            .collect()
    }

    /// `sup_t ||grad u_t||_2 = max over modes of (1 + S) / (2 sqrt(S))`.
    pub fn lipschitz_sup(&self) -> f64 {
        self.spectrum
            .iter()
            .map(|&s| (1.0 + s) / (2.0 * s.sqrt()))
            .fold(0.0, f64::max)
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.len() != self.side * self.side {
            return Err(Error::invalid(format!(
                "field is {0} x {0}, got shape {1:?}",
                self.side,
                x.shape()
            )));
        }
        Ok(())
    }
}

impl VectorField for StationaryGaussianField {
    fn dim(&self) -> Option<usize> {
        Some(self.side * self.side)
    }

    fn eval(&self, t: f64, x: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        self.check(x)?;
        let centered: Vec<f64> = x.data().iter().map(|v| v - t * self.mean).collect();
        let data = spectral_filter(&centered, self.side, self.side, &self.gains(t))
            .into_iter()
            .map(|v| v + self.mean)
            .collect();
        Tensor::from_vec(x.shape(), data)
    }

    fn jvp(&self, t: f64, x: &Tensor, v: &Tensor) -> Result<Tensor> {
        check_time(t)?;
        self.check(x)?;
        x.check_same_shape(v)?;
        Tensor::from_vec(v.shape(), spectral_filter(v.data(), self.side, self.side, &self.gains(t)))
    }

    fn vjp(&self, t: f64, x: &Tensor, w: &Tensor) -> Result<Tensor> {
        self.jvp(t, x, w)
    }
}
