use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::degrade::gaussian_kernel;
use crate::error::{Error, Result};
use crate::numerics::{conv2d_circular, gaussian_sample, RngStream, Tensor};

/// Procedural image families used in place of a downloaded dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// A dim background with one to three smooth Gaussian bumps.
    Blobs,
    /// An oriented sinusoidal grating.
    Stripes,
    /// Two-level checkerboard with random cell size and phase.
    Checkerboard,
    /// White noise low-passed by a Gaussian, rescaled into `[0.1, 0.9]`.
    FilteredNoise,
    /// Any of the above, chosen uniformly per image.
    Mixed,
}

impl Generator {
    pub const ALL: [Generator; 4] = [
        Generator::Blobs,
        Generator::Stripes,
        Generator::Checkerboard,
        Generator::FilteredNoise,
    ];
}

fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

fn plane(generator: Generator, size: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let n = size as f64;
    let mut out = vec![0.0; size * size];
    match generator {
        Generator::Blobs => {
            let background = uniform(rng, 0.1, 0.3);
            out.iter_mut().for_each(|v| *v = background);
            let count = 1 + (rng.uniform() * 3.0) as usize;
            for _ in 0..count {
                let amp = uniform(rng, 0.3, 0.7);
                let (ci, cj) = (uniform(rng, 0.2, 0.8) * n, uniform(rng, 0.2, 0.8) * n);
                let width = uniform(rng, 0.1, 0.25) * n;
                for i in 0..size {
                    for j in 0..size {
                        let d2 = (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2);
                        out[i * size + j] += amp * (-d2 / (2.0 * width * width)).exp();
                    }
                }
            }
        }
        Generator::Stripes => {
            let freq = uniform(rng, 1.0, 4.0);
            let theta = uniform(rng, 0.0, PI);
            let phase = uniform(rng, 0.0, 2.0 * PI);
            let (c, s) = (theta.cos(), theta.sin());
            for i in 0..size {
                for j in 0..size {
                    let u = (i as f64 * c + j as f64 * s) / n;
                    out[i * size + j] = 0.5 + 0.4 * (2.0 * PI * freq * u + phase).sin();
                }
            }
        }
        Generator::Checkerboard => {
            let max_cell = (size / 4).max(2);
            let cell = 2 + (rng.uniform() * (max_cell - 1) as f64) as usize;
            let (a, b) = (uniform(rng, 0.1, 0.4), uniform(rng, 0.6, 0.9));
            let (oi, oj) = ((rng.uniform() * cell as f64) as usize, (rng.uniform() * cell as f64) as usize);
            for i in 0..size {
                for j in 0..size {
                    let parity = ((i + oi) / cell + (j + oj) / cell) % 2;
                    out[i * size + j] = if parity == 0 { a } else { b };
                }
            }
        }
        Generator::FilteredNoise => {
            let noise = gaussian_sample(rng, &[size, size])?;
            let smooth = conv2d_circular(&noise, &gaussian_kernel(2.0, 9)?)?;
            let lo = smooth.data().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = smooth.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(1e-12);
            for (o, v) in out.iter_mut().zip(smooth.data()) {
                *o = 0.1 + 0.8 * (v - lo) / span;
            }
        }
        Generator::Mixed => {
            let pick = Generator::ALL[(rng.uniform() * 4.0) as usize % 4];
            return plane(pick, size, rng);
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(out)
}

/// One synthetic image with values in `[0, 1]`, shaped `[size, size]` for one
/// channel or `[channels, size, size]` otherwise. Colour images scale a shared
/// pattern per channel.
pub fn synthetic_image(generator: Generator, size: usize, channels: usize, rng: &mut RngStream) -> Result<Tensor> {
    if size < 4 || channels == 0 {
        return Err(Error::invalid(format!(
            "synthetic images need size >= 4 and at least one channel, got {size} and {channels}"
        )));
    }
    let base = plane(generator, size, rng)?;
    if channels == 1 {
        return Tensor::from_vec(&[size, size], base);
    }
    let mut data = Vec::with_capacity(channels * size * size);
    for _ in 0..channels {
        let gain = uniform(rng, 0.7, 1.0);
        data.extend(base.iter().map(|v| (v * gain).clamp(0.0, 1.0)));
    }
    Tensor::from_vec(&[channels, size, size], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_in_unit_range_and_deterministic() {
        for g in [
            Generator::Blobs,
            Generator::Stripes,
            Generator::Checkerboard,
            Generator::FilteredNoise,
            Generator::Mixed,
        ] {
            for size in [16, 32, 64] {
                let a = synthetic_image(g, size, 1, &mut RngStream::new(3, 1)).unwrap();
                let b = synthetic_image(g, size, 1, &mut RngStream::new(3, 1)).unwrap();
                assert!(a.bit_eq(&b));
                assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
                assert_eq!(a.shape(), &[size, size]);
            }
        }
    }

    #[test]
    fn colour_shape() {
        let img = synthetic_image(Generator::Blobs, 16, 3, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(img.shape(), &[3, 16, 16]);
    }

    #[test]
    fn images_vary_with_stream() {
        let a = synthetic_image(Generator::Mixed, 32, 1, &mut RngStream::new(1, 0)).unwrap();
        let b = synthetic_image(Generator::Mixed, 32, 1, &mut RngStream::new(1, 1)).unwrap();
        assert!(!a.bit_eq(&b));
    }

    #[test]
    fn too_small_rejected() {
        assert!(synthetic_image(Generator::Blobs, 2, 1, &mut RngStream::new(1, 0)).is_err());
    }
}
