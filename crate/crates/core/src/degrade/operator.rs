use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{conv2d_circular, flip_kernel, RngStream, Tensor};

/// Degradation family and its parameters, as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorKind {
    IdentityNoise,
    GaussianBlur {
        #[serde(default = "default_blur_std")]
        std: f64,
        #[serde(default = "default_kernel_size")]
        size: usize,
    },
    Downsample {
        #[serde(default = "default_factor")]
        factor: usize,
    },
    RandomMask {
        #[serde(default = "default_drop_ratio")]
        drop_ratio: f64,
        #[serde(default)]
        seed: u64,
    },
    BoxMask {
        #[serde(default = "default_box_fraction")]
        area_fraction: f64,
    },
}

fn default_blur_std() -> f64 {
    1.0
}
fn default_kernel_size() -> usize {
    9
}
fn default_factor() -> usize {
    2
}
fn default_drop_ratio() -> f64 {
    0.7
}
fn default_box_fraction() -> f64 {
    1.0 / 16.0
}

impl OperatorKind {
    pub fn gaussian_blur() -> Self {
        OperatorKind::GaussianBlur {
            std: default_blur_std(),
            size: default_kernel_size(),
        }
    }
}

#[derive(Clone, Debug)]
enum Linear {
    Identity,
    Blur { kernel: Tensor, flipped: Tensor },
    Downsample { factor: usize },
    // mask is shaped like the image; entries are exactly 0.0 or 1.0
    Mask { mask: Tensor },
}

/// A linear forward map `A` bound to a concrete image shape, plus the
/// observation noise level.
#[derive(Clone, Debug)]
pub struct DegradationOperator {
    kind: OperatorKind,
    linear: Linear,
    input_shape: Vec<usize>,
    noise_std: f64,
}

/// Normalized `size x size` Gaussian kernel.
pub fn gaussian_kernel(std: f64, size: usize) -> Result<Tensor> {
    if size % 2 == 0 {
        return Err(Error::invalid(format!("blur kernel size {size} must be odd")));
    }
    if !(std > 0.0) {
        return Err(Error::invalid(format!("blur std {std} must be positive")));
    }
    let c = (size / 2) as f64;
    let mut data = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            data.push((-(di * di + dj * dj) / (2.0 * std * std)).exp());
        }
    }
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= total);
    Tensor::from_vec(&[size, size], data)
}

impl DegradationOperator {
    /// Instantiates `kind` for images of `shape` (`[h, w]` or `[c, h, w]`).
    /// The identity accepts any shape, including flat vectors.
    pub fn new(kind: &OperatorKind, shape: &[usize], noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0) || !noise_std.is_finite() {
            return Err(Error::invalid(format!("noise std {noise_std} must be >= 0")));
        }
        let probe = Tensor::zeros(shape)?;
        if let OperatorKind::IdentityNoise = kind {
            return Ok(Self {
                kind: kind.clone(),
                linear: Linear::Identity,
                input_shape: shape.to_vec(),
                noise_std,
            });
        }
        let (channels, h, w) = probe.image_dims()?;
        let linear = match kind {
            OperatorKind::IdentityNoise => Linear::Identity,
            OperatorKind::GaussianBlur { std, size } => {
                let kernel = gaussian_kernel(*std, *size)?;
                let flipped = flip_kernel(&kernel)?;
                Linear::Blur { kernel, flipped }
            }
            OperatorKind::Downsample { factor } => {
                if *factor == 0 || h % factor != 0 || w % factor != 0 {
                    return Err(Error::invalid(format!(
                        "downsample factor {factor} must divide image size {h}x{w}"
                    )));
                }
                Linear::Downsample { factor: *factor }
            }
            OperatorKind::RandomMask { drop_ratio, seed } => {
                if !(0.0..=1.0).contains(drop_ratio) {
                    return Err(Error::invalid(format!("drop ratio {drop_ratio} not in [0,1]")));
                }
                // One mask shared by every channel.
                let mut rng = RngStream::new(*seed, 0x6d61_736b);
                let plane: Vec<f64> = (0..h * w)
                    .map(|_| if rng.uniform() < *drop_ratio { 0.0 } else { 1.0 })
                    .collect();
                let data = (0..channels).flat_map(|_| plane.iter().copied()).collect();
                Linear::Mask {
                    mask: Tensor::from_parts(shape.to_vec(), data),
                }
            }
            OperatorKind::BoxMask { area_fraction } => {
                if !(*area_fraction > 0.0 && *area_fraction < 1.0) {
                    return Err(Error::invalid(format!(
                        "box area fraction {area_fraction} not in (0,1)"
                    )));
                }
                let side = area_fraction.sqrt();
                let bh = ((h as f64) * side).round() as usize;
                let bw = ((w as f64) * side).round() as usize;
                let (r0, c0) = ((h - bh) / 2, (w - bw) / 2);
                let mut plane = vec![1.0; h * w];
                for r in r0..r0 + bh {
                    for c in c0..c0 + bw {
                        plane[r * w + c] = 0.0;
                    }
                }
                let data = (0..channels).flat_map(|_| plane.iter().copied()).collect();
                Linear::Mask {
                    mask: Tensor::from_parts(shape.to_vec(), data),
                }
            }
        };
        Ok(Self {
            kind: kind.clone(),
            linear,
            input_shape: shape.to_vec(),
            noise_std,
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match &self.linear {
            Linear::Downsample { factor } => {
                let n = self.input_shape.len();
                let mut s = self.input_shape.clone();
                s[n - 2] /= factor;
                s[n - 1] /= factor;
                s
            }
            _ => self.input_shape.clone(),
        }
    }

    /// The mask, for masking operators.
    pub fn mask(&self) -> Option<&Tensor> {
        match &self.linear {
            Linear::Mask { mask } => Some(mask),
            _ => None,
        }
    }

    fn expect_shape(&self, x: &Tensor, shape: &[usize]) -> Result<()> {
        if x.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// `A x`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.expect_shape(x, &self.input_shape)?;
        match &self.linear {
            Linear::Identity => Ok(x.clone()),
            Linear::Blur { kernel, .. } => conv2d_circular(x, kernel),
            Linear::Downsample { factor } => Ok(block_average(x, *factor)),
            Linear::Mask { mask } => x.zip_map(mask, |a, m| a * m),
        }
    }

    /// `A^T y`.
    pub fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        self.expect_shape(y, &self.output_shape())?;
        match &self.linear {
            Linear::Identity => Ok(y.clone()),
            Linear::Blur { flipped, .. } => conv2d_circular(y, flipped),
            Linear::Downsample { factor } => Ok(block_spread(y, *factor)),
            Linear::Mask { mask } => y.zip_map(mask, |a, m| a * m),
        }
    }

    /// `A^T A x`.
    pub fn normal_apply(&self, x: &Tensor) -> Result<Tensor> {
        self.adjoint(&self.apply(x)?)
    }

    /// Observation `A(clean) + noise_std * N(0, I)`.
    pub fn observe(&self, clean: &Tensor, rng: &mut RngStream) -> Result<Tensor> {
        let mut y = self.apply(clean)?;
        if self.noise_std > 0.0 {
            for v in y.data_mut() {
                *v += self.noise_std * rng.normal();
            }
        }
        Ok(y)
    }

    /// Power-iteration estimate of `||A^T A||_2`, the Lipschitz constant of
    /// the fidelity gradient.
    pub fn normal_operator_norm(&self, iterations: usize, rng: &mut RngStream) -> Result<f64> {
        let mut v = crate::numerics::gaussian_sample(rng, &self.input_shape)?;
        let mut estimate = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = v.norm_l2();
            if norm == 0.0 {
                return Ok(0.0);
            }
            v = v.scale(1.0 / norm);
            let w = self.normal_apply(&v)?;
            estimate = v.dot(&w)?;
            v = w;
        }
        Ok(estimate)
    }
}

fn block_average(x: &Tensor, factor: usize) -> Tensor {
    let (channels, h, w) = x.image_dims().expect("validated image shape");
    let (oh, ow) = (h / factor, w / factor);
    let scale = 1.0 / (factor * factor) as f64;
    let src = x.data();
    let mut out = vec![0.0; channels * oh * ow];
    for c in 0..channels {
        for i in 0..h {
            for j in 0..w {
                out[c * oh * ow + (i / factor) * ow + j / factor] += src[c * h * w + i * w + j];
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    let mut shape = x.shape().to_vec();
    let n = shape.len();
    shape[n - 2] = oh;
    shape[n - 1] = ow;
    Tensor::from_parts(shape, out)
}

fn block_spread(y: &Tensor, factor: usize) -> Tensor {
    let (channels, oh, ow) = y.image_dims().expect("validated image shape");
    let (h, w) = (oh * factor, ow * factor);
    let scale = 1.0 / (factor * factor) as f64;
    let src = y.data();
    let mut out = vec![0.0; channels * h * w];
    for c in 0..channels {
        for i in 0..h {
            for j in 0..w {
                out[c * h * w + i * w + j] = src[c * oh * ow + (i / factor) * ow + j / factor] * scale;
            }
        }
    }
    let mut shape = y.shape().to_vec();
    let n = shape.len();
    shape[n - 2] = h;
    shape[n - 1] = w;
    Tensor::from_parts(shape, out)
}
