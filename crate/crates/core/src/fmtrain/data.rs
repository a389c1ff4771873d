use std::fs;
use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{GaussianOracleField, StationaryGaussianField, VectorField};
use crate::harness::{read_image, synthetic_image, Generator};
use crate::numerics::{RngStream, Tensor};

fn one_channel() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn default_amplitude() -> f64 {
    0.2
}
fn default_correlation() -> f64 {
    1.5
}
fn default_floor() -> f64 {
    0.01
}

/// Where training samples `x_1` come from. The prior is always `N(0, I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Isotropic Gaussian `N(mean, std^2 I)`.
    GaussianToy { mean: Vec<f64>, std: f64 },
    /// Procedural images in `[0, 1]`, flattened.
    SyntheticImages {
        generator: Generator,
        size: usize,
        #[serde(default = "one_channel")]
        channels: usize,
    },
    /// Every `.pgm` / `.ppm` file of a directory; all must share one shape.
    FileCorpus { path: PathBuf },
    /// Stationary Gaussian images with a known exact field; see
    /// [`StationaryGaussianField::smooth`].
    GaussianField {
        size: usize,
        #[serde(default = "half")]
        mean: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_correlation")]
        correlation: f64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
}

impl DataSource {
    pub fn open(&self) -> Result<Dataset> {
        match self {
            DataSource::GaussianToy { mean, std } => {
                if mean.is_empty() || !(*std > 0.0) || mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::Config(
                        "gaussian-toy needs a non-empty finite mean and a positive std".into(),
                    ));
                }
                Ok(Dataset::Gaussian {
                    mean: mean.clone(),
                    std: *std,
                })
            }
            DataSource::SyntheticImages {
                generator,
                size,
                channels,
            } => {
                // validates size and channel count up front
                synthetic_image(*generator, *size, *channels, &mut RngStream::new(0, 0))
                    .map_err(|e| Error::Config(e.to_string()))?;
                let shape = if *channels == 1 {
                    vec![*size, *size]
                } else {
                    vec![*channels, *size, *size]
                };
                Ok(Dataset::Synthetic {
                    generator: *generator,
                    size: *size,
                    channels: *channels,
                    shape,
                })
            }
            DataSource::FileCorpus { path } => {
                let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
                let mut files: Vec<PathBuf> = entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| {
                        matches!(
                            p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                            Some("pgm" | "ppm")
                        )
                    })
                    .collect();
                files.sort();
                if files.is_empty() {
                    return Err(Error::Config(format!("no .pgm or .ppm files in {}", path.display())));
                }
                let images = files.iter().map(|f| read_image(f)).collect::<Result<Vec<_>>>()?;
                let shape = images[0].shape().to_vec();
                if let Some((i, _)) = images.iter().enumerate().find(|(_, im)| im.shape() != shape.as_slice()) {
                    return Err(Error::format(&files[i], format!("shape differs from {shape:?}")));
                }
                Ok(Dataset::Corpus { images, shape })
            }
            DataSource::GaussianField {
                size,
                mean,
                amplitude,
                correlation,
                floor,
            } => StationaryGaussianField::smooth(*size, *mean, *amplitude, *correlation, *floor)
                .map(Dataset::Field)
                .map_err(|e| Error::Config(e.to_string())),
        }
    }
}

/// An opened [`DataSource`], ready to sample from.
#[derive(Clone, Debug)]
pub enum Dataset {
    Gaussian {
        mean: Vec<f64>,
        std: f64,
    },
    Synthetic {
        generator: Generator,
        size: usize,
        channels: usize,
        shape: Vec<usize>,
    },
    Corpus {
        images: Vec<Tensor>,
        shape: Vec<usize>,
    },
    Field(StationaryGaussianField),
}

impl Dataset {
    /// Shape of one sample as a tensor.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self {
            Dataset::Gaussian { mean, .. } => vec![mean.len()],
            Dataset::Synthetic { shape, .. } | Dataset::Corpus { shape, .. } => shape.clone(),
            Dataset::Field(f) => vec![f.side(), f.side()],
        }
    }

    /// The exact field of the source, when it has one.
    pub fn exact_field(&self) -> Option<Box<dyn VectorField>> {
        match self {
            Dataset::Gaussian { mean, std } => {
                let mean = Tensor::from_vec(&[mean.len()], mean.clone()).ok()?;
                Some(Box::new(GaussianOracleField::new(mean, *std).ok()?))
            }
            Dataset::Field(f) => Some(Box::new(f.clone())),
            _ => None,
        }
    }

    /// One sample shaped as [`sample_shape`](Self::sample_shape).
    pub fn sample_one(&self, rng: &mut RngStream) -> Result<Tensor> {
        let row = self.sample(rng, 1)?;
        Tensor::from_vec(&self.sample_shape(), row.into_raw_vec())
    }

    /// Flattened dimension of one sample.
    pub fn dim(&self) -> usize {
        self.sample_shape().iter().product()
    }

    /// `n` samples, one flattened sample per row.
    pub fn sample(&self, rng: &mut RngStream, n: usize) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::invalid("cannot sample an empty batch"));
        }
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            match self {
                Dataset::Gaussian { mean, std } => {
                    for (v, m) in row.iter_mut().zip(mean) {
                        *v = m + std * rng.normal();
                    }
                }
                Dataset::Synthetic {
                    generator,
                    size,
                    channels,
                    ..
                } => {
                    let img = synthetic_image(*generator, *size, *channels, rng)?;
                    row.iter_mut().zip(img.data()).for_each(|(v, x)| *v = *x);
                }
                Dataset::Corpus { images, .. } => {
                    let pick = ((rng.uniform() * images.len() as f64) as usize).min(images.len() - 1);
                    row.iter_mut().zip(images[pick].data()).for_each(|(v, x)| *v = *x);
                }
                Dataset::Field(f) => {
                    let img = f.sample(rng)?;
                    row.iter_mut().zip(img.data()).for_each(|(v, x)| *v = *x);
                }
            }
        }
        Ok(out)
    }
}
