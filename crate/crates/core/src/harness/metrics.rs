use crate::degrade::gaussian_kernel;
use crate::error::Result;
use crate::numerics::Tensor;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Peak signal-to-noise ratio for unit peak, `10 log10(1 / MSE)`.
/// Identical inputs give `f64::INFINITY`.
pub fn psnr(reference: &Tensor, candidate: &Tensor) -> Result<f64> {
    reference.check_same_shape(candidate)?;
    let mse = reference
        .data()
        .iter()
        .zip(candidate.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

/// Formats a PSNR for CSV output; infinity is written as `inf`.
pub fn format_psnr(value: f64) -> String {
    if value == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{value:.6}")
    }
}

/// Mean structural similarity with an 11x11 Gaussian window (std 1.5),
/// `C1 = (0.01)^2`, `C2 = (0.03)^2` for unit dynamic range.
///
/// Multichannel images (`[c, h, w]`) are scored per channel and averaged.
/// Only windows fully inside the image are used; images smaller than the
/// window fall back to a single window spanning the whole plane.
pub fn ssim(reference: &Tensor, candidate: &Tensor) -> Result<f64> {
    reference.check_same_shape(candidate)?;
    let (channels, h, w) = reference.image_dims()?;
    let kernel = gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW)?;
    let mut total = 0.0;
    for c in 0..channels {
        let a = &reference.data()[c * h * w..(c + 1) * h * w];
        let b = &candidate.data()[c * h * w..(c + 1) * h * w];
        total += if h >= SSIM_WINDOW && w >= SSIM_WINDOW {
            ssim_plane(a, b, h, w, kernel.data())
        } else {
            let uniform = vec![1.0 / (h * w) as f64; h * w];
            ssim_window(a, b, w, 0, 0, h, w, &uniform)
        };
    }
    Ok(total / channels as f64)
}

fn ssim_plane(a: &[f64], b: &[f64], h: usize, w: usize, kernel: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..=h - SSIM_WINDOW {
        for j in 0..=w - SSIM_WINDOW {
            sum += ssim_window(a, b, w, i, j, SSIM_WINDOW, SSIM_WINDOW, kernel);
            count += 1;
        }
    }
    sum / count as f64
}

#[allow(clippy::too_many_arguments)]
fn ssim_window(a: &[f64], b: &[f64], stride: usize, i0: usize, j0: usize, wh: usize, ww: usize, weights: &[f64]) -> f64 {
    let (mut ma, mut mb) = (0.0, 0.0);
    for di in 0..wh {
        for dj in 0..ww {
            let k = weights[di * ww + dj];
            let idx = (i0 + di) * stride + j0 + dj;
            ma += k * a[idx];
            mb += k * b[idx];
        }
    }
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for di in 0..wh {
        for dj in 0..ww {
            let k = weights[di * ww + dj];
            let idx = (i0 + di) * stride + j0 + dj;
            let (da, db) = (a[idx] - ma, b[idx] - mb);
            va += k * da * da;
            vb += k * db * db;
            cov += k * da * db;
        }
    }
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_sample, RngStream};

    fn pattern(n: usize) -> Tensor {
        let data = (0..n * n)
            .map(|k| {
                let (i, j) = ((k / n) as f64, (k % n) as f64);
                0.5 + 0.4 * (0.4 * i).sin() * (0.3 * j).cos()
            })
            .collect();
        Tensor::from_vec(&[n, n], data).unwrap()
    }

    #[test]
    fn identical_images() {
        let a = pattern(32);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(format_psnr(f64::INFINITY), "inf");
    }

    #[test]
    fn constant_offset_is_twenty_db() {
        let a = pattern(16);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_symmetric() {
        let mut rng = RngStream::new(3, 0);
        let a = pattern(24);
        let b = a.add(&gaussian_sample(&mut rng, &[24, 24]).unwrap().scale(0.05)).unwrap();
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn negative_image_scores_low() {
        let a = pattern(32);
        let neg = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &neg).unwrap() < 0.2);
    }

    #[test]
    fn shifted_image_scores_between_half_and_one() {
        let a = pattern(32);
        let b = a.map(|v| v + 0.05);
        let s = ssim(&a, &b).unwrap();
        assert!(s > 0.5 && s < 1.0, "ssim {s}");
        // Structure is untouched: the luminance factor alone explains the drop.
        let m = a.mean();
        let lum = (2.0 * m * (m + 0.05) + SSIM_C1) / (m * m + (m + 0.05).powi(2) + SSIM_C1);
        assert!(s <= 1.0 && (s - lum).abs() < 0.05);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = pattern(8);
        let b = pattern(9);
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn tiny_images_use_single_window() {
        let a = pattern(5);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multichannel_averages_channels() {
        let a = pattern(16);
        let b = a.map(|v| 1.0 - v);
        let stacked_a = Tensor::from_vec(&[2, 16, 16], [a.data(), a.data()].concat()).unwrap();
        let stacked_b = Tensor::from_vec(&[2, 16, 16], [a.data(), b.data()].concat()).unwrap();
        let expected = 0.5 * (1.0 + ssim(&a, &b).unwrap());
        assert!((ssim(&stacked_a, &stacked_b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn noisy_calibration() {
        let mut rng = RngStream::new(8, 0);
        let clean = pattern(64);
        let noisy = clean.add(&gaussian_sample(&mut rng, &[64, 64]).unwrap().scale(0.1)).unwrap();
        let p = psnr(&clean, &noisy).unwrap();
        assert!((p - 20.0).abs() < 0.3, "psnr {p}");
    }
}
