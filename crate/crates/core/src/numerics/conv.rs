use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Tensor;
use crate::error::{Error, Result};

/// Kernels at or below this many taps use the direct path.
const DIRECT_MAX_TAPS: usize = 81;

fn kernel_dims(kernel: &Tensor) -> Result<(usize, usize)> {
    match kernel.shape() {
        [kh, kw] if kh % 2 == 1 && kw % 2 == 1 => Ok((*kh, *kw)),
        [kh, kw] => Err(Error::invalid(format!(
            "kernel side lengths must be odd, got {kh}x{kw}"
        ))),
        other => Err(Error::invalid(format!("kernel must be 2-D, got {other:?}"))),
    }
}

/// Circular 2-D convolution of an image (`[h, w]` or `[c, h, w]`, per channel)
/// with a centered odd-sized kernel. Output shape equals input shape.
pub fn conv2d_circular(image: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    if kernel.len() <= DIRECT_MAX_TAPS {
        conv2d_circular_direct(image, kernel)
    } else {
        conv2d_circular_fft(image, kernel)
    }
}

pub fn conv2d_circular_direct(image: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    let (kh, kw) = kernel_dims(kernel)?;
    let (channels, h, w) = image.image_dims()?;
    let (ch, cw) = (kh / 2, kw / 2);
    let k = kernel.data();
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    for c in 0..channels {
        let plane = &src[c * h * w..(c + 1) * h * w];
        let dst = &mut out[c * h * w..(c + 1) * h * w];
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for a in 0..kh {
                    // (i + ch - a) mod h, kept non-negative for kernels wider than the image
                    let row = (i + ch % h + h - a % h) % h;
                    for b in 0..kw {
                        let col = (j + cw % w + w - b % w) % w;
                        acc += k[a * kw + b] * plane[row * w + col];
                    }
                }
                dst[i * w + j] = acc;
            }
        }
    }
    Ok(Tensor::from_parts(image.shape().to_vec(), out))
}

fn fft2(buf: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in buf.chunks_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for j in 0..w {
        for i in 0..h {
            column[i] = buf[i * w + j];
        }
        col_fft.process(&mut column);
        for i in 0..h {
            buf[i * w + j] = column[i];
        }
    }
}

pub fn conv2d_circular_fft(image: &Tensor, kernel: &Tensor) -> Result<Tensor> {
    let (kh, kw) = kernel_dims(kernel)?;
    let (channels, h, w) = image.image_dims()?;
    let (ch, cw) = (kh / 2, kw / 2);

    // Kernel wrapped so its center sits at the origin.
    let mut kspec = vec![Complex::new(0.0, 0.0); h * w];
    for a in 0..kh {
        for b in 0..kw {
            let row = (a + h * kh - ch) % h;
            let col = (b + w * kw - cw) % w;
            kspec[row * w + col].re += kernel.data()[a * kw + b];
        }
    }
    fft2(&mut kspec, h, w, false);

    let scale = 1.0 / (h * w) as f64;
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); h * w];
    for c in 0..channels {
        let plane = &src[c * h * w..(c + 1) * h * w];
        for (z, &v) in buf.iter_mut().zip(plane) {
            *z = Complex::new(v, 0.0);
        }
        fft2(&mut buf, h, w, false);
        for (z, k) in buf.iter_mut().zip(&kspec) {
            *z *= k;
        }
        fft2(&mut buf, h, w, true);
        for (dst, z) in out[c * h * w..(c + 1) * h * w].iter_mut().zip(&buf) {
            *dst = z.re * scale;
        }
    }
    Ok(Tensor::from_parts(image.shape().to_vec(), out))
}

/// Multiplies each 2-D DFT coefficient of an `h x w` plane by a real gain
/// and transforms back. Gains must be symmetric under `(a, b) -> (-a, -b)`
/// for the result to be real; the imaginary residue is dropped.
pub(crate) fn spectral_filter(plane: &[f64], h: usize, w: usize, gains: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = plane.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut buf, h, w, false);
    for (z, &g) in buf.iter_mut().zip(gains) {
        *z *= g;
    }
    fft2(&mut buf, h, w, true);
    let scale = 1.0 / (h * w) as f64;
    buf.iter().map(|z| z.re * scale).collect()
}

/// Kernel rotated by 180 degrees; convolving with it applies the adjoint.
pub fn flip_kernel(kernel: &Tensor) -> Result<Tensor> {
    let (kh, kw) = kernel_dims(kernel)?;
    let k = kernel.data();
    let mut out = vec![0.0; k.len()];
    for a in 0..kh {
        for b in 0..kw {
            out[(kh - 1 - a) * kw + (kw - 1 - b)] = k[a * kw + b];
        }
    }
    Ok(Tensor::from_parts(vec![kh, kw], out))
}
