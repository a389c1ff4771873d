//! Dense tensors, reproducible random streams and circular convolution.

mod conv;
mod rng;
mod tensor;

pub(crate) use conv::spectral_filter;
pub use conv::{conv2d_circular, conv2d_circular_direct, conv2d_circular_fft, flip_kernel};
pub use rng::{derive_stream, gaussian_sample, RngStream};
pub use tensor::Tensor;

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Sample mean and (n-1)-normalized standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let (mean, se) = mean_and_stderr(values);
    (mean, se * (values.len() as f64).sqrt())
}
