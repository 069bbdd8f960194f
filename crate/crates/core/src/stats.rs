//! Sample mean and standard error, summed in a fixed order.

/// Mean and standard error of the mean of `samples`. A constant sample
/// (including a single value) has standard error exactly 0.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return (samples[0], 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
