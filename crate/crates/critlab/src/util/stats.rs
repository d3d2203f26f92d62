//! Sample statistics: means, batched standard errors, cumulants up to
//! fourth order, and ordinary least squares for exponent fits.

use crate::error::{Error, Result};

/// Mean and standard error of iid samples.
///
/// The standard error is `sd / sqrt(n)` with the unbiased variance; a
/// single sample reports stderr 0.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Central moments (m2, m3, m4) of a sample around its mean.
fn central_moments(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

/// First four cumulants and excess kurtosis of a sample.
///
/// Returns `(k1, k2, k3, k4, excess_kurtosis)` with the moment-based
/// estimators k2 = m2, k3 = m3, k4 = m4 − 3·m2², and excess kurtosis
/// m4/m2² − 3 (zero for a Gaussian).
pub fn sample_cumulants(values: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mean, m2, m3, m4) = central_moments(values);
    let k4 = m4 - 3.0 * m2 * m2;
    let kurt = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    (mean, m2, m3, k4, kurt)
}

/// A statistic evaluated on the full sample plus a batched-means
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStat {
    /// Statistic on the full sample.
    pub value: f64,
    /// Standard error estimated from per-batch values.
    pub stderr: f64,
    /// Number of batches actually used.
    pub batches: usize,
}

/// Batched-means error bar for an arbitrary statistic.
///
/// The sample is split into `batches` contiguous blocks, the statistic is
/// computed on each block, and the spread of the block values yields the
/// standard error: sd(block stats) / sqrt(B). This gives honest error
/// bars for nonlinear statistics (cumulants) and for weakly correlated
/// chain output.
pub fn batch_stats<F>(values: &[f64], batches: usize, stat: F) -> Result<BatchStat>
where
    F: Fn(&[f64]) -> f64,
{
    if batches < 2 {
        return Err(Error::invalid("batch_stats needs at least 2 batches"));
    }
    if values.len() < 2 * batches {
        return Err(Error::invalid(format!(
            "batch_stats needs at least {} values for {} batches, got {}",
            2 * batches,
            batches,
            values.len()
        )));
    }
    let b = values.len() / batches;
    let block_vals: Vec<f64> = (0..batches)
        .map(|i| stat(&values[i * b..(i + 1) * b]))
        .collect();
    let (_, se_of_mean) = mean_stderr(&block_vals);
    Ok(BatchStat {
        value: stat(values),
        stderr: se_of_mean,
        batches,
    })
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    /// Fitted slope.
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares fit of `y = slope·x + intercept`.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("ols_fit: mismatched lengths"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::invalid("ols_fit needs at least two points"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateStatistic(
            "ols_fit: all x values identical".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(Fit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_stderr_of_constants_is_exact() {
        let (m, se) = mean_stderr(&[2.0; 50]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn rademacher_cumulants() {
        // ±1 with equal counts: variance 1, third cumulant 0, excess
        // kurtosis exactly −2.
        let vals: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (k1, k2, k3, k4, kurt) = sample_cumulants(&vals);
        assert_relative_eq!(k1, 0.0, epsilon = 1e-12);
        assert_relative_eq!(k2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k3, 0.0, epsilon = 1e-12);
        assert_relative_eq!(k4, -2.0, epsilon = 1e-12);
        assert_relative_eq!(kurt, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.5).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, -1.5, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn batch_stats_on_iid_matches_plain_stderr_scale() {
        // For the mean statistic, batched stderr should approximate the
        // plain iid stderr.
        use rand::Rng as _;
        let mut rng = crate::rng::root_rng(424242);
        let vals: Vec<f64> = (0..4096).map(|_| rng.gen::<f64>()).collect();
        let bs = batch_stats(&vals, 32, |b| b.iter().sum::<f64>() / b.len() as f64).unwrap();
        let (_, se) = mean_stderr(&vals);
        assert!(
            (bs.stderr / se) > 0.5 && (bs.stderr / se) < 2.0,
            "batched stderr {} vs iid stderr {}",
            bs.stderr,
            se
        );
    }

    #[test]
    fn batch_stats_rejects_tiny_samples() {
        assert!(batch_stats(&[1.0, 2.0], 8, |b| b[0]).is_err());
    }
}
