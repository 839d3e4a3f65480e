//! Batch statistics for identification results.
//!
//! Dispersion uses the sample standard deviation (n - 1 denominator), skewness
//! is Pearson's second coefficient `3 * (mean - median) / std`, kurtosis is the
//! excess kurtosis `m4 / m2^2 - 3` from population moments, and confidence
//! intervals are the normal 95% form `mean +- 1.96 * std / sqrt(n)`.

/// z-score of the two-sided 95% confidence interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("statistic undefined for zero standard deviation")]
    ZeroStd,
}

pub fn mean(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

pub fn sample_std(samples: &[f64]) -> Result<f64, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let m = mean(samples)?;
    let ss = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    Ok((ss / (n - 1) as f64).sqrt())
}

/// Median; for even n, the midpoint of the two central order statistics.
pub fn median(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) })
}

/// Pearson's second coefficient of skewness: `3 * (mean - median) / std`.
pub fn pearson_skew(samples: &[f64]) -> Result<f64, StatsError> {
    let std = sample_std(samples)?;
    if std == 0.0 {
        return Err(StatsError::ZeroStd);
    }
    Ok(3.0 * (mean(samples)? - median(samples)?) / std)
}

/// Excess kurtosis from population moments: `m4 / m2^2 - 3`.
pub fn excess_kurtosis(samples: &[f64]) -> Result<f64, StatsError> {
    let n = samples.len();
    if n < 4 {
        return Err(StatsError::TooFewSamples { needed: 4, got: n });
    }
    let m = mean(samples)?;
    let m2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if m2 == 0.0 {
        return Err(StatsError::ZeroStd);
    }
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Mean with the half-width of its 95% confidence interval.
pub fn mean_ci(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    let std = sample_std(samples)?;
    let m = mean(samples)?;
    Ok((m, Z_95 * std / (samples.len() as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    #[test]
    fn constant_samples_have_undefined_shape_statistics() {
        let xs = [1.0, 1.0, 1.0];
        assert_eq!(pearson_skew(&xs), Err(StatsError::ZeroStd));
        assert_eq!(excess_kurtosis(&[1.0, 1.0, 1.0, 1.0]), Err(StatsError::ZeroStd));
    }

    #[test]
    fn symmetric_samples_have_zero_skew() {
        assert_eq!(pearson_skew(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn even_sample_median_is_central_midpoint() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
    }

    #[test]
    fn ci_matches_definition() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, hw) = mean_ci(&xs).unwrap();
        assert_eq!(m, 2.5);
        let expected = Z_95 * sample_std(&xs).unwrap() / 2.0;
        assert_eq!(hw, expected);
    }

    #[test]
    fn small_sample_requirements() {
        assert!(matches!(mean(&[]), Err(StatsError::TooFewSamples { .. })));
        assert!(matches!(sample_std(&[1.0]), Err(StatsError::TooFewSamples { .. })));
        assert!(matches!(excess_kurtosis(&[1.0, 2.0, 3.0]), Err(StatsError::TooFewSamples { .. })));
        assert!(mean_ci(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn standard_normal_draw_has_near_zero_skew_and_excess_kurtosis() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2718);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let skew = pearson_skew(&xs).unwrap();
        let kurt = excess_kurtosis(&xs).unwrap();
        assert!(skew.abs() < 0.02, "skew {skew}");
        assert!(kurt.abs() < 0.05, "kurtosis {kurt}");
    }
}
