//! Monte Carlo summaries and the distribution tests used by the checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A Monte Carlo estimate: sample count, mean, and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Summarize a sample in a fixed (index) order.
    pub fn from_sample(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "need at least two samples");
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let var = ss / (n as f64 - 1.0);
        Estimate {
            n,
            mean,
            std_error: (var / n as f64).sqrt(),
        }
    }

    /// |mean - target| <= z * se.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.std_error
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        (self.std_error * self.std_error + other.std_error * other.std_error).sqrt()
    }
}

/// Sample variance (unbiased) together with the standard error of the
/// variance itself, from the fourth central moment.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    let var = m2 * n / (n - 1.0);
    // Var(s^2) ~ (m4 - m2^2)/n for large n.
    let se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    (var, se)
}

/// Kolmogorov–Smirnov statistic of a sample against a CDF.
///
/// The sample is sorted internally.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sample.iter().enumerate() {
        let f = cdf(*x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic KS critical value at level alpha for sample size n.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    ((-0.5 * (alpha / 2.0).ln()) / n as f64).sqrt()
}

/// Two-sample chi-square homogeneity statistic over shared bins, with its
/// critical value at the given significance level.
///
/// Bins with combined count below 5 are pooled into their neighbor.
pub fn chi_square_two_sample(counts_a: &[u64], counts_b: &[u64], alpha: f64) -> (f64, f64) {
    assert_eq!(counts_a.len(), counts_b.len());
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0f64, 0.0f64);
    for (&a, &b) in counts_a.iter().zip(counts_b) {
        acc.0 += a as f64;
        acc.1 += b as f64;
        if acc.0 + acc.1 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            pooled.push(acc);
        }
    }
    let total_a: f64 = pooled.iter().map(|p| p.0).sum();
    let total_b: f64 = pooled.iter().map(|p| p.1).sum();
    let k1 = (total_b / total_a).sqrt();
    let k2 = (total_a / total_b).sqrt();
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (a, b) in &pooled {
        let denom = a + b;
        if denom > 0.0 {
            let num = k1 * a - k2 * b;
            chi2 += num * num / denom;
            dof += 1;
        }
    }
    let dof = dof.saturating_sub(1).max(1);
    let crit = ChiSquared::new(dof as f64).unwrap().inverse_cdf(1.0 - alpha);
    (chi2, crit)
}
