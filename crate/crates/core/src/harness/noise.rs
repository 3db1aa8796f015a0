use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Unbiased sample covariance of `k`-dimensional residual samples.
pub fn identify_covariance(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = samples.first().map_or(0, Vec::len);
    if k == 0 || samples.len() < k + 1 {
        return Err(Error::InsufficientSamples { needed: k.max(1) + 1, got: samples.len() });
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != k) {
        return Err(Error::LengthMismatch(bad.len(), k));
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; k];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::zeros(k, k);
    for s in samples {
        for i in 0..k {
            let di = s[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    cov /= n - 1.0;
    for i in 0..k {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub histogram: Histogram,
    /// Maximum-likelihood Gaussian fit.
    pub mean: f64,
    pub std: f64,
    /// All samples equal; the fit has zero variance and the QQ/KS data are empty.
    pub degenerate: bool,
    /// `(theoretical, sample)` quantile pairs, theoretical from the fitted Gaussian.
    pub qq: Vec<(f64, f64)>,
    /// Kolmogorov-Smirnov distance between the samples and the fitted Gaussian.
    pub ks_statistic: f64,
    /// 99% critical value, `1.628 / sqrt(n)`.
    pub ks_critical: f64,
    pub ks_pass: bool,
}

pub const MIN_NORMALITY_SAMPLES: usize = 30;

/// Histogram, Gaussian fit, QQ pairs and KS check for each residual axis.
pub fn normality_report(samples: &[Vec<f64>], bins: usize) -> Result<Vec<AxisReport>> {
    if samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_NORMALITY_SAMPLES, got: samples.len() });
    }
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    let k = samples[0].len();
    if let Some(bad) = samples.iter().find(|s| s.len() != k) {
        return Err(Error::LengthMismatch(bad.len(), k));
    }
    Ok((0..k).map(|axis| axis_report(samples.iter().map(|s| s[axis]).collect(), bins)).collect())
}

fn axis_report(mut x: Vec<f64>, bins: usize) -> AxisReport {
    let n = x.len();
    let nf = n as f64;
    x.sort_by(f64::total_cmp);
    let mean = x.iter().sum::<f64>() / nf;
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let (lo, hi) = (x[0], x[n - 1]);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for v in &x {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let ks_critical = 1.628 / nf.sqrt();
    let histogram = Histogram { edges, counts };
    if !(std > 0.0) {
        return AxisReport {
            histogram,
            mean,
            std: 0.0,
            degenerate: true,
            qq: Vec::new(),
            ks_statistic: f64::NAN,
            ks_critical,
            ks_pass: false,
        };
    }
    let fit = Normal::new(mean, std).expect("positive std");
    let qq = x.iter().enumerate().map(|(i, &v)| (fit.inverse_cdf((i as f64 + 0.5) / nf), v)).collect();
    let ks_statistic = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = fit.cdf(v);
            (f - i as f64 / nf).abs().max(((i + 1) as f64 / nf - f).abs())
        })
        .fold(0.0, f64::max);
    AxisReport {
        histogram,
        mean,
        std,
        degenerate: false,
        qq,
        ks_statistic,
        ks_critical,
        ks_pass: ks_statistic <= ks_critical,
    }
}
