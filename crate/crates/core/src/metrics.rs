//! Forecast error measures, the persistence baseline, and the trading
//! statistics used to gate and rank strategies.
//!
//! Conventions: standard deviations and central moments use the population
//! normalization (divide by `n`); logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::PriceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mae: f64,
    pub smape: f64,
    pub n: usize,
}

impl ErrorReport {
    pub fn compute(actual: &[f64], forecast: &[f64]) -> Result<Self> {
        Ok(Self { mae: mae(actual, forecast)?, smape: smape(actual, forecast)?, n: actual.len() })
    }
}

fn check_pair(actual: &[f64], forecast: &[f64]) -> Result<()> {
    if actual.len() != forecast.len() {
        return Err(Error::Parameter(format!(
            "length mismatch: {} actual vs {} forecast values",
            actual.len(),
            forecast.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    Ok(())
}

pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_pair(actual, forecast)?;
    Ok(actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum::<f64>() / actual.len() as f64)
}

/// Symmetric MAPE in percent, range `[0, 200]`.
pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_pair(actual, forecast)?;
    let mut total = 0.0;
    for (i, (a, f)) in actual.iter().zip(forecast).enumerate() {
        let denom = 0.5 * (a.abs() + f.abs());
        if denom == 0.0 {
            return Err(Error::Metric(format!("SMAPE denominator is zero at index {i}")));
        }
        total += (a - f).abs() / denom;
    }
    Ok(100.0 * total / actual.len() as f64)
}

/// Persistence forecast `F_t = A_{t - l_pr}` for every `t >= l_pr`.
/// Returns `(actuals, forecasts)` aligned pairwise.
pub fn naive_forecast(s: &PriceSeries, l_pr: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if l_pr == 0 {
        return Err(Error::Parameter("horizon must be positive".into()));
    }
    if s.len() <= l_pr {
        return Err(Error::Bounds { needed: l_pr + 1, available: s.len() });
    }
    let v = &s.values;
    Ok((v[l_pr..].to_vec(), v[..v.len() - l_pr].to_vec()))
}

/// Persistence forecasts for the given target positions of `s`.
pub fn naive_forecast_at(s: &PriceSeries, targets: &[usize], l_pr: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut actual = Vec::with_capacity(targets.len());
    let mut forecast = Vec::with_capacity(targets.len());
    for &t in targets {
        if t >= s.len() || t < l_pr {
            return Err(Error::Bounds { needed: t + 1, available: s.len() });
        }
        actual.push(s.values[t]);
        forecast.push(s.values[t - l_pr]);
    }
    Ok((actual, forecast))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// `E[R - Rf] / σ(R - Rf)` with population σ.
pub fn sharpe(trade_returns: &[f64], benchmark_return: f64) -> Result<f64> {
    if trade_returns.len() < 2 {
        return Err(Error::Metric(format!("Sharpe needs at least 2 returns, got {}", trade_returns.len())));
    }
    let excess: Vec<f64> = trade_returns.iter().map(|r| r - benchmark_return).collect();
    let sd = std_dev(&excess);
    if !(sd > 0.0) {
        return Err(Error::Metric("Sharpe undefined: zero variance of excess returns".into()));
    }
    Ok(mean(&excess) / sd)
}

/// Sample skewness `m3 / m2^{3/2}` with population central moments.
pub fn skewness(samples: &[f64]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::Metric(format!("skewness needs at least 3 samples, got {}", samples.len())));
    }
    let m = mean(samples);
    let n = samples.len() as f64;
    let m2 = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = samples.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if !(m2 > 0.0) {
        return Err(Error::Metric("skewness undefined: zero variance".into()));
    }
    Ok(m3 / m2.powf(1.5))
}

/// Fixed-edge histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// `bins` equal-width bins covering `[lo, hi]`.
    pub fn uniform(bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::Parameter(format!("bad histogram layout: {bins} bins over [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        edges[bins] = hi;
        Ok(Self { edges, counts: vec![0; bins], total: 0 })
    }

    pub fn from_counts(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if edges.len() != counts.len() + 1 || counts.is_empty() {
            return Err(Error::Parameter("need exactly one more edge than bins".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("edges must be strictly increasing".into()));
        }
        let total = counts.iter().sum();
        Ok(Self { edges, counts, total })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin holding `x`; the last bin is closed on the right. `None` outside the range.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if !(x >= lo && x <= hi) {
            return None;
        }
        // edges are sorted: first edge strictly greater than x, minus one
        let idx = self.edges.partition_point(|&e| e <= x);
        Some(idx.saturating_sub(1).min(self.bins() - 1))
    }

    pub fn add(&mut self, x: f64) -> Option<usize> {
        let b = self.bin_of(x)?;
        self.counts[b] += 1;
        self.total += 1;
        Some(b)
    }

    /// Frequencies after adding `pseudo_count` to every bin.
    pub fn smoothed(&self, pseudo_count: f64) -> Vec<f64> {
        let denom = self.total as f64 + pseudo_count * self.bins() as f64;
        self.counts.iter().map(|&c| (c as f64 + pseudo_count) / denom).collect()
    }

    pub fn same_layout(&self, other: &Histogram) -> bool {
        self.edges == other.edges
    }
}

/// Pseudo-count added to each bin before normalizing for divergence estimates.
pub const KL_PSEUDO_COUNT: f64 = 1.0;

/// `Σ p ln(p/q)` over already normalized, strictly positive distributions.
pub fn kl_divergence_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Parameter("distributions differ in length".into()));
    }
    Ok(p.iter().zip(q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| pi * (pi / qi).ln()).sum())
}

/// Divergence of the smoothed, normalized histograms `p` from `q`.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64> {
    if !p.same_layout(q) {
        return Err(Error::Parameter("histograms have different bin edges".into()));
    }
    kl_divergence_probs(&p.smoothed(KL_PSEUDO_COUNT), &q.smoothed(KL_PSEUDO_COUNT))
}
