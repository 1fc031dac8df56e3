//! String maps of a price window: the 1-end-point and 2-end-point open
//! strings with power-law Q deformation, partial compactification and
//! min/max standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::PriceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StringWindowConfig {
    /// String length in ticks.
    pub ls: usize,
    /// Deformation exponent.
    pub q: f64,
    /// Number of folded segments for compactification.
    pub nm: usize,
}

impl StringWindowConfig {
    pub fn new(ls: usize, q: f64, nm: usize) -> Result<Self> {
        let cfg = Self { ls, q, nm };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ls < 1 {
            return Err(Error::Parameter("ls must be >= 1".into()));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Parameter(format!("Q must be positive, got {}", self.q)));
        }
        if self.nm < 1 {
            return Err(Error::Parameter("Nm must be >= 1".into()));
        }
        Ok(())
    }
}

/// Map values over the internal coordinate `h = 0..=ls`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringMapValues {
    pub values: Vec<f64>,
    pub base_index: usize,
}

impl StringMapValues {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
        w.write_record(["h", "value"]).map_err(err)?;
        for (h, v) in self.values.iter().enumerate() {
            w.write_record(&[h.to_string(), v.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

/// `[num/den]^q` for strictly positive prices.
#[inline]
pub(crate) fn ratio_pow(num: f64, den: f64, q: f64) -> f64 {
    (num / den).powf(q)
}

/// Returns the window `p(τ..=τ+ls)` after checking bounds and positivity.
pub(crate) fn positive_window(s: &PriceSeries, tau: usize, ls: usize) -> Result<&[f64]> {
    let end = tau + ls;
    if end >= s.len() {
        return Err(Error::Bounds { needed: end + 1, available: s.len() });
    }
    let w = &s.values[tau..=end];
    if let Some((i, &v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        let index = s.origin_index + tau + i;
        return Err(if v == 0.0 { Error::ZeroPrice { index } } else { Error::NonPositivePrice { index, value: v } });
    }
    Ok(w)
}

/// 1-end-point map `1 - [p(τ)/p(τ+h)]^Q`.
pub fn string1(s: &PriceSeries, tau: usize, cfg: &StringWindowConfig) -> Result<StringMapValues> {
    cfg.validate()?;
    let w = positive_window(s, tau, cfg.ls)?;
    let p0 = w[0];
    let values = w.iter().map(|&ph| 1.0 - ratio_pow(p0, ph, cfg.q)).collect();
    Ok(StringMapValues { values, base_index: s.origin_index + tau })
}

/// 2-end-point map with Dirichlet ends:
/// `(1 - [p(τ)/p(τ+h)]^Q)(1 - [p(τ+h)/p(τ+ls)]^Q)`.
pub fn string2(s: &PriceSeries, tau: usize, cfg: &StringWindowConfig) -> Result<StringMapValues> {
    cfg.validate()?;
    let w = positive_window(s, tau, cfg.ls)?;
    let (p0, pl) = (w[0], w[cfg.ls]);
    let values = w
        .iter()
        .enumerate()
        .map(|(h, &ph)| {
            if h == 0 || h == cfg.ls {
                0.0
            } else {
                (1.0 - ratio_pow(p0, ph, cfg.q)) * (1.0 - ratio_pow(ph, pl, cfg.q))
            }
        })
        .collect();
    Ok(StringMapValues { values, base_index: s.origin_index + tau })
}

/// Partial compactification: averages `Nm` consecutive segments of length
/// `ls` starting at `τ`. The output covers one period, `h = 0..ls`.
pub fn compactify(s: &PriceSeries, cfg: &StringWindowConfig, tau: usize) -> Result<PriceSeries> {
    cfg.validate()?;
    let needed = tau + cfg.ls * cfg.nm;
    if needed > s.len() {
        return Err(Error::Bounds { needed, available: s.len() });
    }
    let inv = 1.0 / cfg.nm as f64;
    let values = (0..cfg.ls)
        .map(|h| (0..cfg.nm).map(|m| s.values[tau + h + cfg.ls * m]).sum::<f64>() * inv)
        .collect();
    Ok(PriceSeries::with_origin(values, s.origin_index + tau))
}

/// Maps a window onto `[0, 1]` by its own minimum and maximum.
pub fn standardize(window: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if window.is_empty() || !(hi > lo) {
        return Err(Error::DegenerateWindow { value: lo });
    }
    let range = hi - lo;
    Ok(window.iter().map(|&v| (v - lo) / range).collect())
}
