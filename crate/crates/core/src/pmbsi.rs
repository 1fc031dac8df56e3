//! Forecasting from string invariants.
//!
//! Two predictors live here. The simple one treats an exponentially weighted
//! correlation of consecutive one-tick returns as conserved from one tick to
//! the next and solves for the unknown price. The generalized one mixes the
//! 1-end-point and 2-end-point string maps with homotopy weights `η1`, `η2`,
//! assumes the mixed invariant `C(τ, Λ)` is conserved under a shift of
//! `l_pr` ticks, and solves for the far end point `p(τ + ls)` in closed form
//! through the auxiliary sums `A1..A5`.
//!
//! Degenerate algebra (zero denominator, non-positive root base) does not
//! raise: the forecast comes back with `valid == false` and the caller falls
//! back to its last valid forecast (see [`run_forecasts`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::PriceSeries;
use crate::stringmap::{positive_window, ratio_pow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleInvariantParams {
    /// Upper summation bound (window length).
    pub l: usize,
    /// Lower summation bound.
    pub l0: usize,
    /// Exponential decay scale of the weights.
    pub lambda: f64,
}

impl SimpleInvariantParams {
    pub fn validate(&self) -> Result<()> {
        if self.l0 > self.l {
            return Err(Error::Parameter(format!("l0 ({}) must not exceed l ({})", self.l0, self.l)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Normalized exponential weights `w_h ∝ exp(-h/λ)`, `h = 0..=l`.
pub fn weights_exp(p: &SimpleInvariantParams) -> Vec<f64> {
    let raw: Vec<f64> = (0..=p.l).map(|h| (-(h as f64) / p.lambda).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn corr_sum(v: &[f64], t: usize, l0: usize, weights: &[f64]) -> f64 {
    (l0..weights.len())
        .map(|h| weights[h] * (1.0 - v[t - h] / v[t - 1 - h]) * (1.0 - v[t - 1 - h] / v[t - 2 - h]))
        .sum()
}

fn check_nonzero(s: &PriceSeries, lo: usize, hi: usize) -> Result<()> {
    match s.values[lo..=hi].iter().position(|&v| v == 0.0) {
        Some(i) => Err(Error::ZeroPrice { index: s.origin_index + lo + i }),
        None => Ok(()),
    }
}

/// Correlation invariant `C_(t,l0) = Σ_{h=l0}^{l} w_h (1 - p_{t-h}/p_{t-1-h})(1 - p_{t-1-h}/p_{t-2-h})`.
pub fn corr_invariant_simple(s: &PriceSeries, t: usize, p: &SimpleInvariantParams) -> Result<f64> {
    p.validate()?;
    if t >= s.len() || t < p.l + 2 {
        return Err(Error::Bounds { needed: p.l + 3, available: t.min(s.len()) + 1 });
    }
    check_nonzero(s, t - 2 - p.l, t)?;
    Ok(corr_sum(&s.values, t, p.l0, &weights_exp(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub value: f64,
    pub valid: bool,
    pub epsilon_observed: f64,
}

impl Forecast {
    fn invalid(epsilon_observed: f64) -> Self {
        Self { value: f64::NAN, valid: false, epsilon_observed }
    }
}

/// One-step forecast of `p_{t+1}` from the simple correlation invariant.
///
/// The summation bound `l0` of `p` is not used: the update always balances
/// `C_(t,0)` against `C_(t+1,1)`.
pub fn predict_one_step_simple(s: &PriceSeries, t: usize, p: &SimpleInvariantParams) -> Result<Forecast> {
    p.validate()?;
    if t >= s.len() || t < p.l + 2 {
        return Err(Error::Bounds { needed: p.l + 3, available: t.min(s.len()) + 1 });
    }
    check_nonzero(s, t - 2 - p.l, t)?;
    let v = &s.values;
    if v[t] == v[t - 1] {
        return Err(Error::FlatPrice { index: s.origin_index + t });
    }
    let w = weights_exp(p);
    let c_now = corr_sum(v, t, 0, &w);
    // terms h >= 1 of C_(t+1,·) only touch prices up to p_t
    let c_next_tail: f64 = (1..w.len())
        .map(|h| w[h] * (1.0 - v[t + 1 - h] / v[t - h]) * (1.0 - v[t - h] / v[t - 1 - h]))
        .sum();
    let value = v[t] * (1.0 + (c_next_tail - c_now) / (w[0] * (1.0 - v[t] / v[t - 1])));
    let epsilon_observed = if t >= p.l + 3 { (c_now - corr_sum(v, t - 1, 0, &w)).abs() } else { f64::NAN };
    if value.is_finite() {
        Ok(Forecast { value, valid: true, epsilon_observed })
    } else {
        Ok(Forecast::invalid(epsilon_observed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmbsiParams {
    /// String length.
    pub ls: usize,
    /// Prediction horizon in ticks.
    pub l_pr: usize,
    pub q: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Level of the bimodal weight profile.
    pub w0: f64,
    /// Invariance tolerance used to filter forecast sites.
    pub epsilon: f64,
}

impl Default for PmbsiParams {
    /// The best setting reported for one-tick-ahead tick data.
    fn default() -> Self {
        Self { ls: 900, l_pr: 1, q: 6.0, eta1: 0.0, eta2: 0.0, w0: 0.5, epsilon: 1e-10 }
    }
}

impl PmbsiParams {
    /// Upper summation bound `Λ = ls - l_pr`.
    pub fn lambda(&self) -> usize {
        self.ls - self.l_pr
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.l_pr < 1 || self.l_pr >= self.ls {
            return fail(format!("need 1 <= l_pr < ls, got l_pr={} ls={}", self.l_pr, self.ls));
        }
        if self.q == 0.0 || !self.q.is_finite() {
            return fail(format!("Q must be a nonzero finite number, got {}", self.q));
        }
        for (name, eta) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !(-1.0..=1.0).contains(&eta) {
                return fail(format!("{name} must lie in [-1, 1], got {eta}"));
            }
        }
        if !(0.0..=1.0).contains(&self.w0) {
            return fail(format!("W0 must lie in [0, 1], got {}", self.w0));
        }
        if !(self.epsilon >= 0.0) {
            return fail(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Two-level weight profile: `1 - W0` on the first half (`2h <= ls`), `W0` after.
pub fn bimodal_weights(ls: usize, w0: f64) -> Vec<f64> {
    (0..=ls).map(|h| if 2 * h <= ls { 1.0 - w0 } else { w0 }).collect()
}

fn check_upper(p: &PmbsiParams, upper: usize) -> Result<()> {
    if upper > p.ls {
        return Err(Error::Parameter(format!("summation bound {upper} exceeds ls {}", p.ls)));
    }
    Ok(())
}

/// Mixed string invariant `C(τ, Λ)`.
pub fn string_invariant(s: &PriceSeries, tau: usize, upper: usize, p: &PmbsiParams) -> Result<f64> {
    p.validate()?;
    check_upper(p, upper)?;
    let w = positive_window(s, tau, p.ls)?;
    Ok(invariant_on(w, upper, p, &bimodal_weights(p.ls, p.w0)))
}

fn invariant_on(w: &[f64], upper: usize, p: &PmbsiParams, weights: &[f64]) -> f64 {
    let (p0, pl) = (w[0], w[p.ls]);
    let c_both = (1.0 - p.eta1) * (1.0 - p.eta2);
    let c_first = p.eta1 * (1.0 - p.eta2);
    let mut total = 0.0;
    for h in 0..=upper {
        let first = 1.0 - ratio_pow(p0, w[h], p.q);
        let second = 1.0 - ratio_pow(w[h], pl, p.q);
        total += weights[h] * (c_both * first * second + c_first * first + p.eta2 * second);
    }
    total
}

/// Auxiliary sums that isolate the dependence of `C(τ, Λ)` on `p(τ + ls)`:
/// `C = A1 + A3 + A4 + (A2 + A5) / p(τ+ls)^Q`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuxTerms {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
}

impl AuxTerms {
    /// Solves `target = A1 + A3 + A4 + (A2 + A5) x^{-Q}` for `x`.
    /// `None` when the denominator vanishes or the root base is not positive.
    pub fn solve_end_point(&self, target: f64, q: f64) -> Option<f64> {
        let denom = target - self.a1 - self.a3 - self.a4;
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let base = (self.a2 + self.a5) / denom;
        if !(base > 0.0) || !base.is_finite() {
            return None;
        }
        let x = base.powf(1.0 / q);
        x.is_finite().then_some(x)
    }

    /// Invariant value implied by an end point `x = p(τ + ls)`.
    pub fn invariant_for(&self, x: f64, q: f64) -> f64 {
        self.a1 + self.a3 + self.a4 + (self.a2 + self.a5) / x.powf(q)
    }
}

/// Computes `A1..A5` over `h = 0..=Λ`. Only prices `p(τ..=τ+Λ)` are read.
pub fn aux_terms(s: &PriceSeries, tau: usize, upper: usize, p: &PmbsiParams) -> Result<AuxTerms> {
    p.validate()?;
    check_upper(p, upper)?;
    let w = positive_window(s, tau, upper)?;
    Ok(aux_on(w, upper, p, &bimodal_weights(p.ls, p.w0)))
}

fn aux_on(w: &[f64], upper: usize, p: &PmbsiParams, weights: &[f64]) -> AuxTerms {
    let p0 = w[0];
    let c_both = (1.0 - p.eta1) * (1.0 - p.eta2);
    let c_first = p.eta1 * (1.0 - p.eta2);
    let mut first_sum = 0.0;
    let mut first_pq_sum = 0.0;
    let mut weight_sum = 0.0;
    let mut pq_sum = 0.0;
    for h in 0..=upper {
        let first = 1.0 - ratio_pow(p0, w[h], p.q);
        let pq = w[h].powf(p.q);
        first_sum += weights[h] * first;
        first_pq_sum += weights[h] * first * pq;
        weight_sum += weights[h];
        pq_sum += weights[h] * pq;
    }
    AuxTerms {
        a1: c_both * first_sum,
        a2: -c_both * first_pq_sum,
        a3: c_first * first_sum,
        a4: p.eta2 * weight_sum,
        a5: -p.eta2 * pq_sum,
    }
}

/// Deviation `|C(τ, Λ) - C(τ - l_pr, Λ)|` with `Λ = ls - l_pr`.
pub fn invariance_deviation(s: &PriceSeries, tau: usize, p: &PmbsiParams) -> Result<f64> {
    p.validate()?;
    if tau < p.l_pr {
        return Err(Error::Bounds { needed: p.l_pr + p.ls + 1, available: s.len() });
    }
    let upper = p.lambda();
    let now = string_invariant(s, tau, upper, p)?;
    let before = string_invariant(s, tau - p.l_pr, upper, p)?;
    Ok((now - before).abs())
}

/// Direct forecast of `p(τ0 + l_pr)` from data up to and including `τ0`.
///
/// `epsilon_observed` is the invariance deviation of the most recent fully
/// observed window pair, `|C(τ0-ls, Λ) - C(τ0-ls-l_pr, Λ)|`, or NaN when
/// that pair is not yet available.
pub fn predict(s: &PriceSeries, tau0: usize, p: &PmbsiParams) -> Result<Forecast> {
    p.validate()?;
    if tau0 >= s.len() || tau0 < p.ls {
        return Err(Error::Bounds { needed: p.ls + 1, available: tau0.min(s.len().saturating_sub(1)) + 1 });
    }
    let weights = bimodal_weights(p.ls, p.w0);
    let upper = p.lambda();
    let past_start = tau0 - p.ls;
    let target = invariant_on(positive_window(s, past_start, p.ls)?, upper, p, &weights);
    let tau = tau0 + p.l_pr - p.ls;
    let aux = aux_on(positive_window(s, tau, upper)?, upper, p, &weights);

    let epsilon_observed = if past_start >= p.l_pr {
        let earlier = invariant_on(positive_window(s, past_start - p.l_pr, p.ls)?, upper, p, &weights);
        (target - earlier).abs()
    } else {
        f64::NAN
    };
    Ok(match aux.solve_end_point(target, p.q) {
        Some(value) => Forecast { value, valid: true, epsilon_observed },
        None => Forecast::invalid(epsilon_observed),
    })
}

/// Chains `steps` one-tick forecasts, feeding each back into a private copy
/// of the series. A degenerate intermediate step persists the last value of
/// the working copy; `valid` is false if any step was degenerate.
pub fn predict_iterated(s: &PriceSeries, tau0: usize, p: &PmbsiParams, steps: usize) -> Result<Forecast> {
    if p.l_pr != 1 {
        return Err(Error::Parameter(format!("iterated prediction needs l_pr = 1, got {}", p.l_pr)));
    }
    if steps == 0 {
        return Err(Error::Parameter("steps must be positive".into()));
    }
    if tau0 >= s.len() {
        return Err(Error::Bounds { needed: tau0 + 1, available: s.len() });
    }
    let mut work = PriceSeries::with_origin(s.values[..=tau0].to_vec(), s.origin_index);
    let mut all_valid = true;
    let mut first_eps = f64::NAN;
    for step in 0..steps {
        let last = work.len() - 1;
        let f = predict(&work, last, p)?;
        if step == 0 {
            first_eps = f.epsilon_observed;
        }
        all_valid &= f.valid;
        let next = if f.valid { f.value } else { work.values[last] };
        work.values.push(next);
    }
    Ok(Forecast { value: *work.values.last().unwrap(), valid: all_valid, epsilon_observed: first_eps })
}

/// Constant added to a series before forecasting so that every element is
/// strictly positive: `1 + |min|` when any element is `<= 0`, else 0.
pub fn default_shift(s: &PriceSeries) -> f64 {
    let min = s.min();
    if min <= 0.0 {
        1.0 + min.abs()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShiftRule {
    /// `1 + |min|` when the series is not strictly positive.
    Auto,
    None,
    Constant(f64),
}

impl ShiftRule {
    pub fn constant_for(&self, s: &PriceSeries) -> f64 {
        match *self {
            ShiftRule::Auto => default_shift(s),
            ShiftRule::None => 0.0,
            ShiftRule::Constant(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ForecastMode {
    Simple(SimpleInvariantParams),
    /// Horizon is `l_pr` of the parameters.
    Direct(PmbsiParams),
    /// One-step parameters chained `steps` times.
    Iterated { params: PmbsiParams, steps: usize },
}

impl ForecastMode {
    pub fn horizon(&self) -> usize {
        match self {
            ForecastMode::Simple(_) => 1,
            ForecastMode::Direct(p) => p.l_pr,
            ForecastMode::Iterated { steps, .. } => *steps,
        }
    }

    /// Smallest target index whose forecast has enough history.
    pub fn first_target(&self) -> usize {
        match self {
            ForecastMode::Simple(p) => p.l + 3,
            ForecastMode::Direct(p) => p.ls + p.l_pr,
            ForecastMode::Iterated { params, steps } => params.ls + steps,
        }
    }

    fn forecast(&self, s: &PriceSeries, tau0: usize) -> Result<Forecast> {
        match self {
            ForecastMode::Simple(p) => match predict_one_step_simple(s, tau0, p) {
                Err(Error::FlatPrice { .. }) => Ok(Forecast::invalid(f64::NAN)),
                other => other,
            },
            ForecastMode::Direct(p) => predict(s, tau0, p),
            ForecastMode::Iterated { params, steps } => predict_iterated(s, tau0, params, *steps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub index: usize,
    pub actual: f64,
    pub forecast: f64,
    pub valid: bool,
    pub epsilon_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRun {
    pub rows: Vec<ForecastRow>,
    pub shift: f64,
}

impl ForecastRun {
    pub fn actuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.actual).collect()
    }

    pub fn forecasts(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.forecast).collect()
    }

    pub fn invalid_count(&self) -> usize {
        self.rows.iter().filter(|r| !r.valid).count()
    }

    /// Rows whose observed invariance deviation is within `epsilon`.
    pub fn invariant_sites(&self, epsilon: f64) -> impl Iterator<Item = &ForecastRow> {
        self.rows.iter().filter(move |r| r.epsilon_observed <= epsilon)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
        w.write_record(["index", "actual", "forecast", "valid", "epsilon_observed"]).map_err(err)?;
        for r in &self.rows {
            w.write_record(&[
                r.index.to_string(),
                r.actual.to_string(),
                r.forecast.to_string(),
                r.valid.to_string(),
                r.epsilon_observed.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

/// Forecasts every target index (positions in `s`) from the data strictly
/// before `target - horizon + 1`.
///
/// The series is shifted by the rule's constant before forecasting and the
/// forecasts are shifted back. An invalid forecast is replaced by the last
/// valid forecast of this run; before any valid forecast exists, by the last
/// observed price.
pub fn run_forecasts(
    s: &PriceSeries,
    targets: &[usize],
    mode: &ForecastMode,
    shift: ShiftRule,
) -> Result<ForecastRun> {
    s.ensure_finite()?;
    let k = shift.constant_for(s);
    let shifted = if k == 0.0 { s.clone() } else { s.map(|v| v + k) };
    let horizon = mode.horizon();
    let mut last_valid: Option<f64> = None;
    let mut rows = Vec::with_capacity(targets.len());
    for &target in targets {
        if target >= s.len() || target < horizon {
            return Err(Error::Bounds { needed: target + 1, available: s.len() });
        }
        let tau0 = target - horizon;
        let f = mode.forecast(&shifted, tau0)?;
        let value = if f.valid {
            last_valid = Some(f.value);
            f.value
        } else {
            last_valid.unwrap_or(shifted.values[tau0])
        };
        rows.push(ForecastRow {
            index: s.origin_index + target,
            actual: s.values[target],
            forecast: value - k,
            valid: f.valid,
            epsilon_observed: f.epsilon_observed,
        });
    }
    Ok(ForecastRun { rows, shift: k })
}

/// Fraction of rows whose forecast moves in the same direction as the
/// actual value relative to the last observed price `horizon` ticks earlier.
pub fn directional_hit_rate(s: &PriceSeries, run: &ForecastRun, horizon: usize) -> f64 {
    if run.rows.is_empty() {
        return f64::NAN;
    }
    let hits = run
        .rows
        .iter()
        .filter(|r| {
            let base = s.values[r.index - s.origin_index - horizon];
            (r.forecast - base).signum() == (r.actual - base).signum()
        })
        .count();
    hits as f64 / run.rows.len() as f64
}

/// Fraction of rows with `|forecast - actual| <= tolerance`.
pub fn exact_hit_rate(run: &ForecastRun, tolerance: f64) -> f64 {
    if run.rows.is_empty() {
        return f64::NAN;
    }
    run.rows.iter().filter(|r| (r.forecast - r.actual).abs() <= tolerance).count() as f64 / run.rows.len() as f64
}
