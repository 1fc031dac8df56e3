//! Exhaustive grid search with deterministic ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmbcs::PmbcsParams;
use crate::pmbsi::PmbsiParams;

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Named axes; points enumerate the cartesian product with the last axis
/// varying fastest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterGrid {
    axes: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl GridPoint {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn require(&self, name: &str) -> Result<f64> {
        self.get(name).ok_or_else(|| Error::Parameter(format!("grid point has no axis {name:?}")))
    }

    /// Lexicographic order of the value tuple.
    pub fn cmp_values(&self, other: &GridPoint) -> Ordering {
        for (a, b) in self.values.iter().zip(&other.values) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.values.len().cmp(&other.values.len())
    }
}

impl ParameterGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis(mut self, name: &str, values: Vec<f64>) -> Result<Self> {
        self.add_axis(name, values)?;
        Ok(self)
    }

    pub fn add_axis(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.is_empty() {
            return Err(Error::Parameter(format!("axis {name:?} has no values")));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parameter(format!("axis {name:?} contains NaN")));
        }
        if self.axes.iter().any(|a| a.name == name) {
            return Err(Error::Parameter(format!("duplicate axis {name:?}")));
        }
        self.axes.push(Axis { name: name.to_string(), values });
        Ok(())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn names(&self) -> Vec<String> {
        self.axes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn size(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|a| a.values.len()).product()
        }
    }

    pub fn point(&self, mut i: usize) -> GridPoint {
        let mut values = vec![0.0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            values[k] = a.values[i % a.values.len()];
            i /= a.values.len();
        }
        GridPoint { names: self.names(), values }
    }

    pub fn points(&self) -> Vec<GridPoint> {
        (0..self.size()).map(|i| self.point(i)).collect()
    }

    /// Parses `name = v1, v2, ...` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = Self::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: no + 1, message };
            let (name, list) = line.split_once('=').ok_or_else(|| bad(format!("expected name = values, got {line:?}")))?;
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("{:?}: {e}", v.trim()))))
                .collect::<Result<Vec<_>>>()?;
            grid.add_axis(name.trim(), values).map_err(|e| bad(e.to_string()))?;
        }
        if grid.size() == 0 {
            return Err(Error::Parameter("grid file defines no axes".into()));
        }
        Ok(grid)
    }

    /// Default forecasting grid: ls 2..10 and 900, Q from 0.1 to 6, both
    /// mixing weights from -0.8 to 0.8 in steps of 0.2, W0 in {0, 0.25, 0.5}.
    pub fn default_pmbsi() -> Self {
        let mut ls: Vec<f64> = (2..=10).map(f64::from).collect();
        ls.push(900.0);
        Self::new()
            .axis("ls", ls)
            .and_then(|g| g.axis("q", vec![0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 6.0]))
            .and_then(|g| g.axis("eta1", eta_values()))
            .and_then(|g| g.axis("eta2", eta_values()))
            .and_then(|g| g.axis("w0", vec![0.0, 0.25, 0.5]))
            .expect("static grid is valid")
    }
}

/// `-0.8, -0.6, ..., 0.8` rounded to one decimal.
pub fn eta_values() -> Vec<f64> {
    (-4..=4).map(|k| f64::from(k) * 2.0 / 10.0).collect()
}

/// Builds forecasting parameters from a point; absent axes keep `base`.
pub fn pmbsi_from_point(point: &GridPoint, base: PmbsiParams) -> Result<PmbsiParams> {
    let mut p = base;
    for (name, &v) in point.names.iter().zip(&point.values) {
        match name.as_str() {
            "ls" => p.ls = as_count(name, v)?,
            "l_pr" => p.l_pr = as_count(name, v)?,
            "q" => p.q = v,
            "eta1" => p.eta1 = v,
            "eta2" => p.eta2 = v,
            "w0" => p.w0 = v,
            "epsilon" => p.epsilon = v,
            other => return Err(Error::Parameter(format!("unknown forecasting axis {other:?}"))),
        }
    }
    p.validate()?;
    Ok(p)
}

/// Builds trading parameters from a point; absent axes keep `base`.
pub fn pmbcs_from_point(point: &GridPoint, base: PmbcsParams) -> Result<PmbcsParams> {
    let mut p = base;
    for (name, &v) in point.names.iter().zip(&point.values) {
        match name.as_str() {
            "ls" => p.ls = as_count(name, v)?,
            "m" => p.m = as_count(name, v)? as u32,
            "q" => p.q = v,
            "phi" => p.phi = v,
            "bins" => p.bins = as_count(name, v)?,
            "d_threshold" => p.d_threshold = v,
            "rho_min" => p.rho_min = v,
            "skew_min" => p.skew_min = v,
            "sharpe_min" => p.sharpe_min = v,
            "max_positions" => p.max_positions = as_count(name, v)?,
            "hourly_cap" => p.hourly_cap = as_count(name, v)?,
            "horizon" => p.horizon = as_count(name, v)?,
            "min_occupancy" => p.min_occupancy = as_count(name, v)? as u64,
            other => return Err(Error::Parameter(format!("unknown trading axis {other:?}"))),
        }
    }
    p.validate()?;
    Ok(p)
}

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(Error::Parameter(format!("axis {name:?} needs a non-negative integer, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    fn failed_score(self) -> f64 {
        match self {
            Sense::Minimize => f64::INFINITY,
            Sense::Maximize => f64::NEG_INFINITY,
        }
    }

    fn cmp(self, a: f64, b: f64) -> Ordering {
        match self {
            Sense::Minimize => a.total_cmp(&b),
            Sense::Maximize => b.total_cmp(&a),
        }
    }
}

/// Bound on an auxiliary metric; a point lacking the metric violates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub metric: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Constraint {
    pub fn at_most(metric: &str, max: f64) -> Self {
        Self { metric: metric.to_string(), min: None, max: Some(max) }
    }

    pub fn at_least(metric: &str, min: f64) -> Self {
        Self { metric: metric.to_string(), min: Some(min), max: None }
    }

    pub fn satisfied_by(&self, aux: &BTreeMap<String, f64>) -> bool {
        match aux.get(&self.metric) {
            Some(&v) if !v.is_nan() => self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m),
            _ => false,
        }
    }
}

/// What an objective returns for one point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub objective: f64,
    pub aux: BTreeMap<String, f64>,
}

impl Evaluation {
    pub fn new(objective: f64) -> Self {
        Self { objective, aux: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.aux.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub params: GridPoint,
    /// Finite unless `failed`, in which case it is the worst score of the sense.
    pub objective: f64,
    pub aux: BTreeMap<String, f64>,
    pub failed: Option<String>,
    pub violates: bool,
}

impl GridResult {
    pub fn is_failed(&self) -> bool {
        self.failed.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Ranked best first.
    pub results: Vec<GridResult>,
    pub evaluations: usize,
    pub sense: Sense,
}

/// Evaluates every grid point once and ranks the results.
///
/// Errors and non-finite objectives mark the point failed with the worst
/// score. Ties are broken by the lexicographic order of the value tuple, so
/// the ranking does not depend on the worker count.
pub fn grid_search<F>(
    grid: &ParameterGrid,
    objective: F,
    sense: Sense,
    constraints: &[Constraint],
    workers: Option<usize>,
) -> Result<SearchOutcome>
where
    F: Fn(&GridPoint) -> Result<Evaluation> + Sync,
{
    if grid.size() == 0 {
        return Err(Error::Parameter("parameter grid is empty".into()));
    }
    let counter = AtomicUsize::new(0);
    let mut results: Vec<GridResult> = with_workers(workers, || {
        (0..grid.size())
            .into_par_iter()
            .map(|i| {
                let params = grid.point(i);
                counter.fetch_add(1, AtomicOrdering::Relaxed);
                let (objective, aux, failed) = match objective(&params) {
                    Ok(e) if e.objective.is_finite() => (e.objective, e.aux, None),
                    Ok(e) => (sense.failed_score(), e.aux, Some(format!("non-finite objective {}", e.objective))),
                    Err(err) => (sense.failed_score(), BTreeMap::new(), Some(err.to_string())),
                };
                let violates = !constraints.iter().all(|c| c.satisfied_by(&aux));
                GridResult { params, objective, aux, failed, violates }
            })
            .collect()
    });
    results.sort_by(|a, b| {
        a.is_failed()
            .cmp(&b.is_failed())
            .then_with(|| sense.cmp(a.objective, b.objective))
            .then_with(|| a.params.cmp_values(&b.params))
    });
    Ok(SearchOutcome { results, evaluations: counter.into_inner(), sense })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// Lowest `mae` metric, falling back to the objective.
    EvalMae,
    /// Highest `sharpe`, then highest `profit_pct`.
    SharpeThenProfit,
}

/// Top candidate under `rule` among non-failed results, skipping constraint
/// violators when `enforce_constraints` is set. Exact ties keep the earlier
/// ranked result.
pub fn select_best(results: &[GridResult], rule: SelectionRule, enforce_constraints: bool) -> Result<&GridResult> {
    let metric = |r: &GridResult, name: &str, default: f64| r.aux.get(name).copied().filter(|v| !v.is_nan()).unwrap_or(default);
    let better = |a: &GridResult, b: &GridResult| match rule {
        SelectionRule::EvalMae => metric(a, "mae", a.objective) < metric(b, "mae", b.objective),
        SelectionRule::SharpeThenProfit => {
            let (sa, sb) = (metric(a, "sharpe", f64::NEG_INFINITY), metric(b, "sharpe", f64::NEG_INFINITY));
            sa > sb || (sa == sb && metric(a, "profit_pct", f64::NEG_INFINITY) > metric(b, "profit_pct", f64::NEG_INFINITY))
        }
    };
    let mut best: Option<&GridResult> = None;
    for r in results.iter().filter(|r| !r.is_failed() && !(enforce_constraints && r.violates)) {
        if best.is_none_or(|b| better(r, b)) {
            best = Some(r);
        }
    }
    best.ok_or(Error::NoCandidate)
}

/// Objective values over two axes; `None` marks missing or failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurface {
    pub x_axis: String,
    pub y_axis: String,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// `cells[i][j]` belongs to `x_values[i]`, `y_values[j]`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ErrorSurface {
    /// Best cell as `(x, y, objective)` under the sense.
    pub fn best(&self, sense: Sense) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if let Some(v) = *c {
                    if best.is_none_or(|b| sense.cmp(v, b.2).is_lt()) {
                        best = Some((self.x_values[i], self.y_values[j], v));
                    }
                }
            }
        }
        best
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
        w.write_record([self.x_axis.as_str(), self.y_axis.as_str(), "objective"]).map_err(err)?;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let v = c.map_or(String::new(), |v| v.to_string());
                w.write_record(&[self.x_values[i].to_string(), self.y_values[j].to_string(), v]).map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

/// Dense matrix over `x` and `y`. Axes named in `fixed` are held at the given
/// value; any other axis is profiled out by taking the best objective.
pub fn error_surface(
    outcome: &SearchOutcome,
    x: &str,
    y: &str,
    fixed: &BTreeMap<String, f64>,
) -> Result<ErrorSurface> {
    let names = match outcome.results.first() {
        Some(r) => r.params.names.clone(),
        None => return Err(Error::Parameter("no results".into())),
    };
    for a in [x, y].into_iter().chain(fixed.keys().map(String::as_str)) {
        if !names.iter().any(|n| n == a) {
            return Err(Error::Parameter(format!("axis {a:?} not in grid")));
        }
    }
    if x == y {
        return Err(Error::Parameter("surface axes must differ".into()));
    }
    let distinct = |name: &str| {
        let mut v: Vec<f64> = outcome.results.iter().filter_map(|r| r.params.get(name)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (xs, ys) = (distinct(x), distinct(y));
    let mut cells = vec![vec![None; ys.len()]; xs.len()];
    for r in &outcome.results {
        if r.is_failed() || fixed.iter().any(|(k, v)| r.params.get(k) != Some(*v)) {
            continue;
        }
        let i = xs.iter().position(|v| Some(*v) == r.params.get(x)).expect("x value present");
        let j = ys.iter().position(|v| Some(*v) == r.params.get(y)).expect("y value present");
        let cell: &mut Option<f64> = &mut cells[i][j];
        if cell.is_none_or(|c| outcome.sense.cmp(r.objective, c).is_lt()) {
            *cell = Some(r.objective);
        }
    }
    Ok(ErrorSurface { x_axis: x.to_string(), y_axis: y.to_string(), x_values: xs, y_values: ys, cells })
}

/// Ranked results as CSV: rank, axis values, objective, flags, then every
/// auxiliary metric in name order.
pub fn write_results_csv<W: std::io::Write>(outcome: &SearchOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
    let Some(first) = outcome.results.first() else {
        return Ok(());
    };
    let mut aux_names: Vec<&String> = outcome.results.iter().flat_map(|r| r.aux.keys()).collect();
    aux_names.sort();
    aux_names.dedup();
    let mut header: Vec<String> = vec!["rank".into()];
    header.extend(first.params.names.iter().cloned());
    header.extend(["objective", "failed", "violates"].map(String::from));
    header.extend(aux_names.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(err)?;
    for (rank, r) in outcome.results.iter().enumerate() {
        let mut row = vec![(rank + 1).to_string()];
        row.extend(r.params.values.iter().map(f64::to_string));
        row.push(r.objective.to_string());
        row.push(r.failed.clone().unwrap_or_default());
        row.push(r.violates.to_string());
        row.extend(aux_names.iter().map(|n| r.aux.get(*n).map_or(String::new(), f64::to_string)));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
}

/// Compact textual form of a ranking, used to compare runs byte for byte.
pub fn ranking_fingerprint(outcome: &SearchOutcome) -> String {
    let mut s = String::new();
    for r in &outcome.results {
        let _ = writeln!(s, "{:?} {} {:?} {}", r.params.values, r.objective, r.failed, r.violates);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid2x2() -> ParameterGrid {
        ParameterGrid::new().axis("a", vec![1.0, 2.0]).unwrap().axis("b", vec![10.0, 20.0]).unwrap()
    }

    #[test]
    fn enumeration_order_and_size() {
        let g = grid2x2();
        assert_eq!(g.size(), 4);
        let pts: Vec<Vec<f64>> = g.points().into_iter().map(|p| p.values).collect();
        assert_eq!(pts, vec![vec![1.0, 10.0], vec![1.0, 20.0], vec![2.0, 10.0], vec![2.0, 20.0]]);
        assert_eq!(ParameterGrid::default_pmbsi().size(), 10 * 8 * 9 * 9 * 3);
        assert!(ParameterGrid::new().axis("a", vec![]).is_err());
    }

    #[test]
    fn single_point_ranked_first() {
        let g = ParameterGrid::new().axis("a", vec![3.0]).unwrap();
        let out = grid_search(&g, |p| Ok(Evaluation::new(p.values[0])), Sense::Minimize, &[], None).unwrap();
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.evaluations, 1);
        assert!(grid_search(&ParameterGrid::new(), |_| Ok(Evaluation::new(0.0)), Sense::Minimize, &[], None).is_err());
    }

    #[test]
    fn two_by_two_matches_enumeration() {
        let f = |p: &GridPoint| (p.values[0] - 1.7).powi(2) + (p.values[1] - 12.0).abs() / 10.0;
        let out = grid_search(&grid2x2(), |p| Ok(Evaluation::new(f(p))), Sense::Minimize, &[], Some(2)).unwrap();
        let mut oracle: Vec<(f64, Vec<f64>)> = Vec::new();
        for a in [1.0, 2.0] {
            for b in [10.0, 20.0] {
                let p = GridPoint { names: vec!["a".into(), "b".into()], values: vec![a, b] };
                oracle.push((f(&p), p.values));
            }
        }
        oracle.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let got: Vec<Vec<f64>> = out.results.iter().map(|r| r.params.values.clone()).collect();
        assert_eq!(got, oracle.into_iter().map(|o| o.1).collect::<Vec<_>>());
        assert_eq!(out.evaluations, 4);
    }

    #[test]
    fn ties_break_lexicographically_and_failures_sink() {
        let out = grid_search(
            &grid2x2(),
            |p| if p.values == [1.0, 10.0] { Err(Error::Metric("boom".into())) } else { Ok(Evaluation::new(0.0)) },
            Sense::Minimize,
            &[],
            Some(3),
        )
        .unwrap();
        let order: Vec<Vec<f64>> = out.results.iter().map(|r| r.params.values.clone()).collect();
        assert_eq!(order, vec![vec![1.0, 20.0], vec![2.0, 10.0], vec![2.0, 20.0], vec![1.0, 10.0]]);
        assert!(out.results[3].is_failed());
        assert_eq!(out.results[3].objective, f64::INFINITY);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let g = ParameterGrid::new()
            .axis("x", (0..20).map(f64::from).collect())
            .unwrap()
            .axis("y", (0..20).map(f64::from).collect())
            .unwrap();
        let f = |p: &GridPoint| Ok(Evaluation::new(((p.values[0] * 7.0 + p.values[1] * 3.0) % 11.0).floor()));
        let a = grid_search(&g, f, Sense::Maximize, &[], Some(1)).unwrap();
        let b = grid_search(&g, f, Sense::Maximize, &[], Some(8)).unwrap();
        assert_eq!(ranking_fingerprint(&a), ranking_fingerprint(&b));
    }

    fn result(sharpe: f64, profit: f64, dd: f64) -> GridResult {
        let aux = BTreeMap::from([("sharpe".into(), sharpe), ("profit_pct".into(), profit), ("max_drawdown_pct".into(), dd)]);
        let violates = !Constraint::at_most("max_drawdown_pct", 5.0).satisfied_by(&aux);
        GridResult { params: GridPoint { names: vec![], values: vec![] }, objective: sharpe, aux, failed: None, violates }
    }

    #[test]
    fn select_best_rules() {
        let one = vec![result(1.0, 5.0, 1.0)];
        assert_eq!(select_best(&one, SelectionRule::SharpeThenProfit, true).unwrap(), &one[0]);
        let two = vec![result(1.0, 10.0, 1.0), result(1.0, 20.0, 1.0)];
        assert_eq!(select_best(&two, SelectionRule::SharpeThenProfit, true).unwrap().aux["profit_pct"], 20.0);
        let with_bad = vec![result(1.0, 10.0, 1.0), result(1.0, 20.0, 1.0), result(3.0, 50.0, 9.0)];
        assert_eq!(select_best(&with_bad, SelectionRule::SharpeThenProfit, true).unwrap().aux["profit_pct"], 20.0);
        assert_eq!(select_best(&with_bad, SelectionRule::SharpeThenProfit, false).unwrap().aux["profit_pct"], 50.0);
        let mut failed = result(1.0, 1.0, 1.0);
        failed.failed = Some("x".into());
        assert!(matches!(select_best(&[failed], SelectionRule::EvalMae, false), Err(Error::NoCandidate)));
    }

    #[test]
    fn surface_slices_and_profiles() {
        let g = grid2x2().axis("c", vec![0.0, 1.0]).unwrap();
        let out = grid_search(&g, |p| Ok(Evaluation::new(p.values.iter().sum())), Sense::Minimize, &[], None).unwrap();
        let fixed = BTreeMap::from([("c".to_string(), 1.0)]);
        let s = error_surface(&out, "a", "b", &fixed).unwrap();
        assert_eq!(s.cells[0][0], Some(12.0));
        assert_eq!(s.best(Sense::Minimize), Some((1.0, 10.0, 12.0)));
        let profiled = error_surface(&out, "a", "b", &BTreeMap::new()).unwrap();
        assert_eq!(profiled.cells[1][1], Some(22.0));
        assert!(error_surface(&out, "a", "zz", &fixed).is_err());
        let single = error_surface(&out, "a", "b", &BTreeMap::from([("a".into(), 2.0), ("b".into(), 20.0), ("c".into(), 0.0)])).unwrap();
        assert_eq!(single.cells.iter().flatten().filter(|c| c.is_some()).count(), 1);
    }

    #[test]
    fn grid_file_parsing() {
        let g = ParameterGrid::parse("# grid\nls = 2, 3,4\nq=0.5 # half\n\n").unwrap();
        assert_eq!(g.size(), 3);
        assert_eq!(g.names(), vec!["ls", "q"]);
        assert!(matches!(ParameterGrid::parse("ls = 2, x"), Err(Error::Parse { line: 1, .. })));
        assert!(ParameterGrid::parse("ls 2").is_err());
    }

    #[test]
    fn table_optima_are_grid_members() {
        let g = ParameterGrid::default_pmbsi();
        let pts = g.points();
        for want in [[2.0, 0.3, 0.8, -0.2], [5.0, 0.1, 0.8, -0.6], [8.0, 0.1, 0.8, -0.6]] {
            assert!(pts.iter().any(|p| p.values[..4] == want), "{want:?}");
        }
        let p = pmbsi_from_point(&pts[0], PmbsiParams::default()).unwrap();
        assert_eq!(p.ls, 2);
        assert_eq!(p.eta1, -0.8);
    }

    proptest! {
        #[test]
        fn surface_minimum_ignores_axis_order(vals in prop::collection::vec(0.0f64..10.0, 12)) {
            let f = |a: f64, b: f64, c: f64| vals[(a as usize) * 4 + (b as usize) * 2 + c as usize];
            let g1 = ParameterGrid::new().axis("a", vec![0.0, 1.0, 2.0]).unwrap().axis("b", vec![0.0, 1.0]).unwrap().axis("c", vec![0.0, 1.0]).unwrap();
            let g2 = ParameterGrid::new().axis("c", vec![0.0, 1.0]).unwrap().axis("b", vec![0.0, 1.0]).unwrap().axis("a", vec![0.0, 1.0, 2.0]).unwrap();
            let eval = |p: &GridPoint| Ok(Evaluation::new(f(p.get("a").unwrap(), p.get("b").unwrap(), p.get("c").unwrap())));
            let o1 = grid_search(&g1, eval, Sense::Minimize, &[], None).unwrap();
            let o2 = grid_search(&g2, eval, Sense::Minimize, &[], None).unwrap();
            let fixed = BTreeMap::from([("c".to_string(), 1.0)]);
            let b1 = error_surface(&o1, "a", "b", &fixed).unwrap().best(Sense::Minimize);
            let b2 = error_surface(&o2, "a", "b", &fixed).unwrap().best(Sense::Minimize);
            prop_assert_eq!(b1, b2);
            prop_assert_eq!(o1.evaluations, 12);
        }
    }
}
