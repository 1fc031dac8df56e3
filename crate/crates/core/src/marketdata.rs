//! Tick ingestion, mid prices, returns, chronological splits and synthetic
//! series used by the experiments.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One bid/ask quote. The position of the quote inside a [`TickSeries`] is the
/// time coordinate; the timestamp is only used for calendar bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickQuote {
    pub timestamp: i64,
    pub bid: f64,
    pub ask: f64,
}

impl TickQuote {
    pub fn new(timestamp: i64, bid: f64, ask: f64) -> Result<Self> {
        if !(bid > 0.0 && bid.is_finite() && ask.is_finite()) {
            return Err(Error::Parameter(format!("bid must be positive and finite, got {bid}")));
        }
        if ask < bid {
            return Err(Error::InvalidQuote { line: 0, bid, ask });
        }
        Ok(Self { timestamp, bid, ask })
    }

    pub fn mid(&self) -> f64 {
        mid_price(self)
    }

    pub fn spread(&self) -> f64 {
        self.ask - self.bid
    }
}

pub fn mid_price(t: &TickQuote) -> f64 {
    (t.ask + t.bid) / 2.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickSeries {
    pub ticks: Vec<TickQuote>,
}

impl TickSeries {
    pub fn new(ticks: Vec<TickQuote>) -> Self {
        Self { ticks }
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn mid_prices(&self) -> PriceSeries {
        PriceSeries::new(self.ticks.iter().map(mid_price).collect())
    }

    pub fn spreads(&self) -> Vec<f64> {
        self.ticks.iter().map(TickQuote::spread).collect()
    }

    /// Ticks in `[start, end)`; timestamps are kept.
    pub fn slice(&self, start: usize, end: usize) -> TickSeries {
        TickSeries::new(self.ticks[start..end].to_vec())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp_ms", "bid", "ask"]).map_err(io_err)?;
        for t in &self.ticks {
            w.write_record(&[t.timestamp.to_string(), t.bid.to_string(), t.ask.to_string()])
                .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

/// Ordered price sequence. `origin_index` is the tick index of element 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub values: Vec<f64>,
    pub origin_index: usize,
}

impl PriceSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, origin_index: 0 }
    }

    pub fn with_origin(values: Vec<f64>, origin_index: usize) -> Self {
        Self { values, origin_index }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Window `[start, start + len)` as a new series carrying the absolute origin.
    pub fn window(&self, start: usize, len: usize) -> Result<PriceSeries> {
        let end = start.checked_add(len).ok_or(Error::Bounds { needed: usize::MAX, available: self.len() })?;
        if end > self.len() {
            return Err(Error::Bounds { needed: end, available: self.len() });
        }
        Ok(PriceSeries::with_origin(self.values[start..end].to_vec(), self.origin_index + start))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PriceSeries {
        PriceSeries::with_origin(self.values.iter().map(|&v| f(v)).collect(), self.origin_index)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Parameter(format!("non-finite value at index {i}"))),
            None => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "price"]).map_err(io_err)?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record(&[(self.origin_index + i).to_string(), v.to_string()]).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), message: e.to_string() }
}

/// Parses `timestamp_ms,bid,ask` records. A header line is detected by a
/// non-numeric first field and skipped.
pub fn parse_ticks(text: &str) -> Result<TickSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut ticks = Vec::new();
    let mut last_ts = i64::MIN;
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(io_err)?;
        let line = record.position().map_or(n + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if n == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad {name} field {:?}", &record[i]),
            })
        };
        let timestamp = record[0].parse::<i64>().map_err(|_| Error::Parse {
            line,
            message: format!("bad timestamp field {:?}", &record[0]),
        })?;
        let bid = field(1, "bid")?;
        let ask = field(2, "ask")?;
        if !(bid > 0.0) || !bid.is_finite() || !ask.is_finite() {
            return Err(Error::Parse { line, message: format!("non-positive or non-finite bid {bid}") });
        }
        if ask < bid {
            return Err(Error::InvalidQuote { line, bid, ask });
        }
        if timestamp < last_ts {
            return Err(Error::Parse { line, message: "timestamps must be non-decreasing".into() });
        }
        last_ts = timestamp;
        ticks.push(TickQuote { timestamp, bid, ask });
    }
    Ok(TickSeries { ticks })
}

/// Parses `index,price` records (header optional). The first index becomes
/// the series origin; indices must be consecutive.
pub fn parse_series(text: &str) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut origin = None;
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(io_err)?;
        let line = record.position().map_or(n + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if n == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, found {}", record.len()) });
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad index {:?}", &record[0]) })?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad price {:?}", &record[1]) })?;
        if !price.is_finite() {
            return Err(Error::Parse { line, message: "non-finite price".into() });
        }
        let start = *origin.get_or_insert(index);
        if index != start + values.len() {
            return Err(Error::Parse { line, message: format!("index {index} is not consecutive") });
        }
        values.push(price);
    }
    Ok(PriceSeries::with_origin(values, origin.unwrap_or(0)))
}

/// Lagged returns `(p(i+h) - p(i)) / p(i+h)`.
pub fn returns(s: &PriceSeries, h: usize) -> Result<PriceSeries> {
    if h == 0 {
        return Err(Error::Parameter("lag must be positive".into()));
    }
    if s.len() <= h {
        return Err(Error::Bounds { needed: h + 1, available: s.len() });
    }
    let v = &s.values;
    let out = (0..v.len() - h)
        .map(|i| {
            let later = v[i + h];
            if later == 0.0 {
                Err(Error::ZeroPrice { index: s.origin_index + i + h })
            } else {
                Ok((later - v[i]) / later)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PriceSeries::with_origin(out, s.origin_index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: PriceSeries,
    pub eval: PriceSeries,
    pub valid: PriceSeries,
}

/// Chronological three-way split with sizes `floor(f_train n)`,
/// `floor(f_eval n)` and the remainder.
pub fn split(s: &PriceSeries, f_train: f64, f_eval: f64) -> Result<DataSplit> {
    let ok = |f: f64| (0.0..=1.0).contains(&f);
    if !ok(f_train) || !ok(f_eval) || f_train + f_eval > 1.0 {
        return Err(Error::Parameter(format!(
            "split fractions must be in [0,1] with sum <= 1, got ({f_train}, {f_eval})"
        )));
    }
    let n = s.len();
    let n_train = (f_train * n as f64).floor() as usize;
    let n_eval = ((f_eval * n as f64).floor() as usize).min(n - n_train);
    let piece = |a: usize, b: usize| PriceSeries::with_origin(s.values[a..b].to_vec(), s.origin_index + a);
    Ok(DataSplit {
        train: piece(0, n_train),
        eval: piece(n_train, n_train + n_eval),
        valid: piece(n_train + n_eval, n),
    })
}

/// One full sinusoid period over `n` samples: `offset + amplitude sin(2πk/(n-1) + phase)`.
pub fn gen_sinusoid(n: usize, amplitude: f64, offset: f64, phase: f64) -> Result<PriceSeries> {
    if n < 2 {
        return Err(Error::Parameter("sinusoid needs at least 2 samples".into()));
    }
    let step = 2.0 * PI / (n - 1) as f64;
    Ok(PriceSeries::new(
        (0..n).map(|k| offset + amplitude * (step * k as f64 + phase).sin()).collect(),
    ))
}

/// Seeded synthetic quote stream: multiplicative random walk on the mid with a
/// constant spread, one tick every `tick_ms` milliseconds.
pub fn gen_random_walk_ticks(
    n: usize,
    start_price: f64,
    volatility: f64,
    spread: f64,
    tick_ms: i64,
    seed: u64,
) -> TickSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mid = start_price;
    let ticks = (0..n)
        .map(|i| {
            if i > 0 {
                let step: f64 = rng.gen_range(-1.0..1.0);
                mid *= 1.0 + volatility * step;
            }
            TickQuote { timestamp: i as i64 * tick_ms, bid: mid - spread / 2.0, ask: mid + spread / 2.0 }
        })
        .collect();
    TickSeries { ticks }
}
