//! Daily closing-price ingestion, log returns, the chronological
//! train/test split and the synthetic cash index.
//!
//! Trading days are exactly the dates present in the input; no calendar
//! gap-filling is done.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year, used for every annualisation in the crate.
pub const TRADING_DAYS: f64 = 252.0;

/// Default minimum number of valid rows accepted by [`load_csv`].
pub const DEFAULT_MIN_LENGTH: usize = 260;

/// Default fraction of observations assigned to the training partition.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetClass {
    Equities,
    Currencies,
    Commodities,
    FixedIncome,
    Cash,
}

impl AssetClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetClass::Equities => "equities",
            AssetClass::Currencies => "currencies",
            AssetClass::Commodities => "commodities",
            AssetClass::FixedIncome => "fixed_income",
            AssetClass::Cash => "cash",
        }
    }
}

impl std::fmt::Display for AssetClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AssetClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', '-', ' '], "").as_str() {
            "equities" | "equity" => Ok(AssetClass::Equities),
            "currencies" | "currency" | "fx" => Ok(AssetClass::Currencies),
            "commodities" | "commodity" => Ok(AssetClass::Commodities),
            "fixedincome" => Ok(AssetClass::FixedIncome),
            "cash" => Ok(AssetClass::Cash),
            other => Err(Error::Config(format!("unknown asset class `{other}`"))),
        }
    }
}

/// Dated daily closes for a single asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub asset_id: String,
    pub asset_class: AssetClass,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series after checking ordering and positivity. Length limits
    /// are enforced by the loaders, since partitions of a valid series may be
    /// short.
    pub fn new(
        asset_id: impl Into<String>,
        asset_class: AssetClass,
        dates: Vec<NaiveDate>,
        closes: Vec<f64>,
    ) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::LengthMismatch {
                what: "dates vs closes",
                left: dates.len(),
                right: closes.len(),
            });
        }
        if dates.is_empty() {
            return Err(Error::InvalidSeries("empty series".into()));
        }
        if let Some(i) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(format!(
                "dates not strictly increasing at index {} ({} then {})",
                i + 1,
                dates[i],
                dates[i + 1]
            )));
        }
        if let Some(i) = closes.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidSeries(format!(
                "close at index {i} is not a positive finite number"
            )));
        }
        Ok(Self {
            asset_id: asset_id.into(),
            asset_class,
            dates,
            closes,
        })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> PriceSeries {
        PriceSeries {
            asset_id: self.asset_id.clone(),
            asset_class: self.asset_class,
            dates: self.dates[start..end].to_vec(),
            closes: self.closes[start..end].to_vec(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["date", "close"])?;
        for (d, c) in self.dates.iter().zip(&self.closes) {
            w.write_record([d.to_string(), format!("{c}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Daily log returns; `dates[t]` is the date on which `values[t]` is realised,
/// i.e. the second of the two closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train_end_index: usize,
    pub train_fraction: f64,
}

/// Reads a `date,close` CSV with a header line.
pub fn load_csv(path: &Path, asset_class: AssetClass, min_length: usize) -> Result<PriceSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut dates = Vec::new();
    let mut closes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header line.
        let row = i + 2;
        let malformed = |reason: String| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            reason,
        };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        let date_field = record.get(0).unwrap_or("");
        let close_field = record.get(1).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_field, "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad date `{date_field}`: {e}")))?;
        if close_field.is_empty() {
            return Err(malformed("missing close".into()));
        }
        let close: f64 = close_field
            .parse()
            .map_err(|_| malformed(format!("bad close `{close_field}`")))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(malformed(format!("non-positive close {close_field}")));
        }
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(malformed(format!(
                    "non-increasing date {date} after {prev}"
                )));
            }
        }
        dates.push(date);
        closes.push(close);
    }

    if closes.len() < min_length {
        return Err(Error::TooShort {
            needed: min_length,
            got: closes.len(),
        });
    }
    let asset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "asset".into());
    PriceSeries::new(asset_id, asset_class, dates, closes)
}

pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    let values = prices
        .closes
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    Ok(ReturnSeries {
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

/// Chronological split: the first `floor(fraction * N)` observations train.
pub fn split_train_test(
    prices: &PriceSeries,
    train_fraction: f64,
) -> Result<(PriceSeries, PriceSeries, DataSplit)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    let n = prices.len();
    let train_end_index = (train_fraction * n as f64).floor() as usize;
    if train_end_index == 0 || train_end_index >= n {
        return Err(Error::Config(format!(
            "split of {n} observations at fraction {train_fraction} leaves an empty partition"
        )));
    }
    Ok((
        prices.slice(0, train_end_index),
        prices.slice(train_end_index, n),
        DataSplit {
            train_end_index,
            train_fraction,
        },
    ))
}

/// Constant-rate cash index starting at 100, compounded per trading day.
pub fn synth_cash_index(dates: &[NaiveDate], annual_rate: f64) -> Result<PriceSeries> {
    if !(annual_rate >= 0.0 && annual_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cash annual rate must be a non-negative number, got {annual_rate}"
        )));
    }
    let growth = (1.0 + annual_rate).powf(1.0 / TRADING_DAYS);
    let mut closes = Vec::with_capacity(dates.len());
    let mut level = 100.0;
    for i in 0..dates.len() {
        if i > 0 {
            level *= growth;
        }
        closes.push(level);
    }
    PriceSeries::new("cash", AssetClass::Cash, dates.to_vec(), closes)
}

/// Re-indexes a loaded cash series onto `dates`; every asset date must exist
/// in the cash file.
pub fn align_cash(cash: &PriceSeries, dates: &[NaiveDate]) -> Result<PriceSeries> {
    let mut closes = Vec::with_capacity(dates.len());
    for d in dates {
        let i = cash
            .dates
            .binary_search(d)
            .map_err(|_| Error::InvalidSeries(format!("cash series has no close on {d}")))?;
        closes.push(cash.closes[i]);
    }
    PriceSeries::new(cash.asset_id.clone(), AssetClass::Cash, dates.to_vec(), closes)
}

/// `n` weekday dates starting at `start` (used for synthetic series).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    use chrono::Datelike;
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if d.weekday().number_from_monday() <= 5 {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}
