//! Piecewise-linear CDFs through quantile forecasts.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;

use super::{find_column, open_csv, parse_timestamp, IngestError};

/// Quantile levels and forecasts for one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRow {
    levels: Vec<f64>,
    values: Vec<f64>,
    /// Forecasts were out of order and got sorted.
    pub repaired: bool,
    /// Some adjacent forecasts coincide.
    pub degenerate: bool,
}

impl QuantileRow {
    /// Levels must be strictly increasing inside `(0, 1)`. Crossing forecasts
    /// are repaired by sorting, which is the isotonic fit for quantiles.
    pub fn new(levels: Vec<f64>, mut values: Vec<f64>) -> Result<Self, IngestError> {
        if levels.is_empty() || levels.len() != values.len() {
            return Err(IngestError::Invalid("quantile row needs matching non-empty levels and values".into()));
        }
        if levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::Invalid(format!("quantile levels must increase inside (0, 1): {levels:?}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::Invalid("non-finite quantile forecast".into()));
        }
        let repaired = values.windows(2).any(|w| w[0] > w[1]);
        if repaired {
            values.sort_by(f64::total_cmp);
        }
        let degenerate = values.windows(2).any(|w| w[0] == w[1]);
        Ok(Self { levels, values, repaired, degenerate })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `F(x)` through the knots `(forecast_i, level_i)`: 0 below the lowest
/// forecast, 1 at or above the highest, linear in between. Where adjacent
/// forecasts coincide the CDF jumps, taking the lower level at the knot.
pub fn interpolate_cdf(row: &QuantileRow, x: f64) -> f64 {
    let v = &row.values;
    let k = v.len();
    if x >= v[k - 1] {
        return 1.0;
    }
    // first knot with forecast >= x
    let j = v.partition_point(|&t| t < x);
    if j == 0 {
        return if x == v[0] { row.levels[0] } else { 0.0 };
    }
    if v[j] == x {
        return row.levels[j];
    }
    let (x0, x1) = (v[j - 1], v[j]);
    let (a0, a1) = (row.levels[j - 1], row.levels[j]);
    a0 + (a1 - a0) * (x - x0) / (x1 - x0)
}

/// Quantile forecasts keyed by timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuantileForecastTable {
    pub rows: BTreeMap<NaiveDateTime, QuantileRow>,
    pub repaired_rows: usize,
}

impl QuantileForecastTable {
    pub fn get(&self, ts: &NaiveDateTime) -> Option<&QuantileRow> {
        self.rows.get(ts)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads a long-form `timestamp,level,value` CSV.
pub fn load_quantile_table(path: &Path) -> Result<QuantileForecastTable, IngestError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    let ti = find_column(&headers, &["timestamp"])?;
    let li = find_column(&headers, &["level"])?;
    let vi = find_column(&headers, &["value"])?;
    let mut raw: BTreeMap<NaiveDateTime, Vec<(f64, f64)>> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        if rec.len() <= ti.max(li).max(vi) {
            return Err(IngestError::Parse { line, message: "short row".into() });
        }
        let parse_err = |m: String| IngestError::Parse { line, message: m };
        let ts = parse_timestamp(&rec[ti]).ok_or_else(|| parse_err(format!("bad timestamp `{}`", &rec[ti])))?;
        let level: f64 = rec[li].parse().map_err(|_| parse_err(format!("bad level `{}`", &rec[li])))?;
        let value: f64 = rec[vi].parse().map_err(|_| parse_err(format!("bad value `{}`", &rec[vi])))?;
        raw.entry(ts).or_default().push((level, value));
    }
    let mut table = QuantileForecastTable::default();
    for (ts, mut pts) in raw {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let row = QuantileRow::new(pts.iter().map(|p| p.0).collect(), pts.iter().map(|p| p.1).collect())?;
        if row.repaired {
            table.repaired_rows += 1;
        }
        table.rows.insert(ts, row);
    }
    Ok(table)
}
