//! Hourly load/temperature data: exceedance labels, baseline exceedance
//! probabilities from quantile forecasts, and temperature-band groups.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cdf::{interpolate_cdf, QuantileForecastTable, QuantileRow};
use super::{find_column, io_err, open_csv, parse_timestamp, IngestError, Record, SampleStream, TIMESTAMP_FORMAT};
use crate::objectives::{FeatureValue, Features, GroupFunction, GroupRule, LabelRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GefcomOptions {
    /// Label is `1{load > threshold}`.
    pub threshold: f64,
    pub timestamp_col: String,
    pub load_col: String,
    pub temperature_col: String,
    /// Weeks of same-hour history for the fallback baseline.
    pub fallback_weeks: usize,
}

impl Default for GefcomOptions {
    fn default() -> Self {
        Self {
            threshold: 150.0,
            timestamp_col: "timestamp".into(),
            load_col: "load".into(),
            temperature_col: "temperature".into(),
            fallback_weeks: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GefcomRow {
    pub timestamp: NaiveDateTime,
    pub load: Option<f64>,
    pub temperature: Option<f64>,
}

/// Indicators of the bands `[0, 20), [20, 40), ..., [80, 100)` °F.
pub fn temperature_groups(feature: &str) -> Vec<GroupFunction> {
    (0..5)
        .map(|k| {
            let lo = 20.0 * k as f64;
            GroupFunction::new(
                format!("temp_{}_{}", lo as i64, lo as i64 + 20),
                GroupRule::Interval {
                    feature: feature.to_string(),
                    lo,
                    hi: lo + 20.0,
                },
            )
        })
        .collect()
}

pub fn load_gefcom_rows(path: &Path, opts: &GefcomOptions) -> Result<Vec<GefcomRow>, IngestError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    let ti = find_column(&headers, &[&opts.timestamp_col])?;
    let li = find_column(&headers, &[&opts.load_col])?;
    let ci = find_column(&headers, &[&opts.temperature_col])?;
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let timestamp = parse_timestamp(field(ti)).ok_or_else(|| IngestError::Parse {
            line: n + 2,
            message: format!("bad timestamp `{}`", field(ti)),
        })?;
        rows.push(GefcomRow {
            timestamp,
            load: field(li).parse().ok().filter(|v: &f64| v.is_finite()),
            temperature: field(ci).parse().ok().filter(|v: &f64| v.is_finite()),
        });
    }
    Ok(rows)
}

pub fn write_gefcom_csv(path: &Path, rows: &[GefcomRow]) -> Result<(), IngestError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
    writeln!(w, "timestamp,load,temperature").map_err(|e| io_err(path, e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            r.timestamp.format(TIMESTAMP_FORMAT),
            opt(r.load),
            opt(r.temperature)
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

const FALLBACK_LEVELS: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90,
    0.95,
];

/// Linear-interpolation sample quantile of sorted data.
fn sample_quantile(sorted: &[f64], level: f64) -> f64 {
    let h = level * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Seasonal empirical quantile forecasts: for each hour, the loads seen at the
/// same hour of week (and the hours either side) over the previous `weeks`
/// weeks. Timestamps without any such history are left out.
pub fn seasonal_quantile_table(
    loads: &[(NaiveDateTime, f64)],
    weeks: usize,
) -> Result<QuantileForecastTable, IngestError> {
    let by_time: HashMap<NaiveDateTime, f64> = loads.iter().copied().collect();
    let mut table = QuantileForecastTable::default();
    let mut sample = Vec::with_capacity(3 * weeks);
    for &(ts, _) in loads {
        sample.clear();
        for k in 1..=weeks as i64 {
            for dh in -1..=1 {
                if let Some(&v) = by_time.get(&(ts - Duration::hours(168 * k + dh))) {
                    sample.push(v);
                }
            }
        }
        if sample.is_empty() {
            continue;
        }
        sample.sort_by(f64::total_cmp);
        let values = FALLBACK_LEVELS.iter().map(|&a| sample_quantile(&sample, a)).collect();
        table.rows.insert(ts, QuantileRow::new(FALLBACK_LEVELS.to_vec(), values)?);
    }
    Ok(table)
}

/// Builds the stream from parsed rows. Rows missing load or temperature are
/// dropped and counted. Without a forecast table the seasonal fallback is
/// used, and hours with no history get baseline 0.5.
pub fn gefcom_from_rows(
    rows: &[GefcomRow],
    forecast: Option<&QuantileForecastTable>,
    opts: &GefcomOptions,
) -> Result<SampleStream, IngestError> {
    let mut stream = SampleStream::new("gefcom", LabelRange::unit());
    let kept: Vec<(NaiveDateTime, f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.timestamp, r.load?, r.temperature?)))
        .collect();
    stream.dropped = rows.len() - kept.len();
    let fallback;
    let (table, external) = match forecast {
        Some(t) => (t, true),
        None => {
            let loads: Vec<(NaiveDateTime, f64)> = kept.iter().map(|&(t, l, _)| (t, l)).collect();
            fallback = seasonal_quantile_table(&loads, opts.fallback_weeks.max(1))?;
            (&fallback, false)
        }
    };
    for &(ts, load, temp) in &kept {
        let baseline = match table.get(&ts) {
            Some(row) => 1.0 - interpolate_cdf(row, opts.threshold),
            None if external => return Err(IngestError::Misaligned(ts.format(TIMESTAMP_FORMAT).to_string())),
            None => 0.5,
        };
        let mut features = Features::new();
        features.insert("temperature".into(), FeatureValue::Num(temp));
        features.insert("hour".into(), FeatureValue::Num(ts.hour() as f64));
        stream.records.push(Record {
            timestamp: Some(ts),
            features,
            y: if load > opts.threshold { 1.0 } else { 0.0 },
            baseline: Some(baseline),
            group_values: Vec::new(),
        });
    }
    stream.set_groups(temperature_groups("temperature"))?;
    stream.validate()?;
    Ok(stream)
}

pub fn load_gefcom(
    load_path: &Path,
    forecast_path: Option<&Path>,
    opts: &GefcomOptions,
) -> Result<SampleStream, IngestError> {
    let rows = load_gefcom_rows(load_path, opts)?;
    let table = forecast_path.map(super::cdf::load_quantile_table).transpose()?;
    gefcom_from_rows(&rows, table.as_ref(), opts)
}

/// A year-long hourly series with the shape of regional utility data: a
/// seasonal and diurnal temperature cycle and a load that is convex in
/// temperature with a daily profile. Loads straddle 150 MW for much of the
/// year.
pub fn synth_gefcom_rows(seed: u64, hours: usize) -> Vec<GefcomRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let temp_noise = Normal::new(0.0, 1.2).expect("valid normal");
    let load_noise = Normal::new(0.0, 7.0).expect("valid normal");
    let start = NaiveDate::from_ymd_opt(2011, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let tau = std::f64::consts::TAU;
    let mut ar = 0.0;
    (0..hours)
        .map(|h| {
            let ts = start + Duration::hours(h as i64);
            let doy = ts.ordinal0() as f64;
            let hour = ts.hour() as f64;
            ar = 0.95 * ar + temp_noise.sample(&mut rng);
            let temp = 55.0 - 24.0 * (tau * (doy - 15.0) / 365.0).cos() + 8.0 * (tau * (hour - 9.0) / 24.0).sin() + ar;
            let daily = (std::f64::consts::PI * (hour - 6.0) / 16.0).sin().max(0.0);
            let weekday = if ts.weekday().num_days_from_monday() < 5 { 8.0 } else { 0.0 };
            let load = 95.0 + 0.03 * (temp - 60.0).powi(2) + 30.0 * daily + weekday + load_noise.sample(&mut rng);
            GefcomRow {
                timestamp: ts,
                load: Some(load),
                temperature: Some(temp),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(h: i64) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2012, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap() + Duration::hours(h)
    }

    #[test]
    fn threshold_is_strict_and_bands_half_open() {
        let rows = vec![
            GefcomRow { timestamp: ts(0), load: Some(150.0), temperature: Some(20.0) },
            GefcomRow { timestamp: ts(1), load: Some(150.1), temperature: Some(19.99) },
            GefcomRow { timestamp: ts(2), load: Some(140.0), temperature: None },
        ];
        let mut table = QuantileForecastTable::default();
        for h in 0..3 {
            table.rows.insert(ts(h), QuantileRow::new(vec![0.1, 0.9], vec![160.0, 200.0]).unwrap());
        }
        let s = gefcom_from_rows(&rows, Some(&table), &GefcomOptions::default()).unwrap();
        assert_eq!(s.dropped, 1);
        assert_eq!(s.records[0].y, 0.0);
        assert_eq!(s.records[1].y, 1.0);
        assert_eq!(s.records[0].group_values, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.records[1].group_values, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        // every forecast above the threshold: CDF is zero there
        assert_eq!(s.records[0].baseline, Some(1.0));
    }

    #[test]
    fn missing_forecast_row_is_an_error() {
        let rows = vec![GefcomRow { timestamp: ts(0), load: Some(100.0), temperature: Some(50.0) }];
        let table = QuantileForecastTable::default();
        assert!(matches!(
            gefcom_from_rows(&rows, Some(&table), &GefcomOptions::default()),
            Err(IngestError::Misaligned(_))
        ));
    }

    #[test]
    fn synthetic_year_roundtrips_through_csv() {
        let rows = synth_gefcom_rows(1, 24 * 60);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("load.csv");
        write_gefcom_csv(&p, &rows).unwrap();
        let back = load_gefcom_rows(&p, &GefcomOptions::default()).unwrap();
        assert_eq!(back.len(), rows.len());
        let s = load_gefcom(&p, None, &GefcomOptions::default()).unwrap();
        assert_eq!(s.len(), rows.len());
        let frac = s.labels().iter().sum::<f64>() / s.len() as f64;
        assert!(frac > 0.02 && frac < 0.98, "exceedance fraction {frac}");
        // no history in the first week, so those hours get 0.5
        assert_eq!(s.records[0].baseline, Some(0.5));
        assert_ne!(s.records[24 * 14].baseline, Some(0.5));
    }

    #[test]
    fn sample_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sample_quantile(&v, 0.5), 3.0);
        assert_eq!(sample_quantile(&v, 0.25), 2.0);
        assert_eq!(sample_quantile(&[7.0], 0.9), 7.0);
    }
}
