//! Sample streams from files and synthetic generators.

mod cdf;
mod compas;
mod gefcom;
mod synthetic;

pub use cdf::{interpolate_cdf, load_quantile_table, QuantileForecastTable, QuantileRow};
pub use compas::{compas_groups, load_compas, COMPAS_CUTOFF};
pub use gefcom::{
    gefcom_from_rows, load_gefcom, load_gefcom_rows, seasonal_quantile_table, synth_gefcom_rows,
    temperature_groups, write_gefcom_csv, GefcomOptions, GefcomRow,
};
pub use synthetic::{
    gen_jump_shift, gen_switch, jump_shift_path, GroupMode, JumpShiftPath, ShiftScenario, ShiftSetting,
};

use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::objectives::{FeatureValue, Features, GroupFunction, LabelRange, ObjectiveError};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no forecast row for timestamp {0}")]
    Misaligned(String),
    #[error("invalid stream: {0}")]
    Invalid(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Group(#[from] ObjectiveError),
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let f = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(f))
}

/// Index of the first header equal to one of `names`.
pub(crate) fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Result<usize, IngestError> {
    names
        .iter()
        .find_map(|n| headers.iter().position(|h| h == *n))
        .ok_or_else(|| IngestError::MissingColumn(names.join("|")))
}

/// Parses ISO-8601 date-times, with or without a time component.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    for fmt in [TIMESTAMP_FORMAT, "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub timestamp: Option<NaiveDateTime>,
    pub features: Features,
    pub y: f64,
    pub baseline: Option<f64>,
    /// `f(x)` per group of the owning stream.
    pub group_values: Vec<f64>,
}

/// Ordered `(x, y, baseline, timestamp)` records plus the groups they were
/// evaluated against.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub name: String,
    pub records: Vec<Record>,
    pub groups: Vec<GroupFunction>,
    pub range: LabelRange,
    /// Input rows skipped during ingestion.
    pub dropped: usize,
}

impl SampleStream {
    pub fn new(name: impl Into<String>, range: LabelRange) -> Self {
        Self {
            name: name.into(),
            records: Vec::new(),
            groups: Vec::new(),
            range,
            dropped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_baseline(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.baseline.is_some())
    }

    pub fn labels(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    /// Replaces the group set and recomputes every record's group values.
    pub fn set_groups(&mut self, groups: Vec<GroupFunction>) -> Result<(), IngestError> {
        for r in &mut self.records {
            r.group_values = groups
                .iter()
                .map(|g| g.evaluate(&r.features))
                .collect::<Result<_, _>>()?;
        }
        self.groups = groups;
        Ok(())
    }

    /// Numeric feature vectors in the order of `names`.
    pub fn numeric_features(&self, names: &[String]) -> Result<Vec<Vec<f64>>, IngestError> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                names
                    .iter()
                    .map(|n| {
                        r.features
                            .get(n)
                            .and_then(FeatureValue::as_f64)
                            .ok_or_else(|| IngestError::Invalid(format!("record {i} has no numeric feature `{n}`")))
                    })
                    .collect()
            })
            .collect()
    }

    /// Checks ordering, label and baseline ranges, and group value shape.
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut last: Option<NaiveDateTime> = None;
        for (i, r) in self.records.iter().enumerate() {
            if let (Some(prev), Some(ts)) = (last, r.timestamp) {
                if ts < prev {
                    return Err(IngestError::Invalid(format!("timestamp decreases at record {i}")));
                }
            }
            if r.timestamp.is_some() {
                last = r.timestamp;
            }
            if !(r.y.is_finite() && self.range.contains(r.y)) {
                return Err(IngestError::Invalid(format!("label {} out of range at record {i}", r.y)));
            }
            if let Some(b) = r.baseline {
                if !(b.is_finite() && self.range.contains(b)) {
                    return Err(IngestError::Invalid(format!("baseline {b} out of range at record {i}")));
                }
            }
            if r.group_values.len() != self.groups.len() {
                return Err(IngestError::Invalid(format!("record {i} has stale group values")));
            }
        }
        Ok(())
    }

    /// Writes the canonical cache form: timestamp, y, baseline, one `g:<id>`
    /// column per group, then sorted feature columns.
    pub fn write_csv(&self, path: &Path) -> Result<(), IngestError> {
        let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let feature_names: Vec<&String> = self
            .records
            .first()
            .map(|r| r.features.keys().collect())
            .unwrap_or_default();
        let mut header = vec!["timestamp".to_string(), "y".into(), "baseline".into()];
        header.extend(self.groups.iter().map(|g| format!("g:{}", g.id)));
        header.extend(feature_names.iter().map(|n| format!("x:{n}")));
        writeln!(w, "{}", header.join(",")).map_err(|e| io_err(path, e))?;
        for r in &self.records {
            let mut row = vec![
                r.timestamp.map(|t| t.format(TIMESTAMP_FORMAT).to_string()).unwrap_or_default(),
                r.y.to_string(),
                r.baseline.map(|b| b.to_string()).unwrap_or_default(),
            ];
            row.extend(r.group_values.iter().map(|v| v.to_string()));
            for n in &feature_names {
                row.push(match r.features.get(*n) {
                    Some(FeatureValue::Num(v)) => v.to_string(),
                    Some(FeatureValue::Cat(s)) => s.clone(),
                    None => String::new(),
                });
            }
            writeln!(w, "{}", row.join(",")).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }
}
