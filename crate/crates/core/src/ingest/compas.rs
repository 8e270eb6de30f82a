//! The two-year recidivism CSV: labels, decile-score baseline, race groups.

use std::path::Path;

use chrono::NaiveDate;

use super::{find_column, open_csv, parse_timestamp, IngestError, Record, SampleStream};
use crate::objectives::{FeatureValue, Features, GroupFunction, GroupRule, LabelRange};

/// Screenings after this date are excluded: their two-year outcome window
/// runs past the end of data collection.
pub const COMPAS_CUTOFF: (i32, u32, u32) = (2014, 4, 1);

const RACES: [(&str, &str); 3] = [
    ("african_american", "African-American"),
    ("caucasian", "Caucasian"),
    ("hispanic", "Hispanic"),
];

pub fn compas_groups() -> Vec<GroupFunction> {
    RACES
        .iter()
        .map(|(id, value)| {
            GroupFunction::new(
                *id,
                GroupRule::Categorical {
                    feature: "race".into(),
                    value: (*value).into(),
                },
            )
        })
        .collect()
}

/// Loads the CSV, keeps screenings up to the cutoff date, and orders by
/// screening date (file order within a day). Rows with unparseable dates,
/// scores or labels are dropped and counted.
pub fn load_compas(path: &Path) -> Result<SampleStream, IngestError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    let race_i = find_column(&headers, &["race"])?;
    let score_i = find_column(&headers, &["decile_score"])?;
    let date_i = find_column(&headers, &["compas_screening_date", "screening_date"])?;
    let label_i = find_column(&headers, &["two_year_recid"])?;
    let (y, m, d) = COMPAS_CUTOFF;
    let cutoff = NaiveDate::from_ymd_opt(y, m, d).expect("valid cutoff");

    let mut stream = SampleStream::new("compas", LabelRange::unit());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let parsed = (|| {
            let ts = parse_timestamp(field(date_i))?;
            let score: f64 = field(score_i).parse().ok()?;
            let label: f64 = field(label_i).parse().ok()?;
            ((1.0..=10.0).contains(&score) && (label == 0.0 || label == 1.0)).then_some((ts, score, label))
        })();
        let Some((ts, score, label)) = parsed else {
            stream.dropped += 1;
            continue;
        };
        if ts.date() > cutoff {
            continue;
        }
        let mut features = Features::new();
        features.insert("race".into(), FeatureValue::Cat(field(race_i).to_string()));
        features.insert("decile_score".into(), FeatureValue::Num(score));
        rows.push(Record {
            timestamp: Some(ts),
            features,
            y: label,
            baseline: Some(score / 10.0),
            group_values: Vec::new(),
        });
    }
    // stable, so file order breaks ties
    rows.sort_by_key(|r| r.timestamp);
    stream.records = rows;
    stream.set_groups(compas_groups())?;
    stream.validate()?;
    Ok(stream)
}
