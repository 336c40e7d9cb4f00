//! Reading and writing the `consumer_id,timestamp,kwh` consumption CSV.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};
use crate::fsutil::{require_file, write_atomic};
use crate::series::ConsumerSeries;

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

/// Column mapping for consumption CSVs.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvSchema {
    pub consumer_column: String,
    pub timestamp_column: String,
    pub kwh_column: String,
    /// Used for consumers with a single row and, when set, enforced for all.
    pub interval_minutes: Option<u32>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            consumer_column: "consumer_id".into(),
            timestamp_column: "timestamp".into(),
            kwh_column: "kwh".into(),
            interval_minutes: None,
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMATS[0]).to_string()
}

fn parse_kwh(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Some(f64::NAN);
    }
    s.parse().ok()
}

struct Pending {
    start: NaiveDateTime,
    last: NaiveDateTime,
    interval: Option<Duration>,
    values: Vec<f64>,
}

/// Reads a consumption CSV into one series per consumer, in order of first
/// appearance. Values are kept verbatim; see [`crate::clean_series`].
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<ConsumerSeries>> {
    require_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (ci, ti, ki) = (
        column(&schema.consumer_column)?,
        column(&schema.timestamp_column)?,
        column(&schema.kwh_column)?,
    );
    let fixed = schema.interval_minutes.map(|m| Duration::minutes(m as i64));

    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let id = field(ci);
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty consumer_id".into(),
            });
        }
        let t = parse_timestamp(field(ti)).ok_or_else(|| Error::Parse {
            line,
            message: format!("bad timestamp `{}`", field(ti)),
        })?;
        let kwh = parse_kwh(field(ki)).ok_or_else(|| Error::Parse {
            line,
            message: format!("bad kwh value `{}`", field(ki)),
        })?;

        match pending.get_mut(id) {
            None => {
                order.push(id.to_string());
                pending.insert(
                    id.to_string(),
                    Pending {
                        start: t,
                        last: t,
                        interval: fixed,
                        values: vec![kwh],
                    },
                );
            }
            Some(p) => {
                let step = t - p.last;
                let interval = *p.interval.get_or_insert(step);
                if step != interval || step <= Duration::zero() {
                    return Err(Error::Structural(format!(
                        "consumer {id}: irregular interval at {} (line {line}); expected {} minutes after {}",
                        format_timestamp(t),
                        interval.num_minutes(),
                        format_timestamp(p.last),
                    )));
                }
                p.last = t;
                p.values.push(kwh);
            }
        }
    }

    order
        .into_iter()
        .map(|id| {
            let p = pending.remove(&id).expect("recorded consumer");
            let interval = p.interval.ok_or_else(|| {
                Error::Structural(format!(
                    "consumer {id}: a single row cannot determine the sampling interval"
                ))
            })?;
            let secs = interval.num_seconds();
            if secs % 60 != 0 {
                return Err(Error::Structural(format!(
                    "consumer {id}: interval of {secs} s is not a whole number of minutes"
                )));
            }
            Ok(ConsumerSeries::new(id, p.start, (secs / 60) as u32, p.values))
        })
        .collect()
}

/// Writes series in the ingest format. Timestamps advance by the interval
/// from each series' start time.
pub fn write_csv(path: &Path, series: &[ConsumerSeries]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "consumer_id,timestamp,kwh")?;
        for s in series {
            let step = Duration::minutes(s.interval_minutes as i64);
            let mut t = s.start_time;
            for v in &s.values {
                writeln!(w, "{},{},{}", s.consumer_id, format_timestamp(t), v)?;
                t += step;
            }
        }
        Ok(())
    })
}
