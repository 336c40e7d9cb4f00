use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{require_file, write_atomic};

use super::Motif;

/// Writes motifs as CSV with header
/// `consumer_id,method,source_day_index,sp_value,v0,...,v{m-1}`.
pub fn write_motifs(path: &Path, motifs: &[Motif]) -> Result<()> {
    let m = motifs.first().map_or(0, |x| x.values.len());
    if let Some(bad) = motifs.iter().find(|x| x.values.len() != m) {
        return Err(Error::usage(format!(
            "motif for {} has {} values, expected {m}",
            bad.consumer_id,
            bad.values.len()
        )));
    }
    write_atomic(path, |w| {
        write!(w, "consumer_id,method,source_day_index,sp_value")?;
        for k in 0..m {
            write!(w, ",v{k}")?;
        }
        writeln!(w)?;
        for x in motifs {
            write!(w, "{},{},{},{}", x.consumer_id, x.method, x.source_day_index, x.sp_value)?;
            for v in &x.values {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

pub fn read_motifs(path: &Path) -> Result<Vec<Motif>> {
    require_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let fixed = ["consumer_id", "method", "source_day_index", "sp_value"];
    let bad_header = headers.len() < fixed.len()
        || headers.iter().zip(fixed).any(|(h, f)| h != f)
        || headers.iter().skip(4).enumerate().any(|(k, h)| h != format!("v{k}"));
    if bad_header {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected motif file header".into(),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let values = record
            .iter()
            .skip(4)
            .map(|v| v.parse::<f64>().map_err(|_| err("motif value")))
            .collect::<Result<Vec<_>>>()?;
        out.push(Motif {
            consumer_id: record[0].to_string(),
            method: record[1].parse().map_err(|_| err("method"))?,
            source_day_index: record[2].parse().map_err(|_| err("source_day_index"))?,
            sp_value: record[3].parse().map_err(|_| err("sp_value"))?,
            values,
        });
    }
    Ok(out)
}
