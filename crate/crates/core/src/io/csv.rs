use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{FrameMetrics, MetricReport};

pub const METRIC_HEADER: [&str; 5] = ["frame", "aepe", "aae", "div_mean", "div_max"];

fn csv_error(path: &Path, e: ::csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        ::csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Format {
            path: path.to_path_buf(),
            offset,
            message: format!("{kind:?}"),
        },
    }
}

/// Writes a header row and numeric rows. Numbers use the shortest text that
/// parses back to the same value.
pub fn write_table<R, I, T>(path: impl AsRef<Path>, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = T>,
    T: ToString,
{
    let path = path.as_ref();
    let mut w = ::csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        let rec: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        if rec.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metric_report(path: impl AsRef<Path>, report: &MetricReport) -> Result<()> {
    let rows = report.frames.iter().map(|f| {
        [
            f.frame.to_string(),
            f.aepe.to_string(),
            f.aae.to_string(),
            f.div_mean.to_string(),
            f.div_max.to_string(),
        ]
    });
    write_table(path, &METRIC_HEADER, rows)
}

/// Reads a report written by [`write_metric_report`]. Whether it was
/// normalized is not recorded in the file; pass it along.
pub fn read_metric_report(path: impl AsRef<Path>, normalized: bool) -> Result<MetricReport> {
    let path = path.as_ref();
    let mut r = ::csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(METRIC_HEADER) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("header must be {}", METRIC_HEADER.join(",")),
        });
    }
    let mut frames = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let offset = rec.position().map_or(0, |p| p.byte());
        let bad = |field: &str| Error::Format {
            path: path.to_path_buf(),
            offset,
            message: format!("cannot parse {field}"),
        };
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(METRIC_HEADER[i]));
        frames.push(FrameMetrics {
            frame: rec[0].parse().map_err(|_| bad("frame"))?,
            aepe: num(1)?,
            aae: num(2)?,
            div_mean: num(3)?,
            div_max: num(4)?,
        });
    }
    Ok(MetricReport { frames, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let report = MetricReport {
            frames: (0..3)
                .map(|i| FrameMetrics {
                    frame: i,
                    aepe: 0.1 * i as f64 + 1e-17,
                    aae: 3.0 / 7.0,
                    div_mean: 1e-9,
                    div_max: 2.5,
                })
                .collect(),
            normalized: false,
        };
        write_metric_report(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("frame,aepe,aae,div_mean,div_max\n0,"));
        assert_eq!(read_metric_report(&path, false).unwrap(), report);
        assert!(write_table(&path, &["a", "b"], [[1.0]]).is_err());
        std::fs::write(&path, "frame,aepe\n").unwrap();
        assert!(matches!(read_metric_report(&path, false), Err(Error::Format { .. })));
    }
}
