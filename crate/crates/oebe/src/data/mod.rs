//! Data ingestion, standardization, synthetic stream generators, and
//! streaming metrics.

mod generators;
mod metrics;

pub use generators::{
    gen_drift, gen_friedman, gen_interleaved_clusters, DriftSchedule, FriedmanVariant,
    FRIEDMAN1_NOISE_STD, FRIEDMAN2_NOISE_STD,
};
pub use metrics::{compute_regret_bound, population_variance, ClassificationTrace, MetricTrace};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation of the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub x: Vec<f64>,
    pub y: f64,
    pub t: usize,
}

/// Which CSV column holds the regression target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

/// Reads a numeric CSV into records, preserving file order. No shuffling:
/// the online protocol consumes rows as stored.
pub fn load_csv(path: &Path, target: &TargetColumn, has_header: bool) -> Result<Vec<StreamRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)?;

    let target_index = match target {
        TargetColumn::Index(i) => *i,
        TargetColumn::Name(name) => {
            if !has_header {
                return Err(Error::Config(format!(
                    "target column '{name}' requires a header row"
                )));
            }
            let headers = reader.headers()?.clone();
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("target column '{name}' not found")))?
        }
    };

    let header_offset = usize::from(has_header);
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_number = i + 1 + header_offset;
        if target_index >= row.len() {
            return Err(Error::CsvParse {
                row: row_number,
                column: format!("{target_index}"),
                reason: format!("row has only {} columns", row.len()),
            });
        }
        let mut x = Vec::with_capacity(row.len() - 1);
        let mut y = 0.0;
        for (j, field) in row.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::CsvParse {
                row: row_number,
                column: format!("{j}"),
                reason: if field.trim().is_empty() {
                    "missing value".into()
                } else {
                    format!("cannot parse {field:?} as a number")
                },
            })?;
            if j == target_index {
                y = value;
            } else {
                x.push(value);
            }
        }
        records.push(StreamRecord { x, y, t: i });
    }
    Ok(records)
}

/// Affine standardization fitted on the first `window` records and applied to
/// the whole stream. Input dimensions with zero variance over the window are
/// dropped; the surviving dimensions and the target are centered and scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub kept_dims: Vec<usize>,
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
    /// Number of records the statistics were computed from.
    pub window: usize,
}

const ZERO_STD: f64 = 1e-12;

impl Standardizer {
    /// Fits on the first `min(window, len)` records. Statistics are computed
    /// once and never updated.
    pub fn fit(records: &[StreamRecord], window: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Config("cannot standardize an empty stream".into()));
        }
        let n = window.min(records.len());
        let dim = records[0].x.len();
        let nf = n as f64;

        let mut x_mean = vec![0.0; dim];
        let mut y_mean = 0.0;
        for r in &records[..n] {
            for (m, &v) in x_mean.iter_mut().zip(&r.x) {
                *m += v;
            }
            y_mean += r.y;
        }
        for m in &mut x_mean {
            *m /= nf;
        }
        y_mean /= nf;

        let mut x_var = vec![0.0; dim];
        let mut y_var = 0.0;
        for r in &records[..n] {
            for ((v, &mean), &value) in x_var.iter_mut().zip(&x_mean).zip(&r.x) {
                let d = value - mean;
                *v += d * d;
            }
            let d = r.y - y_mean;
            y_var += d * d;
        }

        let mut kept_dims = Vec::new();
        let mut kept_mean = Vec::new();
        let mut kept_std = Vec::new();
        for d in 0..dim {
            let std = (x_var[d] / nf).sqrt();
            if std > ZERO_STD {
                kept_dims.push(d);
                kept_mean.push(x_mean[d]);
                kept_std.push(std);
            }
        }
        if kept_dims.is_empty() {
            return Err(Error::Config(
                "all input dimensions have zero variance over the pretraining window".into(),
            ));
        }
        let y_std = (y_var / nf).sqrt().max(ZERO_STD);
        Ok(Self {
            kept_dims,
            x_mean: kept_mean,
            x_std: kept_std,
            y_mean,
            y_std,
            window: n,
        })
    }

    pub fn apply(&self, record: &StreamRecord) -> StreamRecord {
        let x = self
            .kept_dims
            .iter()
            .enumerate()
            .map(|(k, &d)| (record.x[d] - self.x_mean[k]) / self.x_std[k])
            .collect();
        StreamRecord {
            x,
            y: (record.y - self.y_mean) / self.y_std,
            t: record.t,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.kept_dims.len()
    }
}

/// Fits a standardizer on the first `window` records and transforms the whole
/// stream with it (the window included).
pub fn standardize(
    records: &[StreamRecord],
    window: usize,
) -> Result<(Vec<StreamRecord>, Standardizer)> {
    let standardizer = Standardizer::fit(records, window)?;
    let transformed = records.iter().map(|r| standardizer.apply(r)).collect();
    Ok((transformed, standardizer))
}

/// Like [`standardize`] but leaves the target untouched; used for
/// classification streams whose targets are labels.
pub fn standardize_inputs(
    records: &[StreamRecord],
    window: usize,
) -> Result<(Vec<StreamRecord>, Standardizer)> {
    let mut standardizer = Standardizer::fit(records, window)?;
    standardizer.y_mean = 0.0;
    standardizer.y_std = 1.0;
    let transformed = records.iter().map(|r| standardizer.apply(r)).collect();
    Ok((transformed, standardizer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_with_trailing_target_column() {
        let tmp = write_temp("a,b,y\n1,2,3\n4,5,6\n");
        let records = load_csv(tmp.path(), &TargetColumn::Name("y".into()), true).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].x, vec![1.0, 2.0]);
        assert_eq!(records[0].y, 3.0);
        assert_eq!(records[1].t, 1);
    }

    #[test]
    fn empty_csv_yields_empty_stream() {
        let tmp = write_temp("");
        let records = load_csv(tmp.path(), &TargetColumn::Index(0), false).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let tmp = write_temp("1,2\n3,oops\n");
        let err = load_csv(tmp.path(), &TargetColumn::Index(1), false).unwrap_err();
        match err {
            Error::CsvParse { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "1");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_value_is_rejected() {
        let tmp = write_temp("1,2\n3,\n");
        assert!(load_csv(tmp.path(), &TargetColumn::Index(0), false).is_err());
    }

    fn synthetic_records(n: usize) -> Vec<StreamRecord> {
        (0..n)
            .map(|t| StreamRecord {
                x: vec![t as f64, 7.0, (t as f64).sin()],
                y: 2.0 * t as f64 + 1.0,
                t,
            })
            .collect()
    }

    #[test]
    fn constant_dimension_is_dropped() {
        let (out, std) = standardize(&synthetic_records(100), 50).unwrap();
        assert_eq!(std.kept_dims, vec![0, 2]);
        assert_eq!(out[0].x.len(), 2);
    }

    #[test]
    fn window_statistics_are_centered_and_unit_scale() {
        let (out, std) = standardize(&synthetic_records(200), 100).unwrap();
        assert_eq!(std.window, 100);
        for k in 0..std.output_dim() {
            let vals: Vec<f64> = out[..100].iter().map(|r| r.x[k]).collect();
            let mean = vals.iter().sum::<f64>() / 100.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 100.0;
            assert_relative_eq!(mean, 0.0, epsilon = 1e-10);
            assert_relative_eq!(var, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn standardization_is_idempotent() {
        let (once, _) = standardize(&synthetic_records(300), 100).unwrap();
        let (twice, second) = standardize(&once, 100).unwrap();
        // Already standardized: second pass must be a near-identity.
        assert_relative_eq!(second.y_mean, 0.0, epsilon = 1e-10);
        assert_relative_eq!(second.y_std, 1.0, max_relative = 1e-10);
        for (a, b) in once.iter().zip(&twice) {
            for (u, v) in a.x.iter().zip(&b.x) {
                assert_relative_eq!(u, v, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn short_stream_uses_full_length() {
        let (_, std) = standardize(&synthetic_records(30), 1000).unwrap();
        assert_eq!(std.window, 30);
    }
}
