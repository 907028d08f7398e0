//! Column-oriented activation-loss records and their CSV form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::SyntheticConfig;

pub const CSV_HEADER: [&str; 5] = ["t_hours", "i_a_per_cm2", "b_mv_per_dec", "i0_a_per_cm2", "eta_act_mv"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", content = "config", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub t_hours: Vec<f64>,
    pub i: Vec<f64>,
    pub b: Vec<f64>,
    pub i0: Vec<f64>,
    pub eta_act: Vec<f64>,
    pub source: DatasetSource,
}

impl Dataset {
    pub fn with_capacity(n: usize, source: DatasetSource) -> Self {
        Dataset {
            t_hours: Vec::with_capacity(n),
            i: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            i0: Vec::with_capacity(n),
            eta_act: Vec::with_capacity(n),
            source,
        }
    }

    pub fn push(&mut self, t: f64, i: f64, b: f64, i0: f64, eta: f64) {
        self.t_hours.push(t);
        self.i.push(i);
        self.b.push(b);
        self.i0.push(i0);
        self.eta_act.push(eta);
    }

    pub fn len(&self) -> usize {
        self.t_hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_hours.is_empty()
    }

    /// Checks equal column lengths, finiteness and strictly increasing time.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let n = self.len();
        for (name, col) in [
            ("i", &self.i),
            ("b", &self.b),
            ("i0", &self.i0),
            ("eta_act", &self.eta_act),
        ] {
            if col.len() != n {
                return Err(DatasetError::Invalid(format!(
                    "column {name} has {} rows, expected {n}",
                    col.len()
                )));
            }
        }
        for cols in [&self.t_hours, &self.i, &self.b, &self.i0, &self.eta_act] {
            if let Some(k) = cols.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::Invalid(format!("non-finite value at row {k}")));
            }
        }
        if let Some(k) = self.t_hours.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DatasetError::Invalid(format!(
                "t_hours not strictly increasing at row {}",
                k + 1
            )));
        }
        Ok(())
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let pick = |col: &Vec<f64>| indices.iter().map(|&k| col[k]).collect();
        Dataset {
            t_hours: pick(&self.t_hours),
            i: pick(&self.i),
            b: pick(&self.b),
            i0: pick(&self.i0),
            eta_act: pick(&self.eta_act),
            source: self.source.clone(),
        }
    }

    /// `(b, i, i0)` feature rows.
    pub fn tafel_features(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|k| vec![self.b[k], self.i[k], self.i0[k]])
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for k in 0..self.len() {
            w.write_record([self.t_hours[k], self.i[k], self.b[k], self.i0[k], self.eta_act[k]].map(fmt_full))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DatasetError> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != CSV_HEADER {
            return Err(DatasetError::Invalid(format!("unexpected header {header:?}")));
        }
        let mut ds = Dataset::with_capacity(0, DatasetSource::External);
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(DatasetError::Invalid(format!("row {k} has {} fields", rec.len())));
            }
            let mut v = [0.0; 5];
            for (slot, field) in v.iter_mut().zip(rec.iter()) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| DatasetError::Invalid(format!("row {k}: cannot parse {field:?}")))?;
            }
            ds.push(v[0], v[1], v[2], v[3], v[4]);
        }
        ds.validate()?;
        Ok(ds)
    }

    /// Writes `<path>` (CSV) and `<path>.json` (source echo).
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        self.write_csv(File::create(path)?)?;
        let sidecar = sidecar_path(path);
        let mut f = File::create(sidecar)?;
        serde_json::to_writer_pretty(&mut f, &self.source)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Reads a CSV and, when present, its sidecar source echo.
    pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
        let mut ds = Dataset::read_csv(File::open(path)?)?;
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            ds.source = serde_json::from_reader(File::open(sidecar)?)?;
        }
        Ok(ds)
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{generate_synthetic_dataset, SyntheticConfig};

    #[test]
    fn csv_roundtrip_is_exact() {
        let cfg = SyntheticConfig {
            hours: 200,
            ..Default::default()
        };
        let ds = generate_synthetic_dataset(&cfg).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_hours,i_a_per_cm2,b_mv_per_dec,i0_a_per_cm2,eta_act_mv\n"));
        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back.eta_act, ds.eta_act);
        assert_eq!(back.i0, ds.i0);
        assert_eq!(back.source, DatasetSource::External);
    }

    #[test]
    fn save_load_keeps_source() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = generate_synthetic_dataset(&SyntheticConfig {
            hours: 50,
            ..Default::default()
        })
        .unwrap();
        ds.save(&path).unwrap();
        assert!(dir.path().join("d.csv.json").exists());
        assert_eq!(Dataset::load(&path).unwrap(), ds);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_header = "t,i,b,i0,eta\n0,1,1,1,1\n";
        assert!(Dataset::read_csv(bad_header.as_bytes()).is_err());
        let unsorted = "t_hours,i_a_per_cm2,b_mv_per_dec,i0_a_per_cm2,eta_act_mv\n1,1,1,1,1\n0,1,1,1,1\n";
        assert!(Dataset::read_csv(unsorted.as_bytes()).is_err());
        let garbage = "t_hours,i_a_per_cm2,b_mv_per_dec,i0_a_per_cm2,eta_act_mv\n0,x,1,1,1\n";
        assert!(Dataset::read_csv(garbage.as_bytes()).is_err());
    }
}
