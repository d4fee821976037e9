//! Self-describing columnar text files for observations and ground truths.
//!
//! ```text
//! # n_sensors = 256
//! # seed = 7
//! # columns: re im theta
//! 0.12 -0.5 0.03
//! ...
//! ```
//!
//! Metadata lines are `# key = value`; the `# columns:` line names the
//! whitespace-separated numeric columns that follow.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::GroundTruth;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnarFile {
    /// Metadata in file order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ColumnarFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut text = String::new();
        for (k, v) in &self.meta {
            text.push_str(&format!("# {k} = {v}\n"));
        }
        text.push_str(&format!("# columns: {}\n", self.columns.join(" ")));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            text.push_str(&cells.join(" "));
            text.push('\n');
        }
        text
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut file = ColumnarFile::default();
        let mut have_columns = false;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(cols) = comment.strip_prefix("columns:") {
                    file.columns = cols.split_whitespace().map(String::from).collect();
                    have_columns = true;
                } else if let Some((k, v)) = comment.split_once('=') {
                    file.meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if !have_columns {
                return Err(err(no + 1, "data before the `# columns:` line".into()));
            }
            let row = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| err(no + 1, e.to_string()))?;
            if row.len() != file.columns.len() {
                return Err(err(
                    no + 1,
                    format!(
                        "expected {} columns, found {}",
                        file.columns.len(),
                        row.len()
                    ),
                ));
            }
            file.rows.push(row);
        }
        if !have_columns {
            return Err(err(1, "missing `# columns:` line".into()));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    fn require(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        self.column(name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("missing column `{name}`"),
        })
    }
}

/// Writes to `<path>.tmp` and renames it over `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes)
        .and_then(|_| file.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// One line per sensor: `re im theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub meta: Vec<(String, String)>,
    pub y: Vec<Complex64>,
    /// True phase per sensor; zeros when unknown.
    pub theta: Vec<f64>,
}

impl ObservationRecord {
    pub fn write(&self, path: &Path) -> Result<()> {
        if self.y.len() != self.theta.len() {
            return Err(Error::dimension(format!(
                "observation has {} samples but {} phases",
                self.y.len(),
                self.theta.len()
            )));
        }
        ColumnarFile {
            meta: self.meta.clone(),
            columns: vec!["re".into(), "im".into(), "theta".into()],
            rows: self
                .y
                .iter()
                .zip(&self.theta)
                .map(|(y, t)| vec![y.re, y.im, *t])
                .collect(),
        }
        .write(path)
    }

    /// The `theta` column is optional on input.
    pub fn read(path: &Path) -> Result<Self> {
        let file = ColumnarFile::read(path)?;
        let re = file.require("re", path)?;
        let im = file.require("im", path)?;
        let theta = file.column("theta").unwrap_or_else(|| vec![0.0; re.len()]);
        Ok(Self {
            y: re
                .iter()
                .zip(&im)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect(),
            theta,
            meta: file.meta,
        })
    }
}

/// One line per atom (`re im`), with the support listed in the header.
pub fn write_truth(path: &Path, meta: &[(String, String)], truth: &GroundTruth) -> Result<()> {
    let mut meta = meta.to_vec();
    let support: Vec<String> = truth.support.iter().map(|i| i.to_string()).collect();
    meta.push(("support".into(), support.join(" ")));
    ColumnarFile {
        meta,
        columns: vec!["re".into(), "im".into()],
        rows: truth.z.iter().map(|z| vec![z.re, z.im]).collect(),
    }
    .write(path)
}

/// Reads `z` and its support; `theta` of the returned truth is empty.
pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let file = ColumnarFile::read(path)?;
    let re = file.require("re", path)?;
    let im = file.require("im", path)?;
    let z: Vec<Complex64> = re
        .iter()
        .zip(&im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    let support = match file.meta("support") {
        Some(s) => s
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .ok()
                    .filter(|&i| i < z.len())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: 1,
                        msg: format!("bad support index `{t}`"),
                    })
            })
            .collect::<Result<Vec<_>>>()?,
        None => (0..z.len())
            .filter(|&i| z[i] != Complex64::new(0.0, 0.0))
            .collect(),
    };
    Ok(GroundTruth {
        z,
        support,
        theta: Vec::new(),
    })
}
