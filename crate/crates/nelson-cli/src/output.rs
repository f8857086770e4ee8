//! CSV and manifest emission. Floats are written as `{:.12e}` everywhere
//! so identical runs produce byte-identical files, which is what the
//! reproducibility checks compare.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

pub struct CsvWriter {
    buf: String,
    columns: usize,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        CsvWriter {
            buf: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    /// One row of preformatted cells; count must match the header.
    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "csv row width");
        let _ = writeln!(self.buf, "{}", cells.join(","));
    }

    pub fn write(self, path: &Path) -> Result<()> {
        fs::write(path, self.buf).with_context(|| format!("writing {}", path.display()))
    }
}

/// Run manifest: resolved parameters and summary values, one `key = value`
/// per line, written alongside the data files.
pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(mode: &str) -> Self {
        Manifest {
            lines: vec![("mode".into(), mode.into())],
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    pub fn set_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.set(key, fmt_f64(value))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut buf = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(buf, "{k} = {v}");
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}
