//! Minimal CSV output. Fields are numbers, ids and fixed labels, none of
//! which contain commas, quotes or newlines, so no quoting is needed.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct Table {
    header: &'static [&'static str],
    body: String,
}

impl Table {
    pub fn new(header: &'static [&'static str]) -> Self {
        let mut body = header.join(",");
        body.push('\n');
        Table { header, body }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        debug_assert_eq!(fields.len(), self.header.len());
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            let s = f.to_string();
            debug_assert!(!s.contains([',', '"', '\n']), "{s}");
            self.body.push_str(&s);
        }
        self.body.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.body
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, &self.body).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Header of every statistics table.
pub const METRIC_HEADER: &[&str] = &["config", "statistic", "bucket_lo", "bucket_hi", "value"];

/// Appends a statistic without a bucket.
pub fn scalar(t: &mut Table, config: &str, statistic: &str, value: impl Display) {
    t.row(&[&config, &statistic, &"", &"", &value]);
}

/// Appends a bucketed statistic.
pub fn bucket(t: &mut Table, config: &str, statistic: &str, lo: f64, hi: f64, value: impl Display) {
    t.row(&[&config, &statistic, &lo, &hi, &value]);
}

/// Plain decimal with at least 12 significant digits.
pub fn energy(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.11}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}
