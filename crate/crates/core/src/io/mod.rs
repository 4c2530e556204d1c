//! Plain-text file formats, run configuration and result export.
//!
//! Every number is written with 17 significant digits, which round-trips
//! `f64` (and `f32`) values bitwise.

mod config;
mod export;
mod files;

pub use config::{parse_config, parse_mode, RunConfig};
pub use export::{export_reconstruction, read_metrics, read_report_meta, write_metrics, write_report_meta, ReportMeta};
pub use files::{
    read_complex_signal, read_design, read_kernel, read_real_signal, write_complex_signal, write_design, write_kernel,
    write_meta, write_real_signal,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Full-precision scientific formatting shared by all writers.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn bad_data(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidData(format!("{}:{line}: {msg}", path.display()))
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad_data(path, i + 1, "expected `key=value`"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub(crate) fn meta_field<V: std::str::FromStr>(meta: &BTreeMap<String, String>, path: &Path, key: &str) -> Result<V> {
    let raw = meta.get(key).ok_or_else(|| Error::InvalidData(format!("{}: missing `{key}`", path.display())))?;
    raw.parse().map_err(|_| Error::InvalidData(format!("{}: cannot parse `{key}={raw}`", path.display())))
}
