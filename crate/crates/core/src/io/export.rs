use std::fmt::Write as _;
use std::path::Path;

use super::files::{write_design, write_reconstruction};
use super::{bad_data, meta_field, num, read_meta, read_text, write_text};
use crate::error::{Error, Result};
use crate::functionals::ErrorMetrics;
use crate::optimizer::{SolveReport, StepRecord};
use crate::scalar::Real;

/// Writes `beta,iters,d,r,e2`, one row per continuation step.
pub fn write_metrics<T: Real>(path: &Path, steps: &[StepRecord<T>]) -> Result<()> {
    let mut text = String::from("beta,iters,d,r,e2\n");
    for s in steps {
        let m = &s.metrics;
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            num(s.beta.as_f64()),
            s.iterations,
            num(m.d.as_f64()),
            num(m.r.as_f64()),
            num(m.e2.as_f64())
        );
    }
    write_text(path, &text)
}

/// Rows of a metrics file as `(beta, iters, metrics)`.
pub fn read_metrics(path: &Path) -> Result<Vec<(f64, usize, ErrorMetrics<f64>)>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "beta,iters,d,r,e2" => {}
        _ => return Err(bad_data(path, 1, "expected header `beta,iters,d,r,e2`")),
    }
    lines
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 5 {
                return Err(bad_data(path, i + 1, "expected 5 columns"));
            }
            let f = |c: &str| c.parse::<f64>().map_err(|e| bad_data(path, i + 1, e));
            let iters = cells[1].parse::<usize>().map_err(|e| bad_data(path, i + 1, e))?;
            let m = ErrorMetrics { d: f(cells[2])?, r: f(cells[3])?, e2: f(cells[4])? };
            Ok((f(cells[0])?, iters, m))
        })
        .collect()
}

/// Summary of a solve as stored in `report.meta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportMeta {
    pub beta_star: f64,
    pub d: f64,
    pub r: f64,
    pub e2: f64,
    pub total_iters: usize,
    pub wall_seconds: f64,
}

impl ReportMeta {
    pub fn from_report<T: Real>(report: &SolveReport<T>) -> Self {
        let best = report.best();
        Self {
            beta_star: best.beta.as_f64(),
            d: best.metrics.d.as_f64(),
            r: best.metrics.r.as_f64(),
            e2: best.metrics.e2.as_f64(),
            total_iters: report.total_iterations,
            wall_seconds: report.wall_seconds,
        }
    }
}

pub fn write_report_meta(path: &Path, meta: &ReportMeta) -> Result<()> {
    let text = format!(
        "beta_star={}\nd={}\nr={}\ne2={}\ntotal_iters={}\nwall_seconds={}\n",
        num(meta.beta_star),
        num(meta.d),
        num(meta.r),
        num(meta.e2),
        meta.total_iters,
        num(meta.wall_seconds)
    );
    write_text(path, &text)
}

pub fn read_report_meta(path: &Path) -> Result<ReportMeta> {
    let m = read_meta(path)?;
    Ok(ReportMeta {
        beta_star: meta_field(&m, path, "beta_star")?,
        d: meta_field(&m, path, "d")?,
        r: meta_field(&m, path, "r")?,
        e2: meta_field(&m, path, "e2")?,
        total_iters: meta_field(&m, path, "total_iters")?,
        wall_seconds: meta_field(&m, path, "wall_seconds")?,
    })
}

/// Writes `recon_x.csv`, `recon_y.csv`, `design.csv` (+ `design.meta`),
/// `metrics.csv` and `report.meta` into `dir`, creating it if needed.
///
/// The reconstruction and design are those of the best step `β*`, whose
/// row in `metrics.csv` carries the same numbers as `report.meta`.
pub fn export_reconstruction<T: Real>(report: &SolveReport<T>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_reconstruction(&dir.join("recon_x.csv"), &report.best_signal, "t")?;
    write_reconstruction(&dir.join("recon_y.csv"), &report.best_image, "s")?;
    write_design(&dir.join("design.csv"), &report.best_design)?;
    write_metrics(&dir.join("metrics.csv"), &report.steps)?;
    write_report_meta(&dir.join("report.meta"), &ReportMeta::from_report(report))
}
