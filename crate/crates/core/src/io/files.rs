use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;

use super::{bad_data, meta_field, num, read_meta, read_text, write_text};
use crate::error::{Error, Result};
use crate::nurbs::{open_uniform_knots, KnotVector, NurbsDesign};
use crate::operator::{symmetrize_kernel, KernelGrid};
use crate::scalar::Real;
use crate::signal::{modulus, phase, ComplexSignal, RealSignal, SampleGrid};

/// Writes `key=value` lines.
pub fn write_meta(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        let _ = writeln!(text, "{k}={v}");
    }
    write_text(path, &text)
}

/// Writes a complex signal as `t,re,im`; `extended` adds `amp,phase` columns.
fn complex_csv<T: Real>(f: &ComplexSignal<T>, axis: &str, extended: bool) -> String {
    let mut text = String::with_capacity(64 * (f.len() + 1));
    text.push_str(axis);
    text.push_str(if extended { ",re,im,amp,phase\n" } else { ",re,im\n" });
    let (amp, ph) = (modulus(f), phase(f));
    for (i, (t, z)) in f.grid().nodes().zip(f.values()).enumerate() {
        let _ = write!(text, "{},{},{}", num(t.as_f64()), num(z.re.as_f64()), num(z.im.as_f64()));
        if extended {
            let _ = write!(text, ",{},{}", num(amp.values()[i].as_f64()), num(ph.values()[i].as_f64()));
        }
        text.push('\n');
    }
    text
}

pub fn write_complex_signal<T: Real>(path: &Path, f: &ComplexSignal<T>) -> Result<()> {
    write_text(path, &complex_csv(f, "t", false))
}

pub(crate) fn write_reconstruction<T: Real>(path: &Path, f: &ComplexSignal<T>, axis: &str) -> Result<()> {
    write_text(path, &complex_csv(f, axis, true))
}

pub fn write_real_signal<T: Real>(path: &Path, f: &RealSignal<T>) -> Result<()> {
    let mut text = String::from("t,value\n");
    for (t, v) in f.grid().nodes().zip(f.values()) {
        let _ = writeln!(text, "{},{}", num(t.as_f64()), num(v.as_f64()));
    }
    write_text(path, &text)
}

/// Numeric rows of a CSV file with one of the accepted headers.
fn read_table(path: &Path, headers: &[&str]) -> Result<(usize, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| bad_data(path, 1, "empty file"))?;
    let head = head.trim().replace(' ', "");
    let which = headers
        .iter()
        .position(|h| *h == head)
        .ok_or_else(|| bad_data(path, 1, format!("unexpected header `{head}`, expected one of {headers:?}")))?;
    let width = headers[which].split(',').count();
    let rows = lines
        .map(|(i, line)| {
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad_data(path, i + 1, e))?;
            if row.len() != width {
                return Err(bad_data(path, i + 1, format!("expected {width} columns, found {}", row.len())));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((which, rows))
}

/// Rebuilds the uniform grid from the first column.
fn grid_from_column<T: Real>(path: &Path, rows: &[Vec<f64>]) -> Result<SampleGrid<T>> {
    if rows.len() < 2 {
        return Err(bad_data(path, 2, "need at least two rows"));
    }
    let length = rows[rows.len() - 1][0];
    let grid = SampleGrid::new(rows.len(), T::lit(length))?;
    let tol = 1e-9 * length;
    for (i, row) in rows.iter().enumerate() {
        if (row[0] - grid.node(i).as_f64()).abs() > tol {
            return Err(bad_data(path, i + 2, "abscissae are not a uniform grid starting at 0"));
        }
    }
    Ok(grid)
}

const COMPLEX_HEADERS: [&str; 4] = ["t,re,im", "s,re,im", "t,re,im,amp,phase", "s,re,im,amp,phase"];

/// Reads `t,re,im` (also the `s` and reconstruction variants).
pub fn read_complex_signal<T: Real>(path: &Path) -> Result<ComplexSignal<T>> {
    let (_, rows) = read_table(path, &COMPLEX_HEADERS)?;
    let grid = grid_from_column(path, &rows)?;
    let values = rows.iter().map(|r| Complex::new(T::lit(r[1]), T::lit(r[2]))).collect();
    ComplexSignal::new(grid, values).map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
}

/// Reads `t,value`.
pub fn read_real_signal<T: Real>(path: &Path) -> Result<RealSignal<T>> {
    let (_, rows) = read_table(path, &["t,value", "s,value"])?;
    let grid = grid_from_column(path, &rows)?;
    RealSignal::new(grid, rows.iter().map(|r| T::lit(r[1])).collect())
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
}

/// Writes `kernel_re.csv`, `kernel_im.csv` and `kernel.meta` into `dir`.
pub fn write_kernel<T: Real>(dir: &Path, k: &KernelGrid<T>) -> Result<()> {
    let n = k.grid_count();
    let mut re = String::new();
    let mut im = String::new();
    for row in k.values().chunks(n) {
        let line = |part: fn(&Complex<T>) -> T| row.iter().map(|z| num(part(z).as_f64())).collect::<Vec<_>>().join(",");
        re.push_str(&line(|z| z.re));
        re.push('\n');
        im.push_str(&line(|z| z.im));
        im.push('\n');
    }
    write_text(&dir.join("kernel_re.csv"), &re)?;
    write_text(&dir.join("kernel_im.csv"), &im)?;
    write_meta(&dir.join("kernel.meta"), &[("N", n.to_string())])
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::with_capacity(rows * cols);
    let mut count = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let before = out.len();
        for cell in line.split(',') {
            out.push(cell.trim().parse::<f64>().map_err(|e| bad_data(path, i + 1, e))?);
        }
        if out.len() - before != cols {
            return Err(bad_data(path, i + 1, format!("expected {cols} columns, found {}", out.len() - before)));
        }
        count += 1;
    }
    if count != rows {
        return Err(bad_data(path, count, format!("expected {rows} rows, found {count}")));
    }
    Ok(out)
}

/// Reads a kernel directory and symmetrizes it.
pub fn read_kernel<T: Real>(dir: &Path) -> Result<KernelGrid<T>> {
    let meta_path = dir.join("kernel.meta");
    let n: usize = meta_field(&read_meta(&meta_path)?, &meta_path, "N")?;
    if n < 2 {
        return Err(Error::InvalidData(format!("{}: N must be ≥ 2", meta_path.display())));
    }
    let re = read_matrix(&dir.join("kernel_re.csv"), 2 * n - 1, n)?;
    let im = read_matrix(&dir.join("kernel_im.csv"), 2 * n - 1, n)?;
    let values = re.iter().zip(&im).map(|(&a, &b)| Complex::new(T::lit(a), T::lit(b))).collect();
    let k = KernelGrid::new(n, values).map_err(|e| Error::InvalidData(format!("{}: {e}", dir.display())))?;
    Ok(symmetrize_kernel(&k))
}

/// Writes `j,u,v,w` rows (1-based `j`) and the sidecar `.meta` next to `path`.
pub fn write_design<T: Real>(path: &Path, x: &NurbsDesign<T>) -> Result<()> {
    let mut text = String::from("j,u,v,w\n");
    for j in 0..x.len() {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            j + 1,
            num(x.u()[j].as_f64()),
            num(x.v()[j].as_f64()),
            num(x.w()[j].as_f64())
        );
    }
    write_text(path, &text)?;
    let (n, p) = (x.len(), x.degree());
    let knots = match open_uniform_knots::<T>(n, p) {
        Ok(k) if &k == x.knots() => "open_uniform".to_string(),
        _ => x.knots().knots().iter().map(|t| num(t.as_f64())).collect::<Vec<_>>().join(" "),
    };
    write_meta(&path.with_extension("meta"), &[("n", n.to_string()), ("p", p.to_string()), ("knots", knots)])
}

/// Reads a design written by [`write_design`].
pub fn read_design<T: Real>(path: &Path) -> Result<NurbsDesign<T>> {
    let meta_path = path.with_extension("meta");
    let meta = read_meta(&meta_path)?;
    let n: usize = meta_field(&meta, &meta_path, "n")?;
    let p: usize = meta_field(&meta, &meta_path, "p")?;
    let knots_raw: String = meta_field(&meta, &meta_path, "knots")?;
    let knots = if knots_raw == "open_uniform" {
        open_uniform_knots(n, p)?
    } else {
        let values = knots_raw
            .split_whitespace()
            .map(|t| t.parse::<f64>().map(T::lit))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidData(format!("{}: knots: {e}", meta_path.display())))?;
        KnotVector::new(values, p, n)?
    };
    let (_, rows) = read_table(path, &["j,u,v,w"])?;
    if rows.len() != n {
        return Err(bad_data(path, rows.len() + 1, format!("expected {n} rows, found {}", rows.len())));
    }
    let col = |c: usize| rows.iter().map(|r| T::lit(r[c])).collect::<Vec<_>>();
    NurbsDesign::new(col(1), col(2), col(3), knots).map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
}
