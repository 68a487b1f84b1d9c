//! Grid CSV and PGM serialization.
//!
//! Grids are CSV with a two-line header (dimensions, pitch) followed by one
//! row per `u` index, `n_v` values each (complex grids interleave re,im
//! pairs). Numbers use full-precision scientific notation so a read-back
//! reproduces the samples bit for bit. All writes go through a temp file and
//! a rename.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use keller_core::forward::PowerGrid;
use keller_core::geometry::PlanarGrid;

use crate::CliError;

fn fmt_f64(out: &mut String, x: f64) {
    let _ = write!(out, "{x:.17e}");
}

fn header(grid: &PlanarGrid) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{},{}", grid.n_u, grid.n_v);
    fmt_f64(&mut s, grid.pitch_u);
    s.push(',');
    fmt_f64(&mut s, grid.pitch_v);
    s.push('\n');
    s
}

pub fn real_grid_csv(grid: &PlanarGrid, samples: &[f64]) -> String {
    let mut s = header(grid);
    for u in 0..grid.n_u {
        for v in 0..grid.n_v {
            if v > 0 {
                s.push(',');
            }
            fmt_f64(&mut s, samples[u * grid.n_v + v]);
        }
        s.push('\n');
    }
    s
}

pub fn complex_grid_csv(grid: &PlanarGrid, samples: &[Complex64]) -> String {
    let mut s = header(grid);
    for u in 0..grid.n_u {
        for v in 0..grid.n_v {
            if v > 0 {
                s.push(',');
            }
            let c = samples[u * grid.n_v + v];
            fmt_f64(&mut s, c.re);
            s.push(',');
            fmt_f64(&mut s, c.im);
        }
        s.push('\n');
    }
    s
}

/// Per-location optional values (the orientation map): empty cell when none.
pub fn optional_grid_csv(grid: &PlanarGrid, samples: &[Option<f64>]) -> String {
    let mut s = header(grid);
    for u in 0..grid.n_u {
        for v in 0..grid.n_v {
            if v > 0 {
                s.push(',');
            }
            if let Some(x) = samples[u * grid.n_v + v] {
                fmt_f64(&mut s, x);
            }
        }
        s.push('\n');
    }
    s
}

pub fn bool_grid_csv(grid: &PlanarGrid, samples: &[bool]) -> String {
    let mut s = header(grid);
    for u in 0..grid.n_u {
        for v in 0..grid.n_v {
            if v > 0 {
                s.push(',');
            }
            s.push(if samples[u * grid.n_v + v] { '1' } else { '0' });
        }
        s.push('\n');
    }
    s
}

fn parse_dims(line: &str, path: &Path) -> Result<(usize, usize), CliError> {
    let mut it = line.split(',');
    let bad = || CliError::parse_msg(format!("{}: malformed dimension header", path.display()));
    let n_u = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let n_v = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    Ok((n_u, n_v))
}

/// Reads a real-valued grid CSV against a known grid geometry; the header
/// dimensions must match the geometry.
pub fn read_real_grid_csv(path: &Path, grid: &PlanarGrid) -> Result<PowerGrid, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io_msg(format!("reading {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let dims_line = lines
        .next()
        .ok_or_else(|| CliError::parse_msg(format!("{}: empty file", path.display())))?;
    let (n_u, n_v) = parse_dims(dims_line, path)?;
    if (n_u, n_v) != (grid.n_u, grid.n_v) {
        return Err(CliError::geometry_msg(format!(
            "{}: grid is {}x{} but scene expects {}x{}",
            path.display(),
            n_u,
            n_v,
            grid.n_u,
            grid.n_v
        )));
    }
    // Pitch line is informational; skip it.
    lines
        .next()
        .ok_or_else(|| CliError::parse_msg(format!("{}: missing pitch header", path.display())))?;

    let mut samples = Vec::with_capacity(n_u * n_v);
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split(',') {
            let x: f64 = field.trim().parse().map_err(|_| {
                CliError::parse_msg(format!(
                    "{}: row {}: bad number {:?}",
                    path.display(),
                    row + 3,
                    field
                ))
            })?;
            samples.push(x);
        }
    }
    if samples.len() != n_u * n_v {
        return Err(CliError::parse_msg(format!(
            "{}: expected {} samples, found {}",
            path.display(),
            n_u * n_v,
            samples.len()
        )));
    }
    Ok(PowerGrid {
        grid: grid.clone(),
        samples,
    })
}

/// 8-bit binary PGM of a max-normalized nonnegative grid, row `v` down the
/// image, column `u` across.
pub fn heatmap_pgm(grid: &PlanarGrid, samples: &[f64]) -> Vec<u8> {
    let max = samples.iter().cloned().fold(0.0f64, f64::max);
    let mut out = format!("P5\n{} {}\n255\n", grid.n_u, grid.n_v).into_bytes();
    for v in (0..grid.n_v).rev() {
        for u in 0..grid.n_u {
            let x = samples[u * grid.n_v + v];
            let level = if max > 0.0 {
                (255.0 * (x / max).clamp(0.0, 1.0)).round() as u8
            } else {
                0
            };
            out.push(level);
        }
    }
    out
}

/// Writes through a sibling temp file and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .ok_or_else(|| CliError::io_msg(format!("{}: no parent directory", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::io_msg(format!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::io_msg(format!("renaming into {}: {e}", path.display())))?;
    Ok(())
}
