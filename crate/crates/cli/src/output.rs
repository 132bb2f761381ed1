//! Plain-text artifacts. Everything here is a pure function of its inputs
//! so repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use gpci::observables::{DensityGrid, TimeSeries};

use crate::error::CliError;

pub const SERIES_HEADER: &str = "t,P_D,pop_adi_1,pop_adi_2,trace,energy";

/// Decimal text with 12 significant digits; scientific notation only for
/// magnitudes outside `[1e-15, 1e15)`.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let e = v.abs().log10().floor() as i32;
    if !(-15..15).contains(&e) {
        return format!("{v:.11e}");
    }
    let prec = (11 - e).max(0) as usize;
    let s = format!("{v:.prec$}");
    // Rounding can carry into a new leading digit (9.99... -> 10.0...).
    if s.trim_start_matches('-').trim_start_matches('0').replace('.', "").trim_start_matches('0').len() > 12 && prec > 0 {
        let prec = prec - 1;
        return format!("{v:.prec$}");
    }
    s
}

pub fn series_csv(s: &TimeSeries) -> String {
    let mut out = String::with_capacity(s.len() * 96);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for i in 0..s.len() {
        let row = [s.times[i], s.p_d[i], s.pop_adi_1[i], s.pop_adi_2[i], s.trace[i], s.energy[i]];
        let cells: Vec<String> = row.iter().map(|&v| fmt12(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `nx ny Xmin Xmax Ymin Ymax`, then `ny` rows of `nx` densities from
/// `Ymin` upwards.
pub fn grid_text(g: &DensityGrid) -> String {
    let [x0, x1, y0, y1] = g.bounds;
    let mut out = format!("{} {} {} {} {} {}\n", g.nx, g.ny, fmt12(x0), fmt12(x1), fmt12(y0), fmt12(y1));
    for iy in 0..g.ny {
        let row: Vec<String> = (0..g.nx).map(|ix| fmt12(g.values[iy * g.nx + ix])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t}.grid")
}

/// Parse a grid file written by [`grid_text`].
pub fn parse_grid(text: &str) -> Option<DensityGrid> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next()?.split_whitespace().collect();
    if head.len() != 6 {
        return None;
    }
    let nx: usize = head[0].parse().ok()?;
    let ny: usize = head[1].parse().ok()?;
    let mut bounds = [0.0; 4];
    for k in 0..4 {
        bounds[k] = head[2 + k].parse().ok()?;
    }
    let mut values = Vec::with_capacity(nx * ny);
    for line in lines {
        let row: Vec<f64> = line.split_whitespace().map(|s| s.parse().ok()).collect::<Option<_>>()?;
        if row.len() != nx {
            return None;
        }
        values.extend(row);
    }
    (values.len() == nx * ny).then_some(DensityGrid {
        time: 0.0,
        nx,
        ny,
        bounds,
        values,
    })
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// `run.meta`: version, command, result lines, then the resolved config.
pub fn meta_text(command: &str, results: &[(String, String)], config_toml: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# gpci {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# command: {command}");
    for (k, v) in results {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push('\n');
    out.push_str(config_toml);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(1.0), "1.00000000000");
        assert_eq!(fmt12(0.998726123456789), "0.998726123457");
        assert_eq!(fmt12(-123.456), "-123.456000000");
        assert_eq!(fmt12(100.0), "100.000000000");
        assert_eq!(fmt12(9.9999999999996), "10.0000000000");
        assert_eq!(fmt12(2.5e-20), "2.50000000000e-20");
        for v in [0.123456789012345, 3.14159265358979, 1e-7 / 3.0, 55.5] {
            let back: f64 = fmt12(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_round_trip() {
        let g = DensityGrid {
            time: 1.0,
            nx: 3,
            ny: 2,
            bounds: [-1.0, 1.0, -2.0, 2.0],
            values: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        };
        let text = grid_text(&g);
        assert!(text.starts_with("3 2 -1.00000000000 1.00000000000 -2.00000000000 2.00000000000\n"));
        assert_eq!(text.lines().count(), 3);
        let back = parse_grid(&text).unwrap();
        assert_eq!(back.values, g.values);
        assert_eq!(back.bounds, g.bounds);
    }
}
