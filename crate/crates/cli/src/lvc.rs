//! Plain-text LVC tables.
//!
//! ```text
//! # omega  kappa  kappa_tilde  c
//! delta = 0.0
//! 1.0   1.0  -1.0   2.0
//! ```
//!
//! One row per mode; `#` starts a comment.

use std::path::Path;

use gpci::model::LvcParameters;

use crate::error::CliError;

pub fn parse_lvc_table(text: &str) -> Result<LvcParameters, CliError> {
    let mut p = LvcParameters {
        omega: Vec::new(),
        kappa: Vec::new(),
        kappa_tilde: Vec::new(),
        c: Vec::new(),
        delta: 0.0,
    };
    let mut have_delta = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| CliError::Config {
            line: Some(i + 1),
            message: m,
        };
        if let Some(rest) = line.strip_prefix("delta") {
            let v = rest.trim_start().strip_prefix('=').unwrap_or(rest).trim();
            p.delta = v.parse().map_err(|_| err(format!("bad delta `{v}`")))?;
            have_delta = true;
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`"))))
            .collect::<Result<_, _>>()?;
        if cols.len() != 4 {
            return Err(err(format!("expected 4 columns (omega kappa kappa_tilde c), found {}", cols.len())));
        }
        p.omega.push(cols[0]);
        p.kappa.push(cols[1]);
        p.kappa_tilde.push(cols[2]);
        p.c.push(cols[3]);
    }
    if !have_delta {
        log::info!("LVC table without a delta line; using delta = 0");
    }
    p.validate().map_err(|e| CliError::Config {
        line: None,
        message: e.to_string(),
    })?;
    Ok(p)
}

pub fn read_lvc_table(path: &Path) -> Result<LvcParameters, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        line: None,
        message: format!("cannot read LVC table {}: {e}", path.display()),
    })?;
    parse_lvc_table(&text).map_err(|e| e.in_file(path))
}
