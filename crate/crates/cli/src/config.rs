//! Run configuration: TOML text with sections `model`, `grid` or `basis`,
//! `run`, `bath` and `output`. Unknown keys are errors.

use std::path::{Path, PathBuf};

use gpci::closed::{PropagationPlan, Propagator};
use gpci::effective_modes::lvc_to_system_bath;
use gpci::model::{validate, BathParameters, Severity, SubsystemParameters, SystemBathModel};
use gpci::open::{discretize_ohmic, Axis, OhmicSpec, OpenPlan};
use gpci::representation::{GridSpec, HoBasisSpec, InitialElectronic, Representation, SchemeSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::lvc::read_lvc_table;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "Omega_X", skip_serializing_if = "Option::is_none")]
    pub omega_x: Option<f64>,
    #[serde(rename = "Omega_Y", skip_serializing_if = "Option::is_none")]
    pub omega_y: Option<f64>,
    #[serde(rename = "X0", skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(rename = "Y0", skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(rename = "Delta", skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "C_X", skip_serializing_if = "Option::is_none")]
    pub c_x: Option<f64>,
    #[serde(rename = "C_Y", skip_serializing_if = "Option::is_none")]
    pub c_y: Option<f64>,
    #[serde(rename = "Delta12", skip_serializing_if = "Option::is_none")]
    pub delta12: Option<f64>,
    /// Raw N-mode LVC table; replaces the inline subsystem parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lvc_table: Option<String>,
}

impl ModelSection {
    fn inline(&self) -> bool {
        [self.omega_x, self.omega_y, self.x0, self.y0, self.delta, self.c_x, self.c_y, self.delta12]
            .iter()
            .any(Option::is_some)
    }

    pub fn from_subsystem(p: &SubsystemParameters) -> ModelSection {
        ModelSection {
            omega_x: Some(p.omega_x),
            omega_y: Some(p.omega_y),
            x0: Some(p.x0),
            y0: Some(p.y0),
            delta: Some(p.delta),
            c_x: Some(p.c_x),
            c_y: Some(p.c_y),
            delta12: Some(p.delta12),
            lvc_table: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_points")]
    pub nx: usize,
    #[serde(default = "default_points")]
    pub ny: usize,
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 4],
}

fn default_points() -> usize {
    64
}

fn default_bounds() -> [f64; 4] {
    GridSpec::default().bounds
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    #[serde(rename = "closed")]
    Closed,
    #[serde(rename = "open")]
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_representation")]
    pub representation: Representation,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub initial: InitialElectronic,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_dt_output")]
    pub dt_output: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub propagator: Propagator,
    #[serde(default = "default_split_dt")]
    pub split_dt: f64,
    #[serde(default = "default_norm_limit")]
    pub norm_limit: f64,
    /// Master-equation RK4 step.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_capture")]
    pub capture_tol: f64,
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    #[serde(default)]
    pub extra_states: usize,
    /// Highest vibrational level in the perturbative level sums.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_representation() -> Representation {
    Representation::Diabatic
}
fn default_t_final() -> f64 {
    100.0
}
fn default_dt_output() -> f64 {
    0.5
}
fn default_split_dt() -> f64 {
    0.002
}
fn default_norm_limit() -> f64 {
    1e-6
}
fn default_step() -> f64 {
    0.01
}
fn default_window() -> f64 {
    15.0
}
fn default_capture() -> f64 {
    1e-6
}
fn default_max_states() -> usize {
    400
}
fn default_levels() -> usize {
    40
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("all run keys have defaults")
    }
}

impl RunSection {
    pub fn closed_plan(&self) -> PropagationPlan {
        PropagationPlan {
            t_final: self.t_final,
            dt_output: self.dt_output,
            propagator: self.propagator,
            snapshot_times: self.snapshot_times.clone(),
            split_dt: self.split_dt,
            norm_limit: self.norm_limit,
        }
    }

    pub fn open_plan(&self) -> OpenPlan {
        OpenPlan {
            t_final: self.t_final,
            dt_output: self.dt_output,
            step: self.step,
            snapshot_times: self.snapshot_times.clone(),
            window: self.window,
            capture_tol: self.capture_tol,
            max_states: self.max_states,
            extra_states: self.extra_states,
        }
    }

    /// Output times `0, dt, 2 dt, ...` and `t_final`.
    pub fn output_times(&self) -> Vec<f64> {
        let n = (self.t_final / self.dt_output + 1e-9).floor() as usize;
        let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * self.dt_output).collect();
        if (t[n] - self.t_final).abs() > 1e-9 {
            t.push(self.t_final);
        }
        t
    }
}

/// Either an Ohmic spectral density to discretize or explicit modes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(rename = "Omega_c", skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    #[serde(rename = "Omega_max", skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couple_to: Option<Axis>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(rename = "Omega", skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(rename = "lambda_X", skip_serializing_if = "Option::is_none")]
    pub lambda_x: Option<Vec<f64>>,
    #[serde(rename = "lambda_Y", skip_serializing_if = "Option::is_none")]
    pub lambda_y: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<HoBasisSpec>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub subsystem: SubsystemParameters,
    /// Bath from the `bath` section, or from the LVC transform.
    pub bath: Option<BathParameters>,
    pub ohmic: Option<OhmicSpec>,
    pub scheme: SchemeSpec,
    pub run: RunSection,
    pub output: OutputSection,
    pub lvc_table: Option<PathBuf>,
    /// Constant dropped by the LVC transform.
    pub global_constant: Option<f64>,
}

impl RunConfig {
    pub fn model(&self) -> SystemBathModel {
        SystemBathModel {
            subsystem: self.subsystem,
            bath: self.bath.clone().unwrap_or_default(),
        }
    }

    /// The resolved configuration in the input format, every default filled in.
    pub fn echo(&self) -> RawConfig {
        let (grid, basis) = match self.scheme {
            SchemeSpec::Grid(g) => (
                Some(GridSection {
                    nx: g.nx,
                    ny: g.ny,
                    bounds: g.bounds,
                }),
                None,
            ),
            SchemeSpec::Ho(b) => (None, Some(b)),
        };
        let bath = match (&self.ohmic, &self.bath) {
            (Some(o), _) => Some(BathSection {
                xi: Some(o.xi),
                omega_c: Some(o.omega_c),
                n_modes: Some(o.n_modes),
                omega_max: Some(o.omega_max()),
                couple_to: Some(o.couple_to),
                temperature: o.temperature,
                ..BathSection::default()
            }),
            (None, Some(b)) => Some(explicit_bath(b)),
            (None, None) => None,
        };
        RawConfig {
            model: ModelSection::from_subsystem(&self.subsystem),
            grid,
            basis,
            run: self.run.clone(),
            bath,
            output: self.output.clone(),
        }
    }
}

pub fn explicit_bath(b: &BathParameters) -> BathSection {
    BathSection {
        temperature: b.temperature,
        omega: Some(b.omega.clone()),
        lambda_x: Some(b.lambda_x.clone()),
        lambda_y: Some(b.lambda_y.clone()),
        ..BathSection::default()
    }
}

/// Line (1-based) of `key = ...` inside `[section]`, if present in `text`.
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(s) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = s.trim().to_string();
            continue;
        }
        let k = l.split('=').next().unwrap_or("").trim();
        if current == section && k == key {
            return Some(i + 1);
        }
    }
    None
}

fn invalid(text: &str, section: &str, key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        line: locate(text, section, key),
        message: format!("[{section}] {key}: {}", reason.into()),
    }
}

/// Apply `section.key=value` overrides to a parsed document.
fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> Result<(), CliError> {
    for o in overrides {
        let bad = || CliError::Config {
            line: None,
            message: format!("override `{o}`: expected section.key=value"),
        };
        let (path, value) = o.split_once('=').ok_or_else(bad)?;
        let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
        let value = value.trim();
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let entry = doc
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(t) = entry else {
            return Err(bad());
        };
        t.insert(key.to_string(), parsed);
    }
    Ok(())
}

fn toml_error(e: toml::de::Error, text: Option<&str>) -> CliError {
    let line = match (e.span(), text) {
        (Some(span), Some(text)) => Some(text[..span.start.min(text.len())].matches('\n').count() + 1),
        _ => None,
    };
    CliError::Config {
        line,
        message: e.message().to_string(),
    }
}

/// Parse and validate configuration text. Relative paths resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(e, Some(text)))?;
    let raw = if overrides.is_empty() {
        raw
    } else {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| toml_error(e, Some(text)))?;
        apply_overrides(&mut doc, overrides)?;
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config {
                line: None,
                message: format!("after overrides: {}", e.message()),
            })?
    };
    resolve(raw, text, base_dir)
}

fn resolve(raw: RawConfig, text: &str, base_dir: &Path) -> Result<RunConfig, CliError> {
    let m = &raw.model;
    let (subsystem, lvc_bath, lvc_table, global_constant) = match (&m.lvc_table, m.inline()) {
        (Some(_), true) => {
            return Err(invalid(text, "model", "lvc_table", "cannot be combined with inline subsystem parameters"))
        }
        (Some(path), false) => {
            let path = base_dir.join(path);
            let lvc = read_lvc_table(&path)?;
            let t = lvc_to_system_bath(&lvc).map_err(|e| invalid(text, "model", "lvc_table", e.to_string()))?;
            (t.model.subsystem, Some(t.model.bath), Some(path), Some(t.global_constant))
        }
        (None, _) => {
            let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid(text, "model", key, "missing required key"));
            let p = SubsystemParameters {
                omega_x: need(m.omega_x, "Omega_X")?,
                omega_y: need(m.omega_y, "Omega_Y")?,
                x0: need(m.x0, "X0")?,
                y0: m.y0.unwrap_or(0.0),
                delta: m.delta.unwrap_or(0.0),
                c_x: m.c_x.unwrap_or(0.0),
                c_y: m.c_y.unwrap_or(0.0),
                delta12: m.delta12.unwrap_or(0.0),
            };
            (p, None, None, None)
        }
    };

    let scheme = match (raw.grid, raw.basis) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config {
                line: None,
                message: "give either [grid] or [basis], not both".into(),
            })
        }
        (None, Some(b)) => {
            b.validate().map_err(|e| invalid(text, "basis", "n_max_x", e.to_string()))?;
            SchemeSpec::Ho(b)
        }
        (g, None) => {
            let g = g.unwrap_or(GridSection {
                nx: default_points(),
                ny: default_points(),
                bounds: default_bounds(),
            });
            let spec = GridSpec {
                nx: g.nx,
                ny: g.ny,
                bounds: g.bounds,
            };
            spec.validate().map_err(|e| field_error(text, "grid", e))?;
            SchemeSpec::Grid(spec)
        }
    };

    let (ohmic, bath) = match &raw.bath {
        None => (None, lvc_bath),
        Some(b) => resolve_bath(b, text)?,
    };

    let run = raw.run;
    if run.mode == Mode::Open {
        if bath.is_none() {
            return Err(CliError::Config {
                line: locate(text, "run", "mode"),
                message: "[run] mode = \"open\" needs a [bath] section".into(),
            });
        }
        run.open_plan().validate().map_err(|e| field_error(text, "run", e))?;
    } else {
        run.closed_plan().validate().map_err(|e| field_error(text, "run", e))?;
    }

    let model = SystemBathModel {
        subsystem,
        bath: bath.clone().unwrap_or_default(),
    };
    for d in validate(&model) {
        let section = if ["Omega", "lambda_X", "lambda_Y", "temperature"].contains(&d.field.as_str()) {
            "bath"
        } else {
            "model"
        };
        match d.severity {
            Severity::Error => return Err(invalid(text, section, &d.field, d.message)),
            Severity::Warning => log::warn!("{}: {}", d.field, d.message),
        }
    }

    Ok(RunConfig {
        subsystem,
        bath,
        ohmic,
        scheme,
        run,
        output: raw.output,
        lvc_table,
        global_constant,
    })
}

fn field_error(text: &str, section: &str, e: gpci::Error) -> CliError {
    match &e {
        gpci::Error::InvalidParameter { field, reason } => invalid(text, section, field, reason.clone()),
        _ => CliError::Config {
            line: None,
            message: e.to_string(),
        },
    }
}

fn resolve_bath(b: &BathSection, text: &str) -> Result<(Option<OhmicSpec>, Option<BathParameters>), CliError> {
    let ohmic_keys = b.xi.is_some() || b.omega_c.is_some() || b.couple_to.is_some() || b.n_modes.is_some() || b.omega_max.is_some();
    let explicit_keys = b.omega.is_some() || b.lambda_x.is_some() || b.lambda_y.is_some();
    match (ohmic_keys, explicit_keys) {
        (true, true) => Err(invalid(text, "bath", "Omega", "explicit modes cannot be combined with an Ohmic density")),
        (true, false) => {
            let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid(text, "bath", key, "missing required key"));
            let spec = OhmicSpec {
                xi: need(b.xi, "xi")?,
                omega_c: need(b.omega_c, "Omega_c")?,
                n_modes: b.n_modes.unwrap_or(100),
                omega_max: b.omega_max,
                couple_to: b.couple_to.ok_or_else(|| invalid(text, "bath", "couple_to", "missing required key"))?,
                temperature: b.temperature,
            };
            let params = discretize_ohmic(&spec).map_err(|e| field_error(text, "bath", e))?;
            Ok((Some(spec), Some(params)))
        }
        (false, _) => {
            let omega = b.omega.clone().unwrap_or_default();
            let n = omega.len();
            Ok((
                None,
                Some(BathParameters {
                    lambda_x: b.lambda_x.clone().unwrap_or_else(|| vec![0.0; n]),
                    lambda_y: b.lambda_y.clone().unwrap_or_else(|| vec![0.0; n]),
                    omega,
                    temperature: b.temperature,
                }),
            ))
        }
    }
}

pub fn read_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base, overrides).map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nOmega_X = 2.0\nOmega_Y = 2.0\nX0 = 1.5\nC_Y = 3.0\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL, Path::new("."), &[]).unwrap();
        assert_eq!(c.subsystem, SubsystemParameters::symmetric(2.0, 1.5, 3.0));
        assert_eq!(c.scheme, SchemeSpec::Grid(GridSpec::default()));
        assert_eq!(c.run.t_final, 100.0);
        assert_eq!(c.run.mode, Mode::Closed);
        assert!(c.bath.is_none());
        let echo = toml::to_string(&c.echo()).unwrap();
        for key in ["Delta12", "t_final", "dt_output", "propagator", "split_dt", "bounds", "dir", "levels"] {
            assert!(echo.contains(key), "{key} missing from echo");
        }
        let again = parse_config(&echo, Path::new("."), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn negative_frequency_names_key_and_line() {
        let text = "[model]\nOmega_X = -2\nOmega_Y = 2.0\nX0 = 1.5\n";
        let e = parse_config(text, Path::new("."), &[]).unwrap_err();
        let CliError::Config { line, message } = &e else { panic!("{e}") };
        assert_eq!(*line, Some(2));
        assert!(message.contains("Omega_X"));
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let text = format!("{MINIMAL}\n[run]\nt_fnal = 3.0\n");
        let e = parse_config(&text, Path::new("."), &[]).unwrap_err();
        let CliError::Config { line, message } = &e else { panic!("{e}") };
        assert_eq!(*line, Some(8));
        assert!(message.contains("t_fnal"), "{message}");
        let e = parse_config(&format!("{MINIMAL}[bogus]\nx = 1\n"), Path::new("."), &[]).unwrap_err();
        assert!(matches!(e, CliError::Config { line: Some(6), .. }), "{e}");
    }

    #[test]
    fn type_mismatch_and_missing_key() {
        let e = parse_config("[model]\nOmega_X = \"two\"\n", Path::new("."), &[]).unwrap_err();
        assert!(matches!(e, CliError::Config { line: Some(2), .. }), "{e}");
        let e = parse_config("[model]\nOmega_X = 2.0\nOmega_Y = 2.0\n", Path::new("."), &[]).unwrap_err();
        assert!(e.to_string().contains("X0"), "{e}");
    }

    #[test]
    fn overrides_apply() {
        let o = vec!["model.Delta12=0.4".to_string(), "run.representation=no-gp".to_string()];
        let c = parse_config(MINIMAL, Path::new("."), &o).unwrap();
        assert_eq!(c.subsystem.delta12, 0.4);
        assert_eq!(c.run.representation, Representation::AdiabaticNoGp);
        let bad = vec!["model.Omega_Z=1".to_string()];
        assert!(parse_config(MINIMAL, Path::new("."), &bad).is_err());
    }

    #[test]
    fn open_mode_needs_bath() {
        let text = format!("{MINIMAL}[run]\nmode = \"open\"\n");
        assert!(parse_config(&text, Path::new("."), &[]).is_err());
        let text = format!("{MINIMAL}[run]\nmode = \"open\"\n[bath]\nxi = 0.1\nOmega_c = 3.5\ncouple_to = \"Y\"\n");
        let c = parse_config(&text, Path::new("."), &[]).unwrap();
        assert_eq!(c.bath.unwrap().len(), 100);
    }
}
