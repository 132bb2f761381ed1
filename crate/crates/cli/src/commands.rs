//! Subcommand implementations. Each writes into its own output directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gpci::closed::propagate_closed;
use gpci::open::{bath_correlation, propagate_tcl2};
use gpci::representation::{build, prepare_initial_state_with};
use gpci::tdpt::{channel_1a, channel_1b, channel_1c, channel_bath_2nd};
use serde::Serialize;

use crate::config::{explicit_bath, read_config, Mode, ModelSection, RunConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, fmt12, grid_text, meta_text, series_csv, snapshot_name, write};

fn echo_toml(config: &RunConfig) -> String {
    let mut text = toml::to_string(&config.echo()).expect("config serializes");
    if let Some(p) = &config.lvc_table {
        text = format!("# model derived from {}\n{text}", p.display());
    }
    text
}

/// Propagate the configured model and write `series.csv`, snapshots and
/// `run.meta`.
pub fn run(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let h = build(&config.subsystem, &config.scheme, config.run.representation)?;
    let psi = prepare_initial_state_with(&h, config.run.initial)?;
    let mut results = Vec::new();
    let (series, snapshots) = match config.run.mode {
        Mode::Closed => {
            let r = propagate_closed(&h, &psi, &config.run.closed_plan())?;
            results.push(("energy_drift".to_string(), format!("{:.3e}", r.energy_drift())));
            (r.series, r.snapshots)
        }
        Mode::Open => {
            let r = propagate_tcl2(&config.model(), &h, &psi, &config.run.open_plan())?;
            results.push(("basis_size".to_string(), r.basis_size.to_string()));
            results.push(("captured_weight".to_string(), fmt12(r.captured_weight)));
            results.push(("min_eigenvalue".to_string(), format!("{:.3e}", r.min_eigenvalue)));
            (r.series, r.snapshots)
        }
    };
    results.push(("min_P_D".to_string(), fmt12(series.min_p_d())));
    write(out, "series.csv", &series_csv(&series))?;
    for g in &snapshots {
        write(out, &snapshot_name(g.time), &grid_text(g))?;
    }
    write(out, "run.meta", &meta_text("run", &results, &echo_toml(config)))
}

/// Perturbative channel estimates on the output times: `tdpt.csv`.
pub fn tdpt(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let p = &config.subsystem;
    let levels = config.run.levels;
    let mut channels = vec![channel_1a(p)?, channel_1b(p, levels)?, channel_1c(p, levels)?];
    if let Some(b) = &config.bath {
        channels.push(channel_bath_2nd(p, b)?);
    }
    let times = config.run.output_times();
    let mut text = String::from("t");
    for c in &channels {
        text.push(',');
        text.push_str(c.tag.label());
    }
    text.push('\n');
    let columns: Vec<Vec<f64>> = channels.iter().map(|c| c.evaluate(&times)).collect();
    for (i, &t) in times.iter().enumerate() {
        text.push_str(&fmt12(t));
        for col in &columns {
            text.push(',');
            text.push_str(&fmt12(col[i]));
        }
        text.push('\n');
    }
    write(out, "tdpt.csv", &text)?;
    let results: Vec<(String, String)> = channels
        .iter()
        .zip(&columns)
        .map(|(c, col)| {
            let max = col.iter().cloned().fold(0.0, f64::max);
            (
                format!("channel {}", c.tag.label()),
                format!("prefactor {} max {} envelope {:?}", fmt12(c.prefactor), fmt12(max), c.envelope),
            )
        })
        .collect();
    write(out, "run.meta", &meta_text("tdpt", &results, &echo_toml(config)))
}

/// Bath modes (`bath.csv`) and the coupling-weighted correlation functions
/// `sum_j lambda_j^2 <q_j(t) q_j(0)>` of both axes (`correlation.csv`).
pub fn bath(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let b = config.bath.as_ref().ok_or_else(|| CliError::Config {
        line: None,
        message: "the bath command needs a [bath] section or an LVC table".into(),
    })?;
    let mut modes = String::from("j,Omega,lambda_X,lambda_Y\n");
    for j in 0..b.len() {
        modes.push_str(&format!("{},{},{},{}\n", j, fmt12(b.omega[j]), fmt12(b.lambda_x[j]), fmt12(b.lambda_y[j])));
    }
    write(out, "bath.csv", &modes)?;
    let mut corr = String::from("t,Re_C_X,Im_C_X,Re_C_Y,Im_C_Y\n");
    for t in config.run.output_times() {
        let mut cx = gpci::linalg::c64::new(0.0, 0.0);
        let mut cy = cx;
        for j in 0..b.len() {
            let c = bath_correlation(b.omega[j], b.temperature, t)?;
            cx += c * b.lambda_x[j] * b.lambda_x[j];
            cy += c * b.lambda_y[j] * b.lambda_y[j];
        }
        corr.push_str(&format!("{},{},{},{},{}\n", fmt12(t), fmt12(cx.re), fmt12(cx.im), fmt12(cy.re), fmt12(cy.im)));
    }
    write(out, "correlation.csv", &corr)?;
    let results = vec![("modes".to_string(), b.len().to_string())];
    write(out, "run.meta", &meta_text("bath", &results, &echo_toml(config)))
}

#[derive(Serialize)]
struct TransformedModel {
    model: ModelSection,
    bath: crate::config::BathSection,
}

/// Reduce an LVC table to the subsystem-bath form: `system_bath.toml`,
/// itself a valid configuration.
pub fn transform(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let Some(path) = &config.lvc_table else {
        return Err(CliError::Config {
            line: None,
            message: "transform needs [model] lvc_table".into(),
        });
    };
    let bath = config.bath.clone().unwrap_or_default();
    let doc = TransformedModel {
        model: ModelSection::from_subsystem(&config.subsystem),
        bath: explicit_bath(&bath),
    };
    let mut text = format!("# subsystem-bath form of {}\n", path.display());
    if let Some(c) = config.global_constant {
        text.push_str(&format!("# dropped constant energy: {c}\n"));
    }
    text.push_str(&toml::to_string(&doc).expect("model serializes"));
    write(out, "system_bath.toml", &text)?;
    let results = vec![("bath_modes".to_string(), bath.len().to_string())];
    write(out, "run.meta", &meta_text("transform", &results, &echo_toml(config)))
}

/// One sweep member: a name and its configuration.
#[derive(Clone, Debug)]
pub struct SweepJob {
    pub name: String,
    pub config: RunConfig,
}

/// Jobs for every config file, crossed with the values of one `vary` key.
pub fn sweep_jobs(configs: &[PathBuf], overrides: &[String], vary: Option<&str>) -> Result<Vec<SweepJob>, CliError> {
    let mut jobs = Vec::new();
    let variants: Vec<(String, Option<String>)> = match vary {
        None => vec![(String::new(), None)],
        Some(spec) => {
            let (key, values) = spec.split_once('=').ok_or_else(|| CliError::Config {
                line: None,
                message: format!("--vary `{spec}`: expected section.key=v1,v2,..."),
            })?;
            values
                .split(',')
                .map(|v| (format!("_{}-{}", key.trim().replace('.', "-"), v.trim()), Some(format!("{}={}", key.trim(), v.trim()))))
                .collect()
        }
    };
    for path in configs {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        for (suffix, extra) in &variants {
            let mut o = overrides.to_vec();
            o.extend(extra.clone());
            jobs.push(SweepJob {
                name: format!("{stem}{suffix}"),
                config: read_config(path, &o)?,
            });
        }
    }
    let mut names: Vec<&str> = jobs.iter().map(|j| j.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config {
            line: None,
            message: "sweep members must have distinct names".into(),
        });
    }
    Ok(jobs)
}

/// Run every job into `out/<name>` on a pool of `workers` threads. Returns
/// the failures by name.
pub fn sweep(jobs: &[SweepJob], out: &Path, workers: usize) -> Vec<(String, CliError)> {
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let workers = workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                log::info!("sweep member {}", job.name);
                if let Err(e) = run(&job.config, &out.join(&job.name)) {
                    failures.lock().expect("no poisoned lock").push((job.name.clone(), e));
                }
            });
        }
    });
    let mut f = failures.into_inner().expect("no poisoned lock");
    f.sort_by(|a, b| a.0.cmp(&b.0));
    f
}

/// Exit status for a finished sweep.
pub fn sweep_status(failures: &[(String, CliError)]) -> i32 {
    failures.iter().map(|(_, e)| e.exit_code()).max().unwrap_or(0)
}
