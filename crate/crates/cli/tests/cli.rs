use std::path::{Path, PathBuf};
use std::process::Command;

use gpci::open::Axis;
use gpci_cli::output::{parse_grid, SERIES_HEADER};
use gpci_cli::read_config;

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn gpci(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gpci"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SHORT: [&str; 8] = [
    "--override",
    "run.t_final=2",
    "--override",
    "run.snapshot_times=[2.0]",
    "--override",
    "grid.nx=32",
    "--override",
    "grid.ny=32",
];

#[test]
fn run_writes_series_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = presets().join("symmetric.toml");
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("r{k}"));
        let mut args = vec!["run", "--config", path_str(&cfg), "--out", path_str(&out)];
        args.extend(SHORT);
        let o = gpci(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(out);
    }
    let series = std::fs::read_to_string(outs[0].join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some(SERIES_HEADER));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], 0.0);
    for r in &rows {
        assert_eq!(r.len(), 6);
        assert!((r[4] - 1.0).abs() < 1e-9, "trace {}", r[4]);
        assert!((r[2] + r[3] - 1.0).abs() < 1e-9);
    }
    for name in ["series.csv", "snapshot_2.grid", "run.meta"] {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }
    let grid = parse_grid(&std::fs::read_to_string(outs[0].join("snapshot_2.grid")).unwrap()).unwrap();
    assert_eq!((grid.nx, grid.ny), (32, 32));
    let meta = std::fs::read_to_string(outs[0].join("run.meta")).unwrap();
    assert!(meta.contains("# command: run"));
    assert!(meta.contains("energy_drift"));
}

#[test]
fn invalid_config_exits_with_two_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nOmega_X = -2.0\nOmega_Y = 2.0\nX0 = 1.5\n").unwrap();
    let o = gpci(&["run", "--config", path_str(&cfg), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2"), "{err}");

    std::fs::write(&cfg, "[model]\nOmega_X = 2.0\nOmega_Y = 2.0\nX0 = 1.5\nbogus = 1\n").unwrap();
    let o = gpci(&["run", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn unreadable_config_file_is_a_config_error() {
    let o = gpci(&["run", "--config", "/nonexistent/gpci.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn transform_output_reparses_to_the_same_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = gpci(&["transform", "--config", path_str(&presets().join("lvc-transform.toml")), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let derived = read_config(&out.join("system_bath.toml"), &[]).unwrap();
    let original = read_config(&presets().join("lvc-transform.toml"), &[]).unwrap();
    assert_eq!(derived.subsystem, original.subsystem);
    let symmetric = read_config(&presets().join("symmetric.toml"), &[]).unwrap();
    let (a, b) = (derived.subsystem, symmetric.subsystem);
    for (x, y) in [(a.omega_x, b.omega_x), (a.omega_y, b.omega_y), (a.x0, b.x0), (a.c_y, b.c_y)] {
        assert!((x - y).abs() < 1e-12);
    }
    // The derived file itself runs.
    let o = gpci(&[
        "run",
        "--config",
        path_str(&out.join("system_bath.toml")),
        "--out",
        path_str(&dir.path().join("r")),
        "--override",
        "run.t_final=0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tdpt_reports_the_coupling_channel_on_the_symmetric_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = gpci(&[
        "tdpt",
        "--config",
        path_str(&presets().join("symmetric.toml")),
        "--out",
        path_str(&out),
        "--override",
        "run.t_final=10",
        "--override",
        "run.snapshot_times=[]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("tdpt.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,1a,1b,1c"));
    let max_1a = lines.map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    // Peak of sin^2(Omega t / 2) is reached on the dt_output grid at t = pi/2 only
    // approximately; the prefactor bounds it from above.
    assert!(max_1a <= 2.7767205919502894e-4 * (1.0 + 1e-12));
    assert!(max_1a > 0.95 * 2.7767205919502894e-4, "{max_1a}");
}

#[test]
fn bath_command_writes_modes_and_correlations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = gpci(&[
        "bath",
        "--config",
        path_str(&presets().join("bath-on-y.toml")),
        "--out",
        path_str(&out),
        "--override",
        "run.t_final=2",
        "--override",
        "run.snapshot_times=[]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let modes = std::fs::read_to_string(out.join("bath.csv")).unwrap();
    assert_eq!(modes.lines().count(), 101);
    for l in modes.lines().skip(1) {
        let c: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(c[2], 0.0, "Y bath has no X coupling");
        assert!(c[1] > 0.0 && c[3] != 0.0);
    }
    let corr = std::fs::read_to_string(out.join("correlation.csv")).unwrap();
    assert!(corr.starts_with("t,Re_C_X,Im_C_X,Re_C_Y,Im_C_Y\n"));
    assert_eq!(corr.lines().count(), 6);
}

#[test]
fn sweep_runs_every_member() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cfg = presets().join("constant-coupling-sweep.toml");
    let mut args = vec![
        "sweep",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out),
        "--vary",
        "model.Delta12=0,0.4",
        "--workers",
        "2",
        "--override",
        "run.t_final=1",
    ];
    args.extend(["--override", "grid.nx=32", "--override", "grid.ny=32"]);
    let o = gpci(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for v in ["0", "0.4"] {
        let member = out.join(format!("constant-coupling-sweep_model-Delta12-{v}"));
        assert!(member.join("series.csv").exists(), "{}", member.display());
    }
}

#[test]
fn sweep_reports_the_worst_member_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpci(&[
        "sweep",
        "--config",
        path_str(&presets().join("symmetric.toml")),
        "--out",
        path_str(dir.path()),
        "--vary",
        "model.Omega_X=2,-1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_resolve_to_the_intended_models() {
    for entry in std::fs::read_dir(presets()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) == Some("toml") {
            read_config(&p, &[]).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        }
    }
    let y = read_config(&presets().join("bath-on-y.toml"), &[]).unwrap();
    let spec = y.ohmic.expect("Ohmic bath");
    assert_eq!(spec.couple_to, Axis::Y);
    assert_eq!(spec.omega_c, 3.5);
    assert_eq!(spec.n_modes, 100);
    assert_eq!(spec.xi, 0.3);
    assert_eq!(spec.temperature, 0.0);
    assert_eq!(y.bath.as_ref().unwrap().len(), 100);
    let x = read_config(&presets().join("bath-on-x.toml"), &[]).unwrap();
    assert_eq!(x.ohmic.unwrap().couple_to, Axis::X);
    let tilt = read_config(&presets().join("coupling-tilt-cy6-node.toml"), &[]).unwrap();
    assert_eq!((tilt.subsystem.c_x, tilt.subsystem.c_y), (2.0, 6.0));
}
