//! Unitary propagation of the isolated subsystem.

use std::collections::HashMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, norm_sqr};
use crate::observables::{DensityGrid, Observer, TimeSeries};
use crate::representation::eigen::{solve_dense, solve_lowest, EigenRequest};
use crate::representation::{DensityState, DiscretizedHamiltonian, Eigensystem, Representation, SchemeTag};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propagator {
    /// Chebyshev expansion of `exp(-iH dt)`; accurate to round-off.
    #[default]
    #[serde(rename = "chebyshev")]
    Chebyshev,
    /// Phases in the eigenbasis of the discretization.
    #[serde(rename = "eigenbasis")]
    EigenbasisExact,
    /// Second-order symmetric operator splitting (grid only).
    #[serde(rename = "split-step")]
    SplitStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationPlan {
    pub t_final: f64,
    #[serde(default = "default_dt_output")]
    pub dt_output: f64,
    #[serde(default)]
    pub propagator: Propagator,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Step of the split-operator propagator.
    #[serde(default = "default_split_dt")]
    pub split_dt: f64,
    /// Abort when `| |psi|^2 - 1 |` exceeds this.
    #[serde(default = "default_norm_limit")]
    pub norm_limit: f64,
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

impl PropagationPlan {
    pub fn new(t_final: f64) -> PropagationPlan {
        PropagationPlan {
            t_final,
            dt_output: default_dt_output(),
            propagator: Propagator::default(),
            snapshot_times: Vec::new(),
            split_dt: default_split_dt(),
            norm_limit: default_norm_limit(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("t_final", "must be finite and non-negative"));
        }
        if !(self.dt_output > 0.0) {
            return Err(Error::param("dt_output", "must be positive"));
        }
        if !(self.split_dt > 0.0) {
            return Err(Error::param("split_dt", "must be positive"));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_final + 1e-9).contains(&t)) {
            return Err(Error::param("snapshot_times", format!("{t} lies outside [0, t_final]")));
        }
        Ok(())
    }

    /// Sample times: the output lattice, the snapshot times and `t_final`.
    fn stops(&self) -> Vec<(f64, bool, bool)> {
        let n = (self.t_final / self.dt_output + 1e-9).floor() as usize;
        let mut stops: Vec<(f64, bool, bool)> = (0..=n).map(|k| (k as f64 * self.dt_output, true, false)).collect();
        if (stops.last().unwrap().0 - self.t_final).abs() > 1e-9 {
            stops.push((self.t_final, true, false));
        }
        for &t in &self.snapshot_times {
            match stops.iter_mut().find(|s| (s.0 - t).abs() < 1e-9) {
                Some(s) => s.2 = true,
                None => stops.push((t, false, true)),
            }
        }
        stops.sort_by(|a, b| a.0.total_cmp(&b.0));
        stops
    }
}

#[derive(Clone, Debug)]
pub struct ClosedRun {
    pub series: TimeSeries,
    pub snapshots: Vec<DensityGrid>,
    pub final_state: Vec<c64>,
    pub representation: Representation,
}

impl ClosedRun {
    /// Largest `|E(t) - E(0)|` over the series.
    pub fn energy_drift(&self) -> f64 {
        energy_audit(&self.series)
    }
}

/// Largest deviation of the recorded energy from its initial value.
pub fn energy_audit(s: &TimeSeries) -> f64 {
    let e0 = s.energy.first().copied().unwrap_or(0.0);
    s.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
}

/// Bessel functions `J_0..=J_n(z)` by Miller's backward recurrence.
pub fn bessel_j_sequence(n: usize, z: f64) -> Vec<f64> {
    if z == 0.0 {
        let mut j = vec![0.0; n + 1];
        j[0] = 1.0;
        return j;
    }
    let az = z.abs();
    let start = n.max(az as usize) + 20 + (10.0 * az.cbrt()) as usize;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / az * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            j.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    // J_0 + 2 sum J_{2k} = 1
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.truncate(n + 1);
    j.iter_mut().for_each(|v| *v /= norm);
    if z < 0.0 {
        for (k, v) in j.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    j
}

/// Chebyshev expansion of `exp(-iH dt)` on a spectral enclosure.
struct Chebyshev {
    center: f64,
    half_width: f64,
    cache: HashMap<u64, Vec<c64>>,
}

impl Chebyshev {
    fn new(h: &DiscretizedHamiltonian) -> Chebyshev {
        let (lo, hi) = h.spectral_bounds();
        let pad = 1e-3 * (hi - lo).abs().max(1.0);
        let (lo, hi) = (lo - pad, hi + pad);
        Chebyshev {
            center: 0.5 * (hi + lo),
            half_width: 0.5 * (hi - lo),
            cache: HashMap::new(),
        }
    }

    fn coefficients(&mut self, dt: f64) -> &[c64] {
        let (c, e) = (self.center, self.half_width);
        self.cache.entry(dt.to_bits()).or_insert_with(|| {
            let z = e * dt;
            let n = (z + 10.0 * z.cbrt() + 40.0).ceil() as usize;
            let j = bessel_j_sequence(n, z);
            let phase = c64::from_polar(1.0, -c * dt);
            let mut a: Vec<c64> = j
                .iter()
                .enumerate()
                .map(|(k, &jk)| {
                    let ik = match k % 4 {
                        0 => c64::new(1.0, 0.0),
                        1 => c64::new(0.0, -1.0),
                        2 => c64::new(-1.0, 0.0),
                        _ => c64::new(0.0, 1.0),
                    };
                    let w = if k == 0 { 1.0 } else { 2.0 };
                    phase * ik * (w * jk)
                })
                .collect();
            while a.len() > 1 && a.last().unwrap().norm() < 1e-17 {
                a.pop();
            }
            a
        })
    }

    fn step(&mut self, h: &DiscretizedHamiltonian, v: &mut [c64], dt: f64) {
        if dt < 0.0 {
            v.iter_mut().for_each(|z| *z = z.conj());
            self.step(h, v, -dt);
            v.iter_mut().for_each(|z| *z = z.conj());
            return;
        }
        let (c, e) = (self.center, self.half_width);
        let a = self.coefficients(dt).to_vec();
        let m = v.len();
        let mut prev: Vec<c64> = v.to_vec();
        let mut cur = vec![c64::new(0.0, 0.0); m];
        let mut next = vec![c64::new(0.0, 0.0); m];
        let scaled = |src: &[c64], dst: &mut [c64]| {
            h.apply(src, dst);
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (*d - c * s) / e;
            }
        };
        let mut acc: Vec<c64> = prev.iter().map(|z| a[0] * z).collect();
        if a.len() > 1 {
            scaled(&prev, &mut cur);
            for (o, z) in acc.iter_mut().zip(&cur) {
                *o += a[1] * z;
            }
        }
        for ak in a.iter().skip(2) {
            scaled(&cur, &mut next);
            for i in 0..m {
                next[i] = 2.0 * next[i] - prev[i];
                acc[i] += ak * next[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        v.copy_from_slice(&acc);
    }
}

/// Strang splitting on the grid.
struct SplitStep {
    dt: f64,
}

impl SplitStep {
    fn potential_half(h: &DiscretizedHamiltonian, v: &mut [c64], tau: f64) {
        let g = h.grid_operator().expect("grid scheme");
        let p = &g.pot;
        let n = g.grid.len();
        let (a, d) = v.split_at_mut(n);
        match h.representation {
            Representation::Diabatic => {
                for i in 0..n {
                    let m = 0.5 * (p.u0[i] + p.u1[i]);
                    let hd = 0.5 * (p.u0[i] - p.u1[i]);
                    let r = hd.hypot(p.vc[i]);
                    let ph = c64::from_polar(1.0, -m * tau);
                    let (cs, sn) = ((r * tau).cos(), (r * tau).sin());
                    let s = if r > 0.0 { sn / r } else { tau };
                    let (x, y) = (a[i], d[i]);
                    let mi = c64::new(0.0, -s);
                    a[i] = ph * (cs * x + mi * (hd * x + p.vc[i] * y));
                    d[i] = ph * (cs * y + mi * (p.vc[i] * x - hd * y));
                }
            }
            Representation::AdiabaticNoGp => {
                for i in 0..n {
                    a[i] *= c64::from_polar(1.0, -p.u0[i] * tau);
                    d[i] *= c64::from_polar(1.0, -p.u1[i] * tau);
                }
            }
        }
    }

    fn kinetic(h: &DiscretizedHamiltonian, v: &mut [c64], tau: f64) {
        let g = h.grid_operator().expect("grid scheme");
        let n = g.grid.len();
        let mut fs = g.grid.fft_scratch();
        for block in v.chunks_mut(n) {
            g.grid.fft(block, &mut fs);
            for (z, k) in block.iter_mut().zip(&g.kin) {
                *z *= c64::from_polar(1.0, -k * tau);
            }
            g.grid.ifft(block, &mut fs);
        }
    }

    /// `exp(-i tau_coupling t)` by Taylor series.
    fn coupling(h: &DiscretizedHamiltonian, v: &mut [c64], tau: f64) {
        let mut term = v.to_vec();
        let mut next = vec![c64::new(0.0, 0.0); v.len()];
        let scale = norm_sqr(v).sqrt().max(1e-300);
        for k in 1..60 {
            h.apply_coupling(&term, &mut next);
            let f = c64::new(0.0, -tau / k as f64);
            for (t, n) in term.iter_mut().zip(&next) {
                *t = f * n;
            }
            for (o, t) in v.iter_mut().zip(&term) {
                *o += t;
            }
            if norm_sqr(&term).sqrt() < 1e-16 * scale {
                break;
            }
        }
    }

    fn step(&self, h: &DiscretizedHamiltonian, v: &mut [c64], dt: f64) {
        let n = (dt.abs() / self.dt).ceil().max(1.0) as usize;
        let tau = dt / n as f64;
        let adiabatic = h.representation == Representation::AdiabaticNoGp;
        for _ in 0..n {
            Self::potential_half(h, v, 0.5 * tau);
            if adiabatic {
                Self::coupling(h, v, 0.5 * tau);
            }
            Self::kinetic(h, v, tau);
            if adiabatic {
                Self::coupling(h, v, 0.5 * tau);
            }
            Self::potential_half(h, v, 0.5 * tau);
        }
    }
}

enum Engine {
    Chebyshev(Chebyshev),
    Eigen(Eigensystem),
    Split(SplitStep),
}

/// Stateful propagator for one Hamiltonian.
pub struct Evolver<'a> {
    h: &'a DiscretizedHamiltonian,
    engine: Engine,
}

impl<'a> Evolver<'a> {
    pub fn new(h: &'a DiscretizedHamiltonian, propagator: Propagator, split_dt: f64) -> Result<Evolver<'a>> {
        let engine = match propagator {
            Propagator::Chebyshev => Engine::Chebyshev(Chebyshev::new(h)),
            Propagator::SplitStep => {
                if h.scheme() != SchemeTag::Grid {
                    return Err(Error::SchemeMismatch(
                        "split-step propagation needs the grid scheme".into(),
                    ));
                }
                Engine::Split(SplitStep { dt: split_dt })
            }
            Propagator::EigenbasisExact => Engine::Eigen(match &h.eigen {
                Some(e) => e.clone(),
                None if h.scheme() == SchemeTag::HoBasis || h.dim() <= 1200 => solve_dense(h)?,
                None => solve_lowest(h, &EigenRequest::default())?,
            }),
        };
        Ok(Evolver { h, engine })
    }

    /// Advance `v` by `dt`, which may be negative.
    pub fn step(&mut self, v: &mut [c64], dt: f64) {
        match &mut self.engine {
            Engine::Chebyshev(c) => c.step(self.h, v, dt),
            Engine::Split(s) => s.step(self.h, v, dt),
            Engine::Eigen(e) => {
                let (m, k) = (e.vectors.nrows(), e.len());
                let mut c = vec![c64::new(0.0, 0.0); k];
                for (j, cj) in c.iter_mut().enumerate() {
                    let mut s = c64::new(0.0, 0.0);
                    for i in 0..m {
                        s += e.vectors[(i, j)] * v[i];
                    }
                    *cj = s * c64::from_polar(1.0, -e.energies[j] * dt);
                }
                let captured = norm_sqr(&c);
                let before = norm_sqr(v);
                if !e.complete && (before - captured) > 1e-6 * before {
                    log::warn!(
                        "truncated eigenbasis misses {:.2e} of the state",
                        (before - captured) / before
                    );
                }
                let cm = Mat::<c64>::from_fn(k, 1, |j, _| c[j]);
                let vr = Mat::<c64>::from_fn(m, k, |i, j| c64::new(e.vectors[(i, j)], 0.0));
                let out = vr * cm;
                for (i, z) in v.iter_mut().enumerate() {
                    *z = out[(i, 0)];
                }
            }
        }
    }
}

/// `exp(-iHt) v` in one call.
pub fn propagate_state(h: &DiscretizedHamiltonian, v: &[c64], t: f64, propagator: Propagator) -> Result<Vec<c64>> {
    let mut ev = Evolver::new(h, propagator, default_split_dt())?;
    let mut out = v.to_vec();
    if t != 0.0 {
        ev.step(&mut out, t);
    }
    Ok(out)
}

/// Propagate a pure initial state, recording observables every
/// `dt_output` and adiabatic densities at the snapshot times.
pub fn propagate_closed(h: &DiscretizedHamiltonian, initial: &DensityState, plan: &PropagationPlan) -> Result<ClosedRun> {
    plan.validate()?;
    let DensityState::Pure(psi0) = initial else {
        return Err(Error::Unsupported(
            "closed propagation takes a wavefunction; use the open-system driver for density operators".into(),
        ));
    };
    if psi0.len() != h.dim() {
        return Err(Error::param("initial", "state length does not match the discretization"));
    }
    let mut ev = Evolver::new(h, plan.propagator, plan.split_dt)?;
    let obs = Observer::new(h);
    let mut psi = psi0.clone();
    let n0 = norm_sqr(&psi);
    let mut series = TimeSeries::default();
    let mut snapshots = Vec::new();
    let mut t = 0.0;
    for (ts, record, snap) in plan.stops() {
        if ts > t {
            ev.step(&mut psi, ts - t);
            t = ts;
        }
        let nrm = norm_sqr(&psi);
        let drift = (nrm - n0).abs();
        if drift > plan.norm_limit {
            return Err(Error::NormDrift {
                drift,
                limit: plan.norm_limit,
                t,
            });
        }
        if record {
            let e = h.expectation(&psi) / nrm;
            series.push(t, obs.measure(&psi, e));
        }
        if snap {
            snapshots.push(obs.adiabatic_density(&psi, t));
        }
    }
    Ok(ClosedRun {
        series,
        snapshots,
        final_state: psi,
        representation: h.representation,
    })
}
