//! Donor-well population, adiabatic populations, adiabatic density
//! snapshots and the nodal-line diagnostic.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::linalg::c64;
use crate::model::{lower_adiabatic_state, SubsystemParameters};
use crate::representation::hamiltonian::{DiscretizedHamiltonian, Kind, Representation};
use crate::representation::operators::{Operator, OperatorMatrix, Sampler};
use crate::representation::{DensityState, GridSpec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub p_d: Vec<f64>,
    pub pop_adi_1: Vec<f64>,
    pub pop_adi_2: Vec<f64>,
    /// Norm squared for pure states, trace for density operators.
    pub trace: Vec<f64>,
    pub energy: Vec<f64>,
}

/// One sample of the observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub p_d: f64,
    pub pop_adi_1: f64,
    pub pop_adi_2: f64,
    pub trace: f64,
    pub energy: f64,
}

impl TimeSeries {
    pub fn push(&mut self, t: f64, s: Sample) {
        self.times.push(t);
        self.p_d.push(s.p_d);
        self.pop_adi_1.push(s.pop_adi_1);
        self.pop_adi_2.push(s.pop_adi_2);
        self.trace.push(s.trace);
        self.energy.push(s.energy);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation of `P_D` at `t`.
    pub fn p_d_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.p_d, t)
    }

    pub fn min_p_d(&self) -> f64 {
        self.p_d.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn interpolate(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    match ts.iter().position(|&x| x >= t - 1e-12) {
        None => *ys.last().unwrap(),
        Some(0) => ys[0],
        Some(k) => {
            let (t0, t1) = (ts[k - 1], ts[k]);
            let w = (t - t0) / (t1 - t0);
            ys[k - 1] * (1.0 - w) + ys[k] * w
        }
    }
}

/// Largest `|a(t) - b(t)|` over common sample times, optionally limited to `t <= t_max`.
pub fn max_gap(a: &TimeSeries, b: &TimeSeries, t_max: f64) -> f64 {
    a.times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t <= t_max + 1e-9)
        .map(|(i, &t)| (a.p_d[i] - b.p_d_at(t)).abs())
        .fold(0.0, f64::max)
}

/// Lower-adiabatic density `<phi_1|rho(R)|phi_1>` on a uniform grid.
/// Rows run along X: `values[iy * nx + ix]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub time: f64,
    pub nx: usize,
    pub ny: usize,
    /// `[Xmin, Xmax, Ymin, Ymax]` of the cell-centred grid.
    pub bounds: [f64; 4],
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn spacing(&self) -> (f64, f64) {
        let [x0, x1, y0, y1] = self.bounds;
        ((x1 - x0) / self.nx as f64, (y1 - y0) / self.ny as f64)
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let (dx, dy) = self.spacing();
        [
            self.bounds[0] + (ix as f64 + 0.5) * dx,
            self.bounds[2] + (iy as f64 + 0.5) * dy,
        ]
    }

    pub fn integral(&self) -> f64 {
        let (dx, dy) = self.spacing();
        self.values.iter().sum::<f64>() * dx * dy
    }
}

/// `tr(rho P_D)` clamped to [0, 1].
pub fn donor_population(state: &DensityState, projector: &OperatorMatrix) -> f64 {
    let raw = match state {
        DensityState::Pure(v) => projector.expectation(v),
        DensityState::Mixed(r) => {
            let p = projector.to_dense();
            let n = r.nrows();
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += (r[(i, j)] * p[(j, i)]).re;
                }
            }
            acc
        }
    };
    clamp_unit(raw)
}

fn clamp_unit(raw: f64) -> f64 {
    if !(-1e-8..=1.0 + 1e-8).contains(&raw) {
        log::warn!("donor population {raw} outside [0, 1] before clamping");
    }
    raw.clamp(0.0, 1.0)
}

/// Output grid for snapshots of an oscillator-basis state.
pub fn snapshot_spec() -> GridSpec {
    GridSpec::default()
}

/// Band-limited (trigonometric) interpolation from `n` cell-centred nodes
/// on `[a, b]` to the points `xs`. Nyquist mode split symmetrically.
fn trig_interpolation(n: usize, a: f64, b: f64, xs: &[f64]) -> Mat<f64> {
    let l = b - a;
    let h = l / n as f64;
    Mat::from_fn(xs.len(), n, |r, i| {
        let u = 2.0 * std::f64::consts::PI * (xs[r] - (a + (i as f64 + 0.5) * h)) / l;
        let mut w = 1.0 + (0.5 * n as f64 * u).cos();
        for k in 1..n / 2 {
            w += 2.0 * (k as f64 * u).cos();
        }
        w / n as f64
    })
}

/// Pointwise measurement of pure states and snapshot rendering.
pub struct Observer {
    sampler: Sampler,
    snapshot: SnapshotMap,
}

/// Each electronic component is a coefficient table `C`; its values on the
/// snapshot grid are `ex C ey^T`.
struct SnapshotMap {
    spec: GridSpec,
    ex: Mat<c64>,
    ey: Mat<c64>,
    /// Mixing angle at snapshot points; `None` for the adiabatic representation.
    theta: Option<Vec<f64>>,
    table: Table,
}

enum Table {
    Grid { nx: usize, ny: usize, scale: f64 },
    Ho(crate::representation::HoBasis),
}

impl SnapshotMap {
    fn component(&self, c: &[c64]) -> Mat<c64> {
        let t = match &self.table {
            Table::Grid { nx, ny, scale } => Mat::<c64>::from_fn(*nx, *ny, |ix, iy| c[iy * nx + ix] * *scale),
            Table::Ho(basis) => {
                let t = basis.to_table(c);
                Mat::<c64>::from_fn(t.len(), t[0].len(), |i, j| t[i][j])
            }
        };
        &self.ex * &t * self.ey.transpose()
    }
}

impl Observer {
    pub fn new(h: &DiscretizedHamiltonian) -> Observer {
        Observer::with_refinement(h, 1)
    }

    /// Grid-scheme snapshots on a grid `refine` times finer than the
    /// simulation grid, by band-limited interpolation of the wavefunction.
    /// With `refine > 1` the snapshot integral matches `pop_adi_1` only to
    /// the accuracy of the interpolated mixing angle.
    pub fn with_refinement(h: &DiscretizedHamiltonian, refine: usize) -> Observer {
        let refine = refine.max(1);
        let sampler = Sampler::new(h);
        let to_c = |m: Mat<f64>| Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0));
        let (spec, ex, ey, table) = match &h.kind {
            Kind::Grid(g) => {
                let gs = g.grid.spec;
                let spec = GridSpec {
                    nx: gs.nx * refine,
                    ny: gs.ny * refine,
                    bounds: gs.bounds,
                };
                let out = crate::representation::Grid::new(spec).expect("refined grid is valid");
                let [x0, x1, y0, y1] = gs.bounds;
                (
                    spec,
                    to_c(trig_interpolation(gs.nx, x0, x1, &out.x)),
                    to_c(trig_interpolation(gs.ny, y0, y1, &out.y)),
                    Table::Grid {
                        nx: gs.nx,
                        ny: gs.ny,
                        scale: 1.0 / g.grid.cell_area().sqrt(),
                    },
                )
            }
            Kind::Ho(ho) => {
                let spec = snapshot_spec();
                let out = crate::representation::Grid::new(spec).expect("snapshot grid is valid");
                (
                    spec,
                    to_c(ho.basis.ox.evaluate(&out.x)),
                    to_c(ho.basis.oy.evaluate(&out.y)),
                    Table::Ho(ho.basis.clone()),
                )
            }
        };
        let theta = match h.representation {
            Representation::AdiabaticNoGp => None,
            Representation::Diabatic => {
                let out = crate::representation::Grid::new(spec).expect("snapshot grid is valid");
                Some(
                    (0..out.len())
                        .map(|i| crate::model::evaluate_potentials(&h.params, out.point(i)).theta)
                        .collect(),
                )
            }
        };
        Observer {
            sampler,
            snapshot: SnapshotMap { spec, ex, ey, theta, table },
        }
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    /// Observables of a pure state; `energy` is left to the caller.
    pub fn measure(&self, v: &[c64], energy: f64) -> Sample {
        let s = self.sampler.sample(v);
        let trace = crate::linalg::norm_sqr(v);
        Sample {
            p_d: clamp_unit(self.sampler.expectation(Operator::DonorProjector, &s)),
            pop_adi_1: self.sampler.expectation(Operator::AdiabaticProjection1, &s),
            pop_adi_2: self.sampler.expectation(Operator::AdiabaticProjection2, &s),
            trace,
            energy,
        }
    }

    /// Lower-adiabatic amplitude `phi_1 . psi` at snapshot points, scaled so
    /// that its modulus squared is a density per unit area.
    pub fn lower_amplitude(&self, v: &[c64]) -> (GridSpec, Vec<c64>) {
        let m = &self.snapshot;
        let half = v.len() / 2;
        let a = m.component(&v[..half]);
        let (nx, ny) = (m.spec.nx, m.spec.ny);
        let mut amp = vec![c64::new(0.0, 0.0); nx * ny];
        match &m.theta {
            None => {
                for iy in 0..ny {
                    for ix in 0..nx {
                        amp[iy * nx + ix] = a[(ix, iy)];
                    }
                }
            }
            Some(theta) => {
                let d = m.component(&v[half..]);
                for iy in 0..ny {
                    for ix in 0..nx {
                        let k = iy * nx + ix;
                        let e = lower_adiabatic_state(theta[k]);
                        amp[k] = a[(ix, iy)] * e[0] + d[(ix, iy)] * e[1];
                    }
                }
            }
        }
        (m.spec, amp)
    }

    pub fn adiabatic_density(&self, v: &[c64], t: f64) -> DensityGrid {
        let (spec, amp) = self.lower_amplitude(v);
        DensityGrid {
            time: t,
            nx: spec.nx,
            ny: spec.ny,
            bounds: spec.bounds,
            values: amp.iter().map(|z| z.norm_sqr()).collect(),
        }
    }
}

/// Lower-adiabatic density of a state on the discretization of `h`.
pub fn adiabatic_density(state: &DensityState, h: &DiscretizedHamiltonian, t: f64) -> DensityGrid {
    let obs = Observer::new(h);
    match state {
        DensityState::Pure(v) => obs.adiabatic_density(v, t),
        DensityState::Mixed(r) => {
            // rho = sum_k w_k |u_k><u_k|
            let e = r
                .self_adjoint_eigen(faer::Side::Lower)
                .expect("Hermitian eigendecomposition");
            let (u, w) = (e.U(), e.S().column_vector());
            let spec = obs.snapshot.spec;
            let mut values = vec![0.0; spec.nx * spec.ny];
            for k in 0..r.nrows() {
                let wk = w[k].re;
                if wk.abs() < 1e-14 {
                    continue;
                }
                let col: Vec<c64> = (0..r.nrows()).map(|i| u[(i, k)]).collect();
                let (_, amp) = obs.lower_amplitude(&col);
                for (v, z) in values.iter_mut().zip(&amp) {
                    *v += wk * z.norm_sqr();
                }
            }
            DensityGrid {
                time: t,
                nx: spec.nx,
                ny: spec.ny,
                bounds: spec.bounds,
                values,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDiagnostic {
    /// Acceptor-side density within `epsilon` of the tuning line, as a
    /// fraction of all acceptor-side density. `None` when the acceptor side
    /// is empty.
    pub strip_fraction: Option<f64>,
    pub epsilon: f64,
    /// Mean fraction of the two bands of the same width flanking the strip:
    /// what the strip would hold were the density locally uniform across it.
    /// Equals `2 epsilon / L` for a uniform density.
    pub baseline: f64,
    pub acceptor_mass: f64,
}

impl NodeDiagnostic {
    /// `strip_fraction / baseline`.
    pub fn ratio(&self) -> Option<f64> {
        self.strip_fraction.map(|s| s / self.baseline)
    }
}

pub const DEFAULT_STRIP_WIDTH: f64 = 0.15;

/// Fraction of the rectangle `[x0,x1] x [y0,y1]` where `a <= n.R < b`.
fn band_fraction(x0: f64, x1: f64, y0: f64, y1: f64, n: [f64; 2], a: f64, b: f64) -> f64 {
    cdf_rect(x0, x1, y0, y1, n, b) - cdf_rect(x0, x1, y0, y1, n, a)
}

/// Fraction of the rectangle where `n.R < s` (n a unit vector).
fn cdf_rect(x0: f64, x1: f64, y0: f64, y1: f64, n: [f64; 2], s: f64) -> f64 {
    // n.R = u + v with u uniform on an interval of length p, v on length q
    let (ua, ub) = {
        let (a, b) = (n[0] * x0, n[0] * x1);
        (a.min(b), a.max(b))
    };
    let (va, vb) = {
        let (a, b) = (n[1] * y0, n[1] * y1);
        (a.min(b), a.max(b))
    };
    let (p, q) = (ub - ua, vb - va);
    let z = s - ua - va;
    if p < 1e-15 * (1.0 + q) || q < 1e-15 * (1.0 + p) {
        let len = p.max(q);
        return if len == 0.0 {
            if z > 0.0 { 1.0 } else { 0.0 }
        } else {
            (z / len).clamp(0.0, 1.0)
        };
    }
    // area of {u in [0,p], v in [0,q], u + v < z} / (p q)
    let ramp = |t: f64| if t > 0.0 { 0.5 * t * t } else { 0.0 };
    let area = ramp(z) - ramp(z - p) - ramp(z - q) + ramp(z - p - q);
    (area / (p * q)).clamp(0.0, 1.0)
}

/// Acceptor-side mass in bands of width `2 epsilon` parallel to the line
/// through both minima, as fractions of the acceptor-side mass. Band `k`
/// covers signed distances `[(k - 1/2) 2eps, (k + 1/2) 2eps)`; the returned
/// offset is the position of band 0 (the strip). Cells are split between
/// bands by exact area. `None` when the acceptor side is empty.
pub fn band_profile(g: &DensityGrid, p: &SubsystemParameters, epsilon: f64) -> (Option<(Vec<f64>, usize)>, f64) {
    let norm = p.x0.hypot(p.y0);
    let t = if norm > 0.0 { [p.x0 / norm, p.y0 / norm] } else { [1.0, 0.0] };
    let n = [-t[1], t[0]];
    let (dx, dy) = g.spacing();
    let width = 2.0 * epsilon;
    let corners = [
        [g.bounds[0], g.bounds[2]],
        [g.bounds[0], g.bounds[3]],
        [g.bounds[1], g.bounds[2]],
        [g.bounds[1], g.bounds[3]],
    ];
    let proj: Vec<f64> = corners.iter().map(|c| n[0] * c[0] + n[1] * c[1]).collect();
    let smin = proj.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kmin = (smin / width - 0.5).floor() as i64;
    let kmax = (smax / width + 0.5).ceil() as i64;
    let mut bands = vec![0.0; (kmax - kmin + 1) as usize];
    let mut total = 0.0;
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let [x, y] = g.point(ix, iy);
            if p.tuning_value(x, y) <= 0.0 {
                continue;
            }
            let rho = g.values[iy * g.nx + ix].max(0.0);
            if rho == 0.0 {
                continue;
            }
            let m = rho * dx * dy;
            total += m;
            let (x0, x1, y0, y1) = (x - 0.5 * dx, x + 0.5 * dx, y - 0.5 * dy, y + 0.5 * dy);
            let s = n[0] * x + n[1] * y;
            let half = 0.5 * (dx * n[0].abs() + dy * n[1].abs());
            let k_lo = (((s - half) / width) - 0.5).floor() as i64;
            let k_hi = (((s + half) / width) + 0.5).ceil() as i64;
            for k in k_lo.max(kmin)..=k_hi.min(kmax) {
                let a = (k as f64 - 0.5) * width;
                let b = (k as f64 + 0.5) * width;
                let f = band_fraction(x0, x1, y0, y1, n, a, b);
                if f > 0.0 {
                    bands[(k - kmin) as usize] += m * f;
                }
            }
        }
    }
    if total < 1e-12 {
        return (None, total);
    }
    bands.iter_mut().for_each(|b| *b /= total);
    (Some((bands, (-kmin) as usize)), total)
}

/// Nodal-line diagnostic about the line through both minima.
pub fn node_diagnostic(g: &DensityGrid, p: &SubsystemParameters, epsilon: f64) -> NodeDiagnostic {
    match band_profile(g, p, epsilon) {
        (None, total) => NodeDiagnostic {
            strip_fraction: None,
            epsilon,
            baseline: 0.0,
            acceptor_mass: total,
        },
        (Some((bands, c)), total) => NodeDiagnostic {
            strip_fraction: Some(bands[c].clamp(0.0, 1.0)),
            epsilon,
            baseline: 0.5 * (bands.get(c.wrapping_sub(1)).copied().unwrap_or(0.0) + bands.get(c + 1).copied().unwrap_or(0.0)),
            acceptor_mass: total,
        },
    }
}

/// Operators and snapshot amplitudes of a truncated eigenbasis, for
/// observables of density matrices expressed in that basis.
pub struct EigenObserver {
    pub p_d: Mat<f64>,
    pub adi_1: Mat<f64>,
    pub adi_2: Mat<f64>,
    pub snapshot_spec: GridSpec,
    /// Lower-adiabatic amplitude of each eigenvector at snapshot points.
    pub amplitudes: Mat<f64>,
}

impl EigenObserver {
    pub fn new(h: &DiscretizedHamiltonian, vectors: &Mat<f64>) -> EigenObserver {
        let obs = Observer::new(h);
        let s = obs.sampler();
        let k = vectors.ncols();
        let m = vectors.nrows();
        let nq = s.len();
        let mut a = Mat::<f64>::zeros(nq, k);
        let mut d = Mat::<f64>::zeros(nq, k);
        let mut col = vec![0.0; m];
        let mut amplitudes = None;
        let mut spec = GridSpec::default();
        for j in 0..k {
            for i in 0..m {
                col[i] = vectors[(i, j)];
            }
            let [sa, sd] = s.sample_real(&col);
            for q in 0..nq {
                a[(q, j)] = sa[q];
                d[(q, j)] = sd[q];
            }
            let cv: Vec<c64> = col.iter().map(|&x| c64::new(x, 0.0)).collect();
            let (sp, amp) = obs.lower_amplitude(&cv);
            spec = sp;
            let am = amplitudes.get_or_insert_with(|| Mat::<f64>::zeros(amp.len(), k));
            for (q, z) in amp.iter().enumerate() {
                am[(q, j)] = z.re;
            }
        }
        let gram = |op: Operator| -> Mat<f64> {
            let blocks = s.blocks(op);
            let wa = Mat::<f64>::from_fn(nq, k, |q, j| s.weights[q] * (blocks[q][0] * a[(q, j)] + blocks[q][1] * d[(q, j)]));
            let wd = Mat::<f64>::from_fn(nq, k, |q, j| s.weights[q] * (blocks[q][1] * a[(q, j)] + blocks[q][2] * d[(q, j)]));
            let mut g = a.transpose() * &wa + d.transpose() * &wd;
            for i in 0..k {
                for j in 0..i {
                    let v = 0.5 * (g[(i, j)] + g[(j, i)]);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            g
        };
        EigenObserver {
            p_d: gram(Operator::DonorProjector),
            adi_1: gram(Operator::AdiabaticProjection1),
            adi_2: gram(Operator::AdiabaticProjection2),
            snapshot_spec: spec,
            amplitudes: amplitudes.unwrap_or_else(|| Mat::zeros(0, 0)),
        }
    }

    fn trace_with(rho: &Mat<c64>, op: &Mat<f64>) -> f64 {
        let k = rho.nrows();
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                acc += rho[(i, j)].re * op[(j, i)];
            }
        }
        acc
    }

    pub fn measure(&self, rho: &Mat<c64>, energies: &[f64]) -> Sample {
        let k = rho.nrows();
        let trace = (0..k).map(|i| rho[(i, i)].re).sum();
        let energy = (0..k).map(|i| rho[(i, i)].re * energies[i]).sum();
        Sample {
            p_d: clamp_unit(Self::trace_with(rho, &self.p_d)),
            pop_adi_1: Self::trace_with(rho, &self.adi_1),
            pop_adi_2: Self::trace_with(rho, &self.adi_2),
            trace,
            energy,
        }
    }

    pub fn density(&self, rho: &Mat<c64>, t: f64) -> DensityGrid {
        let g = &self.amplitudes;
        let gr = Mat::<c64>::from_fn(g.nrows(), g.ncols(), |i, j| c64::new(g[(i, j)], 0.0));
        let x = &gr * rho;
        let values = (0..g.nrows())
            .map(|q| {
                let mut s = 0.0;
                for j in 0..g.ncols() {
                    s += (x[(q, j)] * g[(q, j)]).re;
                }
                s
            })
            .collect();
        DensityGrid {
            time: t,
            nx: self.snapshot_spec.nx,
            ny: self.snapshot_spec.ny,
            bounds: self.snapshot_spec.bounds,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(nx: usize, l: f64) -> DensityGrid {
        DensityGrid {
            time: 0.0,
            nx,
            ny: nx,
            bounds: [-l / 2.0, l / 2.0, -l / 2.0, l / 2.0],
            values: vec![1.0; nx * nx],
        }
    }

    #[test]
    fn cdf_rect_axis_aligned() {
        let f = cdf_rect(0.0, 1.0, 0.0, 2.0, [0.0, 1.0], 0.5);
        assert!((f - 0.25).abs() < 1e-15);
        let f = cdf_rect(0.0, 1.0, 0.0, 1.0, [0.6, 0.8], 0.7);
        // brute force
        let n = 2000;
        let mut c = 0;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                if 0.6 * x + 0.8 * y < 0.7 {
                    c += 1;
                }
            }
        }
        assert!((f - c as f64 / (n * n) as f64).abs() < 1e-3);
    }

    #[test]
    fn uniform_density_strip_equals_width_ratio() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let g = uniform(64, 12.0);
        let d = node_diagnostic(&g, &p, 0.15);
        assert!((d.strip_fraction.unwrap() - 0.3 / 12.0).abs() < 1e-6);
        assert!((d.baseline - 0.3 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn empty_acceptor_side_is_flagged() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let mut g = uniform(32, 12.0);
        for iy in 0..32 {
            for ix in 16..32 {
                g.values[iy * 32 + ix] = 0.0;
            }
        }
        assert!(node_diagnostic(&g, &p, 0.15).strip_fraction.is_none());
    }

    #[test]
    fn sine_node_strip_is_small() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let (n, l) = (128, 12.0);
        let mut g = uniform(n, l);
        for iy in 0..n {
            for ix in 0..n {
                let [_, y] = g.point(ix, iy);
                g.values[iy * n + ix] = (std::f64::consts::PI * y / l * 2.0).sin().powi(2);
            }
        }
        let d = node_diagnostic(&g, &p, 0.15);
        let strip = d.strip_fraction.unwrap();
        assert!(strip < 0.1 * (0.3 / l), "{strip}");
    }

    #[test]
    fn max_gap_over_common_times() {
        let mut a = TimeSeries::default();
        let mut b = TimeSeries::default();
        for (i, t) in [0.0, 1.0, 2.0].iter().enumerate() {
            let s = |p| Sample { p_d: p, pop_adi_1: 0.0, pop_adi_2: 0.0, trace: 1.0, energy: 0.0 };
            a.push(*t, s(1.0 - 0.1 * i as f64));
            b.push(*t, s(1.0 - 0.3 * i as f64));
        }
        assert!((max_gap(&a, &b, 10.0) - 0.4).abs() < 1e-12);
        assert!((max_gap(&a, &b, 1.0) - 0.2).abs() < 1e-12);
    }
}
