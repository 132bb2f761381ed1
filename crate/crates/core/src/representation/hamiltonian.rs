use faer::Mat;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridSpec};
use super::ho::{HoBasis, HoBasisSpec};
use crate::error::{Error, Result};
use crate::linalg::{c64, sym_eigh};
use crate::model::{derive_geometry, evaluate_potentials, SubsystemParameters};

/// Electronic representation of the subsystem Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    /// Diabatic states; the geometric phase is carried implicitly.
    #[serde(rename = "with-gp")]
    Diabatic,
    /// Single-valued adiabatic states; the geometric phase is dropped.
    #[serde(rename = "no-gp")]
    AdiabaticNoGp,
}

impl Representation {
    pub fn label(&self) -> &'static str {
        match self {
            Representation::Diabatic => "with-gp",
            Representation::AdiabaticNoGp => "no-gp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchemeSpec {
    #[serde(rename = "grid")]
    Grid(GridSpec),
    #[serde(rename = "ho-basis")]
    Ho(HoBasisSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeTag {
    Grid,
    HoBasis,
}

/// Eigenpairs, energies ascending, vectors as columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub energies: Vec<f64>,
    pub vectors: Mat<f64>,
    /// True when every eigenpair of the discretization is present.
    pub complete: bool,
}

impl Eigensystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Keep only the first `k` pairs.
    pub fn truncated(&self, k: usize) -> Eigensystem {
        let k = k.min(self.len());
        Eigensystem {
            energies: self.energies[..k].to_vec(),
            vectors: self.vectors.subcols(0, k).to_owned(),
            complete: self.complete && k == self.len(),
        }
    }
}

#[derive(Debug)]
pub(crate) struct GridPotentials {
    /// Diagonal of component 0 (V_A or W1 + |F|^2/2).
    pub u0: Vec<f64>,
    /// Diagonal of component 1 (V_D or W2 + |F|^2/2).
    pub u1: Vec<f64>,
    /// Diabatic coupling V_c (zero in the adiabatic representation).
    pub vc: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct GridOperator {
    pub grid: Grid,
    pub kin: Vec<f64>,
    pub kdx: Vec<f64>,
    pub kdy: Vec<f64>,
    pub pot: GridPotentials,
}

#[derive(Debug)]
pub(crate) struct HoOperator {
    pub basis: HoBasis,
    pub matrix: Mat<f64>,
}

#[derive(Debug)]
pub(crate) enum Kind {
    Grid(GridOperator),
    Ho(HoOperator),
}

/// Subsystem Hamiltonian on a grid or oscillator basis. Vectors hold the
/// component-0 block followed by the component-1 block; components are
/// (A, D) in the diabatic representation and (1, 2) in the adiabatic one.
#[derive(Debug)]
pub struct DiscretizedHamiltonian {
    pub representation: Representation,
    pub params: SubsystemParameters,
    pub(crate) kind: Kind,
    pub eigen: Option<Eigensystem>,
}

/// Mass outside `[a, b]` of the ground-state density `sqrt(w/pi) exp(-w (x-c)^2)`.
fn gaussian_tail(w: f64, c: f64, a: f64, b: f64) -> f64 {
    use statrs::function::erf::erfc;
    let s = w.sqrt();
    0.5 * erfc(s * (b - c)) + 0.5 * erfc(s * (c - a))
}

/// Shifts the grid by half a spacing when the intersection sits on a node
/// and checks that the initial wavepacket fits.
fn place_grid(p: &SubsystemParameters, spec: GridSpec) -> Result<GridSpec> {
    spec.validate()?;
    let (dx, dy) = spec.spacing();
    let [x0, x1, y0, y1] = spec.bounds;
    let mut spec = spec;
    if let Ok(geo) = derive_geometry(p) {
        if let Some([cx, cy]) = geo.ci_point {
            let fx = ((cx - x0) / dx - 0.5).rem_euclid(1.0);
            let fy = ((cy - y0) / dy - 0.5).rem_euclid(1.0);
            let near = |f: f64| f.min(1.0 - f) < 0.25;
            if near(fx) && near(fy) {
                log::warn!(
                    "intersection ({cx:.4}, {cy:.4}) lies on a grid node; shifting grid by half a spacing"
                );
                spec = spec.shifted(0.5 * dx, 0.5 * dy);
            }
        }
    }
    let [dmx, dmy] = p.donor_minimum();
    let tail = gaussian_tail(p.omega_x, dmx, x0, x1) + gaussian_tail(p.omega_y, dmy, y0, y1);
    if tail > 1e-6 {
        return Err(Error::GridTooSmall(format!(
            "initial wavepacket has {tail:.2e} of its mass outside the box"
        )));
    }
    for (name, m, w, lo, hi) in [
        ("X", [p.x0, -p.x0], p.omega_x, x0, x1),
        ("Y", [p.y0, -p.y0], p.omega_y, y0, y1),
    ] {
        let width = 1.0 / (2.0 * w).sqrt();
        if m.iter().any(|&c| c - 3.0 * width < lo || c + 3.0 * width > hi) {
            log::warn!("box along {name} leaves less than three ground-state widths around a minimum");
        }
    }
    Ok(spec)
}

fn grid_operator(p: &SubsystemParameters, spec: GridSpec, rep: Representation) -> Result<GridOperator> {
    let spec = place_grid(p, spec)?;
    let grid = Grid::new(spec)?;
    let n = grid.len();
    let mut pot = GridPotentials {
        u0: vec![0.0; n],
        u1: vec![0.0; n],
        vc: vec![0.0; n],
        fx: vec![0.0; n],
        fy: vec![0.0; n],
        theta: vec![0.0; n],
    };
    for i in 0..n {
        let e = evaluate_potentials(p, grid.point(i));
        pot.theta[i] = e.theta;
        match rep {
            Representation::Diabatic => {
                pot.u0[i] = e.v_a;
                pot.u1[i] = e.v_d;
                pot.vc[i] = e.v_c;
                if let Some(f) = e.f {
                    pot.fx[i] = f[0];
                    pot.fy[i] = f[1];
                }
            }
            Representation::AdiabaticNoGp => {
                let f = e.f.ok_or_else(|| {
                    Error::GridTooSmall("a grid node coincides with the intersection".into())
                })?;
                let dbo = 0.5 * (f[0] * f[0] + f[1] * f[1]);
                pot.u0[i] = e.w1 + dbo;
                pot.u1[i] = e.w2 + dbo;
                pot.fx[i] = f[0];
                pot.fy[i] = f[1];
            }
        }
    }
    let (kdx, kdy) = grid.derivative_wavenumbers();
    Ok(GridOperator {
        kin: grid.kinetic_multiplier(),
        kdx,
        kdy,
        grid,
        pot,
    })
}

pub fn build_diabatic(p: &SubsystemParameters, scheme: &SchemeSpec) -> Result<DiscretizedHamiltonian> {
    let kind = match scheme {
        SchemeSpec::Grid(g) => Kind::Grid(grid_operator(p, *g, Representation::Diabatic)?),
        SchemeSpec::Ho(h) => {
            let basis = HoBasis::new(*h, p)?;
            let matrix = ho_matrix(p, &basis);
            Kind::Ho(HoOperator { basis, matrix })
        }
    };
    Ok(DiscretizedHamiltonian {
        representation: Representation::Diabatic,
        params: *p,
        kind,
        eigen: None,
    })
}

pub fn build_adiabatic_no_gp(p: &SubsystemParameters, scheme: &SchemeSpec) -> Result<DiscretizedHamiltonian> {
    let SchemeSpec::Grid(g) = scheme else {
        return Err(Error::Unsupported(
            "the adiabatic representation is available on the grid scheme only".into(),
        ));
    };
    Ok(DiscretizedHamiltonian {
        representation: Representation::AdiabaticNoGp,
        params: *p,
        kind: Kind::Grid(grid_operator(p, *g, Representation::AdiabaticNoGp)?),
        eigen: None,
    })
}

pub fn build(p: &SubsystemParameters, scheme: &SchemeSpec, rep: Representation) -> Result<DiscretizedHamiltonian> {
    match rep {
        Representation::Diabatic => build_diabatic(p, scheme),
        Representation::AdiabaticNoGp => build_adiabatic_no_gp(p, scheme),
    }
}

fn ho_matrix(p: &SubsystemParameters, b: &HoBasis) -> Mat<f64> {
    let nb = b.len();
    let (ox, oy) = (&b.ox, &b.oy);
    let (x1, x2, px) = (ox.position(), ox.position_sq(), ox.momentum_sq());
    let (y1, y2, py) = (oy.position(), oy.position_sq(), oy.momentum_sq());
    let idx = Mat::<f64>::identity(ox.n_max + 1, ox.n_max + 1);
    let idy = Mat::<f64>::identity(oy.n_max + 1, oy.n_max + 1);
    let (wx2, wy2) = (p.omega_x * p.omega_x, p.omega_y * p.omega_y);
    // 0.5 p^2 + 0.5 w^2 (x' + c - m)^2 with x = c + x'
    let axis = |p2: &Mat<f64>, q1: &Mat<f64>, q2: &Mat<f64>, id: &Mat<f64>, w2: f64, s: f64| {
        let mut h = p2 * 0.5 + q2 * (0.5 * w2);
        h += q1 * (w2 * s);
        h += id * (0.5 * w2 * s * s);
        h
    };
    let hax = axis(&px, &x1, &x2, &idx, wx2, ox.center - p.x0);
    let hay = axis(&py, &y1, &y2, &idy, wy2, oy.center - p.y0);
    let hdx = axis(&px, &x1, &x2, &idx, wx2, ox.center + p.x0);
    let hdy = axis(&py, &y1, &y2, &idy, wy2, oy.center + p.y0);
    let ha = b.separable(&(hax - &idx * (0.5 * p.delta)), &hay);
    let hd = b.separable(&(hdx + &idx * (0.5 * p.delta)), &hdy);
    let vcx = &x1 * p.c_x + &idx * (p.c_x * ox.center + p.delta12);
    let vcy = &y1 * p.c_y + &idy * (p.c_y * oy.center);
    let vc = b.separable(&vcx, &vcy);
    let mut m = Mat::<f64>::zeros(2 * nb, 2 * nb);
    for i in 0..nb {
        for j in 0..nb {
            m[(i, j)] = ha[(i, j)];
            m[(nb + i, nb + j)] = hd[(i, j)];
            m[(i, nb + j)] = vc[(i, j)];
            m[(nb + i, j)] = vc[(j, i)];
        }
    }
    m
}

impl DiscretizedHamiltonian {
    pub fn scheme(&self) -> SchemeTag {
        match self.kind {
            Kind::Grid(_) => SchemeTag::Grid,
            Kind::Ho(_) => SchemeTag::HoBasis,
        }
    }

    /// Dimension M: twice the nuclear basis size.
    pub fn dim(&self) -> usize {
        2 * self.nuclear_len()
    }

    pub fn nuclear_len(&self) -> usize {
        match &self.kind {
            Kind::Grid(g) => g.grid.len(),
            Kind::Ho(h) => h.basis.len(),
        }
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.kind {
            Kind::Grid(g) => Some(&g.grid),
            Kind::Ho(_) => None,
        }
    }

    pub fn ho_basis(&self) -> Option<&HoBasis> {
        match &self.kind {
            Kind::Grid(_) => None,
            Kind::Ho(h) => Some(&h.basis),
        }
    }

    /// Mixing angle at each grid node.
    pub fn grid_theta(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Grid(g) => Some(&g.pot.theta),
            Kind::Ho(_) => None,
        }
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[c64], out: &mut [c64]) {
        assert_eq!(v.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        match &self.kind {
            Kind::Ho(h) => {
                let m = &h.matrix;
                let n = m.nrows();
                for (i, o) in out.iter_mut().enumerate() {
                    let (mut re, mut im) = (0.0, 0.0);
                    for j in 0..n {
                        let a = m[(j, i)];
                        re += a * v[j].re;
                        im += a * v[j].im;
                    }
                    *o = c64::new(re, im);
                }
            }
            Kind::Grid(g) => match self.representation {
                Representation::Diabatic => apply_grid_diabatic(g, v, out),
                Representation::AdiabaticNoGp => apply_grid_adiabatic(g, v, out, true),
            },
        }
    }

    /// Derivative-coupling term alone (adiabatic grid only).
    pub(crate) fn apply_coupling(&self, v: &[c64], out: &mut [c64]) {
        match (&self.kind, self.representation) {
            (Kind::Grid(g), Representation::AdiabaticNoGp) => apply_grid_adiabatic(g, v, out, false),
            _ => out.iter_mut().for_each(|z| *z = c64::new(0.0, 0.0)),
        }
    }

    pub(crate) fn grid_operator(&self) -> Option<&GridOperator> {
        match &self.kind {
            Kind::Grid(g) => Some(g),
            Kind::Ho(_) => None,
        }
    }

    /// Apply to a block of vectors stored as matrix columns.
    pub fn apply_block(&self, v: &Mat<c64>) -> Mat<c64> {
        if let Kind::Ho(h) = &self.kind {
            let mc = Mat::<c64>::from_fn(h.matrix.nrows(), h.matrix.ncols(), |i, j| {
                c64::new(h.matrix[(i, j)], 0.0)
            });
            return mc * v;
        }
        let m = self.dim();
        let mut out = Mat::<c64>::zeros(m, v.ncols());
        let mut x = vec![c64::new(0.0, 0.0); m];
        let mut y = vec![c64::new(0.0, 0.0); m];
        for j in 0..v.ncols() {
            for i in 0..m {
                x[i] = v[(i, j)];
            }
            self.apply(&x, &mut y);
            for i in 0..m {
                out[(i, j)] = y[i];
            }
        }
        out
    }

    /// Dense real symmetric matrix. Built column by column for grids, so
    /// meant for small discretizations.
    pub fn dense_matrix(&self) -> Mat<f64> {
        match &self.kind {
            Kind::Ho(h) => h.matrix.clone(),
            Kind::Grid(_) => {
                let m = self.dim();
                let mut out = Mat::<f64>::zeros(m, m);
                let mut e = vec![c64::new(0.0, 0.0); m];
                let mut col = vec![c64::new(0.0, 0.0); m];
                for j in 0..m {
                    e[j] = c64::new(1.0, 0.0);
                    self.apply(&e, &mut col);
                    e[j] = c64::new(0.0, 0.0);
                    for i in 0..m {
                        out[(i, j)] = col[i].re;
                    }
                }
                // exact symmetry removes round-off asymmetry of the FFT path
                for i in 0..m {
                    for j in 0..i {
                        let s = 0.5 * (out[(i, j)] + out[(j, i)]);
                        out[(i, j)] = s;
                        out[(j, i)] = s;
                    }
                }
                out
            }
        }
    }

    /// Guaranteed enclosure `[lo, hi]` of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Ho(h) => {
                // Gershgorin discs
                let m = &h.matrix;
                let n = m.nrows();
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..n {
                    let r: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
                    lo = lo.min(m[(i, i)] - r);
                    hi = hi.max(m[(i, i)] + r);
                }
                (lo, hi)
            }
            Kind::Grid(g) => {
                let pot = &g.pot;
                let n = g.grid.len();
                let [kx, ky] = g.grid.k_max();
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                match self.representation {
                    Representation::Diabatic => {
                        for i in 0..n {
                            let m = 0.5 * (pot.u0[i] + pot.u1[i]);
                            let r = (0.25 * (pot.u1[i] - pot.u0[i]).powi(2) + pot.vc[i].powi(2)).sqrt();
                            lo = lo.min(m - r);
                            hi = hi.max(m + r);
                        }
                        (lo, hi + 0.5 * (kx * kx + ky * ky))
                    }
                    Representation::AdiabaticNoGp => {
                        let (mut fxm, mut fym) = (0.0f64, 0.0f64);
                        for i in 0..n {
                            let dbo = 0.5 * (pot.fx[i].powi(2) + pot.fy[i].powi(2));
                            lo = lo.min(pot.u0[i] - dbo);
                            hi = hi.max(pot.u1[i] - dbo);
                            fxm = fxm.max(pot.fx[i].abs());
                            fym = fym.max(pot.fy[i].abs());
                        }
                        // T + tau = sum_mu K_mu^T K_mu / 2 + Nyquist part, ||K_mu|| <= k + |F|
                        let kin = 0.5 * ((kx + fxm).powi(2) + (ky + fym).powi(2)) + 0.5 * (kx * kx + ky * ky);
                        (lo, hi + kin)
                    }
                }
            }
        }
    }

    /// Estimate of the largest eigenvalue by Lanczos, used to tighten the
    /// upper spectral bound.
    pub fn estimate_max_eigenvalue(&self, steps: usize) -> f64 {
        let m = self.dim();
        let mut v: Vec<c64> = (0..m)
            .map(|i| {
                let t = (i as f64 * 0.6180339887498949).fract();
                c64::new(t - 0.5, 0.0)
            })
            .collect();
        let nrm = crate::linalg::norm_sqr(&v).sqrt();
        v.iter_mut().for_each(|z| *z /= nrm);
        let mut basis: Vec<Vec<c64>> = vec![v];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![c64::new(0.0, 0.0); m];
        for k in 0..steps.min(m) {
            self.apply(&basis[k], &mut w);
            let a = crate::linalg::dot_c(&basis[k], &w).re;
            alpha.push(a);
            // full reorthogonalization
            for b in &basis {
                let p = crate::linalg::dot_c(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
            let bn = crate::linalg::norm_sqr(&w).sqrt();
            if bn < 1e-12 {
                break;
            }
            beta.push(bn);
            basis.push(w.iter().map(|z| z / bn).collect());
        }
        let k = alpha.len();
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let (vals, vecs) = sym_eigh(&t).expect("tridiagonal eigenproblem");
        // residual bound of the top Ritz pair
        let res = beta.get(k - 1).copied().unwrap_or(0.0) * vecs[(k - 1, k - 1)].abs();
        vals[k - 1] + res
    }

    /// `<v|H|v>` for a normalized `v`.
    pub fn expectation(&self, v: &[c64]) -> f64 {
        let mut hv = vec![c64::new(0.0, 0.0); v.len()];
        self.apply(v, &mut hv);
        crate::linalg::dot_c(v, &hv).re
    }
}

fn apply_grid_diabatic(g: &GridOperator, v: &[c64], out: &mut [c64]) {
    let grid = &g.grid;
    let n = grid.len();
    let mut ws = grid.workspace(1);
    let (va, vd) = v.split_at(n);
    let (oa, od) = out.split_at_mut(n);
    let p = &g.pot;
    for (src, dst) in [(va, &mut *oa), (vd, &mut *od)] {
        let b = &mut ws.bufs[0];
        b.copy_from_slice(src);
        grid.fft(b, &mut ws.fs);
        for (z, t) in b.iter_mut().zip(&g.kin) {
            *z *= *t;
        }
        grid.ifft(b, &mut ws.fs);
        dst.copy_from_slice(b);
    }
    for i in 0..n {
        oa[i] += p.u0[i] * va[i] + p.vc[i] * vd[i];
        od[i] += p.u1[i] * vd[i] + p.vc[i] * va[i];
    }
    grid.release(ws);
}

/// Adiabatic `H v`, or only the derivative-coupling part when `diagonal`
/// is false.
fn apply_grid_adiabatic(g: &GridOperator, v: &[c64], out: &mut [c64], diagonal: bool) {
    let on = if diagonal { 1.0 } else { 0.0 };
    let grid = &g.grid;
    let n = grid.len();
    let (nx, ny) = (grid.nx, grid.ny);
    let mut ws = grid.workspace(6);
    let (c1, c2) = v.split_at(n);
    let (o1, o2) = out.split_at_mut(n);
    let p = &g.pot;
    let fs = &mut ws.fs;
    let [b0, b1, b2, b3, b4, b5] = &mut ws.bufs[..6] else {
        unreachable!()
    };
    let i_ = c64::new(0.0, 1.0);

    b0.copy_from_slice(c1);
    grid.fft(b0, fs);
    b1.copy_from_slice(c2);
    grid.fft(b1, fs);

    // component 1: T c1 - (1/2) div(F c2), spectrally
    for i in 0..n {
        b2[i] = p.fx[i] * c2[i];
        b3[i] = p.fy[i] * c2[i];
    }
    grid.fft(b2, fs);
    grid.fft(b3, fs);
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            let div = i_ * (g.kdx[ix] * b2[k] + g.kdy[iy] * b3[k]);
            b2[k] = on * g.kin[k] * b0[k] - 0.5 * div;
        }
    }
    grid.ifft(b2, fs);

    // component 2: T c2 + (1/2) div(F c1)
    for i in 0..n {
        b3[i] = p.fx[i] * c1[i];
        b4[i] = p.fy[i] * c1[i];
    }
    grid.fft(b3, fs);
    grid.fft(b4, fs);
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            let div = i_ * (g.kdx[ix] * b3[k] + g.kdy[iy] * b4[k]);
            b3[k] = on * g.kin[k] * b1[k] + 0.5 * div;
        }
    }
    grid.ifft(b3, fs);

    // gradient of c2 for the F.grad term of component 1
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            b4[k] = i_ * g.kdx[ix] * b1[k];
            b5[k] = i_ * g.kdy[iy] * b1[k];
        }
    }
    grid.ifft(b4, fs);
    grid.ifft(b5, fs);
    for i in 0..n {
        o1[i] = b2[i] + on * p.u0[i] * c1[i] - 0.5 * (p.fx[i] * b4[i] + p.fy[i] * b5[i]);
    }

    // gradient of c1 for component 2
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            b4[k] = i_ * g.kdx[ix] * b0[k];
            b5[k] = i_ * g.kdy[iy] * b0[k];
        }
    }
    grid.ifft(b4, fs);
    grid.ifft(b5, fs);
    for i in 0..n {
        o2[i] = b3[i] + on * p.u1[i] * c2[i] + 0.5 * (p.fx[i] * b4[i] + p.fy[i] * b5[i]);
    }
    grid.release(ws);
}
