//! Second-order time-convolutionless master equation for the subsystem
//! coupled to a discretized Ohmic bath.
//!
//! The density operator is propagated in the interaction picture of the
//! truncated `H_S` eigenbasis, so the unitary part is exact and RK4 only
//! integrates the dissipator.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, herm_eigvals};
use crate::model::{BathParameters, SystemBathModel};
use crate::observables::{DensityGrid, EigenObserver, TimeSeries};
use crate::representation::eigen::{solve_dense, solve_lowest, EigenRequest};
use crate::representation::{
    operator_matrix, DensityState, DiscretizedHamiltonian, Eigensystem, Operator, OperatorMatrix, SchemeTag,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OhmicSpec {
    pub xi: f64,
    #[serde(rename = "Omega_c")]
    pub omega_c: f64,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    /// Defaults to three times the cutoff.
    #[serde(rename = "Omega_max", default)]
    pub omega_max: Option<f64>,
    pub couple_to: Axis,
    #[serde(default)]
    pub temperature: f64,
}

fn default_n_modes() -> usize {
    100
}

impl OhmicSpec {
    pub fn new(xi: f64, omega_c: f64, couple_to: Axis) -> OhmicSpec {
        OhmicSpec {
            xi,
            omega_c,
            n_modes: default_n_modes(),
            omega_max: None,
            couple_to,
            temperature: 0.0,
        }
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max.unwrap_or(3.0 * self.omega_c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::param("xi", "must be finite and non-negative"));
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(Error::param("Omega_c", "must be positive"));
        }
        if self.n_modes < 1 {
            return Err(Error::param("n_modes", "must be at least 1"));
        }
        if !(self.omega_max() > 0.0) {
            return Err(Error::param("Omega_max", "must be positive"));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::param("temperature", "must be non-negative"));
        }
        Ok(())
    }
}

/// Logarithmic discretization of the Ohmic density `J(w) ~ xi w exp(-w/w_c)`.
pub fn discretize_ohmic(spec: &OhmicSpec) -> Result<BathParameters> {
    spec.validate()?;
    let (wc, n) = (spec.omega_c, spec.n_modes);
    let w0 = wc * (1.0 - (-spec.omega_max() / wc).exp()) / n as f64;
    let mut omega = Vec::with_capacity(n);
    for j in 1..=n {
        let arg = 1.0 - j as f64 * w0 / wc;
        if arg <= 0.0 {
            return Err(Error::param("Omega_max", "logarithm argument is not positive"));
        }
        omega.push(-wc * arg.ln());
    }
    let lambda: Vec<f64> = omega.iter().map(|w| w * (spec.xi * w0).sqrt()).collect();
    let zero = vec![0.0; n];
    let (lambda_x, lambda_y) = match spec.couple_to {
        Axis::X => (lambda, zero),
        Axis::Y => (zero, lambda),
    };
    Ok(BathParameters {
        omega,
        lambda_x,
        lambda_y,
        temperature: spec.temperature,
    })
}

pub(crate) fn occupation(w: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        0.0
    } else {
        1.0 / (w / temperature).exp_m1()
    }
}

/// `<q_j(t) q_j(0)>` of a bath oscillator with unit mass.
pub fn bath_correlation(omega: f64, temperature: f64, t: f64) -> Result<c64> {
    if temperature < 0.0 {
        return Err(Error::param("temperature", "must be non-negative"));
    }
    let n = occupation(omega, temperature);
    let e = c64::from_polar(1.0, -omega * t);
    Ok((e + 2.0 * n * (omega * t).cos()) / (2.0 * omega))
}

/// `int_0^t exp(-i a s) ds`, with a series near `a = 0`.
pub(crate) fn phase_integral(a: f64, t: f64) -> c64 {
    let z = a * t;
    if z.abs() < 1e-4 {
        // t (1 - i z/2 - z^2/6 + i z^3/24)
        c64::new(t * (1.0 - z * z / 6.0), t * (-z / 2.0 + z * z * z / 24.0))
    } else {
        (c64::new(1.0, 0.0) - c64::from_polar(1.0, -z)) / c64::new(0.0, a)
    }
}

/// `eta_j(w, t) = int_0^t exp(-i w s) C_j(s) ds`.
pub fn dressed_integral(w: f64, omega: f64, temperature: f64, t: f64) -> c64 {
    let n = occupation(omega, temperature);
    let mut eta = (1.0 + n) * phase_integral(w + omega, t);
    if n != 0.0 {
        eta += n * phase_integral(w - omega, t);
    }
    eta / (2.0 * omega)
}

/// One exponential term `w exp(-i nu t)` of a bath correlation function
/// weighted by a pair of couplings.
#[derive(Clone, Copy, Debug)]
struct Term {
    weight: f64,
    nu: f64,
}

fn kernel_terms(bath: &BathParameters, la: &[f64], lb: &[f64]) -> Vec<Term> {
    let mut out = Vec::new();
    for j in 0..bath.len() {
        let g = la[j] * lb[j];
        if g == 0.0 {
            continue;
        }
        let w = bath.omega[j];
        let n = occupation(w, bath.temperature);
        out.push(Term {
            weight: g * (1.0 + n) / (2.0 * w),
            nu: w,
        });
        if n != 0.0 {
            out.push(Term {
                weight: g * n / (2.0 * w),
                nu: -w,
            });
        }
    }
    out
}

/// Kernel `S(w_mn, t) = sum_k w_k int_0^t exp(-i (w_mn + nu_k) s) ds` for every
/// pair of a truncated eigenbasis, evaluated on batches of times.
///
/// Uses `S = S0 - exp(-i w t) sum_k P_k exp(-i nu_k t)` with
/// `P_k = w_k / (i (w + nu_k))`; near-resonant pairs are summed directly.
struct Kernel {
    k: usize,
    omega: Vec<f64>,
    nu: Vec<f64>,
    p: Mat<c64>,
    s0: Vec<c64>,
    direct: Vec<(usize, Term)>,
}

const RESONANCE_GUARD: f64 = 1e-6;

impl Kernel {
    fn new(energies: &[f64], terms: &[Term]) -> Kernel {
        let k = energies.len();
        let nt = terms.len();
        let mut p = Mat::<c64>::zeros(k * k, nt);
        let mut s0 = vec![c64::new(0.0, 0.0); k * k];
        let mut direct = Vec::new();
        let mut omega = vec![0.0; k * k];
        for m in 0..k {
            for n in 0..k {
                let idx = m * k + n;
                let w = energies[m] - energies[n];
                omega[idx] = w;
                for (c, t) in terms.iter().enumerate() {
                    let a = w + t.nu;
                    if a.abs() < RESONANCE_GUARD {
                        direct.push((idx, *t));
                    } else {
                        let v = c64::new(0.0, -t.weight / a);
                        p[(idx, c)] = v;
                        s0[idx] += v;
                    }
                }
            }
        }
        Kernel {
            k,
            omega,
            nu: terms.iter().map(|t| t.nu).collect(),
            p,
            s0,
            direct,
        }
    }

    /// Column `c` of the result holds `S(w_mn, times[c])` at row `m k + n`.
    fn evaluate(&self, times: &[f64]) -> Mat<c64> {
        let kk = self.k * self.k;
        let e = Mat::<c64>::from_fn(self.nu.len(), times.len(), |j, c| c64::from_polar(1.0, -self.nu[j] * times[c]));
        let pe = &self.p * &e;
        let mut s = Mat::<c64>::zeros(kk, times.len());
        for (c, &t) in times.iter().enumerate() {
            for idx in 0..kk {
                s[(idx, c)] = self.s0[idx] - c64::from_polar(1.0, -self.omega[idx] * t) * pe[(idx, c)];
            }
            for &(idx, term) in &self.direct {
                s[(idx, c)] += term.weight * phase_integral(self.omega[idx] + term.nu, t);
            }
        }
        s
    }
}

/// Dissipator ingredients for one coupling axis `a`:
/// `B_a(t) = sum_b A_b o S_ab(t)`.
struct Channel {
    a: Mat<c64>,
    /// `(A_b, kernel S_ab)` contributions.
    parts: Vec<(Mat<c64>, Kernel)>,
}

/// Dressed operators and kernels in a truncated eigenbasis.
pub struct DressedCache {
    pub energies: Vec<f64>,
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    channels: Vec<Channel>,
}

impl DressedCache {
    pub fn new(energies: &[f64], x: Mat<f64>, y: Mat<f64>, bath: &BathParameters) -> DressedCache {
        let to_c = |m: &Mat<f64>| Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0));
        let ops = [(to_c(&x), &bath.lambda_x), (to_c(&y), &bath.lambda_y)];
        let mut channels = Vec::new();
        for (a, la) in &ops {
            if la.iter().all(|&v| v == 0.0) {
                continue;
            }
            let mut parts = Vec::new();
            for (b, lb) in &ops {
                let terms = kernel_terms(bath, la, lb);
                if !terms.is_empty() {
                    parts.push((b.clone(), Kernel::new(energies, &terms)));
                }
            }
            channels.push(Channel { a: a.clone(), parts });
        }
        DressedCache {
            energies: energies.to_vec(),
            x,
            y,
            channels,
        }
    }

    pub fn is_coupled(&self) -> bool {
        !self.channels.is_empty()
    }

    /// `S_ab(w_mn, t)` for the first channel and part, row-major `K x K`.
    pub fn kernel_sum(&self, t: f64) -> Option<Mat<c64>> {
        let k = self.energies.len();
        let part = self.channels.first()?.parts.first()?;
        let s = part.1.evaluate(&[t]);
        Some(Mat::from_fn(k, k, |m, n| s[(m * k + n, 0)]))
    }

    fn kernels_at(&self, times: &[f64]) -> Vec<Vec<Mat<c64>>> {
        self.channels
            .iter()
            .map(|ch| ch.parts.iter().map(|(_, kern)| kern.evaluate(times)).collect())
            .collect()
    }

    /// `B_a` for every channel at column `c` of precomputed kernels.
    fn dressed(&self, kernels: &[Vec<Mat<c64>>], c: usize) -> Vec<Mat<c64>> {
        let k = self.energies.len();
        self.channels
            .iter()
            .zip(kernels)
            .map(|(ch, ks)| {
                let mut b = Mat::<c64>::zeros(k, k);
                for ((ab, _), s) in ch.parts.iter().zip(ks) {
                    for m in 0..k {
                        for n in 0..k {
                            b[(m, n)] += ab[(m, n)] * s[(m * k + n, c)];
                        }
                    }
                }
                b
            })
            .collect()
    }

    /// Dissipative part `-(Z + Z^dagger)`, `Z = sum_a [A_a, B_a rho]`.
    fn dissipator(&self, rho: &Mat<c64>, b: &[Mat<c64>]) -> Mat<c64> {
        let k = rho.nrows();
        let mut z = Mat::<c64>::zeros(k, k);
        for (ch, ba) in self.channels.iter().zip(b) {
            let m = ba * rho;
            z += &ch.a * &m;
            z -= &m * &ch.a;
        }
        Mat::from_fn(k, k, |i, j| -(z[(i, j)] + z[(j, i)].conj()))
    }
}

/// Full TCL2 generator in the Schrodinger picture at time `t`:
/// `-i[H_S, rho] - sum_a ([A_a, B_a rho] + h.c.)`.
pub fn tcl2_rhs(rho: &Mat<c64>, t: f64, cache: &DressedCache) -> Mat<c64> {
    let k = rho.nrows();
    let kernels = cache.kernels_at(&[t]);
    let b = cache.dressed(&kernels, 0);
    let mut d = if cache.is_coupled() {
        cache.dissipator(rho, &b)
    } else {
        Mat::zeros(k, k)
    };
    let e = &cache.energies;
    for m in 0..k {
        for n in 0..k {
            d[(m, n)] += c64::new(0.0, -(e[m] - e[n])) * rho[(m, n)];
        }
    }
    d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenPlan {
    pub t_final: f64,
    #[serde(default = "default_dt_output")]
    pub dt_output: f64,
    /// RK4 step.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Keep every eigenstate below `E_0 + window`.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Keep enough states to capture `1 - capture_tol` of the initial state.
    #[serde(default = "default_capture")]
    pub capture_tol: f64,
    /// Upper limit on the basis size.
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    /// Extra states on top of the rules, for convergence checks.
    #[serde(default)]
    pub extra_states: usize,
}

fn default_dt_output() -> f64 {
    0.5
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

impl OpenPlan {
    pub fn new(t_final: f64) -> OpenPlan {
        OpenPlan {
            t_final,
            dt_output: default_dt_output(),
            step: default_step(),
            snapshot_times: Vec::new(),
            window: default_window(),
            capture_tol: default_capture(),
            max_states: default_max_states(),
            extra_states: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("t_final", "must be finite and non-negative"));
        }
        if !(self.dt_output > 0.0) {
            return Err(Error::param("dt_output", "must be positive"));
        }
        if !(self.step > 0.0 && self.step <= 0.01 + 1e-15) {
            return Err(Error::param("step", "must lie in (0, 0.01]"));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_final + 1e-9).contains(&t)) {
            return Err(Error::param("snapshot_times", format!("{t} lies outside [0, t_final]")));
        }
        if self.max_states < 1 {
            return Err(Error::param("max_states", "must be at least 1"));
        }
        Ok(())
    }

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
pub struct OpenRun {
    pub series: TimeSeries,
    pub snapshots: Vec<DensityGrid>,
    /// Final density operator in the truncated eigenbasis.
    pub final_rho: Mat<c64>,
    pub basis_size: usize,
    /// Weight of the initial state inside the truncated basis.
    pub captured_weight: f64,
    /// Most negative eigenvalue of rho seen at the samples.
    pub min_eigenvalue: f64,
    /// Largest `max |rho - rho^dagger|` before symmetrization.
    pub max_hermiticity_residual: f64,
}

/// Number of eigenstates to keep for an initial state with eigenbasis
/// weights `weights`.
pub fn truncation_size(energies: &[f64], weights: &[f64], plan: &OpenPlan) -> usize {
    let e0 = energies[0];
    let by_window = energies.iter().take_while(|&&e| e <= e0 + plan.window).count();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut by_capture = weights.len();
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= (1.0 - plan.capture_tol) * total.max(1.0 - 1e-15) {
            by_capture = i + 1;
            break;
        }
    }
    (by_window.max(by_capture) + plan.extra_states).min(energies.len()).min(plan.max_states)
}

/// Eigenpairs used by the master equation: `h.eigen` when present,
/// otherwise a dense solve (oscillator basis) or subspace iteration.
pub fn eigenbasis_for(h: &DiscretizedHamiltonian, plan: &OpenPlan) -> Result<Eigensystem> {
    if let Some(e) = &h.eigen {
        return Ok(e.clone());
    }
    if h.scheme() == SchemeTag::HoBasis || h.dim() <= 1200 {
        return solve_dense(h);
    }
    let req = EigenRequest {
        window: Some(plan.window),
        max_count: plan.max_states,
        min_count: (plan.extra_states + 1).min(plan.max_states),
        ..EigenRequest::default()
    };
    let mut e = solve_lowest(h, &req)?;
    if plan.extra_states > 0 {
        let want = e.len() + plan.extra_states;
        let req = EigenRequest {
            window: None,
            min_count: want.min(plan.max_states),
            ..req
        };
        e = solve_lowest(h, &req)?;
    }
    Ok(e)
}

/// `V^T O V` for an operator on the full discretization.
pub fn project_operator(op: &OperatorMatrix, v: &Mat<f64>) -> Mat<f64> {
    let ov = match op {
        OperatorMatrix::Pointwise { b00, b01, b11 } => {
            let n = b00.len();
            Mat::<f64>::from_fn(v.nrows(), v.ncols(), |i, j| {
                if i < n {
                    b00[i] * v[(i, j)] + b01[i] * v[(n + i, j)]
                } else {
                    let q = i - n;
                    b01[q] * v[(q, j)] + b11[q] * v[(i, j)]
                }
            })
        }
        OperatorMatrix::Dense(m) => m * v,
    };
    let mut r = v.transpose() * &ov;
    let k = r.nrows();
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = s;
            r[(j, i)] = s;
        }
    }
    r
}

/// Coefficients of a pure state in a set of real eigenvectors.
fn coefficients(v: &Mat<f64>, psi: &[c64]) -> Vec<c64> {
    (0..v.ncols())
        .map(|j| {
            let mut s = c64::new(0.0, 0.0);
            for i in 0..v.nrows() {
                s += v[(i, j)] * psi[i];
            }
            s
        })
        .collect()
}

/// Propagate `rho0` under TCL2 with the bath of `model`.
pub fn propagate_tcl2(
    model: &SystemBathModel,
    h: &DiscretizedHamiltonian,
    rho0: &DensityState,
    plan: &OpenPlan,
) -> Result<OpenRun> {
    plan.validate()?;
    let eig = eigenbasis_for(h, plan)?;
    let DensityState::Pure(psi) = rho0 else {
        return Err(Error::Unsupported(
            "the master equation starts from the pure initial state".into(),
        ));
    };
    let c_all = coefficients(&eig.vectors, psi);
    let weights: Vec<f64> = c_all.iter().map(|z| z.norm_sqr()).collect();
    let k = truncation_size(&eig.energies, &weights, plan);
    let eig = eig.truncated(k);
    let c = &c_all[..k];
    let captured: f64 = weights[..k].iter().sum();
    let full = crate::linalg::norm_sqr(psi);
    if full - captured > plan.capture_tol * full {
        log::warn!(
            "truncated eigenbasis of {k} states captures {captured:.8} of the initial state"
        );
    }
    log::info!("master equation in {k} eigenstates, captured weight {captured:.10}");
    let obs = EigenObserver::new(h, &eig.vectors);
    let x = project_operator(&operator_matrix(Operator::X, h), &eig.vectors);
    let y = project_operator(&operator_matrix(Operator::Y, h), &eig.vectors);
    let cache = DressedCache::new(&eig.energies, x, y, &model.bath);
    let mut rho = Mat::<c64>::from_fn(k, k, |m, n| c[m] * c[n].conj() / captured);
    run_interaction_picture(&cache, &obs, &mut rho, plan).map(|mut run| {
        run.basis_size = k;
        run.captured_weight = captured / full;
        run
    })
}

/// `a + s b`.
fn axpy(a: &Mat<c64>, b: &Mat<c64>, s: f64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)] * s)
}

fn phases(e: &[f64], t: f64) -> Vec<c64> {
    e.iter().map(|&x| c64::from_polar(1.0, -x * t)).collect()
}

/// `rho_mn = rt_mn exp(-i (E_m - E_n) t)`.
fn to_schrodinger(rt: &Mat<c64>, ph: &[c64]) -> Mat<c64> {
    Mat::from_fn(rt.nrows(), rt.ncols(), |m, n| rt[(m, n)] * ph[m] * ph[n].conj())
}

fn run_interaction_picture(
    cache: &DressedCache,
    obs: &EigenObserver,
    rho_t: &mut Mat<c64>,
    plan: &OpenPlan,
) -> Result<OpenRun> {
    let k = rho_t.nrows();
    let e = &cache.energies;
    let mut series = TimeSeries::default();
    let mut snapshots = Vec::new();
    let mut min_eig = f64::INFINITY;
    let mut herm_res: f64 = 0.0;
    let tr0: f64 = (0..k).map(|i| rho_t[(i, i)].re).sum();
    let coupled = cache.is_coupled();
    let mut t = 0.0;
    for (ts, record, snap) in plan.stops() {
        if ts > t + 1e-12 {
            let n = ((ts - t) / plan.step - 1e-9).ceil().max(1.0) as usize;
            let h = (ts - t) / n as f64;
            if coupled {
                let times: Vec<f64> = (0..=2 * n).map(|i| t + 0.5 * h * i as f64).collect();
                let kernels = cache.kernels_at(&times);
                let rhs = |r: &Mat<c64>, c: usize| -> Mat<c64> {
                    let ph = phases(e, times[c]);
                    let rs = to_schrodinger(r, &ph);
                    let b = cache.dressed(&kernels, c);
                    let d = cache.dissipator(&rs, &b);
                    // back to the interaction picture
                    Mat::from_fn(k, k, |m, q| d[(m, q)] * ph[m].conj() * ph[q])
                };
                for s in 0..n {
                    let c0 = 2 * s;
                    let k1 = rhs(rho_t, c0);
                    let k2 = rhs(&axpy(rho_t, &k1, 0.5 * h), c0 + 1);
                    let k3 = rhs(&axpy(rho_t, &k2, 0.5 * h), c0 + 1);
                    let k4 = rhs(&axpy(rho_t, &k3, h), c0 + 2);
                    for i in 0..k {
                        for j in 0..k {
                            rho_t[(i, j)] += (k1[(i, j)] + 2.0 * (k2[(i, j)] + k3[(i, j)]) + k4[(i, j)]) * (h / 6.0);
                        }
                    }
                    let mut res: f64 = 0.0;
                    for i in 0..k {
                        for j in 0..i {
                            let (a, b) = (rho_t[(i, j)], rho_t[(j, i)]);
                            res = res.max((a - b.conj()).norm());
                            let s = 0.5 * (a + b.conj());
                            rho_t[(i, j)] = s;
                            rho_t[(j, i)] = s.conj();
                        }
                        res = res.max(rho_t[(i, i)].im.abs());
                        rho_t[(i, i)] = c64::new(rho_t[(i, i)].re, 0.0);
                    }
                    herm_res = herm_res.max(res);
                }
            }
            t = ts;
        }
        let rho = to_schrodinger(rho_t, &phases(e, t));
        let lo = herm_eigvals(&rho)?.first().copied().unwrap_or(0.0);
        min_eig = min_eig.min(lo);
        if lo < -1e-2 {
            return Err(Error::PositivityViolation {
                value: lo,
                limit: -1e-2,
                t,
            });
        }
        if lo < -1e-4 {
            log::warn!("density operator eigenvalue {lo:.3e} at t = {t}");
        }
        if record {
            let s = obs.measure(&rho, e);
            let drift = (s.trace - tr0).abs();
            if drift > 1e-8 * (1.0 + t / 100.0) {
                log::warn!("trace drift {drift:.2e} at t = {t}");
            }
            series.push(t, s);
        }
        if snap {
            snapshots.push(obs.density(&rho, t));
        }
    }
    Ok(OpenRun {
        series,
        snapshots,
        final_rho: to_schrodinger(rho_t, &phases(e, t)),
        basis_size: k,
        captured_weight: 1.0,
        min_eigenvalue: min_eig,
        max_hermiticity_residual: herm_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ohmic_grid_matches_closed_form() {
        let b = discretize_ohmic(&OhmicSpec::new(0.1, 3.5, Axis::Y)).unwrap();
        assert!((b.omega[0] - 0.03341646904638852).abs() < 1e-14);
        assert!((b.omega[99] - 10.5).abs() < 1e-10);
        assert!(b.lambda_x.iter().all(|&v| v == 0.0));
        let w0: f64 = 0.03325745260712476;
        assert!((b.lambda_y[0] - b.omega[0] * (0.1 * w0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_strength_gives_zero_couplings() {
        let b = discretize_ohmic(&OhmicSpec::new(0.0, 3.5, Axis::X)).unwrap();
        assert!(b.lambda_x.iter().chain(&b.lambda_y).all(|&v| v == 0.0));
    }

    #[test]
    fn correlation_values() {
        assert!((bath_correlation(2.0, 0.0, 0.0).unwrap() - c64::new(0.25, 0.0)).norm() < 1e-15);
        let c = bath_correlation(2.0, 0.0, std::f64::consts::PI).unwrap();
        assert!((c - c64::new(0.25, 0.0)).norm() < 1e-14);
        let c = bath_correlation(2.0, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((c - c64::new(-0.25, 0.0)).norm() < 1e-14);
        assert!(bath_correlation(2.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn high_temperature_correlation_is_classical() {
        let (w, t) = (0.5, 200.0);
        let c = bath_correlation(w, t, 0.0).unwrap();
        // coth(w/2T)/(2w) ~ T/w^2 + 1/12T
        assert!((c.re - (t / (w * w) + 1.0 / (12.0 * t))).abs() < 1e-6);
    }

    #[test]
    fn dressed_integral_values() {
        let eta = dressed_integral(1.0, 2.0, 0.0, 1.0);
        assert!((eta - c64::new(0.011760000671655602, -0.1658327080500371)).norm() < 1e-12);
        assert_eq!(dressed_integral(0.7, 2.0, 0.0, 0.0), c64::new(0.0, 0.0));
        let r = dressed_integral(-2.0, 2.0, 0.0, 3.0);
        assert!((r - c64::new(0.75, 0.0)).norm() < 1e-15);
        // continuity across the series switch
        let a = dressed_integral(-2.0 + 2e-5, 2.0, 0.0, 3.0);
        let b = dressed_integral(-2.0 + 6e-5, 2.0, 0.0, 3.0);
        assert!((a - b).norm() < 1e-4);
    }

    #[test]
    fn kernel_split_form_matches_direct_sum() {
        let bath = discretize_ohmic(&OhmicSpec {
            n_modes: 7,
            ..OhmicSpec::new(0.2, 1.5, Axis::X)
        })
        .unwrap();
        // one Bohr frequency sits on a bath frequency
        let e = [0.0, 0.3, 0.3 + bath.omega[2], 2.1];
        let terms = kernel_terms(&bath, &bath.lambda_x, &bath.lambda_x);
        let kern = Kernel::new(&e, &terms);
        assert!(!kern.direct.is_empty());
        let times = [0.0, 0.37, 5.0];
        let s = kern.evaluate(&times);
        for (c, &t) in times.iter().enumerate() {
            for m in 0..4 {
                for n in 0..4 {
                    let direct: c64 = (0..bath.len())
                        .map(|j| bath.lambda_x[j].powi(2) * dressed_integral(e[m] - e[n], bath.omega[j], 0.0, t))
                        .sum();
                    assert!((s[(m * 4 + n, c)] - direct).norm() < 1e-12, "{m} {n} {t}");
                }
            }
        }
    }

    /// Two-level system, one bath mode: the generator against an explicit
    /// entry-by-entry construction.
    #[test]
    fn two_level_generator_matches_hand_built() {
        let bath = BathParameters {
            omega: vec![1.3],
            lambda_x: vec![0.4],
            lambda_y: vec![0.0],
            temperature: 0.0,
        };
        let e = [0.2, 1.1];
        let x = Mat::<f64>::from_fn(2, 2, |i, j| [[0.3, 0.7], [0.7, -0.5]][i][j]);
        let y = Mat::<f64>::zeros(2, 2);
        let cache = DressedCache::new(&e, x.clone(), y, &bath);
        let rho = Mat::<c64>::from_fn(2, 2, |i, j| {
            [[c64::new(0.6, 0.0), c64::new(0.1, 0.2)], [c64::new(0.1, -0.2), c64::new(0.4, 0.0)]][i][j]
        });
        let t = 0.8;
        let d = tcl2_rhs(&rho, t, &cache);
        // hand-built
        let eta = |m: usize, n: usize| 0.16 * dressed_integral(e[m] - e[n], 1.3, 0.0, t);
        let b = |m: usize, n: usize| x[(m, n)] * eta(m, n);
        let mut want = [[c64::new(0.0, 0.0); 2]; 2];
        for m in 0..2 {
            for n in 0..2 {
                let mut z = c64::new(0.0, -(e[m] - e[n])) * rho[(m, n)];
                for p in 0..2 {
                    for q in 0..2 {
                        // [X, B rho]_mn and its adjoint
                        z -= x[(m, p)] * b(p, q) * rho[(q, n)] - b(m, p) * rho[(p, q)] * x[(q, n)];
                        z -= (x[(n, p)] * b(p, q) * rho[(q, m)] - b(n, p) * rho[(p, q)] * x[(q, m)]).conj();
                    }
                }
                want[m][n] = z;
            }
        }
        for m in 0..2 {
            for n in 0..2 {
                assert!((d[(m, n)] - want[m][n]).norm() < 1e-12);
            }
        }
        let tr = d[(0, 0)] + d[(1, 1)];
        assert!(tr.norm() < 1e-15);
        assert!((d[(0, 1)] - d[(1, 0)].conj()).norm() < 1e-15);
    }

    #[test]
    fn generator_is_unitary_at_time_zero() {
        let bath = discretize_ohmic(&OhmicSpec {
            n_modes: 5,
            ..OhmicSpec::new(0.3, 2.0, Axis::Y)
        })
        .unwrap();
        let e = [0.0, 1.0, 2.5];
        let y = Mat::<f64>::from_fn(3, 3, |i, j| 0.1 * (i + j) as f64);
        let cache = DressedCache::new(&e, Mat::zeros(3, 3), y, &bath);
        let rho = Mat::<c64>::from_fn(3, 3, |i, j| c64::new(if i == j { 1.0 / 3.0 } else { 0.05 }, 0.0));
        let d = tcl2_rhs(&rho, 0.0, &cache);
        for m in 0..3 {
            for n in 0..3 {
                let want = c64::new(0.0, -(e[m] - e[n])) * rho[(m, n)];
                assert!((d[(m, n)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn truncation_rule() {
        let e: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let mut w = vec![0.0; 20];
        w[0] = 0.9;
        w[18] = 0.1;
        let mut plan = OpenPlan::new(1.0);
        plan.window = 5.0;
        assert_eq!(truncation_size(&e, &w, &plan), 19);
        w[18] = 0.0;
        w[0] = 1.0;
        assert_eq!(truncation_size(&e, &w, &plan), 6);
        plan.extra_states = 50;
        assert_eq!(truncation_size(&e, &w, &plan), 20);
    }
}
