//! Eigensolvers: dense for small discretizations, Chebyshev-filtered
//! subspace iteration for the low end of large grid Hamiltonians.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hamiltonian::{DiscretizedHamiltonian, Eigensystem};
use crate::error::{Error, Result};
use crate::linalg::{c64, sym_eigh};

/// Which part of the spectrum to resolve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenRequest {
    /// Keep every state with `E <= E_0 + window`.
    pub window: Option<f64>,
    /// Keep at least this many states.
    pub min_count: usize,
    /// Never keep more than this many states.
    pub max_count: usize,
    /// Residual tolerance relative to the spectral radius.
    pub tol: f64,
}

impl Default for EigenRequest {
    fn default() -> Self {
        EigenRequest {
            window: Some(15.0),
            min_count: 1,
            max_count: 600,
            tol: 1e-8,
        }
    }
}

/// Every eigenpair from a dense diagonalization.
pub fn solve_dense(h: &DiscretizedHamiltonian) -> Result<Eigensystem> {
    let (energies, vectors) = sym_eigh(&h.dense_matrix())?;
    Ok(Eigensystem {
        energies,
        vectors,
        complete: true,
    })
}

/// `H V` for real column blocks, two columns per complex application.
pub fn apply_real_block(h: &DiscretizedHamiltonian, v: &Mat<f64>) -> Mat<f64> {
    let m = v.nrows();
    let p = v.ncols();
    let mut out = Mat::<f64>::zeros(m, p);
    let mut x = vec![c64::new(0.0, 0.0); m];
    let mut y = vec![c64::new(0.0, 0.0); m];
    let mut j = 0;
    while j < p {
        let pair = j + 1 < p;
        for i in 0..m {
            x[i] = c64::new(v[(i, j)], if pair { v[(i, j + 1)] } else { 0.0 });
        }
        h.apply(&x, &mut y);
        for i in 0..m {
            out[(i, j)] = y[i].re;
            if pair {
                out[(i, j + 1)] = y[i].im;
            }
        }
        j += 2;
    }
    out
}

fn orthonormalize(v: &Mat<f64>) -> Mat<f64> {
    v.qr().compute_thin_Q()
}

struct Ritz {
    vals: Vec<f64>,
    v: Mat<f64>,
    res: Vec<f64>,
}

fn rayleigh_ritz(h: &DiscretizedHamiltonian, v: &Mat<f64>) -> Result<Ritz> {
    let hv = apply_real_block(h, v);
    let mut g = v.transpose() * &hv;
    let p = g.nrows();
    for i in 0..p {
        for j in 0..i {
            let s = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    let (vals, w) = sym_eigh(&g)?;
    let v2 = v * &w;
    let hv2 = hv * &w;
    let res = (0..p)
        .map(|k| {
            (0..v2.nrows())
                .map(|i| (hv2[(i, k)] - vals[k] * v2[(i, k)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(Ritz { vals, v: v2, res })
}

/// Scaled Chebyshev filter damping `[a, b]`; `a0` estimates the bottom.
fn chebyshev_filter(h: &DiscretizedHamiltonian, x: &Mat<f64>, m: usize, a: f64, b: f64, a0: f64) -> Mat<f64> {
    let e = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let mut sigma = e / (a0 - c);
    let tau = 2.0 / sigma;
    let mut x = x.clone();
    let mut y = (apply_real_block(h, &x) - &x * c) * (sigma / e);
    for _ in 1..m {
        let sigma_new = 1.0 / (tau - sigma);
        let ynew = (apply_real_block(h, &y) - &y * c) * (2.0 * sigma_new / e) - &x * (sigma * sigma_new);
        x = y;
        y = ynew;
        sigma = sigma_new;
    }
    y
}

fn random_block(m: usize, p: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(m, p, |_, _| rng.random::<f64>() - 0.5)
}

/// Lowest eigenpairs of a grid Hamiltonian by Chebyshev-filtered subspace
/// iteration. Deterministic: the starting block comes from a fixed seed.
pub fn solve_lowest(h: &DiscretizedHamiltonian, req: &EigenRequest) -> Result<Eigensystem> {
    let m = h.dim();
    if m <= 1200 {
        let full = solve_dense(h)?;
        let keep = count_wanted(&full.energies, req).min(full.len());
        let mut out = full.truncated(keep);
        out.complete = keep == m;
        return Ok(out);
    }
    let (lo, hi_bound) = h.spectral_bounds();
    let hi = h.estimate_max_eigenvalue(40).min(hi_bound) * 1.01;
    let norm = lo.abs().max(hi.abs());
    let tol = req.tol * norm;
    let guard = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6770_6369);
    let mut p = (req.min_count.max(32) + guard).min(m);
    let mut v = orthonormalize(&random_block(m, p, &mut rng));
    let mut ritz = rayleigh_ritz(h, &v)?;
    let degree = 20;
    for iter in 0..200 {
        let a = ritz.vals[p - 1];
        let filtered = chebyshev_filter(h, &ritz.v, degree, a, hi, ritz.vals[0]);
        v = orthonormalize(&filtered);
        ritz = rayleigh_ritz(h, &v)?;
        let wanted = count_wanted(&ritz.vals, req);
        if wanted + guard > p {
            if p >= req.max_count + guard || p >= m {
                log::warn!("eigen window not closed within {} states; truncating", req.max_count);
            } else {
                let extra = (p / 2).max(guard).min(req.max_count + guard - p).min(m - p);
                log::debug!("subspace grows from {p} to {}", p + extra);
                let mut grown = Mat::<f64>::zeros(m, p + extra);
                let r = random_block(m, extra, &mut rng);
                for j in 0..p {
                    for i in 0..m {
                        grown[(i, j)] = ritz.v[(i, j)];
                    }
                }
                for j in 0..extra {
                    for i in 0..m {
                        grown[(i, p + j)] = r[(i, j)];
                    }
                }
                p += extra;
                v = orthonormalize(&grown);
                ritz = rayleigh_ritz(h, &v)?;
                continue;
            }
        }
        let keep = wanted.min(req.max_count).min(p);
        let worst = ritz.res[..keep].iter().cloned().fold(0.0, f64::max);
        log::debug!("subspace iteration {iter}: p = {p}, wanted = {wanted}, worst residual {worst:.2e}");
        if worst <= tol {
            let mut vectors = Mat::<f64>::zeros(m, keep);
            for j in 0..keep {
                for i in 0..m {
                    vectors[(i, j)] = ritz.v[(i, j)];
                }
            }
            return Ok(Eigensystem {
                energies: ritz.vals[..keep].to_vec(),
                vectors,
                complete: false,
            });
        }
    }
    Err(Error::Eigen("subspace iteration did not converge".into()))
}

fn count_wanted(vals: &[f64], req: &EigenRequest) -> usize {
    let by_window = match req.window {
        Some(w) => vals.iter().take_while(|&&e| e <= vals[0] + w).count(),
        None => 0,
    };
    by_window.max(req.min_count).min(vals.len())
}
