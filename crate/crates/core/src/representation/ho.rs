//! Product harmonic-oscillator basis with a total-quanta truncation.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SubsystemParameters;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoBasisSpec {
    pub n_max_x: usize,
    pub n_max_y: usize,
    /// Cap on `n_x + n_y`; `None` keeps the full product.
    #[serde(default)]
    pub n_total: Option<usize>,
    /// Reference oscillator centre; defaults to the origin.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    /// Reference frequencies; default to the subsystem frequencies.
    #[serde(default)]
    pub frequencies: Option<[f64; 2]>,
}

impl Default for HoBasisSpec {
    fn default() -> Self {
        HoBasisSpec {
            n_max_x: 40,
            n_max_y: 40,
            n_total: Some(60),
            center: None,
            frequencies: None,
        }
    }
}

impl HoBasisSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_max_x < 1 {
            return Err(Error::param("n_max_x", "cutoff must be at least 1"));
        }
        if self.n_max_y < 1 {
            return Err(Error::param("n_max_y", "cutoff must be at least 1"));
        }
        if let Some(f) = self.frequencies {
            if !(f[0] > 0.0 && f[1] > 0.0) {
                return Err(Error::param("frequencies", "must be positive"));
            }
        }
        Ok(())
    }
}

/// One-dimensional oscillator `h_n(x)` with frequency `w` centred at `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillator1d {
    pub n_max: usize,
    pub center: f64,
    pub w: f64,
}

impl Oscillator1d {
    /// Values `h_0..=h_{n_max}` at each point, one row per point.
    pub fn evaluate(&self, pts: &[f64]) -> Mat<f64> {
        let n = self.n_max + 1;
        let mut m = Mat::<f64>::zeros(pts.len(), n);
        let norm = (self.w / std::f64::consts::PI).powf(0.25);
        for (i, &x) in pts.iter().enumerate() {
            let xi = self.w.sqrt() * (x - self.center);
            let mut prev = 0.0;
            let mut cur = norm * (-0.5 * xi * xi).exp();
            m[(i, 0)] = cur;
            for k in 0..n - 1 {
                let kf = k as f64;
                let next = (2.0 / (kf + 1.0)).sqrt() * xi * cur - (kf / (kf + 1.0)).sqrt() * prev;
                prev = cur;
                cur = next;
                m[(i, k + 1)] = cur;
            }
        }
        m
    }

    /// Matrix elements of `x - center` in the truncated basis.
    pub fn position(&self) -> Mat<f64> {
        let n = self.n_max + 1;
        let s = 1.0 / (2.0 * self.w).sqrt();
        Mat::from_fn(n, n, |i, j| {
            if j == i + 1 {
                s * (j as f64).sqrt()
            } else if i == j + 1 {
                s * (i as f64).sqrt()
            } else {
                0.0
            }
        })
    }

    /// Exact projection of `(x - center)^2`.
    pub fn position_sq(&self) -> Mat<f64> {
        let n = self.n_max + 1;
        let s = 1.0 / (2.0 * self.w);
        Mat::from_fn(n, n, |i, j| {
            let (lo, hi) = (i.min(j), i.max(j));
            if i == j {
                s * (2.0 * i as f64 + 1.0)
            } else if hi == lo + 2 {
                s * (((lo + 1) * (lo + 2)) as f64).sqrt()
            } else {
                0.0
            }
        })
    }

    /// Exact projection of `p^2`.
    pub fn momentum_sq(&self) -> Mat<f64> {
        let n = self.n_max + 1;
        let s = 0.5 * self.w;
        Mat::from_fn(n, n, |i, j| {
            let (lo, hi) = (i.min(j), i.max(j));
            if i == j {
                s * (2.0 * i as f64 + 1.0)
            } else if hi == lo + 2 {
                -s * (((lo + 1) * (lo + 2)) as f64).sqrt()
            } else {
                0.0
            }
        })
    }

    /// Half-width beyond which every basis function is negligible.
    pub fn extent(&self) -> f64 {
        ((2.0 * self.n_max as f64 + 1.0) / self.w).sqrt() + 7.0 / self.w.sqrt()
    }
}

/// Truncated product basis `|n_x> |n_y>` for one electronic state.
#[derive(Clone, Debug)]
pub struct HoBasis {
    pub spec: HoBasisSpec,
    pub ox: Oscillator1d,
    pub oy: Oscillator1d,
    /// `(n_x, n_y)` of each basis function.
    pub pairs: Vec<(usize, usize)>,
    lookup: Vec<Option<usize>>,
}

impl HoBasis {
    pub fn new(spec: HoBasisSpec, p: &SubsystemParameters) -> Result<HoBasis> {
        spec.validate()?;
        let c = spec.center.unwrap_or([0.0, 0.0]);
        let f = spec.frequencies.unwrap_or([p.omega_x, p.omega_y]);
        let cap = spec.n_total.unwrap_or(usize::MAX);
        let mut pairs = Vec::new();
        let mut lookup = vec![None; (spec.n_max_x + 1) * (spec.n_max_y + 1)];
        for nx in 0..=spec.n_max_x {
            for ny in 0..=spec.n_max_y {
                if nx + ny <= cap {
                    lookup[nx * (spec.n_max_y + 1) + ny] = Some(pairs.len());
                    pairs.push((nx, ny));
                }
            }
        }
        Ok(HoBasis {
            spec,
            ox: Oscillator1d {
                n_max: spec.n_max_x,
                center: c[0],
                w: f[0],
            },
            oy: Oscillator1d {
                n_max: spec.n_max_y,
                center: c[1],
                w: f[1],
            },
            pairs,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn index(&self, nx: usize, ny: usize) -> Option<usize> {
        if nx > self.spec.n_max_x || ny > self.spec.n_max_y {
            return None;
        }
        self.lookup[nx * (self.spec.n_max_y + 1) + ny]
    }

    /// Assemble `hx (x) 1 + 1 (x) hy` restricted to the basis.
    pub fn separable(&self, hx: &Mat<f64>, hy: &Mat<f64>) -> Mat<f64> {
        let n = self.len();
        let mut m = Mat::<f64>::zeros(n, n);
        for (i, &(nx, ny)) in self.pairs.iter().enumerate() {
            for kx in nx.saturating_sub(2)..=(nx + 2).min(self.spec.n_max_x) {
                let v = hx[(nx, kx)];
                if v != 0.0 {
                    if let Some(j) = self.index(kx, ny) {
                        m[(i, j)] += v;
                    }
                }
            }
            for ky in ny.saturating_sub(2)..=(ny + 2).min(self.spec.n_max_y) {
                let v = hy[(ny, ky)];
                if v != 0.0 {
                    if let Some(j) = self.index(nx, ky) {
                        m[(i, j)] += v;
                    }
                }
            }
        }
        m
    }

    /// Coefficient vector as an `(n_max_x+1) x (n_max_y+1)` table.
    pub fn to_table<T: Copy + Default>(&self, c: &[T]) -> Vec<Vec<T>> {
        let mut t = vec![vec![T::default(); self.spec.n_max_y + 1]; self.spec.n_max_x + 1];
        for (i, &(nx, ny)) in self.pairs.iter().enumerate() {
            t[nx][ny] = c[i];
        }
        t
    }
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
    (
        x.iter().map(|z| m + h * z).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Composite Gauss-Legendre rule on `[a, b]` with breakpoints.
pub fn composite_rule(a: f64, b: f64, breaks: &[f64], per_unit: f64, min_pts: usize) -> (Vec<f64>, Vec<f64>) {
    let mut edges = vec![a];
    for &c in breaks {
        if c > a && c < b {
            edges.push(c);
        }
    }
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for e in edges.windows(2) {
        let n = ((e[1] - e[0]) * per_unit).ceil().max(min_pts as f64) as usize;
        let (x, w) = gauss_legendre(n, e[0], e[1]);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7, -1.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        let exact = (2f64.powi(13) + 1.0) / 13.0;
        assert!((s - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn oscillator_functions_are_orthonormal() {
        let o = Oscillator1d {
            n_max: 40,
            center: 0.3,
            w: 2.0,
        };
        let e = o.extent();
        let (x, w) = composite_rule(0.3 - e, 0.3 + e, &[0.3], 12.0, 40);
        let h = o.evaluate(&x);
        for i in 0..=40 {
            for j in 0..=40 {
                let s: f64 = (0..x.len()).map(|k| w[k] * h[(k, i)] * h[(k, j)]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "{i} {j} {s}");
            }
        }
    }

    #[test]
    fn position_element() {
        let o = Oscillator1d {
            n_max: 3,
            center: 0.0,
            w: 2.0,
        };
        assert!((o.position()[(1, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn basis_size_with_total_cap() {
        let b = HoBasis::new(HoBasisSpec::default(), &SubsystemParameters::symmetric(2.0, 1.5, 3.0)).unwrap();
        assert_eq!(b.len(), 1471);
    }
}
