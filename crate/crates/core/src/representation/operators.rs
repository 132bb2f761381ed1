//! Observables as operators on a discretization, and pointwise sampling of
//! state vectors on a quadrature rule.

use faer::Mat;

use super::hamiltonian::{DiscretizedHamiltonian, Kind, Representation};
use super::ho::{composite_rule, HoBasis};
use crate::linalg::c64;
use crate::model::{derive_geometry, evaluate_potentials, is_donor_side, lower_adiabatic_state, upper_adiabatic_state};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    X,
    Y,
    DonorProjector,
    AdiabaticProjection1,
    AdiabaticProjection2,
}

/// Operator in the basis of a discretization.
#[derive(Clone, Debug)]
pub enum OperatorMatrix {
    /// One real symmetric 2x2 electronic block per grid node:
    /// `(b00, b01, b11)`.
    Pointwise {
        b00: Vec<f64>,
        b01: Vec<f64>,
        b11: Vec<f64>,
    },
    Dense(Mat<f64>),
}

impl OperatorMatrix {
    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        match self {
            OperatorMatrix::Pointwise { b00, b01, b11 } => {
                let n = b00.len();
                let mut out = vec![c64::new(0.0, 0.0); 2 * n];
                for i in 0..n {
                    out[i] = b00[i] * v[i] + b01[i] * v[n + i];
                    out[n + i] = b01[i] * v[i] + b11[i] * v[n + i];
                }
                out
            }
            OperatorMatrix::Dense(m) => {
                let n = m.nrows();
                (0..n)
                    .map(|i| {
                        let mut s = c64::new(0.0, 0.0);
                        for j in 0..n {
                            s += m[(i, j)] * v[j];
                        }
                        s
                    })
                    .collect()
            }
        }
    }

    pub fn expectation(&self, v: &[c64]) -> f64 {
        crate::linalg::dot_c(v, &self.apply(v)).re
    }

    pub fn to_dense(&self) -> Mat<f64> {
        match self {
            OperatorMatrix::Dense(m) => m.clone(),
            OperatorMatrix::Pointwise { b00, b01, b11 } => {
                let n = b00.len();
                let mut m = Mat::<f64>::zeros(2 * n, 2 * n);
                for i in 0..n {
                    m[(i, i)] = b00[i];
                    m[(i, n + i)] = b01[i];
                    m[(n + i, i)] = b01[i];
                    m[(n + i, n + i)] = b11[i];
                }
                m
            }
        }
    }
}

/// Electronic 2x2 block of an operator at a point with mixing angle `theta`.
fn local_block(op: Operator, rep: Representation, pt: [f64; 2], theta: f64, donor: bool) -> [f64; 3] {
    match op {
        Operator::X => [pt[0], 0.0, pt[0]],
        Operator::Y => [pt[1], 0.0, pt[1]],
        Operator::DonorProjector => {
            let d = if donor { 1.0 } else { 0.0 };
            [d, 0.0, d]
        }
        Operator::AdiabaticProjection1 | Operator::AdiabaticProjection2 => {
            let first = op == Operator::AdiabaticProjection1;
            match rep {
                Representation::AdiabaticNoGp => {
                    if first {
                        [1.0, 0.0, 0.0]
                    } else {
                        [0.0, 0.0, 1.0]
                    }
                }
                Representation::Diabatic => {
                    let v = if first {
                        lower_adiabatic_state(theta)
                    } else {
                        upper_adiabatic_state(theta)
                    };
                    [v[0] * v[0], v[0] * v[1], v[1] * v[1]]
                }
            }
        }
    }
}

/// Matrix of `op` in the discretization of `h`. Grid operators are
/// pointwise; oscillator-basis position operators are analytic and the
/// projectors are assembled by quadrature.
pub fn operator_matrix(op: Operator, h: &DiscretizedHamiltonian) -> OperatorMatrix {
    match &h.kind {
        Kind::Grid(g) => {
            let n = g.grid.len();
            let (mut b00, mut b01, mut b11) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for i in 0..n {
                let pt = g.grid.point(i);
                let donor = is_donor_side(&h.params, pt[0], pt[1]);
                let b = local_block(op, h.representation, pt, g.pot.theta[i], donor);
                b00[i] = b[0];
                b01[i] = b[1];
                b11[i] = b[2];
            }
            OperatorMatrix::Pointwise { b00, b01, b11 }
        }
        Kind::Ho(ho) => {
            let b = &ho.basis;
            let nb = b.len();
            let mut m = Mat::<f64>::zeros(2 * nb, 2 * nb);
            match op {
                Operator::X | Operator::Y => {
                    let (o, c) = if op == Operator::X { (&b.ox, b.ox.center) } else { (&b.oy, b.oy.center) };
                    let pos = o.position();
                    let id = Mat::<f64>::identity(o.n_max + 1, o.n_max + 1);
                    let a = &pos + &id * c;
                    let blk = if op == Operator::X {
                        b.separable(&a, &Mat::zeros(b.oy.n_max + 1, b.oy.n_max + 1))
                    } else {
                        b.separable(&Mat::zeros(b.ox.n_max + 1, b.ox.n_max + 1), &a)
                    };
                    for i in 0..nb {
                        for j in 0..nb {
                            m[(i, j)] = blk[(i, j)];
                            m[(nb + i, nb + j)] = blk[(i, j)];
                        }
                    }
                }
                _ => {
                    let s = Sampler::new(h);
                    let SamplerKind::Ho { hx, hy, .. } = &s.kind else { unreachable!() };
                    let nq = s.weights.len();
                    let nqy = hy.nrows();
                    // rows: basis functions at quadrature points, scaled by sqrt(w)
                    let blocks: Vec<[f64; 3]> = (0..nq)
                        .map(|q| local_block(op, h.representation, s.points[q], s.theta[q], s.donor[q]))
                        .collect();
                    let chunk = 4096;
                    for start in (0..nq).step_by(chunk) {
                        let end = (start + chunk).min(nq);
                        let rows = end - start;
                        let phi = Mat::<f64>::from_fn(rows, nb, |r, k| {
                            let q = start + r;
                            let (ix, iy) = (q / nqy, q % nqy);
                            let (nx, ny) = b.pairs[k];
                            hx[(ix, nx)].re * hy[(iy, ny)].re
                        });
                        for (e, (r0, c0)) in [(0usize, (0, 0)), (1, (0, nb)), (2, (nb, nb))] {
                            let wphi = Mat::<f64>::from_fn(rows, nb, |r, k| {
                                let q = start + r;
                                s.weights[q] * blocks[q][e] * phi[(r, k)]
                            });
                            let g = phi.transpose() * &wphi;
                            for i in 0..nb {
                                for j in 0..nb {
                                    m[(r0 + i, c0 + j)] += g[(i, j)];
                                }
                            }
                        }
                    }
                    for i in 0..nb {
                        for j in 0..nb {
                            m[(nb + i, j)] = m[(j, nb + i)];
                        }
                    }
                }
            }
            OperatorMatrix::Dense(m)
        }
    }
}

#[derive(Debug)]
pub(crate) enum SamplerKind {
    Grid,
    Ho {
        basis: Box<HoBasis>,
        hx: Mat<c64>,
        hy: Mat<c64>,
    },
}

/// Quadrature rule on which state vectors are evaluated pointwise.
///
/// Grid scheme: the grid nodes themselves with unit weights, so sampled
/// values are the discrete-normalized amplitudes. Oscillator basis: a
/// tensor Gauss-Legendre rule split at the intersection and, when it is
/// axis-aligned, at the degeneracy line.
#[derive(Debug)]
pub struct Sampler {
    pub representation: crate::representation::Representation,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub theta: Vec<f64>,
    pub donor: Vec<bool>,
    pub(crate) kind: SamplerKind,
}

impl Sampler {
    pub fn new(h: &DiscretizedHamiltonian) -> Sampler {
        let p = &h.params;
        match &h.kind {
            Kind::Grid(g) => {
                let n = g.grid.len();
                let points: Vec<[f64; 2]> = (0..n).map(|i| g.grid.point(i)).collect();
                let donor = points.iter().map(|q| is_donor_side(p, q[0], q[1])).collect();
                Sampler {
                    representation: h.representation,
                    points,
                    weights: vec![1.0; n],
                    theta: g.pot.theta.clone(),
                    donor,
                    kind: SamplerKind::Grid,
                }
            }
            Kind::Ho(ho) => Self::ho_rule(h, &ho.basis),
        }
    }

    fn ho_rule(h: &DiscretizedHamiltonian, b: &HoBasis) -> Sampler {
        let p = &h.params;
        let mut bx = Vec::new();
        let mut by = Vec::new();
        if let Ok(geo) = derive_geometry(p) {
            if let Some(ci) = geo.ci_point {
                bx.push(ci[0]);
                by.push(ci[1]);
            }
            let [a, bb, c0] = geo.degeneracy_line;
            if bb == 0.0 && a != 0.0 {
                bx.push(-c0 / a);
            }
            if a == 0.0 && bb != 0.0 {
                by.push(-c0 / bb);
            }
        }
        let (ex, ey) = (b.ox.extent(), b.oy.extent());
        let per_x = 2.0 * ((2.0 * b.ox.n_max as f64 + 1.0) * b.ox.w).sqrt() / std::f64::consts::PI + 4.0;
        let per_y = 2.0 * ((2.0 * b.oy.n_max as f64 + 1.0) * b.oy.w).sqrt() / std::f64::consts::PI + 4.0;
        let (xs, wx) = composite_rule(b.ox.center - ex, b.ox.center + ex, &bx, per_x, 24);
        let (ys, wy) = composite_rule(b.oy.center - ey, b.oy.center + ey, &by, per_y, 24);
        let to_c = |m: Mat<f64>| Mat::<c64>::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0));
        let hx = to_c(b.ox.evaluate(&xs));
        let hy = to_c(b.oy.evaluate(&ys));
        let mut points = Vec::with_capacity(xs.len() * ys.len());
        let mut weights = Vec::with_capacity(xs.len() * ys.len());
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                points.push([x, y]);
                weights.push(wx[i] * wy[j]);
            }
        }
        let theta = points.iter().map(|&q| evaluate_potentials(p, q).theta).collect();
        let donor = points.iter().map(|q| is_donor_side(p, q[0], q[1])).collect();
        Sampler {
            representation: h.representation,
            points,
            weights,
            theta,
            donor,
            kind: SamplerKind::Ho {
                basis: Box::new(b.clone()),
                hx,
                hy,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Values of both components at the rule's points.
    pub fn sample(&self, v: &[c64]) -> [Vec<c64>; 2] {
        match &self.kind {
            SamplerKind::Grid => {
                let n = v.len() / 2;
                [v[..n].to_vec(), v[n..].to_vec()]
            }
            SamplerKind::Ho { basis, hx, hy } => {
                let nb = basis.len();
                let comp = |c: &[c64]| -> Vec<c64> {
                    let t = basis.to_table(c);
                    let cm = Mat::<c64>::from_fn(t.len(), t[0].len(), |i, j| t[i][j]);
                    let vals = hx * &cm * hy.transpose();
                    let nqy = hy.nrows();
                    (0..self.len()).map(|q| vals[(q / nqy, q % nqy)]).collect()
                };
                [comp(&v[..nb]), comp(&v[nb..])]
            }
        }
    }

    /// Sample a real coefficient vector.
    pub fn sample_real(&self, v: &[f64]) -> [Vec<f64>; 2] {
        let c: Vec<c64> = v.iter().map(|&x| c64::new(x, 0.0)).collect();
        let [a, b] = self.sample(&c);
        [a.iter().map(|z| z.re).collect(), b.iter().map(|z| z.re).collect()]
    }

    /// Projection of a pointwise function `f(point) -> (A, D)` onto the
    /// oscillator basis; `None` for grids.
    pub fn project(&self, f: &[[f64; 2]]) -> Option<Vec<c64>> {
        let SamplerKind::Ho { basis, hx, hy } = &self.kind else {
            return None;
        };
        let nqy = hy.nrows();
        let nqx = hx.nrows();
        let mut out = vec![c64::new(0.0, 0.0); 2 * basis.len()];
        for comp in 0..2 {
            let fm = Mat::<c64>::from_fn(nqx, nqy, |i, j| {
                let q = i * nqy + j;
                c64::new(self.weights[q] * f[q][comp], 0.0)
            });
            let c = hx.transpose() * &fm * hy;
            for (k, &(nx, ny)) in basis.pairs.iter().enumerate() {
                out[comp * basis.len() + k] = c[(nx, ny)];
            }
        }
        Some(out)
    }

    /// Pointwise 2x2 block of `op` at every rule point.
    pub fn blocks(&self, op: Operator) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|q| local_block(op, self.representation, self.points[q], self.theta[q], self.donor[q]))
            .collect()
    }

    /// `<v|op|v>` from sampled values.
    pub fn expectation(&self, op: Operator, s: &[Vec<c64>; 2]) -> f64 {
        let mut acc = 0.0;
        for q in 0..self.len() {
            let b = local_block(op, self.representation, self.points[q], self.theta[q], self.donor[q]);
            let (a, d) = (s[0][q], s[1][q]);
            acc += self.weights[q] * (b[0] * a.norm_sqr() + 2.0 * b[1] * (a.conj() * d).re + b[2] * d.norm_sqr());
        }
        acc
    }
}
