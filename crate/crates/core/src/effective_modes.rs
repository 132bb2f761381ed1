//! Mapping of an N-mode LVC model onto a two-dimensional subsystem (tuning
//! and coupling coordinates) bilinearly coupled to N-2 harmonic bath modes.
//!
//! Steps: translate the origin to the midpoint of the diabatic minima,
//! rotate so the first two coordinates carry every electronic linear term,
//! then diagonalize the subsystem and bath blocks of the Hessian.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::sym_eigh;
use crate::model::{BathParameters, LvcParameters, SubsystemParameters, SystemBathModel};

/// LVC model in translated coordinates `q = x + shift`.
///
/// State 1 reads `sum(omega^2 q^2)/2 - d.q - Delta/2`, state 2
/// `sum(omega^2 q^2)/2 + d.q + Delta/2`, coupling `c.q + Delta12`, all up to the
/// common constant `-sum(omega^2 shift^2)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslatedModel {
    pub omega: Vec<f64>,
    pub d: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: f64,
    pub delta12: f64,
    pub shift: Vec<f64>,
}

impl TranslatedModel {
    pub fn constant(&self) -> f64 {
        -0.5 * self
            .omega
            .iter()
            .zip(&self.shift)
            .map(|(w, s)| w * w * s * s)
            .sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct OrthogonalTransform {
    /// Rows are the new coordinates: row 0 tuning, row 1 coupling, rows 2.. bath.
    pub o1: Mat<f64>,
    /// Columns are the (X, Y) directions in the (row 0, row 1) plane.
    pub subsystem_rotation: [[f64; 2]; 2],
    /// Columns are the bath normal modes in the rows 2.. block.
    pub bath_rotation: Mat<f64>,
    /// The linear couplings span only one direction.
    pub one_dimensional: bool,
}

impl OrthogonalTransform {
    fn from_rows(o1: Mat<f64>, one_dimensional: bool) -> Self {
        let nb = o1.nrows().saturating_sub(2);
        OrthogonalTransform {
            o1,
            subsystem_rotation: [[1.0, 0.0], [0.0, 1.0]],
            bath_rotation: Mat::identity(nb, nb),
            one_dimensional,
        }
    }

    /// Full orthogonal map from translated to (X, Y, Q_1, ...) coordinates.
    pub fn full_matrix(&self) -> Mat<f64> {
        let n = self.o1.nrows();
        let r = &self.subsystem_rotation;
        let mut blk = Mat::<f64>::zeros(n, n);
        // new = blkᵀ · (o1 · q)
        for i in 0..2 {
            for j in 0..2 {
                blk[(i, j)] = r[i][j];
            }
        }
        for i in 0..n - 2 {
            for j in 0..n - 2 {
                blk[(i + 2, j + 2)] = self.bath_rotation[(i, j)];
            }
        }
        blk.transpose() * &self.o1
    }
}

pub fn translate_origin(lvc: &LvcParameters) -> Result<TranslatedModel> {
    lvc.validate()?;
    let n = lvc.n_modes();
    let mut shift = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut delta = lvc.delta;
    let mut delta12 = 0.0;
    for j in 0..n {
        let w2 = lvc.omega[j] * lvc.omega[j];
        let (k, kt) = (lvc.kappa[j], lvc.kappa_tilde[j]);
        let s = (k + kt) / (2.0 * w2);
        shift.push(s);
        d.push((kt - k) / 2.0);
        delta += (k * k - kt * kt) / (2.0 * w2);
        delta12 -= lvc.c[j] * s;
    }
    Ok(TranslatedModel {
        omega: lvc.omega.clone(),
        d,
        c: lvc.c.clone(),
        delta,
        delta12,
        shift,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes keep orthogonality at round-off level
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
    }
}

/// Extend `rows` to `target` orthonormal vectors of R^n using canonical
/// axes, most-independent candidates first.
fn complete_basis(rows: &mut Vec<Vec<f64>>, n: usize, target: usize) {
    let mut cand: Vec<(f64, usize)> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            project_out(&mut e, rows);
            (norm(&e), k)
        })
        .collect();
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, k) in cand {
        if rows.len() == target {
            break;
        }
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        project_out(&mut e, rows);
        let r = norm(&e);
        if r < 1e-8 {
            continue;
        }
        e.iter_mut().for_each(|x| *x /= r);
        rows.push(e);
    }
}

pub fn separate_subsystem(t: &TranslatedModel) -> Result<OrthogonalTransform> {
    let n = t.omega.len();
    if n < 2 {
        return Err(Error::param(
            "omega",
            "at least two modes are needed for a two-dimensional subsystem",
        ));
    }
    let dn = norm(&t.d);
    let cn = norm(&t.c);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut one_dimensional = false;

    if dn == 0.0 && cn == 0.0 {
        log::warn!("no electronic linear couplings: subsystem axes default to the first two modes");
        one_dimensional = true;
        for k in 0..2 {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            rows.push(e);
        }
    } else {
        let e_d: Vec<f64> = if dn > 0.0 {
            t.d.iter().map(|x| x / dn).collect()
        } else {
            log::warn!("d = 0: tuning axis taken along c");
            t.c.iter().map(|x| x / cn).collect()
        };
        let c1 = dot(&t.c, &e_d);
        let c2 = (cn * cn - c1 * c1).max(0.0).sqrt();
        rows.push(e_d.clone());
        if cn > 0.0 && c2 >= 1e-12 * cn {
            let mut r2: Vec<f64> = t.c.iter().zip(&e_d).map(|(c, e)| (c - c1 * e) / c2).collect();
            project_out(&mut r2, &rows);
            let r = norm(&r2);
            r2.iter_mut().for_each(|x| *x /= r);
            rows.push(r2);
        } else {
            log::warn!("c is parallel to d: the branching space is one-dimensional");
            one_dimensional = true;
            complete_basis(&mut rows, n, 2);
        }
    }
    complete_basis(&mut rows, n, n);
    debug_assert_eq!(rows.len(), n);
    let o1 = Mat::from_fn(n, n, |i, j| rows[i][j]);
    Ok(OrthogonalTransform::from_rows(o1, one_dimensional))
}

/// Hessian in the O1 frame, `O1 diag(omega^2) O1ᵀ`.
pub fn rotated_hessian(t: &TranslatedModel, o: &OrthogonalTransform) -> Mat<f64> {
    let n = t.omega.len();
    let mut scaled = o.o1.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= t.omega[j] * t.omega[j];
        }
    }
    scaled * o.o1.transpose()
}

/// Diagonalizes the subsystem and bath Hessian blocks and fills in the
/// rotations in `o`. Returns the subsystem-bath model.
pub fn diagonalize_hessian_blocks(
    t: &TranslatedModel,
    o: &mut OrthogonalTransform,
) -> Result<SystemBathModel> {
    let n = t.omega.len();
    let lam = rotated_hessian(t, o);
    let d1 = norm(&t.d);
    let row = |k: usize| -> Vec<f64> { (0..n).map(|j| o.o1[(k, j)]).collect() };
    let c1 = dot(&t.c, &row(0));
    let c2 = dot(&t.c, &row(1));
    // tuning-axis projection of d, signed so that a d = 0 fallback stays zero
    let g_tilde = [dot(&t.d, &row(0)), dot(&t.d, &row(1))];
    debug_assert!((g_tilde[0].abs() - d1).abs() <= 1e-10 * (1.0 + d1));

    // subsystem block
    let (a, b, cc) = (lam[(0, 0)], lam[(0, 1)], lam[(1, 1)]);
    let scale = a.abs().max(cc.abs());
    let mut rot = if b.abs() <= 1e-14 * scale {
        if a <= cc {
            [[1.0, 0.0], [0.0, 1.0]]
        } else {
            [[0.0, 1.0], [1.0, 0.0]]
        }
    } else {
        let blk = Mat::from_fn(2, 2, |i, j| lam[(i, j)]);
        let (_, v) = sym_eigh(&blk)?;
        [[v[(0, 0)], v[(0, 1)]], [v[(1, 0)], v[(1, 1)]]]
    };
    let eig = |r: &[[f64; 2]; 2], k: usize| -> f64 {
        let (u0, u1) = (r[0][k], r[1][k]);
        u0 * (a * u0 + b * u1) + u1 * (b * u0 + cc * u1)
    };
    let (ox2, oy2) = (eig(&rot, 0), eig(&rot, 1));
    if !(ox2 > 0.0) || !(oy2 > 0.0) {
        return Err(Error::NotBound(format!(
            "subsystem Hessian eigenvalues {ox2}, {oy2} are not positive"
        )));
    }
    let project = |r: &[[f64; 2]; 2], v: [f64; 2], k: usize| r[0][k] * v[0] + r[1][k] * v[1];
    // sign gauge: G_X >= 0, then C_Y >= 0 (G_Y >= 0 when C_Y vanishes)
    if project(&rot, g_tilde, 0) < 0.0 {
        rot[0][0] = -rot[0][0];
        rot[1][0] = -rot[1][0];
    }
    let cy = project(&rot, [c1, c2], 1);
    let cscale = c1.hypot(c2).max(1e-300);
    let flip_y = if cy.abs() > 1e-12 * cscale {
        cy < 0.0
    } else {
        project(&rot, g_tilde, 1) < 0.0
    };
    if flip_y {
        rot[0][1] = -rot[0][1];
        rot[1][1] = -rot[1][1];
    }
    let g = [project(&rot, g_tilde, 0), project(&rot, g_tilde, 1)];
    let c = [project(&rot, [c1, c2], 0), project(&rot, [c1, c2], 1)];

    // bath block
    let nb = n - 2;
    let mut omega_b = Vec::with_capacity(nb);
    let mut lx = Vec::with_capacity(nb);
    let mut ly = Vec::with_capacity(nb);
    let mut bath_rot = Mat::<f64>::identity(nb, nb);
    if nb > 0 {
        let blk = Mat::from_fn(nb, nb, |i, j| lam[(i + 2, j + 2)]);
        let (vals, mut vecs) = sym_eigh(&blk)?;
        if let Some(v) = vals.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::NotBound(format!("bath Hessian eigenvalue {v} is not positive")));
        }
        // coupling block rotated: L = Rᵀ Λ_SB R_B
        for j in 0..nb {
            let mut l = [0.0; 2];
            for k in 0..nb {
                let sb = [lam[(0, k + 2)], lam[(1, k + 2)]];
                let v = vecs[(k, j)];
                l[0] += (rot[0][0] * sb[0] + rot[1][0] * sb[1]) * v;
                l[1] += (rot[0][1] * sb[0] + rot[1][1] * sb[1]) * v;
            }
            let lead = if l[0].abs() >= l[1].abs() { l[0] } else { l[1] };
            let sign = if lead < 0.0 {
                -1.0
            } else if lead == 0.0 {
                // uncoupled mode: make the largest eigenvector entry positive
                let mut best = 0.0f64;
                for k in 0..nb {
                    if vecs[(k, j)].abs() > best.abs() {
                        best = vecs[(k, j)];
                    }
                }
                best.signum()
            } else {
                1.0
            };
            if sign < 0.0 {
                for k in 0..nb {
                    vecs[(k, j)] = -vecs[(k, j)];
                }
            }
            omega_b.push(vals[j].sqrt());
            lx.push(sign * l[0]);
            ly.push(sign * l[1]);
        }
        bath_rot = vecs;
    }
    o.subsystem_rotation = rot;
    o.bath_rotation = bath_rot;

    let (omega_x, omega_y) = (ox2.sqrt(), oy2.sqrt());
    Ok(SystemBathModel {
        subsystem: SubsystemParameters {
            omega_x,
            omega_y,
            x0: g[0] / ox2,
            y0: g[1] / oy2,
            delta: t.delta,
            c_x: c[0],
            c_y: c[1],
            delta12: t.delta12,
        },
        bath: BathParameters {
            omega: omega_b,
            lambda_x: lx,
            lambda_y: ly,
            temperature: 0.0,
        },
    })
}

#[derive(Clone, Debug)]
pub struct LvcTransform {
    pub model: SystemBathModel,
    pub transform: OrthogonalTransform,
    pub translated: TranslatedModel,
    /// Constant dropped from both diabats: translation plus completed squares.
    pub global_constant: f64,
}

pub fn lvc_to_system_bath(lvc: &LvcParameters) -> Result<LvcTransform> {
    let translated = translate_origin(lvc)?;
    let mut transform = separate_subsystem(&translated)?;
    let model = diagonalize_hessian_blocks(&translated, &mut transform)?;
    let s = &model.subsystem;
    let global_constant = translated.constant()
        - 0.5 * (s.omega_x * s.omega_x * s.x0 * s.x0 + s.omega_y * s.omega_y * s.y0 * s.y0);
    Ok(LvcTransform {
        model,
        transform,
        translated,
        global_constant,
    })
}

impl LvcTransform {
    /// Original coordinates to `(X, Y, Q_1, ..., Q_{N-2})`.
    pub fn to_new_coordinates(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let q: Vec<f64> = x.iter().zip(&self.translated.shift).map(|(a, s)| a + s).collect();
        let t = &self.transform;
        let xt: Vec<f64> = (0..n).map(|i| (0..n).map(|j| t.o1[(i, j)] * q[j]).sum()).collect();
        let r = &t.subsystem_rotation;
        let mut out = vec![
            r[0][0] * xt[0] + r[1][0] * xt[1],
            r[0][1] * xt[0] + r[1][1] * xt[1],
        ];
        for j in 0..n - 2 {
            out.push((0..n - 2).map(|k| t.bath_rotation[(k, j)] * xt[k + 2]).sum());
        }
        out
    }

    /// Diabatic matrix `(V_11, V_22, V_12)` of the transformed model at new
    /// coordinates, with the dropped constant restored. State 1 is the
    /// acceptor, state 2 the donor.
    pub fn potential_matrix(&self, z: &[f64]) -> (f64, f64, f64) {
        let (v_d, v_a, v_c) = self.model.subsystem.diabatic(z[0], z[1]);
        let b = &self.model.bath;
        let mut bath = 0.0;
        for j in 0..b.len() {
            let q = z[j + 2];
            bath += 0.5 * b.omega[j] * b.omega[j] * q * q
                + q * (b.lambda_x[j] * z[0] + b.lambda_y[j] * z[1]);
        }
        let k = bath + self.global_constant;
        (v_a + k, v_d + k, v_c)
    }

    /// Full quadratic form in the new coordinates: subsystem, coupling and bath blocks.
    pub fn transformed_hessian(&self) -> Mat<f64> {
        let s = &self.model.subsystem;
        let b = &self.model.bath;
        let n = b.len() + 2;
        let mut h = Mat::<f64>::zeros(n, n);
        h[(0, 0)] = s.omega_x * s.omega_x;
        h[(1, 1)] = s.omega_y * s.omega_y;
        for j in 0..b.len() {
            h[(j + 2, j + 2)] = b.omega[j] * b.omega[j];
            h[(0, j + 2)] = b.lambda_x[j];
            h[(j + 2, 0)] = b.lambda_x[j];
            h[(1, j + 2)] = b.lambda_y[j];
            h[(j + 2, 1)] = b.lambda_y[j];
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_mode_lvc() -> LvcParameters {
        LvcParameters {
            omega: vec![2.0, 2.0],
            kappa: vec![6.0, 0.0],
            kappa_tilde: vec![-6.0, 0.0],
            c: vec![0.0, 3.0],
            delta: 0.0,
        }
    }

    #[test]
    fn translate_symmetric_couplings() {
        let lvc = LvcParameters {
            omega: vec![1.0, 3.0],
            kappa: vec![0.0; 2],
            kappa_tilde: vec![0.0; 2],
            c: vec![1.0, 2.0],
            delta: 0.7,
        };
        let t = translate_origin(&lvc).unwrap();
        assert_eq!(t.d, vec![0.0, 0.0]);
        assert_eq!(t.delta, 0.7);
        assert_eq!(t.delta12, 0.0);
        assert_eq!(t.shift, vec![0.0, 0.0]);
    }

    #[test]
    fn translate_three_mode_lvc() {
        let t = translate_origin(&three_mode_lvc()).unwrap();
        assert_eq!(t.d, vec![-6.0, 0.0]);
        assert_eq!(t.delta, 0.0);
        assert_eq!(t.delta12, 0.0);
    }

    #[test]
    fn translate_single_mode() {
        let lvc = LvcParameters {
            omega: vec![1.0],
            kappa: vec![1.0],
            kappa_tilde: vec![-1.0],
            c: vec![2.0],
            delta: 0.0,
        };
        let t = translate_origin(&lvc).unwrap();
        assert_eq!(t.d, vec![-1.0]);
        assert_eq!(t.delta, 0.0);
        assert_eq!(t.delta12, 0.0);
    }

    #[test]
    fn rows_for_orthogonal_c_and_d() {
        let t = translate_origin(&three_mode_lvc()).unwrap();
        let o = separate_subsystem(&t).unwrap();
        assert_eq!((o.o1[(0, 0)], o.o1[(0, 1)]), (-1.0, 0.0));
        assert_eq!((o.o1[(1, 0)], o.o1[(1, 1)]), (0.0, 1.0));
    }

    #[test]
    fn rows_for_oblique_c() {
        let s = 0.5f64.sqrt();
        let t = TranslatedModel {
            omega: vec![1.0, 1.0],
            d: vec![s, s],
            c: vec![1.0, 0.0],
            delta: 0.0,
            delta12: 0.0,
            shift: vec![0.0; 2],
        };
        let o = separate_subsystem(&t).unwrap();
        let c1 = o.o1[(0, 0)];
        assert!((c1 - s).abs() < 1e-15);
        let c2 = o.o1[(1, 0)];
        assert!((c2 - s).abs() < 1e-15);
        let g = &o.o1 * o.o1.transpose();
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_schmidt_completes_third_axis() {
        let t = TranslatedModel {
            omega: vec![1.0, 1.5, 2.0],
            d: vec![1.0, 0.0, 0.0],
            c: vec![0.0, 1.0, 0.0],
            delta: 0.0,
            delta12: 0.0,
            shift: vec![0.0; 3],
        };
        let o = separate_subsystem(&t).unwrap();
        assert_eq!((o.o1[(2, 0)], o.o1[(2, 1)], o.o1[(2, 2)]), (0.0, 0.0, 1.0));
    }

    #[test]
    fn three_mode_lvc_recovers_symmetric_subsystem() {
        let r = lvc_to_system_bath(&three_mode_lvc()).unwrap();
        let s = r.model.subsystem;
        assert_eq!(s, SubsystemParameters::symmetric(2.0, 1.5, 3.0));
        assert!(s.is_symmetric_setup());
        assert!(r.model.bath.is_empty());
    }

    #[test]
    fn separable_three_mode_keeps_identity_rotations() {
        // d along mode 0, c along mode 1, mode 2 is already a bath mode
        let lvc = LvcParameters {
            omega: vec![1.0, 1.5, 2.5],
            kappa: vec![1.0, 0.0, 0.0],
            kappa_tilde: vec![-1.0, 0.0, 0.0],
            c: vec![0.0, 0.7, 0.0],
            delta: 0.0,
        };
        let r = lvc_to_system_bath(&lvc).unwrap();
        let rot = r.transform.subsystem_rotation;
        assert_eq!(rot, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(r.transform.bath_rotation[(0, 0)], 1.0);
        assert_eq!(r.model.bath.lambda_x, vec![0.0]);
        assert_eq!(r.model.bath.lambda_y, vec![0.0]);
        assert_eq!(r.model.bath.omega, vec![2.5]);
    }

    #[test]
    fn uncoupled_model_has_no_off_diagonal() {
        let lvc = LvcParameters {
            omega: vec![1.0, 2.0, 3.0],
            kappa: vec![0.5, -0.2, 0.1],
            kappa_tilde: vec![0.5, -0.2, 0.1],
            c: vec![0.0; 3],
            delta: 0.3,
        };
        let r = lvc_to_system_bath(&lvc).unwrap();
        let s = r.model.subsystem;
        assert_eq!((s.c_x, s.c_y, s.delta12), (0.0, 0.0, 0.0));
        assert!(r.transform.one_dimensional);
    }

    #[test]
    fn one_mode_is_rejected() {
        let lvc = LvcParameters {
            omega: vec![1.0],
            kappa: vec![1.0],
            kappa_tilde: vec![-1.0],
            c: vec![2.0],
            delta: 0.0,
        };
        assert!(lvc_to_system_bath(&lvc).is_err());
    }
}
