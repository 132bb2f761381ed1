//! Parameter sets for the two-state LVC model and its subsystem-bath form,
//! pointwise potentials, adiabatic quantities and geometric elements.
//!
//! Electronic ordering is (A, D) throughout: index 0 is the acceptor diabat,
//! index 1 the donor diabat, so the potential matrix is
//! `[[V_A, V_c], [V_c, V_D]]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw N-mode linear vibronic coupling model.
///
/// State 1 carries the linear terms `kappa` and energy `-delta/2`, state 2
/// carries `kappa_tilde` and `+delta/2`; `c` couples the two states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvcParameters {
    pub omega: Vec<f64>,
    pub kappa: Vec<f64>,
    pub kappa_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: f64,
}

impl LvcParameters {
    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omega.len();
        if n == 0 {
            return Err(Error::param("omega", "at least one mode is required"));
        }
        for (name, v) in [
            ("kappa", &self.kappa),
            ("kappa_tilde", &self.kappa_tilde),
            ("c", &self.c),
        ] {
            if v.len() != n {
                return Err(Error::param(
                    name,
                    format!("length {} does not match {} modes", v.len(), n),
                ));
            }
        }
        if let Some(j) = self.omega.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::param(
                "omega",
                format!("frequency {} of mode {j} is not strictly positive", self.omega[j]),
            ));
        }
        let all = self
            .kappa
            .iter()
            .chain(&self.kappa_tilde)
            .chain(&self.c)
            .chain(std::iter::once(&self.delta));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::param("kappa", "non-finite coupling constant"));
        }
        Ok(())
    }

    /// Diabatic potential matrix entries `(V_11, V_22, V_12)` at a point in
    /// the original mass-weighted coordinates.
    pub fn potential_matrix(&self, x: &[f64]) -> (f64, f64, f64) {
        let mut harm = 0.0;
        let mut v1 = -0.5 * self.delta;
        let mut v2 = 0.5 * self.delta;
        let mut v12 = 0.0;
        for j in 0..self.n_modes() {
            harm += 0.5 * self.omega[j] * self.omega[j] * x[j] * x[j];
            v1 += self.kappa[j] * x[j];
            v2 += self.kappa_tilde[j] * x[j];
            v12 += self.c[j] * x[j];
        }
        (harm + v1, harm + v2, v12)
    }
}

/// Two-dimensional subsystem: tuning coordinate X, coupling coordinate Y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemParameters {
    #[serde(rename = "Omega_X")]
    pub omega_x: f64,
    #[serde(rename = "Omega_Y")]
    pub omega_y: f64,
    #[serde(rename = "X0")]
    pub x0: f64,
    #[serde(rename = "Y0", default)]
    pub y0: f64,
    #[serde(rename = "Delta", default)]
    pub delta: f64,
    #[serde(rename = "C_X", default)]
    pub c_x: f64,
    #[serde(rename = "C_Y", default)]
    pub c_y: f64,
    #[serde(rename = "Delta12", default)]
    pub delta12: f64,
}

impl SubsystemParameters {
    /// Isotropic symmetric model: minima at (-x0, 0) and (x0, 0), coupling along Y.
    pub fn symmetric(omega: f64, x0: f64, c_y: f64) -> Self {
        SubsystemParameters {
            omega_x: omega,
            omega_y: omega,
            x0,
            y0: 0.0,
            delta: 0.0,
            c_x: 0.0,
            c_y,
            delta12: 0.0,
        }
    }

    pub fn is_symmetric_setup(&self) -> bool {
        self.y0 == 0.0 && self.delta == 0.0 && self.delta12 == 0.0 && self.c_x == 0.0
    }

    /// Gradient of `(V_D - V_A)/2`.
    pub fn g(&self) -> [f64; 2] {
        [
            self.omega_x * self.omega_x * self.x0,
            self.omega_y * self.omega_y * self.y0,
        ]
    }

    pub fn donor_minimum(&self) -> [f64; 2] {
        [-self.x0, -self.y0]
    }

    pub fn acceptor_minimum(&self) -> [f64; 2] {
        [self.x0, self.y0]
    }

    /// `V_D - V_A`, positive on the acceptor side.
    pub fn tuning_value(&self, x: f64, y: f64) -> f64 {
        let g = self.g();
        2.0 * (g[0] * x + g[1] * y) + self.delta
    }

    pub fn coupling_value(&self, x: f64, y: f64) -> f64 {
        self.c_x * x + self.c_y * y + self.delta12
    }

    pub fn diabatic(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let wx2 = self.omega_x * self.omega_x;
        let wy2 = self.omega_y * self.omega_y;
        let v_d = 0.5
            * (wx2 * (x + self.x0).powi(2) + wy2 * (y + self.y0).powi(2) + self.delta);
        let v_a = 0.5
            * (wx2 * (x - self.x0).powi(2) + wy2 * (y - self.y0).powi(2) - self.delta);
        (v_d, v_a, self.coupling_value(x, y))
    }

    fn ci_scale(&self) -> f64 {
        let g = self.g();
        1.0 + 2.0 * g[0].hypot(g[1]) + 2.0 * self.c_x.hypot(self.c_y)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParameters {
    #[serde(rename = "Omega")]
    pub omega: Vec<f64>,
    #[serde(rename = "lambda_X")]
    pub lambda_x: Vec<f64>,
    #[serde(rename = "lambda_Y")]
    pub lambda_y: Vec<f64>,
    #[serde(default)]
    pub temperature: f64,
}

impl BathParameters {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemBathModel {
    pub subsystem: SubsystemParameters,
    pub bath: BathParameters,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn warning(field: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Every violated invariant of the model. Empty means valid.
pub fn validate(model: &SystemBathModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let s = &model.subsystem;
    for (name, v) in [("Omega_X", s.omega_x), ("Omega_Y", s.omega_y)] {
        if !(v > 0.0) || !v.is_finite() {
            out.push(Diagnostic::error(name, format!("must be strictly positive, got {v}")));
        }
    }
    for (name, v) in [
        ("X0", s.x0),
        ("Y0", s.y0),
        ("Delta", s.delta),
        ("C_X", s.c_x),
        ("C_Y", s.c_y),
        ("Delta12", s.delta12),
    ] {
        if !v.is_finite() {
            out.push(Diagnostic::error(name, "must be finite"));
        }
    }
    if s.x0 == 0.0 && s.y0 == 0.0 {
        out.push(Diagnostic::warning(
            "X0",
            "X0 = Y0 = 0: no tuning direction, degeneracy line undefined",
        ));
    }

    let b = &model.bath;
    let n = b.omega.len();
    if b.lambda_x.len() != n {
        out.push(Diagnostic::error(
            "lambda_X",
            format!("length {} does not match {} bath modes", b.lambda_x.len(), n),
        ));
    }
    if b.lambda_y.len() != n {
        out.push(Diagnostic::error(
            "lambda_Y",
            format!("length {} does not match {} bath modes", b.lambda_y.len(), n),
        ));
    }
    if let Some(j) = b.omega.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
        out.push(Diagnostic::error(
            "Omega",
            format!("bath frequency {} at index {j} is not strictly positive", b.omega[j]),
        ));
    }
    if !(b.temperature >= 0.0) || !b.temperature.is_finite() {
        out.push(Diagnostic::error("temperature", "must be finite and non-negative"));
    }
    out
}

/// Pointwise diabatic and adiabatic quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialPoint {
    pub v_d: f64,
    pub v_a: f64,
    pub v_c: f64,
    pub w1: f64,
    pub w2: f64,
    /// `atan2(2 V_c, V_D - V_A)` in (-pi, pi].
    pub theta: f64,
    /// Derivative coupling `grad(theta)/2`; `None` at the intersection.
    pub f: Option<[f64; 2]>,
    pub at_ci: bool,
}

pub fn evaluate_potentials(p: &SubsystemParameters, point: [f64; 2]) -> PotentialPoint {
    let [x, y] = point;
    let (v_d, v_a, v_c) = p.diabatic(x, y);
    let u = v_d - v_a;
    let w = 2.0 * v_c;
    let r2 = u * u + w * w;
    let r = r2.sqrt();
    let mean = 0.5 * (v_d + v_a);
    let at_ci = r <= 1e-12 * p.ci_scale();
    let mut theta = w.atan2(u);
    if theta == -std::f64::consts::PI {
        theta = std::f64::consts::PI;
    }
    let f = if at_ci {
        None
    } else {
        let g = p.g();
        // grad(theta) = 2 (u C - w G) / (u^2 + w^2), F = grad(theta) / 2
        Some([
            (u * p.c_x - w * g[0]) / r2,
            (u * p.c_y - w * g[1]) / r2,
        ])
    };
    PotentialPoint {
        v_d,
        v_a,
        v_c,
        w1: mean - 0.5 * r,
        w2: mean + 0.5 * r,
        theta,
        f,
        at_ci,
    }
}

/// Divergence of F (half the Laplacian of theta); `None` at the intersection.
pub fn div_f(p: &SubsystemParameters, point: [f64; 2]) -> Option<f64> {
    let [x, y] = point;
    let (v_d, v_a, v_c) = p.diabatic(x, y);
    let u = v_d - v_a;
    let w = 2.0 * v_c;
    let r2 = u * u + w * w;
    if r2.sqrt() <= 1e-12 * p.ci_scale() {
        return None;
    }
    let g = p.g();
    let cg = p.c_x * g[0] + p.c_y * g[1];
    let c2 = p.c_x * p.c_x + p.c_y * p.c_y;
    let g2 = g[0] * g[0] + g[1] * g[1];
    let lap_theta = -8.0 * ((u * u - w * w) * cg + u * w * (c2 - g2)) / (r2 * r2);
    Some(0.5 * lap_theta)
}

/// Lower adiabatic electronic state as (A, D) components.
///
/// The gauge puts the sign jump on the acceptor-side ray (V_c = 0,
/// V_D > V_A) so the state is continuous across the donor well.
pub fn lower_adiabatic_state(theta: f64) -> [f64; 2] {
    let (s, c) = (0.5 * theta).sin_cos();
    if theta >= 0.0 {
        [-c, s]
    } else {
        [c, -s]
    }
}

/// Upper adiabatic electronic state in the gauge matching
/// [`lower_adiabatic_state`].
pub fn upper_adiabatic_state(theta: f64) -> [f64; 2] {
    let (s, c) = (0.5 * theta).sin_cos();
    if theta >= 0.0 {
        [-s, -c]
    } else {
        [s, c]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Normal of the degeneracy line: (Omega_X^2 X0, Omega_Y^2 Y0).
    pub g: [f64; 2],
    pub tuning_direction: [f64; 2],
    /// `(a, b, c0)` with `a X + b Y + c0 = 0` where V_D = V_A.
    pub degeneracy_line: [f64; 3],
    /// `(a, b, c0)` with `a X + b Y + c0 = 0` where V_c = 0.
    pub zero_coupling_line: [f64; 3],
    pub ci_point: Option<[f64; 2]>,
}

pub fn derive_geometry(p: &SubsystemParameters) -> Result<Geometry> {
    if p.x0 == 0.0 && p.y0 == 0.0 {
        return Err(Error::param("X0", "X0 and Y0 both zero: no tuning direction"));
    }
    let g = p.g();
    let norm = p.x0.hypot(p.y0);
    let deg = [2.0 * g[0], 2.0 * g[1], p.delta];
    let zc = [p.c_x, p.c_y, p.delta12];
    let det = deg[0] * zc[1] - deg[1] * zc[0];
    let scale = deg[0].hypot(deg[1]) * zc[0].hypot(zc[1]);
    let ci_point = if scale > 0.0 && det.abs() > 1e-12 * scale {
        Some([
            (-deg[2] * zc[1] + deg[1] * zc[2]) / det,
            (-deg[0] * zc[2] + deg[2] * zc[0]) / det,
        ])
    } else {
        log::warn!("degeneracy and zero-coupling lines are parallel; no intersection point");
        None
    };
    Ok(Geometry {
        g,
        tuning_direction: [p.x0 / norm, p.y0 / norm],
        degeneracy_line: deg,
        zero_coupling_line: zc,
        ci_point,
    })
}

/// True when the point lies on the donor side of the degeneracy line.
pub fn is_donor_side(p: &SubsystemParameters, x: f64, y: f64) -> bool {
    p.tuning_value(x, y) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tilted() -> SubsystemParameters {
        SubsystemParameters {
            omega_x: 2.0,
            omega_y: 1.5,
            x0: 1.5,
            y0: 0.75,
            delta: 3.0,
            c_x: 0.25,
            c_y: 3.0,
            delta12: -1.75,
        }
    }

    #[test]
    fn symmetric_origin_is_flagged_ci() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let e = evaluate_potentials(&p, [0.0, 0.0]);
        assert_eq!(e.v_d, e.v_a);
        assert_eq!(e.v_c, 0.0);
        assert_eq!(e.w1, e.w2);
        assert!(e.at_ci);
        assert!(e.f.is_none());
    }

    #[test]
    fn donor_minimum_offset() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let e = evaluate_potentials(&p, [-1.5, 0.0]);
        assert_eq!(e.v_d, 0.0);
        assert!((e.v_a - 18.0).abs() < 1e-14);
        assert_eq!(e.v_c, 0.0);
    }

    #[test]
    fn tilted_point_matches_scalar_oracle() {
        let e = evaluate_potentials(&tilted(), [1.0, 1.0]);
        assert!((e.v_d - 17.4453125).abs() < 1e-12);
        assert!((e.v_a + 0.9296875).abs() < 1e-12);
        assert!((e.v_c - 1.5).abs() < 1e-12);
        assert!((e.w1 + 1.0513311904798068).abs() < 1e-12);
        assert!((e.w2 - 17.566956190479807).abs() < 1e-12);
        assert!((e.theta - 0.16183743123842292).abs() < 1e-12);
        let f = e.f.unwrap();
        assert!((f[0] + 0.03867478026026161).abs() < 1e-8);
        assert!((f[1] - 0.1444219066767949).abs() < 1e-8);
    }

    #[test]
    fn geometry_tilted() {
        let g = derive_geometry(&tilted()).unwrap();
        assert_eq!(g.g, [6.0, 1.6875]);
        let ci = g.ci_point.unwrap();
        assert!((ci[0] + 0.424).abs() < 1e-9);
        assert!((ci[1] - 0.6186666666666667).abs() < 1e-9);
    }

    #[test]
    fn geometry_symmetric() {
        let g = derive_geometry(&SubsystemParameters::symmetric(2.0, 1.5, 3.0)).unwrap();
        assert_eq!(g.ci_point, Some([0.0, 0.0]));
        assert_eq!(g.degeneracy_line[1], 0.0);
        assert_eq!(g.zero_coupling_line[0], 0.0);
    }

    #[test]
    fn ci_leaves_minima_line_when_c_parallel_g() {
        let mut p = SubsystemParameters::symmetric(2.0, 1.5, 0.0);
        p.c_x = 1.0;
        p.c_y = 0.0;
        p.delta12 = 0.5;
        let g = derive_geometry(&p).unwrap();
        assert!(g.ci_point.is_none());
        // tilt slightly: the intersection is off the Y = 0 line
        p.c_y = 0.3;
        let ci = derive_geometry(&p).unwrap().ci_point.unwrap();
        assert!(ci[1].abs() > 1.0);
    }

    #[test]
    fn validate_reports_fields() {
        let mut m = SystemBathModel {
            subsystem: SubsystemParameters::symmetric(2.0, 1.5, 3.0),
            bath: BathParameters::default(),
        };
        assert!(validate(&m).is_empty());
        m.subsystem.omega_x = -1.0;
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "Omega_X");
        m.subsystem.omega_x = 2.0;
        m.bath = BathParameters {
            omega: vec![1.0, 2.0],
            lambda_x: vec![0.1],
            lambda_y: vec![0.0, 0.0],
            temperature: 0.0,
        };
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].severity, Severity::Error);
    }

    #[test]
    fn adiabatic_states_diagonalize() {
        let p = tilted();
        for &pt in &[[1.0, 1.0], [-2.0, 0.3], [0.5, -1.2], [-0.1, 3.0]] {
            let e = evaluate_potentials(&p, pt);
            let h = [[e.v_a, e.v_c], [e.v_c, e.v_d]];
            for (vec, w) in [
                (lower_adiabatic_state(e.theta), e.w1),
                (upper_adiabatic_state(e.theta), e.w2),
            ] {
                for i in 0..2 {
                    let hv = h[i][0] * vec[0] + h[i][1] * vec[1];
                    assert!((hv - w * vec[i]).abs() < 1e-10);
                }
            }
        }
    }
}
