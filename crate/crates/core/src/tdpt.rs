//! Perturbative donor-to-acceptor transfer channels for isotropic
//! displaced-oscillator subsystems.
//!
//! Vibronic states are labelled by the well they live in: `|n_X n_Y>_D`
//! is centred on the donor minimum `(-X0, -Y0)`, `|n_X n_Y>_A` on the
//! acceptor minimum `(X0, Y0)`. The initial state is always `|00>_D`
//! on the donor diabatic surface.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::c64;
use crate::model::{BathParameters, SubsystemParameters};
use crate::open::{occupation, phase_integral};

/// Detunings below this are treated as exact resonances.
pub const RESONANCE_TOL: f64 = 1e-10;

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Generalized Laguerre polynomial `L_n^(k)(x)` by the three-term recurrence.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + k - x) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `<n | m_d>`: overlap of the `n`-th eigenstate of an oscillator with
/// frequency `omega` centred at the origin with the `m`-th eigenstate of the
/// same oscillator centred at `d` (unit mass).
pub fn fc_overlap(n: usize, m: usize, d: f64, omega: f64) -> f64 {
    let a = d * (0.5 * omega).sqrt();
    let a2 = a * a;
    if a == 0.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    let (lo, hi, sign) = if n >= m { (m, n, 1.0) } else { (n, m, -1.0) };
    let k = hi - lo;
    let lag = laguerre(lo, k, a2);
    if lag == 0.0 {
        return 0.0;
    }
    let s = if k % 2 == 1 { sign * a.signum() } else { 1.0 };
    let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + k as f64 * a.abs().ln() - 0.5 * a2 + lag.abs().ln();
    s * lag.signum() * ln_mag.exp()
}

/// `<n_A | q | m_D>` for one coordinate: the acceptor oscillator is centred
/// at `+q0`, the donor one at `-q0`, and `q` is measured from the origin.
pub fn coordinate_element(n: usize, m: usize, q0: f64, omega: f64) -> f64 {
    let d = -2.0 * q0;
    let s = (2.0 * omega).sqrt();
    let mut ladder = (n as f64 + 1.0).sqrt() * fc_overlap(n + 1, m, d, omega);
    if n > 0 {
        ladder += (n as f64).sqrt() * fc_overlap(n - 1, m, d, omega);
    }
    ladder / s + q0 * fc_overlap(n, m, d, omega)
}

/// `sin^2(w t / 2) / (w / 2)^2`, continued to `t^2` at `w = 0`.
pub fn sinc_envelope(w: f64, t: f64) -> f64 {
    if w.abs() < RESONANCE_TOL {
        t * t
    } else {
        let s = (0.5 * w * t).sin() / (0.5 * w);
        s * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChannelTag {
    /// Coupling along Y changes the Y parity: `|00>_D -> |01>_A`.
    #[serde(rename = "1a")]
    OneA,
    /// Constant coupling: `|00>_D -> |n_X 0>_A`.
    #[serde(rename = "1b")]
    OneB,
    /// Coupling along X: `|00>_D -> |n_X 0>_A`, `n_X >= 1`.
    #[serde(rename = "1c")]
    OneC,
    /// Bath-assisted second-order pathways into `|00>_A`.
    #[serde(rename = "bath-2nd")]
    BathSecond,
}

impl ChannelTag {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelTag::OneA => "1a",
            ChannelTag::OneB => "1b",
            ChannelTag::OneC => "1c",
            ChannelTag::BathSecond => "bath-2nd",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Envelope {
    /// `sin^2(w t/2)/(w/2)^2`.
    Oscillating { frequency: f64 },
    /// `t^2`.
    Resonant,
    /// Sum over final vibrational levels; `resonant` when one of them is
    /// isoenergetic with the initial state.
    Levels { count: usize, resonant: bool },
    /// Second-order bath pathways. `detuning` is the smallest
    /// `|Omega_j - Omega|` over coupled modes.
    Pathways { modes: usize, detuning: Option<f64> },
}

/// One first-order transition `w * sinc_envelope(detuning, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub weight: f64,
    pub detuning: f64,
}

/// Two time-ordered routes into the same final state. Each route
/// contributes `int_0^t dtau e^{i a tau} int_0^tau dtau' e^{i b tau'}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pathway {
    pub weight: f64,
    pub first: [f64; 2],
    pub second: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
enum Terms {
    First(Vec<Transition>),
    Second(Vec<Pathway>),
}

/// A perturbative transfer estimate `P(t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelEstimate {
    pub tag: ChannelTag,
    /// Weight of the leading term: the squared matrix element for 1a, the
    /// resonant `n_X = 0` weight for 1b, the summed weights for 1c and the
    /// summed pathway weights for the bath channel.
    pub prefactor: f64,
    pub envelope: Envelope,
    terms: Terms,
}

impl ChannelEstimate {
    fn first(tag: ChannelTag, prefactor: f64, envelope: Envelope, terms: Vec<Transition>) -> Self {
        ChannelEstimate {
            tag,
            prefactor,
            envelope,
            terms: Terms::First(terms),
        }
    }

    pub fn transitions(&self) -> &[Transition] {
        match &self.terms {
            Terms::First(t) => t,
            Terms::Second(_) => &[],
        }
    }

    pub fn pathways(&self) -> &[Pathway] {
        match &self.terms {
            Terms::First(_) => &[],
            Terms::Second(p) => p,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match &self.terms {
            Terms::First(ts) => ts.iter().map(|x| x.weight * sinc_envelope(x.detuning, t)).sum(),
            Terms::Second(ps) => ps
                .iter()
                .map(|p| {
                    let z = ordered_integral(p.first[0], p.first[1], t) + ordered_integral(p.second[0], p.second[1], t);
                    p.weight * z.norm_sqr()
                })
                .sum(),
        }
    }

    pub fn evaluate(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.at(t)).collect()
    }
}

fn require_isotropic(p: &SubsystemParameters) -> Result<f64> {
    if !(p.omega_x > 0.0 && p.omega_y > 0.0) {
        return Err(Error::param("Omega", "frequencies must be positive"));
    }
    if (p.omega_x - p.omega_y).abs() > 1e-12 * p.omega_x {
        return Err(Error::Unsupported(format!(
            "perturbative channels assume isotropic oscillators (Omega_X = {}, Omega_Y = {})",
            p.omega_x, p.omega_y
        )));
    }
    Ok(p.omega_x)
}

/// Y-coupling channel `|00>_D -> |01>_A` with envelope detuned by the bias.
pub fn channel_1a(p: &SubsystemParameters) -> Result<ChannelEstimate> {
    let w = require_isotropic(p)?;
    if p.delta12 != 0.0 || p.c_x != 0.0 {
        log::warn!("channel 1a ignores Delta12 and C_X; other channels cover them");
    }
    let m = p.c_y * coordinate_element(1, 0, p.y0, w) * fc_overlap(0, 0, -2.0 * p.x0, w);
    let prefactor = m * m;
    let detuning = w - p.delta;
    let envelope = if detuning.abs() < RESONANCE_TOL {
        Envelope::Resonant
    } else {
        Envelope::Oscillating { frequency: detuning }
    };
    Ok(ChannelEstimate::first(
        ChannelTag::OneA,
        prefactor,
        envelope,
        vec![Transition {
            weight: prefactor,
            detuning,
        }],
    ))
}

/// Constant-coupling channel `|00>_D -> |n_X 0>_A`, `n_X = 0..=n_max`.
pub fn channel_1b(p: &SubsystemParameters, n_max: usize) -> Result<ChannelEstimate> {
    let w = require_isotropic(p)?;
    let fy = fc_overlap(0, 0, -2.0 * p.y0, w);
    let terms: Vec<Transition> = (0..=n_max)
        .map(|n| {
            let m = p.delta12 * fc_overlap(n, 0, -2.0 * p.x0, w) * fy;
            Transition {
                weight: m * m,
                detuning: n as f64 * w - p.delta,
            }
        })
        .collect();
    let resonant = terms.iter().any(|x| x.detuning.abs() < RESONANCE_TOL && x.weight > 0.0);
    Ok(ChannelEstimate::first(
        ChannelTag::OneB,
        terms[0].weight,
        Envelope::Levels {
            count: terms.len(),
            resonant,
        },
        terms,
    ))
}

/// X-coupling channel `|00>_D -> |n_X 0>_A`, `n_X = 1..=n_max`.
///
/// The `n_X = 0` element `C_X <0|X|0>` vanishes exactly for minima placed
/// symmetrically about the origin, so the sum starts at 1.
pub fn channel_1c(p: &SubsystemParameters, n_max: usize) -> Result<ChannelEstimate> {
    let w = require_isotropic(p)?;
    let fy = fc_overlap(0, 0, -2.0 * p.y0, w);
    let terms: Vec<Transition> = (1..=n_max.max(1))
        .map(|n| {
            let m = p.c_x * coordinate_element(n, 0, p.x0, w) * fy;
            Transition {
                weight: m * m,
                detuning: n as f64 * w - p.delta,
            }
        })
        .collect();
    let resonant = terms.iter().any(|x| x.detuning.abs() < RESONANCE_TOL && x.weight > 0.0);
    Ok(ChannelEstimate::first(
        ChannelTag::OneC,
        terms.iter().map(|x| x.weight).sum(),
        Envelope::Levels {
            count: terms.len(),
            resonant,
        },
        terms,
    ))
}

/// `int_0^t dtau e^{i a tau} int_0^tau dtau' e^{i b tau'}`.
pub fn ordered_integral(a: f64, b: f64, t: f64) -> c64 {
    // int_0^t e^{i c s} ds
    let j = |c: f64| phase_integral(-c, t);
    if (b * t).abs() >= 1e-3 {
        return (j(a + b) - j(a)) / c64::new(0.0, b);
    }
    // Expand the inner integral in b: tau + i b tau^2/2 - b^2 tau^3/6.
    let m = |k: usize| moment(k, a, t);
    m(1) + c64::new(0.0, 0.5 * b) * m(2) - (b * b / 6.0) * m(3)
}

/// `int_0^t s^k e^{i a s} ds`.
fn moment(k: usize, a: f64, t: f64) -> c64 {
    let z = a * t;
    if z.abs() < 2.0 {
        let mut sum = c64::new(0.0, 0.0);
        let mut term = c64::new(t.powi(k as i32 + 1), 0.0);
        for n in 0..60 {
            let add = term / (k + n + 1) as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm() {
                break;
            }
            term *= c64::new(0.0, z) / (n + 1) as f64;
        }
        return sum;
    }
    let e = c64::from_polar(1.0, z);
    let ia = c64::new(0.0, a);
    let mut m = (e - 1.0) / ia;
    for j in 1..=k {
        m = (t.powi(j as i32) * e - j as f64 * m) / ia;
    }
    m
}

/// Bath-assisted route `|00 n>_D -> |00 n+-1>_A` through the Y-excited
/// intermediates `|01 n+-1>_D` (bath first) and `|01 n>_A` (bath last).
///
/// Only the Y couplings enter; a bath coupled to X alone cannot reach
/// `|00>_A` at this order. Thermal occupations weight emission by `1 + n`
/// and absorption by `n`.
pub fn channel_bath_2nd(p: &SubsystemParameters, bath: &BathParameters) -> Result<ChannelEstimate> {
    let w = require_isotropic(p)?;
    if !p.is_symmetric_setup() {
        log::warn!("bath channel is derived for the symmetric setup; asymmetries are ignored");
    }
    if bath.temperature < 0.0 {
        return Err(Error::param("temperature", "must be non-negative"));
    }
    let mel = p.c_y * fc_overlap(0, 0, -2.0 * p.x0, w) / (2.0 * w);
    let mut paths = Vec::new();
    let mut detuning: Option<f64> = None;
    let mut modes = 0;
    for j in 0..bath.len() {
        let (wj, lam) = (bath.omega[j], bath.lambda_y[j]);
        if lam == 0.0 {
            continue;
        }
        modes += 1;
        let d = (wj - w).abs();
        detuning = Some(detuning.map_or(d, |x: f64| x.min(d)));
        let base = (mel * lam).powi(2) / (2.0 * wj);
        let n = occupation(wj, bath.temperature);
        // Emission: intermediate energies w + wj (bath first) or w (bath last).
        paths.push(Pathway {
            weight: base * (1.0 + n),
            first: [-w, w + wj],
            second: [wj - w, w],
        });
        if n > 0.0 {
            paths.push(Pathway {
                weight: base * n,
                first: [-w, w - wj],
                second: [-wj - w, w],
            });
        }
    }
    Ok(ChannelEstimate {
        tag: ChannelTag::BathSecond,
        prefactor: paths.iter().map(|x| x.weight).sum(),
        envelope: Envelope::Pathways { modes, detuning },
        terms: Terms::Second(paths),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Normalized oscillator eigenfunction by the Hermite-function recurrence.
    fn hermite_fn(n: usize, w: f64, x: f64) -> f64 {
        let s = w.sqrt() * x;
        let mut h0 = (w / std::f64::consts::PI).powf(0.25) * (-0.5 * s * s).exp();
        if n == 0 {
            return h0;
        }
        let mut h1 = std::f64::consts::SQRT_2 * s * h0;
        for k in 1..n {
            let k = k as f64;
            let h2 = ((2.0 / (k + 1.0)).sqrt() * s * h1) - (k / (k + 1.0)).sqrt() * h0;
            h0 = h1;
            h1 = h2;
        }
        h1
    }

    fn quad(f: impl Fn(f64) -> f64) -> f64 {
        let (a, b, n) = (-14.0, 14.0, 28000);
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|i| {
                let x = a + i as f64 * h;
                let wt = if i == 0 || i == n { 0.5 } else { 1.0 };
                wt * f(x)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn fc_ground_overlap_matches_gaussian_closed_form() {
        let v = fc_overlap(0, 0, 3.0, 2.0);
        assert!((v - 0.011108996538242308).abs() < 1e-15);
        let q = quad(|x| hermite_fn(0, 2.0, x) * hermite_fn(0, 2.0, x - 3.0));
        assert!((v - q).abs() < 1e-12);
    }

    #[test]
    fn fc_matches_quadrature() {
        for &(n, m, d, w) in &[(3, 1, 1.2, 2.0), (1, 4, -0.7, 1.5), (5, 5, 2.0, 2.0), (0, 6, 3.0, 2.0), (7, 2, -3.0, 2.0)] {
            let q = quad(|x| hermite_fn(n, w, x) * hermite_fn(m, w, x - d));
            let v = fc_overlap(n, m, d, w);
            assert!((v - q).abs() < 1e-10, "{n} {m} {d}: {v} vs {q}");
        }
    }

    #[test]
    fn fc_zero_displacement_is_identity() {
        for n in 0..6 {
            for m in 0..6 {
                assert_eq!(fc_overlap(n, m, 0.0, 2.0), if n == m { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn fc_completeness() {
        for n in 0..5 {
            let s: f64 = (0..=60).map(|m| fc_overlap(n, m, 3.0, 2.0).powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-10, "n = {n}: {s}");
        }
    }

    #[test]
    fn fc_ladder_recurrence() {
        // a|m_d> = sqrt(m)|(m-1)_d> + alpha |m_d>, projected on <n|.
        let (d, w): (f64, f64) = (1.7, 2.0);
        let alpha = d * (0.5 * w).sqrt();
        for n in 0..12 {
            for m in 0..12 {
                let lhs = ((n + 1) as f64).sqrt() * fc_overlap(n + 1, m, d, w);
                let mut rhs = alpha * fc_overlap(n, m, d, w);
                if m > 0 {
                    rhs += (m as f64).sqrt() * fc_overlap(n, m - 1, d, w);
                }
                assert!((lhs - rhs).abs() < 1e-12, "{n} {m}");
            }
        }
    }

    #[test]
    fn coordinate_element_matches_quadrature() {
        let (q0, w) = (1.5, 2.0);
        for n in 0..6 {
            let q = quad(|x| hermite_fn(n, w, x - q0) * x * hermite_fn(0, w, x + q0));
            let v = coordinate_element(n, 0, q0, w);
            assert!((v - q).abs() < 1e-11, "{n}: {v} vs {q}");
            // Closed form for the 0 -> n element with alpha = -3.
            let f = n as f64 / 2.0 * (-3.0f64).powi(n as i32 - 1) * (-4.5f64).exp() / ln_factorial(n).exp().sqrt();
            assert!((v - f).abs() < 1e-14);
        }
    }

    #[test]
    fn channel_1a_symmetric_prefactor() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let c = channel_1a(&p).unwrap();
        assert!((c.prefactor - 2.7767205919502894e-4).abs() < 1e-17);
        let peak = c.at(std::f64::consts::FRAC_PI_2);
        assert!((peak / c.prefactor - 1.0).abs() < 1e-14);
        assert!(c.at(std::f64::consts::PI) < 1e-30);
        assert_eq!(c.at(0.0), 0.0);
    }

    #[test]
    fn channel_1a_resonance_grows_quadratically() {
        let mut p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        p.delta = 2.0;
        let c = channel_1a(&p).unwrap();
        assert_eq!(c.envelope, Envelope::Resonant);
        for t in [0.5, 2.0, 5.0] {
            assert!((c.at(t) - c.prefactor * t * t).abs() < 1e-15);
        }
        p.c_y = 0.0;
        p.delta = 0.0;
        assert_eq!(channel_1a(&p).unwrap().at(1.0), 0.0);
    }

    #[test]
    fn anisotropic_rejected() {
        let mut p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        p.omega_y = 1.5;
        assert!(channel_1a(&p).is_err());
    }

    #[test]
    fn channel_1b_quadratic_in_delta12() {
        let mut p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        assert_eq!(channel_1b(&p, 40).unwrap().at(3.0), 0.0);
        p.delta12 = 0.4;
        let a = channel_1b(&p, 40).unwrap();
        p.delta12 = 0.8;
        let b = channel_1b(&p, 40).unwrap();
        for t in [1.0, 4.0, 10.0] {
            assert!((b.at(t) / a.at(t) - 4.0).abs() < 1e-12);
        }
        assert!(matches!(b.envelope, Envelope::Levels { resonant: true, .. }));
        assert!((b.prefactor - 0.64 * (-9.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn channel_1b_tail_converges() {
        let mut p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        p.delta12 = 0.8;
        let a = channel_1b(&p, 40).unwrap();
        let b = channel_1b(&p, 80).unwrap();
        for t in [1.0, 7.3, 20.0] {
            assert!((a.at(t) - b.at(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn channel_1c_has_no_resonant_term() {
        let mut p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        assert_eq!(channel_1c(&p, 40).unwrap().at(2.0), 0.0);
        p.c_x = 2.0;
        let c = channel_1c(&p, 40).unwrap();
        assert!(matches!(c.envelope, Envelope::Levels { resonant: false, .. }));
        assert!(c.transitions().iter().all(|x| x.detuning > 0.0));
        // Bounded: each term is at most 4 w / detuning^2.
        let bound: f64 = c.transitions().iter().map(|x| 4.0 * x.weight / (x.detuning * x.detuning)).sum();
        for t in [1.0, 10.0, 100.0] {
            assert!(c.at(t) <= bound + 1e-15);
        }
    }

    fn brute_ordered(a: f64, b: f64, t: f64) -> c64 {
        let n = 2000;
        let h = t / n as f64;
        let mut inner = c64::new(0.0, 0.0);
        let mut out = c64::new(0.0, 0.0);
        let f = |s: f64, c: f64| c64::from_polar(1.0, c * s);
        let mut prev_outer = c64::new(0.0, 0.0);
        for i in 1..=n {
            let (s0, s1) = ((i - 1) as f64 * h, i as f64 * h);
            let sm = 0.5 * (s0 + s1);
            // Simpson on each panel for the inner integral.
            let inner_mid = inner + (f(s0, b) + 4.0 * f(0.5 * (s0 + sm), b) + f(sm, b)) * (0.5 * h / 6.0);
            inner += (f(s0, b) + 4.0 * f(sm, b) + f(s1, b)) * (h / 6.0);
            let cur = f(s1, a) * inner;
            out += (prev_outer + 4.0 * f(sm, a) * inner_mid + cur) * (h / 6.0);
            prev_outer = cur;
        }
        out
    }

    #[test]
    fn ordered_integral_matches_quadrature() {
        for &(a, b) in &[(-2.0, 3.1), (0.3, 0.0), (0.0, 2.0), (-2.0, 1e-7), (1e-9, 1e-9), (5.0, -4.0)] {
            for t in [0.7, 4.0] {
                let v = ordered_integral(a, b, t);
                let q = brute_ordered(a, b, t);
                assert!((v - q).norm() < 1e-9, "{a} {b} {t}: {v} vs {q}");
            }
        }
    }

    fn single_mode(omega: f64, lx: f64, ly: f64) -> BathParameters {
        BathParameters {
            omega: vec![omega],
            lambda_x: vec![lx],
            lambda_y: vec![ly],
            temperature: 0.0,
        }
    }

    #[test]
    fn bath_channel_structure() {
        let p = SubsystemParameters::symmetric(2.0, 1.5, 3.0);
        let zero = channel_bath_2nd(&p, &single_mode(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(zero.at(5.0), 0.0);
        let x_only = channel_bath_2nd(&p, &single_mode(2.0, 0.3, 0.0)).unwrap();
        assert_eq!(x_only.at(5.0), 0.0);
        let res = channel_bath_2nd(&p, &single_mode(2.0, 0.0, 0.3)).unwrap();
        assert_eq!(res.at(0.0), 0.0);
        // On resonance the amplitude grows linearly, so P / t^2 settles.
        let r1 = res.at(40.0) / 1600.0;
        let r2 = res.at(80.0) / 6400.0;
        assert!((r1 / r2 - 1.0).abs() < 0.1);
        let off = channel_bath_2nd(&p, &single_mode(5.0, 0.0, 0.3)).unwrap();
        assert!(res.at(40.0) > 100.0 * off.at(40.0));
    }
}
