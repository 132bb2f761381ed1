use faer::Mat;

use super::hamiltonian::{DiscretizedHamiltonian, Kind, Representation};
use super::operators::Sampler;
use crate::error::{Error, Result};
use crate::linalg::{c64, norm_sqr};
use crate::model::{evaluate_potentials, lower_adiabatic_state, SubsystemParameters};

/// Subsystem state: a wavefunction or a density operator over the full
/// discretization.
#[derive(Clone, Debug)]
pub enum DensityState {
    Pure(Vec<c64>),
    Mixed(Mat<c64>),
}

impl DensityState {
    pub fn trace(&self) -> f64 {
        match self {
            DensityState::Pure(v) => norm_sqr(v),
            DensityState::Mixed(r) => (0..r.nrows()).map(|i| r[(i, i)].re).sum(),
        }
    }
}

/// Electronic part of the initial state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InitialElectronic {
    /// Lower adiabatic state at every point.
    #[default]
    #[serde(rename = "lower-adiabatic")]
    LowerAdiabatic,
    /// Donor diabatic state.
    #[serde(rename = "diabatic-donor")]
    DiabaticDonor,
}

/// Ground state of `T + V_D`, centred on the donor minimum.
pub fn donor_gaussian(p: &SubsystemParameters, pt: [f64; 2]) -> f64 {
    let [cx, cy] = p.donor_minimum();
    let (wx, wy) = (p.omega_x, p.omega_y);
    let norm = (wx * wy).powf(0.25) / std::f64::consts::PI.sqrt();
    norm * (-0.5 * wx * (pt[0] - cx).powi(2) - 0.5 * wy * (pt[1] - cy).powi(2)).exp()
}

fn electronic(p: &SubsystemParameters, rep: Representation, pt: [f64; 2], kind: InitialElectronic) -> Result<[f64; 2]> {
    match (rep, kind) {
        (Representation::Diabatic, InitialElectronic::LowerAdiabatic) => {
            Ok(lower_adiabatic_state(evaluate_potentials(p, pt).theta))
        }
        (Representation::Diabatic, InitialElectronic::DiabaticDonor) => Ok([0.0, 1.0]),
        (Representation::AdiabaticNoGp, InitialElectronic::LowerAdiabatic) => Ok([1.0, 0.0]),
        (Representation::AdiabaticNoGp, InitialElectronic::DiabaticDonor) => Err(Error::Unsupported(
            "a diabatic donor start is defined in the diabatic representation only".into(),
        )),
    }
}

/// Donor-well Gaussian times the lower adiabatic state.
pub fn prepare_initial_state(h: &DiscretizedHamiltonian) -> Result<DensityState> {
    prepare_initial_state_with(h, InitialElectronic::LowerAdiabatic)
}

pub fn prepare_initial_state_with(h: &DiscretizedHamiltonian, kind: InitialElectronic) -> Result<DensityState> {
    let p = &h.params;
    let mut v = match &h.kind {
        Kind::Grid(g) => {
            let n = g.grid.len();
            let s = g.grid.cell_area().sqrt();
            let mut v = vec![c64::new(0.0, 0.0); 2 * n];
            for i in 0..n {
                let pt = g.grid.point(i);
                let chi = donor_gaussian(p, pt) * s;
                let e = match (h.representation, kind) {
                    (Representation::Diabatic, InitialElectronic::LowerAdiabatic) => {
                        lower_adiabatic_state(g.pot.theta[i])
                    }
                    _ => electronic(p, h.representation, pt, kind)?,
                };
                v[i] = c64::new(chi * e[0], 0.0);
                v[n + i] = c64::new(chi * e[1], 0.0);
            }
            v
        }
        Kind::Ho(_) => {
            let s = Sampler::new(h);
            let f: Vec<[f64; 2]> = s
                .points
                .iter()
                .map(|&pt| {
                    let chi = donor_gaussian(p, pt);
                    electronic(p, h.representation, pt, kind).map(|e| [chi * e[0], chi * e[1]])
                })
                .collect::<Result<_>>()?;
            s.project(&f).expect("oscillator sampler projects")
        }
    };
    let n2 = norm_sqr(&v);
    if (1.0 - n2).abs() > 1e-6 {
        log::warn!("initial state captured with norm {n2:.8} before renormalization");
    }
    let s = 1.0 / n2.sqrt();
    v.iter_mut().for_each(|z| *z *= s);
    Ok(DensityState::Pure(v))
}
