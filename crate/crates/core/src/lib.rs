//! Nuclear quantum dynamics of a two-state linear vibronic coupling model
//! near a conical intersection, with and without the geometric phase.
//!
//! The N-mode model is reduced to a two-dimensional subsystem coupled to a
//! harmonic bath ([`effective_modes`]), discretized on a Fourier grid or an
//! oscillator basis ([`representation`]) and propagated either unitarily
//! ([`closed`]) or with a second-order time-convolutionless master equation
//! ([`open`]). [`tdpt`] holds perturbative channel estimates.

pub mod closed;
pub mod effective_modes;
pub mod error;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod open;
pub mod representation;
pub mod tdpt;

pub use error::{Error, Result};
