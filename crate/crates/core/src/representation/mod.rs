//! Discretizations of the subsystem Hamiltonian: a Fourier grid for the
//! diabatic and adiabatic representations and a harmonic-oscillator basis
//! for the diabatic one.

pub mod eigen;
pub mod grid;
pub mod hamiltonian;
pub mod ho;
pub mod initial;
pub mod operators;

pub use eigen::{solve_dense, solve_lowest, EigenRequest};
pub use grid::{Grid, GridSpec};
pub use hamiltonian::{
    build, build_adiabatic_no_gp, build_diabatic, DiscretizedHamiltonian, Eigensystem, Representation,
    SchemeSpec, SchemeTag,
};
pub use ho::{HoBasis, HoBasisSpec, Oscillator1d};
pub use initial::{prepare_initial_state, prepare_initial_state_with, DensityState, InitialElectronic};
pub use operators::{operator_matrix, Operator, OperatorMatrix, Sampler};
