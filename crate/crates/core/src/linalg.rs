//! Thin wrappers over faer for the dense kernels used across the crate.

use faer::{Mat, Side};

use crate::error::{Error, Result};

pub use faer::c64;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eigh(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|err| Error::Eigen(format!("{err:?}")))?;
    let s = e.S().column_vector();
    let vals: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues of a Hermitian complex matrix, ascending.
pub fn herm_eigvals(a: &Mat<c64>) -> Result<Vec<f64>> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|err| Error::Eigen(format!("{err:?}")))?;
    let s = e.S().column_vector();
    Ok((0..s.nrows()).map(|i| s[i].re).collect())
}

pub fn dot_c(a: &[c64], b: &[c64]) -> c64 {
    // conj(a) . b
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    c64::new(re, im)
}

pub fn norm_sqr(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
