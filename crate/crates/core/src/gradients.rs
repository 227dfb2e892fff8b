//! Exact derivatives of circuit outputs and states.
//!
//! Every parameter enters through a single Pauli rotation (generator with
//! eigenvalues ±1/2), so the two-term shift rule with shift π/2 is exact.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::circuit::{forward_unchecked, simulate, ArchitectureSpec};
use crate::error::{Error, Result};
use crate::linalg::{inner, RealMatrix};

fn check_params(spec: &ArchitectureSpec, theta: &[f64]) -> Result<()> {
    let p = spec.parameter_count();
    if theta.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            actual: theta.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("parameter vector".into()));
    }
    Ok(())
}

/// `∂f/∂θ_j = [f(θ + π/2·e_j) − f(θ − π/2·e_j)] / 2` for every `j`.
pub fn parameter_shift_grad(spec: &ArchitectureSpec, theta: &[f64], x: f64) -> Result<Vec<f64>> {
    check_params(spec, theta)?;
    Ok(shift_grad_unchecked(spec, theta, x))
}

pub(crate) fn shift_grad_unchecked(spec: &ArchitectureSpec, theta: &[f64], x: f64) -> Vec<f64> {
    let mut shifted = theta.to_vec();
    (0..theta.len())
        .map(|j| {
            let orig = shifted[j];
            shifted[j] = orig + FRAC_PI_2;
            let plus = forward_unchecked(spec, &shifted, x);
            shifted[j] = orig - FRAC_PI_2;
            let minus = forward_unchecked(spec, &shifted, x);
            shifted[j] = orig;
            (plus - minus) / 2.0
        })
        .collect()
}

/// Central differences `[f(θ + h·e_j) − f(θ − h·e_j)] / 2h`.
pub fn finite_difference_grad(
    spec: &ArchitectureSpec,
    theta: &[f64],
    x: f64,
    h: f64,
) -> Result<Vec<f64>> {
    check_params(spec, theta)?;
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step h must be positive, got {h}")));
    }
    let mut shifted = theta.to_vec();
    Ok((0..theta.len())
        .map(|j| {
            let orig = shifted[j];
            shifted[j] = orig + h;
            let plus = forward_unchecked(spec, &shifted, x);
            shifted[j] = orig - h;
            let minus = forward_unchecked(spec, &shifted, x);
            shifted[j] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect())
}

/// `∂_j|ψ(x, θ)⟩`, by inserting the generator `-(i/2)G` right after the
/// rotation carrying parameter `j`.
pub fn state_derivative(
    spec: &ArchitectureSpec,
    theta: &[f64],
    x: f64,
    j: usize,
) -> Result<Vec<Complex64>> {
    check_params(spec, theta)?;
    if j >= theta.len() {
        return Err(Error::IndexOutOfRange {
            what: "parameter",
            index: j,
            limit: theta.len(),
        });
    }
    Ok(simulate(spec, theta, x, Some(j)).into_amplitudes())
}

/// `∂_j|ψ⟩` for all `j`, in parameter order.
pub fn state_derivatives(
    spec: &ArchitectureSpec,
    theta: &[f64],
    x: f64,
) -> Result<Vec<Vec<Complex64>>> {
    check_params(spec, theta)?;
    Ok((0..theta.len())
        .map(|j| simulate(spec, theta, x, Some(j)).into_amplitudes())
        .collect())
}

/// `2·Re⟨ψ|M|∂_jψ⟩` for every `j`: the expectation gradient rebuilt from
/// state derivatives.
pub fn gradient_from_state_derivatives(
    spec: &ArchitectureSpec,
    theta: &[f64],
    x: f64,
) -> Result<Vec<f64>> {
    check_params(spec, theta)?;
    let psi = simulate(spec, theta, x, None);
    let m_psi = psi.z_applied(spec.readout_qubit());
    Ok((0..theta.len())
        .map(|j| {
            let d = simulate(spec, theta, x, Some(j));
            2.0 * inner(&m_psi, d.amplitudes()).re
        })
        .collect())
}

/// Rows `i` = `∇_θ f(xs[i])`. Points are evaluated in parallel and
/// assembled in input order.
pub fn data_jacobian(spec: &ArchitectureSpec, theta: &[f64], xs: &[f64]) -> Result<RealMatrix> {
    check_params(spec, theta)?;
    if xs.is_empty() {
        return Err(Error::InvalidInput("data Jacobian needs at least one point".into()));
    }
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| shift_grad_unchecked(spec, theta, x))
        .collect();
    RealMatrix::from_rows(&rows)
}

/// State quantum Fisher information
/// `F_jk = 4·Re[⟨∂_jψ|∂_kψ⟩ − ⟨∂_jψ|ψ⟩⟨ψ|∂_kψ⟩]`.
pub fn state_qfim(spec: &ArchitectureSpec, theta: &[f64], x: f64) -> Result<RealMatrix> {
    check_params(spec, theta)?;
    let psi = simulate(spec, theta, x, None);
    let derivs = state_derivatives(spec, theta, x)?;
    let overlaps: Vec<Complex64> = derivs.iter().map(|d| inner(psi.amplitudes(), d)).collect();
    let p = theta.len();
    let mut f = RealMatrix::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let v = 4.0 * (inner(&derivs[j], &derivs[k]) - overlaps[j].conj() * overlaps[k]).re;
            f.set(j, k, v);
            f.set(k, j, v);
        }
    }
    Ok(f)
}
