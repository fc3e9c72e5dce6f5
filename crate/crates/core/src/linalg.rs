//! Dense linear-algebra helpers: spectral radius and norm, symmetric
//! extremal eigenvalues, and the discrete Lyapunov equation
//! `AᵀWA − W = −I`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use thiserror::Error;

/// Largest dimension solved through the Kronecker-vectorized system
/// (`n² × n²`, so at most 400 × 400).
pub const LYAPUNOV_DIRECT_MAX_DIM: usize = 20;

const SERIES_MAX_DOUBLINGS: usize = 64;
const SERIES_TAIL_TOL: f64 = 1e-18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Schur stable (spectral radius {radius})")]
    NotSchur { radius: f64 },
    #[error("singular linear system")]
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovMethod {
    Direct,
    Series,
}

#[derive(Clone, Debug)]
pub struct LyapunovSolution {
    pub w: DMatrix<f64>,
    /// `max |AᵀWA − W + I|` entrywise.
    pub residual: f64,
    pub method: LyapunovMethod,
}

fn ensure_square(a: &DMatrix<f64>) -> Result<usize, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

const SCHUR_MAX_ITER: usize = 10_000;
/// Diagonal shifts (relative to `max |a_ij|`) tried when the unshifted
/// Schur iteration stalls, e.g. on eigenvalue pairs `±λ`.
const SCHUR_SHIFTS: [f64; 4] = [0.137, -0.291, 0.613, -0.877];
const GELFAND_SQUARINGS: usize = 40;

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if a.nrows() == a.ncols() && a.relative_eq(&a.transpose(), 0.0, 0.0) {
        return a.clone().symmetric_eigenvalues().amax();
    }
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    std::iter::once(0.0)
        .chain(SCHUR_SHIFTS.iter().map(|c| c * scale))
        .find_map(|shift| shifted_radius(a, shift))
        .unwrap_or_else(|| gelfand_radius(a))
}

/// Eigenvalues of `A + cI` by a bounded Schur iteration, shifted back.
fn shifted_radius(a: &DMatrix<f64>, shift: f64) -> Option<f64> {
    let n = a.nrows();
    let shifted = a + DMatrix::<f64>::identity(n, n) * shift;
    let schur = Schur::try_new(shifted, f64::EPSILON, SCHUR_MAX_ITER)?;
    Some(schur.complex_eigenvalues().iter().map(|z| (z - shift).norm()).fold(0.0, f64::max))
}

/// `lim ‖A^k‖^{1/k}` by repeated squaring with rescaling.
fn gelfand_radius(a: &DMatrix<f64>) -> f64 {
    let mut power = a.clone();
    let mut log_scale = 0.0;
    let mut estimate = spectral_norm(a);
    for j in 1..=GELFAND_SQUARINGS {
        power = &power * &power;
        log_scale *= 2.0;
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_scale += norm.ln();
        estimate = (log_scale / 2f64.powi(j as i32)).exp();
    }
    estimate
}

/// Induced 2-norm (largest singular value), from the eigenvalues of `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = a.transpose() * a;
    let top = SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(0.0, f64::max);
    top.max(0.0).sqrt()
}

/// Power iteration on `AᵀA`. Slower and start-vector dependent; kept as an
/// independent check on [`spectral_norm`].
pub fn spectral_norm_power(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let gram = a.transpose() * a;
    // irregular start so no structured null direction of `A` is hit exactly
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i as f64) * 1.618).sin());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = &gram * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        if (next - lambda).abs() <= tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `(A + Aᵀ) / 2`.
pub fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn is_positive_definite(w: &DMatrix<f64>) -> bool {
    let sym = symmetric_part(w);
    sym.cholesky().is_some()
}

pub fn lyapunov_residual(a: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let r = a.transpose() * w * a - w + DMatrix::<f64>::identity(n, n);
    r.amax()
}

/// Solves `AᵀWA − W = −I` through `(Aᵀ ⊗ Aᵀ − I) vec(W) = −vec(I)`.
pub fn lyapunov_direct(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = ensure_square(a)?;
    let at = a.transpose();
    let mut system = at.kronecker(&at);
    for d in 0..n * n {
        system[(d, d)] -= 1.0;
    }
    let rhs = DVector::from_iterator(n * n, DMatrix::<f64>::identity(n, n).iter().map(|v| -v));
    let sol = system.lu().solve(&rhs).ok_or(LinalgError::Singular)?;
    let w = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetric_part(&w))
}

/// Sums `Σ_k (Aᵀ)^k A^k` by Smith doubling until the remaining tail, bounded
/// by `‖A^{2^j}‖_F² · ‖W‖`, is negligible.
pub fn lyapunov_series(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = ensure_square(a)?;
    let mut w = DMatrix::<f64>::identity(n, n);
    let mut power = a.clone();
    for _ in 0..SERIES_MAX_DOUBLINGS {
        let fro = power.norm();
        if fro * fro <= SERIES_TAIL_TOL {
            return Ok(symmetric_part(&w));
        }
        if !fro.is_finite() {
            break;
        }
        let term = power.transpose() * &w * &power;
        w += term;
        power = &power * &power;
    }
    Err(LinalgError::NotSchur { radius: spectral_radius(a) })
}

/// Checks the Schur property and, when it holds, solves the discrete
/// Lyapunov equation (direct for small dimension, series otherwise).
pub fn schur_and_lyapunov(a: &DMatrix<f64>) -> Result<(f64, LyapunovSolution), LinalgError> {
    let n = ensure_square(a)?;
    let radius = spectral_radius(a);
    if !(radius < 1.0) {
        return Err(LinalgError::NotSchur { radius });
    }
    let (w, method) = if n <= LYAPUNOV_DIRECT_MAX_DIM {
        (lyapunov_direct(a)?, LyapunovMethod::Direct)
    } else {
        (lyapunov_series(a)?, LyapunovMethod::Series)
    };
    let residual = lyapunov_residual(a, &w);
    Ok((radius, LyapunovSolution { w, residual, method }))
}
