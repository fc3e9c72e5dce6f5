//! Centralized equilibrium solvers, used as ground truth for the
//! distributed iteration.
//!
//! At an equilibrium every coalition is consensual, `x* = expand(y*)`, and the
//! pseudo-gradient vanishes, `Q(y*) = 0`.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::game::{GameError, GameSpec, SamplingBudget};
use crate::seeker::block_spread;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("game has non-quadratic costs; use the fixed-point solver")]
    NotQuadratic,
    #[error("pseudo-gradient Jacobian is singular; the game is not strongly monotone")]
    Singular,
    #[error("fixed-point iteration did not reach ‖Q‖ ≤ {tol:e} within {iterations} iterations (last ‖Q‖ = {residual:e})")]
    NoConvergence { tol: f64, iterations: usize, residual: f64 },
    #[error("fixed-point iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("step η must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    ClosedForm,
    FixedPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub y_star: Vec<f64>,
    pub x_star: Vec<f64>,
    /// `‖Q(y*)‖₂`.
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn finish(game: &GameSpec, y: Vec<f64>, method: SolveMethod, iterations: usize) -> Result<EquilibriumResult, OracleError> {
    let residual = norm(&game.pseudo_gradient(&y)?);
    let x_star = game.expand(&y)?;
    Ok(EquilibriumResult { y_star: y, x_star, residual, method, iterations })
}

/// Solves `J y = b` for the affine pseudo-gradient `Q(y) = J y − b`, with one
/// step of iterative refinement.
pub fn solve_ne_quadratic(game: &GameSpec) -> Result<EquilibriumResult, OracleError> {
    let (jac, b) = game.pseudo_gradient_affine().ok_or(OracleError::NotQuadratic)?;
    let lu = jac.clone().lu();
    let mut y = lu.solve(&b).ok_or(OracleError::Singular)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::Singular);
    }
    let r: DVector<f64> = &b - &jac * &y;
    if let Some(dy) = lu.solve(&r) {
        y += dy;
    }
    finish(game, y.as_slice().to_vec(), SolveMethod::ClosedForm, 0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointOptions {
    /// Step; defaults to `l / L²` from the game's constants.
    pub eta: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    pub start: Option<Vec<f64>>,
    /// Used for the constants of non-quadratic games.
    pub budget: SamplingBudget,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { eta: None, tol: 1e-11, max_iterations: 1_000_000, start: None, budget: SamplingBudget::default() }
    }
}

/// Default step `l / L²` (contractive when `l` and `L` bound the true
/// constants).
pub fn default_fixed_point_step(game: &GameSpec, budget: &SamplingBudget) -> Result<f64, OracleError> {
    let l = game.estimate_monotonicity(budget)?.value;
    let big_l = game.estimate_pseudo_gradient_lipschitz(budget)?.value;
    Ok(l / (big_l * big_l))
}

/// Iterates `y ← y − η Q(y)` until `‖Q(y)‖₂ ≤ tol`.
pub fn solve_ne_fixed_point(game: &GameSpec, opts: &FixedPointOptions) -> Result<EquilibriumResult, OracleError> {
    let eta = match opts.eta {
        Some(e) => e,
        None => default_fixed_point_step(game, &opts.budget)?,
    };
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(OracleError::InvalidStep(eta));
    }
    let n = game.layout().num_coalitions();
    let mut y = match &opts.start {
        Some(s) => {
            if s.len() != n {
                return Err(GameError::Dimension { what: "start profile", expected: n, got: s.len() }.into());
            }
            s.clone()
        }
        None => vec![0.0; n],
    };
    let mut q = game.pseudo_gradient(&y)?;
    let mut residual = norm(&q);
    for it in 0..opts.max_iterations {
        if residual <= opts.tol {
            return finish(game, y, SolveMethod::FixedPoint, it);
        }
        y.iter_mut().zip(&q).for_each(|(v, g)| *v -= eta * g);
        if y.iter().any(|v| !v.is_finite() || v.abs() > 1e15) {
            return Err(OracleError::Diverged { iteration: it + 1 });
        }
        q = game.pseudo_gradient(&y)?;
        residual = norm(&q);
    }
    if residual <= opts.tol {
        return finish(game, y, SolveMethod::FixedPoint, opts.max_iterations);
    }
    Err(OracleError::NoConvergence { tol: opts.tol, iterations: opts.max_iterations, residual })
}

/// Closed form when every cost is quadratic, fixed point otherwise.
pub fn solve_ne(game: &GameSpec) -> Result<EquilibriumResult, OracleError> {
    match solve_ne_quadratic(game) {
        Err(OracleError::NotQuadratic) => solve_ne_fixed_point(game, &FixedPointOptions::default()),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeReport {
    pub tol: f64,
    /// `max_j x_ij − min_j x_ij` per coalition.
    pub spreads: Vec<f64>,
    /// `|1ᵀ ∂f_i/∂x_i (x)|` per coalition.
    pub residuals: Vec<f64>,
    /// Coalitions (zero-based) failing the consensus check.
    pub inconsistent: Vec<usize>,
    /// Coalitions (zero-based) failing the stationarity check.
    pub non_stationary: Vec<usize>,
}

impl NeReport {
    pub fn passes(&self) -> bool {
        self.inconsistent.is_empty() && self.non_stationary.is_empty()
    }
}

/// Checks consensus within every coalition and the aggregated first-order
/// condition `1ᵀ ∂f_i/∂x_i (x) = 0`.
pub fn verify_ne(game: &GameSpec, x: &[f64], tol: f64) -> Result<NeReport, OracleError> {
    let layout = game.layout();
    if x.len() != layout.total() {
        return Err(GameError::Dimension { what: "state", expected: layout.total(), got: x.len() }.into());
    }
    let mut spreads = Vec::with_capacity(layout.num_coalitions());
    let mut residuals = Vec::with_capacity(layout.num_coalitions());
    for i in 0..layout.num_coalitions() {
        spreads.push(block_spread(&x[layout.range(i)]));
        residuals.push(game.coalition_gradient(i, x)?.iter().sum::<f64>().abs());
    }
    let inconsistent = (0..spreads.len()).filter(|&i| spreads[i] > tol).collect();
    let non_stationary = (0..residuals.len()).filter(|&i| residuals[i] > tol).collect();
    Ok(NeReport { tol, spreads, residuals, inconsistent, non_stationary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::CoalitionLayout;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_game_equilibrium() {
        // two independent players: (x1 − 3)² and (x2 + 1)²
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let g = GameSpec::quadratic(layout, &[(1.0, 6.0, 0.0), (1.0, -2.0, 0.0)]).unwrap();
        let r = solve_ne_quadratic(&g).unwrap();
        assert_relative_eq!(r.y_star[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(r.y_star[1], -1.0, epsilon = 1e-14);
        let fp = solve_ne_fixed_point(&g, &FixedPointOptions::default()).unwrap();
        assert_relative_eq!(fp.y_star[0], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn fixed_point_at_solution_returns_immediately() {
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let g = GameSpec::quadratic(layout, &[(1.0, 6.0, 0.0), (1.0, -2.0, 0.0)]).unwrap();
        let opts = FixedPointOptions { start: Some(vec![3.0, -1.0]), ..Default::default() };
        assert_eq!(solve_ne_fixed_point(&g, &opts).unwrap().iterations, 0);
    }

    #[test]
    fn non_quadratic_rejected_by_closed_form() {
        use crate::game::FnCost;
        use std::sync::Arc;
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let f = FnCost::new("x1^4 + x1^2", |x: &[f64]| x[0].powi(4) + x[0] * x[0]);
        let h = FnCost::new("x2^2", |x: &[f64]| x[1] * x[1]);
        let g = GameSpec::new(layout, vec![Arc::new(f), Arc::new(h)]).unwrap();
        assert_eq!(solve_ne_quadratic(&g), Err(OracleError::NotQuadratic));
    }

    #[test]
    fn singular_jacobian_reported() {
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let g = GameSpec::quadratic(layout, &[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(solve_ne_quadratic(&g), Err(OracleError::Singular));
    }

    #[test]
    fn verify_flags_split_coalition() {
        let layout = CoalitionLayout::new(vec![2, 1]).unwrap();
        let g = GameSpec::quadratic(layout, &[(1.0, 0.0, 0.0); 3]).unwrap();
        let report = verify_ne(&g, &[0.0, 1.0, 0.0], 1e-6).unwrap();
        assert_eq!(report.inconsistent, vec![0]);
        assert!(!report.passes());
        let ok = verify_ne(&g, &[0.0, 0.0, 0.0], 1e-6).unwrap();
        assert!(ok.passes());
    }
}
