//! Agent cost functions and the induced game among coalitions.
//!
//! Coalition `i` minimizes `f_i(x) = Σ_j f_ij(x)` over its consensual block.
//! Replacing every block by a common value `y_i` gives the virtual-player
//! costs `g_i(y) = f_i(expand(y))` whose own-derivatives form the
//! pseudo-gradient `Q(y)`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;
use crate::topology::CoalitionLayout;

/// Central-difference step used for costs without an analytic gradient.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("game has {got} cost functions for {expected} agents")]
    CostCount { expected: usize, got: usize },
    #[error("sampling budget must be positive")]
    EmptyBudget,
    #[error("sampling box is empty: [{low}, {high}]")]
    EmptyBox { low: f64, high: f64 },
    #[error("monotonicity constant {value} is not positive; the pseudo-gradient is not strongly monotone")]
    NotStronglyMonotone { value: f64 },
    #[error("game has non-quadratic costs")]
    NotQuadratic,
}

/// `f(x) = ½ xᵀ H x + gᵀ x + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

/// A differentiable cost over the full joint state `x ∈ ℝ^{n_sum}`.
pub trait CostFunction: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `grad` (same length as `x`).
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    /// Writes the partial derivatives for the coordinates in `block`.
    fn block_gradient(&self, x: &[f64], block: Range<usize>, out: &mut [f64]) {
        let mut full = vec![0.0; x.len()];
        self.gradient(x, &mut full);
        out.copy_from_slice(&full[block]);
    }

    /// `Some` for costs known to be quadratic; enables the closed-form paths.
    fn quadratic_form(&self) -> Option<QuadraticForm> {
        None
    }

    fn has_analytic_gradient(&self) -> bool {
        true
    }
}

/// `f(x) = m (x_a² − s x_a) − h x_a (1ᵀx)` for agent `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticAgentCost {
    pub agent: usize,
    pub n_sum: usize,
    pub m: f64,
    pub s: f64,
    pub h: f64,
}

impl QuadraticAgentCost {
    pub fn new(agent: usize, n_sum: usize, m: f64, s: f64, h: f64) -> Self {
        assert!(agent < n_sum, "agent {agent} outside state of length {n_sum}");
        Self { agent, n_sum, m, s, h }
    }

    #[inline]
    fn own_partial(&self, x: &[f64], total: f64) -> f64 {
        let xa = x[self.agent];
        2.0 * self.m * xa - self.m * self.s - self.h * total - self.h * xa
    }
}

impl CostFunction for QuadraticAgentCost {
    fn value(&self, x: &[f64]) -> f64 {
        let xa = x[self.agent];
        let total: f64 = x.iter().sum();
        self.m * (xa * xa - self.s * xa) - self.h * xa * total
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let total: f64 = x.iter().sum();
        grad.fill(-self.h * x[self.agent]);
        grad[self.agent] = self.own_partial(x, total);
    }

    fn block_gradient(&self, x: &[f64], block: Range<usize>, out: &mut [f64]) {
        let cross = -self.h * x[self.agent];
        out.fill(cross);
        if block.contains(&self.agent) {
            let total: f64 = x.iter().sum();
            out[self.agent - block.start] = self.own_partial(x, total);
        }
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        let n = self.n_sum;
        let a = self.agent;
        let mut hessian = DMatrix::zeros(n, n);
        for q in 0..n {
            if q != a {
                hessian[(a, q)] = -self.h;
                hessian[(q, a)] = -self.h;
            }
        }
        hessian[(a, a)] = 2.0 * self.m - 2.0 * self.h;
        let mut linear = DVector::zeros(n);
        linear[a] = -self.m * self.s;
        Some(QuadraticForm { hessian, linear, constant: 0.0 })
    }
}

impl CostFunction for QuadraticForm {
    fn value(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        0.5 * v.dot(&(&self.hessian * &v)) + self.linear.dot(&v) + self.constant
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let v = DVector::from_column_slice(x);
        let g = &self.hessian * v + &self.linear;
        grad.copy_from_slice(g.as_slice());
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        Some(self.clone())
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A user-supplied cost. Without a gradient closure, central differences
/// with step [`FD_STEP`] are used.
#[derive(Clone)]
pub struct FnCost {
    label: String,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
}

impl FnCost {
    pub fn new(label: impl Into<String>, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }
}

impl fmt::Debug for FnCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCost")
            .field("label", &self.label)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl CostFunction for FnCost {
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match &self.gradient {
            Some(g) => g(x, grad),
            None => central_difference_into(|p| (self.value)(p), x, FD_STEP, grad),
        }
    }

    fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }
}

/// `t · f`.
#[derive(Clone, Debug)]
pub struct ScaledCost {
    pub inner: Arc<dyn CostFunction>,
    pub factor: f64,
}

impl CostFunction for ScaledCost {
    fn value(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.value(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(x, grad);
        grad.iter_mut().for_each(|g| *g *= self.factor);
    }

    fn block_gradient(&self, x: &[f64], block: Range<usize>, out: &mut [f64]) {
        self.inner.block_gradient(x, block, out);
        out.iter_mut().for_each(|g| *g *= self.factor);
    }

    fn quadratic_form(&self) -> Option<QuadraticForm> {
        self.inner.quadratic_form().map(|q| QuadraticForm {
            hessian: q.hessian * self.factor,
            linear: q.linear * self.factor,
            constant: q.constant * self.factor,
        })
    }

    fn has_analytic_gradient(&self) -> bool {
        self.inner.has_analytic_gradient()
    }
}

fn central_difference_into(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64, grad: &mut [f64]) {
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let orig = probe[k];
        probe[k] = orig + step;
        let up = f(&probe);
        probe[k] = orig - step;
        let down = f(&probe);
        probe[k] = orig;
        grad[k] = (up - down) / (2.0 * step);
    }
}

/// Central finite-difference gradient of `cost` at `x`.
pub fn finite_difference_gradient(cost: &dyn CostFunction, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    central_difference_into(|p| cost.value(p), x, step, &mut grad);
    grad
}

/// Largest `|g − g_fd| / max(1, |g|)` over the coordinates of `x`.
pub fn gradient_check(cost: &dyn CostFunction, x: &[f64]) -> f64 {
    let fd = finite_difference_gradient(cost, x, FD_STEP);
    let mut grad = vec![0.0; x.len()];
    cost.gradient(x, &mut grad);
    grad.iter()
        .zip(&fd)
        .map(|(g, d)| (g - d).abs() / g.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// A constant of the game, with whether it came from a closed form or from
/// sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub certified: bool,
}

/// Secant sampling for non-quadratic games.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingBudget {
    pub pairs: usize,
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

impl Default for SamplingBudget {
    fn default() -> Self {
        Self { pairs: 10_000, low: -10.0, high: 10.0, seed: 0x5eed }
    }
}

impl SamplingBudget {
    fn check(&self) -> Result<(), GameError> {
        if self.pairs == 0 {
            return Err(GameError::EmptyBudget);
        }
        if !(self.low < self.high) {
            return Err(GameError::EmptyBox { low: self.low, high: self.high });
        }
        Ok(())
    }

    fn sample_pairs(&self, dim: usize) -> impl Iterator<Item = (Vec<f64>, Vec<f64>)> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.pairs).map(move |_| {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(self.low..self.high)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(self.low..self.high)).collect();
            (a, b)
        })
    }
}

#[derive(Clone, Debug)]
pub struct GameSpec {
    layout: CoalitionLayout,
    costs: Vec<Arc<dyn CostFunction>>,
}

impl GameSpec {
    pub fn new(layout: CoalitionLayout, costs: Vec<Arc<dyn CostFunction>>) -> Result<Self, GameError> {
        if costs.len() != layout.total() {
            return Err(GameError::CostCount { expected: layout.total(), got: costs.len() });
        }
        Ok(Self { layout, costs })
    }

    /// One `(m, s, h)` triple per agent, in flat order.
    pub fn quadratic(layout: CoalitionLayout, params: &[(f64, f64, f64)]) -> Result<Self, GameError> {
        let n = layout.total();
        if params.len() != n {
            return Err(GameError::CostCount { expected: n, got: params.len() });
        }
        let costs = params
            .iter()
            .enumerate()
            .map(|(a, &(m, s, h))| Arc::new(QuadraticAgentCost::new(a, n, m, s, h)) as Arc<dyn CostFunction>)
            .collect();
        Self::new(layout, costs)
    }

    pub fn layout(&self) -> &CoalitionLayout {
        &self.layout
    }

    pub fn cost(&self, agent: usize) -> &dyn CostFunction {
        &*self.costs[agent]
    }

    pub fn costs(&self) -> &[Arc<dyn CostFunction>] {
        &self.costs
    }

    /// Every cost multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let costs = self
            .costs
            .iter()
            .map(|c| Arc::new(ScaledCost { inner: c.clone(), factor }) as Arc<dyn CostFunction>)
            .collect();
        Self { layout: self.layout.clone(), costs }
    }

    pub fn quadratic_forms(&self) -> Option<Vec<QuadraticForm>> {
        self.costs.iter().map(|c| c.quadratic_form()).collect()
    }

    fn check_state(&self, what: &'static str, x: &[f64]) -> Result<(), GameError> {
        if x.len() != self.layout.total() {
            return Err(GameError::Dimension { what, expected: self.layout.total(), got: x.len() });
        }
        Ok(())
    }

    fn check_profile(&self, y: &[f64]) -> Result<(), GameError> {
        if y.len() != self.layout.num_coalitions() {
            return Err(GameError::Dimension { what: "coalition profile", expected: self.layout.num_coalitions(), got: y.len() });
        }
        Ok(())
    }

    /// `f_i(x)`.
    pub fn coalition_cost(&self, coalition: usize, x: &[f64]) -> Result<f64, GameError> {
        self.check_state("state", x)?;
        Ok(self.layout.range(coalition).map(|a| self.costs[a].value(x)).sum())
    }

    /// `∂f_ij/∂x_i` at `xi`, the `n_i` entries an agent's tracker consumes.
    pub fn agent_partials(&self, agent: usize, xi: &[f64]) -> Result<Vec<f64>, GameError> {
        self.check_state("estimate", xi)?;
        let block = self.layout.range(self.layout.coalition_of(agent));
        let mut out = vec![0.0; block.len()];
        self.costs[agent].block_gradient(xi, block, &mut out);
        Ok(out)
    }

    /// Allocation-free variant of [`agent_partials`](Self::agent_partials)
    /// for callers that already checked dimensions.
    #[inline]
    pub fn agent_partials_into(&self, agent: usize, xi: &[f64], out: &mut [f64]) {
        let block = self.layout.range(self.layout.coalition_of(agent));
        self.costs[agent].block_gradient(xi, block, out);
    }

    /// `∂f_i/∂x_i (x) = Σ_j ∂f_ij/∂x_i (x)`.
    pub fn coalition_gradient(&self, coalition: usize, x: &[f64]) -> Result<Vec<f64>, GameError> {
        self.check_state("state", x)?;
        let block = self.layout.range(coalition);
        let mut total = vec![0.0; block.len()];
        let mut part = vec![0.0; block.len()];
        for a in block.clone() {
            self.costs[a].block_gradient(x, block.clone(), &mut part);
            total.iter_mut().zip(&part).for_each(|(t, p)| *t += p);
        }
        Ok(total)
    }

    pub fn expand(&self, y: &[f64]) -> Result<Vec<f64>, GameError> {
        self.check_profile(y)?;
        Ok(self.layout.expand(y))
    }

    /// `g_i(y) = f_i(expand(y))`.
    pub fn induced_cost(&self, coalition: usize, y: &[f64]) -> Result<f64, GameError> {
        let x = self.expand(y)?;
        self.coalition_cost(coalition, &x)
    }

    /// `Q(y)_i = 1ᵀ ∂f_i/∂x_i (expand(y))`.
    pub fn pseudo_gradient(&self, y: &[f64]) -> Result<Vec<f64>, GameError> {
        let x = self.expand(y)?;
        (0..self.layout.num_coalitions())
            .map(|i| Ok(self.coalition_gradient(i, &x)?.iter().sum()))
            .collect()
    }

    /// For all-quadratic games, `(J, b)` with `Q(y) = J y − b`.
    pub fn pseudo_gradient_affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let forms = self.quadratic_forms()?;
        let n_coal = self.layout.num_coalitions();
        let mut jac = DMatrix::zeros(n_coal, n_coal);
        let mut b = DVector::zeros(n_coal);
        for i in 0..n_coal {
            let block = self.layout.range(i);
            for a in block.clone() {
                let q = &forms[a];
                for l in block.clone() {
                    b[i] -= q.linear[l];
                    for p in 0..n_coal {
                        jac[(i, p)] += self.layout.range(p).map(|c| q.hessian[(l, c)]).sum::<f64>();
                    }
                }
            }
        }
        Some((jac, b))
    }

    /// `l_ij`: Lipschitz constant of `∇f_ij`. Spectral norm of the Hessian
    /// for quadratic costs, otherwise the largest sampled secant quotient.
    pub fn estimate_lipschitz(&self, agent: usize, budget: &SamplingBudget) -> Result<ConstantEstimate, GameError> {
        let cost = &self.costs[agent];
        if let Some(q) = cost.quadratic_form() {
            return Ok(ConstantEstimate { value: linalg::spectral_norm(&q.hessian), certified: true });
        }
        budget.check()?;
        let n = self.layout.total();
        let (mut ga, mut gb) = (vec![0.0; n], vec![0.0; n]);
        let mut best: f64 = 0.0;
        for (a, b) in budget.sample_pairs(n) {
            cost.gradient(&a, &mut ga);
            cost.gradient(&b, &mut gb);
            let num = dist(&ga, &gb);
            let den = dist(&a, &b);
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
        Ok(ConstantEstimate { value: best, certified: false })
    }

    /// `l`: strong-monotonicity constant of `Q`. Smallest eigenvalue of the
    /// symmetric part of the Jacobian for quadratic games, otherwise the
    /// smallest sampled `(a−b)ᵀ(Q(a)−Q(b)) / ‖a−b‖²`. Non-positive values are
    /// an error.
    pub fn estimate_monotonicity(&self, budget: &SamplingBudget) -> Result<ConstantEstimate, GameError> {
        let est = if let Some((jac, _)) = self.pseudo_gradient_affine() {
            let ev = linalg::symmetric_eigenvalues(&linalg::symmetric_part(&jac));
            ConstantEstimate { value: ev[0], certified: true }
        } else {
            budget.check()?;
            let mut best = f64::INFINITY;
            for (a, b) in budget.sample_pairs(self.layout.num_coalitions()) {
                let qa = self.pseudo_gradient(&a)?;
                let qb = self.pseudo_gradient(&b)?;
                let d2 = dist(&a, &b).powi(2);
                if d2 > 0.0 {
                    let inner: f64 = a.iter().zip(&b).zip(qa.iter().zip(&qb)).map(|((x, y), (p, q))| (x - y) * (p - q)).sum();
                    best = best.min(inner / d2);
                }
            }
            ConstantEstimate { value: best, certified: false }
        };
        if !(est.value > 0.0) {
            return Err(GameError::NotStronglyMonotone { value: est.value });
        }
        Ok(est)
    }

    /// Lipschitz constant of `Q` itself (spectral norm of `J` when affine).
    pub fn estimate_pseudo_gradient_lipschitz(&self, budget: &SamplingBudget) -> Result<ConstantEstimate, GameError> {
        if let Some((jac, _)) = self.pseudo_gradient_affine() {
            return Ok(ConstantEstimate { value: linalg::spectral_norm(&jac), certified: true });
        }
        budget.check()?;
        let mut best: f64 = 0.0;
        for (a, b) in budget.sample_pairs(self.layout.num_coalitions()) {
            let qa = self.pseudo_gradient(&a)?;
            let qb = self.pseudo_gradient(&b)?;
            let den = dist(&a, &b);
            if den > 0.0 {
                best = best.max(dist(&qa, &qb) / den);
            }
        }
        Ok(ConstantEstimate { value: best, certified: false })
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_game() -> GameSpec {
        let layout = CoalitionLayout::new(vec![3, 4, 3]).unwrap();
        let m = [10.0, 12.0, 14.0, 16.0, 22.0, 18.0, 20.0, 26.0, 30.0, 12.0];
        let s = [10.0, 10.0, 10.0, 50.0, 50.0, 50.0, 50.0, 20.0, 20.0, 20.0];
        let h = [0.25, 0.25, 0.25, 0.15, 0.15, 0.15, 0.15, 0.1, 0.1, 0.1];
        let params: Vec<_> = (0..10).map(|a| (m[a], s[a], h[a])).collect();
        GameSpec::quadratic(layout, &params).unwrap()
    }

    fn scalar_game(c: f64) -> GameSpec {
        // one coalition with one agent and a dummy second coalition member is
        // not allowed by the layout, so use two singleton coalitions
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let f1 = FnCost::new("(x1-c)^2", move |x: &[f64]| (x[0] - c).powi(2))
            .with_gradient(move |x: &[f64], g: &mut [f64]| {
                g[0] = 2.0 * (x[0] - c);
                g[1] = 0.0;
            });
        let f2 = FnCost::new("x2^2", |x: &[f64]| x[1] * x[1]);
        GameSpec::new(layout, vec![Arc::new(f1), Arc::new(f2)]).unwrap()
    }

    #[test]
    fn agent_11_own_partial_at_ones() {
        let g = reference_game();
        let p = g.agent_partials(0, &[1.0; 10]).unwrap();
        assert_relative_eq!(p[0], -82.75, epsilon = 1e-12);
        // cross partials within the coalition are −h·x_11
        assert_relative_eq!(p[1], -0.25, epsilon = 1e-12);
        let fd = finite_difference_gradient(g.cost(0), &[1.0; 10], FD_STEP);
        assert_relative_eq!(fd[0], -82.75, max_relative = 1e-8);
    }

    #[test]
    fn partials_at_zero() {
        let g = reference_game();
        let p = g.agent_partials(4, &[0.0; 10]).unwrap();
        // agent 2.2: m = 22, s = 50, own index 1 in the block
        assert_eq!(p, vec![0.0, -22.0 * 50.0, 0.0, 0.0]);
    }

    #[test]
    fn coalition_gradient_sums_partials() {
        let g = reference_game();
        let x: Vec<f64> = (0..10).map(|k| 0.3 * k as f64 - 1.0).collect();
        let total = g.coalition_gradient(1, &x).unwrap();
        let mut sum = vec![0.0; 4];
        for a in 3..7 {
            for (s, p) in sum.iter_mut().zip(g.agent_partials(a, &x).unwrap()) {
                *s += p;
            }
        }
        for (t, s) in total.iter().zip(&sum) {
            assert_relative_eq!(t, s, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_quadratic_gradients() {
        let g = scalar_game(3.0);
        assert_eq!(g.coalition_gradient(0, &[5.0, 0.0]).unwrap(), vec![4.0]);
        assert_relative_eq!(g.pseudo_gradient(&[1.0, 0.0]).unwrap()[0], -4.0, epsilon = 1e-12);
        // finite-difference fallback on f2
        assert_relative_eq!(g.pseudo_gradient(&[1.0, 2.0]).unwrap()[1], 4.0, epsilon = 1e-8);
    }

    #[test]
    fn two_player_pseudo_gradient() {
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let f1 = QuadraticForm {
            hessian: DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 2.0]),
            linear: DVector::zeros(2),
            constant: 0.0,
        };
        let f2 = QuadraticForm {
            hessian: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]),
            linear: DVector::from_vec(vec![0.0, -2.0]),
            constant: 1.0,
        };
        let g = GameSpec::new(layout, vec![Arc::new(f1), Arc::new(f2)]).unwrap();
        let y = [0.7, -1.3];
        let q = g.pseudo_gradient(&y).unwrap();
        assert_relative_eq!(q[0], 4.0 * y[0] - 2.0 * y[1], epsilon = 1e-12);
        assert_relative_eq!(q[1], 2.0 * y[1] - 2.0, epsilon = 1e-12);
        let zero = g.pseudo_gradient(&[0.5, 1.0]).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn reference_jacobian() {
        let g = reference_game();
        let (jac, b) = g.pseudo_gradient_affine().unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[67.5, -3.0, -2.25, -1.8, 147.2, -1.8, -0.9, -1.2, 134.2]);
        assert_relative_eq!(jac, expected, epsilon = 1e-12);
        assert_relative_eq!(b, DVector::from_vec(vec![360.0, 3800.0, 1360.0]), epsilon = 1e-10);
        let l = g.estimate_monotonicity(&SamplingBudget::default()).unwrap();
        assert!(l.certified && l.value > 0.0);
    }

    #[test]
    fn induced_cost_matches_expansion() {
        let g = reference_game();
        let y = [1.5, -2.0, 4.0];
        let x = g.expand(&y).unwrap();
        for i in 0..3 {
            assert_eq!(g.induced_cost(i, &y).unwrap(), g.coalition_cost(i, &x).unwrap());
        }
    }

    #[test]
    fn dimension_errors() {
        let g = reference_game();
        assert!(matches!(g.agent_partials(0, &[0.0; 3]), Err(GameError::Dimension { .. })));
        assert!(matches!(g.coalition_gradient(0, &[0.0; 11]), Err(GameError::Dimension { .. })));
        assert!(matches!(g.pseudo_gradient(&[0.0; 2]), Err(GameError::Dimension { .. })));
        assert!(matches!(g.induced_cost(0, &[0.0; 4]), Err(GameError::Dimension { .. })));
    }

    #[test]
    fn scalar_constants() {
        let g = scalar_game(3.0);
        // sampled path for the FnCost
        let est = g.estimate_lipschitz(0, &SamplingBudget { pairs: 200, ..Default::default() }).unwrap();
        assert!(!est.certified);
        assert!(est.value <= 2.0 + 1e-9);
        assert_relative_eq!(est.value, 2.0, max_relative = 1e-3);
        let l = g.estimate_monotonicity(&SamplingBudget { pairs: 200, ..Default::default() }).unwrap();
        assert_relative_eq!(l.value, 2.0, max_relative = 1e-6);
        assert_eq!(
            g.estimate_lipschitz(0, &SamplingBudget { pairs: 0, ..Default::default() }),
            Err(GameError::EmptyBudget)
        );
    }

    #[test]
    fn scaling_scales_constants() {
        let g = reference_game();
        let t = 2.5;
        let gs = g.scaled(t);
        let b = SamplingBudget::default();
        for a in 0..10 {
            assert_relative_eq!(
                gs.estimate_lipschitz(a, &b).unwrap().value,
                t * g.estimate_lipschitz(a, &b).unwrap().value,
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            gs.estimate_monotonicity(&b).unwrap().value,
            t * g.estimate_monotonicity(&b).unwrap().value,
            max_relative = 1e-12
        );
    }

    #[test]
    fn non_monotone_rejected() {
        let layout = CoalitionLayout::new(vec![1, 1]).unwrap();
        let g = GameSpec::quadratic(layout, &[(-1.0, 0.0, 0.0), (1.0, 0.0, 0.0)]).unwrap();
        assert!(matches!(
            g.estimate_monotonicity(&SamplingBudget::default()),
            Err(GameError::NotStronglyMonotone { .. })
        ));
    }
}
