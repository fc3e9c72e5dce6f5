//! Convergence diagnostics: error decomposition, contraction certificates,
//! the certified step size, a per-step Lyapunov auditor and a linear-rate fit.
//!
//! Errors are measured against the equilibrium profile `y*`:
//!
//! - `x̄_i = u_iᵀ x_i / n_i` and `e_x̄ = x̄ − y*`;
//! - `e_x` stacks `x_i − 1 x̄_i`;
//! - `e_ψ` stacks `ψ_i − v_i ⊗ ψ̄_i` with `ψ̄_i = (1/n_i) Σ_j ψ_ij`;
//! - `e_ξ = ξ − 1 ⊗ X̄`, `X̄ = expand(x̄)`.
//!
//! The estimator matrix `M = I − Γ(L ⊗ I + A_d)` acts independently on each
//! estimated coordinate `q`: after a permutation it is block diagonal with
//! `n_sum` blocks `M_q = I − Γ_q (L + diag(a_·q))`. Spectral radii, Lyapunov
//! solutions and norms are computed per block, which is exact and avoids
//! `n_sum² × n_sum²` dense algebra.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::game::{ConstantEstimate, GameError, SamplingBudget};
use crate::linalg::{self, LinalgError, LyapunovMethod};
use crate::seeker::{Instance, SwarmState};
use crate::topology::DirectedGameGraph;
use crate::trajectory::{ErrorNorms, TrajectoryLog};

/// Largest accepted residual of a Lyapunov solve.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;
/// Relative slack for roundoff in the audit inequalities, applied to the
/// magnitude of the increment and right-hand side terms.
pub const AUDIT_REL_SLACK: f64 = 1e-9;
/// Errors below this fraction of the problem scale are at the floating-point
/// floor and are not audited.
pub const AUDIT_FLOOR_REL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{matrix} is not Schur stable (spectral radius {radius})")]
    NotSchur { matrix: String, radius: f64 },
    #[error("Lyapunov solve for {matrix} has residual {residual:e} (limit {LYAPUNOV_RESIDUAL_TOL:e})")]
    LyapunovResidual { matrix: String, residual: f64 },
    #[error("Lyapunov solution for {matrix} is not positive definite")]
    NotPositiveDefinite { matrix: String },
    #[error("agent {agent} has no in-neighbor; the estimator gain is undefined")]
    ZeroDenominator { agent: usize },
    #[error("trajectory has no consecutive full-state snapshots to audit")]
    MissingSnapshots,
    #[error("reference profile has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("rate fit needs at least {needed} iterations above the floating-point floor, got {got}")]
    RateTooShort { needed: usize, got: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDecomposition {
    pub xbar: Vec<f64>,
    pub e_xbar: Vec<f64>,
    pub e_x: Vec<f64>,
    pub e_psi: Vec<f64>,
    pub e_xi: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

impl ErrorDecomposition {
    /// Componentwise sum.
    pub fn plus(&self, other: &ErrorDecomposition) -> ErrorDecomposition {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p + q).collect();
        ErrorDecomposition {
            xbar: add(&self.xbar, &other.xbar),
            e_xbar: add(&self.e_xbar, &other.e_xbar),
            e_x: add(&self.e_x, &other.e_x),
            e_psi: add(&self.e_psi, &other.e_psi),
            e_xi: add(&self.e_xi, &other.e_xi),
        }
    }

    pub fn norms(&self) -> ErrorNorms {
        ErrorNorms { x: norm(&self.e_x), psi: norm(&self.e_psi), xi: norm(&self.e_xi), xbar: norm(&self.e_xbar) }
    }
}

/// Splits the state's errors against `y_star`.
pub fn compute_errors(instance: &Instance, state: &SwarmState, y_star: &[f64]) -> ErrorDecomposition {
    let layout = instance.layout();
    let n = layout.total();
    let mut xbar = Vec::with_capacity(layout.num_coalitions());
    let mut e_x = vec![0.0; n];
    let mut e_psi = vec![0.0; layout.psi_len()];
    for i in 0..layout.num_coalitions() {
        let range = layout.range(i);
        let ni = range.len();
        let cw = instance.weights().coalition(i);
        let xi_block = &state.x[range.clone()];
        let avg = cw.left.iter().zip(xi_block).map(|(u, x)| u * x).sum::<f64>() / ni as f64;
        xbar.push(avg);
        for (e, x) in e_x[range.clone()].iter_mut().zip(xi_block) {
            *e = x - avg;
        }
        let psi = &state.psi[layout.psi_range(i)];
        let mut mean = vec![0.0; ni];
        for j in 0..ni {
            for l in 0..ni {
                mean[l] += psi[j * ni + l];
            }
        }
        mean.iter_mut().for_each(|m| *m /= ni as f64);
        let e = &mut e_psi[layout.psi_range(i)];
        for j in 0..ni {
            for l in 0..ni {
                e[j * ni + l] = psi[j * ni + l] - cw.right[j] * mean[l];
            }
        }
    }
    let e_xbar = xbar.iter().zip(y_star).map(|(a, b)| a - b).collect();
    let big_xbar = layout.expand(&xbar);
    let e_xi = state.xi.iter().enumerate().map(|(idx, v)| v - big_xbar[idx % n]).collect();
    ErrorDecomposition { xbar, e_xbar, e_x, e_psi, e_xi }
}

/// `Γ`, `A_d` (diagonals, indexed `a·n_sum + q`) and `M = I − Γ(L ⊗ I + A_d)`.
#[derive(Clone, Debug)]
pub struct EstimatorMatrices {
    pub gamma: Vec<f64>,
    pub anchors: Vec<f64>,
    pub m: DMatrix<f64>,
}

pub fn build_estimator_matrices(graph: &DirectedGameGraph) -> Result<EstimatorMatrices, AnalysisError> {
    let n = graph.num_agents();
    let dim = n * n;
    let mut gamma = vec![0.0; dim];
    let mut anchors = vec![0.0; dim];
    let mut m = DMatrix::<f64>::identity(dim, dim);
    for a in 0..n {
        if graph.in_degree(a) == 0 {
            return Err(AnalysisError::ZeroDenominator { agent: a });
        }
        for q in 0..n {
            let row = a * n + q;
            let anchor = if graph.adjacent(a, q) { 1.0 } else { 0.0 };
            anchors[row] = anchor;
            gamma[row] = 1.0 / (graph.in_degree(a) as f64 + anchor);
            for b in 0..n {
                let l = graph.laplacian_entry(a, b) as f64 + if a == b { anchor } else { 0.0 };
                m[(row, b * n + q)] -= gamma[row] * l;
            }
        }
    }
    Ok(EstimatorMatrices { gamma, anchors, m })
}

/// `M_q = I − Γ_q (L + diag(a_·q))` for every estimated coordinate `q`.
pub fn estimator_blocks(graph: &DirectedGameGraph) -> Result<Vec<DMatrix<f64>>, AnalysisError> {
    let n = graph.num_agents();
    (0..n)
        .map(|q| {
            let mut block = DMatrix::<f64>::identity(n, n);
            for a in 0..n {
                if graph.in_degree(a) == 0 {
                    return Err(AnalysisError::ZeroDenominator { agent: a });
                }
                let anchor = if graph.adjacent(a, q) { 1.0 } else { 0.0 };
                let denom = graph.in_degree(a) as f64 + anchor;
                for b in 0..n {
                    let l = graph.laplacian_entry(a, b) as f64 + if a == b { anchor } else { 0.0 };
                    block[(a, b)] -= l / denom;
                }
            }
            Ok(block)
        })
        .collect()
}

/// A contraction certificate: spectral radius and the Lyapunov solution.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixCertificate {
    pub name: String,
    pub spectral_radius: f64,
    pub lyapunov_residual: f64,
    pub lyapunov_method: LyapunovMethod,
    /// `‖W‖`.
    pub w_norm: f64,
    #[serde(skip)]
    pub w: DMatrix<f64>,
}

fn certify(name: String, a: &DMatrix<f64>) -> Result<MatrixCertificate, AnalysisError> {
    let (radius, sol) = match linalg::schur_and_lyapunov(a) {
        Ok(r) => r,
        Err(LinalgError::NotSchur { radius }) => return Err(AnalysisError::NotSchur { matrix: name, radius }),
        Err(e) => return Err(e.into()),
    };
    if !(sol.residual <= LYAPUNOV_RESIDUAL_TOL) {
        return Err(AnalysisError::LyapunovResidual { matrix: name, residual: sol.residual });
    }
    if !linalg::is_positive_definite(&sol.w) {
        return Err(AnalysisError::NotPositiveDefinite { matrix: name });
    }
    Ok(MatrixCertificate {
        name,
        spectral_radius: radius,
        lyapunov_residual: sol.residual,
        lyapunov_method: sol.method,
        w_norm: linalg::spectral_norm(&sol.w),
        w: sol.w,
    })
}

/// Per-coalition certificate data.
#[derive(Clone, Debug, Serialize)]
pub struct CoalitionCertificate {
    pub coalition: usize,
    pub c_bar: MatrixCertificate,
    pub r_bar: MatrixCertificate,
    /// `l_ij` for the coalition's agents.
    pub lipschitz: Vec<f64>,
    pub u_dot_v: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

/// The estimator certificate, aggregated over the blocks `M_q`.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorCertificate {
    pub spectral_radius: f64,
    pub lyapunov_residual: f64,
    /// `‖W_M‖`.
    pub w_norm: f64,
    /// `‖Mᵀ W_M‖`.
    pub mt_w_norm: f64,
    /// `‖Γ(L ⊗ I + A_d)‖`.
    pub gain_norm: f64,
    #[serde(skip)]
    pub blocks: Vec<MatrixCertificate>,
}

/// Every constant of the certified step-size bound.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateSet {
    pub monotonicity: ConstantEstimate,
    /// `true` when all game constants came from closed forms.
    pub constants_certified: bool,
    pub coalitions: Vec<CoalitionCertificate>,
    pub estimator: EstimatorCertificate,
    pub beta_psi_xi: f64,
    pub beta_psi_x: f64,
    pub beta_xi_x: f64,
    pub beta_xbar_psi: f64,
    pub beta_xbar_xi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub sigma: f64,
    /// `[l/(2Nσ), γ1/(8σ), γ2/(8σ), 1]`.
    pub alpha_bounds: [f64; 4],
    pub alpha: f64,
    /// Guaranteed per-step relative decrease of `V` at `alpha`.
    pub epsilon: f64,
}

impl CertificateSet {
    /// `max_i n_i³ / (α u_iᵀ v_i)`.
    pub fn w_xbar_norm(&self, alpha: f64) -> f64 {
        self.coalitions.iter().map(|c| w_xbar_entry(c, alpha)).fold(0.0, f64::max)
    }

    /// The guaranteed decrease rate for step `alpha`.
    pub fn epsilon_for(&self, alpha: f64) -> f64 {
        let wc = self.coalitions.iter().map(|c| c.c_bar.w_norm).fold(0.0, f64::max);
        let wr = self.coalitions.iter().map(|c| c.r_bar.w_norm).fold(0.0, f64::max);
        [
            self.monotonicity.value / (2.0 * self.w_xbar_norm(alpha)),
            1.0 / (8.0 * wc),
            1.0 / (8.0 * self.estimator.w_norm),
            1.0 / (4.0 * wr),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// Names and spectral radii of every certified matrix.
    pub fn radii(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for c in &self.coalitions {
            out.push((c.c_bar.name.clone(), c.c_bar.spectral_radius));
            out.push((c.r_bar.name.clone(), c.r_bar.spectral_radius));
        }
        out.push(("M".into(), self.estimator.spectral_radius));
        out
    }

    /// Largest Lyapunov residual over all solves.
    pub fn max_lyapunov_residual(&self) -> f64 {
        self.coalitions
            .iter()
            .flat_map(|c| [c.c_bar.lyapunov_residual, c.r_bar.lyapunov_residual])
            .fold(self.estimator.lyapunov_residual, f64::max)
    }
}

fn w_xbar_entry(c: &CoalitionCertificate, alpha: f64) -> f64 {
    let n = c.lipschitz.len() as f64;
    n.powi(3) / (alpha * c.u_dot_v)
}

/// Estimator certificates for `graph` (per-block Schur and Lyapunov).
pub fn certify_estimator(graph: &DirectedGameGraph) -> Result<EstimatorCertificate, AnalysisError> {
    let blocks = estimator_blocks(graph)?;
    let mut certs = Vec::with_capacity(blocks.len());
    let (mut radius, mut residual, mut w_norm, mut mt_w_norm, mut gain_norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (q, block) in blocks.iter().enumerate() {
        let cert = certify(format!("M (coordinate {})", graph.layout().agent(q)), block).map_err(|e| match e {
            AnalysisError::NotSchur { radius, .. } => AnalysisError::NotSchur { matrix: "M".into(), radius },
            other => other,
        })?;
        radius = radius.max(cert.spectral_radius);
        residual = residual.max(cert.lyapunov_residual);
        w_norm = w_norm.max(cert.w_norm);
        mt_w_norm = mt_w_norm.max(linalg::spectral_norm(&(block.transpose() * &cert.w)));
        let n = block.nrows();
        gain_norm = gain_norm.max(linalg::spectral_norm(&(DMatrix::<f64>::identity(n, n) - block)));
        certs.push(cert);
    }
    Ok(EstimatorCertificate { spectral_radius: radius, lyapunov_residual: residual, w_norm, mt_w_norm, gain_norm, blocks: certs })
}

/// Computes every constant of the certified bound and returns the step
/// `α = min{l/(2Nσ), γ1/(8σ), γ2/(8σ), 1}` with its certificates.
pub fn safe_step_size(instance: &Instance) -> Result<CertificateSet, AnalysisError> {
    safe_step_size_with(instance, &SamplingBudget::default())
}

pub fn safe_step_size_with(instance: &Instance, budget: &SamplingBudget) -> Result<CertificateSet, AnalysisError> {
    let layout = instance.layout();
    let game = instance.game();
    let n_coal = layout.num_coalitions();
    let n_sum = layout.total() as f64;
    let max_n = layout.max_size() as f64;

    let monotonicity = game.estimate_monotonicity(budget)?;
    let l = monotonicity.value;
    let mut constants_certified = monotonicity.certified;

    let estimator = certify_estimator(instance.graph())?;
    let km = 4.0 * estimator.mt_w_norm.powi(2) + 2.0 * estimator.w_norm;
    let gain_sq = estimator.gain_norm.powi(2);

    let mut coalitions = Vec::with_capacity(n_coal);
    let mut max_kc_l2: f64 = 0.0;
    let mut max_xbar_psi: f64 = 0.0;
    let mut max_n_l2: f64 = 0.0;
    for i in 0..n_coal {
        let range = layout.range(i);
        let ni = range.len();
        let nf = ni as f64;
        let cw = instance.weights().coalition(i);
        let ones = DVector::<f64>::from_element(ni, 1.0);
        let eye = DMatrix::<f64>::identity(ni, ni);
        let v_proj = &cw.right * ones.transpose() / nf;
        let u_proj = &ones * cw.left.transpose() / nf;
        let c_bar_m = &cw.push - &v_proj;
        let r_bar_m = &cw.pull - &u_proj;
        let i_v = &eye - &v_proj;
        let i_u = &eye - &u_proj;
        let c_bar = certify(format!("Cbar_{}", i + 1), &c_bar_m)?;
        let r_bar = certify(format!("Rbar_{}", i + 1), &r_bar_m)?;
        let kc = 2.0 * linalg::spectral_norm(&(c_bar_m.transpose() * &c_bar.w * &i_v)).powi(2)
            + linalg::spectral_norm(&(i_v.transpose() * &c_bar.w * &i_v));
        let kr = 2.0 * linalg::spectral_norm(&(r_bar_m.transpose() * &r_bar.w * &i_u)).powi(2)
            + linalg::spectral_norm(&(i_u.transpose() * &r_bar.w * &i_u));

        let mut lipschitz = Vec::with_capacity(ni);
        for a in range {
            let est = game.estimate_lipschitz(a, budget)?;
            constants_certified &= est.certified;
            lipschitz.push(est.value);
        }
        let sum_l2: f64 = lipschitz.iter().map(|v| v * v).sum();
        let max_l2 = lipschitz.iter().map(|v| v * v).fold(0.0, f64::max);
        max_kc_l2 = max_kc_l2.max(kc * max_l2);
        max_n_l2 = max_n_l2.max(nf * sum_l2);

        let u_dot_v = cw.left.dot(&cw.right);
        let u_sq = cw.left.norm_squared();
        let v_sq = cw.right.norm_squared();
        max_xbar_psi = max_xbar_psi.max(nf.powi(3) * u_sq / (u_dot_v * u_dot_v));

        let b0 = nf + (1.0 / nf + max_n) * v_sq * sum_l2;
        let b1 = u_sq / (nf * u_dot_v) * b0;
        let b3 = kr / (nf * nf) * b0;
        let b2 = n_sum * km * (nf * u_sq / nf.powi(4)) * b0;
        coalitions.push(CoalitionCertificate { coalition: i + 1, c_bar, r_bar, lipschitz, u_dot_v, b0, b1, b2, b3 });
    }

    let beta_psi_xi = 2.0 * max_kc_l2 * gain_sq;
    let beta_psi_x = n_sum * beta_psi_xi;
    let beta_xi_x = n_sum * km * gain_sq;
    let beta_xbar_psi = 2.0 / l * max_xbar_psi;
    let beta_xbar_xi = 2.0 * max_n_l2 / l;
    let gamma1 = 4.0 * beta_xbar_psi;
    let gamma2 = 4.0 * (beta_xbar_xi + beta_psi_xi * gamma1);
    let gamma3 = 4.0 * (beta_psi_x * gamma1 + beta_xi_x * gamma2);
    let max_of = |f: fn(&CoalitionCertificate) -> f64| coalitions.iter().map(f).fold(0.0, f64::max);
    let sigma = max_of(|c| c.b1) + gamma2 * max_of(|c| c.b2) + gamma3 * max_of(|c| c.b3);
    let alpha_bounds = [l / (2.0 * n_coal as f64 * sigma), gamma1 / (8.0 * sigma), gamma2 / (8.0 * sigma), 1.0];
    let alpha = alpha_bounds.iter().copied().fold(f64::INFINITY, f64::min);

    let mut certs = CertificateSet {
        monotonicity,
        constants_certified,
        coalitions,
        estimator,
        beta_psi_xi,
        beta_psi_x,
        beta_xi_x,
        beta_xbar_psi,
        beta_xbar_xi,
        gamma1,
        gamma2,
        gamma3,
        sigma,
        alpha_bounds,
        alpha,
        epsilon: 0.0,
    };
    certs.epsilon = certs.epsilon_for(alpha);
    Ok(certs)
}

/// The four weighted parts of `V` and their combination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LyapunovParts {
    pub xbar: f64,
    pub psi: f64,
    pub xi: f64,
    pub x: f64,
    pub total: f64,
}

fn bilinear(w: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for r in 0..n {
        let mut row = 0.0;
        for c in 0..n {
            row += w[(r, c)] * b[c];
        }
        acc += a[r] * row;
    }
    acc
}

/// The symmetric bilinear form behind `V`, evaluated part by part:
/// `lyapunov_form(e, e)` is `V`, and `lyapunov_form(e' − e, e' + e)` is
/// `V' − V` without cancellation.
pub fn lyapunov_form(
    certs: &CertificateSet,
    instance: &Instance,
    a: &ErrorDecomposition,
    b: &ErrorDecomposition,
    alpha: f64,
) -> LyapunovParts {
    let layout = instance.layout();
    let n = layout.total();
    let mut parts = LyapunovParts::default();
    for (i, c) in certs.coalitions.iter().enumerate() {
        parts.xbar += w_xbar_entry(c, alpha) * a.e_xbar[i] * b.e_xbar[i];
        let ni = layout.size(i);
        let (ea, eb) = (&a.e_psi[layout.psi_range(i)], &b.e_psi[layout.psi_range(i)]);
        let w = &c.c_bar.w;
        for j in 0..ni {
            for m in 0..ni {
                let dot: f64 = (0..ni).map(|l| ea[j * ni + l] * eb[m * ni + l]).sum();
                parts.psi += w[(j, m)] * dot;
            }
        }
        parts.x += bilinear(&c.r_bar.w, &a.e_x[layout.range(i)], &b.e_x[layout.range(i)]);
    }
    let mut col_a = vec![0.0; n];
    let mut col_b = vec![0.0; n];
    for (q, block) in certs.estimator.blocks.iter().enumerate() {
        for r in 0..n {
            col_a[r] = a.e_xi[r * n + q];
            col_b[r] = b.e_xi[r * n + q];
        }
        parts.xi += bilinear(&block.w, &col_a, &col_b);
    }
    parts.total = parts.xbar + certs.gamma1 * parts.psi + certs.gamma2 * parts.xi + certs.gamma3 * parts.x;
    parts
}

/// `V = V_x̄ + γ1 V_ψ + γ2 V_ξ + γ3 V_x` at step `alpha`.
pub fn lyapunov_value(certs: &CertificateSet, instance: &Instance, errors: &ErrorDecomposition, alpha: f64) -> LyapunovParts {
    lyapunov_form(certs, instance, errors, errors, alpha)
}

/// Error components of `next − prev`. The error map is affine in the state
/// with the `y*` offset cancelling, so this is `e(next) − e(prev)` computed
/// from exact state differences.
pub fn error_increment(instance: &Instance, prev: &SwarmState, next: &SwarmState) -> ErrorDecomposition {
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| q - p).collect::<Vec<f64>>();
    let delta = SwarmState {
        k: next.k,
        x: diff(&prev.x, &next.x),
        psi: diff(&prev.psi, &next.psi),
        xi: diff(&prev.xi, &next.xi),
        partials: diff(&prev.partials, &next.partials),
    };
    compute_errors(instance, &delta, &vec![0.0; instance.layout().num_coalitions()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditCheck {
    /// `V(k+1) ≤ (1 − ε) V(k)`.
    Decrease,
    /// `ΔV ≤ −(l/2)‖e_x̄‖² − (γ1/8)‖e_ψ‖² − (γ2/8)‖e_ξ‖² − (γ3/4)‖e_x‖²`.
    Combined,
    /// `ΔV_ψ ≤ −½‖e_ψ‖² + β_ψξ‖e_ξ‖² + β_ψx‖e_x‖²`.
    TrackerBound,
    /// `ΔV_x̄ ≤ −l‖e_x̄‖² + β_x̄ψ‖e_ψ‖² + β_x̄ξ‖e_ξ‖² + α max b1 · S`.
    AverageBound,
    /// `ΔV_ξ ≤ −½‖e_ξ‖² + β_ξx‖e_x‖² + α² max b2 · S`.
    EstimatorBound,
    /// `ΔV_x ≤ −½‖e_x‖² + α² max b3 · S`.
    ConsensusBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditViolation {
    /// The step `k → k+1`.
    pub k: usize,
    pub check: AuditCheck,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ViolationCounts {
    pub decrease: usize,
    pub combined: usize,
    pub tracker: usize,
    pub average: usize,
    pub estimator: usize,
    pub consensus: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.decrease + self.combined + self.tracker + self.average + self.estimator + self.consensus
    }

    fn bump(&mut self, check: AuditCheck) {
        let slot = match check {
            AuditCheck::Decrease => &mut self.decrease,
            AuditCheck::Combined => &mut self.combined,
            AuditCheck::TrackerBound => &mut self.tracker,
            AuditCheck::AverageBound => &mut self.average,
            AuditCheck::EstimatorBound => &mut self.estimator,
            AuditCheck::ConsensusBound => &mut self.consensus,
        };
        *slot += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub alpha: f64,
    pub epsilon: f64,
    pub steps_checked: usize,
    /// First iteration whose errors were at the floating-point floor.
    pub floor_reached_at: Option<usize>,
    pub violations: ViolationCounts,
    pub first_violation: Option<AuditViolation>,
    /// Largest observed `V(k+1) / V(k)`, as `1 + ΔV / V`.
    pub max_ratio: f64,
    /// `V(k)` for every snapshot.
    pub values: Vec<f64>,
}

impl AuditReport {
    pub fn passes(&self) -> bool {
        self.violations.total() == 0
    }
}

/// Streams consecutive states through the Lyapunov inequalities.
#[derive(Debug)]
pub struct LyapunovAuditor<'a> {
    instance: &'a Instance,
    certs: &'a CertificateSet,
    y_star: &'a [f64],
    alpha: f64,
    epsilon: f64,
    floor: f64,
}

struct Measured {
    errors: ErrorDecomposition,
    parts: LyapunovParts,
    sq: [f64; 4],
}

impl<'a> LyapunovAuditor<'a> {
    /// `scale` sets the floating-point floor (typically `max(1, ‖x*‖∞, ‖ψ(0)‖∞)`).
    pub fn new(instance: &'a Instance, certs: &'a CertificateSet, y_star: &'a [f64], alpha: f64, scale: f64) -> Result<Self, AnalysisError> {
        if y_star.len() != instance.layout().num_coalitions() {
            return Err(AnalysisError::Dimension { expected: instance.layout().num_coalitions(), got: y_star.len() });
        }
        Ok(Self { instance, certs, y_star, alpha, epsilon: certs.epsilon_for(alpha), floor: AUDIT_FLOOR_REL * scale.max(1.0) })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn measure(&self, state: &SwarmState) -> Measured {
        let errors = compute_errors(self.instance, state, self.y_star);
        let parts = lyapunov_value(self.certs, self.instance, &errors, self.alpha);
        let sq = [norm_sq(&errors.e_xbar), norm_sq(&errors.e_psi), norm_sq(&errors.e_xi), norm_sq(&errors.e_x)];
        Measured { errors, parts, sq }
    }

    pub fn value(&self, state: &SwarmState) -> f64 {
        self.measure(state).parts.total
    }

    /// Whether the state's errors are at the floating-point floor.
    pub fn at_floor(&self, state: &SwarmState) -> bool {
        let n = self.measure(state).errors.norms();
        n.x.max(n.psi).max(n.xi).max(n.xbar) <= self.floor
    }

    /// All inequalities for the step `prev → next`; returns the violations.
    pub fn check_step(&self, prev: &SwarmState, next: &SwarmState) -> Vec<AuditViolation> {
        let a = self.measure(prev);
        let b = self.measure(next);
        let delta = self.increment(prev, next, &a, &b);
        self.check_measured(prev.k, &a, &delta)
    }

    /// `V(next) − V(prev)` per part, from the exact state increment rather
    /// than by subtracting two large values.
    fn increment(&self, prev: &SwarmState, next: &SwarmState, a: &Measured, b: &Measured) -> LyapunovParts {
        let d = error_increment(self.instance, prev, next);
        lyapunov_form(self.certs, self.instance, &d, &a.errors.plus(&b.errors), self.alpha)
    }

    fn check_measured(&self, k: usize, a: &Measured, delta: &LyapunovParts) -> Vec<AuditViolation> {
        let c = self.certs;
        let l = c.monotonicity.value;
        let n_coal = self.instance.layout().num_coalitions() as f64;
        let [xbar2, psi2, xi2, x2] = a.sq;
        let s = psi2 + xi2 + n_coal * xbar2;
        let max_of = |f: fn(&CoalitionCertificate) -> f64| c.coalitions.iter().map(f).fold(0.0, f64::max);
        let alpha = self.alpha;

        let mut out = Vec::new();
        let mut test = |check: AuditCheck, lhs: f64, rhs_terms: &[f64]| {
            let rhs: f64 = rhs_terms.iter().sum();
            let magnitude = lhs.abs() + rhs_terms.iter().map(|t| t.abs()).sum::<f64>();
            if lhs > rhs + AUDIT_REL_SLACK * magnitude {
                out.push(AuditViolation { k, check, lhs, rhs });
            }
        };
        let d = delta;
        test(AuditCheck::Decrease, d.total, &[-self.epsilon * a.parts.total]);
        test(
            AuditCheck::Combined,
            d.total,
            &[-l / 2.0 * xbar2, -c.gamma1 / 8.0 * psi2, -c.gamma2 / 8.0 * xi2, -c.gamma3 / 4.0 * x2],
        );
        test(AuditCheck::TrackerBound, d.psi, &[-0.5 * psi2, c.beta_psi_xi * xi2, c.beta_psi_x * x2]);
        test(
            AuditCheck::AverageBound,
            d.xbar,
            &[-l * xbar2, c.beta_xbar_psi * psi2, c.beta_xbar_xi * xi2, alpha * max_of(|c| c.b1) * s],
        );
        test(AuditCheck::EstimatorBound, d.xi, &[-0.5 * xi2, c.beta_xi_x * x2, alpha * alpha * max_of(|c| c.b2) * s]);
        test(AuditCheck::ConsensusBound, d.x, &[-0.5 * x2, alpha * alpha * max_of(|c| c.b3) * s]);
        out
    }
}

/// Audits every consecutive pair of snapshots in `log` until the errors
/// reach the floating-point floor.
pub fn lyapunov_audit(instance: &Instance, certs: &CertificateSet, y_star: &[f64], log: &TrajectoryLog) -> Result<AuditReport, AnalysisError> {
    let snaps = &log.snapshots;
    if snaps.len() < 2 || snaps.windows(2).any(|w| w[1].k != w[0].k + 1) {
        return Err(AnalysisError::MissingSnapshots);
    }
    let x_star = instance.layout().expand(y_star);
    let scale = x_star
        .iter()
        .chain(&snaps[0].psi)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let auditor = LyapunovAuditor::new(instance, certs, y_star, log.alpha, scale)?;
    let mut report = AuditReport {
        alpha: log.alpha,
        epsilon: auditor.epsilon,
        steps_checked: 0,
        floor_reached_at: None,
        violations: ViolationCounts::default(),
        first_violation: None,
        max_ratio: 0.0,
        values: Vec::with_capacity(snaps.len()),
    };
    let mut prev = auditor.measure(&snaps[0]);
    report.values.push(prev.parts.total);
    for pair in snaps.windows(2) {
        let next = auditor.measure(&pair[1]);
        report.values.push(next.parts.total);
        if report.floor_reached_at.is_none() {
            let n = prev.errors.norms();
            if n.x.max(n.psi).max(n.xi).max(n.xbar) <= auditor.floor {
                report.floor_reached_at = Some(pair[0].k);
            }
        }
        if report.floor_reached_at.is_none() {
            let delta = auditor.increment(&pair[0], &pair[1], &prev, &next);
            if prev.parts.total > 0.0 {
                report.max_ratio = report.max_ratio.max(1.0 + delta.total / prev.parts.total);
            }
            for v in auditor.check_measured(pair[0].k, &prev, &delta) {
                report.violations.bump(v.check);
                if report.first_violation.is_none() {
                    report.first_violation = Some(v);
                }
            }
            report.steps_checked += 1;
        }
        prev = next;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// `exp(slope)` of the tail fit of `ln e(k)`.
    pub rho: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Whether the series hit the floor and was truncated.
    pub truncated_at_floor: bool,
}

/// Minimum iteration span for a rate fit.
pub const RATE_MIN_SPAN: usize = 50;

/// Least-squares fit of `ln e(k)` on the tail half of the series, after
/// dropping everything from the first point at or below `floor`.
pub fn estimate_linear_rate(series: &[(usize, f64)], floor: f64) -> Result<RateFit, AnalysisError> {
    let cut = series.iter().position(|&(_, e)| !(e > floor)).unwrap_or(series.len());
    let usable = &series[..cut];
    let span = match (usable.first(), usable.last()) {
        (Some(a), Some(b)) => b.0 - a.0,
        _ => 0,
    };
    if span < RATE_MIN_SPAN {
        return Err(AnalysisError::RateTooShort { needed: RATE_MIN_SPAN, got: span });
    }
    let mid = usable[0].0 + span / 2;
    let tail: Vec<(f64, f64)> = usable.iter().filter(|p| p.0 >= mid).map(|&(k, e)| (k as f64, e.ln())).collect();
    let n = tail.len() as f64;
    let mk = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let me = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mk).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mk) * (p.1 - me)).sum();
    let syy: f64 = tail.iter().map(|p| (p.1 - me).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { rho: slope.exp(), slope, r_squared, points: tail.len(), truncated_at_floor: cut < series.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameSpec;
    use crate::topology::{CoalitionLayout, DirectedGameGraph};
    use approx::assert_relative_eq;

    fn two_agents() -> DirectedGameGraph {
        DirectedGameGraph::parse(CoalitionLayout::new(vec![2]).unwrap(), &["1.1 -> 1.2", "1.2 -> 1.1"]).unwrap()
    }

    #[test]
    fn two_agent_estimator_matrix() {
        let g = two_agents();
        let em = build_estimator_matrices(&g).unwrap();
        // rows (a, q): agent 1 is anchored on coordinate 2 and vice versa
        assert_eq!(em.anchors, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(em.gamma, vec![1.0, 0.5, 0.5, 1.0]);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        );
        assert_relative_eq!(em.m, expected, epsilon = 1e-15);
        let radius = linalg::spectral_radius(&em.m);
        assert_relative_eq!(radius, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn blocks_match_full_matrix() {
        let g = DirectedGameGraph::parse(
            CoalitionLayout::new(vec![2, 1]).unwrap(),
            &["1.1 -> 1.2", "1.2 -> 1.1", "1.2 -> 2.1", "2.1 -> 1.1"],
        )
        .unwrap();
        let full = build_estimator_matrices(&g).unwrap();
        let blocks = estimator_blocks(&g).unwrap();
        let n = 3;
        for (q, b) in blocks.iter().enumerate() {
            for a in 0..n {
                for c in 0..n {
                    assert_eq!(full.m[(a * n + q, c * n + q)], b[(a, c)]);
                }
            }
        }
        let cert = certify_estimator(&g).unwrap();
        assert_relative_eq!(cert.spectral_radius, linalg::spectral_radius(&full.m), epsilon = 1e-12);
        let (_, sol) = linalg::schur_and_lyapunov(&full.m).unwrap();
        assert_relative_eq!(cert.w_norm, linalg::spectral_norm(&sol.w), max_relative = 1e-9);
    }

    #[test]
    fn consensual_coalition_has_zero_x_error() {
        let g = two_agents();
        let game = GameSpec::quadratic(g.layout().clone(), &[(1.0, 1.0, 0.0); 2]).unwrap();
        let inst = Instance::with_uniform_weights(game, g).unwrap();
        let state = SwarmState { k: 0, x: vec![2.5, 2.5], psi: vec![1.0; 4], xi: vec![2.5; 4], partials: vec![1.0; 4] };
        let e = compute_errors(&inst, &state, &[1.0]);
        assert_eq!(e.e_x, vec![0.0, 0.0]);
        assert_eq!(e.e_xbar, vec![1.5]);
    }

    #[test]
    fn uniform_two_agent_cbar_vanishes() {
        let g = two_agents();
        let game = GameSpec::quadratic(g.layout().clone(), &[(1.0, 1.0, 0.0); 2]).unwrap();
        let inst = Instance::with_uniform_weights(game, g).unwrap();
        let certs = safe_step_size(&inst).unwrap();
        let c = &certs.coalitions[0];
        assert!(c.c_bar.spectral_radius < 1e-12);
        assert_relative_eq!(c.c_bar.w, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(certs.alpha > 0.0 && certs.alpha <= 1.0);
        assert!(certs.epsilon > 0.0);
    }

    #[test]
    fn geometric_sequence_rate() {
        let series: Vec<(usize, f64)> = (0..200).map(|k| (k, 3.0 * 0.9f64.powi(k as i32))).collect();
        let fit = estimate_linear_rate(&series, 0.0).unwrap();
        assert_relative_eq!(fit.rho, 0.9, epsilon = 1e-6);
        assert!(fit.r_squared > 0.999_999);
        assert!(!fit.truncated_at_floor);
    }

    #[test]
    fn rate_needs_span_above_floor() {
        let series: Vec<(usize, f64)> = (0..200).map(|k| (k, 0.5f64.powi(k as i32))).collect();
        let err = estimate_linear_rate(&series, 1e-6).unwrap_err();
        assert!(matches!(err, AnalysisError::RateTooShort { .. }));
    }
}
