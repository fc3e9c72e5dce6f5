//! The synchronous distributed iteration.
//!
//! Each agent `ij` keeps its action `x_ij`, a tracker `ψ_ij ∈ ℝ^{n_i}` of its
//! coalition's partial derivatives and an estimate `ξ_ij ∈ ℝ^{n_sum}` of the
//! joint state. One round updates, in this order,
//!
//! - `x_i ← R_i x_i − (α/n_i) (I ⊗ 1ᵀ) ψ_i`,
//! - `ξ ← ξ − Γ (L ⊗ I + A_d)(ξ − 1 ⊗ x)` (using the old `x`),
//! - `ψ_i ← (C_i ⊗ I) ψ_i + P_i(ξ_i(k+1)) − P_i(ξ_i(k))`,
//!
//! where `P_ij(ξ)` are agent `ij`'s partials with respect to its coalition's
//! block. Every per-agent quantity is a pure function of the previous round,
//! so the round may be evaluated in parallel without changing a single bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, CertificateSet};
use crate::exec::{self, Execution};
use crate::game::{GameError, GameSpec};
use crate::topology::{CoalitionLayout, DirectedGameGraph, IntraCoalitionWeights, TopologyError};
use crate::trajectory::{Divergence, TrajectoryLog, TrajectoryRow, Verdict};

/// States with `‖x‖∞` above this are treated as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SeekerError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{mode} mode requires {requirement}")]
    Mode { mode: &'static str, requirement: &'static str },
    #[error("game, graph and weights disagree on the coalition layout")]
    LayoutMismatch,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("automatic step size: {0}")]
    Analysis(#[from] AnalysisError),
}

/// A validated game, graph and weight set sharing one layout.
#[derive(Clone, Debug)]
pub struct Instance {
    game: GameSpec,
    graph: DirectedGameGraph,
    weights: IntraCoalitionWeights,
}

impl Instance {
    pub fn new(game: GameSpec, graph: DirectedGameGraph, weights: IntraCoalitionWeights) -> Result<Self, SeekerError> {
        if game.layout() != graph.layout() || weights.num_coalitions() != graph.layout().num_coalitions() {
            return Err(SeekerError::LayoutMismatch);
        }
        for (i, w) in weights.coalitions().iter().enumerate() {
            if w.pull.nrows() != graph.layout().size(i) {
                return Err(SeekerError::LayoutMismatch);
            }
        }
        graph.validate()?;
        Ok(Self { game, graph, weights })
    }

    /// Uniform weights on `graph`.
    pub fn with_uniform_weights(game: GameSpec, graph: DirectedGameGraph) -> Result<Self, SeekerError> {
        let weights = IntraCoalitionWeights::uniform(&graph)?;
        Self::new(game, graph, weights)
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn graph(&self) -> &DirectedGameGraph {
        &self.graph
    }

    pub fn weights(&self) -> &IntraCoalitionWeights {
        &self.weights
    }

    pub fn layout(&self) -> &CoalitionLayout {
        self.graph.layout()
    }
}

/// All agent variables at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub k: usize,
    /// `x_ij` in flat order.
    pub x: Vec<f64>,
    /// Trackers, agent-major; agent `a` owns `layout.psi_offset(a)..+n_i`.
    pub psi: Vec<f64>,
    /// Estimates, agent-major; row `a` is `ξ_a ∈ ℝ^{n_sum}`.
    pub xi: Vec<f64>,
    /// `P_a(ξ_a(k))`, same layout as `psi`.
    pub partials: Vec<f64>,
}

impl SwarmState {
    fn zeros(layout: &CoalitionLayout) -> Self {
        let n = layout.total();
        Self {
            k: 0,
            x: vec![0.0; n],
            psi: vec![0.0; layout.psi_len()],
            xi: vec![0.0; n * n],
            partials: vec![0.0; layout.psi_len()],
        }
    }

    pub fn psi_block(&self, layout: &CoalitionLayout, agent: usize) -> &[f64] {
        let off = layout.psi_offset(agent);
        &self.psi[off..off + layout.size(layout.coalition_of(agent))]
    }

    pub fn partials_block(&self, layout: &CoalitionLayout, agent: usize) -> &[f64] {
        let off = layout.psi_offset(agent);
        &self.partials[off..off + layout.size(layout.coalition_of(agent))]
    }

    pub fn xi_row(&self, agent: usize) -> &[f64] {
        let n = self.x.len();
        &self.xi[agent * n..(agent + 1) * n]
    }

    /// `max_i (max_j x_ij − min_j x_ij)`.
    pub fn spread(&self, layout: &CoalitionLayout) -> f64 {
        coalition_spread(layout, &self.x)
    }
}

/// `max_i (max_j x_ij − min_j x_ij)`.
pub fn coalition_spread(layout: &CoalitionLayout, x: &[f64]) -> f64 {
    (0..layout.num_coalitions()).map(|i| block_spread(&x[layout.range(i)])).fold(0.0, f64::max)
}

/// `max − min` of a non-empty block.
pub fn block_spread(block: &[f64]) -> f64 {
    let hi = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = block.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// Certified bound from [`analysis::safe_step_size`].
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    General,
    /// Every coalition is a single agent.
    SingleAgentCoalitions,
    /// One coalition; a consensus-constrained optimization problem.
    SingleCoalition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeekerConfig {
    pub alpha: StepSize,
    pub max_iterations: usize,
    /// Stop once `‖x(k) − x(k−1)‖∞ ≤ tol·α` and the coalition spread is `≤ tol`.
    pub stop_tolerance: f64,
    /// Additionally require `‖x(k) − x*‖∞ ≤` this, when a reference is given.
    pub oracle_tolerance: Option<f64>,
    pub mode: Mode,
    pub execution: Execution,
    /// Record every `record_every`-th iteration (the final one always).
    pub record_every: usize,
    /// Keep full states for every iteration (needed by the Lyapunov audit).
    pub keep_snapshots: bool,
}

impl Default for SeekerConfig {
    fn default() -> Self {
        Self {
            alpha: StepSize::Fixed(0.02),
            max_iterations: 100_000,
            stop_tolerance: 1e-10,
            oracle_tolerance: None,
            mode: Mode::General,
            execution: Execution::Auto,
            record_every: 1,
            keep_snapshots: false,
        }
    }
}

impl SeekerConfig {
    pub fn validate(&self) -> Result<(), SeekerError> {
        if let StepSize::Fixed(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(SeekerError::InvalidAlpha(a));
            }
        }
        if self.max_iterations == 0 {
            return Err(SeekerError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(SeekerError::InvalidConfig("stop_tolerance must be non-negative".into()));
        }
        if self.record_every == 0 {
            return Err(SeekerError::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// How the initial estimates `ξ_ij(0)` are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialEstimate {
    /// Every agent starts from the true `x(0)`.
    ExpandX0,
    Zeros,
    /// `n_sum²` values, agent-major.
    Explicit(Vec<f64>),
    /// Uniform in `[low, high)` from a seeded generator.
    Random { seed: u64, low: f64, high: f64 },
}

impl InitialEstimate {
    pub fn resolve(&self, x0: &[f64]) -> Result<Vec<f64>, SeekerError> {
        let n = x0.len();
        match self {
            InitialEstimate::ExpandX0 => Ok(x0.repeat(n)),
            InitialEstimate::Zeros => Ok(vec![0.0; n * n]),
            InitialEstimate::Explicit(v) => {
                if v.len() != n * n {
                    return Err(SeekerError::Dimension { what: "initial estimates", expected: n * n, got: v.len() });
                }
                Ok(v.clone())
            }
            InitialEstimate::Random { seed, low, high } => {
                if !(low < high) {
                    return Err(SeekerError::InvalidConfig(format!("empty random range [{low}, {high})")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..n * n).map(|_| rng.random_range(*low..*high)).collect())
            }
        }
    }
}

/// Reference data attached to recorded rows.
#[derive(Clone, Copy, Debug, Default)]
pub struct Reference<'a> {
    pub y_star: Option<&'a [f64]>,
    /// With `y_star`, adds the Lyapunov value to each row.
    pub certificates: Option<&'a CertificateSet>,
}

/// Why a round produced an unusable state.
#[derive(Clone, Debug, PartialEq)]
pub enum StepFault {
    NonFinite,
    Unbounded(f64),
}

impl StepFault {
    fn describe(&self) -> String {
        match self {
            StepFault::NonFinite => "non-finite value in the state".into(),
            StepFault::Unbounded(v) => format!("‖x‖∞ = {v:e} exceeds {DIVERGENCE_BOUND:e}"),
        }
    }
}

fn check_state(state: &SwarmState) -> Result<(), StepFault> {
    let all = state.x.iter().chain(&state.psi).chain(&state.xi);
    if all.clone().any(|v| !v.is_finite()) {
        return Err(StepFault::NonFinite);
    }
    let top = state.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top > DIVERGENCE_BOUND {
        return Err(StepFault::Unbounded(top));
    }
    Ok(())
}

/// One synchronous round engine.
pub trait RoundEngine: Sync {
    fn instance(&self) -> &Instance;
    fn alpha(&self) -> f64;
    fn initialize(&self, x0: &[f64], xi0: &[f64]) -> Result<SwarmState, SeekerError>;
    /// Writes round `cur.k + 1` into `next`.
    fn step_into(&self, cur: &SwarmState, next: &mut SwarmState) -> Result<(), StepFault>;

    fn step(&self, cur: &SwarmState) -> Result<SwarmState, StepFault> {
        let mut next = cur.clone();
        self.step_into(cur, &mut next)?;
        Ok(next)
    }
}

fn check_initial(layout: &CoalitionLayout, x0: &[f64], xi0: &[f64]) -> Result<(), SeekerError> {
    let n = layout.total();
    if x0.len() != n {
        return Err(SeekerError::Dimension { what: "x0", expected: n, got: x0.len() });
    }
    if xi0.len() != n * n {
        return Err(SeekerError::Dimension { what: "xi0", expected: n * n, got: xi0.len() });
    }
    Ok(())
}

/// `ξ_a(k+1)` from `ξ(k)` and `x(k)`: leader-following consensus in which
/// agent `a` is anchored to the true `x_q` exactly when `q` is one of its
/// in-neighbors. The self-estimate has no anchor.
#[inline]
pub(crate) fn estimator_row(
    graph: &DirectedGameGraph,
    agent: usize,
    xi: &[f64],
    x: &[f64],
    out: &mut [f64],
) {
    let n = x.len();
    let row = &xi[agent * n..(agent + 1) * n];
    let neighbors = graph.in_neighbors(agent);
    let degree = neighbors.len();
    for q in 0..n {
        let own = row[q];
        let mut acc = 0.0;
        for &l in neighbors {
            acc += own - xi[l * n + q];
        }
        let anchored = graph.adjacent(agent, q);
        if anchored {
            acc += own - x[q];
        }
        out[q] = own - acc / (degree + anchored as usize) as f64;
    }
}

/// Splits `buf` into consecutive per-agent blocks of length `n_i`.
fn agent_blocks<'b>(layout: &CoalitionLayout, mut buf: &'b mut [f64]) -> Vec<&'b mut [f64]> {
    let mut blocks = Vec::with_capacity(layout.total());
    for i in 0..layout.num_coalitions() {
        let n = layout.size(i);
        for _ in 0..n {
            let (head, tail) = std::mem::take(&mut buf).split_at_mut(n);
            blocks.push(head);
            buf = tail;
        }
    }
    blocks
}

/// Weighted sum `Σ w·v` starting from the first term (no `0.0 +` prefix, so a
/// single unit weight reproduces its operand bit for bit).
#[inline]
fn weighted_sum(terms: &[(usize, f64)], value: impl Fn(usize) -> f64) -> f64 {
    let (&(m0, w0), rest) = terms.split_first().expect("weights include the self-term");
    let mut acc = w0 * value(m0);
    for &(m, w) in rest {
        acc += w * value(m);
    }
    acc
}

#[inline]
fn plain_sum(v: &[f64]) -> f64 {
    let (first, rest) = v.split_first().expect("non-empty block");
    rest.iter().fold(*first, |a, b| a + b)
}

#[derive(Clone, Debug)]
struct AgentPlan {
    coalition_size: usize,
    /// `(flat sender, r)` over the nonzeros of the agent's row of `R_i`.
    pull: Vec<(usize, f64)>,
    /// `(psi offset of sender, c)` over the nonzeros of the agent's row of `C_i`.
    push: Vec<(usize, f64)>,
}

fn agent_plans(instance: &Instance) -> Vec<AgentPlan> {
    let layout = instance.layout();
    let mut plans = Vec::with_capacity(layout.total());
    for i in 0..layout.num_coalitions() {
        let range = layout.range(i);
        let cw = instance.weights().coalition(i);
        for j in 0..range.len() {
            let support = |m: &DMatrixRef| -> Vec<(usize, f64)> {
                (0..range.len()).filter(|&c| m[(j, c)] != 0.0).map(|c| (c, m[(j, c)])).collect()
            };
            let pull = support(&cw.pull).into_iter().map(|(c, w)| (range.start + c, w)).collect();
            let push = support(&cw.push)
                .into_iter()
                .map(|(c, w)| (layout.psi_offset(range.start + c), w))
                .collect();
            plans.push(AgentPlan { coalition_size: range.len(), pull, push });
        }
    }
    plans
}

type DMatrixRef = nalgebra::DMatrix<f64>;

/// The general engine.
#[derive(Debug)]
pub struct Seeker<'a> {
    instance: &'a Instance,
    alpha: f64,
    execution: Execution,
    plans: Vec<AgentPlan>,
}

impl<'a> Seeker<'a> {
    pub fn new(instance: &'a Instance, alpha: f64, execution: Execution) -> Result<Self, SeekerError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(SeekerError::InvalidAlpha(alpha));
        }
        Ok(Self { instance, alpha, execution, plans: agent_plans(instance) })
    }
}

impl RoundEngine for Seeker<'_> {
    fn instance(&self) -> &Instance {
        self.instance
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn initialize(&self, x0: &[f64], xi0: &[f64]) -> Result<SwarmState, SeekerError> {
        let layout = self.instance.layout();
        check_initial(layout, x0, xi0)?;
        let mut state = SwarmState::zeros(layout);
        state.x.copy_from_slice(x0);
        state.xi.copy_from_slice(xi0);
        let n = layout.total();
        let game = self.instance.game();
        let xi = &state.xi;
        exec::for_each_mut(self.execution, &mut agent_blocks(layout, &mut state.partials), |a, block| {
            game.agent_partials_into(a, &xi[a * n..(a + 1) * n], block);
        });
        state.psi.copy_from_slice(&state.partials);
        Ok(state)
    }

    fn step_into(&self, cur: &SwarmState, next: &mut SwarmState) -> Result<(), StepFault> {
        let layout = self.instance.layout();
        let graph = self.instance.graph();
        let game = self.instance.game();
        let n = layout.total();
        let alpha = self.alpha;
        let plans = &self.plans;

        exec::for_each_mut(self.execution, &mut next.x, |a, out| {
            let plan = &plans[a];
            let pulled = weighted_sum(&plan.pull, |m| cur.x[m]);
            let tracked = plain_sum(cur.psi_block(layout, a));
            *out = pulled - (alpha / plan.coalition_size as f64) * tracked;
        });

        exec::for_each_chunk_mut(self.execution, &mut next.xi, n, |a, row| {
            estimator_row(graph, a, &cur.xi, &cur.x, row);
        });

        let new_xi = &next.xi;
        exec::for_each_mut(self.execution, &mut agent_blocks(layout, &mut next.partials), |a, block| {
            game.agent_partials_into(a, &new_xi[a * n..(a + 1) * n], block);
        });

        let new_partials = &next.partials;
        exec::for_each_mut(self.execution, &mut agent_blocks(layout, &mut next.psi), |a, block| {
            let plan = &plans[a];
            let off = layout.psi_offset(a);
            for (l, out) in block.iter_mut().enumerate() {
                let mixed = weighted_sum(&plan.push, |m_off| cur.psi[m_off + l]);
                *out = (mixed + new_partials[off + l]) - cur.partials[off + l];
            }
        });

        next.k = cur.k + 1;
        check_state(next)
    }
}

/// Engine for layouts in which every coalition is one agent:
/// `x_i ← x_i − α ψ_i^i`, `ψ_i^i ← ψ_i^i + ∂f_i/∂x_i(ξ_i(k+1)) − ∂f_i/∂x_i(ξ_i(k))`.
#[derive(Debug)]
pub struct SingleAgentSeeker<'a> {
    instance: &'a Instance,
    alpha: f64,
}

impl<'a> SingleAgentSeeker<'a> {
    pub fn new(instance: &'a Instance, alpha: f64) -> Result<Self, SeekerError> {
        if instance.layout().sizes().iter().any(|&n| n != 1) {
            return Err(SeekerError::Mode { mode: "single-agent", requirement: "every coalition to have exactly one agent" });
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(SeekerError::InvalidAlpha(alpha));
        }
        Ok(Self { instance, alpha })
    }

    fn own_partial(&self, agent: usize, xi_row: &[f64]) -> f64 {
        let mut out = [0.0];
        self.instance.game().cost(agent).block_gradient(xi_row, agent..agent + 1, &mut out);
        out[0]
    }
}

impl RoundEngine for SingleAgentSeeker<'_> {
    fn instance(&self) -> &Instance {
        self.instance
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn initialize(&self, x0: &[f64], xi0: &[f64]) -> Result<SwarmState, SeekerError> {
        let layout = self.instance.layout();
        check_initial(layout, x0, xi0)?;
        let n = layout.total();
        let partials: Vec<f64> = (0..n).map(|i| self.own_partial(i, &xi0[i * n..(i + 1) * n])).collect();
        Ok(SwarmState { k: 0, x: x0.to_vec(), psi: partials.clone(), xi: xi0.to_vec(), partials })
    }

    fn step_into(&self, cur: &SwarmState, next: &mut SwarmState) -> Result<(), StepFault> {
        let n = cur.x.len();
        let graph = self.instance.graph();
        for i in 0..n {
            next.x[i] = cur.x[i] - self.alpha * cur.psi[i];
        }
        for i in 0..n {
            estimator_row(graph, i, &cur.xi, &cur.x, &mut next.xi[i * n..(i + 1) * n]);
        }
        for i in 0..n {
            let fresh = self.own_partial(i, &next.xi[i * n..(i + 1) * n]);
            next.psi[i] = (cur.psi[i] + fresh) - cur.partials[i];
            next.partials[i] = fresh;
        }
        next.k = cur.k + 1;
        check_state(next)
    }
}

/// Engine for a single coalition of `n` agents (distributed optimization of
/// `Σ_i f_i` under consensus).
#[derive(Debug)]
pub struct SingleCoalitionSeeker<'a> {
    instance: &'a Instance,
    alpha: f64,
    /// Per agent, the nonzeros of its `R` and `C` rows.
    pull: Vec<Vec<(usize, f64)>>,
    push: Vec<Vec<(usize, f64)>>,
}

impl<'a> SingleCoalitionSeeker<'a> {
    pub fn new(instance: &'a Instance, alpha: f64) -> Result<Self, SeekerError> {
        if instance.layout().num_coalitions() != 1 {
            return Err(SeekerError::Mode { mode: "single-coalition", requirement: "exactly one coalition" });
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(SeekerError::InvalidAlpha(alpha));
        }
        let w = instance.weights().coalition(0);
        let n = instance.layout().total();
        let rows = |m: &DMatrixRef| -> Vec<Vec<(usize, f64)>> {
            (0..n).map(|i| (0..n).filter(|&c| m[(i, c)] != 0.0).map(|c| (c, m[(i, c)])).collect()).collect()
        };
        Ok(Self { instance, alpha, pull: rows(&w.pull), push: rows(&w.push) })
    }
}

impl RoundEngine for SingleCoalitionSeeker<'_> {
    fn instance(&self) -> &Instance {
        self.instance
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn initialize(&self, x0: &[f64], xi0: &[f64]) -> Result<SwarmState, SeekerError> {
        let layout = self.instance.layout();
        check_initial(layout, x0, xi0)?;
        let n = layout.total();
        let mut partials = vec![0.0; n * n];
        for i in 0..n {
            self.instance.game().cost(i).block_gradient(&xi0[i * n..(i + 1) * n], 0..n, &mut partials[i * n..(i + 1) * n]);
        }
        Ok(SwarmState { k: 0, x: x0.to_vec(), psi: partials.clone(), xi: xi0.to_vec(), partials })
    }

    fn step_into(&self, cur: &SwarmState, next: &mut SwarmState) -> Result<(), StepFault> {
        let n = cur.x.len();
        let graph = self.instance.graph();
        let scale = self.alpha / n as f64;
        for i in 0..n {
            let pulled = weighted_sum(&self.pull[i], |m| cur.x[m]);
            let tracked = plain_sum(&cur.psi[i * n..(i + 1) * n]);
            next.x[i] = pulled - scale * tracked;
        }
        for i in 0..n {
            estimator_row(graph, i, &cur.xi, &cur.x, &mut next.xi[i * n..(i + 1) * n]);
        }
        for i in 0..n {
            let (xi_rows, part_rows) = (&next.xi, &mut next.partials);
            self.instance.game().cost(i).block_gradient(&xi_rows[i * n..(i + 1) * n], 0..n, &mut part_rows[i * n..(i + 1) * n]);
            for l in 0..n {
                let mixed = weighted_sum(&self.push[i], |m| cur.psi[m * n + l]);
                next.psi[i * n + l] = (mixed + next.partials[i * n + l]) - cur.partials[i * n + l];
            }
        }
        next.k = cur.k + 1;
        check_state(next)
    }
}

fn resolve_alpha(instance: &Instance, config: &SeekerConfig) -> Result<(f64, Option<CertificateSet>), SeekerError> {
    match config.alpha {
        StepSize::Fixed(a) => Ok((a, None)),
        StepSize::Auto => {
            let certs = analysis::safe_step_size(instance)?;
            Ok((certs.alpha, Some(certs)))
        }
    }
}

/// Runs `config.mode`'s engine from `(x0, ξ0)` until the stop rule, the
/// iteration cap or divergence.
pub fn run(
    instance: &Instance,
    config: &SeekerConfig,
    x0: &[f64],
    xi0: &[f64],
    reference: Reference<'_>,
) -> Result<TrajectoryLog, SeekerError> {
    config.validate()?;
    let (alpha, auto_certs) = resolve_alpha(instance, config)?;
    let reference = Reference { certificates: reference.certificates.or(auto_certs.as_ref()), ..reference };
    match config.mode {
        Mode::General => run_engine(&Seeker::new(instance, alpha, config.execution)?, config, x0, xi0, reference),
        Mode::SingleAgentCoalitions => run_single_agent_mode(instance, config, x0, xi0, reference),
        Mode::SingleCoalition => run_single_coalition_mode(instance, config, x0, xi0, reference),
    }
}

pub fn run_single_agent_mode(
    instance: &Instance,
    config: &SeekerConfig,
    x0: &[f64],
    xi0: &[f64],
    reference: Reference<'_>,
) -> Result<TrajectoryLog, SeekerError> {
    config.validate()?;
    let (alpha, auto_certs) = resolve_alpha(instance, config)?;
    let reference = Reference { certificates: reference.certificates.or(auto_certs.as_ref()), ..reference };
    run_engine(&SingleAgentSeeker::new(instance, alpha)?, config, x0, xi0, reference)
}

pub fn run_single_coalition_mode(
    instance: &Instance,
    config: &SeekerConfig,
    x0: &[f64],
    xi0: &[f64],
    reference: Reference<'_>,
) -> Result<TrajectoryLog, SeekerError> {
    config.validate()?;
    let (alpha, auto_certs) = resolve_alpha(instance, config)?;
    let reference = Reference { certificates: reference.certificates.or(auto_certs.as_ref()), ..reference };
    run_engine(&SingleCoalitionSeeker::new(instance, alpha)?, config, x0, xi0, reference)
}

fn make_row(instance: &Instance, state: &SwarmState, alpha: f64, reference: &Reference<'_>) -> TrajectoryRow {
    let mut row = TrajectoryRow { k: state.k, x: state.x.clone(), errors: None, lyapunov: None };
    if let Some(y_star) = reference.y_star {
        let errors = analysis::compute_errors(instance, state, y_star);
        row.errors = Some(errors.norms());
        if let Some(certs) = reference.certificates {
            row.lyapunov = Some(analysis::lyapunov_value(certs, instance, &errors, alpha).total);
        }
    }
    row
}

/// Drives any [`RoundEngine`] with the shared stop rule and recorder.
pub fn run_engine<E: RoundEngine>(
    engine: &E,
    config: &SeekerConfig,
    x0: &[f64],
    xi0: &[f64],
    reference: Reference<'_>,
) -> Result<TrajectoryLog, SeekerError> {
    config.validate()?;
    let instance = engine.instance();
    let layout = instance.layout();
    let alpha = engine.alpha();
    if let Some(y) = reference.y_star {
        if y.len() != layout.num_coalitions() {
            return Err(SeekerError::Dimension { what: "reference y*", expected: layout.num_coalitions(), got: y.len() });
        }
    }
    let x_star = reference.y_star.map(|y| layout.expand(y));

    let mut cur = engine.initialize(x0, xi0)?;
    let mut next = cur.clone();
    let mut rows = vec![make_row(instance, &cur, alpha, &reference)];
    let mut snapshots = Vec::new();
    if config.keep_snapshots {
        snapshots.push(cur.clone());
    }
    let mut verdict = Verdict::MaxIterations;
    let mut divergence = None;

    if let Err(fault) = check_state(&cur) {
        divergence = Some(Divergence { k: 0, reason: fault.describe() });
        verdict = Verdict::Diverged;
    } else {
        for _ in 0..config.max_iterations {
            if let Err(fault) = engine.step_into(&cur, &mut next) {
                divergence = Some(Divergence { k: next.k, reason: fault.describe() });
                verdict = Verdict::Diverged;
                break;
            }
            let dx = next.x.iter().zip(&cur.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut cur, &mut next);
            if config.keep_snapshots {
                snapshots.push(cur.clone());
            }
            let mut done = dx <= config.stop_tolerance * alpha && cur.spread(layout) <= config.stop_tolerance;
            if done {
                if let (Some(tol), Some(xs)) = (config.oracle_tolerance, &x_star) {
                    done = cur.x.iter().zip(xs).all(|(a, b)| (a - b).abs() <= tol);
                }
            }
            let last = done || cur.k == config.max_iterations;
            if last || cur.k % config.record_every == 0 {
                rows.push(make_row(instance, &cur, alpha, &reference));
            }
            if done {
                verdict = Verdict::Converged;
                break;
            }
        }
    }
    Ok(TrajectoryLog { rows, snapshots, final_state: cur, verdict, alpha, divergence, record_every: config.record_every })
}
