//! Coalition layouts, directed communication graphs and intra-coalition
//! push/pull weights.
//!
//! Agents are addressed either by [`AgentId`] (coalition, member) or by their
//! flat index `Σ_{k<i} n_k + j` into the stacked state vector. Edge `(s, r)`
//! means agent `r` receives information from agent `s`.

use std::collections::VecDeque;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use bitvec::prelude::*;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

/// Tolerance for the stochasticity of weight matrices.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Convergence tolerance of the stationary-vector power iteration.
pub const STATIONARY_TOL: f64 = 1e-14;
pub const STATIONARY_MAX_ITER: usize = 1_000_000;
/// Largest matrix for which the direct stationary solve is used as fallback.
pub const STATIONARY_DIRECT_MAX_DIM: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("layout needs at least one coalition")]
    EmptyLayout,
    #[error("coalition {coalition} has no agents")]
    EmptyCoalition { coalition: usize },
    #[error("layout has {total} agent(s); at least 2 are required so every agent can have an in-neighbor")]
    TooFewAgents { total: usize },
    #[error("unknown agent {agent}")]
    UnknownAgent { agent: String },
    #[error("cannot parse '{input}': {reason}")]
    Parse { input: String, reason: String },
    #[error("self-loop on agent {agent}")]
    SelfLoop { agent: AgentId },
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: AgentId, to: AgentId },
    #[error("{0}")]
    Disconnected(ConnectivityReport),
    #[error("{matrix}_{coalition} must be {expected}x{expected}, got {rows}x{cols}")]
    WeightShape { matrix: char, coalition: usize, expected: usize, rows: usize, cols: usize },
    #[error("{matrix}_{coalition}[{row},{col}] = {value}: {reason}")]
    WeightSupport { matrix: char, coalition: usize, row: usize, col: usize, value: f64, reason: &'static str },
    #[error("{what} {index} of {matrix}_{coalition} sums to {sum}, expected 1 ({kind} weights)")]
    WeightSum { matrix: char, coalition: usize, what: &'static str, index: usize, sum: f64, kind: &'static str },
    #[error("matrix is not {0}-stochastic")]
    NotStochastic(&'static str),
    #[error("stationary vector did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("stationary vector is not strictly positive (matrix reducible?)")]
    NotPositive,
}

/// Agent `member` of coalition `coalition`, both zero-based. Displayed and
/// parsed one-based as `i.j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct AgentId {
    pub coalition: usize,
    pub member: usize,
}

impl AgentId {
    pub fn new(coalition: usize, member: usize) -> Self {
        Self { coalition, member }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.coalition + 1, self.member + 1)
    }
}

impl FromStr for AgentId {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = |reason: &str| TopologyError::Parse { input: s.to_string(), reason: reason.to_string() };
        let (i, j) = s.trim().split_once('.').ok_or_else(|| parse_err("expected 'coalition.agent'"))?;
        let i: usize = i.trim().parse().map_err(|_| parse_err("coalition is not a positive integer"))?;
        let j: usize = j.trim().parse().map_err(|_| parse_err("agent is not a positive integer"))?;
        if i == 0 || j == 0 {
            return Err(parse_err("indices are 1-based"));
        }
        Ok(AgentId::new(i - 1, j - 1))
    }
}

/// Parses an edge written as `"i.j -> p.q"` (sender first).
pub fn parse_edge(s: &str) -> Result<(AgentId, AgentId), TopologyError> {
    let (from, to) = s
        .split_once("->")
        .ok_or_else(|| TopologyError::Parse { input: s.to_string(), reason: "expected 'i.j -> p.q'".into() })?;
    Ok((from.parse()?, to.parse()?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoalitionLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    psi_offsets: Vec<usize>,
}

impl CoalitionLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self, TopologyError> {
        if sizes.is_empty() {
            return Err(TopologyError::EmptyLayout);
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(TopologyError::EmptyCoalition { coalition: i + 1 });
        }
        let total: usize = sizes.iter().sum();
        if total < 2 {
            return Err(TopologyError::TooFewAgents { total });
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut psi_offsets = Vec::with_capacity(sizes.len() + 1);
        let (mut acc, mut psi_acc) = (0, 0);
        for &n in &sizes {
            offsets.push(acc);
            psi_offsets.push(psi_acc);
            acc += n;
            psi_acc += n * n;
        }
        offsets.push(acc);
        psi_offsets.push(psi_acc);
        Ok(Self { sizes, offsets, psi_offsets })
    }

    pub fn num_coalitions(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, coalition: usize) -> usize {
        self.sizes[coalition]
    }

    /// `n_sum`.
    pub fn total(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    /// Flat indices of the agents of `coalition`.
    pub fn range(&self, coalition: usize) -> Range<usize> {
        self.offsets[coalition]..self.offsets[coalition + 1]
    }

    pub fn flat_index(&self, agent: AgentId) -> Result<usize, TopologyError> {
        if agent.coalition >= self.sizes.len() || agent.member >= self.sizes[agent.coalition] {
            return Err(TopologyError::UnknownAgent { agent: agent.to_string() });
        }
        Ok(self.offsets[agent.coalition] + agent.member)
    }

    pub fn agent(&self, flat: usize) -> AgentId {
        let coalition = self.coalition_of(flat);
        AgentId::new(coalition, flat - self.offsets[coalition])
    }

    pub fn coalition_of(&self, flat: usize) -> usize {
        assert!(flat < self.total(), "agent index {flat} out of range");
        self.offsets.partition_point(|&o| o <= flat) - 1
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.total()).map(|a| self.agent(a))
    }

    /// Length of the stacked tracker vector, `Σ n_i²`.
    pub fn psi_len(&self) -> usize {
        self.psi_offsets[self.sizes.len()]
    }

    /// Offset of agent `flat`'s tracker block (length `n_i`) in the stacked
    /// tracker vector.
    pub fn psi_offset(&self, flat: usize) -> usize {
        let i = self.coalition_of(flat);
        self.psi_offsets[i] + (flat - self.offsets[i]) * self.sizes[i]
    }

    /// Range of coalition `i`'s trackers in the stacked tracker vector.
    pub fn psi_range(&self, coalition: usize) -> Range<usize> {
        self.psi_offsets[coalition]..self.psi_offsets[coalition + 1]
    }

    /// Replicates `y_i` over coalition `i`'s block.
    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.num_coalitions(), "expand: expected one value per coalition");
        self.sizes.iter().zip(y).flat_map(|(&n, &v)| std::iter::repeat_n(v, n)).collect()
    }
}

/// Which graph failed a connectivity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GraphScope {
    Global,
    Coalition(usize),
}

impl fmt::Display for GraphScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphScope::Global => write!(f, "G"),
            GraphScope::Coalition(i) => write!(f, "G_{}", i + 1),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConnectivityReport {
    pub failures: Vec<GraphScope>,
}

impl ConnectivityReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ConnectivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passes() {
            return write!(f, "connectivity: G and every coalition subgraph are strongly connected");
        }
        let names: Vec<String> = self
            .failures
            .iter()
            .map(|s| match s {
                GraphScope::Global => "graph G not strongly connected".to_string(),
                GraphScope::Coalition(_) => format!("subgraph {s} not strongly connected"),
            })
            .collect();
        write!(f, "connectivity: {}", names.join("; "))
    }
}

#[derive(Clone, Debug)]
pub struct DirectedGameGraph {
    layout: CoalitionLayout,
    /// Sorted (sender, receiver) pairs, flat indices.
    edges: Vec<(usize, usize)>,
    /// Row = receiver, column = sender.
    adjacency: BitVec,
    laplacian: Vec<i64>,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl DirectedGameGraph {
    pub fn new(layout: CoalitionLayout, edges: &[(AgentId, AgentId)]) -> Result<Self, TopologyError> {
        let flat = edges
            .iter()
            .map(|&(s, r)| Ok((layout.flat_index(s)?, layout.flat_index(r)?)))
            .collect::<Result<Vec<_>, TopologyError>>()?;
        Self::from_flat_edges(layout, &flat)
    }

    /// Builds from `"i.j -> p.q"` strings.
    pub fn parse(layout: CoalitionLayout, edges: &[impl AsRef<str>]) -> Result<Self, TopologyError> {
        let parsed = edges.iter().map(|e| parse_edge(e.as_ref())).collect::<Result<Vec<_>, _>>()?;
        Self::new(layout, &parsed)
    }

    /// Bidirectional ring inside every coalition (one edge pair when
    /// `n_i = 2`) and a bidirectional ring through the first member of each
    /// coalition. Always satisfies the connectivity requirements.
    pub fn ring_with_heads(layout: CoalitionLayout) -> Self {
        let mut edges = Vec::new();
        let mut ring = |nodes: &[usize]| {
            let n = nodes.len();
            let pairs = match n {
                0 | 1 => 0,
                2 => 1,
                _ => n,
            };
            for w in 0..pairs {
                let (a, b) = (nodes[w], nodes[(w + 1) % n]);
                edges.push((a, b));
                edges.push((b, a));
            }
        };
        for i in 0..layout.num_coalitions() {
            ring(&layout.range(i).collect::<Vec<_>>());
        }
        let heads: Vec<usize> = (0..layout.num_coalitions()).map(|i| layout.range(i).start).collect();
        ring(&heads);
        Self::from_flat_edges(layout, &edges).expect("ring edges are distinct")
    }

    pub fn from_flat_edges(layout: CoalitionLayout, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let n = layout.total();
        let mut adjacency = bitvec![0; n * n];
        let mut sorted = Vec::with_capacity(edges.len());
        for &(s, r) in edges {
            for v in [s, r] {
                if v >= n {
                    return Err(TopologyError::UnknownAgent { agent: format!("#{v}") });
                }
            }
            if s == r {
                return Err(TopologyError::SelfLoop { agent: layout.agent(s) });
            }
            if adjacency[r * n + s] {
                return Err(TopologyError::DuplicateEdge { from: layout.agent(s), to: layout.agent(r) });
            }
            adjacency.set(r * n + s, true);
            sorted.push((s, r));
        }
        sorted.sort_unstable();

        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(s, r) in &sorted {
            out_neighbors[s].push(r);
            in_neighbors[r].push(s);
        }
        for list in in_neighbors.iter_mut() {
            list.sort_unstable();
        }
        let mut laplacian = vec![0i64; n * n];
        for r in 0..n {
            for &s in &in_neighbors[r] {
                laplacian[r * n + s] -= 1;
                laplacian[r * n + r] += 1;
            }
        }
        Ok(Self { layout, edges: sorted, adjacency, laplacian, in_neighbors, out_neighbors })
    }

    pub fn layout(&self) -> &CoalitionLayout {
        &self.layout
    }

    pub fn num_agents(&self) -> usize {
        self.layout.total()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `a_receiver^sender`.
    pub fn adjacent(&self, receiver: usize, sender: usize) -> bool {
        self.adjacency[receiver * self.num_agents() + sender]
    }

    pub fn in_degree(&self, agent: usize) -> usize {
        self.in_neighbors[agent].len()
    }

    pub fn in_neighbors(&self, agent: usize) -> &[usize] {
        &self.in_neighbors[agent]
    }

    pub fn out_neighbors(&self, agent: usize) -> &[usize] {
        &self.out_neighbors[agent]
    }

    pub fn intra_in_neighbors(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        let range = self.layout.range(self.layout.coalition_of(agent));
        self.in_neighbors[agent].iter().copied().filter(move |s| range.contains(s))
    }

    pub fn intra_out_neighbors(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        let range = self.layout.range(self.layout.coalition_of(agent));
        self.out_neighbors[agent].iter().copied().filter(move |r| range.contains(r))
    }

    pub fn laplacian_entry(&self, row: usize, col: usize) -> i64 {
        self.laplacian[row * self.num_agents() + col]
    }

    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.num_agents();
        DMatrix::from_fn(n, n, |r, c| self.laplacian_entry(r, c) as f64)
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.num_agents();
        DMatrix::from_fn(n, n, |r, c| if self.adjacent(r, c) { 1.0 } else { 0.0 })
    }

    /// Strong connectivity of `G` and of every induced coalition subgraph.
    pub fn check_assumption1(&self) -> ConnectivityReport {
        let mut failures = Vec::new();
        let all: Vec<usize> = (0..self.num_agents()).collect();
        if !self.strongly_connected(&all) {
            failures.push(GraphScope::Global);
        }
        for i in 0..self.layout.num_coalitions() {
            let nodes: Vec<usize> = self.layout.range(i).collect();
            if !self.strongly_connected(&nodes) {
                failures.push(GraphScope::Coalition(i));
            }
        }
        ConnectivityReport { failures }
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        let report = self.check_assumption1();
        if report.passes() {
            Ok(())
        } else {
            Err(TopologyError::Disconnected(report))
        }
    }

    /// Forward and backward reachability from the first node, restricted to
    /// the induced subgraph on `nodes` (sorted).
    fn strongly_connected(&self, nodes: &[usize]) -> bool {
        if nodes.len() <= 1 {
            return true;
        }
        let member = |v: usize| nodes.binary_search(&v).is_ok();
        let reach = |forward: bool| {
            let mut seen = vec![false; self.num_agents()];
            let mut queue = VecDeque::from([nodes[0]]);
            seen[nodes[0]] = true;
            let mut count = 1;
            while let Some(v) = queue.pop_front() {
                let next = if forward { &self.out_neighbors[v] } else { &self.in_neighbors[v] };
                for &w in next {
                    if member(w) && !seen[w] {
                        seen[w] = true;
                        count += 1;
                        queue.push_back(w);
                    }
                }
            }
            count
        };
        reach(true) == nodes.len() && reach(false) == nodes.len()
    }
}

/// Pull (row-stochastic) and push (column-stochastic) weights of one
/// coalition, with their stationary vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionWeights {
    /// `R_i`; row `j` holds the weights agent `j` applies to what it pulls.
    pub pull: DMatrix<f64>,
    /// `C_i`; column `m` holds the weights agent `m` applies to what it pushes.
    pub push: DMatrix<f64>,
    /// Left eigenvector of `R_i` for eigenvalue 1, summing to `n_i`.
    pub left: DVector<f64>,
    /// Right eigenvector of `C_i` for eigenvalue 1, summing to `n_i`.
    pub right: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntraCoalitionWeights {
    coalitions: Vec<CoalitionWeights>,
}

impl IntraCoalitionWeights {
    /// Equal weights over each agent's intra-coalition neighbors and itself.
    pub fn uniform(graph: &DirectedGameGraph) -> Result<Self, TopologyError> {
        graph.validate()?;
        let layout = graph.layout();
        let mut pulls = Vec::with_capacity(layout.num_coalitions());
        let mut pushes = Vec::with_capacity(layout.num_coalitions());
        for i in 0..layout.num_coalitions() {
            let range = layout.range(i);
            let n = range.len();
            let base = range.start;
            let mut r = DMatrix::zeros(n, n);
            let mut c = DMatrix::zeros(n, n);
            for j in 0..n {
                let agent = base + j;
                let ins: Vec<usize> = graph.intra_in_neighbors(agent).collect();
                let w = 1.0 / (ins.len() + 1) as f64;
                r[(j, j)] = w;
                for s in ins {
                    r[(j, s - base)] = w;
                }
                let outs: Vec<usize> = graph.intra_out_neighbors(agent).collect();
                let w = 1.0 / (outs.len() + 1) as f64;
                c[(j, j)] = w;
                for t in outs {
                    c[(t - base, j)] = w;
                }
            }
            pulls.push(r);
            pushes.push(c);
        }
        Self::explicit(graph, pulls, pushes)
    }

    /// Validates user-supplied weights: positive exactly on each agent's
    /// intra-coalition neighborhood plus itself, `R_i` rows and `C_i`
    /// columns summing to one within [`WEIGHT_SUM_TOL`].
    pub fn explicit(graph: &DirectedGameGraph, pulls: Vec<DMatrix<f64>>, pushes: Vec<DMatrix<f64>>) -> Result<Self, TopologyError> {
        graph.validate()?;
        let layout = graph.layout();
        let n_coal = layout.num_coalitions();
        if pulls.len() != n_coal || pushes.len() != n_coal {
            let (matrix, got) = if pulls.len() != n_coal { ('R', pulls.len()) } else { ('C', pushes.len()) };
            return Err(TopologyError::Parse {
                input: format!("{matrix} tables"),
                reason: format!("expected {n_coal} coalition matrices, got {got}"),
            });
        }
        let mut coalitions = Vec::with_capacity(n_coal);
        for (i, (pull, push)) in pulls.into_iter().zip(pushes).enumerate() {
            let range = layout.range(i);
            let n = range.len();
            for (name, m) in [('R', &pull), ('C', &push)] {
                if m.nrows() != n || m.ncols() != n {
                    return Err(TopologyError::WeightShape {
                        matrix: name,
                        coalition: i + 1,
                        expected: n,
                        rows: m.nrows(),
                        cols: m.ncols(),
                    });
                }
            }
            for row in 0..n {
                for col in 0..n {
                    // both matrices are indexed [receiver, sender]
                    let linked = row == col || graph.adjacent(range.start + row, range.start + col);
                    for (name, m) in [('R', &pull), ('C', &push)] {
                        let value = m[(row, col)];
                        let reason = if !value.is_finite() {
                            Some("weight is not finite")
                        } else if linked && value <= 0.0 {
                            Some("weight must be positive on the agent and its intra-coalition in-link")
                        } else if !linked && value != 0.0 {
                            Some("weight must be zero where there is no intra-coalition link")
                        } else {
                            None
                        };
                        if let Some(reason) = reason {
                            return Err(TopologyError::WeightSupport {
                                matrix: name,
                                coalition: i + 1,
                                row: row + 1,
                                col: col + 1,
                                value,
                                reason,
                            });
                        }
                    }
                }
            }
            for row in 0..n {
                let sum = pull.row(row).sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(TopologyError::WeightSum {
                        matrix: 'R',
                        coalition: i + 1,
                        what: "row",
                        index: row + 1,
                        sum,
                        kind: "row-stochastic pull",
                    });
                }
            }
            for col in 0..n {
                let sum = push.column(col).sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(TopologyError::WeightSum {
                        matrix: 'C',
                        coalition: i + 1,
                        what: "column",
                        index: col + 1,
                        sum,
                        kind: "column-stochastic push",
                    });
                }
            }
            let left = stationary_left_vector(&pull, n as f64)?;
            let right = stationary_right_vector(&push, n as f64)?;
            coalitions.push(CoalitionWeights { pull, push, left, right });
        }
        Ok(Self { coalitions })
    }

    pub fn coalition(&self, i: usize) -> &CoalitionWeights {
        &self.coalitions[i]
    }

    pub fn coalitions(&self) -> &[CoalitionWeights] {
        &self.coalitions
    }

    pub fn num_coalitions(&self) -> usize {
        self.coalitions.len()
    }
}

fn check_row_stochastic(m: &DMatrix<f64>) -> Result<(), TopologyError> {
    if m.nrows() != m.ncols() || m.is_empty() {
        return Err(TopologyError::NotStochastic("row"));
    }
    if m.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(TopologyError::NotStochastic("row"));
    }
    if m.row_iter().any(|row| (row.sum() - 1.0).abs() > WEIGHT_SUM_TOL) {
        return Err(TopologyError::NotStochastic("row"));
    }
    Ok(())
}

fn rescale_positive(mut u: DVector<f64>, scale: f64) -> Result<DVector<f64>, TopologyError> {
    let sum = u.sum();
    if sum == 0.0 || !sum.is_finite() {
        return Err(TopologyError::NotPositive);
    }
    u *= scale / sum;
    if u.iter().any(|&v| !(v > 0.0)) {
        return Err(TopologyError::NotPositive);
    }
    Ok(u)
}

/// `u` with `uᵀM = uᵀ`, `uᵀ1 = scale`, for an irreducible row-stochastic `M`.
///
/// Power iteration first; matrices up to [`STATIONARY_DIRECT_MAX_DIM`] fall
/// back to a direct solve when it stalls (periodic chains never converge).
pub fn stationary_left_vector(m: &DMatrix<f64>, scale: f64) -> Result<DVector<f64>, TopologyError> {
    check_row_stochastic(m)?;
    let n = m.nrows();
    let mut u = DVector::from_element(n, scale / n as f64);
    let tol = STATIONARY_TOL * scale.abs().max(1.0);
    for _ in 0..STATIONARY_MAX_ITER {
        let next = m.tr_mul(&u);
        let change = (&next - &u).amax();
        u = next;
        if change <= tol {
            return rescale_positive(u, scale);
        }
    }
    if n <= STATIONARY_DIRECT_MAX_DIM {
        return stationary_left_vector_direct(m, scale);
    }
    Err(TopologyError::NoConvergence { iterations: STATIONARY_MAX_ITER })
}

/// Direct solve of `(Mᵀ − I)u = 0` with the last equation replaced by the
/// normalization `1ᵀu = scale`.
pub fn stationary_left_vector_direct(m: &DMatrix<f64>, scale: f64) -> Result<DVector<f64>, TopologyError> {
    check_row_stochastic(m)?;
    let n = m.nrows();
    let mut system = m.transpose() - DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for c in 0..n {
        system[(n - 1, c)] = 1.0;
    }
    rhs[n - 1] = scale;
    let u = system.lu().solve(&rhs).ok_or(TopologyError::NotPositive)?;
    rescale_positive(u, scale)
}

/// `v` with `Mv = v`, `1ᵀv = scale`, for an irreducible column-stochastic `M`.
pub fn stationary_right_vector(m: &DMatrix<f64>, scale: f64) -> Result<DVector<f64>, TopologyError> {
    stationary_left_vector(&m.transpose(), scale).map_err(|e| match e {
        TopologyError::NotStochastic(_) => TopologyError::NotStochastic("column"),
        other => other,
    })
}
