//! Seeded generators for random layouts, graphs, weights and games.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::game::GameSpec;
use crate::linalg;
use crate::seeker::Instance;
use crate::topology::{CoalitionLayout, DirectedGameGraph, IntraCoalitionWeights};

/// Bounds for random instances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceBounds {
    pub max_coalitions: usize,
    pub max_size: usize,
    pub max_total: usize,
    /// Probability of each optional edge beyond the connecting cycles.
    pub extra_edge_probability: f64,
    /// Draw random positive weights instead of the uniform rule.
    pub random_weights: bool,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        Self { max_coalitions: 3, max_size: 3, max_total: 8, extra_edge_probability: 0.3, random_weights: false }
    }
}

/// Random sizes with `2 ≤ n_sum ≤ max_total`.
pub fn random_layout<R: Rng>(rng: &mut R, bounds: &InstanceBounds) -> CoalitionLayout {
    loop {
        let n_coal = rng.random_range(1..=bounds.max_coalitions);
        let sizes: Vec<usize> = (0..n_coal).map(|_| rng.random_range(1..=bounds.max_size)).collect();
        let total: usize = sizes.iter().sum();
        if (2..=bounds.max_total).contains(&total) {
            return CoalitionLayout::new(sizes).expect("sizes are positive");
        }
    }
}

/// Any directed graph: each ordered pair is an edge with probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, layout: &CoalitionLayout, p: f64) -> DirectedGameGraph {
    let n = layout.total();
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|s| (0..n).map(move |r| (s, r))).filter(|&(s, r)| s != r).filter(|_| rng.random_bool(p)).collect();
    DirectedGameGraph::from_flat_edges(layout.clone(), &edges).expect("edges are distinct and in range")
}

/// A graph satisfying the connectivity requirements: a random directed cycle
/// inside every coalition, a random directed cycle through one
/// representative per coalition, plus optional extra edges.
pub fn random_connected_graph<R: Rng>(rng: &mut R, layout: &CoalitionLayout, p: f64) -> DirectedGameGraph {
    let n = layout.total();
    let mut adj = vec![false; n * n];
    let add = |s: usize, r: usize, adj: &mut Vec<bool>| {
        if s != r {
            adj[s * n + r] = true;
        }
    };
    for i in 0..layout.num_coalitions() {
        let mut members: Vec<usize> = layout.range(i).collect();
        members.shuffle(rng);
        if members.len() > 1 {
            for w in 0..members.len() {
                add(members[w], members[(w + 1) % members.len()], &mut adj);
            }
        }
    }
    if layout.num_coalitions() > 1 {
        let mut order: Vec<usize> = (0..layout.num_coalitions()).collect();
        order.shuffle(rng);
        let reps: Vec<usize> = order.iter().map(|&i| rng.random_range(layout.range(i))).collect();
        for w in 0..reps.len() {
            add(reps[w], reps[(w + 1) % reps.len()], &mut adj);
        }
    }
    for s in 0..n {
        for r in 0..n {
            if s != r && !adj[s * n + r] && rng.random_bool(p) {
                adj[s * n + r] = true;
            }
        }
    }
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..n).map(move |r| (s, r))).filter(|&(s, r)| adj[s * n + r]).collect();
    DirectedGameGraph::from_flat_edges(layout.clone(), &edges).expect("edges are distinct and in range")
}

/// Positive weights drawn from `[0.2, 1)` on each required support, then
/// normalized (rows of `R_i`, columns of `C_i`).
pub fn random_weights<R: Rng>(rng: &mut R, graph: &DirectedGameGraph) -> IntraCoalitionWeights {
    let layout = graph.layout();
    let mut pulls = Vec::new();
    let mut pushes = Vec::new();
    for i in 0..layout.num_coalitions() {
        let range = layout.range(i);
        let n = range.len();
        let linked = |r: usize, c: usize| r == c || graph.adjacent(range.start + r, range.start + c);
        let mut pull = DMatrix::from_fn(n, n, |r, c| if linked(r, c) { rng.random_range(0.2..1.0) } else { 0.0 });
        let mut push = DMatrix::from_fn(n, n, |r, c| if linked(r, c) { rng.random_range(0.2..1.0) } else { 0.0 });
        for r in 0..n {
            let s = pull.row(r).sum();
            pull.row_mut(r).iter_mut().for_each(|v| *v /= s);
        }
        for c in 0..n {
            let s = push.column(c).sum();
            push.column_mut(c).iter_mut().for_each(|v| *v /= s);
        }
        pulls.push(pull);
        pushes.push(push);
    }
    IntraCoalitionWeights::explicit(graph, pulls, pushes).expect("random weights satisfy the support and sum rules")
}

/// Smallest accepted `l / ‖J‖` for random games; keeps them well conditioned.
pub const MIN_MONOTONICITY_RATIO: f64 = 0.05;

/// A quadratic game `m(x_ij² − s x_ij) − h x_ij(1ᵀx)` with `m ∈ [1, 10)`,
/// `s ∈ [−20, 20)`, `h ∈ [−0.5, 0.5)`, redrawn until the pseudo-gradient is
/// strongly monotone with `l ≥` [`MIN_MONOTONICITY_RATIO`]`·‖J‖`.
pub fn random_quadratic_game<R: Rng>(rng: &mut R, layout: &CoalitionLayout) -> GameSpec {
    loop {
        let params: Vec<(f64, f64, f64)> = (0..layout.total())
            .map(|_| (rng.random_range(1.0..10.0), rng.random_range(-20.0..20.0), rng.random_range(-0.5..0.5)))
            .collect();
        let game = GameSpec::quadratic(layout.clone(), &params).expect("one triple per agent");
        let (jac, _) = game.pseudo_gradient_affine().expect("quadratic game");
        let l = linalg::symmetric_eigenvalues(&linalg::symmetric_part(&jac))[0];
        if l >= MIN_MONOTONICITY_RATIO * linalg::spectral_norm(&jac) {
            return game;
        }
    }
}

/// A complete random instance within `bounds`.
pub fn random_instance<R: Rng>(rng: &mut R, bounds: &InstanceBounds) -> Instance {
    let layout = random_layout(rng, bounds);
    let graph = random_connected_graph(rng, &layout, bounds.extra_edge_probability);
    let game = random_quadratic_game(rng, &layout);
    let weights = if bounds.random_weights {
        random_weights(rng, &graph)
    } else {
        IntraCoalitionWeights::uniform(&graph).expect("generated graph is connected")
    };
    Instance::new(game, graph, weights).expect("generated parts share one layout")
}
