#![allow(dead_code)]

use ne_lab::game::GameSpec;
use ne_lab::seeker::{Instance, SwarmState};
use ne_lab::topology::{CoalitionLayout, DirectedGameGraph};

pub const REF_M: [f64; 10] = [10.0, 12.0, 14.0, 16.0, 22.0, 18.0, 20.0, 26.0, 30.0, 12.0];
pub const REF_S: [f64; 10] = [10.0, 10.0, 10.0, 50.0, 50.0, 50.0, 50.0, 20.0, 20.0, 20.0];
pub const REF_H: [f64; 10] = [0.25, 0.25, 0.25, 0.15, 0.15, 0.15, 0.15, 0.1, 0.1, 0.1];
pub const REF_X0: [f64; 10] = [0.0, 10.0, 20.0, 0.0, 10.0, 20.0, 30.0, 0.0, 10.0, 20.0];
pub const REF_ALPHA: f64 = 0.02;

pub fn reference_game() -> GameSpec {
    let layout = CoalitionLayout::new(vec![3, 4, 3]).unwrap();
    let params: Vec<_> = (0..10).map(|a| (REF_M[a], REF_S[a], REF_H[a])).collect();
    GameSpec::quadratic(layout, &params).unwrap()
}

pub fn reference_graph() -> DirectedGameGraph {
    DirectedGameGraph::ring_with_heads(CoalitionLayout::new(vec![3, 4, 3]).unwrap())
}

pub fn reference_instance() -> Instance {
    Instance::with_uniform_weights(reference_game(), reference_graph()).unwrap()
}

/// The equilibrium state: `x = x*`, `ξ = 1 ⊗ x*`, `ψ_ij = v_ij ψ̄_i` with
/// `ψ̄_i` the coalition mean of the partials at `x*`.
pub fn fixed_point_state(inst: &Instance, x_star: &[f64]) -> SwarmState {
    let layout = inst.layout();
    let n = layout.total();
    let mut partials = vec![0.0; layout.psi_len()];
    for a in 0..n {
        let off = layout.psi_offset(a);
        let ni = layout.size(layout.coalition_of(a));
        inst.game().agent_partials_into(a, x_star, &mut partials[off..off + ni]);
    }
    let mut psi = vec![0.0; layout.psi_len()];
    for i in 0..layout.num_coalitions() {
        let r = layout.psi_range(i);
        let ni = layout.size(i);
        let v = &inst.weights().coalition(i).right;
        for l in 0..ni {
            let mean = (0..ni).map(|j| partials[r.start + j * ni + l]).sum::<f64>() / ni as f64;
            for j in 0..ni {
                psi[r.start + j * ni + l] = v[j] * mean;
            }
        }
    }
    SwarmState { k: 0, x: x_star.to_vec(), psi, xi: x_star.repeat(n), partials }
}
