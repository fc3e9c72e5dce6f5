//! Distributed Nash equilibrium seeking for consistency-constrained
//! multi-coalition games over directed graphs.
//!
//! Each coalition `i` holds `n_i` agents with scalar states `x_ij`. Agents of
//! one coalition must agree on a common value while jointly minimizing the
//! sum of their costs; coalitions compete with each other. The crate provides
//!
//! - [`topology`]: coalition layouts, directed graphs, push/pull weights;
//! - [`game`]: agent cost functions, the induced virtual-player game and its
//!   pseudo-gradient;
//! - [`seeker`]: the synchronous distributed iteration (state law, gradient
//!   tracker, leader-following estimator) plus the two degenerate modes;
//! - [`oracle`]: centralized equilibrium solvers used as ground truth;
//! - [`analysis`]: error decomposition, Schur/Lyapunov certificates, the
//!   certified step size and a per-step Lyapunov auditor;
//! - [`trajectory`]: recorded runs.
//!
//! With the `parallel` feature (on by default) per-agent work inside a round
//! and batch sweeps are spread over a rayon pool; without it the same code
//! runs sequentially. Both paths produce bit-identical trajectories.

// `!(a < b)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod exec;
pub mod game;
pub mod linalg;
pub mod oracle;
pub mod random;
pub mod seeker;
pub mod topology;
pub mod trajectory;

pub use analysis::{CertificateSet, ErrorDecomposition};
pub use exec::Execution;
pub use game::{CostFunction, GameSpec, QuadraticAgentCost};
pub use oracle::EquilibriumResult;
pub use seeker::{Instance, SeekerConfig, SwarmState};
pub use topology::{AgentId, CoalitionLayout, DirectedGameGraph, IntraCoalitionWeights};
pub use trajectory::{TrajectoryLog, Verdict};
