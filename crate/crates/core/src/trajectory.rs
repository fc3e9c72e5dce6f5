//! Recorded runs of the seeker.

use serde::Serialize;

use crate::seeker::SwarmState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    MaxIterations,
    Diverged,
}

impl Verdict {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Converged => 0,
            Verdict::MaxIterations => 3,
            Verdict::Diverged => 4,
        }
    }
}

/// Euclidean norms of the four error components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub x: f64,
    pub psi: f64,
    pub xi: f64,
    pub xbar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub k: usize,
    pub x: Vec<f64>,
    pub errors: Option<ErrorNorms>,
    pub lyapunov: Option<f64>,
}

/// Why a run was cut short.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Divergence {
    /// Iteration whose state could not be accepted.
    pub k: usize,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct TrajectoryLog {
    /// Recorded rows, strictly increasing in `k`; always contains `k = 0`
    /// and the final accepted state.
    pub rows: Vec<TrajectoryRow>,
    /// Full states for every iteration, when requested.
    pub snapshots: Vec<SwarmState>,
    pub final_state: SwarmState,
    pub verdict: Verdict,
    pub alpha: f64,
    pub divergence: Option<Divergence>,
    pub record_every: usize,
}

impl TrajectoryLog {
    /// Number of completed rounds.
    pub fn iterations(&self) -> usize {
        self.final_state.k
    }

    pub fn final_x(&self) -> &[f64] {
        &self.final_state.x
    }

    /// `(k, ‖x(k) − x*‖₂)` over the recorded rows.
    pub fn distances_to(&self, x_star: &[f64]) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .map(|r| {
                let d = r.x.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                (r.k, d)
            })
            .collect()
    }
}
