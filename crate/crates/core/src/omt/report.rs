use serde::{Deserialize, Serialize};

/// Convergence trace of a scaling solver.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Full sweeps performed.
    pub iterations: usize,
    /// Max marginal-constraint residual after each sweep: relative for
    /// Sinkhorn, absolute `‖G P(M) - r + λ/(2γ)‖∞` for partial information.
    pub residual_history: Vec<f64>,
    /// Dual objective after each sweep (constant terms dropped).
    pub objective_history: Vec<f64>,
    /// Relative change of the dual variables per sweep (partial-information solver only).
    #[serde(default)]
    pub dual_change_history: Vec<f64>,
    /// Total Newton steps taken by block updates.
    #[serde(default)]
    pub newton_iterations: usize,
    /// Largest Newton step count of any block in each sweep.
    #[serde(default)]
    pub inner_iteration_history: Vec<usize>,
    /// Dual objective before the first and after every block update, when traced.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub block_objective_history: Vec<f64>,
    pub converged: bool,
}

impl SolveReport {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_history.last().copied()
    }
}
