//! Transport with marginals known only through noisy linear measurements.
//!
//! Solves
//!
//! ```text
//! min  ⟨C, M⟩ + ε D(M) + Σ_t γ_t ‖Δ_t‖²   s.t.  G_t P_t(M) = r_t + Δ_t
//! ```
//!
//! through its dual, where `M = K ⊙ (u_0 ⊗ ... ⊗ u_T)` with
//! `u_t = exp(G_tᵀ λ_t / ε)`.

mod constraint;
mod newton;
mod solver;

pub use constraint::{DualState, MeasurementConstraint, Observation, SCALING_MAX, SCALING_MIN};
pub use newton::{
    block_jacobian, block_residual, newton_block_update, wright_omega, wright_omega_update,
    NewtonOutcome,
};
pub use solver::{dual_objective, recover_perturbations, solve, PartialSolution, SolveOptions};
