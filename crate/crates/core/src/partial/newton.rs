//! Single-block maximization of the dual in `λ_t`.

use nalgebra::{DMatrix, DVector};

use super::constraint::{MeasurementConstraint, Observation};
use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

/// `G (v ⊙ u) + λ/(2γ) - r`, the negative gradient of the dual in `λ_t`.
pub fn block_residual(
    v: &DVector<f64>,
    u: &DVector<f64>,
    constraint: &MeasurementConstraint,
    lambda: &DVector<f64>,
) -> DVector<f64> {
    constraint.observation().apply(&v.component_mul(u)) + lambda * constraint.penalty_slope()
        - constraint.data()
}

/// `(1/ε) G diag(v ⊙ u) Gᵀ + I/(2γ)`, the Jacobian of [`block_residual`].
pub fn block_jacobian(
    v: &DVector<f64>,
    u: &DVector<f64>,
    constraint: &MeasurementConstraint,
    epsilon: f64,
) -> DMatrix<f64> {
    let m = constraint.observation().nrows();
    constraint.observation().weighted_gram(&v.component_mul(u)) / epsilon
        + DMatrix::identity(m, m) * constraint.penalty_slope()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub lambda: DVector<f64>,
    pub iterations: usize,
    /// `‖block_residual‖∞` at the returned point.
    pub residual: f64,
    pub converged: bool,
}

/// Damped Newton on `block_residual = 0`, warm-started at `lambda`.
///
/// Stops once `‖f‖∞ ≤ inner_tol · max(1, ‖r‖∞)`. Steps are halved until the
/// residual 2-norm decreases by the Armijo factor.
pub fn newton_block_update(
    constraint: &MeasurementConstraint,
    v: &DVector<f64>,
    lambda: &DVector<f64>,
    epsilon: f64,
    inner_tol: f64,
    max_newton: usize,
) -> Result<NewtonOutcome> {
    let tol = inner_tol * constraint.data().amax().max(1.0);
    let mut lambda = lambda.clone();
    let (mut u, _) = constraint.scaling(&lambda, epsilon);
    let mut f = block_residual(v, &u, constraint, &lambda);
    let mut iterations = 0;
    while f.amax() > tol {
        if iterations == max_newton {
            return Ok(NewtonOutcome {
                residual: f.amax(),
                lambda,
                iterations,
                converged: false,
            });
        }
        let jac = block_jacobian(v, &u, constraint, epsilon);
        let step = jac
            .cholesky()
            .ok_or(Error::JacobianFactorization)?
            .solve(&(-&f));
        let norm = f.norm();
        let mut eta = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &lambda + &step * eta;
            let (tu, _) = constraint.scaling(&trial, epsilon);
            let tf = block_residual(v, &tu, constraint, &trial);
            if tf.norm() <= (1.0 - ARMIJO * eta) * norm {
                accepted = Some((trial, tu, tf));
                break;
            }
            eta *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((l, nu, nf)) => {
                lambda = l;
                u = nu;
                f = nf;
            }
            None => {
                // no decrease possible at working precision
                return Ok(NewtonOutcome {
                    residual: f.amax(),
                    lambda,
                    iterations,
                    converged: false,
                });
            }
        }
    }
    Ok(NewtonOutcome {
        residual: f.amax(),
        lambda,
        iterations,
        converged: true,
    })
}

/// Wright omega `ω(z)`, the solution of `ω + ln ω = z`.
///
/// Newton on `y = ln ω` for `e^y + y - z = 0`; the function is convex and
/// increasing and the start point has a nonnegative value, so iterates
/// decrease monotonically to the root.
pub fn wright_omega(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::INFINITY;
    }
    if z < -750.0 {
        return 0.0;
    }
    let mut y = if z < 1.0 { z } else { z.ln() };
    for _ in 0..100 {
        let ey = y.exp();
        let dy = (ey + y - z) / (ey + 1.0);
        y -= dy;
        if dy.abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            break;
        }
    }
    y.exp()
}

/// Closed-form block update for `G = I`: solves
/// `v ⊙ exp(λ/ε) + λ/(2γ) = r` elementwise.
pub fn wright_omega_update(
    v: &DVector<f64>,
    r: &DVector<f64>,
    gamma: f64,
    epsilon: f64,
) -> DVector<f64> {
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(r.iter())
            .map(|(&vi, &ri)| scalar_update(vi, ri, gamma, epsilon)),
    )
}

fn scalar_update(v: f64, r: f64, gamma: f64, epsilon: f64) -> f64 {
    if v == r {
        return 0.0;
    }
    if gamma.is_infinite() {
        return epsilon * (r / v).ln();
    }
    if v <= 0.0 {
        return 2.0 * gamma * r;
    }
    let a = 2.0 * gamma / epsilon;
    let z = (a * v).ln() + a * r;
    let mut lambda = 2.0 * gamma * r - epsilon * wright_omega(z);
    // one Newton polish in λ removes cancellation in 2γr - εω
    let e = (lambda / epsilon).exp();
    let f = v * e + lambda / (2.0 * gamma) - r;
    let df = v * e / epsilon + 0.5 / gamma;
    if f.is_finite() && df.is_finite() && df > 0.0 {
        lambda -= f / df;
    }
    lambda
}

/// Dispatches to the closed form when `G = I` and to Newton otherwise.
pub(crate) fn block_update(
    constraint: &MeasurementConstraint,
    v: &DVector<f64>,
    lambda: &DVector<f64>,
    epsilon: f64,
    inner_tol: f64,
    max_newton: usize,
) -> Result<NewtonOutcome> {
    match constraint.observation() {
        Observation::Identity(_) => {
            let lambda = wright_omega_update(v, constraint.data(), constraint.gamma(), epsilon);
            let (u, _) = constraint.scaling(&lambda, epsilon);
            let residual = block_residual(v, &u, constraint, &lambda).amax();
            Ok(NewtonOutcome {
                lambda,
                iterations: 0,
                residual,
                converged: true,
            })
        }
        Observation::Dense(_) => {
            newton_block_update(constraint, v, lambda, epsilon, inner_tol, max_newton)
        }
    }
}
