//! Block-coordinate ascent on the dual of the partially observed problem.

use nalgebra::DVector;

use super::constraint::{DualState, MeasurementConstraint, Observation};
use super::newton::block_update;
use crate::error::{Error, Result};
use crate::omt::{CostGraph, Projector, ScalingState, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Stop once no dual block moves by more than this (scale-normalized) in a sweep.
    pub outer_tol: f64,
    pub max_sweeps: usize,
    pub inner_tol: f64,
    pub max_newton: usize,
    /// Record the dual objective after every block update.
    pub trace_blocks: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-8,
            max_sweeps: 1000,
            inner_tol: 1e-12,
            max_newton: 50,
            trace_blocks: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartialSolution {
    pub dual: DualState,
    pub scaling: ScalingState,
    pub report: SolveReport,
}

impl PartialSolution {
    /// Estimated marginal `Φ_t = u_t ⊙ v_t`.
    pub fn marginal(&self, graph: &CostGraph, idx: usize) -> Result<DVector<f64>> {
        crate::omt::project_marginal(graph, &self.scaling, idx)
    }
}

fn validate(
    graph: &CostGraph,
    constraints: &[Option<MeasurementConstraint>],
    epsilon: f64,
) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    if constraints.len() != graph.marginal_count() {
        return Err(Error::InvalidConstraint(format!(
            "{} constraints for {} marginals",
            constraints.len(),
            graph.marginal_count()
        )));
    }
    if constraints.iter().all(Option::is_none) {
        return Err(Error::InvalidConstraint(
            "no marginal is constrained".into(),
        ));
    }
    for (t, c) in constraints.iter().enumerate() {
        if let Some(c) = c {
            if c.observation().ncols() != graph.sizes()[t] {
                return Err(Error::InvalidConstraint(format!(
                    "constraint {t} acts on {} points, marginal has {}",
                    c.observation().ncols(),
                    graph.sizes()[t]
                )));
            }
        }
    }
    for e in graph.edges() {
        let k = e.kernel.epsilon();
        if (k - epsilon).abs() > 1e-12 * epsilon {
            return Err(Error::InvalidConstraint(format!(
                "kernel built with epsilon {k}, solver given {epsilon}"
            )));
        }
    }
    Ok(())
}

fn scaling_state(
    graph: &CostGraph,
    constraints: &[Option<MeasurementConstraint>],
    dual: &DualState,
    epsilon: f64,
) -> Result<ScalingState> {
    let u = graph
        .sizes()
        .iter()
        .zip(constraints.iter().zip(&dual.lambda))
        .map(|(&n, (c, l))| match (c, l) {
            (Some(c), Some(l)) => Ok(c.scaling(l, epsilon).0),
            (None, _) => Ok(DVector::from_element(n, 1.0)),
            (Some(_), None) => Err(Error::InvalidState("missing dual block".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingState::new(graph, u)
}

fn linear_and_penalty(c: &MeasurementConstraint, lambda: &DVector<f64>) -> (f64, f64) {
    let pen = if c.is_exact() {
        0.0
    } else {
        lambda.norm_squared() / (4.0 * c.gamma())
    };
    (lambda.dot(c.data()), pen)
}

/// `-ε ⟨K, U⟩ - Σ ‖λ_t‖²/(4γ_t) + Σ λ_tᵀ r_t`.
pub fn dual_objective(
    graph: &CostGraph,
    constraints: &[Option<MeasurementConstraint>],
    dual: &DualState,
    epsilon: f64,
) -> Result<f64> {
    validate(graph, constraints, epsilon)?;
    let u = scaling_state(graph, constraints, dual, epsilon)?;
    let mass = Projector::new(graph).total_mass(&u)?;
    let mut value = -epsilon * mass;
    for (c, l) in constraints.iter().zip(&dual.lambda) {
        if let (Some(c), Some(l)) = (c, l) {
            let (lin, pen) = linear_and_penalty(c, l);
            value += lin - pen;
        }
    }
    Ok(value)
}

/// `Δ_t = -λ_t / (2γ_t)`.
pub fn recover_perturbations(
    dual: &DualState,
    constraints: &[Option<MeasurementConstraint>],
) -> Vec<Option<DVector<f64>>> {
    constraints
        .iter()
        .zip(&dual.lambda)
        .map(|(c, l)| match (c, l) {
            (Some(c), Some(l)) => Some(l * -c.penalty_slope()),
            _ => None,
        })
        .collect()
}

/// Cyclic block-coordinate ascent over the constrained marginals.
///
/// Each block is maximized exactly: `G = I` blocks in closed form, others by
/// damped Newton. Unconstrained marginals keep `u_t = 1`.
pub fn solve(
    graph: &CostGraph,
    constraints: &[Option<MeasurementConstraint>],
    epsilon: f64,
    options: &SolveOptions,
) -> Result<PartialSolution> {
    validate(graph, constraints, epsilon)?;
    let mut dual = DualState::zeros(constraints);
    let mut u = ScalingState::ones(graph);
    let mut proj = Projector::new(graph);
    let mut report = SolveReport::default();
    let n = constraints.len();
    let mut linear = vec![0.0; n];
    let mut penalty = vec![0.0; n];
    let mut clamp_warned = false;

    if options.trace_blocks {
        let mass = proj.total_mass(&u)?;
        report.block_objective_history.push(-epsilon * mass);
    }

    for _ in 0..options.max_sweeps {
        let mut max_change: f64 = 0.0;
        let mut max_inner = 0;
        let mut mass = 0.0;
        for (t, c) in constraints.iter().enumerate() {
            let Some(c) = c else { continue };
            let v = proj.partial(&u, t)?;
            let old = dual.lambda[t]
                .take()
                .unwrap_or_else(|| DVector::zeros(c.data().len()));
            let (lambda, ut, clamped) =
                if c.is_exact() && matches!(c.observation(), Observation::Identity(_)) {
                    // plain Sinkhorn step, kept in scaling form
                    let mut clamped = false;
                    let ut = c.data().component_div(&v).map(|x| {
                        if !(super::SCALING_MIN..=super::SCALING_MAX).contains(&x) {
                            clamped = true;
                        }
                        x.clamp(super::SCALING_MIN, super::SCALING_MAX)
                    });
                    (ut.map(|x| epsilon * x.ln()), ut, clamped)
                } else {
                    let out =
                        block_update(c, &v, &old, epsilon, options.inner_tol, options.max_newton)?;
                    report.newton_iterations += out.iterations;
                    max_inner = max_inner.max(out.iterations);
                    if !out.converged {
                        log::debug!("block {t}: Newton stopped at residual {:.3e}", out.residual);
                    }
                    let (ut, clamped) = c.scaling(&out.lambda, epsilon);
                    (out.lambda, ut, clamped)
                };
            if clamped && !clamp_warned {
                log::warn!(
                    "scaling vector {t} clamped; epsilon may be too small for the cost scale"
                );
                clamp_warned = true;
            }
            let scale = lambda.amax().max(epsilon);
            max_change = max_change.max((&lambda - &old).amax() / scale);
            (linear[t], penalty[t]) = linear_and_penalty(c, &lambda);
            mass = ut.dot(&v);
            u.set(t, ut);
            proj.invalidate(t);
            dual.lambda[t] = Some(lambda);
            if options.trace_blocks {
                let obj =
                    -epsilon * mass + linear.iter().sum::<f64>() - penalty.iter().sum::<f64>();
                report.block_objective_history.push(obj);
            }
        }
        report.iterations += 1;
        report.inner_iteration_history.push(max_inner);
        report.dual_change_history.push(max_change);
        report
            .objective_history
            .push(-epsilon * mass + linear.iter().sum::<f64>() - penalty.iter().sum::<f64>());

        let mut residual: f64 = 0.0;
        for (t, c) in constraints.iter().enumerate() {
            let (Some(c), Some(l)) = (c, &dual.lambda[t]) else {
                continue;
            };
            let phi = proj.marginal(&u, t)?;
            let r = c.observation().apply(&phi) + l * c.penalty_slope() - c.data();
            residual = residual.max(r.amax());
        }
        report.residual_history.push(residual);
        if max_change <= options.outer_tol {
            report.converged = true;
            break;
        }
    }
    log::debug!(
        "{} sweeps, {} kernel applies",
        report.iterations,
        proj.applies()
    );
    if !report.converged {
        log::warn!(
            "partial-information solver stopped after {} sweeps (dual change {:.3e})",
            report.iterations,
            report
                .dual_change_history
                .last()
                .copied()
                .unwrap_or(f64::NAN)
        );
    }
    Ok(PartialSolution {
        dual,
        scaling: u,
        report,
    })
}
