//! Iterative scaling with fully known marginals.

use nalgebra::DVector;

use super::graph::{CostGraph, ScalingState};
use super::projection::Projector;
use super::report::SolveReport;
use crate::error::{Error, Result};
use crate::kernel::{KernelOperator, Side};

const MASS_TOLERANCE: f64 = 1e-9;

/// Checks that every marginal is strictly positive and all share one total mass.
pub fn check_marginals(marginals: &[&DVector<f64>]) -> Result<()> {
    for (t, m) in marginals.iter().enumerate() {
        if m.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::NonPositiveMarginal(t));
        }
    }
    if let Some(first) = marginals.first() {
        let m0 = first.sum();
        for m in &marginals[1..] {
            let mt = m.sum();
            if (mt - m0).abs() > MASS_TOLERANCE * m0.max(mt) {
                return Err(Error::UnequalMass(m0, mt));
            }
        }
    }
    Ok(())
}

fn relative_residual(p: &DVector<f64>, target: &DVector<f64>) -> f64 {
    (p - target).amax() / target.amax()
}

/// Bi-marginal Sinkhorn: alternately `u0 = φ0 ./ (K u1)` and `u1 = φ1 ./ (Kᵀ u0)`.
///
/// The plan is `diag(u0) K diag(u1)`. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn sinkhorn_bimarginal(
    kernel: &KernelOperator,
    phi0: &DVector<f64>,
    phi1: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalingState, SolveReport)> {
    if phi0.len() != kernel.nrows() || phi1.len() != kernel.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "marginals of length {} and {} for a {}x{} kernel",
            phi0.len(),
            phi1.len(),
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    check_marginals(&[phi0, phi1])?;
    let eps = kernel.epsilon();
    let mut u0 = DVector::from_element(phi0.len(), 1.0);
    let mut u1 = DVector::from_element(phi1.len(), 1.0);
    let mut report = SolveReport::default();
    for _ in 0..max_iter {
        u0 = phi0.component_div(&kernel.apply(&u1, Side::Normal)?);
        let ktu0 = kernel.apply(&u0, Side::Transpose)?;
        u1 = phi1.component_div(&ktu0);
        report.iterations += 1;

        let row = u0.component_mul(&kernel.apply(&u1, Side::Normal)?);
        let col = u1.component_mul(&ktu0);
        let res = relative_residual(&row, phi0).max(relative_residual(&col, phi1));
        let objective = eps * (phi0.dot(&u0.map(f64::ln)) + phi1.dot(&u1.map(f64::ln)) - col.sum());
        report.residual_history.push(res);
        report.objective_history.push(objective);
        if res <= tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("bi-marginal Sinkhorn stopped after {max_iter} sweeps");
    }
    let graph = CostGraph::sequential(std::sync::Arc::new(kernel.clone()), 1)?;
    Ok((ScalingState::new(&graph, vec![u0, u1])?, report))
}

/// Multi-marginal Sinkhorn with cyclic updates `u_t = φ_t ./ (P_t(K ⊙ U) ./ u_t)`,
/// `t = 0, 1, ..., T`, starting from `u = 1`.
pub fn sinkhorn_multimarginal(
    graph: &CostGraph,
    marginals: &[DVector<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(ScalingState, SolveReport)> {
    let mut u = ScalingState::ones(graph);
    let report = sinkhorn_multimarginal_from(graph, marginals, &mut u, tol, max_iter)?;
    Ok((u, report))
}

/// As [`sinkhorn_multimarginal`] but warm-started from `u`.
pub fn sinkhorn_multimarginal_from(
    graph: &CostGraph,
    marginals: &[DVector<f64>],
    u: &mut ScalingState,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    if marginals.len() != graph.marginal_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} marginals for a graph with {} marginals",
            marginals.len(),
            graph.marginal_count()
        )));
    }
    for (t, (m, &n)) in marginals.iter().zip(graph.sizes()).enumerate() {
        if m.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "marginal {t} has length {}, grid has {n} points",
                m.len()
            )));
        }
    }
    check_marginals(&marginals.iter().collect::<Vec<_>>())?;
    u.validate(graph)?;
    let eps = graph
        .edges()
        .first()
        .map(|e| e.kernel.epsilon())
        .unwrap_or(1.0);

    let mut proj = Projector::new(graph);
    let mut report = SolveReport::default();
    for _ in 0..max_iter {
        let mut mass = 0.0;
        for (t, phi) in marginals.iter().enumerate() {
            let v = proj.partial(u, t)?;
            let ut = phi.component_div(&v);
            mass = ut.dot(&v);
            u.set(t, ut);
            proj.invalidate(t);
        }
        report.iterations += 1;

        let mut res: f64 = 0.0;
        let mut linear = 0.0;
        for (t, phi) in marginals.iter().enumerate() {
            let p = proj.marginal(u, t)?;
            res = res.max(relative_residual(&p, phi));
            linear += phi.dot(&u.get(t).map(f64::ln));
        }
        report.residual_history.push(res);
        report.objective_history.push(eps * (linear - mass));
        if res <= tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!("multi-marginal Sinkhorn stopped after {max_iter} sweeps");
    }
    Ok(report)
}
