//! Multi-marginal transport with fully known marginals.

mod graph;
pub mod oracle;
mod projection;
mod report;
mod sinkhorn;

pub use graph::{CostGraph, Edge, ScalingState, Topology};
pub use projection::{
    entropy, plan_entropy, project_marginal, project_pair, transport_cost, Projector,
};
pub use report::SolveReport;
pub use sinkhorn::{
    check_marginals, sinkhorn_bimarginal, sinkhorn_multimarginal, sinkhorn_multimarginal_from,
};
