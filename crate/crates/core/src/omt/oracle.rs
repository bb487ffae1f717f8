//! Brute-force evaluation on the materialized transport tensor.
//!
//! Exponential in the number of marginals; intended for verifying the
//! structured projections on small problems.

use nalgebra::{DMatrix, DVector};

use super::graph::{CostGraph, ScalingState};
use crate::error::{Error, Result};

/// Largest tensor the oracle will materialize.
pub const MAX_TENSOR_ENTRIES: f64 = 1e7;

/// The full tensor `K ⊙ U`, row-major over marginal indices (marginal 0 slowest).
#[derive(Clone, Debug)]
pub struct DenseTensor {
    pub sizes: Vec<usize>,
    pub data: Vec<f64>,
    /// `C` evaluated at every entry.
    pub cost: Vec<f64>,
}

impl DenseTensor {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.sizes.len()];
        for t in (0..self.sizes.len().saturating_sub(1)).rev() {
            s[t] = s[t + 1] * self.sizes[t + 1];
        }
        s
    }

    pub fn marginal(&self, idx: usize) -> DVector<f64> {
        let stride = self.strides()[idx];
        let n = self.sizes[idx];
        let mut out = DVector::zeros(n);
        for (k, &m) in self.data.iter().enumerate() {
            out[(k / stride) % n] += m;
        }
        out
    }

    pub fn pair(&self, i1: usize, i2: usize) -> DMatrix<f64> {
        let s = self.strides();
        let (n1, n2) = (self.sizes[i1], self.sizes[i2]);
        let mut out = DMatrix::zeros(n1, n2);
        for (k, &m) in self.data.iter().enumerate() {
            out[((k / s[i1]) % n1, (k / s[i2]) % n2)] += m;
        }
        out
    }

    pub fn transport_cost(&self) -> f64 {
        self.data.iter().zip(&self.cost).map(|(m, c)| m * c).sum()
    }
}

/// Materializes `K ⊙ U` entry by entry from the graph's edge kernels.
pub fn materialize(graph: &CostGraph, u: &ScalingState) -> Result<DenseTensor> {
    u.validate(graph)?;
    let size = graph.tensor_size();
    if size > MAX_TENSOR_ENTRIES {
        return Err(Error::TensorTooLarge(size));
    }
    let sizes = graph.sizes().to_vec();
    let edges: Vec<_> = graph
        .edges()
        .into_iter()
        .map(|e| (e.from, e.to, e.kernel.to_dense(), e.kernel.cost_dense()))
        .collect();
    let total = size as usize;
    let mut data = Vec::with_capacity(total);
    let mut cost = Vec::with_capacity(total);
    let mut idx = vec![0usize; sizes.len()];
    for _ in 0..total {
        let mut m: f64 = idx.iter().enumerate().map(|(t, &i)| u.get(t)[i]).product();
        let mut c = 0.0;
        for (from, to, k, ck) in &edges {
            m *= k[(idx[*from], idx[*to])];
            c += ck[(idx[*from], idx[*to])];
        }
        data.push(m);
        cost.push(c);
        for t in (0..sizes.len()).rev() {
            idx[t] += 1;
            if idx[t] < sizes[t] {
                break;
            }
            idx[t] = 0;
        }
    }
    Ok(DenseTensor { sizes, data, cost })
}

pub fn brute_force_project(
    graph: &CostGraph,
    u: &ScalingState,
    idx: usize,
) -> Result<DVector<f64>> {
    graph.check_index(idx)?;
    Ok(materialize(graph, u)?.marginal(idx))
}

pub fn brute_force_pair(
    graph: &CostGraph,
    u: &ScalingState,
    idx1: usize,
    idx2: usize,
) -> Result<DMatrix<f64>> {
    graph.check_index(idx1)?;
    graph.check_index(idx2)?;
    if idx1 == idx2 {
        return Err(Error::UnsupportedPair(idx1, idx2));
    }
    Ok(materialize(graph, u)?.pair(idx1, idx2))
}

pub fn brute_force_transport_cost(graph: &CostGraph, u: &ScalingState) -> Result<f64> {
    Ok(materialize(graph, u)?.transport_cost())
}
