//! Marginal and pairwise projections of `K ⊙ U` using only kernel applies.
//!
//! Chains are handled with forward/backward messages
//!
//! ```text
//! fwd_0 = 1,  fwd_t = K_tᵀ (fwd_{t-1} ⊙ w_{t-1})
//! bwd_T = 1,  bwd_t = K_{t+1} (bwd_{t+1} ⊙ w_{t+1})
//! ```
//!
//! where `w_t = u_t` for a plain chain and `w_t = u_(t,0) ⊙ ⊙_j K̃ u_(t,j)` for
//! a chain of barycenters. The marginal at chain node `t` is
//! `fwd_t ⊙ w_t ⊙ bwd_t`. Stars use Hadamard products of leaf applies.
//!
//! [`Projector`] caches messages and leaf applies. After `u_t` changes the
//! caller must call [`Projector::invalidate`]; a cyclic sweep over a chain then
//! costs `O(T)` kernel applies.

use nalgebra::{DMatrix, DVector};

use super::graph::{CostGraph, ScalingState, Topology};
use crate::error::{Error, Result};
use crate::kernel::{KernelOperator, Side};

/// Incremental projection engine bound to one graph.
#[derive(Clone, Debug)]
pub struct Projector<'g> {
    graph: &'g CostGraph,
    fwd: Vec<Option<DVector<f64>>>,
    bwd: Vec<Option<DVector<f64>>>,
    /// Chain weights `p_t` (StarChain only).
    weight: Vec<Option<DVector<f64>>>,
    /// Leaf kernel applied to the leaf scaling, keyed by flat index.
    leaf_apply: Vec<Option<DVector<f64>>>,
    applies: usize,
}

impl<'g> Projector<'g> {
    pub fn new(graph: &'g CostGraph) -> Self {
        let nodes = match graph.topology() {
            Topology::Sequential(ks) => ks.len() + 1,
            Topology::Central(_) => 0,
            Topology::StarChain { steps, .. } => steps + 1,
        };
        Self {
            graph,
            fwd: vec![None; nodes],
            bwd: vec![None; nodes],
            weight: vec![None; nodes],
            leaf_apply: vec![None; graph.marginal_count()],
            applies: 0,
        }
    }

    pub fn graph(&self) -> &CostGraph {
        self.graph
    }

    /// Number of kernel applies performed so far.
    pub fn applies(&self) -> usize {
        self.applies
    }

    /// Drop every cached quantity that depends on `u_idx`.
    pub fn invalidate(&mut self, idx: usize) {
        let node = match self.graph.topology() {
            Topology::Sequential(_) => idx,
            Topology::Central(_) => {
                self.leaf_apply[idx] = None;
                return;
            }
            Topology::StarChain { leaves, .. } => {
                self.leaf_apply[idx] = None;
                idx / (leaves + 1)
            }
        };
        self.weight[node] = None;
        for f in self.fwd.iter_mut().skip(node + 1) {
            *f = None;
        }
        for b in self.bwd.iter_mut().take(node) {
            *b = None;
        }
    }

    /// Drop all caches.
    pub fn reset(&mut self) {
        self.fwd.iter_mut().for_each(|x| *x = None);
        self.bwd.iter_mut().for_each(|x| *x = None);
        self.weight.iter_mut().for_each(|x| *x = None);
        self.leaf_apply.iter_mut().for_each(|x| *x = None);
    }

    fn apply(&mut self, k: &KernelOperator, v: &DVector<f64>, side: Side) -> Result<DVector<f64>> {
        self.applies += 1;
        k.apply(v, side)
    }

    fn chain_kernel(&self, t: usize) -> &'g KernelOperator {
        // kernel between chain nodes t and t + 1
        match self.graph.topology() {
            Topology::Sequential(ks) => &ks[t],
            Topology::StarChain { chain, .. } => chain,
            Topology::Central(_) => unreachable!("central graphs have no chain"),
        }
    }

    fn leaf_vec(&mut self, u: &ScalingState, idx: usize) -> Result<DVector<f64>> {
        if let Some(v) = &self.leaf_apply[idx] {
            return Ok(v.clone());
        }
        let k: &KernelOperator = match self.graph.topology() {
            Topology::Central(ks) => &ks[idx - 1],
            Topology::StarChain { leaf, .. } => leaf,
            Topology::Sequential(_) => unreachable!("chains have no leaves"),
        };
        let v = self.apply(k, u.get(idx), Side::Normal)?;
        self.leaf_apply[idx] = Some(v.clone());
        Ok(v)
    }

    /// Hadamard product of leaf applies at star `t`, skipping `skip`.
    fn leaf_product(&mut self, u: &ScalingState, t: usize, skip: &[usize]) -> Result<DVector<f64>> {
        let (base, leaves, n) = match self.graph.topology() {
            Topology::Central(ks) => (0, ks.len(), ks[0].nrows()),
            Topology::StarChain { leaves, chain, .. } => (t * (leaves + 1), *leaves, chain.nrows()),
            Topology::Sequential(_) => unreachable!(),
        };
        let mut acc = DVector::from_element(n, 1.0);
        for j in 1..=leaves {
            if skip.contains(&j) {
                continue;
            }
            acc.component_mul_assign(&self.leaf_vec(u, base + j)?);
        }
        Ok(acc)
    }

    /// Chain weight `w_t`.
    fn chain_weight(&mut self, u: &ScalingState, t: usize) -> Result<DVector<f64>> {
        match self.graph.topology() {
            Topology::Sequential(_) => Ok(u.get(t).clone()),
            Topology::StarChain { leaves, .. } => {
                if let Some(p) = &self.weight[t] {
                    return Ok(p.clone());
                }
                let mut p = self.leaf_product(u, t, &[])?;
                p.component_mul_assign(u.get(t * (leaves + 1)));
                self.weight[t] = Some(p.clone());
                Ok(p)
            }
            Topology::Central(_) => unreachable!(),
        }
    }

    fn forward(&mut self, u: &ScalingState, t: usize) -> Result<DVector<f64>> {
        if let Some(f) = &self.fwd[t] {
            return Ok(f.clone());
        }
        let f = if t == 0 {
            DVector::from_element(self.chain_size(0), 1.0)
        } else {
            let mut prev = self.forward(u, t - 1)?;
            prev.component_mul_assign(&self.chain_weight(u, t - 1)?);
            let k = self.chain_kernel(t - 1);
            self.apply(k, &prev, Side::Transpose)?
        };
        self.fwd[t] = Some(f.clone());
        Ok(f)
    }

    fn backward(&mut self, u: &ScalingState, t: usize) -> Result<DVector<f64>> {
        if let Some(b) = &self.bwd[t] {
            return Ok(b.clone());
        }
        let last = self.bwd.len() - 1;
        let b = if t == last {
            DVector::from_element(self.chain_size(t), 1.0)
        } else {
            // iterate from the nearest valid message to avoid deep recursion
            let mut s = t + 1;
            while s < last && self.bwd[s].is_none() {
                s += 1;
            }
            let mut cur = match &self.bwd[s] {
                Some(b) => b.clone(),
                None => DVector::from_element(self.chain_size(s), 1.0),
            };
            self.bwd[s] = Some(cur.clone());
            while s > t {
                cur.component_mul_assign(&self.chain_weight(u, s)?);
                let k = self.chain_kernel(s - 1);
                cur = self.apply(k, &cur, Side::Normal)?;
                s -= 1;
                self.bwd[s] = Some(cur.clone());
            }
            cur
        };
        self.bwd[t] = Some(b.clone());
        Ok(b)
    }

    fn chain_size(&self, t: usize) -> usize {
        match self.graph.topology() {
            Topology::Sequential(_) => self.graph.sizes()[t],
            Topology::StarChain { chain, .. } => chain.nrows(),
            Topology::Central(_) => unreachable!(),
        }
    }

    fn forward_iter(&mut self, u: &ScalingState, t: usize) -> Result<DVector<f64>> {
        // fill forward messages bottom-up to avoid deep recursion
        let mut s = 0;
        while s < t && self.fwd[s + 1].is_some() {
            s += 1;
        }
        for k in s..=t {
            self.forward(u, k)?;
        }
        self.forward(u, t)
    }

    /// `P_idx(K ⊙ U) ./ u_idx`, computed without touching `u_idx`.
    pub fn partial(&mut self, u: &ScalingState, idx: usize) -> Result<DVector<f64>> {
        self.graph.check_index(idx)?;
        match self.graph.topology() {
            Topology::Sequential(_) => {
                let mut v = self.forward_iter(u, idx)?;
                v.component_mul_assign(&self.backward(u, idx)?);
                Ok(v)
            }
            Topology::Central(ks) => {
                if idx == 0 {
                    self.leaf_product(u, 0, &[])
                } else {
                    let mut w = self.leaf_product(u, 0, &[idx])?;
                    w.component_mul_assign(u.get(0));
                    self.apply(&ks[idx - 1], &w, Side::Transpose)
                }
            }
            Topology::StarChain { leaves, leaf, .. } => {
                let (t, j) = (idx / (leaves + 1), idx % (leaves + 1));
                let mut w = self.forward_iter(u, t)?;
                w.component_mul_assign(&self.backward(u, t)?);
                if j == 0 {
                    w.component_mul_assign(&self.leaf_product(u, t, &[])?);
                    Ok(w)
                } else {
                    w.component_mul_assign(u.get(t * (leaves + 1)));
                    w.component_mul_assign(&self.leaf_product(u, t, &[j])?);
                    self.apply(leaf, &w, Side::Transpose)
                }
            }
        }
    }

    /// `P_idx(K ⊙ U)`.
    pub fn marginal(&mut self, u: &ScalingState, idx: usize) -> Result<DVector<f64>> {
        let mut v = self.partial(u, idx)?;
        v.component_mul_assign(u.get(idx));
        Ok(v)
    }

    /// `⟨K, U⟩`, the total mass of the tensor.
    pub fn total_mass(&mut self, u: &ScalingState) -> Result<f64> {
        Ok(self.marginal(u, 0)?.sum())
    }

    /// Bi-marginal projection `P_{i1,i2}(K ⊙ U)`; rows index `i1`.
    pub fn pair(&mut self, u: &ScalingState, i1: usize, i2: usize) -> Result<DMatrix<f64>> {
        self.graph.check_index(i1)?;
        self.graph.check_index(i2)?;
        if i1 == i2 {
            return Err(Error::UnsupportedPair(i1, i2));
        }
        if i1 > i2 {
            return Ok(self.pair(u, i2, i1)?.transpose());
        }
        match self.graph.topology() {
            Topology::Sequential(_) => {
                let mut left = self.forward_iter(u, i1)?;
                left.component_mul_assign(u.get(i1));
                let mut right = self.backward(u, i2)?;
                right.component_mul_assign(u.get(i2));
                let inner: Vec<DVector<f64>> = (i1 + 1..i2).map(|s| u.get(s).clone()).collect();
                self.chain_block(i1, &left, &inner, &right)
            }
            Topology::Central(ks) => {
                if i1 == 0 {
                    let mut left = self.leaf_product(u, 0, &[i2])?;
                    left.component_mul_assign(u.get(0));
                    Ok(scaled_dense(&ks[i2 - 1], &left, u.get(i2)))
                } else {
                    let mut mid = self.leaf_product(u, 0, &[i1, i2])?;
                    mid.component_mul_assign(u.get(0));
                    Ok(leaf_leaf(
                        &ks[i1 - 1],
                        &ks[i2 - 1],
                        u.get(i1),
                        &mid,
                        u.get(i2),
                    ))
                }
            }
            Topology::StarChain { leaves, leaf, .. } => {
                let w = leaves + 1;
                let (t1, j1) = (i1 / w, i1 % w);
                let (t2, j2) = (i2 / w, i2 % w);
                if j1 == 0 && j2 == 0 {
                    let mut left = self.forward_iter(u, t1)?;
                    left.component_mul_assign(&self.chain_weight(u, t1)?);
                    let mut right = self.backward(u, t2)?;
                    right.component_mul_assign(&self.chain_weight(u, t2)?);
                    let mut inner = Vec::new();
                    for s in t1 + 1..t2 {
                        inner.push(self.chain_weight(u, s)?);
                    }
                    self.chain_block(t1, &left, &inner, &right)
                } else if t1 == t2 {
                    let mut mid = self.forward_iter(u, t1)?;
                    mid.component_mul_assign(&self.backward(u, t1)?);
                    if j1 == 0 {
                        mid.component_mul_assign(u.get(i1));
                        mid.component_mul_assign(&self.leaf_product(u, t1, &[j2])?);
                        Ok(scaled_dense(leaf, &mid, u.get(i2)))
                    } else {
                        mid.component_mul_assign(u.get(t1 * w));
                        mid.component_mul_assign(&self.leaf_product(u, t1, &[j1, j2])?);
                        Ok(leaf_leaf(leaf, leaf, u.get(i1), &mid, u.get(i2)))
                    }
                } else {
                    Err(Error::UnsupportedPair(i1, i2))
                }
            }
        }
    }

    /// `diag(left) K_{s+1} diag(inner_0) K_{s+2} ... K_{e} diag(right)` along a chain
    /// starting at node `s`.
    fn chain_block(
        &mut self,
        start: usize,
        left: &DVector<f64>,
        inner: &[DVector<f64>],
        right: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        if inner.is_empty() {
            let k = self.chain_kernel(start);
            self.applies += 1;
            return Ok(scaled_dense(k, left, right));
        }
        // rows: x_i = e_i left_i, pushed through the chain by Kᵀ applies
        let n_end = right.len();
        let mut out = DMatrix::zeros(left.len(), n_end);
        for i in 0..left.len() {
            let mut x = DVector::zeros(left.len());
            x[i] = left[i];
            for (s, w) in inner.iter().enumerate() {
                let k = self.chain_kernel(start + s);
                x = self.apply(k, &x, Side::Transpose)?;
                x.component_mul_assign(w);
            }
            let k = self.chain_kernel(start + inner.len());
            x = self.apply(k, &x, Side::Transpose)?;
            x.component_mul_assign(right);
            out.set_row(i, &x.transpose());
        }
        Ok(out)
    }
}

/// `diag(a) K diag(b)`.
fn scaled_dense(k: &KernelOperator, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut m = k.to_dense();
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.component_mul_assign(a);
        col *= b[j];
    }
    m
}

/// `diag(a) K1ᵀ diag(mid) K2 diag(b)`.
fn leaf_leaf(
    k1: &KernelOperator,
    k2: &KernelOperator,
    a: &DVector<f64>,
    mid: &DVector<f64>,
    b: &DVector<f64>,
) -> DMatrix<f64> {
    let left = scaled_dense(k1, mid, a).transpose();
    let right = scaled_dense(k2, &DVector::from_element(mid.len(), 1.0), b);
    left * right
}

/// `P_idx(K ⊙ U)` computed from scratch.
pub fn project_marginal(graph: &CostGraph, u: &ScalingState, idx: usize) -> Result<DVector<f64>> {
    u.validate(graph)?;
    Projector::new(graph).marginal(u, idx)
}

/// `P_{idx1,idx2}(K ⊙ U)` computed from scratch; rows index `idx1`.
pub fn project_pair(
    graph: &CostGraph,
    u: &ScalingState,
    idx1: usize,
    idx2: usize,
) -> Result<DMatrix<f64>> {
    u.validate(graph)?;
    Projector::new(graph).pair(u, idx1, idx2)
}

/// `⟨C, K ⊙ U⟩` summed block by block over the graph's edges.
pub fn transport_cost(graph: &CostGraph, u: &ScalingState) -> Result<f64> {
    u.validate(graph)?;
    let mut proj = Projector::new(graph);
    let mut total = 0.0;
    for e in graph.edges() {
        let plan = proj.pair(u, e.from, e.to)?;
        total += e.kernel.cost_dense().component_mul(&plan).sum();
    }
    Ok(total)
}

/// Entropy `Σ (m log m - m + 1)` of a nonnegative array, with `0 log 0 = 0`.
pub fn entropy(m: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &x in m {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeMass(x));
        }
        total += if x > 0.0 { x * x.ln() - x + 1.0 } else { 1.0 };
    }
    Ok(total)
}

/// Entropy of the factored plan `K ⊙ U` without materializing it.
///
/// Uses `log M = log K + Σ_t log u_t`, so it is exact only while no kernel
/// entry has been floored against underflow.
pub fn plan_entropy(graph: &CostGraph, u: &ScalingState) -> Result<f64> {
    u.validate(graph)?;
    let mut proj = Projector::new(graph);
    let mut m_log_m = 0.0;
    for e in graph.edges() {
        let plan = proj.pair(u, e.from, e.to)?;
        let eps = e.kernel.epsilon();
        let shift = e.kernel.cost_shift();
        let cost = e.kernel.cost_dense();
        m_log_m -= cost.zip_map(&plan, |c, m| (c - shift) * m).sum() / eps;
    }
    let mut mass = 0.0;
    for t in 0..graph.marginal_count() {
        let p = proj.marginal(u, t)?;
        if t == 0 {
            mass = p.sum();
        }
        m_log_m += p.dot(&u.get(t).map(f64::ln));
    }
    Ok(m_log_m - mass + graph.tensor_size())
}
