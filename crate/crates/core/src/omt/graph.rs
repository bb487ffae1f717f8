use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernel::KernelOperator;

/// How the multi-marginal cost tensor decouples into bi-marginal blocks.
#[derive(Clone, Debug)]
pub enum Topology {
    /// Chain `0 - 1 - ... - T`; kernel `t - 1` couples marginals `t - 1` and `t`
    /// (rows index marginal `t - 1`).
    Sequential(Vec<Arc<KernelOperator>>),
    /// Star with center `0`; kernel `j - 1` couples the center (rows) with leaf `j`.
    Central(Vec<Arc<KernelOperator>>),
    /// Chain of centers `(t, 0)`, each with `leaves` leaves `(t, j)`.
    /// Marginal `(t, j)` has flat index `t * (leaves + 1) + j`.
    StarChain {
        steps: usize,
        leaves: usize,
        chain: Arc<KernelOperator>,
        leaf: Arc<KernelOperator>,
    },
}

/// A decoupled cost graph together with the size of every marginal.
#[derive(Clone, Debug)]
pub struct CostGraph {
    topology: Topology,
    sizes: Vec<usize>,
}

/// One bi-marginal block of the cost: kernel rows index `from`, columns `to`.
#[derive(Clone, Copy, Debug)]
pub struct Edge<'a> {
    pub from: usize,
    pub to: usize,
    pub kernel: &'a KernelOperator,
}

impl CostGraph {
    /// Chain of `steps + 1` marginals sharing one square kernel.
    pub fn sequential(kernel: Arc<KernelOperator>, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Self::single(kernel.nrows());
        }
        Self::sequential_with(vec![kernel; steps])
    }

    /// Chain with a distinct kernel per step.
    pub fn sequential_with(kernels: Vec<Arc<KernelOperator>>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::DimensionMismatch(
                "chain needs at least one kernel".into(),
            ));
        }
        let mut sizes = vec![kernels[0].nrows()];
        for (t, k) in kernels.iter().enumerate() {
            if k.nrows() != sizes[t] {
                return Err(Error::DimensionMismatch(format!(
                    "kernel {t} has {} rows but marginal {t} has {} points",
                    k.nrows(),
                    sizes[t]
                )));
            }
            sizes.push(k.ncols());
        }
        Ok(Self {
            topology: Topology::Sequential(kernels),
            sizes,
        })
    }

    /// A lone marginal with no transport cost.
    pub fn single(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::DimensionMismatch("empty marginal".into()));
        }
        Ok(Self {
            topology: Topology::Sequential(Vec::new()),
            sizes: vec![size],
        })
    }

    /// Barycenter star with `leaves` leaves sharing one kernel.
    pub fn central(kernel: Arc<KernelOperator>, leaves: usize) -> Result<Self> {
        Self::central_with(vec![kernel; leaves])
    }

    /// Barycenter star with per-leaf kernels (e.g. weighted costs).
    pub fn central_with(kernels: Vec<Arc<KernelOperator>>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::DimensionMismatch(
                "star needs at least one leaf".into(),
            ));
        }
        let n0 = kernels[0].nrows();
        let mut sizes = vec![n0];
        for (j, k) in kernels.iter().enumerate() {
            if k.nrows() != n0 {
                return Err(Error::DimensionMismatch(format!(
                    "leaf kernel {} has {} rows, center has {n0} points",
                    j + 1,
                    k.nrows()
                )));
            }
            sizes.push(k.ncols());
        }
        Ok(Self {
            topology: Topology::Central(kernels),
            sizes,
        })
    }

    /// Barycenter tracking: `steps + 1` centers chained by `chain`, each with
    /// `leaves` leaves attached through `leaf`. Any leaf weight must already
    /// be folded into the leaf kernel's cost.
    pub fn star_chain(
        steps: usize,
        leaves: usize,
        chain: Arc<KernelOperator>,
        leaf: Arc<KernelOperator>,
    ) -> Result<Self> {
        if chain.nrows() != chain.ncols() {
            return Err(Error::DimensionMismatch(
                "chain kernel must be square".into(),
            ));
        }
        if leaf.nrows() != chain.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "leaf kernel has {} rows, chain grid has {} points",
                leaf.nrows(),
                chain.nrows()
            )));
        }
        if leaves == 0 {
            return Err(Error::DimensionMismatch(
                "star chain needs at least one leaf".into(),
            ));
        }
        let mut sizes = Vec::with_capacity((steps + 1) * (leaves + 1));
        for _ in 0..=steps {
            sizes.push(chain.nrows());
            sizes.extend(std::iter::repeat_n(leaf.ncols(), leaves));
        }
        Ok(Self {
            topology: Topology::StarChain {
                steps,
                leaves,
                chain,
                leaf,
            },
            sizes,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn marginal_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn marginal_size(&self, idx: usize) -> Result<usize> {
        self.check_index(idx)?;
        Ok(self.sizes[idx])
    }

    pub(crate) fn check_index(&self, idx: usize) -> Result<()> {
        if idx < self.sizes.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: idx,
                count: self.sizes.len(),
            })
        }
    }

    /// Flat index of StarChain marginal `(t, j)`; `None` for other topologies
    /// or out-of-range pairs.
    pub fn star_index(&self, t: usize, j: usize) -> Option<usize> {
        match &self.topology {
            Topology::StarChain { steps, leaves, .. } if t <= *steps && j <= *leaves => {
                Some(t * (leaves + 1) + j)
            }
            _ => None,
        }
    }

    /// `(t, j)` of a StarChain flat index.
    pub fn star_position(&self, idx: usize) -> Option<(usize, usize)> {
        match &self.topology {
            Topology::StarChain { leaves, .. } if idx < self.sizes.len() => {
                Some((idx / (leaves + 1), idx % (leaves + 1)))
            }
            _ => None,
        }
    }

    /// Every bi-marginal cost block.
    pub fn edges(&self) -> Vec<Edge<'_>> {
        match &self.topology {
            Topology::Sequential(ks) => ks
                .iter()
                .enumerate()
                .map(|(t, k)| Edge {
                    from: t,
                    to: t + 1,
                    kernel: k,
                })
                .collect(),
            Topology::Central(ks) => ks
                .iter()
                .enumerate()
                .map(|(j, k)| Edge {
                    from: 0,
                    to: j + 1,
                    kernel: k,
                })
                .collect(),
            Topology::StarChain {
                steps,
                leaves,
                chain,
                leaf,
            } => {
                let w = leaves + 1;
                let mut out = Vec::new();
                for t in 0..=*steps {
                    if t > 0 {
                        out.push(Edge {
                            from: (t - 1) * w,
                            to: t * w,
                            kernel: chain,
                        });
                    }
                    for j in 1..=*leaves {
                        out.push(Edge {
                            from: t * w,
                            to: t * w + j,
                            kernel: leaf,
                        });
                    }
                }
                out
            }
        }
    }

    /// Number of entries of the full transport tensor (as a float; it can be
    /// astronomically large).
    pub fn tensor_size(&self) -> f64 {
        self.sizes.iter().map(|&n| n as f64).product()
    }
}

/// Scaling vectors `u_t`, one per marginal; the transport tensor is
/// `K ⊙ (u_0 ⊗ ... ⊗ u_T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingState {
    u: Vec<DVector<f64>>,
}

impl ScalingState {
    pub fn ones(graph: &CostGraph) -> Self {
        Self {
            u: graph
                .sizes()
                .iter()
                .map(|&n| DVector::from_element(n, 1.0))
                .collect(),
        }
    }

    pub fn new(graph: &CostGraph, u: Vec<DVector<f64>>) -> Result<Self> {
        let s = Self { u };
        s.validate(graph)?;
        Ok(s)
    }

    pub fn validate(&self, graph: &CostGraph) -> Result<()> {
        if self.u.len() != graph.marginal_count() {
            return Err(Error::InvalidState(format!(
                "{} scaling vectors for {} marginals",
                self.u.len(),
                graph.marginal_count()
            )));
        }
        for (t, (u, &n)) in self.u.iter().zip(graph.sizes()).enumerate() {
            if u.len() != n {
                return Err(Error::InvalidState(format!(
                    "scaling vector {t} has length {}, marginal has {n} points",
                    u.len()
                )));
            }
            if u.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::InvalidState(format!(
                    "scaling vector {t} has a nonpositive or non-finite entry"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, idx: usize) -> &DVector<f64> {
        &self.u[idx]
    }

    pub fn set(&mut self, idx: usize, u: DVector<f64>) {
        self.u[idx] = u;
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}
