//! Cost matrices and Gibbs kernels `K = exp(-C / ε)`.
//!
//! A kernel is either a dense matrix or a Kronecker product `K_1 ⊗ ... ⊗ K_N`
//! of per-block factors. Factored kernels are applied one tensor mode at a time,
//! which costs `O(n Σ n_i)` instead of `O(n²)`. Factors may be rectangular, so a
//! block of state axes can map onto a different block of target axes.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector, DVectorView, DVectorViewMut};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Smallest kernel entry, so costs more than about `460 ε` above the minimum
/// are capped there. Kept well above the subnormal range: products of floored
/// entries with ordinary scaling values would otherwise be subnormal, which
/// slows dense applies by an order of magnitude.
pub const KERNEL_FLOOR: f64 = 1e-200;

/// Nonnegative finite cost matrix; entry `(i, j)` is the cost of moving unit
/// mass from source point `i` to target point `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix(DMatrix<f64>);

impl CostMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = m.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidCost(format!(
                "entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.0 * factor)
    }
}

/// Squared Euclidean distance between every pair of grid points.
pub fn squared_distance_cost(src: &Grid, dst: &Grid) -> Result<CostMatrix> {
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source grid is {}-d, target grid is {}-d",
            src.dim(),
            dst.dim()
        )));
    }
    let sp = src.points();
    let dp = dst.points();
    let m = DMatrix::from_fn(sp.len(), dp.len(), |i, j| {
        sp[i]
            .iter()
            .zip(&dp[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    });
    CostMatrix::new(m)
}

/// One Kronecker factor (or the whole kernel, when dense) together with the
/// cost it was built from.
#[derive(Clone, Debug)]
pub struct KernelFactor {
    kernel: DMatrix<f64>,
    cost: DMatrix<f64>,
    shift: f64,
}

impl KernelFactor {
    fn build(cost: &CostMatrix, epsilon: f64, shift_min: bool) -> Self {
        let c = cost.matrix();
        let shift = if shift_min && !c.is_empty() {
            c.min()
        } else {
            0.0
        };
        let kernel = c.map(|x| (-(x - shift) / epsilon).exp().max(KERNEL_FLOOR));
        Self {
            kernel,
            cost: c.clone(),
            shift,
        }
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    /// Constant subtracted from the cost before exponentiation.
    pub fn shift(&self) -> f64 {
        self.shift
    }
}

#[derive(Clone, Debug)]
pub enum KernelKind {
    Dense(KernelFactor),
    Factored(Vec<KernelFactor>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `K v`
    Normal,
    /// `Kᵀ v`
    Transpose,
}

/// The Gibbs kernel of a bi-marginal cost block.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    kind: KernelKind,
    epsilon: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEpsilon(epsilon))
    }
}

/// Builds `K = exp(-C/ε)`.
///
/// When `factored_axes` is given, the cost is assumed to decouple as
/// `C = C_1 ⊕ ... ⊕ C_N` (Kronecker sum over row-major blocks) and the
/// returned kernel is `K_1 ⊗ ... ⊗ K_N`. The decoupling is checked on a
/// deterministic sample of entries of `C` to tolerance `1e-10`.
pub fn build_kernel(
    cost: &CostMatrix,
    epsilon: f64,
    factored_axes: Option<&[CostMatrix]>,
) -> Result<KernelOperator> {
    build_kernel_with(cost, epsilon, factored_axes, false)
}

/// As [`build_kernel`], optionally subtracting `min(C)` from each cost block
/// before exponentiation. Sinkhorn scaling absorbs the constant.
pub fn build_kernel_with(
    cost: &CostMatrix,
    epsilon: f64,
    factored_axes: Option<&[CostMatrix]>,
    shift_min: bool,
) -> Result<KernelOperator> {
    check_epsilon(epsilon)?;
    match factored_axes {
        None => Ok(KernelOperator {
            kind: KernelKind::Dense(KernelFactor::build(cost, epsilon, shift_min)),
            epsilon,
        }),
        Some(axes) => {
            let k = KernelOperator::from_factors(axes, epsilon, shift_min)?;
            if k.nrows() != cost.nrows() || k.ncols() != cost.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "factored kernel is {}x{}, cost is {}x{}",
                    k.nrows(),
                    k.ncols(),
                    cost.nrows(),
                    cost.ncols()
                )));
            }
            for (i, j) in sample_entries(cost.nrows(), cost.ncols(), 257) {
                let full = cost.matrix()[(i, j)];
                let factored = k.cost_entry(i, j);
                if (full - factored).abs() > 1e-10 * (1.0 + full.abs()) {
                    return Err(Error::FactorMismatch {
                        row: i,
                        col: j,
                        full,
                        factored,
                    });
                }
            }
            Ok(k)
        }
    }
}

fn sample_entries(rows: usize, cols: usize, max: usize) -> Vec<(usize, usize)> {
    let total = rows * cols;
    if total <= max {
        return (0..total).map(|k| (k / cols, k % cols)).collect();
    }
    // fixed odd stride walks the whole index range without a generator
    let stride = (total / max) | 1;
    let mut out: Vec<(usize, usize)> = (0..max)
        .map(|s| {
            let k = (s * stride + s * s) % total;
            (k / cols, k % cols)
        })
        .collect();
    out.push((rows - 1, cols - 1));
    out
}

impl KernelOperator {
    /// Dense kernel from a full cost matrix.
    pub fn dense(cost: &CostMatrix, epsilon: f64) -> Result<Self> {
        build_kernel(cost, epsilon, None)
    }

    /// Kronecker-factored kernel `exp(-C_1/ε) ⊗ ... ⊗ exp(-C_N/ε)`.
    pub fn from_factors(costs: &[CostMatrix], epsilon: f64, shift_min: bool) -> Result<Self> {
        check_epsilon(epsilon)?;
        if costs.is_empty() {
            return Err(Error::DimensionMismatch("no kernel factors given".into()));
        }
        let factors = costs
            .iter()
            .map(|c| KernelFactor::build(c, epsilon, shift_min))
            .collect();
        Ok(Self {
            kind: KernelKind::Factored(factors),
            epsilon,
        })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn factors(&self) -> &[KernelFactor] {
        match &self.kind {
            KernelKind::Dense(f) => std::slice::from_ref(f),
            KernelKind::Factored(fs) => fs,
        }
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.kind, KernelKind::Factored(_))
    }

    pub fn nrows(&self) -> usize {
        self.factors().iter().map(|f| f.kernel.nrows()).product()
    }

    pub fn ncols(&self) -> usize {
        self.factors().iter().map(|f| f.kernel.ncols()).product()
    }

    /// Total constant removed from the cost; the true kernel equals this
    /// operator times `exp(-cost_shift / ε)`.
    pub fn cost_shift(&self) -> f64 {
        self.factors().iter().map(|f| f.shift).sum()
    }

    fn split(&self, mut i: usize, mut j: usize) -> Vec<(usize, usize)> {
        let fs = self.factors();
        let mut out = vec![(0, 0); fs.len()];
        for (k, f) in fs.iter().enumerate().rev() {
            out[k] = (i % f.kernel.nrows(), j % f.kernel.ncols());
            i /= f.kernel.nrows();
            j /= f.kernel.ncols();
        }
        out
    }

    /// Kernel entry `K_ij`, as a product of factor entries.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.split(i, j)
            .iter()
            .zip(self.factors())
            .map(|(&(a, b), f)| f.kernel[(a, b)])
            .product()
    }

    /// Cost entry `C_ij`, as a sum of factor costs.
    pub fn cost_entry(&self, i: usize, j: usize) -> f64 {
        self.split(i, j)
            .iter()
            .zip(self.factors())
            .map(|(&(a, b), f)| f.cost[(a, b)])
            .sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.factors().iter().map(|f| f.kernel.min()).product()
    }

    /// Materializes the full kernel. Only sensible for small operators.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.kind {
            KernelKind::Dense(f) => f.kernel.clone(),
            KernelKind::Factored(fs) => fs
                .iter()
                .skip(1)
                .fold(fs[0].kernel.clone(), |acc, f| acc.kronecker(&f.kernel)),
        }
    }

    /// Materializes the full cost matrix.
    pub fn cost_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.cost_entry(i, j))
    }

    /// `K v` or `Kᵀ v`.
    pub fn apply(&self, v: &DVector<f64>, side: Side) -> Result<DVector<f64>> {
        let expected = match side {
            Side::Normal => self.ncols(),
            Side::Transpose => self.nrows(),
        };
        if v.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "kernel expects a vector of length {expected}, got {}",
                v.len()
            )));
        }
        Ok(match &self.kind {
            KernelKind::Dense(f) => match side {
                Side::Normal => &f.kernel * v,
                Side::Transpose => f.kernel.tr_mul(v),
            },
            KernelKind::Factored(fs) => apply_factored(fs, v.as_slice(), side),
        })
    }
}

fn apply_factored(factors: &[KernelFactor], v: &[f64], side: Side) -> DVector<f64> {
    // (in, out) size of each factor for this side
    let io: Vec<(usize, usize)> = factors
        .iter()
        .map(|f| match side {
            Side::Normal => (f.kernel.ncols(), f.kernel.nrows()),
            Side::Transpose => (f.kernel.nrows(), f.kernel.ncols()),
        })
        .collect();
    let mut dims: Vec<usize> = io.iter().map(|d| d.0).collect();
    let mut cur = v.to_vec();
    for (mode, f) in factors.iter().enumerate() {
        let (d_in, d_out) = io[mode];
        let pre: usize = dims[..mode].iter().product();
        let post: usize = dims[mode + 1..].iter().product();
        let mut next = vec![0.0; pre * d_out * post];
        let kt = (side == Side::Normal && post > 1).then(|| f.kernel.transpose());
        for p in 0..pre {
            let src = &cur[p * d_in * post..(p + 1) * d_in * post];
            let dst = &mut next[p * d_out * post..(p + 1) * d_out * post];
            if post == 1 {
                let x = DVectorView::from_slice(src, d_in);
                let mut y = DVectorViewMut::from_slice(dst, d_out);
                match side {
                    Side::Normal => y.gemv(1.0, &f.kernel, &x, 0.0),
                    Side::Transpose => y.gemv_tr(1.0, &f.kernel, &x, 0.0),
                }
            } else {
                // the block is a column-major (post x d_in) matrix
                let x = DMatrixView::from_slice(src, post, d_in);
                let mut y = DMatrixViewMut::from_slice(dst, post, d_out);
                match &kt {
                    Some(kt) => y.gemm(1.0, &x, kt, 0.0),
                    None => y.gemm(1.0, &x, &f.kernel, 0.0),
                }
            }
        }
        dims[mode] = d_out;
        cur = next;
    }
    DVector::from_vec(cur)
}
