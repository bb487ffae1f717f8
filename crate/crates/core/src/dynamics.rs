//! Linear state-space transport costs.
//!
//! For a time-invariant system `ẋ = A x + B u`, `y = F x`, the cost of moving
//! unit mass from `x0` at time 0 to `x1` at time 1 is the minimum control
//! energy `(x1 - e^A x0)ᵀ W⁻¹ (x1 - e^A x0)`, with `W` the controllability
//! Gramian over `[0, 1]`. Mass moves along the corresponding minimum-energy
//! trajectories, which gives displacement interpolation between marginals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::CostMatrix;

/// Gramians with condition number at or above this are treated as singular.
pub const MAX_GRAMIAN_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    f: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "drift matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "input matrix has {} rows, state dimension is {d}",
                b.nrows()
            )));
        }
        if f.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "observation matrix has {} columns, state dimension is {d}",
                f.ncols()
            )));
        }
        Ok(Self { a, b, f })
    }

    /// `A = 0`, `B = I`, `F = I`: the lq cost is the squared Euclidean distance.
    pub fn stationary(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim, dim),
            b: DMatrix::identity(dim, dim),
            f: DMatrix::identity(dim, dim),
        }
    }

    /// Double integrator per spatial coordinate, state ordered
    /// `(p_1, v_1, p_2, v_2, ...)`, observing positions only.
    pub fn constant_velocity(spatial_dims: usize) -> Self {
        let d = 2 * spatial_dims;
        let mut a = DMatrix::zeros(d, d);
        let mut b = DMatrix::zeros(d, spatial_dims);
        let mut f = DMatrix::zeros(spatial_dims, d);
        for k in 0..spatial_dims {
            a[(2 * k, 2 * k + 1)] = 1.0;
            b[(2 * k + 1, k)] = 1.0;
            f[(k, 2 * k)] = 1.0;
        }
        Self { a, b, f }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.f.nrows()
    }

    /// `expm(A dt)`.
    pub fn state_transition(&self, dt: f64) -> DMatrix<f64> {
        (&self.a * dt).exp()
    }

    /// Controllability Gramian `W(t, s)`.
    pub fn controllability_gramian(&self, s: f64, t: f64) -> Result<Gramian> {
        if !(s < t) || !s.is_finite() || !t.is_finite() {
            return Err(Error::InvalidHorizon { start: s, end: t });
        }
        Ok(Gramian(self.gramian_over(t - s)))
    }

    // Van Loan: expm([[-A, BBᵀ], [0, Aᵀ]] h) = [[·, E12], [0, E22]],
    // W(h) = E22ᵀ E12.
    fn gramian_over(&self, h: f64) -> DMatrix<f64> {
        let d = self.state_dim();
        if h == 0.0 {
            return DMatrix::zeros(d, d);
        }
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&(-&self.a));
        m.view_mut((0, d), (d, d))
            .copy_from(&(&self.b * self.b.transpose()));
        m.view_mut((d, d), (d, d)).copy_from(&self.a.transpose());
        let e = (m * h).exp();
        let e12 = e.view((0, d), (d, d));
        let e22 = e.view((d, d), (d, d));
        let w = e22.transpose() * e12;
        (&w + w.transpose()) * 0.5
    }
}

/// Symmetric positive-semidefinite controllability Gramian.
#[derive(Clone, Debug, PartialEq)]
pub struct Gramian(pub DMatrix<f64>);

impl Gramian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

fn invert_gramian(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = w.nrows();
    let eig = SymmetricEigen::new(w.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_GRAMIAN_CONDITION) {
        let rank = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > max.abs() / MAX_GRAMIAN_CONDITION)
            .count();
        return Err(Error::Uncontrollable {
            rank,
            dim: d,
            condition,
        });
    }
    let chol = w.clone().cholesky().ok_or(Error::Uncontrollable {
        rank: d,
        dim: d,
        condition,
    })?;
    Ok(chol.inverse())
}

/// Minimum-energy transport cost over the unit horizon, with the Gramian
/// inverse factored once.
#[derive(Clone, Debug)]
pub struct LqCost {
    transition: DMatrix<f64>,
    gramian_inv: DMatrix<f64>,
}

impl LqCost {
    pub fn new(sys: &LinearSystem) -> Result<Self> {
        let w = sys.controllability_gramian(0.0, 1.0)?;
        Ok(Self {
            transition: sys.state_transition(1.0),
            gramian_inv: invert_gramian(w.matrix())?,
        })
    }

    pub fn cost(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> f64 {
        let r = x1 - &self.transition * x0;
        r.dot(&(&self.gramian_inv * &r))
    }

    pub fn gramian_inverse(&self) -> &DMatrix<f64> {
        &self.gramian_inv
    }
}

/// Cost matrix of the minimum-energy control problem between grid points.
pub fn lq_cost(sys: &LinearSystem, src: &Grid, dst: &Grid) -> Result<CostMatrix> {
    let d = sys.state_dim();
    if src.dim() != d || dst.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "grids are {}-d and {}-d, system state is {d}-d",
            src.dim(),
            dst.dim()
        )));
    }
    let lq = LqCost::new(sys)?;
    let moved: Vec<DVector<f64>> = src
        .points()
        .into_iter()
        .map(|p| &lq.transition * DVector::from_vec(p))
        .collect();
    let targets: Vec<DVector<f64>> = dst.points().into_iter().map(DVector::from_vec).collect();
    let m = DMatrix::from_fn(src.len(), dst.len(), |i, j| {
        let r = &targets[j] - &moved[i];
        r.dot(&(&lq.gramian_inv * &r)).max(0.0)
    });
    CostMatrix::new(m)
}

/// The affine map `(x0, x1) ↦ x̂(τ; x0, x1) = L x0 + R x1`.
#[derive(Clone, Debug)]
pub struct TrajectoryMap {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl TrajectoryMap {
    pub fn new(sys: &LinearSystem, tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidTau(tau));
        }
        let d = sys.state_dim();
        let w_inv = invert_gramian(&sys.gramian_over(1.0))?;
        if tau > 1.0 {
            // unforced extrapolation from x1
            return Ok(Self {
                left: DMatrix::zeros(d, d),
                right: sys.state_transition(tau - 1.0),
            });
        }
        let left = sys.state_transition(tau - 1.0)
            * sys.gramian_over(1.0 - tau)
            * &w_inv
            * sys.state_transition(1.0);
        let right = sys.gramian_over(tau) * sys.state_transition(1.0 - tau).transpose() * &w_inv;
        Ok(Self { left, right })
    }

    pub fn at(&self, x0: &DVector<f64>, x1: &DVector<f64>) -> DVector<f64> {
        &self.left * x0 + &self.right * x1
    }
}

/// State at time `tau` on the minimum-energy path from `x0` (time 0) to `x1`
/// (time 1). For `tau > 1` the system evolves unforced from `x1`.
pub fn optimal_trajectory(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    x1: &DVector<f64>,
    tau: f64,
) -> Result<DVector<f64>> {
    Ok(TrajectoryMap::new(sys, tau)?.at(x0, x1))
}

/// Space onto which interpolated mass is binned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolationSpace {
    /// Bin the state `x̂(τ)` on a state grid.
    State,
    /// Bin the observed state `F x̂(τ)` on an observation grid.
    Observed,
}

#[derive(Clone, Debug)]
pub struct Interpolation {
    pub mass: DVector<f64>,
    /// Mass whose trajectory point fell outside the output grid.
    pub out_of_domain: f64,
}

/// Displacement interpolation of a bi-marginal plan at time `tau`.
///
/// Each entry `plan[(i, j)]` is deposited at `x̂(τ; src_i, dst_j)` (or its
/// observation) with multilinear splatting onto `out`.
pub fn interpolate_plan(
    plan: &DMatrix<f64>,
    src: &Grid,
    dst: &Grid,
    sys: &LinearSystem,
    tau: f64,
    out: &Grid,
    space: InterpolationSpace,
) -> Result<Interpolation> {
    if plan.nrows() != src.len() || plan.ncols() != dst.len() {
        return Err(Error::DimensionMismatch(format!(
            "plan is {}x{}, grids have {} and {} points",
            plan.nrows(),
            plan.ncols(),
            src.len(),
            dst.len()
        )));
    }
    let d = sys.state_dim();
    if src.dim() != d || dst.dim() != d {
        return Err(Error::DimensionMismatch(
            "plan grids must live in the system state space".into(),
        ));
    }
    let map = TrajectoryMap::new(sys, tau)?;
    let (left, right) = match space {
        InterpolationSpace::State => (map.left, map.right),
        InterpolationSpace::Observed => (sys.f() * &map.left, sys.f() * &map.right),
    };
    if out.dim() != left.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "output grid is {}-d, interpolated points are {}-d",
            out.dim(),
            left.nrows()
        )));
    }
    let a: Vec<DVector<f64>> = src
        .points()
        .into_iter()
        .map(|p| &left * DVector::from_vec(p))
        .collect();
    let b: Vec<DVector<f64>> = dst
        .points()
        .into_iter()
        .map(|p| &right * DVector::from_vec(p))
        .collect();
    let mut mass = DVector::zeros(out.len());
    let mut outside = 0.0;
    let mut x = DVector::zeros(out.dim());
    for j in 0..plan.ncols() {
        for i in 0..plan.nrows() {
            let m = plan[(i, j)];
            if m < 0.0 {
                return Err(Error::NegativeMass(m));
            }
            if m == 0.0 {
                continue;
            }
            x.copy_from(&a[i]);
            x += &b[j];
            match out.splat_weights(x.as_slice(), 1e-9) {
                Some(ws) => {
                    for (k, w) in ws {
                        mass[k] += m * w;
                    }
                }
                None => outside += m,
            }
        }
    }
    Ok(Interpolation {
        mass,
        out_of_domain: outside,
    })
}

/// Column-stochastic sparse matrix mapping a spectrum on the state grid to
/// its push-forward under `F` on the observation grid.
#[derive(Clone, Debug)]
pub struct PushForward {
    rows: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl PushForward {
    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn apply(&self, phi: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows);
        for (col, &x) in self.columns.iter().zip(phi.iter()) {
            for &(r, w) in col {
                out[r] += w * x;
            }
        }
        out
    }

    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.columns.len(),
            self.columns
                .iter()
                .map(|col| col.iter().map(|&(r, w)| w * y[r]).sum::<f64>()),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            for &(r, w) in col {
                m[(r, j)] += w;
            }
        }
        m
    }
}

/// Discretized push-forward `F_#` from `full` (state grid) to `obs`.
pub fn push_forward_matrix(sys: &LinearSystem, full: &Grid, obs: &Grid) -> Result<PushForward> {
    if full.dim() != sys.state_dim() || obs.dim() != sys.obs_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state grid is {}-d and observation grid {}-d, system maps {}-d to {}-d",
            full.dim(),
            obs.dim(),
            sys.state_dim(),
            sys.obs_dim()
        )));
    }
    let mut columns = Vec::with_capacity(full.len());
    let mut offending = Vec::new();
    for j in 0..full.len() {
        let y = sys.f() * DVector::from_vec(full.point(j));
        match obs.splat_weights(y.as_slice(), 1e-9) {
            Some(ws) => columns.push(ws),
            None => {
                offending.push(y.as_slice().to_vec());
                columns.push(Vec::new());
            }
        }
    }
    if !offending.is_empty() {
        return Err(Error::OutsideObservationGrid(offending));
    }
    Ok(PushForward {
        rows: obs.len(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::squared_distance_cost;
    use approx::assert_relative_eq;

    fn example_system() -> LinearSystem {
        LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]),
            DMatrix::from_row_slice(2, 1, &[0., 1.]),
            DMatrix::from_row_slice(1, 2, &[1., 0.]),
        )
        .unwrap()
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        assert!(LinearSystem::new(
            DMatrix::zeros(2, 3),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2)
        )
        .is_err());
        assert!(LinearSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2)
        )
        .is_err());
        assert!(LinearSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 3)
        )
        .is_err());
    }

    #[test]
    fn zero_drift_transition_is_identity() {
        let sys = LinearSystem::stationary(3);
        assert_eq!(sys.state_transition(2.5), DMatrix::identity(3, 3));
    }

    #[test]
    fn double_integrator_constants() {
        let sys = example_system();
        let phi = sys.state_transition(1.0);
        assert_relative_eq!(
            phi,
            DMatrix::from_row_slice(2, 2, &[1., 1., 0., 1.]),
            epsilon = 1e-12
        );
        let w = sys.controllability_gramian(0.0, 1.0).unwrap();
        assert_relative_eq!(
            w.0,
            DMatrix::from_row_slice(2, 2, &[1. / 3., 0.5, 0.5, 1.]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gramian_requires_ordered_horizon() {
        let sys = example_system();
        assert!(matches!(
            sys.controllability_gramian(1.0, 1.0),
            Err(Error::InvalidHorizon { .. })
        ));
    }

    #[test]
    fn stationary_gramian_is_identity() {
        let w = LinearSystem::stationary(2)
            .controllability_gramian(0.0, 1.0)
            .unwrap();
        assert_relative_eq!(w.0, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn uncontrollable_system_is_reported() {
        // second state is not driven by the input
        let sys = LinearSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[1., 0.]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let g = Grid::from_ranges(&[(0.0, 1.0, 2), (0.0, 1.0, 2)]).unwrap();
        match lq_cost(&sys, &g, &g) {
            Err(Error::Uncontrollable { rank, dim, .. }) => assert_eq!((rank, dim), (1, 2)),
            other => panic!("expected uncontrollable, got {other:?}"),
        }
    }

    #[test]
    fn stationary_lq_cost_is_squared_distance() {
        let g = Grid::from_ranges(&[(-1.0, 1.0, 4), (0.0, 2.0, 3)]).unwrap();
        let a = lq_cost(&LinearSystem::stationary(2), &g, &g).unwrap();
        let b = squared_distance_cost(&g, &g).unwrap();
        assert_relative_eq!(a.matrix(), b.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn lq_cost_of_example() {
        let lq = LqCost::new(&example_system()).unwrap();
        let c = lq.cost(
            &DVector::from_vec(vec![0., 0.]),
            &DVector::from_vec(vec![1., 0.]),
        );
        assert_relative_eq!(c, 12.0, epsilon = 1e-10);
        // free evolution costs nothing
        let x0 = DVector::from_vec(vec![0.3, -0.7]);
        let x1 = DVector::from_vec(vec![0.3 - 0.7, -0.7]);
        assert!(lq.cost(&x0, &x1).abs() < 1e-12);
    }

    #[test]
    fn trajectory_boundary_conditions() {
        let sys = example_system();
        let x0 = DVector::from_vec(vec![0.2, 1.0]);
        let x1 = DVector::from_vec(vec![1.0, -0.5]);
        assert_relative_eq!(
            optimal_trajectory(&sys, &x0, &x1, 0.0).unwrap(),
            x0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            optimal_trajectory(&sys, &x0, &x1, 1.0).unwrap(),
            x1,
            epsilon = 1e-12
        );
        // unforced extrapolation
        let x2 = optimal_trajectory(&sys, &x0, &x1, 2.0).unwrap();
        assert_relative_eq!(x2, DVector::from_vec(vec![0.5, -0.5]), epsilon = 1e-12);
        assert!(optimal_trajectory(&sys, &x0, &x1, -0.1).is_err());
    }

    #[test]
    fn stationary_trajectory_is_linear() {
        let sys = LinearSystem::stationary(2);
        let x0 = DVector::from_vec(vec![0.0, 1.0]);
        let x1 = DVector::from_vec(vec![2.0, -1.0]);
        for tau in [0.1, 0.5, 0.9] {
            let x = optimal_trajectory(&sys, &x0, &x1, tau).unwrap();
            assert_relative_eq!(x, &x0 * (1.0 - tau) + &x1 * tau, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_push_forward() {
        let g = Grid::from_ranges(&[(0.0, 1.0, 3)]).unwrap();
        let p = push_forward_matrix(&LinearSystem::stationary(1), &g, &g).unwrap();
        assert_eq!(p.to_dense(), DMatrix::identity(3, 3));
    }

    #[test]
    fn push_forward_marginalizes_velocity() {
        let sys = example_system();
        let full = Grid::from_ranges(&[(0.0, 1.0, 3), (-1.0, 1.0, 4)]).unwrap();
        let obs = Grid::from_ranges(&[(0.0, 1.0, 3)]).unwrap();
        let p = push_forward_matrix(&sys, &full, &obs).unwrap();
        let phi = DVector::from_fn(12, |i, _| 1.0 + i as f64);
        let y = p.apply(&phi);
        for k in 0..3 {
            let expected: f64 = (0..4).map(|v| phi[full.linear_index(&[k, v])]).sum();
            assert_relative_eq!(y[k], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn push_forward_outside_is_an_error() {
        let sys = example_system();
        let full = Grid::from_ranges(&[(0.0, 2.0, 3), (-1.0, 1.0, 2)]).unwrap();
        let obs = Grid::from_ranges(&[(0.0, 1.0, 3)]).unwrap();
        match push_forward_matrix(&sys, &full, &obs) {
            Err(Error::OutsideObservationGrid(pts)) => assert_eq!(pts.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_mass_splats_around_midpoint() {
        let sys = LinearSystem::stationary(1);
        let g = Grid::from_ranges(&[(0.0, 4.0, 5)]).unwrap();
        let mut plan = DMatrix::zeros(5, 5);
        plan[(0, 3)] = 1.0;
        let out =
            interpolate_plan(&plan, &g, &g, &sys, 0.5, &g, InterpolationSpace::State).unwrap();
        assert_relative_eq!(out.mass[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(out.mass[2], 0.5, epsilon = 1e-12);
        assert_eq!(out.out_of_domain, 0.0);
    }
}
