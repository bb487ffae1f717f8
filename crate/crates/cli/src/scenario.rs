//! Builds the transport problem for a configured scenario.

use std::sync::Arc;

use momt_core::dynamics::{lq_cost, push_forward_matrix, LinearSystem, PushForward};
use momt_core::grid::{Axis, Grid};
use momt_core::kernel::{squared_distance_cost, CostMatrix, KernelOperator};
use momt_core::omt::CostGraph;
use momt_core::partial::MeasurementConstraint;
use momt_core::spectral::{
    gamma_matrix, sample_covariance, simulate_snapshots, CovarianceMeasurement, SensorArray, Source,
};
use nalgebra::DVector;

use crate::config::{Config, CostModel, ScenarioKind};

/// What a marginal of the graph represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Spectrum on the state grid at observation time `t` (a tracked
    /// marginal or an unobserved barycenter).
    State { t: usize },
    /// Spectrum on the spatial grid seen by array `j` at time `t`.
    Observed { t: usize, j: usize },
}

pub struct Scenario {
    pub config: Config,
    pub spatial: Grid,
    /// Equal to `spatial` for the static cost.
    pub state: Grid,
    /// Motion model of the chain cost; the stationary system for static costs.
    pub system: LinearSystem,
    /// State grid onto spatial grid; `None` when they coincide.
    pub push: Option<PushForward>,
    pub graph: CostGraph,
    pub roles: Vec<Role>,
    pub nominal_arrays: Vec<SensorArray>,
    pub true_arrays: Vec<SensorArray>,
    /// Source positions at each observation time.
    pub truth: Vec<Vec<Vec<f64>>>,
    /// Covariance per (time, array).
    pub measurements: Vec<Vec<CovarianceMeasurement>>,
    pub constraints: Vec<Option<MeasurementConstraint>>,
}

/// Position of a source at observation time `t` of `times`.
pub fn source_position(waypoints: &[Vec<f64>], t: usize, times: usize) -> Vec<f64> {
    if waypoints.len() == 1 || times == 1 {
        return waypoints[0].clone();
    }
    let s = t as f64 / (times - 1) as f64 * (waypoints.len() - 1) as f64;
    let k = (s.floor() as usize).min(waypoints.len() - 2);
    let w = s - k as f64;
    waypoints[k]
        .iter()
        .zip(&waypoints[k + 1])
        .map(|(a, b)| (1.0 - w) * a + w * b)
        .collect()
}

/// Per-time seed so each observation draws independent data.
fn time_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((t as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn axis_grid(a: &Axis) -> Grid {
    Grid::new(vec![*a]).expect("validated axis")
}

/// State grid ordered `(x_1, v_1, x_2, v_2, ...)`.
fn dynamic_state_grid(spatial: &[Axis], velocity: &[Axis]) -> Grid {
    let axes = spatial
        .iter()
        .zip(velocity)
        .flat_map(|(x, v)| [*x, *v])
        .collect();
    Grid::new(axes).expect("validated axes")
}

/// Builds every piece of the scenario, simulating the measurements.
pub fn build(config: &Config) -> momt_core::Result<Scenario> {
    let spatial = config.spatial_grid();
    let d = config.spatial_dims();
    let eps = config.epsilon;

    let (state, system, push, chain) = match config.cost {
        CostModel::Static => {
            let factors: Vec<CostMatrix> = config
                .grid
                .spatial
                .iter()
                .map(|a| squared_distance_cost(&axis_grid(a), &axis_grid(a)))
                .collect::<momt_core::Result<_>>()?;
            let k = KernelOperator::from_factors(&factors, eps, false)?;
            (spatial.clone(), LinearSystem::stationary(d), None, k)
        }
        CostModel::Dynamic => {
            let vel = config.grid.velocity.as_ref().expect("validated");
            let state = dynamic_state_grid(&config.grid.spatial, vel);
            let block_sys = LinearSystem::constant_velocity(1);
            let factors: Vec<CostMatrix> = config
                .grid
                .spatial
                .iter()
                .zip(vel)
                .map(|(x, v)| {
                    let g = Grid::new(vec![*x, *v])?;
                    lq_cost(&block_sys, &g, &g)
                })
                .collect::<momt_core::Result<_>>()?;
            let k = KernelOperator::from_factors(&factors, eps, false)?;
            let sys = LinearSystem::constant_velocity(d);
            let push = push_forward_matrix(&sys, &state, &spatial)?;
            (state, sys, Some(push), k)
        }
    };

    // cost from a state cell to a spatial cell: alpha |F x - y|², factored per axis
    let leaf_kernel = || -> momt_core::Result<KernelOperator> {
        let factors: Vec<CostMatrix> = match config.cost {
            CostModel::Static => config
                .grid
                .spatial
                .iter()
                .map(|a| squared_distance_cost(&axis_grid(a), &axis_grid(a))?.scaled(config.alpha))
                .collect::<momt_core::Result<_>>()?,
            CostModel::Dynamic => {
                let vel = config.grid.velocity.as_ref().expect("validated");
                config
                    .grid
                    .spatial
                    .iter()
                    .zip(vel)
                    .map(|(x, v)| {
                        let block = Grid::new(vec![*x, *v])?;
                        let xs = x.coords();
                        let m = nalgebra::DMatrix::from_fn(block.len(), x.count, |i, j| {
                            let p = block.point(i)[0];
                            config.alpha * (p - xs[j]) * (p - xs[j])
                        });
                        CostMatrix::new(m)
                    })
                    .collect::<momt_core::Result<_>>()?
            }
        };
        KernelOperator::from_factors(&factors, eps, false)
    };

    let times = config.times;
    let j_count = config.arrays.len();
    let (graph, roles) = match config.kind {
        ScenarioKind::Tracking => {
            let g = CostGraph::sequential(Arc::new(chain), times - 1)?;
            (g, (0..times).map(|t| Role::State { t }).collect::<Vec<_>>())
        }
        ScenarioKind::Fusion => {
            let g = CostGraph::central(Arc::new(leaf_kernel()?), j_count)?;
            let mut roles = vec![Role::State { t: 0 }];
            roles.extend((0..j_count).map(|j| Role::Observed { t: 0, j }));
            (g, roles)
        }
        ScenarioKind::BarycenterTracking => {
            let g = CostGraph::star_chain(
                times - 1,
                j_count,
                Arc::new(chain),
                Arc::new(leaf_kernel()?),
            )?;
            let mut roles = Vec::new();
            for t in 0..times {
                roles.push(Role::State { t });
                roles.extend((0..j_count).map(|j| Role::Observed { t, j }));
            }
            (g, roles)
        }
    };

    let nominal_arrays = config
        .arrays
        .iter()
        .map(|a| config.nominal_array(a))
        .collect::<momt_core::Result<Vec<_>>>()?;
    let true_arrays = nominal_arrays
        .iter()
        .zip(&config.arrays)
        .map(|(arr, a)| {
            if a.rotation_deg == 0.0 {
                Ok(arr.clone())
            } else {
                arr.rotated(a.rotation_deg)
            }
        })
        .collect::<momt_core::Result<Vec<_>>>()?;

    let truth: Vec<Vec<Vec<f64>>> = (0..times)
        .map(|t| {
            config
                .sources
                .iter()
                .map(|s| source_position(&s.waypoints, t, times))
                .collect()
        })
        .collect();

    let mut measurements = Vec::with_capacity(times);
    for (t, positions) in truth.iter().enumerate() {
        let sources: Vec<Source> = positions
            .iter()
            .zip(&config.sources)
            .map(|(p, s)| Source {
                position: p.clone(),
                power: s.power,
            })
            .collect();
        let y = simulate_snapshots(
            &true_arrays,
            &sources,
            config.snr_db,
            config.snapshots,
            time_seed(config.seed, t),
        )?;
        measurements.push(
            y.iter()
                .map(sample_covariance)
                .collect::<momt_core::Result<Vec<_>>>()?,
        );
    }

    // observation operators of the nominal arrays
    let obs_ops = nominal_arrays
        .iter()
        .map(|a| gamma_matrix(a, &spatial, None))
        .collect::<momt_core::Result<Vec<_>>>()?;
    let state_ops = match (&push, config.kind) {
        (Some(p), ScenarioKind::Tracking) => Some(
            nominal_arrays
                .iter()
                .map(|a| gamma_matrix(a, &spatial, Some(p)))
                .collect::<momt_core::Result<Vec<_>>>()?,
        ),
        _ => None,
    };

    let mut k = 0;
    let mut constraints = Vec::with_capacity(roles.len());
    for role in &roles {
        let c = match (config.kind, *role) {
            (ScenarioKind::Tracking, Role::State { t }) => {
                let g = match &state_ops {
                    Some(ops) => ops[0].clone(),
                    None => obs_ops[0].clone(),
                };
                Some((g, measurements[t][0].stacked.clone()))
            }
            (_, Role::Observed { t, j }) => {
                Some((obs_ops[j].clone(), measurements[t][j].stacked.clone()))
            }
            _ => None,
        };
        constraints.push(match c {
            Some((g, r)) => {
                let gamma = config.gammas.as_ref().map_or(config.gamma, |gs| gs[k]);
                k += 1;
                Some(MeasurementConstraint::dense(g, r, gamma)?)
            }
            None => None,
        });
    }

    Ok(Scenario {
        config: config.clone(),
        spatial,
        state,
        system,
        push,
        graph,
        roles,
        nominal_arrays,
        true_arrays,
        truth,
        measurements,
        constraints,
    })
}

impl Scenario {
    /// Spatial spectrum of a marginal: the push-forward of state marginals,
    /// the marginal itself otherwise.
    pub fn spatial_spectrum(&self, idx: usize, marginal: &DVector<f64>) -> DVector<f64> {
        match (self.roles[idx], &self.push) {
            (Role::State { .. }, Some(p)) => p.apply(marginal),
            _ => marginal.clone(),
        }
    }

    /// Marginal index of the state spectrum at time `t`.
    pub fn state_index(&self, t: usize) -> usize {
        self.roles
            .iter()
            .position(|r| *r == Role::State { t })
            .expect("every time has a state marginal")
    }

    /// Grid a marginal lives on.
    pub fn grid_of(&self, idx: usize) -> &Grid {
        match self.roles[idx] {
            Role::State { .. } => &self.state,
            Role::Observed { .. } => &self.spatial,
        }
    }
}
