//! Solving a scenario and post-processing the estimate.

use std::time::Instant;

use momt_core::dynamics::{interpolate_plan, InterpolationSpace};
use momt_core::omt::{project_marginal, project_pair, SolveReport};
use momt_core::partial::{solve, PartialSolution, SolveOptions};
use momt_core::spectral::mvdr_spectrum;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{Config, ScenarioKind};
use crate::peaks::{peak_extract, Peak};
use crate::scenario::{build, Role, Scenario};

/// Dense couplings larger than this are not formed.
pub const MAX_DENSE_PAIR: usize = 25_000_000;

pub struct Outcome {
    pub scenario: Scenario,
    pub solution: PartialSolution,
    /// Estimated marginal for every graph index.
    pub marginals: Vec<DVector<f64>>,
    /// Spatial spectrum of the state marginal at each time.
    pub spatial: Vec<DVector<f64>>,
    pub peaks: Vec<Vec<Peak>>,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Track {
    /// Peak position at each observation time.
    pub points: Vec<Vec<f64>>,
}

pub fn solver_options(cfg: &Config) -> SolveOptions {
    SolveOptions {
        outer_tol: cfg.solver.outer_tol,
        max_sweeps: cfg.solver.max_sweeps,
        inner_tol: cfg.solver.inner_tol,
        max_newton: cfg.solver.max_newton,
        trace_blocks: false,
    }
}

pub fn run(cfg: &Config) -> momt_core::Result<Outcome> {
    let start = Instant::now();
    let scenario = build(cfg)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let solution = solve(
        &scenario.graph,
        &scenario.constraints,
        cfg.epsilon,
        &solver_options(cfg),
    )?;
    let solve_seconds = start.elapsed().as_secs_f64();
    let marginals = (0..scenario.graph.marginal_count())
        .map(|i| project_marginal(&scenario.graph, &solution.scaling, i))
        .collect::<momt_core::Result<Vec<_>>>()?;
    let spatial: Vec<DVector<f64>> = (0..cfg.times)
        .map(|t| {
            let i = scenario.state_index(t);
            scenario.spatial_spectrum(i, &marginals[i])
        })
        .collect();
    let peaks = spatial
        .iter()
        .map(|s| {
            peak_extract(
                s,
                &scenario.spatial,
                cfg.output.peaks,
                cfg.output.min_separation,
            )
        })
        .collect();
    Ok(Outcome {
        scenario,
        solution,
        marginals,
        spatial,
        peaks,
        build_seconds,
        solve_seconds,
    })
}

impl Outcome {
    pub fn report(&self) -> &SolveReport {
        &self.solution.report
    }

    fn state_pair_len(&self) -> usize {
        self.scenario.state.len() * self.scenario.state.len()
    }

    /// Coupling between the spatial spectra at times `t` and `t + 1`.
    pub fn spatial_coupling(&self, t: usize) -> momt_core::Result<Option<DMatrix<f64>>> {
        if self.state_pair_len() > MAX_DENSE_PAIR {
            return Ok(None);
        }
        let sc = &self.scenario;
        let plan = project_pair(
            &sc.graph,
            &self.solution.scaling,
            sc.state_index(t),
            sc.state_index(t + 1),
        )?;
        Ok(Some(match &sc.push {
            None => plan,
            Some(p) => {
                let pd = p.to_dense();
                &pd * plan * pd.transpose()
            }
        }))
    }

    /// Where the mass of a spatial peak is headed one time step later: the
    /// mean of `F Φ x` over state cells observed within `min_separation`
    /// cells of the peak, weighted by the state marginal. Under the static
    /// cost this is just the local mean location.
    pub fn predicted_position(&self, t: usize, peak: &Peak) -> Vec<f64> {
        let sc = &self.scenario;
        let phi = sc.system.state_transition(1.0);
        let f = sc.system.f();
        let fp = f * &phi;
        let m = &self.marginals[sc.state_index(t)];
        let centre = sc.spatial.multi_index(peak.index);
        let r = sc.config.output.min_separation;
        let mut acc = vec![0.0; sc.spatial.dim()];
        let mut total = 0.0;
        for i in 0..sc.state.len() {
            let x = DVector::from_vec(sc.state.point(i));
            let cell = sc
                .spatial
                .multi_index(sc.spatial.nearest((f * &x).as_slice()));
            if cell.iter().zip(&centre).any(|(a, b)| a.abs_diff(*b) > r) {
                continue;
            }
            for (a, y) in acc.iter_mut().zip((&fp * &x).iter()) {
                *a += m[i] * y;
            }
            total += m[i];
        }
        if total > 0.0 {
            acc.iter().map(|a| a / total).collect()
        } else {
            peak.point.clone()
        }
    }

    /// Nearest-peak continuation: every peak is carried one time step by the
    /// motion model (see `predicted_position`) and linked to the closest peak
    /// at the next time.
    pub fn tracks(&self) -> Option<Vec<Track>> {
        let peaks = &self.peaks;
        let k = peaks.first()?.len();
        if k == 0 || peaks.iter().any(|p| p.len() != k) {
            return None;
        }
        let times = self.scenario.config.times;
        let mut order: Vec<Vec<usize>> = vec![(0..k).collect()];
        for t in 0..times - 1 {
            let mut score = DMatrix::zeros(k, k);
            for a in 0..k {
                let pred = self.predicted_position(t, &peaks[t][a]);
                for b in 0..k {
                    score[(a, b)] = -dist(&pred, &peaks[t + 1][b].point);
                }
            }
            order.push(link(&score, order.last().expect("nonempty")));
        }
        Some(
            (0..k)
                .map(|tr| Track {
                    points: (0..times)
                        .map(|t| peaks[t][order[t][tr]].point.clone())
                        .collect(),
                })
                .collect(),
        )
    }

    /// Links spatial peaks across time by following the transport plan:
    /// every spatial cell is attributed to its nearest peak, and peaks at
    /// consecutive times are paired greedily by the mass moved between their cells.
    pub fn coupling_tracks(&self) -> momt_core::Result<Option<Vec<Track>>> {
        let times = self.scenario.config.times;
        let Some(k) = self.peaks.first().map(Vec::len) else {
            return Ok(None);
        };
        if k == 0 || self.peaks.iter().any(|p| p.len() != k) {
            return Ok(None);
        }
        let grid = &self.scenario.spatial;
        let owner = |peaks: &[Peak]| -> Vec<usize> {
            (0..grid.len())
                .map(|i| {
                    let mi = grid.multi_index(i);
                    (0..peaks.len())
                        .min_by_key(|&p| {
                            let mp = grid.multi_index(peaks[p].index);
                            mi.iter()
                                .zip(&mp)
                                .map(|(a, b)| a.abs_diff(*b).pow(2))
                                .sum::<usize>()
                        })
                        .unwrap_or(0)
                })
                .collect()
        };
        let mut order: Vec<Vec<usize>> = vec![(0..k).collect()];
        for t in 0..times.saturating_sub(1) {
            let Some(c) = self.spatial_coupling(t)? else {
                return Ok(None);
            };
            let (oa, ob) = (owner(&self.peaks[t]), owner(&self.peaks[t + 1]));
            let mut flow = DMatrix::zeros(k, k);
            for i in 0..c.nrows() {
                for j in 0..c.ncols() {
                    flow[(oa[i], ob[j])] += c[(i, j)];
                }
            }
            order.push(link(&flow, order.last().expect("nonempty")));
        }
        Ok(Some(
            (0..k)
                .map(|tr| Track {
                    points: (0..times)
                        .map(|t| self.peaks[t][order[t][tr]].point.clone())
                        .collect(),
                })
                .collect(),
        ))
    }

    /// Interpolated spatial spectra between times `t` and `t + 1` at
    /// `tau = 1/(n+1), ..., n/(n+1)`.
    pub fn interpolations(
        &self,
        t: usize,
        n: usize,
    ) -> momt_core::Result<Option<Vec<(f64, DVector<f64>, f64)>>> {
        if self.state_pair_len() > MAX_DENSE_PAIR {
            return Ok(None);
        }
        let sc = &self.scenario;
        let plan = project_pair(
            &sc.graph,
            &self.solution.scaling,
            sc.state_index(t),
            sc.state_index(t + 1),
        )?;
        let mut out = Vec::with_capacity(n);
        for s in 1..=n {
            let tau = s as f64 / (n + 1) as f64;
            let it = interpolate_plan(
                &plan,
                &sc.state,
                &sc.state,
                &sc.system,
                tau,
                &sc.spatial,
                InterpolationSpace::Observed,
            )?;
            out.push((t as f64 + tau, it.mass, it.out_of_domain));
        }
        Ok(Some(out))
    }

    /// Capon spectra per time and array, on the spatial grid with the nominal geometry.
    pub fn mvdr(&self) -> momt_core::Result<Vec<Vec<DVector<f64>>>> {
        let sc = &self.scenario;
        sc.measurements
            .iter()
            .map(|per_t| {
                per_t
                    .iter()
                    .zip(&sc.nominal_arrays)
                    .map(|(m, a)| mvdr_spectrum(&m.matrix, a, &sc.spatial, None))
                    .collect()
            })
            .collect()
    }

    /// Residual `‖G Φ - r + λ/(2γ)‖∞` of each constrained marginal.
    pub fn constraint_residuals(&self) -> Vec<Option<f64>> {
        self.scenario
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let c = c.as_ref()?;
                let l = self.solution.dual.lambda[i].as_ref()?;
                let r =
                    c.observation().apply(&self.marginals[i]) + l * c.penalty_slope() - c.data();
                Some(r.amax())
            })
            .collect()
    }

    /// Distance from each true source to the nearest reported peak, per time.
    pub fn peak_errors(&self) -> Vec<Vec<f64>> {
        self.scenario
            .truth
            .iter()
            .zip(&self.peaks)
            .map(|(truth, peaks)| {
                truth
                    .iter()
                    .map(|x| {
                        peaks
                            .iter()
                            .map(|p| dist(&p.point, x))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn leaf_roles(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.scenario
            .roles
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match *r {
                Role::Observed { t, j } => Some((i, t, j)),
                Role::State { .. } => None,
            })
    }

    pub fn is_chain(&self) -> bool {
        self.scenario.config.kind != ScenarioKind::Fusion && self.scenario.config.times > 1
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Greedy matching on `score` (rows: peaks now, columns: peaks next);
/// returns the next peak of every track given the current one in `prev`.
fn link(score: &DMatrix<f64>, prev: &[usize]) -> Vec<usize> {
    let k = score.nrows();
    let mut next = vec![0; k];
    let mut used_a = vec![false; k];
    let mut used_b = vec![false; k];
    for _ in 0..k {
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for a in 0..k {
            for b in 0..k {
                if !used_a[a] && !used_b[b] && score[(a, b)] > best.0 {
                    best = (score[(a, b)], a, b);
                }
            }
        }
        used_a[best.1] = true;
        used_b[best.2] = true;
        next[best.1] = best.2;
    }
    prev.iter().map(|&a| next[a]).collect()
}

/// Whether two 1-d tracks swap order between the first and last time.
pub fn tracks_cross(a: &Track, b: &Track) -> bool {
    let first = a.points[0][0] - b.points[0][0];
    let last = a.points[a.points.len() - 1][0] - b.points[b.points.len() - 1][0];
    first * last < 0.0
}
