//! Scenario configuration (TOML).
//!
//! ```toml
//! kind = "tracking"          # tracking | fusion | barycenter_tracking
//! cost = "dynamic"           # static | dynamic
//! epsilon = 0.1
//! gamma = 5.0                # shared; `gamma = inf` enforces the data exactly
//! times = 6                  # number of observation times
//! snapshots = 25
//! snr_db = 10.0
//! seed = 1
//!
//! [grid]
//! spatial = [{ min = -3.0, max = 3.0, count = 100 }]
//! velocity = [{ min = -2.0, max = 2.0, count = 30 }]
//!
//! [[arrays]]
//! model = "fourier"
//! sensors = 5
//!
//! [[sources]]
//! power = 1.0
//! waypoints = [[-2.5], [2.5]]
//! ```

use std::path::Path;

use momt_core::grid::{Axis, Grid};
use momt_core::spectral::ArrayModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// One array observed at every time; chain cost between times.
    Tracking,
    /// Several arrays at one time fused through a barycenter.
    Fusion,
    /// Barycenters of several arrays, chained over time.
    BarycenterTracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Squared distance between locations.
    Static,
    /// Minimum acceleration energy over a location-velocity state.
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Mvdr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub spatial: Vec<Axis>,
    #[serde(default)]
    pub velocity: Option<Vec<Axis>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub model: ArrayModel,
    #[serde(default)]
    pub sensors: Option<usize>,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default = "one")]
    pub wavelength: f64,
    #[serde(default)]
    pub positions: Option<Vec<Vec<f64>>>,
    /// Rotation of the true geometry relative to the nominal one used by the solver.
    #[serde(default)]
    pub rotation_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub power: f64,
    /// Positions at evenly spaced instants from the first to the last
    /// observation time; linear in between.
    pub waypoints: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: default_outer_tol(),
            max_sweeps: default_max_sweeps(),
            inner_tol: default_inner_tol(),
            max_newton: default_max_newton(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Peaks reported per spectrum.
    #[serde(default = "default_peaks")]
    pub peaks: usize,
    /// Peaks closer than this many cells (Chebyshev) to a stronger one are suppressed.
    #[serde(default = "default_separation")]
    pub min_separation: usize,
    /// Interpolated spectra per interval between observation times.
    #[serde(default)]
    pub interp: usize,
    #[serde(default)]
    pub baseline: Option<Baseline>,
    #[serde(default)]
    pub gnuplot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            peaks: default_peaks(),
            min_separation: default_separation(),
            interp: 0,
            baseline: None,
            gnuplot: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: ScenarioKind,
    #[serde(default = "default_cost")]
    pub cost: CostModel,
    pub epsilon: f64,
    pub gamma: f64,
    /// Per-constraint weights, overriding `gamma`, in marginal order.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    /// Weight of the barycenter-to-observation cost.
    #[serde(default = "one")]
    pub alpha: f64,
    pub times: usize,
    pub snapshots: usize,
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub arrays: Vec<ArrayConfig>,
    #[serde(default)]
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn default_cost() -> CostModel {
    CostModel::Static
}
fn default_outer_tol() -> f64 {
    1e-6
}
fn default_max_sweeps() -> usize {
    2000
}
fn default_inner_tol() -> f64 {
    1e-10
}
fn default_max_newton() -> usize {
    50
}
fn default_peaks() -> usize {
    2
}
fn default_separation() -> usize {
    2
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {x}")))
    }
}

fn check_axes(field: &str, axes: &[Axis]) -> Result<(), ConfigError> {
    if axes.is_empty() {
        return Err(invalid(field, "needs at least one axis"));
    }
    for (k, a) in axes.iter().enumerate() {
        Axis::new(a.min, a.max, a.count)
            .map_err(|e| invalid(format!("{field}[{k}]"), e.to_string()))?;
    }
    Ok(())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn spatial_dims(&self) -> usize {
        self.grid.spatial.len()
    }

    pub fn spatial_grid(&self) -> Grid {
        Grid::new(self.grid.spatial.clone()).expect("validated")
    }

    /// Number of constrained marginals.
    pub fn constraint_count(&self) -> usize {
        match self.kind {
            ScenarioKind::Tracking => self.times,
            ScenarioKind::Fusion => self.arrays.len(),
            ScenarioKind::BarycenterTracking => self.times * self.arrays.len(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("epsilon", self.epsilon)?;
        positive("gamma", self.gamma)?;
        positive("alpha", self.alpha)?;
        if let Some(gs) = &self.gammas {
            if gs.len() != self.constraint_count() {
                return Err(invalid(
                    "gammas",
                    format!(
                        "needs {} entries, got {}",
                        self.constraint_count(),
                        gs.len()
                    ),
                ));
            }
            for (k, &g) in gs.iter().enumerate() {
                positive(&format!("gammas[{k}]"), g)?;
            }
        }
        if self.times == 0 {
            return Err(invalid("times", "must be at least 1"));
        }
        if self.snapshots == 0 {
            return Err(invalid("snapshots", "must be at least 1"));
        }
        if self.snr_db.is_nan() {
            return Err(invalid("snr_db", "must be a number"));
        }
        check_axes("grid.spatial", &self.grid.spatial)?;
        let d = self.spatial_dims();
        if d > 3 {
            return Err(invalid(
                "grid.spatial",
                "at most 3 spatial axes are supported",
            ));
        }
        match (&self.cost, &self.grid.velocity) {
            (CostModel::Dynamic, None) => {
                return Err(invalid("grid.velocity", "required by the dynamic cost"))
            }
            (CostModel::Dynamic, Some(v)) => {
                check_axes("grid.velocity", v)?;
                if v.len() != d {
                    return Err(invalid(
                        "grid.velocity",
                        format!("needs one axis per spatial axis ({d}), got {}", v.len()),
                    ));
                }
            }
            (CostModel::Static, Some(_)) => {
                return Err(invalid("grid.velocity", "only used by the dynamic cost"))
            }
            (CostModel::Static, None) => {}
        }
        match self.kind {
            ScenarioKind::Tracking => {
                if self.arrays.len() != 1 {
                    return Err(invalid("arrays", "tracking uses exactly one array"));
                }
            }
            ScenarioKind::Fusion => {
                if self.arrays.is_empty() {
                    return Err(invalid("arrays", "fusion needs at least one array"));
                }
                if self.times != 1 {
                    return Err(invalid("times", "fusion is a single-time scenario"));
                }
                if self.cost == CostModel::Dynamic {
                    return Err(invalid("cost", "fusion has no time dynamics"));
                }
            }
            ScenarioKind::BarycenterTracking => {
                if self.arrays.is_empty() {
                    return Err(invalid(
                        "arrays",
                        "barycenter tracking needs at least one array",
                    ));
                }
                if self.times < 2 {
                    return Err(invalid(
                        "times",
                        "barycenter tracking needs at least 2 times",
                    ));
                }
            }
        }
        for (k, a) in self.arrays.iter().enumerate() {
            self.check_array(&format!("arrays[{k}]"), a)?;
        }
        for (k, s) in self.sources.iter().enumerate() {
            let f = format!("sources[{k}]");
            positive(&format!("{f}.power"), s.power)?;
            if s.waypoints.is_empty() {
                return Err(invalid(
                    format!("{f}.waypoints"),
                    "needs at least one point",
                ));
            }
            for (i, w) in s.waypoints.iter().enumerate() {
                if w.len() != d || w.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(
                        format!("{f}.waypoints[{i}]"),
                        format!("must have {d} finite coordinates"),
                    ));
                }
            }
        }
        let o = &self.output;
        if o.peaks == 0 {
            return Err(invalid("output.peaks", "must be at least 1"));
        }
        let s = &self.solver;
        positive("solver.outer_tol", s.outer_tol)?;
        positive("solver.inner_tol", s.inner_tol)?;
        if s.max_sweeps == 0 {
            return Err(invalid("solver.max_sweeps", "must be at least 1"));
        }
        Ok(())
    }

    fn check_array(&self, f: &str, a: &ArrayConfig) -> Result<(), ConfigError> {
        positive(&format!("{f}.wavelength"), a.wavelength)?;
        if !a.rotation_deg.is_finite() {
            return Err(invalid(format!("{f}.rotation_deg"), "must be finite"));
        }
        let d = self.spatial_dims();
        match a.model {
            ArrayModel::Fourier | ArrayModel::FarFieldLinear => {
                if d != 1 {
                    return Err(invalid(
                        format!("{f}.model"),
                        "angular array models need a 1-d spatial (angle) grid",
                    ));
                }
                if a.positions.is_none() && a.sensors.unwrap_or(0) == 0 {
                    return Err(invalid(
                        format!("{f}.sensors"),
                        "give a positive sensor count or positions",
                    ));
                }
                if a.model == ArrayModel::Fourier && a.rotation_deg != 0.0 {
                    return Err(invalid(
                        format!("{f}.rotation_deg"),
                        "Fourier arrays cannot be rotated",
                    ));
                }
            }
            ArrayModel::NearField => {
                let Some(pos) = &a.positions else {
                    return Err(invalid(
                        format!("{f}.positions"),
                        "required by the near-field model",
                    ));
                };
                if pos.iter().any(|p| p.len() != d) {
                    return Err(invalid(
                        format!("{f}.positions"),
                        format!("every sensor needs {d} coordinates"),
                    ));
                }
                if a.rotation_deg != 0.0 && d < 2 {
                    return Err(invalid(
                        format!("{f}.rotation_deg"),
                        "rotation needs a 2-d or 3-d array",
                    ));
                }
            }
        }
        self.nominal_array(a)
            .map_err(|e| invalid(f, e.to_string()))
            .map(|_| ())
    }

    pub fn nominal_array(
        &self,
        a: &ArrayConfig,
    ) -> momt_core::Result<momt_core::spectral::SensorArray> {
        use momt_core::spectral::SensorArray;
        match (a.model, &a.positions) {
            (ArrayModel::Fourier, _) => SensorArray::fourier(a.sensors.unwrap_or(0)),
            (_, Some(p)) => SensorArray::new(p.clone(), a.wavelength, a.model),
            (ArrayModel::FarFieldLinear, None) => SensorArray::uniform_linear(
                a.sensors.unwrap_or(0),
                a.spacing.unwrap_or(0.5 * a.wavelength),
                a.wavelength,
            ),
            (ArrayModel::NearField, None) => unreachable!("checked by validate"),
        }
    }
}
