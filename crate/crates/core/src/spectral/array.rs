use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::covariance::stack;
use crate::dynamics::PushForward;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub type C64 = Complex<f64>;

/// How a source location maps to sensor phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayModel {
    /// `a_k = exp(i k θ)`, `k = 0..p-1`; `θ` is the electrical angle.
    Fourier,
    /// Plane waves on a line array: `a_k = exp(2πi p_k sin(θ - orientation) / ξ)`
    /// with `p_k` the first position coordinate and `θ` the arrival angle.
    FarFieldLinear,
    /// Spherical waves: `a_k = ‖x_k - x‖^{-(d-1)/2} exp(-2πi ‖x_k - x‖ / ξ)`.
    NearField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorArray {
    positions: Vec<Vec<f64>>,
    wavelength: f64,
    model: ArrayModel,
    /// Broadside direction of a line array, radians.
    #[serde(default)]
    orientation: f64,
}

impl SensorArray {
    pub fn new(positions: Vec<Vec<f64>>, wavelength: f64, model: ArrayModel) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArray(
                "array needs at least one sensor".into(),
            ));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidArray(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        let d = positions[0].len();
        if d == 0 || d > 3 {
            return Err(Error::InvalidArray(format!(
                "sensor positions must be 1-3 dimensional, got {d}"
            )));
        }
        for (k, p) in positions.iter().enumerate() {
            if p.len() != d || p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArray(format!(
                    "sensor {k} has an invalid position"
                )));
            }
            if positions[..k].iter().any(|q| q == p) {
                return Err(Error::InvalidArray(format!(
                    "sensor {k} duplicates an earlier sensor"
                )));
            }
        }
        Ok(Self {
            positions,
            wavelength,
            model,
            orientation: 0.0,
        })
    }

    /// Uniform line array with `p` sensors `spacing` apart, starting at 0.
    pub fn uniform_linear(p: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let pos = (0..p).map(|k| vec![k as f64 * spacing]).collect();
        Self::new(pos, wavelength, ArrayModel::FarFieldLinear)
    }

    /// `p`-sensor array with Fourier steering vectors (half-wavelength ULA in
    /// electrical angle).
    pub fn fourier(p: usize) -> Result<Self> {
        let pos = (0..p).map(|k| vec![k as f64 * 0.5]).collect();
        Self::new(pos, 1.0, ArrayModel::Fourier)
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn model(&self) -> ArrayModel {
        self.model
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn sensor_count(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    /// Number of real measurements per covariance, `p²`.
    pub fn measurement_count(&self) -> usize {
        self.sensor_count() * self.sensor_count()
    }

    /// The same array rotated by `degrees` about its centroid. Line arrays
    /// turn their orientation; near-field arrays rotate in the first two
    /// coordinates.
    pub fn rotated(&self, degrees: f64) -> Result<Self> {
        let a = degrees.to_radians();
        let mut out = self.clone();
        match self.model {
            ArrayModel::FarFieldLinear => out.orientation += a,
            ArrayModel::NearField => {
                if self.dim() < 2 {
                    return Err(Error::InvalidArray(
                        "cannot rotate a 1-d near-field array".into(),
                    ));
                }
                let p = self.sensor_count() as f64;
                let cx = self.positions.iter().map(|x| x[0]).sum::<f64>() / p;
                let cy = self.positions.iter().map(|x| x[1]).sum::<f64>() / p;
                let (s, c) = a.sin_cos();
                for x in out.positions.iter_mut() {
                    let (dx, dy) = (x[0] - cx, x[1] - cy);
                    x[0] = cx + c * dx - s * dy;
                    x[1] = cy + s * dx + c * dy;
                }
            }
            ArrayModel::Fourier => {
                return Err(Error::InvalidArray(
                    "Fourier arrays have no geometry to rotate".into(),
                ))
            }
        }
        Ok(out)
    }
}

/// Array response `a(x)` to a unit source at `x`.
pub fn steering_vector(array: &SensorArray, x: &[f64]) -> Result<DVector<C64>> {
    let p = array.sensor_count();
    match array.model {
        ArrayModel::Fourier | ArrayModel::FarFieldLinear => {
            if x.len() != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "angular arrays take a scalar angle, got {} coordinates",
                    x.len()
                )));
            }
            Ok(DVector::from_fn(p, |k, _| {
                let phase = if array.model == ArrayModel::Fourier {
                    k as f64 * x[0]
                } else {
                    2.0 * std::f64::consts::PI
                        * array.positions[k][0]
                        * (x[0] - array.orientation).sin()
                        / array.wavelength
                };
                C64::from_polar(1.0, phase)
            }))
        }
        ArrayModel::NearField => {
            let d = array.dim();
            if x.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "{d}-d array evaluated at a {}-d point",
                    x.len()
                )));
            }
            let mut out = DVector::zeros(p);
            for (k, s) in array.positions.iter().enumerate() {
                let dist = s
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist == 0.0 {
                    return Err(Error::SingularSteering(k));
                }
                let mag = dist.powf(-0.5 * (d as f64 - 1.0));
                out[k] =
                    C64::from_polar(mag, -2.0 * std::f64::consts::PI * dist / array.wavelength);
            }
            Ok(out)
        }
    }
}

/// Discretized covariance operator: column `k` is the stacked `a(x_k) a(x_k)ᴴ`.
///
/// Spectra are cell masses, so no quadrature weight appears. With a
/// push-forward `P` from a state grid onto `grid`, returns `G P`, which acts
/// on the state grid.
pub fn gamma_matrix(
    array: &SensorArray,
    grid: &Grid,
    push: Option<&PushForward>,
) -> Result<DMatrix<f64>> {
    let m = array.measurement_count();
    let mut g = DMatrix::zeros(m, grid.len());
    for k in 0..grid.len() {
        let a = steering_vector(array, &grid.point(k))?;
        g.set_column(k, &stack(&(&a * a.adjoint())));
    }
    match push {
        None => Ok(g),
        Some(p) => {
            if p.nrows() != grid.len() {
                return Err(Error::DimensionMismatch(format!(
                    "push-forward maps onto {} points, observation grid has {}",
                    p.nrows(),
                    grid.len()
                )));
            }
            let mut out = DMatrix::zeros(m, p.ncols());
            for j in 0..p.ncols() {
                let mut col = out.column_mut(j);
                for &(i, w) in p.column(j) {
                    col.axpy(w, &g.column(i), 1.0);
                }
            }
            Ok(out)
        }
    }
}
