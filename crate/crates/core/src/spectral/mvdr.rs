use nalgebra::{DMatrix, DVector};

use super::array::{steering_vector, SensorArray, C64};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Default diagonal load `1e-6 tr(R) / p`.
pub fn default_loading(r: &DMatrix<C64>) -> f64 {
    1e-6 * r.trace().re / r.nrows() as f64
}

/// Capon spectrum `1 / (a(x)ᴴ (R + δI)⁻¹ a(x))` on every grid point.
pub fn mvdr_spectrum(
    r: &DMatrix<C64>,
    array: &SensorArray,
    grid: &Grid,
    loading: Option<f64>,
) -> Result<DVector<f64>> {
    let p = array.sensor_count();
    if r.nrows() != p || r.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} covariance for a {p}-sensor array",
            r.nrows(),
            r.ncols()
        )));
    }
    let delta = loading.unwrap_or_else(|| default_loading(r));
    let mut loaded = r.clone();
    for i in 0..p {
        loaded[(i, i)] += C64::new(delta, 0.0);
    }
    let chol = loaded.cholesky().ok_or(Error::SingularCovariance)?;
    let mut out = DVector::zeros(grid.len());
    for k in 0..grid.len() {
        let a = steering_vector(array, &grid.point(k))?;
        let q = a.dotc(&chol.solve(&a)).re;
        if !(q > 0.0) {
            return Err(Error::SingularCovariance);
        }
        out[k] = 1.0 / q;
    }
    Ok(out)
}

/// Non-coherent fusion: per-array spectra, each scaled to unit maximum, summed.
pub fn mvdr_noncoherent(
    measurements: &[(&DMatrix<C64>, &SensorArray)],
    grid: &Grid,
    loading: Option<f64>,
) -> Result<DVector<f64>> {
    let mut total = DVector::zeros(grid.len());
    for (r, array) in measurements {
        let s = mvdr_spectrum(r, array, grid, loading)?;
        total += &s / s.max();
    }
    Ok(total)
}
