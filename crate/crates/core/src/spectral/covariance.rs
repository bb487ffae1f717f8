use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::array::{steering_vector, SensorArray, C64};
use crate::error::{Error, Result};

/// Real stacking of a Hermitian matrix: real parts of the upper triangle
/// (diagonal included, row by row) followed by imaginary parts of the strict
/// upper triangle. Length `p²`.
pub fn stack(r: &DMatrix<C64>) -> DVector<f64> {
    let p = r.nrows();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in i..p {
            out.push(r[(i, j)].re);
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            out.push(r[(i, j)].im);
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`stack`]; the lower triangle is filled by conjugation.
pub fn unstack(v: &DVector<f64>, p: usize) -> Result<DMatrix<C64>> {
    if v.len() != p * p {
        return Err(Error::DimensionMismatch(format!(
            "stacked covariance of length {} for {p} sensors",
            v.len()
        )));
    }
    let mut r = DMatrix::<C64>::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in i..p {
            r[(i, j)].re = v[k];
            k += 1;
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            r[(i, j)].im = v[k];
            k += 1;
        }
    }
    for i in 0..p {
        for j in 0..i {
            r[(i, j)] = r[(j, i)].conj();
        }
    }
    Ok(r)
}

/// A covariance matrix together with its stacked real form.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMeasurement {
    pub matrix: DMatrix<C64>,
    pub stacked: DVector<f64>,
    pub snapshots: usize,
}

impl CovarianceMeasurement {
    /// Wraps an exact (model) covariance. Only the upper triangle is read.
    pub fn from_matrix(r: &DMatrix<C64>, snapshots: usize) -> Result<Self> {
        if r.nrows() != r.ncols() {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let stacked = stack(r);
        let matrix = unstack(&stacked, r.nrows())?;
        Ok(Self {
            matrix,
            stacked,
            snapshots,
        })
    }

    pub fn sensor_count(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `R̂ = (1/N) Σ y yᴴ` over the columns of `y` (one snapshot per column).
pub fn sample_covariance(y: &DMatrix<C64>) -> Result<CovarianceMeasurement> {
    let n = y.ncols();
    if n == 0 {
        return Err(Error::DimensionMismatch("no snapshots".into()));
    }
    let r = (y * y.adjoint()).unscale(n as f64);
    CovarianceMeasurement::from_matrix(&r, n)
}

/// A point emitter.
#[derive(Clone, Debug, PartialEq)]
pub struct Source {
    pub position: Vec<f64>,
    pub power: f64,
}

fn complex_normal(rng: &mut ChaCha8Rng, power: f64) -> C64 {
    let s = (0.5 * power).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

/// Noise power for a given SNR in dB, relative to the mean source power
/// (unit reference without sources).
pub fn noise_power(sources: &[Source], snr_db: f64) -> f64 {
    let reference = if sources.is_empty() {
        1.0
    } else {
        sources.iter().map(|s| s.power).sum::<f64>() / sources.len() as f64
    };
    reference / 10f64.powf(snr_db / 10.0)
}

/// Snapshots `y = Σ_s a(x_s) s_s + w` for each array (`p × n_snap` each).
///
/// Source waveforms are circular complex Gaussian and shared by all arrays
/// within a snapshot; noise is white and independent per array. Pass
/// `snr_db = f64::INFINITY` for noiseless data.
pub fn simulate_snapshots(
    arrays: &[SensorArray],
    sources: &[Source],
    snr_db: f64,
    n_snap: usize,
    seed: u64,
) -> Result<Vec<DMatrix<C64>>> {
    if n_snap == 0 {
        return Err(Error::DimensionMismatch(
            "need at least one snapshot".into(),
        ));
    }
    let steering = arrays
        .iter()
        .map(|a| {
            sources
                .iter()
                .map(|s| steering_vector(a, &s.position))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma2 = noise_power(sources, snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<DMatrix<C64>> = arrays
        .iter()
        .map(|a| DMatrix::zeros(a.sensor_count(), n_snap))
        .collect();
    for n in 0..n_snap {
        let wave: Vec<C64> = sources
            .iter()
            .map(|s| complex_normal(&mut rng, s.power))
            .collect();
        for (y, steer) in out.iter_mut().zip(&steering) {
            let mut col = y.column_mut(n);
            for (a, &s) in steer.iter().zip(&wave) {
                col.axpy(s, a, C64::new(1.0, 0.0));
            }
            if sigma2 > 0.0 {
                for k in 0..col.len() {
                    col[k] += complex_normal(&mut rng, sigma2);
                }
            }
        }
    }
    Ok(out)
}
