//! Sensor arrays, covariance operators and a Capon baseline.

mod array;
mod covariance;
mod mvdr;

pub use array::{gamma_matrix, steering_vector, ArrayModel, SensorArray, C64};
pub use covariance::{
    noise_power, sample_covariance, simulate_snapshots, stack, unstack, CovarianceMeasurement,
    Source,
};
pub use mvdr::{default_loading, mvdr_noncoherent, mvdr_spectrum};
