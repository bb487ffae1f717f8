use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entries of `u_t = exp(G_tᵀ λ_t / ε)` are kept inside this range.
pub const SCALING_MIN: f64 = 1e-300;
pub const SCALING_MAX: f64 = 1e300;

/// Linear observation map `G_t`.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// `G = I` on a marginal of the given size.
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Observation {
    pub fn nrows(&self) -> usize {
        match self {
            Observation::Identity(n) => *n,
            Observation::Dense(g) => g.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Observation::Identity(n) => *n,
            Observation::Dense(g) => g.ncols(),
        }
    }

    /// `G x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Observation::Identity(_) => x.clone(),
            Observation::Dense(g) => g * x,
        }
    }

    /// `Gᵀ y`
    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Observation::Identity(_) => y.clone(),
            Observation::Dense(g) => g.tr_mul(y),
        }
    }

    /// `G diag(w) Gᵀ`
    pub fn weighted_gram(&self, w: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Observation::Identity(_) => DMatrix::from_diagonal(w),
            Observation::Dense(g) => {
                let mut gw = g.clone();
                for (mut col, &wj) in gw.column_iter_mut().zip(w.iter()) {
                    col *= wj;
                }
                gw * g.transpose()
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Observation::Identity(n) => DMatrix::identity(*n, *n),
            Observation::Dense(g) => g.clone(),
        }
    }
}

/// `G_t P_t(M) = r_t + Δ_t`, with the perturbation `Δ_t` penalized by
/// `γ_t ‖Δ_t‖²`. `γ_t = ∞` enforces the measurement exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementConstraint {
    g: Observation,
    r: DVector<f64>,
    gamma: f64,
}

impl MeasurementConstraint {
    pub fn new(g: Observation, r: DVector<f64>, gamma: f64) -> Result<Self> {
        if g.nrows() != r.len() {
            return Err(Error::InvalidConstraint(format!(
                "observation map has {} rows but data has length {}",
                g.nrows(),
                r.len()
            )));
        }
        if g.nrows() == 0 || g.ncols() == 0 {
            return Err(Error::InvalidConstraint("empty observation map".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidConstraint(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConstraint(
                "data contains non-finite values".into(),
            ));
        }
        if let Observation::Dense(m) = &g {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConstraint(
                    "observation map contains non-finite values".into(),
                ));
            }
        }
        if matches!(g, Observation::Identity(_))
            && gamma.is_infinite()
            && r.iter().any(|&x| x <= 0.0)
        {
            return Err(Error::InvalidConstraint(
                "an exactly enforced identity constraint needs a strictly positive marginal".into(),
            ));
        }
        Ok(Self { g, r, gamma })
    }

    /// Full marginal information `P_t(M) = φ`, optionally relaxed by `γ`.
    pub fn identity(phi: DVector<f64>, gamma: f64) -> Result<Self> {
        Self::new(Observation::Identity(phi.len()), phi, gamma)
    }

    pub fn dense(g: DMatrix<f64>, r: DVector<f64>, gamma: f64) -> Result<Self> {
        Self::new(Observation::Dense(g), r, gamma)
    }

    pub fn observation(&self) -> &Observation {
        &self.g
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_exact(&self) -> bool {
        self.gamma.is_infinite()
    }

    /// `1 / (2γ)`, zero for exact constraints.
    pub fn penalty_slope(&self) -> f64 {
        if self.is_exact() {
            0.0
        } else {
            0.5 / self.gamma
        }
    }

    /// `u = exp(Gᵀ λ / ε)` clamped to the representable range; the flag
    /// reports whether clamping occurred.
    pub fn scaling(&self, lambda: &DVector<f64>, epsilon: f64) -> (DVector<f64>, bool) {
        let mut clamped = false;
        let u = self.g.apply_transpose(lambda).map(|x| {
            let e = (x / epsilon).exp();
            if !(SCALING_MIN..=SCALING_MAX).contains(&e) {
                clamped = true;
            }
            e.clamp(SCALING_MIN, SCALING_MAX)
        });
        (u, clamped)
    }
}

/// Dual variables; `None` for unconstrained marginals (pinned at `λ = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub lambda: Vec<Option<DVector<f64>>>,
}

impl DualState {
    pub fn zeros(constraints: &[Option<MeasurementConstraint>]) -> Self {
        Self {
            lambda: constraints
                .iter()
                .map(|c| c.as_ref().map(|c| DVector::zeros(c.observation().nrows())))
                .collect(),
        }
    }
}
