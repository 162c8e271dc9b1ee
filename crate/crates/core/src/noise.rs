//! Additive state noise.
//!
//! The belief update only needs a log-density with full support, and the
//! value recursion only needs the covariance, so both go through the
//! [`NoiseDensity`] trait. [`GaussianNoise`] is the stock implementation.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

pub trait NoiseDensity: Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// Covariance `Q^k` of the stage-`k` draw.
    fn covariance(&self, stage: usize) -> &DMatrix<f64>;

    fn sample(&self, stage: usize, rng: &mut dyn RngCore) -> DVector<f64>;

    /// Log of the density at `residual`. Must be finite for every residual
    /// when the density has full support.
    fn log_density(&self, stage: usize, residual: &DVector<f64>) -> Result<f64>;
}

#[derive(Debug, Clone)]
struct GaussianStage {
    covariance: DMatrix<f64>,
    // V * sqrt(lambda), so that factor * z ~ N(0, Q) for PSD Q.
    sampling_factor: DMatrix<f64>,
    // (Q^{-1}, log normalising constant) when Q is positive definite.
    precision: Option<(DMatrix<f64>, f64)>,
    zero: bool,
}

/// Zero-mean multivariate normal noise, one covariance per stage (a single
/// covariance is broadcast to every stage).
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    dim: usize,
    stages: Vec<GaussianStage>,
}

impl GaussianNoise {
    pub fn new(covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = covariances
            .first()
            .map(|q| q.nrows())
            .ok_or_else(|| Error::invalid("at least one noise covariance is required"))?;
        let mut stages = Vec::with_capacity(covariances.len());
        for (k, q) in covariances.into_iter().enumerate() {
            if q.nrows() != dim || q.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what: "noise covariance",
                    stage: k,
                    player: 0,
                    type_index: 0,
                    expected: format!("{dim}x{dim}"),
                    found: format!("{}x{}", q.nrows(), q.ncols()),
                });
            }
            let q = linalg::symmetrize(&q);
            if !linalg::is_positive_semidefinite(&q, 1e-12) {
                return Err(Error::invalid(format!("noise covariance at stage {k} is not positive semidefinite")));
            }
            let eig = q.clone().symmetric_eigen();
            let sqrt_l = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            let sampling_factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_l);
            let (pd, _) = linalg::is_positive_definite(&q, 1e-12);
            let precision = if pd {
                let chol = q.clone().cholesky().expect("positive definite covariance");
                let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                let log_norm = -0.5 * (dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
                Some((chol.inverse(), log_norm))
            } else {
                None
            };
            let zero = q.iter().all(|&v| v == 0.0);
            stages.push(GaussianStage { covariance: q, sampling_factor, precision, zero });
        }
        Ok(GaussianNoise { dim, stages })
    }

    /// Same covariance at every stage.
    pub fn stationary(q: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![q])
    }

    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::stationary(DMatrix::identity(dim, dim) * variance)
    }

    fn stage(&self, k: usize) -> &GaussianStage {
        &self.stages[k.min(self.stages.len() - 1)]
    }
}

impl NoiseDensity for GaussianNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn covariance(&self, stage: usize) -> &DMatrix<f64> {
        &self.stage(stage).covariance
    }

    fn sample(&self, stage: usize, rng: &mut dyn RngCore) -> DVector<f64> {
        let st = self.stage(stage);
        if st.zero {
            return DVector::zeros(self.dim);
        }
        let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| StandardNormal.sample(rng)));
        &st.sampling_factor * z
    }

    fn log_density(&self, stage: usize, residual: &DVector<f64>) -> Result<f64> {
        let (precision, log_norm) = self.stage(stage).precision.as_ref().ok_or_else(|| Error::DegenerateNoise {
            stage,
            reason: "covariance is singular, density has no full support".into(),
        })?;
        Ok(log_norm - 0.5 * residual.dot(&(precision * residual)))
    }
}
