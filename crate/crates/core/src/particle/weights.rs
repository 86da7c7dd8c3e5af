use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

/// Exp-normalize log-likelihoods into weights that sum to one.
pub fn normalized_weights(log_likelihoods: &[f64]) -> Result<Vec<f64>> {
    Ok(normalize(log_likelihoods)?.0)
}

/// Weights together with the normalized log-weights.
pub(crate) fn normalize(log_w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if log_w.is_empty() {
        return Err(Error::param("weight vector must be non-empty"));
    }
    if log_w.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::param("log-weights must be finite or -inf"));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::TotalDegeneracy);
    }
    let unnorm: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total = compensated_sum(unnorm.iter().copied());
    let log_total = max + total.ln();
    let weights = unnorm.iter().map(|u| u / total).collect();
    let log_norm = log_w.iter().map(|l| l - log_total).collect();
    Ok((weights, log_norm))
}

/// Self-normalized importance estimate: sum_i f(theta_i) w_i.
pub fn importance_estimate(integrand_values: &[f64], weights: &[f64]) -> Result<f64> {
    if integrand_values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            context: "importance_estimate integrand vs weights",
            left: integrand_values.len(),
            right: weights.len(),
        });
    }
    Ok(compensated_sum(
        integrand_values.iter().zip(weights).map(|(f, w)| f * w),
    ))
}

/// Effective sample size 1 / sum w_i^2, clamped to [1, N].
pub fn ess(weights: &[f64]) -> f64 {
    let sum_sq = compensated_sum(weights.iter().map(|w| w * w));
    (1.0 / sum_sq).clamp(1.0, weights.len().max(1) as f64)
}

/// Weighted particle approximation of a scalar distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    values: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Equally weighted particles.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("ParticleEnsemble needs at least one particle"));
        }
        let n = values.len();
        Ok(Self {
            log_weights: vec![-(n as f64).ln(); n],
            weights: vec![1.0 / n as f64; n],
            values,
        })
    }

    /// Particles with unnormalized log-weights.
    pub fn from_log_weights(values: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        if values.len() != log_weights.len() {
            return Err(Error::LengthMismatch {
                context: "ParticleEnsemble values vs log-weights",
                left: values.len(),
                right: log_weights.len(),
            });
        }
        let (weights, log_weights) = normalize(&log_weights)?;
        Ok(Self {
            values,
            log_weights,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().zip(&self.weights).map(|(x, w)| x * w))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let v = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - m) * (x - m))
            .collect::<CompensatedSum>()
            .value();
        v.max(0.0)
    }

    /// Same weights, new locations.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            log_weights: self.log_weights.clone(),
            weights: self.weights.clone(),
        }
    }
}
