use rand::Rng;

use super::weights::ParticleEnsemble;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResamplingScheme {
    /// N independent categorical draws.
    Multinomial,
    /// One uniform offset shared by N evenly spaced points.
    #[default]
    Systematic,
    /// One independent uniform inside each of N strata.
    Stratified,
    /// floor(N w_i) deterministic copies, multinomial on the remainder.
    Residual,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResampleTrigger {
    Always,
    /// Resample when ESS < fraction * N.
    EssBelow(f64),
    Never,
}

impl Default for ResampleTrigger {
    fn default() -> Self {
        ResampleTrigger::EssBelow(0.5)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResamplingPolicy {
    pub scheme: ResamplingScheme,
    pub trigger: ResampleTrigger,
}

impl ResamplingPolicy {
    pub fn new(scheme: ResamplingScheme, trigger: ResampleTrigger) -> Self {
        Self { scheme, trigger }
    }

    pub fn never() -> Self {
        Self {
            scheme: ResamplingScheme::default(),
            trigger: ResampleTrigger::Never,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ResampleTrigger::EssBelow(f) = self.trigger {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::param(format!(
                    "ResamplingPolicy: ESS fraction must lie in (0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }

    pub fn should_resample(&self, ess: f64, n: usize) -> bool {
        match self.trigger {
            ResampleTrigger::Always => true,
            ResampleTrigger::EssBelow(f) => ess < f * n as f64,
            ResampleTrigger::Never => false,
        }
    }
}

/// New equally weighted ensemble of the same size.
pub fn resample<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> ParticleEnsemble {
    let ancestors = resample_indices(ensemble.weights(), scheme, rng);
    let values = ancestors.iter().map(|&a| ensemble.values()[a]).collect();
    ParticleEnsemble::uniform(values).expect("resampling preserves a non-empty ensemble")
}

/// Ancestor indices for `weights.len()` draws. Weights must be non-negative
/// with a positive sum; zero-weight particles are never selected.
pub fn resample_indices<R: Rng + ?Sized>(
    weights: &[f64],
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Vec<usize> {
    let n = weights.len();
    match scheme {
        ResamplingScheme::Multinomial => {
            let cdf = Cdf::new(weights);
            (0..n).map(|_| cdf.search(rng.random::<f64>())).collect()
        }
        ResamplingScheme::Systematic => systematic_with_offset(weights, rng.random::<f64>()),
        ResamplingScheme::Stratified => {
            let offsets: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            stratified_with_offsets(weights, &offsets)
        }
        ResamplingScheme::Residual => residual(weights, rng),
    }
}

pub(crate) fn systematic_with_offset(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    Cdf::new(weights).walk((0..n).map(|k| (k as f64 + offset) / n as f64))
}

pub(crate) fn stratified_with_offsets(weights: &[f64], offsets: &[f64]) -> Vec<usize> {
    let n = weights.len();
    Cdf::new(weights).walk(offsets.iter().enumerate().map(|(k, u)| (k as f64 + u) / n as f64))
}

fn residual<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut remainders = Vec::with_capacity(n);
    for (i, w) in weights.iter().enumerate() {
        let expected = n as f64 * w / total;
        let copies = (expected.floor() as usize).min(n - out.len());
        out.extend(std::iter::repeat_n(i, copies));
        remainders.push((expected - copies as f64).max(0.0));
    }
    let missing = n - out.len();
    if missing > 0 {
        let rem_total: f64 = remainders.iter().sum();
        // rounding can leave an all-zero remainder; fall back to the weights
        let cdf = if rem_total > 0.0 {
            Cdf::new(&remainders)
        } else {
            Cdf::new(weights)
        };
        out.extend((0..missing).map(|_| cdf.search(rng.random::<f64>())));
    }
    out
}

struct Cdf {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Cdf {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Index whose interval contains `u * total`, u in [0, 1).
    fn search(&self, u: f64) -> usize {
        let target = u * self.total();
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.last_positive)
    }

    /// Same as `search` for a non-decreasing sequence of points, in linear time.
    fn walk(&self, points: impl Iterator<Item = f64>) -> Vec<usize> {
        let total = self.total();
        let mut i = 0;
        points
            .map(|u| {
                let target = u * total;
                while i < self.last_positive && self.cumulative[i] <= target {
                    i += 1;
                }
                i
            })
            .collect()
    }
}
