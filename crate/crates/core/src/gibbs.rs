//! Gibbs sampling from the smoothing posterior P(theta_1..theta_T | y_1..y_T).
//!
//! Single-site mode visits the coordinates from theta_T down to theta_1, each
//! drawn from its Gaussian full conditional. For T = 2 this is exactly the
//! two-observation scheme: theta_2 from P(y_2|theta_2) P(theta_2|theta_1),
//! then theta_1 from P(theta_2|theta_1) L(theta_1; y_1) P(theta_1).
//! FFBS mode draws the whole path jointly from one forward Kalman pass.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_table};
use crate::kalman::{backward_gain, filter_series, FilterTrace};
use crate::model::{LocalLevelParams, ObservationSeries};
use crate::numeric::gaussian_product;
use crate::rng::{normal, RandomStreams, StreamRng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GibbsMode {
    #[default]
    SingleSite,
    /// Forward filtering, backward sampling.
    Ffbs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsConfig {
    pub iterations: usize,
    /// Number of leading iterations discarded.
    pub burn_in: usize,
    pub seed: u64,
    /// Starting path; defaults to the observations themselves.
    pub init_states: Option<Vec<f64>>,
    pub mode: GibbsMode,
}

impl GibbsConfig {
    /// Burn-in defaults to a tenth of the chain.
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: iterations / 10,
            seed,
            init_states: None,
            mode: GibbsMode::SingleSite,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_mode(mut self, mode: GibbsMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::param(format!(
                "GibbsConfig: iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        Ok(())
    }

    fn initial_path(&self, ys: &[f64]) -> Result<Vec<f64>> {
        match &self.init_states {
            None => Ok(ys.to_vec()),
            Some(init) if init.len() == ys.len() => Ok(init.clone()),
            Some(init) => Err(Error::LengthMismatch {
                context: "GibbsConfig.init_states vs observations",
                left: init.len(),
                right: ys.len(),
            }),
        }
    }
}

/// Retained draws, one theta-path per row.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsSamples {
    pub draws: Vec<Vec<f64>>,
    /// Iteration number of the first retained row, minus one.
    pub burn_in: usize,
}

/// Moments of one coordinate with batch-means Monte Carlo standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
}

const BATCHES: usize = 50;

impl GibbsSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|row| row[j]).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| mean(&self.column(j))).collect()
    }

    /// Per-coordinate mean and variance, with standard errors from
    /// non-overlapping batch means so chain autocorrelation is accounted for.
    pub fn summaries(&self) -> Vec<CoordinateSummary> {
        (0..self.dim())
            .map(|j| {
                let xs = self.column(j);
                let m = mean(&xs);
                let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
                CoordinateSummary {
                    mean: m,
                    variance: sample_variance(&xs),
                    mean_se: batch_means_se(&xs),
                    variance_se: batch_means_se(&sq),
                }
            })
            .collect()
    }

    pub fn lag1_autocorrelation(&self, j: usize) -> f64 {
        let xs = self.column(j);
        let m = mean(&xs);
        let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
        if denom == 0.0 {
            return 0.0;
        }
        let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        num / denom
    }

    /// `iter,theta_1,...,theta_T`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut cols = vec!["iter".to_string()];
        cols.extend((1..=self.dim()).map(|t| format!("theta_{t}")));
        let rows = self.draws.iter().enumerate().map(|(i, row)| {
            std::iter::once((self.burn_in + i + 1).to_string())
                .chain(row.iter().map(|&x| fmt_f64(x)))
                .collect::<Vec<_>>()
        });
        write_table(writer, &cols, rows)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn batch_means_se(xs: &[f64]) -> f64 {
    let batches = BATCHES.min(xs.len());
    if batches < 2 {
        return f64::INFINITY;
    }
    let size = xs.len() / batches;
    let batch_means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    (sample_variance(&batch_means) / batches as f64).sqrt()
}

fn check_proper(params: &LocalLevelParams) -> Result<()> {
    params.validate()?;
    if params.obs_var == 0.0 && params.state_var == 0.0 {
        return Err(Error::param(
            "Gibbs full conditionals are improper when obs_var and state_var are both 0",
        ));
    }
    Ok(())
}

/// Two-observation sampler: theta_2 given (theta_1, y_2), then theta_1 given (theta_2, y_1).
pub fn gibbs_two_step(
    y1: f64,
    y2: f64,
    params: &LocalLevelParams,
    config: &GibbsConfig,
) -> Result<GibbsSamples> {
    check_proper(params)?;
    config.validate()?;
    let init = config.initial_path(&[y1, y2])?;
    // theta_2 is drawn first, so only theta_1 needs a starting value
    let mut theta1 = init[0];
    let mut rng = chain_rng(config.seed);
    let mut draws = Vec::with_capacity(config.iterations - config.burn_in);
    for iter in 1..=config.iterations {
        // P(theta_2 | theta_1, y_2) ∝ P(y_2 | theta_2) P(theta_2 | theta_1)
        let (m, v) = product(&[(theta1, params.state_var), (y2, params.obs_var)]);
        let theta2 = normal(&mut rng, m, v);
        // P(theta_1 | theta_2, y_1) ∝ P(theta_2 | theta_1) L(theta_1; y_1) P(theta_1)
        let (m, v) = product(&[
            (params.prior_mean, params.first_state_var()),
            (theta2, params.state_var),
            (y1, params.obs_var),
        ]);
        theta1 = normal(&mut rng, m, v);
        if iter > config.burn_in {
            draws.push(vec![theta1, theta2]);
        }
    }
    Ok(GibbsSamples {
        draws,
        burn_in: config.burn_in,
    })
}

/// Sampler over theta_1..theta_T for any T >= 1, in the configured mode.
pub fn gibbs_chain(
    ys: &ObservationSeries,
    params: &LocalLevelParams,
    config: &GibbsConfig,
) -> Result<GibbsSamples> {
    check_proper(params)?;
    config.validate()?;
    if ys.is_empty() {
        return Err(Error::param("Gibbs sampling needs at least one observation"));
    }
    match config.mode {
        GibbsMode::SingleSite => single_site(&ys.observations, params, config),
        GibbsMode::Ffbs => ffbs(ys, params, config),
    }
}

fn chain_rng(seed: u64) -> StreamRng {
    RandomStreams::new(seed).next_epoch().shared()
}

fn product(factors: &[(f64, f64)]) -> (f64, f64) {
    gaussian_product(factors).expect("at least one factor")
}

/// Full conditional of theta_t (0-based `t`) given its neighbours and y_t.
fn full_conditional(path: &[f64], ys: &[f64], params: &LocalLevelParams, t: usize) -> (f64, f64) {
    let mut factors = [(0.0, 0.0); 3];
    let mut n = 0;
    factors[n] = if t == 0 {
        (params.prior_mean, params.first_state_var())
    } else {
        (path[t - 1], params.state_var)
    };
    n += 1;
    if t + 1 < path.len() {
        factors[n] = (path[t + 1], params.state_var);
        n += 1;
    }
    factors[n] = (ys[t], params.obs_var);
    n += 1;
    product(&factors[..n])
}

fn single_site(ys: &[f64], params: &LocalLevelParams, config: &GibbsConfig) -> Result<GibbsSamples> {
    let mut path = config.initial_path(ys)?;
    let mut rng = chain_rng(config.seed);
    let mut draws = Vec::with_capacity(config.iterations - config.burn_in);
    for iter in 1..=config.iterations {
        for t in (0..path.len()).rev() {
            let (m, v) = full_conditional(&path, ys, params, t);
            path[t] = normal(&mut rng, m, v);
        }
        if iter > config.burn_in {
            draws.push(path.clone());
        }
    }
    Ok(GibbsSamples {
        draws,
        burn_in: config.burn_in,
    })
}

fn ffbs(ys: &ObservationSeries, params: &LocalLevelParams, config: &GibbsConfig) -> Result<GibbsSamples> {
    let trace = filter_series(params, ys)?;
    let mut rng = chain_rng(config.seed);
    let mut draws = Vec::with_capacity(config.iterations - config.burn_in);
    let mut path = vec![0.0; ys.len()];
    for iter in 1..=config.iterations {
        backward_sample(&trace, params, &mut rng, &mut path);
        if iter > config.burn_in {
            draws.push(path.clone());
        }
    }
    Ok(GibbsSamples {
        draws,
        burn_in: config.burn_in,
    })
}

/// One joint draw of the path from the forward trace.
fn backward_sample(trace: &FilterTrace, params: &LocalLevelParams, rng: &mut StreamRng, path: &mut [f64]) {
    let n = trace.len();
    let last = trace.records[n - 1].posterior;
    path[n - 1] = normal(rng, last.mean, last.variance);
    for t in (0..n - 1).rev() {
        let filtered = trace.records[t].posterior;
        let next_pred = trace.records[t + 1].predicted;
        let gain = backward_gain(filtered.variance, next_pred.variance);
        let m = filtered.mean + gain * (path[t + 1] - next_pred.mean);
        let v = if next_pred.variance > 0.0 {
            filtered.variance * params.state_var / next_pred.variance
        } else {
            0.0
        };
        path[t] = normal(rng, m, v);
    }
}
