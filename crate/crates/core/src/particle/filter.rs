use std::io::Write;

use rayon::prelude::*;

use super::resample::{resample, resample_indices, ResamplingPolicy};
use super::weights::{normalize, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, header, write_table};
use crate::model::{LocalLevelParams, ObservationSeries};
use crate::numeric::{gaussian_product, log_normal_density};
use crate::rng::{normal, Epoch, RandomStreams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Protocol {
    /// Propagate through the transition, then weight by L(theta_{t+1}; y_{t+1}).
    #[default]
    PropagateFirst,
    /// Weight by P(y_{t+1} | theta_t), resample, then draw from P(theta_{t+1} | theta_t, y_{t+1}).
    UpdateFirst,
    /// Propagate-first without resampling.
    Sis,
    /// Auxiliary particle filter.
    Apf,
}

/// How per-particle work is scheduled. Both give bit-identical results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PfConfig {
    pub n_particles: usize,
    pub protocol: Protocol,
    pub resampling: ResamplingPolicy,
    pub seed: u64,
    pub execution: Execution,
    /// Keep every post-step ensemble in the trace.
    pub keep_ensembles: bool,
}

impl PfConfig {
    pub fn new(n_particles: usize, protocol: Protocol, seed: u64) -> Self {
        Self {
            n_particles,
            protocol,
            resampling: ResamplingPolicy::default(),
            seed,
            execution: Execution::default(),
            keep_ensembles: false,
        }
    }

    pub fn with_resampling(mut self, resampling: ResamplingPolicy) -> Self {
        self.resampling = resampling;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self, params: &LocalLevelParams) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::param("PfConfig: n_particles must be >= 1"));
        }
        self.resampling.validate()?;
        params.validate()?;
        require_noise(params)
    }
}

fn require_noise(params: &LocalLevelParams) -> Result<()> {
    if params.obs_var + params.state_var <= 0.0 {
        return Err(Error::param(
            "particle filtering needs obs_var + state_var > 0",
        ));
    }
    Ok(())
}

/// Result of advancing an ensemble by one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub ensemble: ParticleEnsemble,
    /// ESS of the weights before any resampling in this step.
    pub ess: f64,
    pub resampled: bool,
    /// Filtered mean and variance estimated by this step.
    pub mean: f64,
    pub variance: f64,
}

fn map_particles<F>(n: usize, execution: Execution, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    match execution {
        Execution::Serial => (0..n).map(f).collect(),
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

fn transition(epoch: &Epoch, i: usize, from: f64, state_var: f64) -> f64 {
    normal(&mut epoch.stream(i as u64), from, state_var)
}

/// Propagate through theta_{t+1} = theta_t + w, weight by the filtering
/// likelihood N(y; theta_{t+1}, obs_var), then resample per `policy`.
pub fn pf_step_propagate_first(
    ensemble: &ParticleEnsemble,
    y_next: f64,
    params: &LocalLevelParams,
    policy: &ResamplingPolicy,
    rng: &mut RandomStreams,
    execution: Execution,
) -> Result<StepOutcome> {
    let epoch = rng.next_epoch();
    let prev = ensemble.values();
    let values = map_particles(ensemble.len(), execution, |i| {
        transition(&epoch, i, prev[i], params.state_var)
    });
    let log_w: Vec<f64> = ensemble
        .log_weights()
        .iter()
        .zip(&values)
        .map(|(lw, &theta)| lw + log_normal_density(y_next, theta, params.obs_var))
        .collect();
    let weighted = ParticleEnsemble::from_log_weights(values, log_w)?;
    let ess = weighted.ess();
    let (mean, variance) = (weighted.mean(), weighted.variance());
    let resampled = policy.should_resample(ess, weighted.len());
    let ensemble = if resampled {
        resample(&weighted, policy.scheme, &mut epoch.shared())
    } else {
        weighted
    };
    Ok(StepOutcome {
        ensemble,
        ess,
        resampled,
        mean,
        variance,
    })
}

/// Sequential importance sampling: propagate-first with resampling disabled,
/// so log-weights keep accumulating.
pub fn sis_step(
    ensemble: &ParticleEnsemble,
    y_next: f64,
    params: &LocalLevelParams,
    rng: &mut RandomStreams,
    execution: Execution,
) -> Result<StepOutcome> {
    pf_step_propagate_first(ensemble, y_next, params, &ResamplingPolicy::never(), rng, execution)
}

/// Weight by the smoothing likelihood N(y; theta_t, obs_var + state_var),
/// resample per `policy`, then draw each survivor from the data-conditioned
/// transition P(theta_{t+1} | theta_t, y_{t+1}).
pub fn pf_step_update_first(
    ensemble: &ParticleEnsemble,
    y_next: f64,
    params: &LocalLevelParams,
    policy: &ResamplingPolicy,
    rng: &mut RandomStreams,
    execution: Execution,
) -> Result<StepOutcome> {
    require_noise(params)?;
    let epoch = rng.next_epoch();
    let predictive_var = params.obs_var + params.state_var;
    let log_w: Vec<f64> = ensemble
        .log_weights()
        .iter()
        .zip(ensemble.values())
        .map(|(lw, &theta)| lw + log_normal_density(y_next, theta, predictive_var))
        .collect();
    let weighted = ParticleEnsemble::from_log_weights(ensemble.values().to_vec(), log_w)?;
    let ess = weighted.ess();
    let resampled = policy.should_resample(ess, weighted.len());
    let base = if resampled {
        resample(&weighted, policy.scheme, &mut epoch.shared())
    } else {
        weighted
    };
    let from = base.values();
    let values = map_particles(base.len(), execution, |i| {
        let (m, v) = conditional_transition(from[i], y_next, params);
        normal(&mut epoch.stream(i as u64), m, v)
    });
    let ensemble = base.with_values(values);
    let (mean, variance) = (ensemble.mean(), ensemble.variance());
    Ok(StepOutcome {
        ensemble,
        ess,
        resampled,
        mean,
        variance,
    })
}

/// P(theta_{t+1} | theta_t, y_{t+1}) ∝ N(y; theta_{t+1}, obs_var) N(theta_{t+1}; theta_t, state_var).
///
/// Zero state noise pins the result at theta_t; zero observation noise pins it at y.
pub fn conditional_transition(theta: f64, y_next: f64, params: &LocalLevelParams) -> (f64, f64) {
    gaussian_product(&[(theta, params.state_var), (y_next, params.obs_var)])
        .expect("two factors")
}

/// Auxiliary particle filter step.
///
/// First-stage weights use the exact predictive likelihood
/// N(y; theta_t, obs_var + state_var); the ensemble is always resampled on
/// them with `policy.scheme` (the trigger is not consulted). Survivors move
/// through the plain transition and are reweighted by the filtering
/// likelihood over their ancestor's first-stage likelihood.
pub fn apf_step(
    ensemble: &ParticleEnsemble,
    y_next: f64,
    params: &LocalLevelParams,
    policy: &ResamplingPolicy,
    rng: &mut RandomStreams,
    execution: Execution,
) -> Result<StepOutcome> {
    require_noise(params)?;
    let epoch = rng.next_epoch();
    let predictive_var = params.obs_var + params.state_var;
    let first_stage: Vec<f64> = ensemble
        .values()
        .iter()
        .map(|&theta| log_normal_density(y_next, theta, predictive_var))
        .collect();
    let aux_log_w: Vec<f64> = ensemble
        .log_weights()
        .iter()
        .zip(&first_stage)
        .map(|(lw, l)| lw + l)
        .collect();
    let (aux_w, _) = normalize(&aux_log_w)?;
    let ancestors = resample_indices(&aux_w, policy.scheme, &mut epoch.shared());
    let prev = ensemble.values();
    let values = map_particles(ancestors.len(), execution, |i| {
        transition(&epoch, i, prev[ancestors[i]], params.state_var)
    });
    let log_w: Vec<f64> = values
        .iter()
        .zip(&ancestors)
        .map(|(&theta, &a)| log_normal_density(y_next, theta, params.obs_var) - first_stage[a])
        .collect();
    let ensemble = ParticleEnsemble::from_log_weights(values, log_w)?;
    let ess = ensemble.ess();
    let (mean, variance) = (ensemble.mean(), ensemble.variance());
    Ok(StepOutcome {
        ensemble,
        ess,
        resampled: true,
        mean,
        variance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleRecord {
    /// 0 is the initialization record; 1..=T follow the observations.
    pub t: usize,
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
    pub resampled: bool,
}

impl ParticleRecord {
    /// Monte Carlo standard error of `mean`, sqrt(variance / ESS).
    pub fn mc_se(&self) -> f64 {
        (self.variance / self.ess).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleTrace {
    pub records: Vec<ParticleRecord>,
    /// Post-step ensembles indexed like `records`, when requested.
    pub ensembles: Option<Vec<ParticleEnsemble>>,
}

impl ParticleTrace {
    /// Filtered means for t = 1..=T (the initialization record is skipped).
    pub fn filtered_means(&self) -> Vec<f64> {
        self.records.iter().skip(1).map(|r| r.mean).collect()
    }

    pub fn step_records(&self) -> &[ParticleRecord] {
        self.records.get(1..).unwrap_or(&[])
    }

    /// `t,mean,var,ess,resampled`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cols = header(&["t", "mean", "var", "ess", "resampled"]);
        let rows = self.records.iter().map(|r| {
            vec![
                r.t.to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.variance),
                fmt_f64(r.ess),
                u8::from(r.resampled).to_string(),
            ]
        });
        write_table(writer, &cols, rows)
    }

    /// `t,i,value,weight`; nothing beyond the header unless ensembles were kept.
    pub fn write_ensemble_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cols = header(&["t", "i", "value", "weight"]);
        let empty = Vec::new();
        let ensembles = self.ensembles.as_ref().unwrap_or(&empty);
        let rows = ensembles.iter().enumerate().flat_map(|(t, e)| {
            e.values()
                .iter()
                .zip(e.weights())
                .enumerate()
                .map(move |(i, (v, w))| vec![t.to_string(), i.to_string(), fmt_f64(*v), fmt_f64(*w)])
        });
        write_table(writer, &cols, rows)
    }
}

/// Draw N particles from the prior and fold the configured step over the series.
pub fn run_filter(
    ys: &ObservationSeries,
    params: &LocalLevelParams,
    config: &PfConfig,
) -> Result<ParticleTrace> {
    config.validate(params)?;
    let mut streams = RandomStreams::new(config.seed);
    let init = streams.next_epoch();
    let values = map_particles(config.n_particles, config.execution, |i| {
        normal(&mut init.stream(i as u64), params.prior_mean, params.prior_var)
    });
    let mut ensemble = ParticleEnsemble::uniform(values)?;
    let mut records = vec![ParticleRecord {
        t: 0,
        mean: ensemble.mean(),
        variance: ensemble.variance(),
        ess: ensemble.ess(),
        resampled: false,
    }];
    let mut kept = config.keep_ensembles.then(|| vec![ensemble.clone()]);
    for (i, &y) in ys.observations.iter().enumerate() {
        let policy = &config.resampling;
        let exec = config.execution;
        let step = match config.protocol {
            Protocol::PropagateFirst => {
                pf_step_propagate_first(&ensemble, y, params, policy, &mut streams, exec)?
            }
            Protocol::UpdateFirst => {
                pf_step_update_first(&ensemble, y, params, policy, &mut streams, exec)?
            }
            Protocol::Sis => sis_step(&ensemble, y, params, &mut streams, exec)?,
            Protocol::Apf => apf_step(&ensemble, y, params, policy, &mut streams, exec)?,
        };
        records.push(ParticleRecord {
            t: i + 1,
            mean: step.mean,
            variance: step.variance,
            ess: step.ess,
            resampled: step.resampled,
        });
        ensemble = step.ensemble;
        if let Some(k) = kept.as_mut() {
            k.push(ensemble.clone());
        }
    }
    Ok(ParticleTrace {
        records,
        ensembles: kept,
    })
}
