//! Exact Gaussian recursions for the local-level model.
//!
//! These closed forms are the reference every Monte Carlo engine in the crate
//! is measured against, so the tests check them against direct numerical
//! integration rather than against re-derived algebra.

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, header, write_table};
use crate::model::{LocalLevelParams, ObservationSeries};

/// Univariate normal N(mean, variance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianBelief {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::param(format!(
                "GaussianBelief needs finite mean and variance >= 0, got N({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// theta_t | Y_{t-1}: N(m, C + state_var).
pub fn predict_state(belief: &GaussianBelief, state_var: f64) -> GaussianBelief {
    GaussianBelief {
        mean: belief.mean,
        variance: belief.variance + state_var,
    }
}

/// Y_t | Y_{t-1}: N(m, C + state_var + obs_var).
pub fn predict_observation(belief: &GaussianBelief, state_var: f64, obs_var: f64) -> GaussianBelief {
    GaussianBelief {
        mean: belief.mean,
        variance: belief.variance + state_var + obs_var,
    }
}

/// Conjugate update of a predicted state belief with one observation.
pub fn update(predicted: &GaussianBelief, y: f64, obs_var: f64) -> Result<GaussianBelief> {
    let r = predicted.variance;
    let s = r + obs_var;
    if s == 0.0 {
        if y == predicted.mean {
            return Ok(*predicted);
        }
        return Err(Error::DegenerateUpdate {
            predicted_mean: predicted.mean,
            observation: y,
        });
    }
    let gain = r / s;
    Ok(GaussianBelief {
        mean: predicted.mean + gain * (y - predicted.mean),
        // r * obs_var / s rather than (1 - gain) * r keeps the result >= 0
        variance: r * obs_var / s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterRecord {
    /// 1-based time index.
    pub t: usize,
    pub predicted: GaussianBelief,
    pub predictive_obs: GaussianBelief,
    pub posterior: GaussianBelief,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterTrace {
    pub records: Vec<FilterRecord>,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn posterior_means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.posterior.mean).collect()
    }

    pub fn posterior_variances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.posterior.variance).collect()
    }

    pub fn final_posterior(&self) -> Option<GaussianBelief> {
        self.records.last().map(|r| r.posterior)
    }

    /// `t,pred_mean,pred_var,predobs_mean,predobs_var,post_mean,post_var`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cols = header(&[
            "t",
            "pred_mean",
            "pred_var",
            "predobs_mean",
            "predobs_var",
            "post_mean",
            "post_var",
        ]);
        let rows = self.records.iter().map(|r| {
            vec![
                r.t.to_string(),
                fmt_f64(r.predicted.mean),
                fmt_f64(r.predicted.variance),
                fmt_f64(r.predictive_obs.mean),
                fmt_f64(r.predictive_obs.variance),
                fmt_f64(r.posterior.mean),
                fmt_f64(r.posterior.variance),
            ]
        });
        write_table(writer, &cols, rows)
    }
}

pub fn prior_belief(params: &LocalLevelParams) -> GaussianBelief {
    GaussianBelief {
        mean: params.prior_mean,
        variance: params.prior_var,
    }
}

/// One predict/update cycle.
pub fn filter_step(
    params: &LocalLevelParams,
    previous: &GaussianBelief,
    t: usize,
    y: f64,
) -> Result<FilterRecord> {
    let predicted = predict_state(previous, params.state_var);
    let predictive_obs = predict_observation(previous, params.state_var, params.obs_var);
    let posterior = update(&predicted, y, params.obs_var)?;
    Ok(FilterRecord {
        t,
        predicted,
        predictive_obs,
        posterior,
    })
}

/// Forward pass over y_1..y_T starting from N(prior_mean, prior_var).
pub fn filter_series(params: &LocalLevelParams, ys: &ObservationSeries) -> Result<FilterTrace> {
    params.validate()?;
    let mut belief = prior_belief(params);
    let mut records = Vec::with_capacity(ys.len());
    for (i, &y) in ys.observations.iter().enumerate() {
        let record = filter_step(params, &belief, i + 1, y)?;
        belief = record.posterior;
        records.push(record);
    }
    Ok(FilterTrace { records })
}

/// Fixed-interval smoothing: P(theta_t | y_1..y_T) for t = 1..T.
pub fn smooth_series(params: &LocalLevelParams, ys: &ObservationSeries) -> Result<Vec<GaussianBelief>> {
    let trace = filter_series(params, ys)?;
    Ok(smooth_trace(&trace))
}

/// Backward-gain pass over an existing forward trace.
pub fn smooth_trace(trace: &FilterTrace) -> Vec<GaussianBelief> {
    let n = trace.len();
    let mut out: Vec<GaussianBelief> = trace.records.iter().map(|r| r.posterior).collect();
    for t in (0..n.saturating_sub(1)).rev() {
        let filtered = trace.records[t].posterior;
        let next_pred = trace.records[t + 1].predicted;
        let gain = backward_gain(filtered.variance, next_pred.variance);
        let next = out[t + 1];
        let mean = filtered.mean + gain * (next.mean - next_pred.mean);
        let variance = filtered.variance + gain * gain * (next.variance - next_pred.variance);
        out[t] = GaussianBelief {
            mean,
            variance: variance.max(0.0),
        };
    }
    out
}

/// C_t / R_{t+1}; zero when the next prediction is deterministic (then C_t is zero too).
pub(crate) fn backward_gain(filtered_var: f64, next_predicted_var: f64) -> f64 {
    if next_predicted_var > 0.0 {
        filtered_var / next_predicted_var
    } else {
        0.0
    }
}
