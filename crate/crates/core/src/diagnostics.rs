//! Doob decomposition of an observed series, martingale-difference checks,
//! and deviation metrics between an engine and the exact filter.
//!
//! With a one-step predictor p_t = E[y_t | y_1..y_{t-1}] and y_0 = baseline:
//!
//! ```text
//! V(t) = p_t - y_{t-1}          predicted change
//! dM(t) = y_t - p_t             innovation
//! U(t) = sum V,  M(t) = sum dM, M(0) = 0
//! y_t = U(t) + M(t) + baseline
//! ```

use std::io::Write;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, header, write_table};
use crate::kalman::{predict_observation, predict_state, prior_belief, update, FilterTrace, GaussianBelief};
use crate::model::{LocalLevelParams, ObservationSeries};
use crate::numeric::CompensatedSum;

/// Predictive mean of the next observation given the history so far.
///
/// `predict` is called with prefixes y_1..y_{t-1} of increasing length,
/// starting from the empty prefix.
pub trait OneStepPredictor {
    fn predict(&mut self, history: &[f64]) -> f64;
}

impl<F: FnMut(&[f64]) -> f64> OneStepPredictor for F {
    fn predict(&mut self, history: &[f64]) -> f64 {
        self(history)
    }
}

/// Predicts y_t = y_{t-1}, or `baseline` for the first observation.
#[derive(Clone, Copy, Debug)]
pub struct LastValuePredictor {
    pub baseline: f64,
}

impl OneStepPredictor for LastValuePredictor {
    fn predict(&mut self, history: &[f64]) -> f64 {
        history.last().copied().unwrap_or(self.baseline)
    }
}

/// The exact local-level one-step predictive mean, updated incrementally.
#[derive(Clone, Debug)]
pub struct KalmanPredictor {
    params: LocalLevelParams,
    belief: GaussianBelief,
    consumed: usize,
    failed: bool,
}

impl KalmanPredictor {
    pub fn new(params: LocalLevelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            belief: prior_belief(&params),
            consumed: 0,
            failed: false,
        })
    }
}

impl OneStepPredictor for KalmanPredictor {
    fn predict(&mut self, history: &[f64]) -> f64 {
        if history.len() < self.consumed {
            *self = Self {
                belief: prior_belief(&self.params),
                consumed: 0,
                failed: false,
                ..self.clone()
            };
        }
        while !self.failed && self.consumed < history.len() {
            let predicted = predict_state(&self.belief, self.params.state_var);
            match update(&predicted, history[self.consumed], self.params.obs_var) {
                Ok(post) => self.belief = post,
                Err(_) => self.failed = true,
            }
            self.consumed += 1;
        }
        if self.failed {
            return f64::NAN;
        }
        predict_observation(&self.belief, self.params.state_var, self.params.obs_var).mean
    }
}

/// Adds a constant to another predictor's output.
#[derive(Clone, Debug)]
pub struct Biased<P> {
    pub inner: P,
    pub offset: f64,
}

impl<P: OneStepPredictor> OneStepPredictor for Biased<P> {
    fn predict(&mut self, history: &[f64]) -> f64 {
        self.inner.predict(history) + self.offset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoobDecomposition {
    pub baseline: f64,
    pub y: Vec<f64>,
    /// Predicted changes V(t).
    pub v: Vec<f64>,
    /// Cumulative predicted changes U(t).
    pub u: Vec<f64>,
    /// Prediction errors M(t) - M(t-1).
    pub m_increment: Vec<f64>,
    /// Cumulative prediction errors M(t).
    pub m: Vec<f64>,
}

impl DoobDecomposition {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Largest |U(t) + M(t) + baseline - y_t| relative to the magnitudes involved.
    pub fn max_relative_reconstruction_error(&self) -> f64 {
        (0..self.len())
            .map(|t| {
                let rebuilt = self.u[t] + self.m[t] + self.baseline;
                let scale = [self.y[t], self.u[t], self.m[t], self.baseline]
                    .iter()
                    .fold(f64::MIN_POSITIVE, |acc, x| acc.max(x.abs()));
                (rebuilt - self.y[t]).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    /// `t,y,v,u,m_increment,m`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cols = header(&["t", "y", "v", "u", "m_increment", "m"]);
        let rows = (0..self.len()).map(|t| {
            vec![
                (t + 1).to_string(),
                fmt_f64(self.y[t]),
                fmt_f64(self.v[t]),
                fmt_f64(self.u[t]),
                fmt_f64(self.m_increment[t]),
                fmt_f64(self.m[t]),
            ]
        });
        write_table(writer, &cols, rows)
    }
}

pub fn doob_decompose<P: OneStepPredictor + ?Sized>(
    ys: &ObservationSeries,
    predictor: &mut P,
    baseline: f64,
) -> Result<DoobDecomposition> {
    if ys.is_empty() {
        return Err(Error::param("Doob decomposition needs at least one observation"));
    }
    let y = &ys.observations;
    let n = y.len();
    let mut out = DoobDecomposition {
        baseline,
        y: y.clone(),
        v: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        m_increment: Vec::with_capacity(n),
        m: Vec::with_capacity(n),
    };
    let mut u_sum = CompensatedSum::new();
    let mut m_sum = CompensatedSum::new();
    let mut previous = baseline;
    for t in 0..n {
        let prediction = predictor.predict(&y[..t]);
        if !prediction.is_finite() {
            return Err(Error::Predictor {
                t: t + 1,
                value: prediction,
            });
        }
        let v = prediction - previous;
        let dm = y[t] - prediction;
        u_sum.add(v);
        m_sum.add(dm);
        out.v.push(v);
        out.m_increment.push(dm);
        out.u.push(u_sum.value());
        out.m.push(m_sum.value());
        previous = y[t];
    }
    Ok(out)
}

/// Sample mean of the martingale differences and their lag-1 product moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthogonalityCheck {
    pub mean_increment: f64,
    /// Mean of dM(t) dM(t-1) over t = 2..T.
    pub lag1_cov: f64,
    pub mean_se: f64,
    pub lag1_se: f64,
}

impl OrthogonalityCheck {
    pub fn se_bounds(&self) -> (f64, f64) {
        (self.mean_se, self.lag1_se)
    }

    pub fn mean_within(&self, k: f64) -> bool {
        self.mean_increment.abs() <= k * self.mean_se
    }

    pub fn lag1_within(&self, k: f64) -> bool {
        self.lag1_cov.abs() <= k * self.lag1_se
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn martingale_orthogonality_check(decomp: &DoobDecomposition) -> Result<OrthogonalityCheck> {
    let d = &decomp.m_increment;
    if d.len() < 3 {
        return Err(Error::param("orthogonality check needs T >= 3"));
    }
    let (mean_increment, mean_se) = mean_and_se(d);
    let products: Vec<f64> = d.windows(2).map(|w| w[0] * w[1]).collect();
    let (lag1_cov, lag1_se) = mean_and_se(&products);
    Ok(OrthogonalityCheck {
        mean_increment,
        lag1_cov,
        mean_se,
        lag1_se,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleComparison {
    pub rmse: f64,
    pub max_abs: f64,
    /// Signed deviation engine - oracle at each t.
    pub per_t: Vec<f64>,
}

/// Deviation of engine filtered means from the Kalman filtered means.
pub fn compare_to_oracle(engine_means: &[f64], oracle_trace: &FilterTrace) -> Result<OracleComparison> {
    compare_means(engine_means, &oracle_trace.posterior_means())
}

pub fn compare_means(engine: &[f64], oracle: &[f64]) -> Result<OracleComparison> {
    if engine.len() != oracle.len() {
        return Err(Error::LengthMismatch {
            context: "engine means vs oracle",
            left: engine.len(),
            right: oracle.len(),
        });
    }
    let per_t: Vec<f64> = engine.iter().zip(oracle).map(|(e, o)| e - o).collect();
    let max_abs = per_t.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let rmse = if per_t.is_empty() {
        0.0
    } else {
        (per_t.iter().map(|d| d * d).sum::<f64>() / per_t.len() as f64).sqrt()
    };
    Ok(OracleComparison { rmse, max_abs, per_t })
}
