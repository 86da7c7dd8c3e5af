//! The local-level model, the AR(1) generator and seeded simulation.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, header, write_table, NumericTable};
use crate::rng::{normal, RandomStreams};

/// Constants of the local-level model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalLevelParams {
    /// Observation noise variance.
    pub obs_var: f64,
    /// State (random-walk) noise variance.
    pub state_var: f64,
    pub prior_mean: f64,
    /// Variance of theta_0.
    pub prior_var: f64,
}

impl LocalLevelParams {
    pub fn new(obs_var: f64, state_var: f64, prior_mean: f64, prior_var: f64) -> Result<Self> {
        let params = Self {
            obs_var,
            state_var,
            prior_mean,
            prior_var,
        };
        params.validate()?;
        Ok(params)
    }

    /// Every violated invariant, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, value) in [
            ("obs_var", self.obs_var),
            ("state_var", self.state_var),
            ("prior_var", self.prior_var),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                out.push(format!("LocalLevelParams: {name} must be a finite value >= 0, got {value}"));
            }
        }
        if !self.prior_mean.is_finite() {
            out.push(format!(
                "LocalLevelParams: prior_mean must be finite, got {}",
                self.prior_mean
            ));
        }
        if out.is_empty() && self.obs_var + self.state_var + self.prior_var <= 0.0 {
            out.push("LocalLevelParams: obs_var + state_var + prior_var must be > 0".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(msg) => Err(Error::Parameter(msg)),
        }
    }

    /// Sign and finiteness checks only; a fully deterministic model passes.
    pub fn validate_nonnegative(&self) -> Result<()> {
        match self
            .violations()
            .into_iter()
            .find(|msg| !msg.contains(" + "))
        {
            None => Ok(()),
            Some(msg) => Err(Error::Parameter(msg)),
        }
    }

    /// Marginal prior variance of theta_1 once theta_0 is integrated out.
    pub fn first_state_var(&self) -> f64 {
        self.prior_var + self.state_var
    }
}

/// Observations y_1..y_T, with the latent path when the data was simulated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSeries {
    pub observations: Vec<f64>,
    pub latent_states: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl ObservationSeries {
    pub fn new(observations: Vec<f64>) -> Self {
        Self {
            observations,
            latent_states: None,
            seed: None,
        }
    }

    pub fn with_latent(observations: Vec<f64>, latent_states: Vec<f64>) -> Result<Self> {
        if observations.len() != latent_states.len() {
            return Err(Error::LengthMismatch {
                context: "observations vs latent states",
                left: observations.len(),
                right: latent_states.len(),
            });
        }
        Ok(Self {
            observations,
            latent_states: Some(latent_states),
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// CSV with header `t,y,theta`; `theta` is omitted when there is no latent path.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cols = if self.latent_states.is_some() {
            header(&["t", "y", "theta"])
        } else {
            header(&["t", "y"])
        };
        let rows = self.observations.iter().enumerate().map(|(i, &y)| {
            let mut row = vec![(i + 1).to_string(), fmt_f64(y)];
            if let Some(theta) = &self.latent_states {
                row.push(fmt_f64(theta[i]));
            }
            row
        });
        write_table(writer, &cols, rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let table = NumericTable::from_path(path)?;
        Self::from_table(&table)
    }

    pub fn from_table(table: &NumericTable) -> Result<Self> {
        let t = table.require_column("t")?;
        let observations = table.require_column("y")?;
        for (i, &ti) in t.iter().enumerate() {
            if ti != (i + 1) as f64 {
                return Err(Error::Load {
                    path: table.source.clone(),
                    row: i + 2,
                    column: "t".to_string(),
                    message: format!("expected t = {}, got {ti}", i + 1),
                });
            }
        }
        Ok(Self {
            observations,
            latent_states: table.column("theta"),
            seed: None,
        })
    }
}

/// y_t = (1 + alpha) y_{t-1} + e_t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ar1Params {
    pub alpha: f64,
    pub start_value: f64,
    pub noise_var: f64,
}

impl Ar1Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::param(format!(
                "Ar1Params: noise_var must be a finite value >= 0, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }
}

/// Draw theta_0 from the prior, then run the state and observation equations for T steps.
///
/// Unlike the inference engines this accepts the all-zero model, which
/// simply reproduces `prior_mean` forever.
pub fn simulate_local_level(
    params: &LocalLevelParams,
    horizon: usize,
    seed: u64,
) -> Result<ObservationSeries> {
    params.validate_nonnegative()?;
    let mut rng = RandomStreams::new(seed).next_epoch().shared();
    let mut theta = normal(&mut rng, params.prior_mean, params.prior_var);
    let mut ys = Vec::with_capacity(horizon);
    let mut thetas = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        theta += normal(&mut rng, 0.0, params.state_var);
        thetas.push(theta);
        ys.push(theta + normal(&mut rng, 0.0, params.obs_var));
    }
    Ok(ObservationSeries {
        observations: ys,
        latent_states: Some(thetas),
        seed: Some(seed),
    })
}

/// AR(1) with i.i.d. Gaussian increments, returning y_1..y_T.
pub fn simulate_ar1(params: &Ar1Params, horizon: usize, seed: u64) -> Result<ObservationSeries> {
    params.validate()?;
    let mut rng = RandomStreams::new(seed).next_epoch().shared();
    let coef = 1.0 + params.alpha;
    let mut y = params.start_value;
    let mut ys = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        y = coef * y + normal(&mut rng, 0.0, params.noise_var);
        ys.push(y);
    }
    Ok(ObservationSeries {
        observations: ys,
        latent_states: None,
        seed: Some(seed),
    })
}

/// Stationarity of the AR(1) above: strictly -2 < alpha < 0.
pub fn check_ar1_stationary(alpha: f64) -> bool {
    -2.0 < alpha && alpha < 0.0
}
