//! Small numerical helpers shared by the engines.

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// log N(x; mean, var). Zero variance is a point mass: 0 at the mean, -inf elsewhere.
pub fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    if var == 0.0 {
        return if x == mean { 0.0 } else { f64::NEG_INFINITY };
    }
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}

/// Product of Gaussian factors in one variable, each given as (mean, variance).
///
/// Returns the normalized product as (mean, variance). A zero-variance factor
/// pins the result to its mean; when several do, the first one wins.
/// Returns `None` when no factor carries information (empty input).
pub fn gaussian_product(factors: &[(f64, f64)]) -> Option<(f64, f64)> {
    if let Some(&(mean, _)) = factors.iter().find(|&&(_, var)| var == 0.0) {
        return Some((mean, 0.0));
    }
    if factors.is_empty() {
        return None;
    }
    let mut precision = 0.0;
    let mut weighted = 0.0;
    for &(mean, var) in factors {
        precision += 1.0 / var;
        weighted += mean / var;
    }
    Some((weighted / precision, 1.0 / precision))
}
