#![allow(dead_code)]

use std::io::Write;

use filterlab::model::simulate_local_level;
use filterlab::{LocalLevelParams, ObservationSeries};

/// Seed of the data series shared by the particle-filter benchmarks.
pub const BENCH_DATA_SEED: u64 = 1234;
pub const BENCH_HORIZON: usize = 50;

/// sigma_v^2 = sigma_w^2 = 1, m_0 = 0, C_0 = 1.
pub fn bench_params() -> LocalLevelParams {
    LocalLevelParams::new(1.0, 1.0, 0.0, 1.0).unwrap()
}

pub fn bench_series() -> ObservationSeries {
    simulate_local_level(&bench_params(), BENCH_HORIZON, BENCH_DATA_SEED).unwrap()
}

/// Print one verdict line outside the test harness's output capture, then assert.
pub fn verdict(name: &str, ok: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{name} failed: {detail}");
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Filtered and smoothed (mean, variance) pairs from numerical integration.
#[derive(Debug)]
pub struct GridMoments {
    pub filtered: Vec<(f64, f64)>,
    pub smoothed: Vec<(f64, f64)>,
}

fn gauss(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp()
}

/// Densities tabulated on a uniform grid, up to a constant.
struct Tabulated {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl Tabulated {
    fn x(&self, j: usize) -> f64 {
        self.lo + self.h * j as f64
    }

    fn trapezoid_weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.values.len() {
            0.5 * self.h
        } else {
            self.h
        }
    }

    fn normalize_max(&mut self) {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.0, "grid density vanished");
        self.values.iter_mut().for_each(|v| *v /= max);
    }

    /// Trapezoid integral of the tabulated values against a Gaussian kernel
    /// centred at `at`, skipping nodes where the kernel or the density is
    /// below double-precision relevance.
    fn convolve_at(&self, at: f64, kernel_var: f64, weight: impl Fn(usize) -> f64) -> f64 {
        let reach = 12.0 * kernel_var.sqrt();
        let first = (((at - reach - self.lo) / self.h).floor().max(0.0)) as usize;
        let last = ((((at + reach - self.lo) / self.h).ceil()) as usize).min(self.values.len() - 1);
        let mut sum = 0.0;
        for j in first..=last {
            let f = self.values[j] * weight(j);
            if f > 1e-40 {
                sum += self.trapezoid_weight(j) * gauss(at, self.x(j), kernel_var) * f;
            }
        }
        sum
    }
}

fn trapezoid_moments(density: impl Fn(f64) -> f64, mean: f64, var: f64) -> (f64, f64) {
    // [m - 10 sd, m + 10 sd] at step 1e-3 sd
    let sd = var.sqrt();
    let n = 20_001;
    let h = 20.0 * sd / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| mean - 10.0 * sd + h * i as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| density(x)).collect();
    let tw = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let z: f64 = (0..n).map(|i| tw(i) * fs[i]).sum();
    let m: f64 = (0..n).map(|i| tw(i) * fs[i] * xs[i]).sum::<f64>() / z;
    let v: f64 = (0..n).map(|i| tw(i) * fs[i] * (xs[i] - m).powi(2)).sum::<f64>() / z;
    (m, v)
}

fn tabulated_moments(t: &Tabulated, extra: impl Fn(usize) -> f64) -> (f64, f64) {
    let n = t.values.len();
    let f: Vec<f64> = (0..n).map(|j| t.trapezoid_weight(j) * t.values[j] * extra(j)).collect();
    let z: f64 = f.iter().sum();
    let m = (0..n).map(|j| f[j] * t.x(j)).sum::<f64>() / z;
    let v = (0..n).map(|j| f[j] * (t.x(j) - m).powi(2)).sum::<f64>() / z;
    (m, v)
}

/// Forward and backward recursions of the local-level model by quadrature on
/// a coarse uniform grid, followed by moment integration on fine grids
/// placed from the coarse moments.
pub fn grid_oracle(params: &LocalLevelParams, ys: &[f64]) -> GridMoments {
    let (sv, sw) = (params.obs_var, params.state_var);
    assert!(sv > 0.0 && sw > 0.0 && params.prior_var > 0.0);
    let n_obs = ys.len();
    let narrowest = (sv.min(sw).min(params.prior_var) / 2.0).sqrt();
    let pad = 12.0 * (params.prior_var + n_obs as f64 * sw + sv).sqrt();
    let lo = ys.iter().cloned().fold(params.prior_mean, f64::min) - pad;
    let hi = ys.iter().cloned().fold(params.prior_mean, f64::max) + pad;
    let h = narrowest / 4.0;
    let n = ((hi - lo) / h).ceil() as usize + 1;
    let grid = |values: Vec<f64>| Tabulated { lo, h, values };
    let xs: Vec<f64> = (0..n).map(|j| lo + h * j as f64).collect();

    // forward: filtered densities at t = 0..T
    let mut filtered = vec![grid(xs.iter().map(|&x| gauss(x, params.prior_mean, params.prior_var)).collect())];
    for &y in ys {
        let prev = filtered.last().unwrap();
        let mut next = grid(
            xs.iter()
                .map(|&x| gauss(y, x, sv) * prev.convolve_at(x, sw, |_| 1.0))
                .collect(),
        );
        next.normalize_max();
        filtered.push(next);
    }

    // backward: beta_t(x) = p(y_{t+1..T} | theta_t = x), index t-1 for t = 1..T
    let mut betas = vec![grid(vec![1.0; n])];
    for t in (1..n_obs).rev() {
        let after = betas.last().unwrap();
        let y_next = ys[t];
        let mut b = grid(
            xs.iter()
                .map(|&x| after.convolve_at(x, sw, |k| gauss(y_next, xs[k], sv)))
                .collect(),
        );
        b.normalize_max();
        betas.push(b);
    }
    betas.reverse();

    let mut out = GridMoments {
        filtered: Vec::with_capacity(n_obs),
        smoothed: Vec::with_capacity(n_obs),
    };
    for t in 1..=n_obs {
        let y = ys[t - 1];
        let prev = &filtered[t - 1];
        let filter_density = |x: f64| gauss(y, x, sv) * prev.convolve_at(x, sw, |_| 1.0);
        let beta_density = |x: f64| {
            if t == n_obs {
                1.0
            } else {
                let y_next = ys[t];
                betas[t].convolve_at(x, sw, |k| gauss(y_next, xs[k], sv))
            }
        };
        let (cm, cv) = tabulated_moments(&filtered[t], |_| 1.0);
        out.filtered.push(trapezoid_moments(filter_density, cm, cv));
        let (sm, sv_) = tabulated_moments(&filtered[t], |j| betas[t - 1].values[j]);
        out.smoothed
            .push(trapezoid_moments(|x| filter_density(x) * beta_density(x), sm, sv_));
    }
    out
}
