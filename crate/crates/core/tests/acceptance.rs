//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! on stderr (bypassing output capture) before asserting.

mod common;

use std::time::Instant;

use common::{bench_params, bench_series, grid_oracle, median, verdict};
use filterlab::diagnostics::{
    compare_to_oracle, doob_decompose, martingale_orthogonality_check, Biased, KalmanPredictor,
};
use filterlab::gibbs::{gibbs_chain, gibbs_two_step, GibbsConfig, GibbsMode};
use filterlab::kalman::{filter_series, smooth_series};
use filterlab::model::{check_ar1_stationary, simulate_ar1, simulate_local_level};
use filterlab::particle::{
    resample_indices, run_filter, Execution, PfConfig, Protocol, ResampleTrigger, ResamplingPolicy,
    ResamplingScheme,
};
use filterlab::rng::RandomStreams;
use filterlab::{Ar1Params, LocalLevelParams, ObservationSeries};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

const SCHEMES: [ResamplingScheme; 4] = [
    ResamplingScheme::Multinomial,
    ResamplingScheme::Systematic,
    ResamplingScheme::Stratified,
    ResamplingScheme::Residual,
];

#[test]
fn criterion_1_kalman_matches_grid_integration() {
    let start = Instant::now();
    let mut rng = RandomStreams::new(2001).next_epoch().shared();
    let mut worst: f64 = 0.0;
    for instance in 0..20 {
        let horizon = rng.random_range(1..=5);
        let mut var = || rng.random_range(0.1..=4.0);
        let (obs_var, state_var, prior_var) = (var(), var(), var());
        let prior_mean = rng.random_range(-2.0..=2.0);
        let params = LocalLevelParams::new(obs_var, state_var, prior_mean, prior_var).unwrap();
        let ys = simulate_local_level(&params, horizon, 500 + instance).unwrap();

        let oracle = grid_oracle(&params, &ys.observations);
        let filtered = filter_series(&params, &ys).unwrap();
        let smoothed = smooth_series(&params, &ys).unwrap();
        for (t, smooth) in smoothed.iter().enumerate() {
            let post = filtered.records[t].posterior;
            let (gm, gv) = oracle.filtered[t];
            let (sm, sv) = oracle.smoothed[t];
            for d in [
                post.mean - gm,
                post.variance - gv,
                smooth.mean - sm,
                smooth.variance - sv,
            ] {
                worst = worst.max(d.abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "criterion 1 (Kalman vs grid oracle)",
        worst <= 1e-6 && secs < 60.0,
        &format!("20 instances, max abs deviation {worst:.3e} (tol 1e-6), {secs:.1}s"),
    );
}

fn bench_rmse(ys: &ObservationSeries, n: usize, seed: u64) -> f64 {
    let params = bench_params();
    let oracle = filter_series(&params, ys).unwrap();
    let trace = run_filter(ys, &params, &PfConfig::new(n, Protocol::PropagateFirst, seed)).unwrap();
    compare_to_oracle(&trace.filtered_means(), &oracle).unwrap().rmse
}

#[test]
fn criterion_2_particle_filter_converges_to_kalman() {
    let start = Instant::now();
    let ys = bench_series();
    let single = bench_rmse(&ys, 5000, 1);
    let small: Vec<f64> = (0..20).map(|s| bench_rmse(&ys, 5000, 100 + s)).collect();
    let large: Vec<f64> = (0..20).map(|s| bench_rmse(&ys, 20_000, 200 + s)).collect();
    let ratio = median(&small) / median(&large);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "criterion 2 (PF convergence)",
        single < 0.05 && ratio >= 1.4 && secs < 60.0,
        &format!(
            "N=5000 rmse {single:.4} (< 0.05); median rmse N=5000 {:.4} / N=20000 {:.4} = {ratio:.2} (>= 1.4); {secs:.1}s",
            median(&small),
            median(&large)
        ),
    );
}

#[test]
fn criterion_3_protocols_agree() {
    let params = bench_params();
    let ys = bench_series();
    let run = |protocol, seed| run_filter(&ys, &params, &PfConfig::new(20_000, protocol, seed)).unwrap();
    let a = run(Protocol::PropagateFirst, 31);
    let b = run(Protocol::UpdateFirst, 32);
    let agreeing = a
        .step_records()
        .iter()
        .zip(b.step_records())
        .filter(|(ra, rb)| (ra.mean - rb.mean).abs() <= 3.0 * ra.mc_se() + 3.0 * rb.mc_se())
        .count();
    verdict(
        "criterion 3 (protocol equivalence)",
        agreeing >= 48,
        &format!("{agreeing}/50 steps within combined 3-sigma Monte Carlo bounds (need >= 48)"),
    );
}

#[test]
fn criterion_4_sis_degenerates_sir_does_not() {
    let params = bench_params();
    let mut sis_collapsed = 0;
    let mut sir_worst_average = f64::INFINITY;
    for r in 0..100u64 {
        let ys = simulate_local_level(&params, 100, 4000 + r).unwrap();
        let sis = run_filter(&ys, &params, &PfConfig::new(1000, Protocol::Sis, r)).unwrap();
        if sis.records.last().unwrap().ess < 100.0 {
            sis_collapsed += 1;
        }
        let sir = run_filter(&ys, &params, &PfConfig::new(1000, Protocol::PropagateFirst, r)).unwrap();
        let steps = sir.step_records();
        let avg = steps.iter().map(|s| s.ess).sum::<f64>() / steps.len() as f64;
        sir_worst_average = sir_worst_average.min(avg);
    }
    verdict(
        "criterion 4 (SIS degeneracy)",
        sis_collapsed >= 95 && sir_worst_average >= 250.0,
        &format!(
            "SIS final ESS < 100 in {sis_collapsed}/100 runs (need >= 95); lowest per-run SIR mean ESS {sir_worst_average:.1} (need >= 250)"
        ),
    );
}

#[test]
fn criterion_5_gibbs_matches_smoother() {
    let start = Instant::now();
    let cases = [
        (LocalLevelParams::new(1.0, 1.0, 0.0, 1.0).unwrap(), 2usize, 51u64),
        (LocalLevelParams::new(0.5, 2.0, 1.0, 3.0).unwrap(), 5, 52),
    ];
    let mut checks = 0;
    let mut failures = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (params, horizon, data_seed) in cases {
        let ys = simulate_local_level(&params, horizon, data_seed).unwrap();
        let exact = smooth_series(&params, &ys).unwrap();
        let mut runs = Vec::new();
        for (mode, seed) in [(GibbsMode::SingleSite, 61), (GibbsMode::Ffbs, 62)] {
            let cfg = GibbsConfig::new(50_000, seed).with_burn_in(5000).with_mode(mode);
            runs.push((format!("T={horizon} {mode:?}"), gibbs_chain(&ys, &params, &cfg).unwrap()));
        }
        if horizon == 2 {
            let cfg = GibbsConfig::new(50_000, 63).with_burn_in(5000);
            let y = &ys.observations;
            runs.push(("T=2 two-step".into(), gibbs_two_step(y[0], y[1], &params, &cfg).unwrap()));
        }
        for (label, samples) in runs {
            for (j, s) in samples.summaries().iter().enumerate() {
                for (stat, est, truth, se) in [
                    ("mean", s.mean, exact[j].mean, s.mean_se),
                    ("var", s.variance, exact[j].variance, s.variance_se),
                ] {
                    checks += 1;
                    let z = (est - truth).abs() / se;
                    worst_z = worst_z.max(z);
                    if z > 3.0 {
                        failures.push(format!("{label} theta_{} {stat} z={z:.2}", j + 1));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "criterion 5 (Gibbs vs exact smoother)",
        failures.is_empty() && secs < 120.0,
        &format!(
            "{checks} moment checks, worst |z| {worst_z:.2} (tol 3), {secs:.1}s{}",
            if failures.is_empty() { String::new() } else { format!("; outside: {}", failures.join(", ")) }
        ),
    );
}

fn random_weight_vectors() -> Vec<Vec<f64>> {
    let mut rng = RandomStreams::new(606).next_epoch().shared();
    (0..10)
        .map(|k| {
            let n = rng.random_range(2..=6);
            let mut w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
            if k == 3 {
                w[0] = 0.0;
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        })
        .collect()
}

const REPLICATIONS: usize = 100_000;

#[test]
fn criterion_6_resampling_is_unbiased() {
    let mut rng = RandomStreams::new(607).next_epoch().shared();
    let mut worst_z: f64 = 0.0;
    let mut outside = Vec::new();
    for scheme in SCHEMES {
        for (v, w) in random_weight_vectors().iter().enumerate() {
            let n = w.len();
            let mut totals = vec![0u64; n];
            for _ in 0..REPLICATIONS {
                for i in resample_indices(w, scheme, &mut rng) {
                    totals[i] += 1;
                }
            }
            for i in 0..n {
                let expected = n as f64 * w[i];
                let observed = totals[i] as f64 / REPLICATIONS as f64;
                let se = (n as f64 * w[i] * (1.0 - w[i]) / REPLICATIONS as f64).sqrt();
                let dev = (observed - expected).abs();
                if se == 0.0 {
                    if dev != 0.0 {
                        outside.push(format!("{scheme:?} vector {v} particle {i}"));
                    }
                    continue;
                }
                worst_z = worst_z.max(dev / se);
                if dev > 3.0 * se {
                    outside.push(format!("{scheme:?} vector {v} particle {i} z={:.2}", dev / se));
                }
            }
        }
    }
    verdict(
        "criterion 6a (resampling unbiasedness)",
        outside.is_empty(),
        &format!(
            "4 schemes x 10 weight vectors x 1e5 replications, worst |z| {worst_z:.2} (tol 3){}",
            if outside.is_empty() { String::new() } else { format!("; outside: {}", outside.join(", ")) }
        ),
    );
}

#[test]
fn criterion_6_systematic_and_stratified_counts_within_floor_ceil() {
    let mut rng = RandomStreams::new(608).next_epoch().shared();
    let mut summary = Vec::new();
    let mut all_ok = true;
    for scheme in [ResamplingScheme::Systematic, ResamplingScheme::Stratified] {
        let mut violations = 0u64;
        let mut total = 0u64;
        for w in random_weight_vectors() {
            let n = w.len();
            for _ in 0..REPLICATIONS {
                let mut counts = vec![0usize; n];
                for i in resample_indices(&w, scheme, &mut rng) {
                    counts[i] += 1;
                }
                total += 1;
                let bad = (0..n).any(|i| {
                    let target = n as f64 * w[i];
                    let c = counts[i] as f64;
                    c < target.floor() || c > target.ceil()
                });
                if bad {
                    violations += 1;
                }
            }
        }
        all_ok &= violations == 0;
        summary.push(format!("{scheme:?} {violations}/{total} replications outside floor/ceil"));
    }
    verdict("criterion 6b (copy-count bounds)", all_ok, &summary.join("; "));
}

#[test]
fn criterion_7_martingale_diagnostics() {
    let params = bench_params();
    let ys = simulate_local_level(&params, 20_000, 3).unwrap();
    let mut truth = KalmanPredictor::new(params).unwrap();
    let check = martingale_orthogonality_check(&doob_decompose(&ys, &mut truth, 0.0).unwrap()).unwrap();
    let mut biased = Biased {
        inner: KalmanPredictor::new(params).unwrap(),
        offset: 0.5,
    };
    let control = martingale_orthogonality_check(&doob_decompose(&ys, &mut biased, 0.0).unwrap()).unwrap();

    let mut runner = TestRunner::new(Config {
        cases: 64,
        ..Config::default()
    });
    let strategy = (
        prop::collection::vec(-1e6f64..1e6, 1..=10_000),
        -2.0f64..2.0,
        -1e3f64..1e3,
        -1e6f64..1e6,
    );
    let worst_rel = std::cell::Cell::new(0.0f64);
    let reconstruction = runner.run(&strategy, |(y, a, b, baseline)| {
        let mut predictor = |h: &[f64]| match h.last() {
            Some(&last) => a * last + b * (h.len() as f64).sqrt(),
            None => b,
        };
        let d = doob_decompose(&ObservationSeries::new(y), &mut predictor, baseline).unwrap();
        let rel = d.max_relative_reconstruction_error();
        worst_rel.set(worst_rel.get().max(rel));
        prop_assert!(rel <= 1e-10);
        Ok(())
    });

    let ok = check.mean_within(3.0)
        && check.lag1_within(3.0)
        && !control.mean_within(3.0)
        && reconstruction.is_ok();
    verdict(
        "criterion 7 (martingale diagnostics)",
        ok,
        &format!(
            "mean {:.4} (3SE {:.4}), lag1 {:.4} (3SE {:.4}); biased mean {:.4} outside 3SE: {}; reconstruction worst rel {:.2e} over 64 series (tol 1e-10)",
            check.mean_increment,
            3.0 * check.mean_se,
            check.lag1_cov,
            3.0 * check.lag1_se,
            control.mean_increment,
            !control.mean_within(3.0),
            worst_rel.get(),
        ),
    );
}

/// Cross-sectional variance of y_t at two horizons over independent replications.
fn ar1_variance_ratio(alpha: f64) -> f64 {
    let params = Ar1Params {
        alpha,
        start_value: 0.0,
        noise_var: 1.0,
    };
    let (early, late) = (1000, 20_000);
    let mut at_early = Vec::new();
    let mut at_late = Vec::new();
    for r in 0..200 {
        let ys = simulate_ar1(&params, late, 8000 + r).unwrap().observations;
        at_early.push(ys[early - 1]);
        at_late.push(ys[late - 1]);
    }
    let var = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    };
    var(&at_late) / var(&at_early)
}

#[test]
fn criterion_8_ar1_stationarity() {
    let exact = [(-2.0, false), (-1.0, true), (0.0, false), (0.5, false)];
    let interval_ok = exact.iter().all(|&(a, expected)| check_ar1_stationary(a) == expected);
    let mut detail = vec![format!("interval checks at -2,-1,0,0.5: {interval_ok}")];
    let mut ok = interval_ok;
    for alpha in [-1.0, -0.5, -1.5] {
        let ratio = ar1_variance_ratio(alpha);
        ok &= (0.6..=1.67).contains(&ratio);
        detail.push(format!("alpha {alpha}: var ratio {ratio:.2} (stable)"));
    }
    for alpha in [0.0, -2.0, 0.001] {
        let ratio = ar1_variance_ratio(alpha);
        ok &= ratio > 3.0;
        detail.push(format!("alpha {alpha}: var ratio {ratio:.3e} (grows)"));
    }
    verdict("criterion 8 (AR(1) stationarity)", ok, &detail.join("; "));
}

fn filter_csv(ys: &ObservationSeries, params: &LocalLevelParams, cfg: &PfConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    let trace = run_filter(ys, params, cfg).unwrap();
    trace.write_csv(&mut buf).unwrap();
    trace.write_ensemble_csv(&mut buf).unwrap();
    buf
}

#[test]
fn criterion_9_bit_identical_reruns() {
    let params = bench_params();
    let simulate = || {
        let mut buf = Vec::new();
        simulate_local_level(&params, 50, 77).unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    let mut identical = simulate() == simulate();
    let ys = bench_series();
    let mut runs = 0;
    for protocol in [Protocol::PropagateFirst, Protocol::UpdateFirst, Protocol::Sis, Protocol::Apf] {
        for scheme in SCHEMES {
            for trigger in [ResampleTrigger::Always, ResampleTrigger::EssBelow(0.5)] {
                let mut cfg = PfConfig::new(2000, protocol, 91)
                    .with_resampling(ResamplingPolicy::new(scheme, trigger));
                cfg.keep_ensembles = true;
                let parallel = filter_csv(&ys, &params, &cfg);
                identical &= parallel == filter_csv(&ys, &params, &cfg);
                identical &= parallel == filter_csv(&ys, &params, &cfg.clone().with_execution(Execution::Serial));
                runs += 1;
            }
        }
    }
    for mode in [GibbsMode::SingleSite, GibbsMode::Ffbs] {
        let cfg = GibbsConfig::new(2000, 92).with_mode(mode);
        let csv = || {
            let mut buf = Vec::new();
            gibbs_chain(&ys, &params, &cfg).unwrap().write_csv(&mut buf).unwrap();
            buf
        };
        identical &= csv() == csv();
        runs += 1;
    }
    verdict(
        "criterion 9 (reproducibility)",
        identical,
        &format!("simulation, {runs} engine configurations rerun and serial vs parallel: bit-identical = {identical}"),
    );
}
