use filterlab::gibbs::{gibbs_chain, GibbsConfig, GibbsMode};
use filterlab::kalman::smooth_series;
use filterlab::model::simulate_local_level;
use filterlab::LocalLevelParams;

#[test]
fn ffbs_mixes_faster_than_single_site_on_a_smooth_path() {
    // small state noise makes neighbouring states strongly coupled
    let params = LocalLevelParams::new(1.0, 0.01, 0.0, 1.0).unwrap();
    let ys = simulate_local_level(&params, 20, 12).unwrap();
    let run = |mode| gibbs_chain(&ys, &params, &GibbsConfig::new(20_000, 5).with_mode(mode)).unwrap();
    let single = run(GibbsMode::SingleSite);
    let joint = run(GibbsMode::Ffbs);
    let mid = 10;
    assert!(single.lag1_autocorrelation(mid) > 0.9);
    assert!(joint.lag1_autocorrelation(mid).abs() < 0.1);

    let exact = smooth_series(&params, &ys).unwrap();
    let s = joint.summaries()[mid];
    assert!((s.mean - exact[mid].mean).abs() <= 3.0 * s.mean_se);
}

#[test]
fn long_series_chain_tracks_smoother() {
    let params = LocalLevelParams::new(0.8, 0.3, 2.0, 4.0).unwrap();
    let ys = simulate_local_level(&params, 40, 13).unwrap();
    let exact = smooth_series(&params, &ys).unwrap();
    let samples = gibbs_chain(&ys, &params, &GibbsConfig::new(30_000, 6).with_mode(GibbsMode::Ffbs)).unwrap();
    let outside = samples
        .summaries()
        .iter()
        .zip(&exact)
        .filter(|(s, e)| (s.mean - e.mean).abs() > 3.0 * s.mean_se)
        .count();
    assert!(outside <= 2, "{outside} of 40 coordinates outside 3 SE");
}
