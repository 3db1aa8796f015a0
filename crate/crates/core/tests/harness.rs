use std::path::PathBuf;

use pushest::factors::FactorKind;
use pushest::harness::io::{load_streams, read_trajectory_csv, save_streams, save_trajectory_csv, summarize_rows};
use pushest::harness::{
    characterize_noise, estimate_streams, ground_truth_residuals, make_ticks, rmse, run_scenario, simulate_scenario,
    Method, RunOptions, Scenario,
};

fn short(seed: u64) -> Scenario {
    Scenario { repeats: 1, final_hold: 1.0, ..Scenario::standard(seed) }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pushest-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn scenario_toml_roundtrips() {
    let s = Scenario::long_occlusion(3, 5.0);
    let back = Scenario::from_toml_str(&s.to_toml().unwrap()).unwrap();
    assert_eq!(s, back);
    assert!(Scenario::from_toml_str("no_such_field = 1").is_err());
    assert!(Scenario::from_toml_str("shape = \"teapot\"").is_err());
}

#[test]
fn streams_survive_a_csv_roundtrip() {
    let s = short(1);
    let streams = simulate_scenario(&s).unwrap().streams;
    let dir = scratch("streams");
    save_streams(&dir, &streams).unwrap();
    assert_eq!(load_streams(&dir).unwrap(), streams);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn reports_cover_every_tick_and_reload_consistently() {
    let s = short(2);
    let report = run_scenario(&s, &Method::ALL, RunOptions::default()).unwrap();
    let streams = simulate_scenario(&s).unwrap().streams;
    assert_eq!(report.ticks.len(), make_ticks(&streams, s.estimator.tick_dt).unwrap().len());
    for trace in &report.traces {
        assert_eq!(trace.estimates.len(), report.ticks.len());
        assert!(trace.step_ms.iter().all(|&ms| ms == 0.0));
        let gt: Vec<_> = report.ticks.iter().map(|t| t.gt).collect();
        assert_eq!(rmse(&trace.estimates, &gt).unwrap(), trace.summary);
    }

    let dir = scratch("trajectory");
    let path = dir.join("trajectory.csv");
    save_trajectory_csv(&path, &report).unwrap();
    let rows = read_trajectory_csv(&path).unwrap();
    assert_eq!(rows.len(), 3 * report.ticks.len());
    for (m, summary, _) in summarize_rows(&rows).unwrap() {
        assert_eq!(summary, report.summary(m).unwrap(), "{m:?}");
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn estimator_selection_does_not_change_results() {
    let s = short(3);
    let streams = simulate_scenario(&s).unwrap().streams;
    let all = estimate_streams(&s, &streams, &Method::ALL, RunOptions::default()).unwrap();
    for m in Method::ALL {
        let alone = estimate_streams(&s, &streams, &[m], RunOptions::default()).unwrap();
        assert_eq!(alone.traces.len(), 1);
        assert_eq!(alone.traces[0].estimates, all.trace(m).unwrap().estimates, "{m:?}");
    }
}

#[test]
fn smoother_beats_raw_visual_on_a_short_run() {
    let report = run_scenario(&short(4), &[Method::Smoother, Method::Baseline], RunOptions::default()).unwrap();
    let (sm, raw) = (report.summary(Method::Smoother).unwrap(), report.summary(Method::Baseline).unwrap());
    assert!(sm.trans_rmse_mm < raw.trans_rmse_mm, "{sm} vs {raw}");
}

#[test]
fn noiseless_visual_and_contact_residuals_are_small() {
    let s = Scenario { repeats: 1, final_hold: 1.0, ..Scenario::noiseless(1) };
    let streams = simulate_scenario(&s).unwrap().streams;
    let records = ground_truth_residuals(&s, &streams).unwrap();
    let kinds = characterize_noise(&records, 20).unwrap();
    let sigmas = |kind: FactorKind| kinds.iter().find(|k| k.kind == kind).unwrap().sigmas();
    // camera samples lag their tick by under 10 ms of motion
    assert!(sigmas(FactorKind::Visual).iter().all(|&s| s < 1e-3), "{:?}", sigmas(FactorKind::Visual));
    // contact carries only the friction offset, well under 0.1 mm
    assert!(sigmas(FactorKind::Contact).iter().all(|&s| s < 1e-4), "{:?}", sigmas(FactorKind::Contact));
}

#[test]
fn method_names_parse_back() {
    for m in Method::ALL {
        assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
    }
    assert!("kalman".parse::<Method>().is_err());
}
