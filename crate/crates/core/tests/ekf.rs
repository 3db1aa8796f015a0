use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use pushest::ekf_baseline::{ekf_step, raw_visual_baseline, GaussianBelief, RawVisualHold};
use pushest::factors::FactorModel;
use pushest::geom2d::Pose2;
use pushest::harness::{make_ticks, simulate_scenario, Scenario};
use pushest::sensor_sim::{TactileSample, VisualSample};

#[test]
fn belief_stays_symmetric_psd_with_wrapped_heading() {
    let s = Scenario::standard(4);
    let streams = simulate_scenario(&s).unwrap().streams;
    let ticks = make_ticks(&streams, s.estimator.tick_dt).unwrap();
    let model = FactorModel::new(&s.shape_model().unwrap(), s.pusher.radius);
    let covs = s.estimator.covariances.covariances();
    let v0 = ticks[0].visual.unwrap().pose;
    let mut belief = GaussianBelief::new(v0, covs.visual).unwrap();
    for t in &ticks[1..] {
        belief = ekf_step(&belief, &t.tactile, t.visual.as_ref(), &model, &covs, s.estimator.tick_dt).unwrap().belief;
        let p = belief.covariance;
        assert!((p - p.transpose()).amax() < 1e-12, "asymmetric at t={}", t.t);
        assert!(SymmetricEigen::new(p).eigenvalues.min() >= -1e-15, "indefinite at t={}", t.t);
        assert!((-PI..PI).contains(&belief.mean.theta));
    }
}

#[test]
fn visual_update_pulls_toward_the_measurement_and_shrinks_covariance() {
    let s = Scenario::standard(0);
    let model = FactorModel::new(&s.shape_model().unwrap(), s.pusher.radius);
    let covs = s.estimator.covariances.covariances();
    let belief = GaussianBelief::new(Pose2::default(), Matrix3::identity() * 1e-2).unwrap();
    let tactile = TactileSample { t: 0.0, fingers: Vec::new() };
    let z = VisualSample { t: 0.0, pose: Pose2::new(0.05, -0.02, 0.1), available: true };
    let out = ekf_step(&belief, &tactile, Some(&z), &model, &covs, 0.01).unwrap().belief;
    assert!(out.mean.x > 0.0 && out.mean.x < 0.05);
    assert!(out.mean.y < 0.0 && out.mean.y > -0.02);
    assert!(out.covariance.trace() < (belief.covariance + covs.prior).trace());

    // an unavailable sample is ignored: prediction only
    let blind = VisualSample { available: false, ..z };
    let out = ekf_step(&belief, &tactile, Some(&blind), &model, &covs, 0.01).unwrap().belief;
    assert_eq!(out.mean, belief.mean);
    assert!((out.covariance - (belief.covariance + covs.prior)).amax() < 1e-15);
}

#[test]
fn ekf_rejects_bad_input() {
    let s = Scenario::standard(0);
    let model = FactorModel::new(&s.shape_model().unwrap(), s.pusher.radius);
    let covs = s.estimator.covariances.covariances();
    let belief = GaussianBelief::new(Pose2::default(), Matrix3::identity()).unwrap();
    let tactile = TactileSample { t: 0.0, fingers: Vec::new() };
    assert!(ekf_step(&belief, &tactile, None, &model, &covs, 0.0).is_err());
    let mut skew = Matrix3::identity();
    skew[(0, 1)] = 0.5;
    assert!(GaussianBelief::new(Pose2::default(), skew).is_err());
}

#[test]
fn raw_visual_holds_the_last_available_pose() {
    let sample = |t: f64, x: f64, available| VisualSample { t, pose: Pose2::new(x, 0.0, 0.0), available };
    let stream = [sample(0.0, 1.0, true), sample(0.1, 2.0, false), sample(0.2, 3.0, true)];
    let out = raw_visual_baseline(&stream, &[0.0, 0.05, 0.15, 0.2, 0.3]).unwrap();
    let xs: Vec<f64> = out.iter().map(|p| p.x).collect();
    assert_eq!(xs, [1.0, 1.0, 1.0, 3.0, 3.0]);
    assert!(raw_visual_baseline(&stream[1..], &[0.1]).is_err());

    let mut hold = RawVisualHold::default();
    assert_eq!(hold.current(), None);
    hold.observe(&stream[1]);
    assert_eq!(hold.current(), None);
    hold.observe(&stream[2]);
    assert_eq!(hold.current().unwrap().x, 3.0);
}
