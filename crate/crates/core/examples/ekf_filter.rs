//! Runs the extended Kalman filter alone over the standard scenario and prints
//! the belief every few seconds alongside ground truth.
//!
//! `cargo run --release --example ekf_filter -- [seed]`

use pushest::ekf_baseline::{ekf_step, GaussianBelief};
use pushest::factors::FactorModel;
use pushest::harness::{make_ticks, simulate_scenario, Scenario};

fn main() -> pushest::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let s = Scenario::standard(seed);
    let streams = simulate_scenario(&s)?.streams;
    let ticks = make_ticks(&streams, s.estimator.tick_dt)?;
    let model = FactorModel::new(&s.shape_model()?, s.pusher.radius);
    let covs = s.estimator.covariances.covariances();
    let start = ticks.iter().position(|t| t.visual_available()).expect("camera sample");
    let mut belief = GaussianBelief::new(ticks[start].visual.expect("available").pose, covs.visual)?;
    let mut projections = 0;
    println!("   t [s]   err [mm]  err [deg]  sd_x [mm]  sd_theta [deg]");
    for (i, t) in ticks.iter().enumerate().skip(start + 1) {
        let out = ekf_step(&belief, &t.tactile, t.visual.as_ref(), &model, &covs, s.estimator.tick_dt)?;
        projections += usize::from(out.projected);
        belief = out.belief;
        if i % 300 == 0 {
            let e = belief.mean.translation() - t.gt.translation();
            let de = pushest::geom2d::pose_diff(&belief.mean, &t.gt)[2];
            println!(
                "{:8.2} {:10.2} {:10.2} {:10.2} {:15.2}",
                t.t,
                e.norm() * 1e3,
                de.abs().to_degrees(),
                belief.covariance[(0, 0)].sqrt() * 1e3,
                belief.covariance[(2, 2)].sqrt().to_degrees()
            );
        }
    }
    println!("covariance projected onto the PSD cone {projections} times");
    Ok(())
}
