//! Long two-finger push with the camera blind for ten seconds: compares the
//! smoother and the raw camera hold at the moment the occlusion ends.
//!
//! `cargo run --release --example occlusion_tracking -- [seed]`

use pushest::harness::{run_scenario, Method, RunOptions, Scenario};

fn main() -> pushest::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = Scenario::long_occlusion(seed, 10.0);
    let (_, end) = scenario.occlusion.intervals[0];
    let report = run_scenario(&scenario, &[Method::Smoother, Method::Baseline], RunOptions::default())?;
    // last tick still inside the occlusion
    let k = report.ticks.iter().rposition(|t| t.t < end).expect("run covers the occlusion");
    let tick = &report.ticks[k];
    println!("occlusion ends at {end:.2} s, {} contacts sensed", tick.n_contacts);
    for trace in &report.traces {
        let e = trace.estimates[k].translation() - tick.gt.translation();
        println!("{:>9}: translation error {:.2} mm", trace.method.as_str(), e.norm() * 1e3);
    }
    Ok(())
}
