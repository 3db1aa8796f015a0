//! Renders the camera and tactile streams for the standard scenario and
//! reports their rates, occlusion coverage and camera error statistics.
//!
//! `cargo run --release --example sensor_streams -- [seed]`

use pushest::geom2d::pose_diff;
use pushest::harness::{simulate_scenario, Scenario};
use pushest::sensor_sim::step_at;

fn main() -> pushest::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let sim = simulate_scenario(&Scenario::standard(seed))?;
    let (traj, streams) = (&sim.trajectory, &sim.streams);
    let duration = traj.steps.last().map_or(0.0, |s| s.t);
    println!("duration {duration:.1} s, {} simulator steps", traj.steps.len());
    println!("camera: {} samples, occluded {:.1} s", streams.visual.len(), sim.occlusion.occluded_time(duration));
    let in_contact = streams.tactile.iter().filter(|s| s.any_contact()).count();
    println!("tactile: {} samples, {in_contact} with contact", streams.tactile.len());

    let errs: Vec<_> =
        streams.visual.iter().map(|v| pose_diff(&v.pose, &traj.steps[step_at(traj, v.t)].pose)).collect();
    let n = errs.len() as f64;
    for (axis, unit, scale) in [(0, "mm", 1e3), (1, "mm", 1e3), (2, "deg", 180.0 / std::f64::consts::PI)] {
        let mean = errs.iter().map(|e| e[axis]).sum::<f64>() / n;
        let sd = (errs.iter().map(|e| (e[axis] - mean).powi(2)).sum::<f64>() / n).sqrt();
        println!("camera axis {axis}: mean {:+.2} {unit}, sd {:.2} {unit}", mean * scale, sd * scale);
    }
    Ok(())
}
