//! Quasi-static push of the butter outline by one finger off its center line;
//! prints the pose and contact mode every 100 steps.
//!
//! `cargo run --release --example simulate_push -- [offset_mm]`

use pushest::geom2d::{Point2, Pose2};
use pushest::pushing_physics::{shapes, simulate_push, PusherScript, ShapeModel, SimConfig};

fn main() -> pushest::Result<()> {
    let offset = std::env::args().nth(1).and_then(|s| s.parse::<f64>().ok()).unwrap_or(15.0) * 1e-3;
    let shape = ShapeModel::new(shapes::butter(), 0.25, 0.28, shapes::mass_of("butter").unwrap_or(1.0))?;
    let config = SimConfig::default();
    let radius = 0.003125;
    // start 2 mm clear of the widest point and push along +x at 5 cm/s for 3 s
    let start = Point2::new(-0.06, offset);
    let mut pusher = PusherScript::straight(radius, &[start], Point2::new(0.05, 0.0), config.dt, 1500);
    let traj = simulate_push(&shape, &mut pusher, Pose2::default(), &config)?;
    println!("   t [s]    x [mm]    y [mm]  theta [deg]  mode       force [N]");
    for step in traj.steps.iter().step_by(100) {
        let f = &step.fingers[0];
        println!(
            "{:8.2} {:9.2} {:9.2} {:12.2}  {:<10} {:.3}",
            step.t,
            step.pose.x * 1e3,
            step.pose.y * 1e3,
            step.pose.theta.to_degrees(),
            format!("{:?}", f.mode),
            f.force.norm()
        );
    }
    Ok(())
}
