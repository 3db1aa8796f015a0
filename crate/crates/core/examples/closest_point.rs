//! Closest boundary point, distance and outward normal for a few query points
//! around each standard object outline.
//!
//! `cargo run --example closest_point`

use pushest::geom2d::{closest_point_on_polygon, Point2, Pose2};
use pushest::pushing_physics::{compute_c, shapes};

fn main() -> pushest::Result<()> {
    let pose = Pose2::new(0.1, 0.05, 0.5);
    let queries = [Point2::new(0.2, 0.05), Point2::new(0.1, 0.15), Point2::new(0.1, 0.05)];
    for name in ["rect1", "ellip2", "butter"] {
        let poly = shapes::by_name(name).expect("standard shape");
        println!(
            "{name}: {} vertices, area {:.1} cm^2, c = {:.2} mm",
            poly.len(),
            poly.area() * 1e4,
            compute_c(&poly)? * 1e3
        );
        for q in &queries {
            let cp = closest_point_on_polygon(&poly, &pose, q);
            println!(
                "  q = ({:.3}, {:.3}) -> p = ({:.4}, {:.4}), d = {:.2} mm, n = ({:+.3}, {:+.3}), {:?}",
                q.x,
                q.y,
                cp.point.x,
                cp.point.y,
                cp.distance * 1e3,
                cp.normal.x,
                cp.normal.y,
                cp.feature
            );
        }
    }
    Ok(())
}
