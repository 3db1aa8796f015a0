use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;
use pushest::geom2d::{closest_point_on_polygon, pose_diff, wrap_angle, Point2, Polygon, Pose2};
use pushest::pushing_physics::shapes;

fn pose() -> impl Strategy<Value = Pose2> {
    (-1.0..1.0f64, -1.0..1.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2::new(x, y, t))
}

fn shape() -> impl Strategy<Value = Polygon> {
    prop_oneof![Just(shapes::rect1()), Just(shapes::ellip2()), Just(shapes::butter())]
}

proptest! {
    #[test]
    fn wrap_lands_in_range_and_differs_by_whole_turns(a in -1e4..1e4f64) {
        let w = wrap_angle(a).unwrap();
        prop_assert!((-PI..PI).contains(&w));
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn retract_inverts_pose_diff(a in pose(), b in pose()) {
        let back = b.retract(&pose_diff(&a, &b));
        prop_assert!((back.translation() - a.translation()).norm() < 1e-12);
        prop_assert!(wrap_angle(back.theta - a.theta).unwrap().abs() < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity(a in pose()) {
        let e = a.compose(&a.inverse());
        prop_assert!(e.to_vector().norm() < 1e-12);
    }

    #[test]
    fn point_transform_roundtrips(a in pose(), px in -1.0..1.0f64, py in -1.0..1.0f64) {
        let p = Point2::new(px, py);
        let q = a.inverse_transform_point(&a.transform_point(&p));
        prop_assert!((q - p).norm() < 1e-12);
    }

    #[test]
    fn closest_point_beats_every_boundary_sample(
        poly in shape(),
        x in pose(),
        qx in -1.2..1.2f64,
        qy in -1.2..1.2f64,
    ) {
        let q = Point2::new(qx, qy);
        let cp = closest_point_on_polygon(&poly, &x, &q);
        prop_assert!(((cp.point - q).norm() - cp.distance).abs() < 1e-9);
        prop_assert!((cp.normal.norm() - 1.0).abs() < 1e-12);
        for i in 0..poly.len() {
            let (a, b) = poly.edge(i);
            for k in 0..=20 {
                let s = x.transform_point(&(a + (b - a) * (k as f64 / 20.0)));
                prop_assert!(cp.distance <= (s - q).norm() + 1e-12);
            }
        }
        // outside the object the normal points from the boundary toward the query
        let local = x.inverse_transform_point(&q);
        if !poly.contains_local(&local) && cp.distance > 1e-9 {
            prop_assert!(cp.normal.dot(&(q - cp.point)) > 0.0);
        }
    }
}

#[test]
fn wrap_rejects_non_finite() {
    assert!(wrap_angle(f64::NAN).is_err());
    assert!(wrap_angle(f64::INFINITY).is_err());
    assert_eq!(wrap_angle(PI).unwrap(), -PI);
}

#[test]
fn retract_uses_world_frame_translation() {
    let x = Pose2::new(1.0, 2.0, PI / 2.0);
    let y = x.retract(&Vector3::new(0.1, 0.0, 0.0));
    assert!((y.x - 1.1).abs() < 1e-15 && (y.y - 2.0).abs() < 1e-15);
}
