//! Quasi-static pushing under the ellipsoid limit-surface approximation.
//!
//! With uniform support pressure the limit surface of a planar slider is
//! approximated by an ellipsoid in wrench space whose moment semi-axis is
//! `c * f_max`. The resulting force-motion map sends a body wrench
//! `(fx, fy, m)` to a body twist parallel to `(c^2 fx, c^2 fy, m)`.

mod script;
mod sim;

pub use script::{FingerLayout, PushPlan, PushStroke, PusherFrame, PusherScript, Segment};
pub use sim::{simulate_push, ContactMode, FingerRecord, Pusher, SimConfig, SimStep, Trajectory};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{Point2, Polygon, Twist2};

pub const GRAVITY: f64 = 9.81;

/// Planar wrench: force `(fx, fy)` and moment `m` about the object centroid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench2 {
    pub fx: f64,
    pub fy: f64,
    pub m: f64,
}

impl Wrench2 {
    pub fn new(fx: f64, fy: f64, m: f64) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && m.is_finite()) {
            return Err(Error::NonFinite("wrench"));
        }
        Ok(Self { fx, fy, m })
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.fx, self.fy, self.m)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self { fx: v.x, fy: v.y, m: v.z }
    }

    pub fn force(&self) -> Point2 {
        Point2::new(self.fx, self.fy)
    }
}

/// Rigid slider: shape, limit-surface constant and friction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeModel {
    /// Object-frame outline with the area centroid at the origin.
    pub polygon: Polygon,
    /// Limit-surface constant in meters.
    pub c: f64,
    pub mu_pusher: f64,
    pub mu_surface: f64,
    pub mass: f64,
}

impl ShapeModel {
    /// Builds a model with `c` computed from the outline under uniform pressure.
    pub fn new(polygon: Polygon, mu_pusher: f64, mu_surface: f64, mass: f64) -> Result<Self> {
        let c = compute_c(&polygon)?;
        Self::with_c(polygon, c, mu_pusher, mu_surface, mass)
    }

    pub fn with_c(polygon: Polygon, c: f64, mu_pusher: f64, mu_surface: f64, mass: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("limit-surface constant c = {c}")));
        }
        if !(mu_pusher >= 0.0) {
            return Err(Error::InvalidInput(format!("mu_pusher = {mu_pusher}")));
        }
        if !(mu_surface > 0.0) {
            return Err(Error::InvalidInput(format!("mu_surface = {mu_surface}")));
        }
        if !(mass > 0.0) {
            return Err(Error::InvalidInput(format!("mass = {mass}")));
        }
        let centroid = polygon.centroid();
        if centroid.norm() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "polygon centroid ({:.3e}, {:.3e}) is not at the origin",
                centroid.x, centroid.y
            )));
        }
        Ok(Self { polygon, c, mu_pusher, mu_surface, mass })
    }

    /// Maximum support friction force `mu_surface * m * g`.
    pub fn max_friction_force(&self) -> f64 {
        self.mu_surface * self.mass * GRAVITY
    }

    /// Direction scale `(c^2, c^2, 1)` applied to a wrench to get the twist direction.
    pub fn ls_direction(&self, w: &Wrench2) -> Vector3<f64> {
        let c2 = self.c * self.c;
        Vector3::new(c2 * w.fx, c2 * w.fy, w.m)
    }
}

/// Mean distance of the outline's area to its centroid, `(1/A) * integral |r| dA`.
///
/// Integrated exactly over the fan of triangles `(0, v_i, v_i+1)`: in polar
/// coordinates about the origin each triangle contributes
/// `h^3 / 6 * [sec(psi) tan(psi) + ln(sec(psi) + tan(psi))]`, with `h` the
/// distance from the origin to the edge line and `psi` measured from the foot
/// of that perpendicular.
pub fn compute_c(poly: &Polygon) -> Result<f64> {
    let centroid = poly.centroid();
    if centroid.norm() > 1e-9 {
        return Err(Error::InvalidInput("polygon centroid is not at the origin".into()));
    }
    let area = poly.area();
    if !(area > 0.0) {
        return Err(Error::DegeneratePolygon("zero area".into()));
    }
    let mut total = 0.0;
    for i in 0..poly.len() {
        let (a, b) = poly.edge(i);
        total += fan_triangle_integral(&a, &b);
    }
    Ok(total / area)
}

fn fan_triangle_integral(a: &Point2, b: &Point2) -> f64 {
    let e = b - a;
    let len = e.norm();
    let t = e / len;
    let foot = a - t * a.dot(&t);
    let h = foot.norm();
    if h < 1e-15 {
        return 0.0;
    }
    let sign = crate::geom2d::cross2(a, b).signum();
    // sec(psi) tan(psi) + ln(sec(psi) + tan(psi)), the log term written as asinh
    let prim = |tan_psi: f64| (1.0 + tan_psi * tan_psi).sqrt() * tan_psi + tan_psi.asinh();
    let ta = (a - foot).dot(&t) / h;
    let tb = (b - foot).dot(&t) / h;
    sign * h.powi(3) / 6.0 * (prim(tb) - prim(ta))
}

/// Unit body twist produced by the wrench `w` under the ellipsoid limit surface.
pub fn twist_from_wrench(shape: &ShapeModel, w: &Wrench2) -> Result<Twist2> {
    let d = shape.ls_direction(w);
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroWrench);
    }
    Twist2::from_vector(&(d / n))
}

/// Standard objects: a 90 mm square, a 105 x 130.9 mm ellipse and a tapered
/// "butter" outline 156 mm tall with 95.3 mm and 54.7 mm end widths.
pub mod shapes {
    use super::*;
    use std::f64::consts::PI;

    pub fn rect1() -> Polygon {
        Polygon::rectangle(0.09, 0.09).expect("static outline")
    }

    pub fn ellip2() -> Polygon {
        Polygon::ellipse(0.105, 0.1309, 128).expect("static outline")
    }

    pub fn butter() -> Polygon {
        // rounded trapezoid: wide end at -y, narrow end at +y
        let (h, w_bot, w_top, r) = (0.156, 0.0953, 0.0547, 0.012);
        let corners = [
            Point2::new(-w_bot / 2.0 + r, -h / 2.0 + r),
            Point2::new(w_bot / 2.0 - r, -h / 2.0 + r),
            Point2::new(w_top / 2.0 - r, h / 2.0 - r),
            Point2::new(-w_top / 2.0 + r, h / 2.0 - r),
        ];
        let mut pts = Vec::new();
        for i in 0..4 {
            let prev = corners[(i + 3) % 4];
            let cur = corners[i];
            let next = corners[(i + 1) % 4];
            let n_in = {
                let e = cur - prev;
                Point2::new(e.y, -e.x).normalize()
            };
            let n_out = {
                let e = next - cur;
                Point2::new(e.y, -e.x).normalize()
            };
            let a0 = n_in.y.atan2(n_in.x);
            let mut a1 = n_out.y.atan2(n_out.x);
            while a1 < a0 {
                a1 += 2.0 * PI;
            }
            let k = 8;
            for j in 0..=k {
                let a = a0 + (a1 - a0) * j as f64 / k as f64;
                pts.push(cur + Point2::new(a.cos(), a.sin()) * r);
            }
        }
        Polygon::new(pts).expect("static outline").centered()
    }

    pub fn by_name(name: &str) -> Option<Polygon> {
        match name {
            "rect1" => Some(rect1()),
            "ellip2" => Some(ellip2()),
            "butter" => Some(butter()),
            _ => None,
        }
    }

    /// Table masses in kilograms.
    pub fn mass_of(name: &str) -> Option<f64> {
        match name {
            "rect1" => Some(0.837),
            "ellip2" => Some(1.110),
            "butter" => Some(1.197),
            _ => None,
        }
    }
}
