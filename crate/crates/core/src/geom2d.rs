//! Planar geometry: SE(2) poses, polygons and closest-point queries.
//!
//! Angles are kept in the half-open interval `[-pi, pi)`; `wrap_angle(pi)` is
//! `-pi`. Polygons are stored counter-clockwise in their own (object) frame and
//! posed into the world by a [`Pose2`] at query time.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;

/// Wraps a finite angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(a))
}

/// Unchecked [`wrap_angle`]. Values already in range are returned bit-for-bit.
#[inline]
pub(crate) fn wrap(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let mut r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU for inputs just below a multiple of it
    if r >= PI {
        r -= TAU;
    }
    r
}

/// Rotation matrix for angle `theta`.
#[inline]
pub fn rot(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Counter-clockwise quarter turn of a vector.
#[inline]
pub fn perp(v: &Point2) -> Point2 {
    Point2::new(-v.y, v.x)
}

/// z-component of the planar cross product.
#[inline]
pub fn cross2(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Planar pose `(x, y, theta)` of the object frame in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose2 {
    /// Builds a pose with `theta` wrapped into `[-pi, pi)`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap(theta) }
    }

    pub const fn identity() -> Self {
        Self { x: 0.0, y: 0.0, theta: 0.0 }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn translation(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rot(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Maps a point from this pose's local frame into the world.
    pub fn transform_point(&self, p_local: &Point2) -> Point2 {
        self.rotation() * p_local + self.translation()
    }

    /// Maps a world point into this pose's local frame.
    pub fn inverse_transform_point(&self, p_world: &Point2) -> Point2 {
        self.rotation().transpose() * (p_world - self.translation())
    }

    pub fn inverse(&self) -> Self {
        let t = -(self.rotation().transpose() * self.translation());
        Self::new(t.x, t.y, -self.theta)
    }

    /// Group composition `self * other`.
    pub fn compose(&self, other: &Pose2) -> Self {
        let t = self.transform_point(&other.translation());
        Self::new(t.x, t.y, self.theta + other.theta)
    }

    /// Additive update used by the solvers: `(x + dx, y + dy, wrap(theta + dtheta))`.
    pub fn retract(&self, delta: &Vector3<f64>) -> Self {
        Self::new(self.x + delta.x, self.y + delta.y, self.theta + delta.z)
    }
}

/// [`Pose2::transform_point`] as a free function.
pub fn transform_point(pose: &Pose2, p_local: &Point2) -> Point2 {
    pose.transform_point(p_local)
}

/// Component-wise pose difference with the angle wrapped: `(a - b)`.
pub fn pose_diff(a: &Pose2, b: &Pose2) -> Vector3<f64> {
    Vector3::new(a.x - b.x, a.y - b.y, wrap(a.theta - b.theta))
}

/// Planar body twist: linear velocity `(vx, vy)` and angular rate `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist2 {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist2 {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Result<Self> {
        if !(vx.is_finite() && vy.is_finite() && omega.is_finite()) {
            return Err(Error::NonFinite("twist"));
        }
        Ok(Self { vx, vy, omega })
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.omega)
    }
}

/// Simple counter-clockwise polygon in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
    normals: Vec<Point2>,
}

/// Which boundary feature a closest-point query landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// Interior of edge `i` (from vertex `i` to vertex `i + 1`).
    Edge(usize),
    Vertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    /// World-frame point on the posed boundary.
    pub point: Point2,
    pub distance: f64,
    /// Outward unit normal in the world frame.
    pub normal: Point2,
    pub feature: Feature,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::DegeneratePolygon(format!("{n} vertices, need at least 3")));
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(Error::NonFinite("polygon vertex"));
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(Error::DegeneratePolygon(format!(
                "signed area {area:.3e} is not positive (vertices must be counter-clockwise)"
            )));
        }
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let e = vertices[(i + 1) % n] - vertices[i];
            let len = e.norm();
            if len <= 1e-12 {
                return Err(Error::DegeneratePolygon(format!("edge {i} has zero length")));
            }
            normals.push(Point2::new(e.y, -e.x) / len);
        }
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(&a, &b, &c, &d) {
                    return Err(Error::DegeneratePolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(Self { vertices, normals })
    }

    /// Parses `[[x, y], ...]` vertex pairs.
    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| Point2::new(p[0], p[1])).collect())
    }

    /// Axis-aligned rectangle centered at the origin.
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        let (hw, hh) = (width / 2.0, height / 2.0);
        Self::new(vec![Point2::new(-hw, -hh), Point2::new(hw, -hh), Point2::new(hw, hh), Point2::new(-hw, hh)])
    }

    /// Ellipse with the given full axis lengths, sampled as an `n`-gon.
    pub fn ellipse(width: f64, height: f64, n: usize) -> Result<Self> {
        let (a, b) = (width / 2.0, height / 2.0);
        Self::new(
            (0..n)
                .map(|k| {
                    let t = TAU * k as f64 / n as f64;
                    Point2::new(a * t.cos(), b * t.sin())
                })
                .collect(),
        )
    }

    /// Regular `n`-gon with circumradius `radius`.
    pub fn regular(n: usize, radius: f64) -> Result<Self> {
        Self::ellipse(2.0 * radius, 2.0 * radius, n)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Outward unit normal of edge `i` in the object frame.
    pub fn edge_normal(&self, i: usize) -> Point2 {
        self.normals[i]
    }

    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        (self.vertices[i], self.vertices[(i + 1) % self.len()])
    }

    /// Normalized bisector of the outward normals of the two edges meeting at vertex `i`.
    pub fn vertex_normal(&self, i: usize) -> Point2 {
        let n = self.len();
        let s = self.normals[(i + n - 1) % n] + self.normals[i];
        let len = s.norm();
        if len > 1e-12 {
            s / len
        } else {
            self.normals[i]
        }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.len();
        let mut c = Point2::zeros();
        for i in 0..n {
            let (a, b) = self.edge(i);
            c += (a + b) * cross2(&a, &b);
        }
        c / (6.0 * self.area())
    }

    /// Copy translated so that the area centroid sits at the origin.
    pub fn centered(&self) -> Self {
        let c = self.centroid();
        Self { vertices: self.vertices.iter().map(|v| v - c).collect(), normals: self.normals.clone() }
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.vertices.iter().map(|v| v * s).collect())
    }

    /// Even-odd containment test in the object frame.
    pub fn contains_local(&self, q: &Point2) -> bool {
        let n = self.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = self.edge(i);
            if (a.y > q.y) != (b.y > q.y) {
                let x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if q.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Closest boundary point to an object-frame query point.
    pub fn closest_point_local(&self, q: &Point2) -> (Point2, f64, Feature) {
        let n = self.len();
        let mut best = (self.vertices[0], f64::INFINITY, Feature::Vertex(0));
        for i in 0..n {
            let (a, b) = self.edge(i);
            let e = b - a;
            let t = ((q - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            let p = a + e * t;
            let d2 = (q - p).norm_squared();
            if d2 < best.1 {
                let feature = if t <= 0.0 {
                    Feature::Vertex(i)
                } else if t >= 1.0 {
                    Feature::Vertex((i + 1) % n)
                } else {
                    Feature::Edge(i)
                };
                best = (p, d2, feature);
            }
        }
        (best.0, best.1.sqrt(), best.2)
    }

    /// Outward unit normal of a boundary feature in the object frame.
    pub fn feature_normal(&self, feature: Feature) -> Point2 {
        match feature {
            Feature::Edge(i) => self.normals[i],
            Feature::Vertex(i) => self.vertex_normal(i),
        }
    }
}

/// Closest point on the boundary of `poly` posed at `pose` to the world point `q`.
///
/// Interior query points are allowed; they return the nearest boundary point
/// with a positive distance. Equidistant edges resolve to the lowest edge index.
pub fn closest_point_on_polygon(poly: &Polygon, pose: &Pose2, q: &Point2) -> ClosestPoint {
    let q_local = pose.inverse_transform_point(q);
    let (p, distance, feature) = poly.closest_point_local(&q_local);
    ClosestPoint {
        point: pose.transform_point(&p),
        distance,
        normal: pose.rotation() * poly.feature_normal(feature),
        feature,
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross2(&v[i], &v[(i + 1) % n])).sum::<f64>() / 2.0
}

fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    cross2(&(b - a), &(c - a))
}

fn segments_intersect(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: &Point2, q: &Point2, r: &Point2, o: f64| {
        o == 0.0 && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}
