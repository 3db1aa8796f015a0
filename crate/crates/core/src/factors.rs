//! Cost terms of the pose graph: motion (M), contact (C), visual (V),
//! stationary prior (S), plus the anchor prior left behind by window trimming.
//!
//! Every residual is a `Vector3`; contact residuals use the first two rows and
//! carry a zero third row in their square-root information.

use nalgebra::{Cholesky, DMatrix, Matrix2, Matrix2x3, Matrix3, RowVector3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geom2d::{cross2, perp, pose_diff, wrap, Feature, Point2, Polygon, Pose2, Twist2};
use crate::pushing_physics::{ShapeModel, Wrench2};
use crate::sensor_sim::FingerReading;

/// Rotation by +90 degrees.
const J: Matrix2<f64> = Matrix2::new(0.0, -1.0, 1.0, 0.0);

/// One sensed finger in contact: center and object-on-finger force, world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactObs {
    pub position: Point2,
    pub force: Point2,
}

impl From<&FingerReading> for ContactObs {
    fn from(f: &FingerReading) -> Self {
        Self { position: f.position, force: f.force }
    }
}

/// Geometry shared by the contact and motion terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub polygon: Polygon,
    pub c: f64,
    pub radius: f64,
}

impl FactorModel {
    pub fn new(shape: &ShapeModel, radius: f64) -> Self {
        Self { polygon: shape.polygon.clone(), c: shape.c, radius }
    }
}

/// Body twist from `x_prev` to `x_curr`, expressed in the frame of `x_prev`.
pub fn finite_difference_twist(x_prev: &Pose2, x_curr: &Pose2, dt: f64) -> Twist2 {
    let v = x_prev.rotation().transpose() * (x_curr.translation() - x_prev.translation()) / dt;
    Twist2 { vx: v.x, vy: v.y, omega: wrap(x_curr.theta - x_prev.theta) / dt }
}

/// Cross-product form of the limit-surface motion constraint: zero iff the
/// finite-difference twist is parallel to `(c^2 fx, c^2 fy, m)`.
pub fn motion_residual(x_prev: &Pose2, x_curr: &Pose2, wrench: &Wrench2, c: f64, dt: f64) -> Vector3<f64> {
    let xi = finite_difference_twist(x_prev, x_curr, dt).to_vector();
    let c2 = c * c;
    xi.cross(&Vector3::new(c2 * wrench.fx, c2 * wrench.fy, wrench.m))
}

/// Total wrench the fingers apply to the object posed at `x`, in its frame.
///
/// Each force acts at the boundary point closest to the finger center; the
/// moment is about the frame origin of `x`.
pub fn contact_wrench(x: &Pose2, contacts: &[ContactObs], poly: &Polygon) -> Wrench2 {
    let o = x.translation();
    let mut f_world = Point2::zeros();
    let mut m = 0.0;
    for obs in contacts {
        let (a, _) = closest_point_with_jacobian(poly, x, &obs.position);
        let g = -obs.force;
        f_world += g;
        m += cross2(&(a - o), &g);
    }
    let f = x.rotation().transpose() * f_world;
    Wrench2 { fx: f.x, fy: f.y, m }
}

/// Point `B` on the finger circle facing the object: `p - r * f_hat`.
pub fn contact_point_estimate(obs: &ContactObs, radius: f64) -> Result<Point2> {
    let n = obs.force.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidInput("contact reported with zero force".into()));
    }
    Ok(obs.position - obs.force * (radius / n))
}

/// `A - B` in the contact frame `[f_hat, perp(f_hat)]`, with `A` the closest
/// boundary point of the posed object to `B`.
pub fn contact_residual(x: &Pose2, obs: &ContactObs, poly: &Polygon, radius: f64) -> Result<Vector2<f64>> {
    let b = contact_point_estimate(obs, radius)?;
    let (a, _) = closest_point_with_jacobian(poly, x, &b);
    let f = obs.force.normalize();
    let d = a - b;
    Ok(Vector2::new(f.dot(&d), perp(&f).dot(&d)))
}

pub fn visual_residual(x: &Pose2, w: &Pose2) -> Vector3<f64> {
    pose_diff(x, w)
}

pub fn prior_residual(x_curr: &Pose2, x_prev: &Pose2) -> Vector3<f64> {
    pose_diff(x_curr, x_prev)
}

/// Closest boundary point to world point `q` and its derivative with respect
/// to the pose `(x, y, theta)`, holding `q` fixed.
pub fn closest_point_with_jacobian(poly: &Polygon, x: &Pose2, q: &Point2) -> (Point2, Matrix2x3<f64>) {
    let r = x.rotation();
    let q_l = r.transpose() * (q - x.translation());
    let (l, _, feature) = poly.closest_point_local(&q_l);
    let dl_dq = match feature {
        Feature::Edge(i) => {
            let (a, b) = poly.edge(i);
            let d = (b - a).normalize();
            d * d.transpose()
        }
        Feature::Vertex(_) => Matrix2::zeros(),
    };
    let da_do = Matrix2::identity() - r * dl_dq * r.transpose();
    let da_dth = r * J * l - r * dl_dq * J * q_l;
    let mut jac = Matrix2x3::zeros();
    jac.fixed_view_mut::<2, 2>(0, 0).copy_from(&da_do);
    jac.fixed_view_mut::<2, 1>(0, 2).copy_from(&da_dth);
    (x.transform_point(&l), jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorKind {
    Motion,
    Contact,
    Visual,
    Prior,
    Anchor,
}

impl FactorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Motion => "M",
            Self::Contact => "C",
            Self::Visual => "V",
            Self::Prior => "S",
            Self::Anchor => "A",
        }
    }

    pub fn dim(self) -> usize {
        if self == Self::Contact {
            2
        } else {
            3
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Motion | Self::Prior => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    /// Nodes `[prev, curr]`; contacts sensed at `curr`.
    Motion {
        contacts: Vec<ContactObs>,
        dt: f64,
    },
    Contact(ContactObs),
    Visual(Pose2),
    /// Nodes `[curr, prev]`.
    Prior,
    Anchor(Pose2),
}

impl Measurement {
    pub fn kind(&self) -> FactorKind {
        match self {
            Self::Motion { .. } => FactorKind::Motion,
            Self::Contact(_) => FactorKind::Contact,
            Self::Visual(_) => FactorKind::Visual,
            Self::Prior => FactorKind::Prior,
            Self::Anchor(_) => FactorKind::Anchor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub measurement: Measurement,
    nodes: [usize; 2],
    covariance: DMatrix<f64>,
    /// Upper-triangular `W` with `W^T W = covariance^-1`, zero-padded to 3x3.
    sqrt_info: Matrix3<f64>,
}

impl Factor {
    /// `nodes` lists the connected state indices in residual argument order.
    pub fn new(measurement: Measurement, nodes: &[usize], covariance: DMatrix<f64>) -> Result<Self> {
        let kind = measurement.kind();
        if nodes.len() != kind.arity() {
            return Err(Error::LengthMismatch(nodes.len(), kind.arity()));
        }
        let dim = kind.dim();
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "{} factor needs a {dim}x{dim} covariance, got {}x{}",
                kind.as_str(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 * covariance.amax().max(1e-300) {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let info =
            covariance.clone().try_inverse().ok_or_else(|| Error::InvalidInput("covariance is singular".into()))?;
        let chol =
            Cholesky::new(info).ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?;
        let mut sqrt_info = Matrix3::zeros();
        let lt = chol.l().transpose();
        sqrt_info.view_mut((0, 0), (dim, dim)).copy_from(&lt);
        match &measurement {
            Measurement::Contact(obs) => {
                contact_point_estimate(obs, 1.0)?;
            }
            Measurement::Motion { dt, contacts } => {
                if !(*dt > 0.0) {
                    return Err(Error::InvalidInput(format!("motion factor dt = {dt}")));
                }
                if contacts.is_empty() {
                    return Err(Error::InvalidInput("motion factor without contacts".into()));
                }
            }
            _ => {}
        }
        let nodes = [nodes[0], *nodes.get(1).unwrap_or(&nodes[0])];
        Ok(Self { measurement, nodes, covariance, sqrt_info })
    }

    pub fn kind(&self) -> FactorKind {
        self.measurement.kind()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.kind().arity()]
    }

    pub(crate) fn shift_nodes(&mut self, by: usize) {
        for n in &mut self.nodes {
            *n -= by;
        }
    }

    pub fn dim(&self) -> usize {
        self.kind().dim()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn sqrt_info(&self) -> &Matrix3<f64> {
        &self.sqrt_info
    }

    /// Unweighted residual; `xs` holds the poses of `nodes()` in order.
    pub fn residual(&self, model: &FactorModel, xs: &[Pose2]) -> Vector3<f64> {
        match &self.measurement {
            Measurement::Motion { contacts, dt } => {
                let w = contact_wrench(&xs[1], contacts, &model.polygon);
                motion_residual(&xs[0], &xs[1], &w, model.c, *dt)
            }
            Measurement::Contact(obs) => {
                let r = contact_residual(&xs[0], obs, &model.polygon, model.radius)
                    .expect("force checked non-zero at construction");
                Vector3::new(r.x, r.y, 0.0)
            }
            Measurement::Visual(w) | Measurement::Anchor(w) => visual_residual(&xs[0], w),
            Measurement::Prior => prior_residual(&xs[0], &xs[1]),
        }
    }

    pub fn whitened_residual(&self, model: &FactorModel, xs: &[Pose2]) -> Vector3<f64> {
        self.sqrt_info * self.residual(model, xs)
    }

    /// Squared Mahalanobis norm of the residual.
    pub fn cost(&self, model: &FactorModel, xs: &[Pose2]) -> f64 {
        self.whitened_residual(model, xs).norm_squared()
    }

    /// Analytic Jacobians with respect to each connected pose.
    pub fn jacobians(&self, model: &FactorModel, xs: &[Pose2]) -> [Matrix3<f64>; 2] {
        match &self.measurement {
            Measurement::Motion { contacts, dt } => motion_jacobians(model, &xs[0], &xs[1], contacts, *dt),
            Measurement::Contact(obs) => {
                let b = contact_point_estimate(obs, model.radius).expect("checked at construction");
                let (_, da) = closest_point_with_jacobian(&model.polygon, &xs[0], &b);
                let f = obs.force.normalize();
                let fp = perp(&f);
                let mut j = Matrix3::zeros();
                j.fixed_view_mut::<1, 3>(0, 0).copy_from(&(f.transpose() * da));
                j.fixed_view_mut::<1, 3>(1, 0).copy_from(&(fp.transpose() * da));
                [j, Matrix3::zeros()]
            }
            Measurement::Visual(_) | Measurement::Anchor(_) => [Matrix3::identity(), Matrix3::zeros()],
            Measurement::Prior => [Matrix3::identity(), -Matrix3::identity()],
        }
    }

    /// Central-difference Jacobians, perturbing each pose additively with wrapped angle.
    pub fn numeric_jacobians(&self, model: &FactorModel, xs: &[Pose2], step: f64) -> [Matrix3<f64>; 2] {
        let mut out = [Matrix3::zeros(); 2];
        let mut pert = xs.to_vec();
        for (n, jac) in out.iter_mut().enumerate().take(xs.len()) {
            for c in 0..3 {
                let mut d = Vector3::zeros();
                d[c] = step;
                pert[n] = xs[n].retract(&d);
                let rp = self.residual(model, &pert);
                pert[n] = xs[n].retract(&-d);
                let rm = self.residual(model, &pert);
                pert[n] = xs[n];
                let mut diff = rp - rm;
                if matches!(self.kind(), FactorKind::Visual | FactorKind::Anchor | FactorKind::Prior) {
                    diff.z = wrap(diff.z);
                }
                jac.set_column(c, &(diff / (2.0 * step)));
            }
        }
        out
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn motion_jacobians(
    model: &FactorModel,
    xp: &Pose2,
    xc: &Pose2,
    contacts: &[ContactObs],
    dt: f64,
) -> [Matrix3<f64>; 2] {
    let c2 = model.c * model.c;
    let rpt = xp.rotation().transpose();
    let v = rpt * (xc.translation() - xp.translation()) / dt;
    let xi = Vector3::new(v.x, v.y, wrap(xc.theta - xp.theta) / dt);

    let mut dxi_p = Matrix3::zeros();
    dxi_p.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-rpt / dt));
    dxi_p.fixed_view_mut::<2, 1>(0, 2).copy_from(&(-J * v));
    dxi_p[(2, 2)] = -1.0 / dt;
    let mut dxi_c = Matrix3::zeros();
    dxi_c.fixed_view_mut::<2, 2>(0, 0).copy_from(&(rpt / dt));
    dxi_c[(2, 2)] = 1.0 / dt;

    let o = xc.translation();
    let mut f_world = Point2::zeros();
    let mut m = 0.0;
    let mut dm = RowVector3::zeros();
    for obs in contacts {
        let (a, da) = closest_point_with_jacobian(&model.polygon, xc, &obs.position);
        let g = -obs.force;
        f_world += g;
        let h = -J * g;
        m += h.dot(&(a - o));
        let mut da_shift = da;
        da_shift[(0, 0)] -= 1.0;
        da_shift[(1, 1)] -= 1.0;
        dm += h.transpose() * da_shift;
    }
    let f = xc.rotation().transpose() * f_world;
    let u = Vector3::new(c2 * f.x, c2 * f.y, m);
    let mut du_c = Matrix3::zeros();
    du_c.fixed_view_mut::<2, 1>(0, 2).copy_from(&(-J * f * c2));
    du_c.fixed_view_mut::<1, 3>(2, 0).copy_from(&dm);

    let su = skew(&u);
    [-su * dxi_p, -su * dxi_c + skew(&xi) * du_c]
}

/// Default measurement covariances, diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariances {
    /// Visual pose noise.
    pub visual: Matrix3<f64>,
    /// Contact residual noise, contact frame.
    pub contact: Matrix2<f64>,
    /// Stationary prior per estimation step; also used for the trim anchor.
    pub prior: Matrix3<f64>,
    /// Motion residual noise.
    pub motion: Matrix3<f64>,
}

/// Motion residual standard deviations identified from simulated pushes at the
/// default noise level (see the `characterize_noise` example).
/// Identified at ground truth on the standard scenario (seeds 1-3), see the
/// `characterize_noise` example.
pub const DEFAULT_MOTION_SIGMA: [f64; 3] = [3.8e-5, 4.6e-5, 1.3e-6];
pub const DEFAULT_CONTACT_SIGMA: [f64; 2] = [5.0e-4, 6.1e-5];
pub const DEFAULT_PRIOR_SIGMA: [f64; 3] = [3.3e-4, 2.9e-4, 1.6e-3];

impl Default for Covariances {
    fn default() -> Self {
        Self::from_sigmas(
            [0.01, 0.01, 3f64.to_radians()],
            DEFAULT_CONTACT_SIGMA,
            DEFAULT_PRIOR_SIGMA,
            DEFAULT_MOTION_SIGMA,
        )
    }
}

impl Covariances {
    pub fn from_sigmas(visual: [f64; 3], contact: [f64; 2], prior: [f64; 3], motion: [f64; 3]) -> Self {
        let d3 = |s: [f64; 3]| Matrix3::from_diagonal(&Vector3::from(s.map(|x| x * x)));
        Self {
            visual: d3(visual),
            contact: Matrix2::from_diagonal(&Vector2::from(contact.map(|x| x * x))),
            prior: d3(prior),
            motion: d3(motion),
        }
    }

    pub fn for_kind(&self, kind: FactorKind) -> DMatrix<f64> {
        match kind {
            FactorKind::Motion => DMatrix::from_iterator(3, 3, self.motion.iter().copied()),
            FactorKind::Contact => DMatrix::from_iterator(2, 2, self.contact.iter().copied()),
            FactorKind::Visual => DMatrix::from_iterator(3, 3, self.visual.iter().copied()),
            FactorKind::Prior | FactorKind::Anchor => DMatrix::from_iterator(3, 3, self.prior.iter().copied()),
        }
    }
}
