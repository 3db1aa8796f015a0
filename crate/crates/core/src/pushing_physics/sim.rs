use nalgebra::{DMatrix, DVector, Vector3};

use super::{PusherFrame, ShapeModel, Wrench2};
use crate::error::{Error, Result};
use crate::geom2d::{cross2, perp, rot, wrap, Feature, Point2, Polygon, Pose2, Twist2};

/// Source of finger positions, queried once per simulator step.
///
/// Implementations may plan relative to the current object pose, so frames are
/// requested in order with the pose at the start of the step.
pub trait Pusher {
    fn radius(&self) -> f64;
    fn num_fingers(&self) -> usize;
    fn num_steps(&self) -> usize;
    fn frame(&mut self, k: usize, pose: &Pose2, poly: &Polygon) -> Result<PusherFrame>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    /// Quasi-static speed limit for the fingers, m/s.
    pub max_speed: f64,
    /// Fingers closer than this to the object at the start of a step are treated as touching.
    pub contact_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 0.002, max_speed: 0.1, contact_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMode {
    Separated,
    Sticking,
    Sliding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerRecord {
    /// Finger center, world frame.
    pub center: Point2,
    /// Force the object exerts on the finger, world frame, newtons.
    pub force: Point2,
    /// Contact point on the object boundary, world frame, when the finger carries force.
    pub contact_point: Option<Point2>,
    pub mode: ContactMode,
}

/// State at the end of one simulator step.
///
/// Forces and the twist describe the interval that ended at `t`; the contact
/// geometry is that of the pose at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStep {
    pub t: f64,
    pub pose: Pose2,
    pub fingers: Vec<FingerRecord>,
    /// Body twist over the last interval, in the frame of the previous pose.
    pub twist: Twist2,
    /// Total pusher wrench on the object, in the frame of `pose`, moment about the centroid.
    pub wrench: Wrench2,
    pub stroke: bool,
}

impl SimStep {
    pub fn num_contacts(&self) -> usize {
        self.fingers.iter().filter(|f| f.contact_point.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub radius: f64,
    pub steps: Vec<SimStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Stick,
    SlidePos,
    SlideNeg,
    Separate,
}

const MODES: [Mode; 4] = [Mode::Stick, Mode::SlidePos, Mode::SlideNeg, Mode::Separate];

#[derive(Debug, Clone, Copy)]
struct Active {
    finger: usize,
    feature: Feature,
    /// Finger center at the start of the step, start body frame.
    q0: Point2,
    /// Finger center at the end of the step, start body frame.
    p1: Point2,
}

struct Problem<'a> {
    poly: &'a Polygon,
    radius: f64,
    mu: f64,
    c2: f64,
    contacts: &'a [Active],
    modes: &'a [Mode],
}

struct ContactEval {
    q: Point2,
    gap: f64,
    normal: Point2,
    point: Point2,
}

const FEAS_EPS: f64 = 1e-11;

impl Problem<'_> {
    fn num_vars(&self) -> usize {
        3 + self.modes.iter().map(|m| force_vars(*m)).sum::<usize>()
    }

    /// Finger center at the end of the step in the end body frame.
    fn end_center(p1: &Point2, delta: &Vector3<f64>) -> Point2 {
        rot(-delta.z) * (p1 - Point2::new(delta.x, delta.y))
    }

    fn eval_contact(&self, a: &Active, delta: &Vector3<f64>) -> ContactEval {
        let q = Self::end_center(&a.p1, delta);
        let v = self.poly.vertices();
        match a.feature {
            Feature::Edge(i) => {
                let n = self.poly.edge_normal(i);
                let h = n.dot(&(q - v[i]));
                ContactEval { q, gap: h - self.radius, normal: n, point: q - n * h }
            }
            Feature::Vertex(i) => {
                let d = q - v[i];
                let len = d.norm();
                ContactEval { q, gap: len - self.radius, normal: d / len, point: v[i] }
            }
        }
    }

    /// Contact force on the object in the end body frame (unscaled).
    fn force(&self, mode: Mode, n: &Point2, vars: &[f64]) -> Point2 {
        let t = perp(n);
        match mode {
            Mode::Stick => -n * vars[0] + t * vars[1],
            Mode::SlidePos => (-n + t * self.mu) * vars[0],
            Mode::SlideNeg => (-n - t * self.mu) * vars[0],
            Mode::Separate => Point2::zeros(),
        }
    }

    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let delta = Vector3::new(z[0], z[1], z[2]);
        let mut r = Vec::with_capacity(z.len());
        let mut wrench = Vector3::zeros();
        let mut off = 3;
        for (a, &mode) in self.contacts.iter().zip(self.modes) {
            let k = force_vars(mode);
            if mode == Mode::Separate {
                continue;
            }
            let e = self.eval_contact(a, &delta);
            let g = self.force(mode, &e.normal, &z.as_slice()[off..off + k]);
            wrench += Vector3::new(g.x, g.y, cross2(&e.point, &g));
            r.push(e.gap);
            if mode == Mode::Stick {
                r.push((e.q - a.q0).dot(&perp(&e.normal)));
            }
            off += k;
        }
        r.push(delta.x - self.c2 * wrench.x);
        r.push(delta.y - self.c2 * wrench.y);
        r.push(delta.z - wrench.z);
        DVector::from_vec(r)
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let n = z.len();
        let m = self.residual(z).len();
        let mut j = DMatrix::zeros(m, n);
        let h = 1e-7;
        for c in 0..n {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += h;
            zm[c] -= h;
            let col = (self.residual(&zp) - self.residual(&zm)) / (2.0 * h);
            j.set_column(c, &col);
        }
        j
    }

    fn solve(&self) -> Option<DVector<f64>> {
        let mut z = DVector::zeros(self.num_vars());
        let mut r = self.residual(&z);
        for _ in 0..40 {
            if r.amax() < 1e-15 {
                break;
            }
            let j = self.jacobian(&z);
            let step = j.svd(true, true).solve(&(-&r), 1e-13).ok()?;
            z += &step;
            let r_new = self.residual(&z);
            let stalled = step.amax() < 1e-18;
            r = r_new;
            if stalled {
                break;
            }
        }
        (r.amax() < 1e-12).then_some(z)
    }

    fn feasible(&self, z: &DVector<f64>) -> bool {
        let delta = Vector3::new(z[0], z[1], z[2]);
        let mut off = 3;
        for (a, &mode) in self.contacts.iter().zip(self.modes) {
            let vars = &z.as_slice()[off..off + force_vars(mode)];
            off += vars.len();
            let e = self.eval_contact(a, &delta);
            let slip = (e.q - a.q0).dot(&perp(&e.normal));
            let ok = match mode {
                Mode::Stick => vars[0] >= -FEAS_EPS && vars[1].abs() <= self.mu * vars[0] + FEAS_EPS,
                Mode::SlidePos => vars[0] >= -FEAS_EPS && slip >= -FEAS_EPS,
                Mode::SlideNeg => vars[0] >= -FEAS_EPS && slip <= FEAS_EPS,
                Mode::Separate => signed_gap(self.poly, &e.q, self.radius) >= -1e-12,
            };
            if !ok {
                return false;
            }
        }
        true
    }
}

fn force_vars(mode: Mode) -> usize {
    match mode {
        Mode::Stick => 2,
        Mode::SlidePos | Mode::SlideNeg => 1,
        Mode::Separate => 0,
    }
}

fn signed_gap(poly: &Polygon, q: &Point2, radius: f64) -> f64 {
    let (_, d, _) = poly.closest_point_local(q);
    if poly.contains_local(q) {
        -d - radius
    } else {
        d - radius
    }
}

struct StepSolution {
    delta: Vector3<f64>,
    /// Per active contact: mode, unscaled force and contact point (end body frame).
    contacts: Vec<(usize, Mode, Point2, Point2)>,
}

fn solve_modes(poly: &Polygon, shape: &ShapeModel, radius: f64, active: &[Active]) -> Option<StepSolution> {
    let n = active.len();
    let mut modes = vec![Mode::Stick; n];
    let total = 4usize.pow(n as u32);
    for code in 0..total {
        let mut rest = code;
        for m in modes.iter_mut().rev() {
            *m = MODES[rest % 4];
            rest /= 4;
        }
        let prob =
            Problem { poly, radius, mu: shape.mu_pusher, c2: shape.c * shape.c, contacts: active, modes: &modes };
        let Some(z) = prob.solve() else { continue };
        if !prob.feasible(&z) {
            continue;
        }
        let delta = Vector3::new(z[0], z[1], z[2]);
        let mut off = 3;
        let mut contacts = Vec::with_capacity(n);
        for (a, &mode) in active.iter().zip(&modes) {
            let vars = &z.as_slice()[off..off + force_vars(mode)];
            off += vars.len();
            let e = prob.eval_contact(a, &delta);
            contacts.push((a.finger, mode, prob.force(mode, &e.normal, vars), e.point));
        }
        return Some(StepSolution { delta, contacts });
    }
    None
}

/// Runs the quasi-static pusher-slider simulation.
///
/// Each step moves the fingers to their next frame and solves for the object
/// displacement and finger forces jointly: active contacts must end the step
/// touching, the finger forces must lie in the friction cone (sticking) or on
/// its boundary opposing slip (sliding), and the displacement must follow the
/// ellipsoid limit surface from the total wrench.
pub fn simulate_push<P: Pusher + ?Sized>(
    shape: &ShapeModel,
    pusher: &mut P,
    x0: Pose2,
    config: &SimConfig,
) -> Result<Trajectory> {
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt = {}", config.dt)));
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial pose"));
    }
    let radius = pusher.radius();
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("pusher radius = {radius}")));
    }
    let poly = &shape.polygon;
    let n_steps = pusher.num_steps();
    let n_fingers = pusher.num_fingers();
    let mut steps = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return Ok(Trajectory { dt: config.dt, radius, steps });
    }

    let mut pose = Pose2::new(x0.x, x0.y, x0.theta);
    let mut prev = pusher.frame(0, &pose, poly)?;
    check_frame(&prev, n_fingers)?;
    for (i, c) in prev.centers.iter().enumerate() {
        let gap = signed_gap(poly, &pose.inverse_transform_point(c), radius);
        if gap < -config.contact_tol {
            return Err(Error::PusherInsideObject { finger: i, gap });
        }
    }
    steps.push(SimStep {
        t: 0.0,
        pose,
        fingers: prev
            .centers
            .iter()
            .map(|c| FingerRecord {
                center: *c,
                force: Point2::zeros(),
                contact_point: None,
                mode: ContactMode::Separated,
            })
            .collect(),
        twist: Twist2::default(),
        wrench: Wrench2::default(),
        stroke: prev.stroke,
    });

    let scale_base = shape.max_friction_force();
    let c2 = shape.c * shape.c;
    for k in 1..n_steps {
        let t = k as f64 * config.dt;
        let frame = pusher.frame(k, &pose, poly)?;
        check_frame(&frame, n_fingers)?;
        let to_body = |p: &Point2| pose.inverse_transform_point(p);

        let mut active: Vec<Active> = Vec::new();
        if frame.lifted {
            for (i, c) in frame.centers.iter().enumerate() {
                let gap = signed_gap(poly, &to_body(c), radius);
                if gap < -config.contact_tol {
                    return Err(Error::PusherInsideObject { finger: i, gap });
                }
            }
        } else {
            for (i, (c0, c1)) in prev.centers.iter().zip(&frame.centers).enumerate() {
                let speed = (c1 - c0).norm() / config.dt;
                if speed > config.max_speed {
                    return Err(Error::NonQuasiStatic { speed, limit: config.max_speed });
                }
                let q0 = to_body(c0);
                if signed_gap(poly, &q0, radius) <= config.contact_tol {
                    let (_, _, feature) = poly.closest_point_local(&q0);
                    active.push(Active { finger: i, feature, q0, p1: to_body(c1) });
                }
            }
        }

        let mut solution = StepSolution { delta: Vector3::zeros(), contacts: Vec::new() };
        if !frame.lifted {
            let mut settled = false;
            for _ in 0..8 {
                solution = if active.is_empty() {
                    StepSolution { delta: Vector3::zeros(), contacts: Vec::new() }
                } else {
                    solve_modes(poly, shape, radius, &active).ok_or(Error::ContactSolve { t })?
                };
                let mut changed = false;
                // the assumed boundary feature must still be the closest one at the end
                for a in active.iter_mut() {
                    let q = Problem::end_center(&a.p1, &solution.delta);
                    let (cp, _, feature) = poly.closest_point_local(&q);
                    if feature != a.feature {
                        let assumed = match a.feature {
                            Feature::Edge(i) => {
                                let n = poly.edge_normal(i);
                                q - n * n.dot(&(q - poly.vertices()[i]))
                            }
                            Feature::Vertex(i) => poly.vertices()[i],
                        };
                        if (assumed - cp).norm() > 1e-12 {
                            a.feature = feature;
                            changed = true;
                        }
                    }
                }
                // fingers the object would run into during the step
                for (i, (c0, c1)) in prev.centers.iter().zip(&frame.centers).enumerate() {
                    if active.iter().any(|a| a.finger == i) {
                        continue;
                    }
                    let p1 = to_body(c1);
                    let q = Problem::end_center(&p1, &solution.delta);
                    if signed_gap(poly, &q, radius) < -1e-12 {
                        let (_, _, feature) = poly.closest_point_local(&q);
                        active.push(Active { finger: i, feature, q0: to_body(c0), p1 });
                        changed = true;
                    }
                }
                if !changed {
                    settled = true;
                    break;
                }
            }
            if !settled {
                return Err(Error::ContactSolve { t });
            }
        }

        let delta = solution.delta;
        let rot0 = pose.rotation();
        let p_next = pose.translation() + rot0 * Point2::new(delta.x, delta.y);
        let next = Pose2 { x: p_next.x, y: p_next.y, theta: wrap(pose.theta + delta.z) };

        // unscaled forces g satisfy delta = D * W(g); the limit surface fixes the magnitude
        let motion = (delta.x * delta.x + delta.y * delta.y + c2 * delta.z * delta.z).sqrt();
        // W = f_max (v, c^2 w) / |(v, c w)| and (v, c^2 w) = c^2 W(g)
        let kappa = if motion > 0.0 { scale_base * c2 / motion } else { 0.0 };
        let rot1 = next.rotation();
        let mut fingers: Vec<FingerRecord> = frame
            .centers
            .iter()
            .map(|c| FingerRecord {
                center: *c,
                force: Point2::zeros(),
                contact_point: None,
                mode: ContactMode::Separated,
            })
            .collect();
        let mut wrench = Vector3::zeros();
        for (finger, mode, g, point) in &solution.contacts {
            let g = g * kappa;
            if g.norm() == 0.0 {
                continue;
            }
            wrench += Vector3::new(g.x, g.y, cross2(point, &g));
            let rec = &mut fingers[*finger];
            rec.force = -(rot1 * g);
            rec.contact_point = Some(next.transform_point(point));
            rec.mode = match mode {
                Mode::Stick => ContactMode::Sticking,
                _ => ContactMode::Sliding,
            };
        }
        steps.push(SimStep {
            t,
            pose: next,
            fingers,
            twist: Twist2 { vx: delta.x / config.dt, vy: delta.y / config.dt, omega: delta.z / config.dt },
            wrench: Wrench2::from_vector(&wrench),
            stroke: frame.stroke,
        });
        pose = next;
        prev = frame;
    }
    Ok(Trajectory { dt: config.dt, radius, steps })
}

fn check_frame(frame: &PusherFrame, n: usize) -> Result<()> {
    if frame.centers.len() != n {
        return Err(Error::LengthMismatch(frame.centers.len(), n));
    }
    if frame.centers.iter().any(|c| !(c.x.is_finite() && c.y.is_finite())) {
        return Err(Error::NonFinite("pusher center"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pushing_physics::{shapes, FingerLayout, PushPlan, PushStroke, PusherScript, Segment};

    const R: f64 = 0.003125;

    fn square() -> ShapeModel {
        ShapeModel::new(shapes::rect1(), 0.25, 0.28, 0.837).unwrap()
    }

    fn run(script: &mut PusherScript) -> Trajectory {
        simulate_push(&square(), script, Pose2::identity(), &SimConfig::default()).unwrap()
    }

    fn check_invariants(shape: &ShapeModel, traj: &Trajectory) {
        for w in traj.steps.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let xi = b.twist.to_vector();
            let dw = shape.ls_direction(&b.wrench);
            if xi.norm() > 0.0 {
                let cross = xi.normalize().cross(&dw.normalize());
                assert!(cross.norm() < 1e-8, "limit surface violated at t={}: {cross:?}", b.t);
            } else {
                assert_eq!(b.wrench.to_vector().norm(), 0.0);
            }
            for f in &b.fingers {
                let Some(cp) = f.contact_point else { continue };
                let cpt = crate::geom2d::closest_point_on_polygon(&shape.polygon, &b.pose, &f.center);
                let n = cpt.normal;
                let fn_ = f.force.dot(&n);
                let ft = f.force.dot(&perp(&n));
                assert!(ft.abs() <= shape.mu_pusher * fn_ + 1e-9, "cone at t={}", b.t);
                assert!((cpt.point - cp).norm() < 1e-9);
                assert!(cpt.distance - R > -1e-6, "penetration at t={}", b.t);
            }
            let _ = a;
        }
    }

    #[test]
    fn centered_push_translates() {
        let start = Point2::new(-0.045 - R - 0.001, 0.0);
        let mut s = PusherScript::straight(R, &[start], Point2::new(0.06, 0.0), 0.002, 501);
        let traj = run(&mut s);
        let last = traj.steps.last().unwrap();
        // 1 s at 60 mm/s, 1 mm of free travel
        assert!((last.pose.x - 0.059).abs() < 1e-9, "{}", last.pose.x);
        assert!(last.pose.y.abs() < 1e-12 && last.pose.theta.abs() < 1e-12);
        assert!(last.fingers[0].force.x < 0.0);
        assert_eq!(last.fingers[0].mode, ContactMode::Sticking);
        check_invariants(&square(), &traj);
    }

    #[test]
    fn off_center_push_rotates_with_moment() {
        let start = Point2::new(-0.045 - R - 0.0006, 0.02);
        let mut s = PusherScript::straight(R, &[start], Point2::new(0.06, 0.0), 0.002, 400);
        let traj = run(&mut s);
        let mut rotated = false;
        for st in &traj.steps[1..] {
            if st.twist.omega != 0.0 {
                assert_eq!(st.twist.omega.signum(), st.wrench.m.signum());
                rotated = true;
            }
        }
        assert!(rotated);
        // pushing above the centroid in +x turns the object clockwise
        assert!(traj.steps.last().unwrap().pose.theta < -0.05);
        check_invariants(&square(), &traj);
    }

    #[test]
    fn sticking_contact_moves_with_finger() {
        let start = Point2::new(-0.045 - R, 0.01);
        let mut s = PusherScript::straight(R, &[start], Point2::new(0.05, 0.0), 0.002, 300);
        let traj = run(&mut s);
        let mut checked = 0;
        for w in traj.steps.windows(2) {
            let f = &w[1].fingers[0];
            if f.mode != ContactMode::Sticking || w[0].fingers[0].contact_point.is_none() {
                continue;
            }
            let q0 = w[0].pose.inverse_transform_point(&w[0].fingers[0].center);
            let q1 = w[1].pose.inverse_transform_point(&f.center);
            assert!((q1 - q0).norm() < 1e-6);
            checked += 1;
        }
        assert!(checked > 10);
    }

    #[test]
    fn static_pusher_leaves_object_at_rest() {
        let start = Point2::new(-0.045 - R, 0.0);
        let mut s = PusherScript::straight(R, &[start], Point2::zeros(), 0.002, 50);
        let traj = run(&mut s);
        for st in &traj.steps {
            assert_eq!(st.pose, Pose2::identity());
            assert_eq!(st.wrench, Wrench2::default());
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let mut inside = PusherScript::straight(R, &[Point2::zeros()], Point2::zeros(), 0.002, 2);
        assert!(matches!(
            simulate_push(&square(), &mut inside, Pose2::identity(), &SimConfig::default()),
            Err(Error::PusherInsideObject { .. })
        ));
        let far = Point2::new(-0.2, 0.0);
        let mut fast = PusherScript::straight(R, &[far], Point2::new(0.5, 0.0), 0.002, 3);
        assert!(matches!(
            simulate_push(&square(), &mut fast, Pose2::identity(), &SimConfig::default()),
            Err(Error::NonQuasiStatic { .. })
        ));
    }

    fn corner_plan() -> PushPlan {
        let stroke = |direction: f64, offset: f64, layout| {
            Segment::Push(PushStroke { direction, offset, layout, distance: 0.03 })
        };
        PushPlan::new(
            vec![
                Segment::Hold { duration: 0.02 },
                stroke(0.0, 0.0, FingerLayout::Side),
                stroke(std::f64::consts::FRAC_PI_4, 0.008, FingerLayout::Side),
                stroke(std::f64::consts::PI, 0.02, FingerLayout::Inline),
                Segment::Hold { duration: 0.02 },
            ],
            R,
            0.04,
            0.06,
            0.002,
        )
    }

    #[test]
    fn two_finger_plan_is_consistent_and_deterministic() {
        let shape = square();
        let a = simulate_push(&shape, &mut corner_plan(), Pose2::identity(), &SimConfig::default()).unwrap();
        let b = simulate_push(&shape, &mut corner_plan(), Pose2::identity(), &SimConfig::default()).unwrap();
        assert_eq!(a, b);
        check_invariants(&shape, &a);
        let two = a.steps.iter().filter(|s| s.num_contacts() == 2).count();
        assert!(two > 50, "two-contact steps: {two}");
        let moved = a.steps.last().unwrap().pose;
        assert!(moved.x.abs() + moved.y.abs() > 0.01);
    }
}
