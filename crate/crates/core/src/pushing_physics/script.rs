use serde::{Deserialize, Serialize};

use super::sim::Pusher;
use crate::error::{Error, Result};
use crate::geom2d::{perp, Point2, Polygon, Pose2};

/// Finger centers at one simulator step.
#[derive(Debug, Clone, PartialEq)]
pub struct PusherFrame {
    pub centers: Vec<Point2>,
    /// The move from the previous frame is a lift-and-place: no contact, no speed limit.
    pub lifted: bool,
    /// Part of a forward push stroke (approach or push).
    pub stroke: bool,
}

/// Explicit time-indexed pusher trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PusherScript {
    pub radius: f64,
    pub frames: Vec<PusherFrame>,
}

impl PusherScript {
    /// Straight constant-velocity motion of rigidly attached fingers.
    pub fn straight(radius: f64, starts: &[Point2], velocity: Point2, dt: f64, steps: usize) -> Self {
        let frames = (0..steps)
            .map(|k| PusherFrame {
                centers: starts.iter().map(|s| s + velocity * (k as f64 * dt)).collect(),
                lifted: false,
                stroke: velocity.norm() > 0.0,
            })
            .collect();
        Self { radius, frames }
    }
}

impl Pusher for PusherScript {
    fn radius(&self) -> f64 {
        self.radius
    }

    fn num_fingers(&self) -> usize {
        self.frames.first().map_or(0, |f| f.centers.len())
    }

    fn num_steps(&self) -> usize {
        self.frames.len()
    }

    fn frame(&mut self, k: usize, _pose: &Pose2, _poly: &Polygon) -> Result<PusherFrame> {
        self.frames.get(k).cloned().ok_or_else(|| Error::InvalidInput(format!("script has no frame {k}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerLayout {
    /// Fingers side by side across the push direction.
    Side,
    /// Fingers in line with the push direction; only the leading one touches.
    Inline,
}

/// One push relative to the object pose at the moment the stroke begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushStroke {
    /// Travel direction in the object frame, radians.
    pub direction: f64,
    /// Lateral offset of the gripper center from the line through the centroid, meters.
    #[serde(default)]
    pub offset: f64,
    pub layout: FingerLayout,
    /// Travel after first contact, meters.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Hold { duration: f64 },
    Push(PushStroke),
}

/// Pose-relative push procedure compiled to finger positions as the simulation runs.
#[derive(Debug, Clone)]
pub struct PushPlan {
    pub radius: f64,
    /// Distance between the two finger centers.
    pub separation: f64,
    pub speed: f64,
    pub dt: f64,
    /// Free travel before contact.
    pub standoff: f64,
    /// Pause after each stroke before retracting.
    pub dwell: f64,
    pub retract: f64,
    /// Where the fingers wait before the first stroke (world frame).
    pub park: [Point2; 2],
    segments: Vec<Segment>,
    total_steps: usize,
    queue: std::collections::VecDeque<PusherFrame>,
    next_segment: usize,
    last: Option<PusherFrame>,
}

impl PushPlan {
    pub fn new(segments: Vec<Segment>, radius: f64, separation: f64, speed: f64, dt: f64) -> Self {
        let mut plan = Self {
            radius,
            separation,
            speed,
            dt,
            standoff: 0.005,
            dwell: 0.1,
            retract: 0.02,
            park: [Point2::new(0.3, 0.3), Point2::new(0.3, 0.3 + separation)],
            segments,
            total_steps: 0,
            queue: Default::default(),
            next_segment: 0,
            last: None,
        };
        plan.total_steps = plan.count_steps();
        plan
    }

    pub fn with_timing(mut self, standoff: f64, dwell: f64, retract: f64) -> Self {
        self.standoff = standoff;
        self.dwell = dwell;
        self.retract = retract;
        self.total_steps = self.count_steps();
        self
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn steps_for(&self, length: f64) -> usize {
        (length / (self.speed * self.dt)).round() as usize
    }

    fn standoff_steps(&self) -> usize {
        ((self.standoff / (self.speed * self.dt)) - 1e-9).ceil().max(1.0) as usize
    }

    fn count_steps(&self) -> usize {
        let mut n = 0;
        for (i, seg) in self.segments.iter().enumerate() {
            n += match seg {
                Segment::Hold { duration } => {
                    let k = (duration / self.dt).round() as usize;
                    if i == 0 {
                        k.max(1)
                    } else {
                        k
                    }
                }
                Segment::Push(s) => self.stroke_len(s),
            };
        }
        n
    }

    fn stroke_len(&self, s: &PushStroke) -> usize {
        1 + self.standoff_steps()
            + self.steps_for(s.distance)
            + (self.dwell / self.dt).round() as usize
            + self.steps_for(self.retract)
    }

    fn finger_offsets(&self, layout: FingerLayout, d: &Point2) -> [Point2; 2] {
        match layout {
            FingerLayout::Side => {
                let lat = perp(d) * (self.separation / 2.0);
                [-lat, lat]
            }
            FingerLayout::Inline => [Point2::zeros(), -d * self.separation],
        }
    }

    fn compile(&mut self, seg: &Segment, pose: &Pose2, poly: &Polygon, first: bool) -> Result<()> {
        match seg {
            Segment::Hold { duration } => {
                let mut k = (duration / self.dt).round() as usize;
                if first {
                    k = k.max(1);
                }
                let hold = self.last.clone().map_or_else(
                    || PusherFrame { centers: self.park.to_vec(), lifted: false, stroke: false },
                    |f| PusherFrame { lifted: false, stroke: false, ..f },
                );
                self.queue.extend(std::iter::repeat_n(hold, k));
            }
            Segment::Push(s) => {
                let d = Point2::new(s.direction.cos(), s.direction.sin());
                let offsets = self.finger_offsets(s.layout, &d);
                // far start in the object frame, then slide up to the standoff
                let far = -d * 1.0 + perp(&d) * s.offset;
                let hit = offsets
                    .iter()
                    .filter_map(|o| ray_contact(poly, &(far + o), &d, self.radius))
                    .fold(f64::INFINITY, f64::min);
                if !hit.is_finite() {
                    return Err(Error::InvalidInput(format!("push stroke {s:?} never touches the object")));
                }
                let n_stand = self.standoff_steps();
                let step = self.speed * self.dt;
                let start = far + d * (hit - n_stand as f64 * step);
                let rot = pose.rotation();
                let d_w = rot * d;
                let starts: Vec<Point2> = offsets.iter().map(|o| pose.transform_point(&(start + o))).collect();
                let at = |j: f64, lifted: bool, stroke: bool| PusherFrame {
                    centers: starts.iter().map(|c| c + d_w * (j * step)).collect(),
                    lifted,
                    stroke,
                };
                let n_push = self.steps_for(s.distance);
                let n_fwd = n_stand + n_push;
                self.queue.push_back(at(0.0, !first, true));
                for j in 1..=n_fwd {
                    self.queue.push_back(at(j as f64, false, true));
                }
                let n_dwell = (self.dwell / self.dt).round() as usize;
                for _ in 0..n_dwell {
                    self.queue.push_back(at(n_fwd as f64, false, false));
                }
                for j in 1..=self.steps_for(self.retract) {
                    self.queue.push_back(at(n_fwd as f64 - j as f64, false, false));
                }
            }
        }
        Ok(())
    }
}

impl Pusher for PushPlan {
    fn radius(&self) -> f64 {
        self.radius
    }

    fn num_fingers(&self) -> usize {
        2
    }

    fn num_steps(&self) -> usize {
        self.total_steps
    }

    fn frame(&mut self, k: usize, pose: &Pose2, poly: &Polygon) -> Result<PusherFrame> {
        while self.queue.is_empty() {
            let Some(seg) = self.segments.get(self.next_segment).cloned() else {
                return Err(Error::InvalidInput(format!("push plan has no frame {k}")));
            };
            let first = self.next_segment == 0;
            self.next_segment += 1;
            self.compile(&seg, pose, poly, first)?;
        }
        let f = self.queue.pop_front().expect("queue is non-empty");
        self.last = Some(f.clone());
        Ok(f)
    }
}

/// Travel along `dir` from `from` until a disk of `radius` first touches `poly` (object frame).
pub(crate) fn ray_contact(poly: &Polygon, from: &Point2, dir: &Point2, radius: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    for i in 0..poly.len() {
        let (a, b) = poly.edge(i);
        let n = poly.edge_normal(i);
        let nd = n.dot(dir);
        if nd < -1e-12 {
            let s = (radius - n.dot(&(from - a))) / nd;
            if s >= 0.0 {
                let x = from + dir * s;
                let e = b - a;
                let u = (x - a).dot(&e) / e.norm_squared();
                if (0.0..=1.0).contains(&u) && s < best {
                    best = s;
                }
            }
        }
        // vertex disk
        let w = from - a;
        let bq = w.dot(dir);
        let cq = w.norm_squared() - radius * radius;
        let disc = bq * bq - cq;
        if disc >= 0.0 {
            let s = -bq - disc.sqrt();
            if s >= 0.0 && s < best {
                best = s;
            }
        }
    }
    best.is_finite().then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pushing_physics::shapes;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ray_hits_face_and_corner() {
        let sq = shapes::rect1();
        let r = 0.003125;
        let s = ray_contact(&sq, &Point2::new(-0.2, 0.0), &Point2::new(1.0, 0.0), r).unwrap();
        assert_abs_diff_eq!(s, 0.2 - 0.045 - r, epsilon = 1e-15);
        // straight at the corner along the diagonal
        let d = Point2::new(1.0, 1.0).normalize();
        let s = ray_contact(&sq, &Point2::new(-0.2, -0.2), &d, r).unwrap();
        assert_abs_diff_eq!(s, (0.2 - 0.045) * 2f64.sqrt() - r, epsilon = 1e-12);
        assert!(ray_contact(&sq, &Point2::new(-0.2, 0.2), &Point2::new(1.0, 0.0), r).is_none());
    }

    #[test]
    fn plan_step_count_matches_frames() {
        let segs = vec![
            Segment::Hold { duration: 0.1 },
            Segment::Push(PushStroke { direction: 0.0, offset: 0.0, layout: FingerLayout::Side, distance: 0.01 }),
            Segment::Hold { duration: 0.05 },
        ];
        let mut plan = PushPlan::new(segs, 0.003125, 0.04, 0.06, 0.002);
        let n = plan.num_steps();
        let poly = shapes::rect1();
        let pose = Pose2::identity();
        for k in 0..n {
            plan.frame(k, &pose, &poly).unwrap();
        }
        assert!(plan.frame(n, &pose, &poly).is_err());
    }
}
