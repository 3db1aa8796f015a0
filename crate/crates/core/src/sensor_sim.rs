//! Synthetic camera and tactile streams rendered from a ground-truth trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{wrap, Point2, Pose2};
use crate::pushing_physics::Trajectory;

pub const VISUAL_RATE: f64 = 30.0;
pub const TACTILE_RATE: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualSample {
    pub t: f64,
    /// Meaningless when `available` is false.
    pub pose: Pose2,
    pub available: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerReading {
    /// Sensed force of the object on the finger, world frame.
    pub force: Point2,
    /// Sensed finger center, world frame.
    pub position: Point2,
    pub contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TactileSample {
    pub t: f64,
    pub fingers: Vec<FingerReading>,
}

impl TactileSample {
    pub fn any_contact(&self) -> bool {
        self.fingers.iter().any(|f| f.contact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-axis visual noise: x (m), y (m), theta (rad).
    pub visual_sigma: [f64; 3],
    /// Constant offset added to every visual pose, emulating calibration error.
    pub visual_bias: [f64; 3],
    pub force_sigma: f64,
    pub finger_pos_sigma: f64,
    /// Contact threshold on the sensed force magnitude, newtons.
    pub tau: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            visual_sigma: [0.01, 0.01, 3f64.to_radians()],
            visual_bias: [0.006, 0.008, 0.0],
            force_sigma: 0.005,
            finger_pos_sigma: 0.0005,
            tau: 0.05,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// No noise, no bias; `tau` keeps its default.
    pub fn zero() -> Self {
        Self {
            visual_sigma: [0.0; 3],
            visual_bias: [0.0; 3],
            force_sigma: 0.0,
            finger_pos_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = self.visual_sigma.iter().chain([&self.force_sigma, &self.finger_pos_sigma]);
        for s in sigmas {
            if !(*s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("noise sigma {s}")));
            }
        }
        if self.visual_bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("visual bias"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidInput(format!("tau = {}", self.tau)));
        }
        Ok(())
    }
}

/// Sorted, non-overlapping `[start, end)` intervals during which the camera sees nothing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct OcclusionSchedule {
    intervals: Vec<(f64, f64)>,
}

impl OcclusionSchedule {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if a.is_nan() || b.is_nan() || a >= b {
                return Err(Error::InvalidInput(format!("occlusion interval [{a}, {b})")));
            }
            if i > 0 && intervals[i - 1].1 > a {
                return Err(Error::InvalidInput(format!("occlusion intervals overlap or are unsorted at [{a}, {b})")));
            }
        }
        Ok(Self { intervals })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_occluded(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| t >= a && t < b)
    }

    /// Occluded time inside `[0, horizon)`.
    pub fn occluded_time(&self, horizon: f64) -> f64 {
        self.intervals.iter().map(|&(a, b)| (b.min(horizon) - a.max(0.0)).max(0.0)).sum()
    }
}

impl TryFrom<Vec<(f64, f64)>> for OcclusionSchedule {
    type Error = Error;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OcclusionSchedule> for Vec<(f64, f64)> {
    fn from(o: OcclusionSchedule) -> Self {
        o.intervals
    }
}

/// Index of the latest trajectory step at or before `t`.
pub fn step_at(traj: &Trajectory, t: f64) -> usize {
    let k = (t / traj.dt + 1e-9).floor().max(0.0) as usize;
    k.min(traj.steps.len().saturating_sub(1))
}

fn sample_times(traj: &Trajectory, rate: f64) -> Result<Vec<f64>> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidInput(format!("sample rate {rate}")));
    }
    let Some(last) = traj.steps.last() else { return Ok(Vec::new()) };
    let n = (last.t * rate + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| k as f64 / rate).collect())
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated non-negative")
}

/// Camera stream: biased, noisy ground-truth poses with scripted dropouts.
pub fn render_visual(
    traj: &Trajectory,
    noise: &NoiseSpec,
    occlusion: &OcclusionSchedule,
    rate: f64,
) -> Result<Vec<VisualSample>> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(1);
    let dists = noise.visual_sigma.map(gaussian);
    let b = noise.visual_bias;
    sample_times(traj, rate)?
        .into_iter()
        .map(|t| {
            let gt = traj.steps[step_at(traj, t)].pose;
            // draw even when occluded so the noise sequence does not depend on the schedule
            let e = dists.map(|d| d.sample(&mut rng));
            let pose = Pose2 { x: gt.x + b[0] + e[0], y: gt.y + b[1] + e[1], theta: wrap(gt.theta + b[2] + e[2]) };
            Ok(VisualSample { t, pose, available: !occlusion.is_occluded(t) })
        })
        .collect()
}

/// Tactile stream: noisy finger forces and positions, contact by force threshold.
pub fn render_tactile(traj: &Trajectory, noise: &NoiseSpec, rate: f64) -> Result<Vec<TactileSample>> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(2);
    let df = gaussian(noise.force_sigma);
    let dp = gaussian(noise.finger_pos_sigma);
    sample_times(traj, rate)?
        .into_iter()
        .map(|t| {
            let step = &traj.steps[step_at(traj, t)];
            let fingers = step
                .fingers
                .iter()
                .map(|f| {
                    let force = f.force + Point2::new(df.sample(&mut rng), df.sample(&mut rng));
                    let position = f.center + Point2::new(dp.sample(&mut rng), dp.sample(&mut rng));
                    FingerReading { force, position, contact: force.norm() >= noise.tau }
                })
                .collect();
            Ok(TactileSample { t, fingers })
        })
        .collect()
}
