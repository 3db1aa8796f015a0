use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{Covariances, FactorKind};
use crate::geom2d::Pose2;
use crate::pushing_physics::{shapes, FingerLayout, PushPlan, PushStroke, Segment, ShapeModel, Trajectory};
use crate::sensor_sim::{NoiseSpec, OcclusionSchedule};
use crate::smoother::{SolverConfig, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PusherConfig {
    pub radius: f64,
    /// Distance between finger centers.
    pub separation: f64,
    pub speed: f64,
    pub standoff: f64,
    pub dwell: f64,
    pub retract: f64,
}

impl Default for PusherConfig {
    fn default() -> Self {
        Self { radius: 0.003125, separation: 0.04, speed: 0.06, standoff: 0.005, dwell: 0.1, retract: 0.02 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    /// Fraction of the run hidden from the camera, spread over the push strokes.
    pub fraction: Option<f64>,
    /// Explicit `[start, end)` intervals, seconds; used when `fraction` is absent.
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceConfig {
    pub visual_sigma: [f64; 3],
    pub contact_sigma: [f64; 2],
    pub prior_sigma: [f64; 3],
    pub motion_sigma: [f64; 3],
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        let c = Covariances::default();
        let s3 = |m: nalgebra::Matrix3<f64>| [0, 1, 2].map(|i| m[(i, i)].sqrt());
        Self {
            visual_sigma: s3(c.visual),
            contact_sigma: [c.contact[(0, 0)].sqrt(), c.contact[(1, 1)].sqrt()],
            prior_sigma: s3(c.prior),
            motion_sigma: s3(c.motion),
        }
    }
}

impl CovarianceConfig {
    pub fn covariances(&self) -> Covariances {
        Covariances::from_sigmas(self.visual_sigma, self.contact_sigma, self.prior_sigma, self.motion_sigma)
    }

    /// Replaces the sigmas of each identified kind with the square roots of
    /// its covariance diagonal; the off-diagonal terms are dropped.
    pub fn with_identified(mut self, kinds: &[super::KindNoise]) -> Self {
        for k in kinds {
            let s = k.sigmas();
            match k.kind {
                FactorKind::Visual => self.visual_sigma = [s[0], s[1], s[2]],
                FactorKind::Contact => self.contact_sigma = [s[0], s[1]],
                FactorKind::Prior => self.prior_sigma = [s[0], s[1], s[2]],
                FactorKind::Motion => self.motion_sigma = [s[0], s[1], s[2]],
                FactorKind::Anchor => {}
            }
        }
        self
    }

    /// A scenario-file fragment setting these sigmas.
    pub fn to_toml_fragment(&self) -> Result<String> {
        let body = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        Ok(format!("[estimator.covariances]\n{body}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Estimation tick, seconds.
    pub tick_dt: f64,
    pub window: WindowConfig,
    pub solver: SolverConfig,
    pub covariances: CovarianceConfig,
    /// Per-axis sigma of the prior placed on the first node when the camera
    /// is blind at the first tick; centered on the initial pose guess.
    pub initial_sigma: [f64; 3],
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            tick_dt: 0.01,
            window: WindowConfig::default(),
            solver: SolverConfig::default(),
            covariances: CovarianceConfig::default(),
            initial_sigma: [0.02, 0.02, 10f64.to_radians()],
        }
    }
}

/// Named push procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptName {
    /// Side, corner and single-finger pushes in all four directions, repeated.
    Standard,
    /// One long straight two-finger push.
    LongPush,
    /// Use the `segments` list.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// `rect1`, `ellip2` or `butter`.
    pub shape: String,
    /// Defaults to the shape's nominal mass.
    pub mass: Option<f64>,
    pub mu_surface: f64,
    pub mu_pusher: f64,
    pub sim_dt: f64,
    pub initial_pose: [f64; 3],
    pub script: ScriptName,
    /// Repetitions of the standard procedure.
    pub repeats: usize,
    /// Length of each push in the long-push script, meters.
    pub push_distance: f64,
    /// Hold at the end so estimates settle with the camera unobstructed.
    pub final_hold: f64,
    pub segments: Vec<Segment>,
    pub pusher: PusherConfig,
    /// `seed` here is ignored; the scenario seed drives the noise.
    pub noise: NoiseSpec,
    pub occlusion: OcclusionConfig,
    pub estimator: EstimatorConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "standard".into(),
            seed: 0,
            shape: "rect1".into(),
            mass: None,
            mu_surface: 0.28,
            mu_pusher: 0.25,
            sim_dt: 0.002,
            initial_pose: [0.0; 3],
            script: ScriptName::Standard,
            repeats: 3,
            push_distance: 0.6,
            final_hold: 6.0,
            segments: Vec::new(),
            pusher: PusherConfig::default(),
            noise: NoiseSpec::default(),
            occlusion: OcclusionConfig { fraction: Some(0.3), intervals: Vec::new() },
            estimator: EstimatorConfig::default(),
        }
    }
}

impl Scenario {
    /// The default pushing procedure with default noise and 30% occlusion.
    pub fn standard(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    /// The standard procedure with noiseless sensors and an unobstructed camera.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            name: "noiseless".into(),
            seed,
            noise: NoiseSpec::zero(),
            occlusion: OcclusionConfig::default(),
            ..Self::default()
        }
    }

    /// A single long two-finger push with the camera blind for `occluded`
    /// seconds starting shortly after contact.
    pub fn long_occlusion(seed: u64, occluded: f64) -> Self {
        let mut s = Self {
            name: "long_occlusion".into(),
            seed,
            script: ScriptName::LongPush,
            final_hold: 0.5,
            ..Self::default()
        };
        s.push_distance = s.pusher.speed * (occluded + 0.5);
        let contact = s.long_push_contact_time();
        s.occlusion = OcclusionConfig { fraction: None, intervals: vec![(contact + 0.25, contact + 0.25 + occluded)] };
        s
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.shape_model()?;
        self.noise.validate()?;
        self.estimator.window.validate()?;
        if !(self.sim_dt > 0.0) {
            return Err(Error::Config(format!("sim_dt = {}", self.sim_dt)));
        }
        let ratio = self.estimator.tick_dt / self.sim_dt;
        if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(Error::Config("tick_dt must be a whole multiple of sim_dt".into()));
        }
        if let Some(f) = self.occlusion.fraction {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("occlusion fraction {f}")));
            }
        } else {
            OcclusionSchedule::new(self.occlusion.intervals.clone())?;
        }
        if self.script == ScriptName::Custom && self.segments.is_empty() {
            return Err(Error::Config("custom script needs segments".into()));
        }
        Ok(())
    }

    pub fn shape_model(&self) -> Result<ShapeModel> {
        let poly =
            shapes::by_name(&self.shape).ok_or_else(|| Error::Config(format!("unknown shape '{}'", self.shape)))?;
        let mass = self.mass.or_else(|| shapes::mass_of(&self.shape)).unwrap_or(1.0);
        ShapeModel::new(poly, self.mu_pusher, self.mu_surface, mass)
    }

    pub fn initial_pose(&self) -> Pose2 {
        let [x, y, t] = self.initial_pose;
        Pose2::new(x, y, t)
    }

    /// The segment list the simulator executes.
    pub fn expanded_segments(&self) -> Vec<Segment> {
        let push = |direction: f64, offset: f64, layout, distance| {
            Segment::Push(PushStroke { direction, offset, layout, distance })
        };
        match self.script {
            ScriptName::Custom => self.segments.clone(),
            ScriptName::LongPush => vec![
                Segment::Hold { duration: 1.0 },
                push(0.0, 0.0, FingerLayout::Side, self.push_distance),
                Segment::Hold { duration: self.final_hold },
            ],
            ScriptName::Standard => {
                let side = FingerLayout::Side;
                let one = FingerLayout::Inline;
                let mut segs = vec![Segment::Hold { duration: 1.0 }];
                for _ in 0..self.repeats {
                    segs.extend([
                        push(0.0, 0.0, side, 0.08),
                        push(FRAC_PI_2, 0.0, side, 0.08),
                        push(PI, 0.0, side, 0.08),
                        push(-FRAC_PI_2, 0.0, side, 0.08),
                        push(FRAC_PI_4, 0.008, side, 0.06),
                        push(PI + FRAC_PI_4, -0.008, side, 0.06),
                        push(0.0, 0.02, one, 0.05),
                        push(PI, -0.02, one, 0.05),
                        Segment::Hold { duration: 0.3 },
                    ]);
                }
                segs.push(Segment::Hold { duration: self.final_hold });
                segs
            }
        }
    }

    pub fn plan(&self) -> PushPlan {
        let p = &self.pusher;
        let mut plan = PushPlan::new(self.expanded_segments(), p.radius, p.separation, p.speed, self.sim_dt)
            .with_timing(p.standoff, p.dwell, p.retract);
        let start = self.initial_pose();
        plan.park = [
            start.transform_point(&crate::geom2d::Point2::new(0.0, 0.15)),
            start.transform_point(&crate::geom2d::Point2::new(p.separation, 0.15)),
        ];
        plan
    }

    fn long_push_contact_time(&self) -> f64 {
        // the lift frame ends the first hold, then the standoff travel
        let steps = (self.pusher.standoff / (self.pusher.speed * self.sim_dt) - 1e-9).ceil().max(1.0);
        1.0 + self.sim_dt * steps
    }

    /// Camera dropouts for a simulated trajectory.
    pub fn occlusion_schedule(&self, traj: &Trajectory) -> Result<OcclusionSchedule> {
        match self.occlusion.fraction {
            None => OcclusionSchedule::new(self.occlusion.intervals.clone()),
            Some(f) => Ok(spread_over_strokes(traj, f)),
        }
    }
}

/// Hides `fraction` of the run, as windows centered on each forward stroke in
/// proportion to the stroke's length.
pub fn spread_over_strokes(traj: &Trajectory, fraction: f64) -> OcclusionSchedule {
    let mut strokes: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = None;
    for s in &traj.steps {
        match (s.stroke, start) {
            (true, None) => start = Some(s.t),
            (false, Some(a)) => {
                strokes.push((a, s.t));
                start = None;
            }
            _ => {}
        }
    }
    if let (Some(a), Some(last)) = (start, traj.steps.last()) {
        strokes.push((a, last.t));
    }
    let total: f64 = strokes.iter().map(|(a, b)| b - a).sum();
    let horizon = traj.steps.last().map_or(0.0, |s| s.t);
    if total <= 0.0 || fraction <= 0.0 {
        return OcclusionSchedule::none();
    }
    let scale = (fraction * horizon / total).min(1.0);
    let intervals = strokes
        .iter()
        .map(|&(a, b)| {
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a) * scale;
            (mid - half, mid + half)
        })
        .filter(|(a, b)| b > a)
        .collect();
    OcclusionSchedule::new(intervals).expect("stroke windows are disjoint and ordered")
}
