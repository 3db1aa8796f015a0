use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::metrics::{rmse, RmseSummary, TimingStats};
use super::scenario::Scenario;
use crate::ekf_baseline::{ekf_step, GaussianBelief, RawVisualHold};
use crate::error::{Error, Result};
use crate::factors::{
    contact_residual, contact_wrench, motion_residual, prior_residual, visual_residual, ContactObs, FactorKind,
    FactorModel,
};
use crate::geom2d::Pose2;
use crate::pushing_physics::{simulate_push, SimConfig, Trajectory};
use crate::sensor_sim::{
    render_tactile, render_visual, OcclusionSchedule, TactileSample, VisualSample, TACTILE_RATE, VISUAL_RATE,
};
use crate::smoother::SmootherWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Smoother,
    Ekf,
    Baseline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Smoother, Method::Ekf, Method::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Smoother => "smoother",
            Self::Ekf => "ekf",
            Self::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoother" => Ok(Self::Smoother),
            "ekf" => Ok(Self::Ekf),
            "baseline" => Ok(Self::Baseline),
            _ => Err(Error::InvalidInput(format!("unknown method '{s}'"))),
        }
    }
}

/// Ground-truth pose at one simulator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtSample {
    pub t: f64,
    pub pose: Pose2,
    pub n_contacts: usize,
}

/// Everything an estimator consumes, plus ground truth for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Streams {
    pub gt: Vec<GtSample>,
    pub visual: Vec<VisualSample>,
    pub tactile: Vec<TactileSample>,
}

impl Streams {
    pub fn from_trajectory(traj: &Trajectory, scenario: &Scenario, occlusion: &OcclusionSchedule) -> Result<Self> {
        let noise = scenario.noise.with_seed(scenario.seed);
        Ok(Self {
            gt: traj.steps.iter().map(|s| GtSample { t: s.t, pose: s.pose, n_contacts: s.num_contacts() }).collect(),
            visual: render_visual(traj, &noise, occlusion, VISUAL_RATE)?,
            tactile: render_tactile(traj, &noise, TACTILE_RATE)?,
        })
    }
}

/// Ground truth, schedule and sensor streams for a scenario.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub trajectory: Trajectory,
    pub occlusion: OcclusionSchedule,
    pub streams: Streams,
}

pub fn simulate_scenario(scenario: &Scenario) -> Result<Simulated> {
    scenario.validate()?;
    let shape = scenario.shape_model()?;
    let mut plan = scenario.plan();
    let config = SimConfig { dt: scenario.sim_dt, ..SimConfig::default() };
    let trajectory = simulate_push(&shape, &mut plan, scenario.initial_pose(), &config)?;
    let occlusion = scenario.occlusion_schedule(&trajectory)?;
    let streams = Streams::from_trajectory(&trajectory, scenario, &occlusion)?;
    Ok(Simulated { trajectory, occlusion, streams })
}

/// Inputs for one estimation tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub t: f64,
    pub gt: Pose2,
    pub tactile: TactileSample,
    /// Latest camera sample since the previous tick, if any.
    pub visual: Option<VisualSample>,
}

impl Tick {
    pub fn contacts(&self) -> Vec<ContactObs> {
        self.tactile.fingers.iter().filter(|f| f.contact).map(ContactObs::from).collect()
    }

    pub fn visual_available(&self) -> bool {
        self.visual.is_some_and(|v| v.available)
    }
}

fn latest_at<T>(items: &[T], time: impl Fn(&T) -> f64, t: f64) -> Option<usize> {
    let n = items.partition_point(|x| time(x) <= t + 1e-9);
    n.checked_sub(1)
}

/// Associates sensor samples with estimation ticks by timestamp floor.
pub fn make_ticks(streams: &Streams, tick_dt: f64) -> Result<Vec<Tick>> {
    let (Some(last), false) = (streams.gt.last(), streams.tactile.is_empty()) else {
        return Ok(Vec::new());
    };
    let n = (last.t / tick_dt + 1e-9).floor() as usize + 1;
    let mut prev_t = f64::NEG_INFINITY;
    (0..n)
        .map(|k| {
            let t = k as f64 * tick_dt;
            let gt = streams.gt
                [latest_at(&streams.gt, |g| g.t, t).ok_or(Error::InvalidInput("no ground truth".into()))?]
            .pose;
            let ti = latest_at(&streams.tactile, |s| s.t, t).ok_or(Error::InvalidInput("no tactile sample".into()))?;
            let visual =
                latest_at(&streams.visual, |s| s.t, t).map(|i| streams.visual[i]).filter(|v| v.t > prev_t + 1e-9);
            prev_t = t;
            Ok(Tick { t, gt, tactile: streams.tactile[ti].clone(), visual })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record per-step wall-clock times in the trajectory output.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodTrace {
    pub method: Method,
    pub estimates: Vec<Pose2>,
    /// Per-tick update time; zeros unless timing was requested.
    pub step_ms: Vec<f64>,
    pub summary: RmseSummary,
    pub timing: TimingStats,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub gt: Pose2,
    pub n_contacts: usize,
    pub visual_available: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub ticks: Vec<TickRecord>,
    pub traces: Vec<MethodTrace>,
}

impl RunReport {
    pub fn trace(&self, method: Method) -> Option<&MethodTrace> {
        self.traces.iter().find(|t| t.method == method)
    }

    pub fn summary(&self, method: Method) -> Option<RmseSummary> {
        self.trace(method).map(|t| t.summary)
    }
}

fn initial_guess(scenario: &Scenario, tick: &Tick) -> (Pose2, Matrix3<f64>, bool) {
    let cov = scenario.estimator.covariances.covariances();
    match tick.visual.filter(|v| v.available) {
        Some(v) => (v.pose, cov.visual, true),
        None => {
            let s = scenario.estimator.initial_sigma.map(|x| x * x);
            (scenario.initial_pose(), Matrix3::from_diagonal(&Vector3::from(s)), false)
        }
    }
}

fn timed<T>(timing: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = timing.then(Instant::now);
    let out = f()?;
    Ok((out, start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)))
}

fn run_method(
    scenario: &Scenario,
    model: &FactorModel,
    ticks: &[Tick],
    method: Method,
    opts: RunOptions,
) -> Result<MethodTrace> {
    let est_cfg = &scenario.estimator;
    let covs = est_cfg.covariances.covariances();
    let mut estimates = Vec::with_capacity(ticks.len());
    let mut step_ms = Vec::with_capacity(ticks.len());
    let Some(first) = ticks.first() else {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    };
    let (guess, guess_cov, _) = initial_guess(scenario, first);
    match method {
        Method::Smoother => {
            let mut w = SmootherWindow::new(model.clone(), covs, est_cfg.window, est_cfg.solver)?
                .with_initial_prior(guess, guess_cov);
            for tick in ticks {
                let (x, ms) = timed(opts.timing, || {
                    w.add_step(tick.t, &tick.tactile, tick.visual.as_ref())?;
                    w.update()
                })?;
                estimates.push(x);
                step_ms.push(ms);
            }
        }
        Method::Ekf => {
            let mut belief = GaussianBelief::new(guess, guess_cov)?;
            estimates.push(belief.mean);
            step_ms.push(0.0);
            for pair in ticks.windows(2) {
                let tick = &pair[1];
                let dt = tick.t - pair[0].t;
                let (out, ms) =
                    timed(opts.timing, || ekf_step(&belief, &tick.tactile, tick.visual.as_ref(), model, &covs, dt))?;
                belief = out.belief;
                estimates.push(belief.mean);
                step_ms.push(ms);
            }
        }
        Method::Baseline => {
            let mut hold = RawVisualHold::default();
            for tick in ticks {
                if let Some(v) = &tick.visual {
                    hold.observe(v);
                }
                estimates.push(hold.current().unwrap_or(guess));
                step_ms.push(0.0);
            }
        }
    }
    let gt: Vec<Pose2> = ticks.iter().map(|t| t.gt).collect();
    Ok(MethodTrace {
        method,
        summary: rmse(&estimates, &gt)?,
        timing: TimingStats::from_samples(&step_ms),
        estimates,
        step_ms,
    })
}

/// Drives each estimator over pre-rendered streams.
pub fn estimate_streams(
    scenario: &Scenario,
    streams: &Streams,
    methods: &[Method],
    opts: RunOptions,
) -> Result<RunReport> {
    let shape = scenario.shape_model()?;
    let model = FactorModel::new(&shape, scenario.pusher.radius);
    let ticks = make_ticks(streams, scenario.estimator.tick_dt)?;
    let traces = methods.iter().map(|&m| run_method(scenario, &model, &ticks, m, opts)).collect::<Result<Vec<_>>>()?;
    Ok(RunReport {
        name: scenario.name.clone(),
        seed: scenario.seed,
        ticks: ticks
            .iter()
            .map(|t| TickRecord {
                t: t.t,
                gt: t.gt,
                n_contacts: t.contacts().len(),
                visual_available: t.visual_available(),
            })
            .collect(),
        traces,
    })
}

/// Simulate, render sensors and run the selected estimators.
pub fn run_scenario(scenario: &Scenario, methods: &[Method], opts: RunOptions) -> Result<RunReport> {
    let sim = simulate_scenario(scenario)?;
    estimate_streams(scenario, &sim.streams, methods, opts)
}

/// One residual sample evaluated at ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub t: f64,
    pub kind: FactorKind,
    pub values: Vec<f64>,
}

/// Residuals of every cost term at the ground-truth poses, tick by tick.
pub fn ground_truth_residuals(scenario: &Scenario, streams: &Streams) -> Result<Vec<ResidualRecord>> {
    let shape = scenario.shape_model()?;
    let radius = scenario.pusher.radius;
    let ticks = make_ticks(streams, scenario.estimator.tick_dt)?;
    let mut out = Vec::new();
    for (k, tick) in ticks.iter().enumerate() {
        let push = |out: &mut Vec<ResidualRecord>, kind, values: Vec<f64>| {
            out.push(ResidualRecord { t: tick.t, kind, values })
        };
        if let Some(v) = tick.visual.filter(|v| v.available) {
            push(&mut out, FactorKind::Visual, visual_residual(&tick.gt, &v.pose).as_slice().to_vec());
        }
        let contacts = tick.contacts();
        for obs in &contacts {
            let r = contact_residual(&tick.gt, obs, &shape.polygon, radius)?;
            push(&mut out, FactorKind::Contact, r.as_slice().to_vec());
        }
        if k > 0 {
            let prev = &ticks[k - 1];
            push(&mut out, FactorKind::Prior, prior_residual(&tick.gt, &prev.gt).as_slice().to_vec());
            if !contacts.is_empty() {
                let w = contact_wrench(&tick.gt, &contacts, &shape.polygon);
                let r = motion_residual(&prev.gt, &tick.gt, &w, shape.c, tick.t - prev.t);
                push(&mut out, FactorKind::Motion, r.as_slice().to_vec());
            }
        }
    }
    Ok(out)
}

/// Identified covariance and normality diagnostics for one cost term.
#[derive(Debug, Clone, PartialEq)]
pub struct KindNoise {
    pub kind: FactorKind,
    pub samples: usize,
    pub covariance: nalgebra::DMatrix<f64>,
    pub axes: Vec<super::noise::AxisReport>,
}

impl KindNoise {
    pub fn sigmas(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// Groups ground-truth residuals by kind and identifies each covariance.
/// Kinds with too few samples are skipped.
pub fn characterize_noise(records: &[ResidualRecord], bins: usize) -> Result<Vec<KindNoise>> {
    let mut out = Vec::new();
    for kind in [FactorKind::Visual, FactorKind::Contact, FactorKind::Prior, FactorKind::Motion] {
        let samples: Vec<Vec<f64>> = records.iter().filter(|r| r.kind == kind).map(|r| r.values.clone()).collect();
        if samples.len() < super::noise::MIN_NORMALITY_SAMPLES {
            continue;
        }
        out.push(KindNoise {
            kind,
            samples: samples.len(),
            covariance: super::noise::identify_covariance(&samples)?,
            axes: super::noise::normality_report(&samples, bins)?,
        });
    }
    Ok(out)
}

/// Per-step smoother update times over the scenario's streams.
pub fn benchmark_smoother(scenario: &Scenario, streams: &Streams) -> Result<TimingStats> {
    let report = estimate_streams(scenario, streams, &[Method::Smoother], RunOptions { timing: true })?;
    Ok(report.traces[0].timing)
}
