//! Sliding-window Gauss-Newton smoother over the pose chain.
//!
//! Each estimation step adds one pose node with its stationary prior and any
//! visual, contact and motion terms. Motion and prior terms only couple
//! consecutive nodes, so the normal equations are block tridiagonal.

mod linear;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{ContactObs, Covariances, Factor, FactorKind, FactorModel, Measurement};
use crate::geom2d::Pose2;
use crate::sensor_sim::{TactileSample, VisualSample};
use linear::BlockTridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub window_len: usize,
    pub trim_at: usize,
    pub trim_count: usize,
    pub relin_every: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { window_len: 200, trim_at: 300, trim_count: 100, relin_every: 100 }
    }
}

impl WindowConfig {
    /// Window of `len` nodes trimmed in chunks of `trim_count`.
    pub fn with_len(len: usize, trim_count: usize, relin_every: usize) -> Self {
        Self { window_len: len, trim_at: len + trim_count, trim_count, relin_every }
    }

    /// Keeps every node.
    pub fn no_trim(relin_every: usize) -> Self {
        Self { window_len: usize::MAX - relin_every, trim_at: usize::MAX, trim_count: relin_every, relin_every }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trim_count == 0 || self.relin_every == 0 || self.window_len == 0 {
            return Err(Error::Config(format!("window sizes must be positive: {self:?}")));
        }
        if self.window_len.checked_add(self.trim_count) != Some(self.trim_at) {
            return Err(Error::Config(format!("trim_at must equal window_len + trim_count: {self:?}")));
        }
        if !self.trim_count.is_multiple_of(self.relin_every) {
            return Err(Error::Config(format!("relin_every must divide trim_count: {self:?}")));
        }
        Ok(())
    }
}

/// Smallest damping tried after a rejected undamped step.
const LAMBDA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters_per_update: usize,
    pub step_tolerance: f64,
    /// Initial Levenberg damping; zero means plain Gauss-Newton.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters_per_update: 3, step_tolerance: 1e-9, damping: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub iterations: usize,
    pub cost: f64,
    pub relinearized: bool,
    /// Iterations whose step was rejected even after damping.
    pub rejected: usize,
}

#[derive(Debug, Clone)]
struct Entry {
    factor: Factor,
    jac: [Matrix3<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct SmootherWindow {
    pub window: WindowConfig,
    pub solver: SolverConfig,
    pub covariances: Covariances,
    model: FactorModel,
    times: Vec<f64>,
    states: Vec<Pose2>,
    entries: Vec<Entry>,
    steps: usize,
    relin_pending: bool,
    initial_prior: Option<(Pose2, Matrix3<f64>)>,
    last_stats: UpdateStats,
}

impl SmootherWindow {
    pub fn new(
        model: FactorModel,
        covariances: Covariances,
        window: WindowConfig,
        solver: SolverConfig,
    ) -> Result<Self> {
        window.validate()?;
        if solver.max_iters_per_update == 0 {
            return Err(Error::Config("max_iters_per_update must be at least 1".into()));
        }
        Ok(Self {
            window,
            solver,
            covariances,
            model,
            times: Vec::new(),
            states: Vec::new(),
            entries: Vec::new(),
            steps: 0,
            relin_pending: false,
            initial_prior: None,
            last_stats: UpdateStats::default(),
        })
    }

    /// Prior used for the first node when no visual sample is available then.
    pub fn with_initial_prior(mut self, pose: Pose2, covariance: Matrix3<f64>) -> Self {
        self.initial_prior = Some((pose, covariance));
        self
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn num_nodes(&self) -> usize {
        self.states.len()
    }

    pub fn estimates(&self) -> &[Pose2] {
        &self.states
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn latest(&self) -> Option<Pose2> {
        self.states.last().copied()
    }

    pub fn factors(&self) -> impl Iterator<Item = &Factor> {
        self.entries.iter().map(|e| &e.factor)
    }

    pub fn count_factors(&self, kind: FactorKind) -> usize {
        self.factors().filter(|f| f.kind() == kind).count()
    }

    pub fn last_stats(&self) -> UpdateStats {
        self.last_stats
    }

    /// Steps added since construction.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn push_factor(&mut self, measurement: Measurement, nodes: &[usize], cov: nalgebra::DMatrix<f64>) -> Result<()> {
        let factor = Factor::new(measurement, nodes, cov)?;
        let xs: Vec<Pose2> = factor.nodes().iter().map(|&n| self.states[n]).collect();
        let jac = factor.jacobians(&self.model, &xs);
        self.entries.push(Entry { factor, jac });
        Ok(())
    }

    /// Inserts the node for time `t` with its measurements, trimming when the window is full.
    pub fn add_step(&mut self, t: f64, tactile: &TactileSample, visual: Option<&VisualSample>) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("step time"));
        }
        let visual = visual.filter(|v| v.available);
        let prev = self.states.len().checked_sub(1);
        let init = match (prev, visual, self.initial_prior) {
            (Some(p), _, _) => {
                let last = self.times[p];
                if t <= last {
                    return Err(Error::OutOfOrder { t, last });
                }
                self.states[p]
            }
            (None, Some(v), _) => v.pose,
            (None, None, Some((pose, _))) => pose,
            (None, None, None) => return Err(Error::NoVisualYet(t)),
        };
        let k = self.states.len();
        self.states.push(init);
        self.times.push(t);
        self.steps += 1;
        let covs = self.covariances;

        if let Some(p) = prev {
            self.push_factor(Measurement::Prior, &[k, p], covs.for_kind(FactorKind::Prior))?;
        } else if visual.is_none() {
            let (pose, cov) = self.initial_prior.expect("checked above");
            let cov = nalgebra::DMatrix::from_iterator(3, 3, cov.iter().copied());
            self.push_factor(Measurement::Anchor(pose), &[k], cov)?;
        }
        if let Some(v) = visual {
            self.push_factor(Measurement::Visual(v.pose), &[k], covs.for_kind(FactorKind::Visual))?;
        }
        let contacts: Vec<ContactObs> = tactile.fingers.iter().filter(|f| f.contact).map(ContactObs::from).collect();
        for obs in &contacts {
            self.push_factor(Measurement::Contact(*obs), &[k], covs.for_kind(FactorKind::Contact))?;
        }
        if let (Some(p), false) = (prev, contacts.is_empty()) {
            let dt = t - self.times[p];
            self.push_factor(Measurement::Motion { contacts, dt }, &[p, k], covs.for_kind(FactorKind::Motion))?;
        }
        if self.states.len() >= self.window.trim_at {
            self.trim(self.window.trim_count)?;
        }
        Ok(())
    }

    /// Drops the oldest `count` nodes and anchors the oldest survivor at its estimate.
    pub fn trim(&mut self, count: usize) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        if count >= self.states.len() {
            return Err(Error::InvalidInput(format!("cannot trim {count} of {} nodes", self.states.len())));
        }
        self.entries.retain(|e| e.factor.nodes().iter().all(|&n| n >= count));
        for e in &mut self.entries {
            e.factor.shift_nodes(count);
        }
        self.states.drain(..count);
        self.times.drain(..count);
        let anchor = self.states[0];
        self.push_factor(Measurement::Anchor(anchor), &[0], self.covariances.for_kind(FactorKind::Anchor))?;
        self.relin_pending = true;
        Ok(())
    }

    fn node_poses(&self, f: &Factor, states: &[Pose2]) -> [Pose2; 2] {
        let n = f.nodes();
        [states[n[0]], states[*n.get(1).unwrap_or(&n[0])]]
    }

    /// Total weighted cost of the window at `states`.
    pub fn cost_at(&self, states: &[Pose2]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let xs = self.node_poses(&e.factor, states);
                e.factor.cost(&self.model, &xs[..e.factor.nodes().len()])
            })
            .sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.cost_at(&self.states)
    }

    fn relinearize(&mut self) {
        let model = &self.model;
        for e in &mut self.entries {
            let n = e.factor.nodes();
            let xs: Vec<Pose2> = n.iter().map(|&i| self.states[i]).collect();
            e.jac = e.factor.jacobians(model, &xs);
        }
    }

    fn build_system(&self) -> BlockTridiagonal {
        let mut sys = BlockTridiagonal::zeros(self.states.len());
        for e in &self.entries {
            let f = &e.factor;
            let n = f.nodes();
            let xs = self.node_poses(f, &self.states);
            let w = f.sqrt_info();
            let r = w * f.residual(&self.model, &xs[..n.len()]);
            let ja = w * e.jac[0];
            sys.diag[n[0]] += ja.transpose() * ja;
            sys.rhs[n[0]] -= ja.transpose() * r;
            if n.len() == 2 {
                let jb = w * e.jac[1];
                sys.diag[n[1]] += jb.transpose() * jb;
                sys.rhs[n[1]] -= jb.transpose() * r;
                let cross = ja.transpose() * jb;
                match n[1].cmp(&n[0]) {
                    std::cmp::Ordering::Greater => sys.upper[n[0]] += cross,
                    std::cmp::Ordering::Less => sys.upper[n[1]] += cross.transpose(),
                    std::cmp::Ordering::Equal => unreachable!("factor links a node to itself"),
                }
            }
        }
        sys
    }

    fn apply(&self, delta: &[Vector3<f64>]) -> Vec<Pose2> {
        self.states.iter().zip(delta).map(|(x, d)| x.retract(d)).collect()
    }

    /// One damped Gauss-Newton iteration; returns the accepted step norm, or
    /// `None` when every damping level increased the cost.
    fn iterate(&mut self, cost: &mut f64) -> Result<Option<f64>> {
        Ok(self.iterate_damped(cost, self.solver.damping, 3)?.map(|(norm, _)| norm))
    }

    /// Tries `lambda`, then grows it tenfold up to `retries` times. Returns
    /// the accepted step norm and the damping that produced it.
    fn iterate_damped(&mut self, cost: &mut f64, lambda: f64, retries: usize) -> Result<Option<(f64, f64)>> {
        let sys = self.build_system();
        let mut lambda = lambda;
        for _ in 0..=retries {
            let mut damped = sys.clone();
            if lambda > 0.0 {
                damped.damp(lambda);
            }
            let delta = damped.solve()?;
            let candidate = self.apply(&delta);
            let new_cost = self.cost_at(&candidate);
            if new_cost <= *cost {
                let norm = delta.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
                self.states = candidate;
                *cost = new_cost;
                return Ok(Some((norm, lambda)));
            }
            lambda = lambda.max(LAMBDA_FLOOR) * 10.0;
        }
        Ok(None)
    }

    /// Runs up to `max_iters_per_update` iterations and returns the newest estimate.
    pub fn update(&mut self) -> Result<Pose2> {
        if self.states.is_empty() {
            return Err(Error::InvalidInput("update on an empty window".into()));
        }
        let relin = self.relin_pending || self.steps.is_multiple_of(self.window.relin_every);
        let mut stats = UpdateStats { relinearized: relin, ..Default::default() };
        let mut cost = self.total_cost();
        for _ in 0..self.solver.max_iters_per_update {
            if relin {
                self.relinearize();
            }
            stats.iterations += 1;
            match self.iterate(&mut cost)? {
                Some(norm) if norm < self.solver.step_tolerance => break,
                Some(_) => {}
                None => {
                    stats.rejected += 1;
                    break;
                }
            }
        }
        if relin {
            self.relin_pending = false;
        }
        stats.cost = cost;
        self.last_stats = stats;
        Ok(*self.states.last().expect("non-empty"))
    }

    /// Iterates with fresh linearizations until the step norm drops below `tol`.
    pub fn solve_to_convergence(&mut self, tol: f64, max_iters: usize) -> Result<UpdateStats> {
        let mut cost = self.total_cost();
        let mut stats = UpdateStats { relinearized: true, ..Default::default() };
        let mut lambda = self.solver.damping;
        for _ in 0..max_iters {
            self.relinearize();
            stats.iterations += 1;
            // Levenberg-Marquardt: keep raising the damping until a step is accepted
            match self.iterate_damped(&mut cost, lambda, 16)? {
                Some((norm, used)) => {
                    lambda = if used > LAMBDA_FLOOR { used / 10.0 } else { 0.0 };
                    if norm < tol {
                        break;
                    }
                }
                None => {
                    stats.rejected += 1;
                    break;
                }
            }
        }
        stats.cost = cost;
        self.last_stats = stats;
        Ok(stats)
    }
}

/// One estimation tick's inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub t: f64,
    pub tactile: TactileSample,
    pub visual: Option<VisualSample>,
}

/// Full nonlinear least squares over every step, used as a reference solution.
///
/// Cost grows quadratically with the number of steps.
pub fn batch_solve(
    model: FactorModel,
    covariances: Covariances,
    inputs: &[StepInput],
    initial_prior: Option<(Pose2, Matrix3<f64>)>,
) -> Result<Vec<Pose2>> {
    let mut w = SmootherWindow::new(model, covariances, WindowConfig::no_trim(100), SolverConfig::default())?;
    if let Some((p, c)) = initial_prior {
        w = w.with_initial_prior(p, c);
    }
    // Continuation: converge after every added step so each new node starts
    // near its optimum. A cold start from a single pose lands in local minima
    // of the closest-point and motion terms.
    for s in inputs {
        w.add_step(s.t, &s.tactile, s.visual.as_ref())?;
        w.solve_to_convergence(1e-10, 50)?;
    }
    w.solve_to_convergence(1e-10, 200)?;
    Ok(w.states)
}
