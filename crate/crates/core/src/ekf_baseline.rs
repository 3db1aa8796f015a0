//! Single-state filtering baselines: an EKF over the same measurement terms
//! as the smoother, and a zero-order hold on the raw camera poses.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::factors::{ContactObs, Covariances, Factor, FactorKind, FactorModel, Measurement};
use crate::geom2d::{wrap, Pose2};
use crate::sensor_sim::{TactileSample, VisualSample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: Pose2,
    pub covariance: Matrix3<f64>,
}

impl GaussianBelief {
    pub fn new(mean: Pose2, covariance: Matrix3<f64>) -> Result<Self> {
        if !mean.is_finite() || covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("belief"));
        }
        if (covariance - covariance.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidInput("belief covariance is not symmetric".into()));
        }
        Ok(Self { mean: Pose2::new(mean.x, mean.y, mean.theta), covariance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfOutput {
    pub belief: GaussianBelief,
    /// The covariance had to be projected back onto the PSD cone.
    pub projected: bool,
}

/// Kalman update with the residual form `r(x)`, target zero.
fn update(mean: &mut Pose2, cov: &mut Matrix3<f64>, factor: &Factor, model: &FactorModel, xs_before: Option<Pose2>) {
    let d = factor.dim();
    let (r, h) = match xs_before {
        Some(prev) => {
            let xs = [prev, *mean];
            (factor.residual(model, &xs), factor.jacobians(model, &xs)[1])
        }
        None => {
            let xs = [*mean];
            (factor.residual(model, &xs), factor.jacobians(model, &xs)[0])
        }
    };
    let r = DVector::from_iterator(d, r.iter().take(d).copied());
    let h = DMatrix::from_fn(d, 3, |i, j| h[(i, j)]);
    let p = DMatrix::from_iterator(3, 3, cov.iter().copied());
    let s = &h * &p * h.transpose() + factor.covariance();
    let Some(s_inv) = s.try_inverse() else { return };
    let k = &p * h.transpose() * s_inv;
    let dx = &k * (-r);
    *mean = mean.retract(&Vector3::new(dx[0], dx[1], dx[2]));
    let ikh = DMatrix::identity(3, 3) - &k * &h;
    let joseph = &ikh * &p * ikh.transpose() + &k * factor.covariance() * k.transpose();
    *cov = Matrix3::from_fn(|i, j| joseph[(i, j)]);
}

/// Symmetrizes and clamps negative eigenvalues; reports whether clamping was needed.
fn project_psd(cov: &mut Matrix3<f64>) -> bool {
    let sym = (*cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        *cov = sym;
        return false;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    *cov = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    true
}

/// One predict/update cycle: stationary prediction with process noise equal to
/// the stationary-prior covariance, then visual, contact and motion updates in turn.
pub fn ekf_step(
    belief: &GaussianBelief,
    tactile: &TactileSample,
    visual: Option<&VisualSample>,
    model: &FactorModel,
    covariances: &Covariances,
    dt: f64,
) -> Result<EkfOutput> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt = {dt}")));
    }
    let prev = belief.mean;
    let mut mean = belief.mean;
    let mut cov = belief.covariance + covariances.prior;
    if let Some(v) = visual.filter(|v| v.available) {
        let f = Factor::new(Measurement::Visual(v.pose), &[0], covariances.for_kind(FactorKind::Visual))?;
        update(&mut mean, &mut cov, &f, model, None);
    }
    let contacts: Vec<ContactObs> = tactile.fingers.iter().filter(|f| f.contact).map(ContactObs::from).collect();
    for obs in &contacts {
        let f = Factor::new(Measurement::Contact(*obs), &[0], covariances.for_kind(FactorKind::Contact))?;
        update(&mut mean, &mut cov, &f, model, None);
    }
    if !contacts.is_empty() {
        let f = Factor::new(Measurement::Motion { contacts, dt }, &[0, 1], covariances.for_kind(FactorKind::Motion))?;
        update(&mut mean, &mut cov, &f, model, Some(prev));
    }
    mean.theta = wrap(mean.theta);
    let projected = project_psd(&mut cov);
    Ok(EkfOutput { belief: GaussianBelief { mean, covariance: cov }, projected })
}

/// Latest available camera pose at each query time.
pub fn raw_visual_baseline(stream: &[VisualSample], query_times: &[f64]) -> Result<Vec<Pose2>> {
    let mut hold = RawVisualHold::default();
    let mut next = 0;
    query_times
        .iter()
        .map(|&t| {
            while next < stream.len() && stream[next].t <= t + 1e-9 {
                hold.observe(&stream[next]);
                next += 1;
            }
            hold.current().ok_or(Error::NoVisualYet(t))
        })
        .collect()
}

/// Incremental form of [`raw_visual_baseline`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RawVisualHold {
    last: Option<Pose2>,
}

impl RawVisualHold {
    pub fn observe(&mut self, sample: &VisualSample) {
        if sample.available {
            self.last = Some(sample.pose);
        }
    }

    pub fn current(&self) -> Option<Pose2> {
        self.last
    }
}
