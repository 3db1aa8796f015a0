use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom2d::{wrap, Pose2};

/// Error summary in the units of the result tables: millimeters and degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RmseSummary {
    pub trans_rmse_mm: f64,
    pub trans_std_mm: f64,
    pub rot_rmse_deg: f64,
    pub rot_std_deg: f64,
    pub count: usize,
}

impl std::fmt::Display for RmseSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "trans {:.2}±{:.2} mm, rot {:.2}±{:.2} deg",
            self.trans_rmse_mm, self.trans_std_mm, self.rot_rmse_deg, self.rot_std_deg
        )
    }
}

fn rms_and_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    (rms, std)
}

/// Per-step translation error norms (m) and absolute wrapped rotation errors (rad).
pub fn pose_errors(est: &[Pose2], gt: &[Pose2]) -> Result<(Vec<f64>, Vec<f64>)> {
    if est.len() != gt.len() {
        return Err(Error::LengthMismatch(est.len(), gt.len()));
    }
    Ok(est
        .iter()
        .zip(gt)
        .map(|(e, g)| ((e.translation() - g.translation()).norm(), wrap(e.theta - g.theta).abs()))
        .unzip())
}

/// Translation and rotation RMSE with the standard deviation of the per-step errors.
pub fn rmse(est: &[Pose2], gt: &[Pose2]) -> Result<RmseSummary> {
    let (t, r) = pose_errors(est, gt)?;
    if t.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let (trms, tstd) = rms_and_std(&t);
    let (rrms, rstd) = rms_and_std(&r);
    Ok(RmseSummary {
        trans_rmse_mm: trms * 1e3,
        trans_std_mm: tstd * 1e3,
        rot_rmse_deg: rrms.to_degrees(),
        rot_std_deg: rstd.to_degrees(),
        count: t.len(),
    })
}

/// Mean, population standard deviation and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub max_ms: f64,
}

impl TimingStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        let n = ms.len() as f64;
        let mean = ms.iter().sum::<f64>() / n;
        let var = ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean_ms: mean, std_ms: var.sqrt(), max_ms: ms.iter().copied().fold(0.0, f64::max) }
    }
}
