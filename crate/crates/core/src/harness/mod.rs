//! Scenario configuration, end-to-end runs, metrics, noise identification and CSV output.

pub mod io;
pub mod metrics;
pub mod noise;
pub mod runner;
pub mod scenario;

pub use metrics::{pose_errors, rmse, RmseSummary, TimingStats};
pub use noise::{identify_covariance, normality_report, AxisReport, Histogram};
pub use runner::{
    benchmark_smoother, characterize_noise, estimate_streams, ground_truth_residuals, make_ticks, run_scenario,
    simulate_scenario, KindNoise, Method, MethodTrace, ResidualRecord, RunOptions, RunReport, Simulated, Streams, Tick,
};
pub use scenario::{Scenario, ScriptName};
