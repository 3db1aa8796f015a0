//! Simulates the standard scenario and compares the three estimators.
//!
//! `cargo run --release --example run_scenario -- [seed] [scenario.toml]`

use std::path::Path;
use std::time::Instant;

use pushest::harness::{run_scenario, Method, RunOptions, Scenario};

fn main() -> pushest::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut scenario = match args.get(2) {
        Some(p) => Scenario::load(Path::new(p))?,
        None => Scenario::standard(seed),
    };
    scenario.seed = seed;
    let start = Instant::now();
    let report = run_scenario(&scenario, &Method::ALL, RunOptions { timing: true })?;
    println!(
        "{} (seed {}), {} ticks in {:.1} s",
        report.name,
        report.seed,
        report.ticks.len(),
        start.elapsed().as_secs_f64()
    );
    for trace in &report.traces {
        println!(
            "{:>9}: {}  step {:.3}±{:.3} ms (max {:.2})",
            trace.method.as_str(),
            trace.summary,
            trace.timing.mean_ms,
            trace.timing.std_ms,
            trace.timing.max_ms
        );
    }
    Ok(())
}
