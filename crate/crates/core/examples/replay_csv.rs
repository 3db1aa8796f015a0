//! Writes a simulated run's sensor streams to CSV, reads them back and runs
//! every estimator on the replayed data.
//!
//! `cargo run --release --example replay_csv -- [dir]`

use std::path::PathBuf;

use pushest::harness::io::{load_streams, read_trajectory_csv, save_streams, save_trajectory_csv, summarize_rows};
use pushest::harness::{estimate_streams, simulate_scenario, Method, RunOptions, Scenario};

fn main() -> pushest::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pushest-replay"));
    let s = Scenario { repeats: 1, ..Scenario::standard(2) };
    save_streams(&dir, &simulate_scenario(&s)?.streams)?;
    let streams = load_streams(&dir)?;
    println!(
        "replaying {} camera and {} tactile samples from {}",
        streams.visual.len(),
        streams.tactile.len(),
        dir.display()
    );
    let report = estimate_streams(&s, &streams, &Method::ALL, RunOptions { timing: true })?;
    let path = dir.join("trajectory.csv");
    save_trajectory_csv(&path, &report)?;
    for (m, summary, timing) in summarize_rows(&read_trajectory_csv(&path)?)? {
        println!("{:>9}: {summary}, {:.3} ms/step", m.as_str(), timing.mean_ms);
    }
    Ok(())
}
