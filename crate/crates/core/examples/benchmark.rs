//! Per-step smoother update time for several window lengths.
//!
//! `cargo run --release --example benchmark -- [seed]`

use pushest::harness::{benchmark_smoother, simulate_scenario, Scenario};
use pushest::smoother::WindowConfig;

fn main() -> pushest::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let base = Scenario::standard(seed);
    let streams = simulate_scenario(&base)?.streams;
    println!("window  mean [ms]  std [ms]  max [ms]");
    for len in [50, 100, 200, 400] {
        let mut s = base.clone();
        // trim half the window, relinearizing at each trim
        s.estimator.window = WindowConfig::with_len(len, len / 2, len / 2);
        let t = benchmark_smoother(&s, &streams)?;
        println!("{len:6} {:10.3} {:9.3} {:9.2}", t.mean_ms, t.std_ms, t.max_ms);
    }
    Ok(())
}
