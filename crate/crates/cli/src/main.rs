use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pushest::harness::io::{
    load_streams, read_trajectory_csv, save_residuals_csv, save_streams, save_trajectory_csv, summarize_rows,
};
use pushest::harness::scenario::CovarianceConfig;
use pushest::harness::{
    benchmark_smoother, characterize_noise, estimate_streams, ground_truth_residuals, simulate_scenario, Method,
    RunOptions, Scenario, Streams,
};
use pushest::smoother::WindowConfig;

#[derive(Parser)]
#[command(name = "pushest", version, about = "Simulate pushing, estimate object pose, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write ground truth and sensor streams.
    Simulate(Common),
    /// Run estimators and write trajectory.csv.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        estimator: Estimator,
        /// Replay streams written by `simulate` instead of simulating.
        #[arg(long)]
        streams: Option<PathBuf>,
    },
    /// Recompute error summaries from a trajectory CSV.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/trajectory.csv`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Identify cost-term covariances from ground-truth residuals.
    CharacterizeNoise {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Time per-step smoother updates.
    Benchmark(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; the standard scenario when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Smoother window length in steps.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Smoother,
    Ekf,
    Baseline,
    All,
}

impl Estimator {
    fn methods(self) -> Vec<Method> {
        match self {
            Self::Smoother => vec![Method::Smoother],
            Self::Ekf => vec![Method::Ekf],
            Self::Baseline => vec![Method::Baseline],
            Self::All => Method::ALL.to_vec(),
        }
    }
}

impl Common {
    fn scenario(&self) -> pushest::Result<Scenario> {
        let mut s = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::standard(0),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(len) = self.window {
            let w = s.estimator.window;
            s.estimator.window = WindowConfig::with_len(len, w.trim_count, w.relin_every);
        }
        s.validate()?;
        Ok(s)
    }

    fn out_dir(&self) -> pushest::Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

fn streams_for(s: &Scenario) -> pushest::Result<Streams> {
    Ok(simulate_scenario(s)?.streams)
}

fn run(cli: Cli) -> pushest::Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let s = c.scenario()?;
            let sim = simulate_scenario(&s)?;
            let out = c.out_dir()?;
            save_streams(out, &sim.streams)?;
            fs::write(out.join("scenario.toml"), s.to_toml()?)?;
            let horizon = sim.trajectory.steps.last().map_or(0.0, |st| st.t);
            println!(
                "{}: {} steps over {horizon:.2} s, {:.1}% occluded, streams in {}",
                s.name,
                sim.trajectory.steps.len(),
                100.0 * sim.occlusion.occluded_time(horizon) / horizon.max(f64::MIN_POSITIVE),
                out.display()
            );
        }
        Command::Estimate { common, estimator, streams } => {
            let s = common.scenario()?;
            let streams = match streams {
                Some(dir) => load_streams(&dir)?,
                None => streams_for(&s)?,
            };
            let report = estimate_streams(&s, &streams, &estimator.methods(), RunOptions::default())?;
            let path = common.out_dir()?.join("trajectory.csv");
            save_trajectory_csv(&path, &report)?;
            for t in &report.traces {
                println!("{:>9}: {}", t.method.as_str(), t.summary);
            }
            println!("wrote {}", path.display());
        }
        Command::Evaluate { common, trajectory } => {
            let path = trajectory.unwrap_or_else(|| common.out.join("trajectory.csv"));
            for (m, summary, _) in summarize_rows(&read_trajectory_csv(&path)?)? {
                println!("{:>9}: {summary} ({} ticks)", m.as_str(), summary.count);
            }
        }
        Command::CharacterizeNoise { common, bins } => {
            let s = common.scenario()?;
            let streams = streams_for(&s)?;
            let records = ground_truth_residuals(&s, &streams)?;
            let kinds = characterize_noise(&records, bins)?;
            let out = common.out_dir()?;
            save_residuals_csv(&out.join("residuals.csv"), &records)?;
            let mut qq = String::from("kind,axis,theoretical,sample\n");
            for k in &kinds {
                let sig: Vec<String> = k.sigmas().iter().map(|v| format!("{v:.3e}")).collect();
                println!("{} ({} samples): sigma [{}]", k.kind.as_str(), k.samples, sig.join(", "));
                for (axis, rep) in k.axes.iter().enumerate() {
                    println!(
                        "  axis {axis}: mean {:+.3e}, KS {:.4} vs {:.4} ({})",
                        rep.mean,
                        rep.ks_statistic,
                        rep.ks_critical,
                        if rep.ks_pass { "gaussian" } else { "non-gaussian" }
                    );
                    for (th, v) in &rep.qq {
                        qq.push_str(&format!("{},{axis},{th},{v}\n", k.kind.as_str()));
                    }
                }
            }
            fs::write(out.join("qq.csv"), qq)?;
            let cfg = CovarianceConfig::default().with_identified(&kinds);
            fs::write(out.join("noise.toml"), cfg.to_toml_fragment()?)?;
            println!("wrote residuals.csv, qq.csv and noise.toml to {}", out.display());
        }
        Command::Benchmark(c) => {
            let s = c.scenario()?;
            let streams = streams_for(&s)?;
            let t = benchmark_smoother(&s, &streams)?;
            println!(
                "window {}: per-step update mean {:.3} ms, std {:.3} ms, max {:.2} ms",
                s.estimator.window.window_len, t.mean_ms, t.std_ms, t.max_ms
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
