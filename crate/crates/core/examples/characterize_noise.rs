//! Evaluates every cost term at ground truth, identifies its covariance and
//! checks the residuals for normality.
//!
//! `cargo run --release --example characterize_noise -- [seed]`

use std::collections::BTreeMap;

use pushest::factors::FactorKind;
use pushest::harness::{ground_truth_residuals, identify_covariance, normality_report, simulate_scenario, Scenario};

fn main() -> pushest::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = Scenario::standard(seed);
    let sim = simulate_scenario(&scenario)?;
    let records = ground_truth_residuals(&scenario, &sim.streams)?;
    let mut by_kind: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for r in &records {
        by_kind.entry(r.kind.as_str()).or_default().push(r.values.clone());
    }
    for kind in [FactorKind::Visual, FactorKind::Contact, FactorKind::Prior, FactorKind::Motion] {
        let Some(samples) = by_kind.get(kind.as_str()) else { continue };
        let cov = identify_covariance(samples)?;
        let sigma: Vec<String> = (0..cov.nrows()).map(|i| format!("{:.3e}", cov[(i, i)].sqrt())).collect();
        println!("{} ({} samples): sigma [{}]", kind.as_str(), samples.len(), sigma.join(", "));
        for (axis, rep) in normality_report(samples, 30)?.iter().enumerate() {
            println!(
                "  axis {axis}: mean {:+.3e} std {:.3e} KS {:.4} (crit {:.4}) {}",
                rep.mean,
                rep.std,
                rep.ks_statistic,
                rep.ks_critical,
                if rep.ks_pass { "gaussian" } else { "non-gaussian" }
            );
        }
    }
    Ok(())
}
