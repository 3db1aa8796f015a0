//! Feeds the standard scenario into the fixed-lag smoother tick by tick and
//! then compares the window against a batch solve over the same ticks.
//!
//! `cargo run --release --example sliding_window -- [seed] [ticks]`

use pushest::factors::{FactorKind, FactorModel};
use pushest::harness::{make_ticks, rmse, simulate_scenario, Scenario};
use pushest::smoother::{batch_solve, SmootherWindow, StepInput, WindowConfig};

fn main() -> pushest::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(150);
    let s = Scenario::standard(seed);
    let streams = simulate_scenario(&s)?.streams;
    // start with the first push so the window sees contact
    let all = make_ticks(&streams, s.estimator.tick_dt)?;
    let first = all.iter().position(|t| !t.contacts().is_empty()).unwrap_or(0).saturating_sub(20);
    let ticks = &all[first..(first + n).min(all.len())];
    let model = FactorModel::new(&s.shape_model()?, s.pusher.radius);
    let covs = s.estimator.covariances.covariances();
    let v0 = ticks.iter().find_map(|t| t.visual.filter(|v| v.available)).expect("camera sample");

    let mut w = SmootherWindow::new(
        model.clone(),
        covs,
        WindowConfig::no_trim(s.estimator.window.relin_every),
        s.estimator.solver,
    )?
    .with_initial_prior(v0.pose, covs.visual);
    let mut online = Vec::new();
    for t in ticks {
        w.add_step(t.t, &t.tactile, t.visual.as_ref())?;
        online.push(w.update()?);
    }
    println!(
        "{} nodes, {} contact and {} motion factors, cost {:.1}",
        w.num_nodes(),
        w.count_factors(FactorKind::Contact),
        w.count_factors(FactorKind::Motion),
        w.total_cost()
    );
    let gt: Vec<_> = ticks.iter().map(|t| t.gt).collect();
    println!("filtered (latest-node) estimates: {}", rmse(&online, &gt)?);
    println!("smoothed window:                  {}", rmse(w.estimates(), &gt)?);

    let inputs: Vec<StepInput> =
        ticks.iter().map(|t| StepInput { t: t.t, tactile: t.tactile.clone(), visual: t.visual }).collect();
    let batch = batch_solve(model, covs, &inputs, Some((v0.pose, covs.visual)))?;
    println!("batch solve:                      {}  (cost {:.1})", rmse(&batch, &gt)?, w.cost_at(&batch));
    Ok(())
}
