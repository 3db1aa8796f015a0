//! Evaluates every cost term at the true poses of a noiseless run and checks
//! the analytic Jacobians against central differences at one contact tick.
//!
//! `cargo run --release --example factor_residuals`

use pushest::factors::{Covariances, Factor, FactorKind, FactorModel, Measurement};
use pushest::harness::{make_ticks, simulate_scenario, Scenario};

fn main() -> pushest::Result<()> {
    let s = Scenario::noiseless(1);
    let streams = simulate_scenario(&s)?.streams;
    let ticks = make_ticks(&streams, s.estimator.tick_dt)?;
    let model = FactorModel::new(&s.shape_model()?, s.pusher.radius);
    let covs = Covariances::default();
    let k = ticks.iter().position(|t| t.contacts().len() == 2).expect("a two-finger contact");
    let (prev, cur) = (&ticks[k - 1], &ticks[k]);
    println!("tick t = {:.2} s, {} contacts", cur.t, cur.contacts().len());

    let mut factors = vec![
        Factor::new(Measurement::Prior, &[1, 0], covs.for_kind(FactorKind::Prior))?,
        Factor::new(
            Measurement::Motion { contacts: cur.contacts(), dt: s.estimator.tick_dt },
            &[0, 1],
            covs.for_kind(FactorKind::Motion),
        )?,
    ];
    for obs in cur.contacts() {
        factors.push(Factor::new(Measurement::Contact(obs), &[1], covs.for_kind(FactorKind::Contact))?);
    }
    let states = [prev.gt, cur.gt];
    for f in &factors {
        let xs: Vec<_> = f.nodes().iter().map(|&i| states[i]).collect();
        let r = f.residual(&model, &xs);
        let (ja, jn) = (f.jacobians(&model, &xs), f.numeric_jacobians(&model, &xs, 1e-6));
        let diff = (0..xs.len()).map(|i| (ja[i] - jn[i]).amax()).fold(0.0, f64::max);
        println!(
            "{:>8}: residual [{:+.2e}, {:+.2e}, {:+.2e}], whitened cost {:.3}, Jacobian vs FD {:.1e}",
            f.kind().as_str(),
            r[0],
            r[1],
            r[2],
            f.cost(&model, &xs),
            diff
        );
    }
    Ok(())
}
