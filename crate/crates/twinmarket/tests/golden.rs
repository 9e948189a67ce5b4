//! Pinned outcome of the default configuration at round 0. Guards the whole
//! pipeline — sampling, scoring, clearing, pricing, surplus assembly —
//! against silent numeric drift. Values were reviewed against the module
//! invariants before pinning: the payment equals window total times the
//! offline threshold, and the total equals s_dt + window total * s_traffic.

use twinmarket::domain::{Mechanism, MechanismConfig};
use twinmarket::engine::{generate_scenario, run_round, ScenarioConfig};

#[test]
fn default_round_zero_outcome_is_pinned() {
    let config = ScenarioConfig::default();
    let scenario = generate_scenario(&config, 0);
    let mech = MechanismConfig::new(Mechanism::Mtepvisa);
    let o = run_round(&scenario, &config, &mech, 0);

    assert_eq!(o.winner_av, Some(22));
    assert_eq!(o.winner_sim, Some(28));
    assert_eq!(o.dt_payment, 0.0);
    assert_eq!(o.sim_payment, 46.05474729143865);
    assert_eq!(o.alpha_used, 1.0);
    assert_eq!(o.scores.len(), 30);
    assert_eq!(o.scores[22], 50.805386638976124);
    assert_eq!(o.per_task_windows, vec![0.8925530705343367]);
    assert!(o.infeasible_tasks.is_empty());
    assert_eq!(o.s_dt, 0.8531484577019878);
    assert_eq!(o.s_traffic, 55.9634882358352);
    assert_eq!(o.s_driving, 0.0);
    assert_eq!(o.total, 50.803531720408934);
    assert_eq!(o.order_stats, Some((55.9634882358352, 51.59888953591014)));

    // Internal consistency of the pinned numbers.
    let window: f64 = o.per_task_windows.iter().sum();
    let (_, threshold) = o.order_stats.unwrap();
    assert!((o.sim_payment - window * threshold).abs() < 1e-12);
    assert!((o.total - (o.s_dt + window * o.s_traffic)).abs() < 1e-12);
}
