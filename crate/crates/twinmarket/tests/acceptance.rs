//! End-to-end acceptance gate. Each test covers one criterion and prints a
//! single PASS/FAIL line; run with `--nocapture` to see them on success.

use std::time::Instant;

use twinmarket::domain::{GenerativeMode, Mechanism, MechanismConfig, OnlinePricing};
use twinmarket::engine::{run_monte_carlo, ScenarioConfig};
use twinmarket::mechanism::{run_offline_auction, run_online_auction, DtBid, SimBid};
use twinmarket::network::{dt_latency, shannon_rate, sim_latency};
use twinmarket::report::{render_csv, rows_from_report};
use twinmarket::scoring;
use twinmarket::simvalue::{match_quality, simulation_budget};
use twinmarket::verify;

fn announce(criterion: u32, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {status} — {detail}");
    assert!(passed, "criterion {criterion} failed: {detail}");
}

fn mean_total(config: &ScenarioConfig, mech: &MechanismConfig, rounds: u64) -> f64 {
    let report = run_monte_carlo(config, std::slice::from_ref(mech), rounds, 1).unwrap();
    report
        .aggregate_for(mech.mechanism.name())
        .expect("aggregate present")
        .total
        .mean
}

/// Property suite at full scale, plus both negative controls.
#[test]
fn criterion_1_mechanism_theorems() {
    let config = ScenarioConfig::default();
    let mech = MechanismConfig::new(Mechanism::Mtepvisa);

    let started = Instant::now();
    let reports = verify::verify_all(&config, &mech, 1000);
    let elapsed = started.elapsed();

    let clean = reports.iter().all(verify::PropertyReport::ok);
    let dirty: Vec<&str> = reports
        .iter()
        .filter(|r| !r.ok())
        .map(|r| r.property.as_str())
        .collect();

    let first_price = MechanismConfig {
        online_pricing: OnlinePricing::FirstPrice,
        ..MechanismConfig::new(Mechanism::Mtepvisa)
    };
    let control_a = verify::check_strategy_proofness(&config, &first_price, 100, 20);

    let multi_task = ScenarioConfig {
        num_tasks: 5,
        ..ScenarioConfig::default()
    };
    let unsorted = MechanismConfig {
        sort_tasks: false,
        ..MechanismConfig::new(Mechanism::Mtepvisa)
    };
    let control_b = verify::check_assumption1(&multi_task, &unsorted, 100);

    let ok = clean && elapsed.as_secs() < 120 && !control_a.ok() && !control_b.ok();
    announce(
        1,
        ok,
        &format!(
            "verify all 1000 trials in {elapsed:.2?} (violating: {dirty:?}); \
             negative controls violated: first-price {} / unsorted {}",
            !control_a.ok(),
            !control_b.ok()
        ),
    );
}

/// Mean total surplus vs. the price-only baseline at one task per AV.
#[test]
fn criterion_2_pvisa_gap() {
    let config = ScenarioConfig::default(); // num_tasks = 1
    let mechs = [
        MechanismConfig::new(Mechanism::Mtepvisa),
        MechanismConfig::new(Mechanism::Pvisa),
    ];
    let report = run_monte_carlo(&config, &mechs, 1000, 1).unwrap();
    let mt = report.aggregate_for("mtepvisa").unwrap().total.mean;
    let pv = report.aggregate_for("pvisa").unwrap().total.mean;
    let ratio = mt / pv;
    if (1.8..2.0).contains(&ratio) {
        println!("criterion 2: WARNING — ratio {ratio:.3} in the [1.8, 2.0) tolerance band");
    }
    announce(
        2,
        ratio >= 1.8,
        &format!("mtepvisa/pvisa mean-total ratio {ratio:.3} (target ≥ 2.0, floor 1.8)"),
    );
}

/// Generative match-quality amplification vs. the raw-hits baseline.
#[test]
fn criterion_3_generative_uplift() {
    let config = ScenarioConfig::default();
    let generative = MechanismConfig::new(Mechanism::Mtepvisa);
    let baseline = MechanismConfig {
        generative_mode: GenerativeMode::Baseline,
        ..MechanismConfig::new(Mechanism::Mtepvisa)
    };
    let with = mean_total(&config, &generative, 1000);
    let without = mean_total(&config, &baseline, 1000);
    let ratio = with / without;
    announce(
        3,
        ratio >= 1.5,
        &format!("generative/baseline mean-total ratio {ratio:.3} (target ≥ 1.5)"),
    );
}

fn spearman(values: &[f64]) -> f64 {
    // Rank correlation against the index order; values are means over many
    // rounds, ties are practically impossible.
    let n = values.len() as f64;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut rank = vec![0.0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64;
    }
    let d2: f64 = rank
        .iter()
        .enumerate()
        .map(|(i, r)| (r - i as f64).powi(2))
        .sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Surplus curves rise along each swept axis and the multi-task gap over the
/// single-task-scored variant widens with task count.
#[test]
fn criterion_4_trend_reproduction() {
    const ROUNDS: u64 = 300;
    let mech = MechanismConfig::new(Mechanism::Mtepvisa);
    let base = ScenarioConfig::default();

    let sweeps: Vec<(&str, Vec<ScenarioConfig>)> = vec![
        (
            "num_avs 10→50",
            [10, 20, 30, 40, 50]
                .iter()
                .map(|&v| ScenarioConfig { num_avs: v, ..base.clone() })
                .collect(),
        ),
        (
            "num_traffic_sims 10→50",
            [10, 20, 30, 40, 50]
                .iter()
                .map(|&v| ScenarioConfig { num_traffic_sims: v, ..base.clone() })
                .collect(),
        ),
        (
            "generative_score_mid 0.1→0.9",
            [0.1, 0.3, 0.5, 0.7, 0.9]
                .iter()
                .map(|&v| ScenarioConfig {
                    generative_score: base.generative_score.with_mid(v),
                    ..base.clone()
                })
                .collect(),
        ),
        (
            "num_tasks 1→5",
            (1..=5)
                .map(|v| ScenarioConfig { num_tasks: v, ..base.clone() })
                .collect(),
        ),
    ];

    let mut all_ok = true;
    let mut detail = String::new();
    for (name, configs) in &sweeps {
        let means: Vec<f64> = configs.iter().map(|c| mean_total(c, &mech, ROUNDS)).collect();
        let rho = spearman(&means);
        if rho < 0.9 {
            all_ok = false;
        }
        detail.push_str(&format!("{name}: ρ={rho:.2}; "));
    }

    // Gap vs. the single-task-scored variant at N = 1 and N = 5.
    let mechs = [
        MechanismConfig::new(Mechanism::Mtepvisa),
        MechanismConfig::new(Mechanism::Epvisa),
    ];
    let gap_at = |tasks: usize| -> f64 {
        let config = ScenarioConfig { num_tasks: tasks, ..base.clone() };
        let report = run_monte_carlo(&config, &mechs, ROUNDS, 1).unwrap();
        report.aggregate_for("mtepvisa").unwrap().total.mean
            - report.aggregate_for("epvisa").unwrap().total.mean
    };
    let (gap1, gap5) = (gap_at(1), gap_at(5));
    if gap5 <= gap1 {
        all_ok = false;
    }
    detail.push_str(&format!("gap N=1 {gap1:.3} vs N=5 {gap5:.3}"));
    announce(4, all_ok, &detail);
}

/// Pinned closed-form values, recomputed here end to end.
#[test]
fn criterion_5_formula_pins() {
    let mut ok = true;
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-12 {
            println!("criterion 5: mismatch {name}: {got} != {want}");
            ok = false;
        }
    };

    check("shannon", shannon_rate(20.0, 1.0, 3.0, 1.0).unwrap(), 40.0);

    let task = twinmarket::domain::DtTask {
        data_size_mb: 0.5,
        cycles_per_mb: 2.0,
        deadline_s: 1.5,
    };
    let dt = dt_latency(&task, 4.0, 3.6);
    check("dt upload", dt.upload_s, 1.0);
    check("dt compute", dt.compute_s, 0.2777777777777778);
    check("dt total", dt.total_s, 1.2777777777777777);

    check("sim budget", simulation_budget(1.5, 0.5, 20.0, 2.5), 1.0);

    let sim = twinmarket::domain::SimulatorProfile {
        id: 1,
        kind: twinmarket::domain::SimulatorKind::Traffic,
        sim_data_size_mb: 2.5,
        gpu_cycles_per_mb: 5.0,
        generative_score: twinmarket::domain::GenerativeScore::Scalar(0.5),
        pref_hits: vec![1],
        relative_accuracy: 0.5,
    };
    let (transmit_s, compute_s) = sim_latency(2.0, &sim, 40.0, 19.0);
    check("sim transmit q=2", transmit_s, 1.0);
    check("sim compute q=2", compute_s, 1.3157894736842106);

    check(
        "match quality",
        match_quality(GenerativeMode::Generative, 0.5, 1.0, 1, 0.5, 0.05).unwrap(),
        1.1699250014423124,
    );
    check(
        "match quality hand",
        match_quality(GenerativeMode::Generative, 1.0, 1.0, 1, 0.5, 0.05).unwrap(),
        2.0,
    );

    // Score assembly over phi values {0.3, 0.2}.
    let vec = scoring::score(0.4, vec![0.3, 0.2], true);
    check("score total", vec.total_score, 0.9);
    check("score marginal 0", vec.marginals[0], 0.7);
    check("score marginal 1", vec.marginals[1], 0.2);

    // Online clearing: scores {0.9, 0.7, 0.5}, critical payment 0.2.
    let bids = vec![
        DtBid { av_id: 0, price: 0.4, deadlines: vec![1.0] },
        DtBid { av_id: 1, price: 0.6, deadlines: vec![1.0] },
        DtBid { av_id: 2, price: 0.5, deadlines: vec![1.0] },
    ];
    let online = run_online_auction(&bids, &[0.5, 0.1, 0.0], OnlinePricing::Critical);
    assert_eq!(online.winner, Some(0));
    check("online payment", online.payment, 0.2);

    // Offline clearing: 5 > 2·2 wins at threshold 4; {3, 2} falls back.
    let driving = Some(SimBid { sim_id: 0, price: 3.0 });
    let off = run_offline_auction(
        driving,
        &[SimBid { sim_id: 1, price: 5.0 }, SimBid { sim_id: 2, price: 2.0 }],
        2.0,
        1.0,
    );
    assert_eq!(off.winner, Some(1));
    check("offline payment", off.payment, 4.0);
    let fallback = run_offline_auction(
        driving,
        &[SimBid { sim_id: 1, price: 3.0 }, SimBid { sim_id: 2, price: 2.0 }],
        2.0,
        1.0,
    );
    assert_eq!(fallback.winner, Some(0));
    check("fallback payment", fallback.payment, 3.0);

    announce(5, ok, "pinned formula values match to 1e-12");
}

/// Output never depends on the worker count, and per-round cost grows no
/// faster than I·log I in the number of bidders.
#[test]
fn criterion_6_determinism_and_complexity() {
    let config = ScenarioConfig::default();
    let mechs = [MechanismConfig::new(Mechanism::Mtepvisa)];
    let serial = run_monte_carlo(&config, &mechs, 100, 1).unwrap();
    let parallel = run_monte_carlo(&config, &mechs, 100, 4).unwrap();
    let csv_serial = render_csv(
        &rows_from_report(&serial, &config, GenerativeMode::Generative),
        &[],
    );
    let csv_parallel = render_csv(
        &rows_from_report(&parallel, &config, GenerativeMode::Generative),
        &[],
    );
    let identical = csv_serial == csv_parallel;

    // Runtime fit. The timing baseline starts above the constant-overhead
    // regime; factor-2 slack on the I·log I model per doubling.
    let sizes = [10usize, 20, 40, 80, 160, 320];
    let mut timings = Vec::new();
    for &i in &sizes {
        let c = ScenarioConfig { num_avs: i, ..ScenarioConfig::default() };
        // Warm-up pass keeps allocator effects out of the first sample.
        let _ = run_monte_carlo(&c, &mechs, 5, 1).unwrap();
        let started = Instant::now();
        let _ = run_monte_carlo(&c, &mechs, 50, 1).unwrap();
        timings.push(started.elapsed().as_secs_f64());
    }
    let model = |i: usize| (i as f64) * (i as f64).ln();
    let mut scaling_ok = true;
    for w in sizes.iter().zip(&timings).collect::<Vec<_>>().windows(2) {
        let ((&i0, &t0), (&i1, &t1)) = (w[0], w[1]);
        if i0 < 40 {
            continue; // below this the fixed per-round cost dominates
        }
        let allowed = 2.0 * model(i1) / model(i0);
        if t1 / t0 > allowed {
            println!(
                "criterion 6: step {i0}→{i1} grew {:.2}x, allowed {:.2}x",
                t1 / t0,
                allowed
            );
            scaling_ok = false;
        }
    }

    announce(
        6,
        identical && scaling_ok,
        &format!(
            "jobs-invariant CSV: {identical}; timings {:?}",
            timings.iter().map(|t| format!("{t:.3}s")).collect::<Vec<_>>()
        ),
    );
}
