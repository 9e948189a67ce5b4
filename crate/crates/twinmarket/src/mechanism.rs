//! Winner determination and pricing for both submarkets: the multi-task
//! enhanced second-score mechanism plus the SPA, PViSA and EPViSA baselines.
//!
//! Online pricing follows the critical-payment characterization: the winner
//! pays the bid price that would have exactly reached the runner-up score,
//! max{Phi_-i} - sum(phi_i), clamped at zero. Losers pay nothing. The
//! literal "runner-up's bid" reading is not a critical payment and fails
//! strategy-proofness, so it is not used.

use rand::Rng;

use crate::domain::{
    AlphaPolicy, DtTask, Mechanism, MechanismConfig,
    MarketOutcome, OnlinePricing, PhiMode, Scenario, SimulatorKind,
};
use crate::network::dt_latency;
use crate::scoring::{self, ScoringContext};
use crate::simvalue::{
    dt_surplus, effective_sim_budget, match_quality, offline_surplus, simulator_value,
};

/// Online-submarket bid: a price plus one deadline per task.
#[derive(Debug, Clone, PartialEq)]
pub struct DtBid {
    pub av_id: usize,
    pub price: f64,
    pub deadlines: Vec<f64>,
}

/// Offline-submarket bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimBid {
    pub sim_id: usize,
    pub price: f64,
}

/// Result of a single submarket auction.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionResult {
    pub winner: Option<usize>,
    pub payment: f64,
    /// Threshold price characterizing the winner (per unit time in the
    /// offline submarket).
    pub critical_price: f64,
    pub alpha_used: f64,
    /// Highest and second-highest competing values, audit trail.
    pub order_stats: Option<(f64, f64)>,
}

impl AuctionResult {
    fn no_winner() -> Self {
        AuctionResult {
            winner: None,
            payment: 0.0,
            critical_price: 0.0,
            alpha_used: 1.0,
            order_stats: None,
        }
    }
}

/// Clears the online submarket. `phi_sums` is the per-bid externality total,
/// positionally aligned with `bids`; scores are price + phi_sum. Ties break
/// to the lowest AV id.
pub fn run_online_auction(
    bids: &[DtBid],
    phi_sums: &[f64],
    pricing: OnlinePricing,
) -> AuctionResult {
    assert_eq!(bids.len(), phi_sums.len());
    if bids.is_empty() {
        return AuctionResult::no_winner();
    }
    let scores: Vec<f64> = bids
        .iter()
        .zip(phi_sums)
        .map(|(b, phi)| b.price + phi)
        .collect();
    let mut best = 0usize;
    for (pos, s) in scores.iter().enumerate().skip(1) {
        let better = *s > scores[best]
            || (*s == scores[best] && bids[pos].av_id < bids[best].av_id);
        if better {
            best = pos;
        }
    }
    let runner_up_score = scores
        .iter()
        .enumerate()
        .filter(|(pos, _)| *pos != best)
        .map(|(_, s)| *s)
        .fold(0.0_f64, f64::max); // empty competition: critical price 0
    let critical_price = (runner_up_score - phi_sums[best]).max(0.0);
    let payment = match pricing {
        OnlinePricing::Critical => critical_price,
        OnlinePricing::FirstPrice => bids[best].price,
    };
    AuctionResult {
        winner: Some(bids[best].av_id),
        payment,
        critical_price,
        alpha_used: 1.0,
        order_stats: Some((scores[best], runner_up_score)),
    }
}

/// Price scaling factor alpha = max(1, gamma E[U_0] / E[U_(2)]), estimated
/// by Monte Carlo. Each draw yields a driving value and the traffic value
/// vector; E[U_(2)] is the mean second-highest traffic value. A degenerate
/// denominator falls back to `alpha_cap`.
pub fn price_scaling_factor<R: Rng>(
    gamma: f64,
    samples: u32,
    alpha_cap: f64,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> (f64, Vec<f64>),
) -> f64 {
    let samples = samples.max(1);
    let mut sum_driving = 0.0;
    let mut sum_second = 0.0;
    for _ in 0..samples {
        let (driving, traffic) = draw(rng);
        sum_driving += driving;
        sum_second += second_highest(&traffic);
    }
    let mean_driving = sum_driving / f64::from(samples);
    let mean_second = sum_second / f64::from(samples);
    if gamma * mean_driving <= 0.0 {
        return 1.0;
    }
    if mean_second <= 0.0 {
        return alpha_cap;
    }
    (gamma * mean_driving / mean_second).max(1.0)
}

fn second_highest(values: &[f64]) -> f64 {
    let (mut top, mut second) = (0.0_f64, 0.0_f64);
    for &v in values {
        if v > top {
            second = top;
            top = v;
        } else if v > second {
            second = v;
        }
    }
    second
}

/// Clears the offline submarket with the alpha-scaled threshold rule:
/// traffic simulator k wins iff its bid strictly exceeds alpha times the
/// best other traffic bid, paying that threshold per unit time over the
/// window total. With no dominant traffic bidder the driving simulator wins
/// as fallback and pays its own bid per unit time. The driving bid never
/// enters the traffic threshold.
pub fn run_offline_auction(
    driving_bid: Option<SimBid>,
    traffic_bids: &[SimBid],
    alpha: f64,
    total_window_s: f64,
) -> AuctionResult {
    let total_window_s = total_window_s.max(0.0); // empty f64 sums are -0.0
    let mut result = AuctionResult::no_winner();
    result.alpha_used = alpha;
    if !traffic_bids.is_empty() {
        let mut best = 0usize;
        for (pos, bid) in traffic_bids.iter().enumerate().skip(1) {
            if bid.price > traffic_bids[best].price
                || (bid.price == traffic_bids[best].price
                    && bid.sim_id < traffic_bids[best].sim_id)
            {
                best = pos;
            }
        }
        let others_max = traffic_bids
            .iter()
            .enumerate()
            .filter(|(pos, _)| *pos != best)
            .map(|(_, b)| b.price)
            .fold(0.0_f64, f64::max);
        result.order_stats = Some((traffic_bids[best].price, others_max));
        let threshold = alpha * others_max;
        if traffic_bids[best].price > threshold {
            result.winner = Some(traffic_bids[best].sim_id);
            result.critical_price = threshold;
            result.payment = total_window_s * threshold;
            return result;
        }
    }
    if let Some(driving) = driving_bid {
        result.winner = Some(driving.sim_id);
        result.critical_price = driving.price;
        result.payment = total_window_s * driving.price;
    }
    result
}

/// Plain second-price clearing over every simulator, driving included: the
/// highest bid wins and pays the second-highest per unit time.
pub fn run_offline_second_price(bids: &[SimBid], total_window_s: f64) -> AuctionResult {
    let total_window_s = total_window_s.max(0.0);
    if bids.is_empty() {
        return AuctionResult::no_winner();
    }
    let mut best = 0usize;
    for (pos, bid) in bids.iter().enumerate().skip(1) {
        if bid.price > bids[best].price
            || (bid.price == bids[best].price && bid.sim_id < bids[best].sim_id)
        {
            best = pos;
        }
    }
    let second = bids
        .iter()
        .enumerate()
        .filter(|(pos, _)| *pos != best)
        .map(|(_, b)| b.price)
        .fold(0.0_f64, f64::max);
    AuctionResult {
        winner: Some(bids[best].sim_id),
        payment: total_window_s * second,
        critical_price: second,
        alpha_used: 1.0,
        order_stats: Some((bids[best].price, second)),
    }
}

/// Per-(winner, simulator) truthful offline values: each simulator's value
/// is its match quality over the aggregated feasible windows times the
/// winner's valuation.
pub fn offline_values(
    scenario: &Scenario,
    winner_av: usize,
    windows_s: &[f64],
    config: &MechanismConfig,
) -> Vec<f64> {
    let av = &scenario.avs[winner_av];
    let channel = &scenario.channels[winner_av];
    let rates = scoring::rates_for(av, channel, &scenario.rsu);
    scenario
        .sims
        .iter()
        .map(|sim| {
            let mut q: f64 = windows_s
                .iter()
                .map(|w| effective_sim_budget(*w, sim, rates.downlink_mbps, scenario.rsu.gpu_ghz))
                .sum();
            if config.floor_q {
                q = q.floor();
            }
            let m = match match_quality(
                config.generative_mode,
                sim.generative_score.for_av(av.id),
                q,
                sim.pref_hits[av.id],
                sim.relative_accuracy,
                config.theta_floor,
            ) {
                Ok(m) => m,
                Err(_) => 0.0,
            };
            simulator_value(av.valuation, m)
        })
        .collect()
}

/// Feasible residual windows of one AV's tasks at the given deadlines:
/// window n is deadline - T_dt when the DT part meets the deadline,
/// otherwise the task index is reported as infeasible.
pub fn feasible_windows(
    tasks: &[DtTask],
    deadlines: &[f64],
    uplink_mbps: f64,
    cpu_ghz: f64,
) -> (Vec<f64>, Vec<usize>) {
    let mut windows = Vec::with_capacity(tasks.len());
    let mut infeasible = Vec::new();
    for (n, (task, d)) in tasks.iter().zip(deadlines).enumerate() {
        let dt = dt_latency(task, uplink_mbps, cpu_ghz);
        if dt.total_s <= *d {
            windows.push(d - dt.total_s);
        } else {
            infeasible.push(n);
        }
    }
    (windows, infeasible)
}

fn scoring_context<'a>(scenario: &'a Scenario, config: &MechanismConfig) -> ScoringContext<'a> {
    ScoringContext {
        rsu: &scenario.rsu,
        sims: &scenario.sims,
        gamma: config.gamma,
        phi_mode: if config.mechanism.uses_externality() {
            config.phi_mode
        } else {
            PhiMode::Zero
        },
        generative_mode: config.generative_mode,
        theta_floor: config.theta_floor,
        floor_q: config.floor_q,
    }
}

/// Truthful bids for a scenario under a mechanism: prices equal valuations;
/// the multi-task mechanism additionally selects deadlines by grid search,
/// the baselines bid the true deadlines.
pub fn truthful_bids(scenario: &Scenario, config: &MechanismConfig) -> Vec<DtBid> {
    let ctx = scoring_context(scenario, config);
    scenario
        .avs
        .iter()
        .map(|av| {
            let deadlines = if config.mechanism == Mechanism::Mtepvisa {
                av.tasks
                    .iter()
                    .map(|t| {
                        scoring::optimal_deadline(
                            t,
                            av,
                            &scenario.channels[av.id],
                            &ctx,
                            config.deadline_grid,
                        )
                    })
                    .collect()
            } else {
                av.tasks.iter().map(|t| t.deadline_s).collect()
            };
            DtBid {
                av_id: av.id,
                price: av.valuation,
                deadlines,
            }
        })
        .collect()
}

/// Externality totals per bid, positionally aligned. EPViSA scores only the
/// first task; the price-only baselines carry zero externality.
pub fn phi_sums(scenario: &Scenario, bids: &[DtBid], config: &MechanismConfig) -> Vec<f64> {
    let ctx = scoring_context(scenario, config);
    bids.iter()
        .map(|bid| {
            if !config.mechanism.uses_externality() || config.phi_mode == PhiMode::Zero {
                return 0.0;
            }
            let av = &scenario.avs[bid.av_id];
            let channel = &scenario.channels[bid.av_id];
            let tasks: usize = match config.mechanism {
                Mechanism::Epvisa => 1,
                _ => av.tasks.len(),
            };
            av.tasks
                .iter()
                .zip(&bid.deadlines)
                .take(tasks)
                .map(|(task, d)| scoring::externality_phi(task, *d, av, channel, &ctx))
                .sum()
        })
        .collect()
}

/// Alpha source for one clearing. The analytic policy needs a sampler over
/// the scenario's value distributions, which lives with the generator; a
/// fixed policy needs nothing.
pub enum AlphaSource<'a> {
    Fixed(f64),
    /// Called with (winning AV, feasible windows); returns the estimate.
    Estimator(&'a mut dyn FnMut(usize, &[f64]) -> f64),
}

/// Runs one full market round under truthful bidding: deadline selection,
/// online clearing, feasibility filtering, alpha, offline clearing, and
/// surplus assembly.
pub fn run_mechanism(
    scenario: &Scenario,
    config: &MechanismConfig,
    alpha_source: AlphaSource<'_>,
) -> MarketOutcome {
    let bids = truthful_bids(scenario, config);
    run_mechanism_with_bids(scenario, config, &bids, alpha_source)
}

/// Same as [`run_mechanism`] but with caller-supplied online bids: the
/// deviation hooks the property checkers need.
pub fn run_mechanism_with_bids(
    scenario: &Scenario,
    config: &MechanismConfig,
    bids: &[DtBid],
    alpha_source: AlphaSource<'_>,
) -> MarketOutcome {
    let mut outcome = MarketOutcome::empty();
    if bids.is_empty() {
        return outcome;
    }
    let phis = phi_sums(scenario, bids, config);
    let online = run_online_auction(bids, &phis, config.online_pricing);
    outcome.scores = bids
        .iter()
        .zip(&phis)
        .map(|(b, phi)| b.price + phi)
        .collect();

    let Some(winner_av) = online.winner else {
        return outcome;
    };
    outcome.winner_av = Some(winner_av);
    outcome.dt_payment = online.payment;

    let av = &scenario.avs[winner_av];
    let channel = &scenario.channels[winner_av];
    outcome.s_dt = dt_surplus(channel.r2_score, av.valuation, true);

    let rates = scoring::rates_for(av, channel, &scenario.rsu);
    let bid = bids.iter().find(|b| b.av_id == winner_av).expect("winner bid");
    let (windows, infeasible) =
        feasible_windows(&av.tasks, &bid.deadlines, rates.uplink_mbps, scenario.rsu.cpu_ghz);
    outcome.per_task_windows = windows;
    outcome.infeasible_tasks = infeasible;

    if scenario.sims.is_empty() {
        outcome.total = outcome.s_dt;
        return outcome;
    }

    let alpha = if config.mechanism.uses_externality() {
        match (config.alpha_policy, alpha_source) {
            (AlphaPolicy::Fixed(a), _) | (_, AlphaSource::Fixed(a)) => a.max(1.0),
            (AlphaPolicy::Analytic, AlphaSource::Estimator(est)) => {
                est(winner_av, &outcome.per_task_windows).max(1.0)
            }
        }
    } else {
        1.0
    };
    outcome.alpha_used = alpha;

    let values = offline_values(scenario, winner_av, &outcome.per_task_windows, config);
    let sim_bids: Vec<SimBid> = scenario
        .sims
        .iter()
        .zip(&values)
        .map(|(sim, v)| SimBid {
            sim_id: sim.id,
            price: *v,
        })
        .collect();
    let total_window: f64 = outcome.per_task_windows.iter().sum();

    let offline = match config.mechanism {
        Mechanism::Spa => run_offline_second_price(&sim_bids, total_window),
        _ => {
            let driving = sim_bids
                .iter()
                .find(|b| scenario.sims[b.sim_id].kind == SimulatorKind::Driving)
                .copied();
            let traffic: Vec<SimBid> = sim_bids
                .iter()
                .filter(|b| scenario.sims[b.sim_id].kind == SimulatorKind::Traffic)
                .copied()
                .collect();
            run_offline_auction(driving, &traffic, alpha, total_window)
        }
    };
    outcome.order_stats = offline.order_stats;
    outcome.winner_sim = offline.winner;
    outcome.sim_payment = offline.payment;

    if let Some(winner_sim) = offline.winner {
        let surplus = offline_surplus(
            config.gamma,
            Some(scenario.sims[winner_sim].kind),
            values[winner_sim],
            &outcome.per_task_windows,
        );
        outcome.s_driving = surplus.s_driving;
        outcome.s_traffic = surplus.s_traffic;
        outcome.total = outcome.s_dt + surplus.contribution;
    } else {
        outcome.total = outcome.s_dt;
    }
    outcome
}
