//! Multi-task DT scoring: the externality function phi, score composition
//! with marginal scores, and the optimal-deadline search.
//!
//! phi(d) is the auctioneer's estimate of the offline surplus a task window
//! of deadline d generates: streaming budget, match quality over every
//! simulator, and the surplus rate of the efficient offline outcome, times
//! the window duration. It is non-decreasing in d and phi(0) = 0 by
//! construction, which is what the marginal-score assumption needs.

use crate::domain::{
    AvProfile, ChannelState, DtTask, GenerativeMode, PhiMode, RsuProfile, SimulatorKind,
    SimulatorProfile,
};
use crate::network::{dt_latency, link_rates, LinkRates};
use crate::simvalue::{effective_sim_budget, match_quality, simulator_value};

/// Everything the auctioneer needs to evaluate phi for one candidate AV.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a> {
    pub rsu: &'a RsuProfile,
    pub sims: &'a [SimulatorProfile],
    pub gamma: f64,
    pub phi_mode: PhiMode,
    pub generative_mode: GenerativeMode,
    pub theta_floor: f64,
    pub floor_q: bool,
}

/// Score decomposition for one AV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    /// Phi(b, d) = bid + sum of phi values.
    pub total_score: f64,
    /// Marginal scores: first entry is the score over the first task, the
    /// rest are per-task increments.
    pub marginals: Vec<f64>,
    /// Per-task phi values in scoring order.
    pub phi_values: Vec<f64>,
}

/// Link rates for one (AV, channel) pair under the context RSU.
pub fn rates_for(av: &AvProfile, channel: &ChannelState, rsu: &RsuProfile) -> LinkRates {
    link_rates(
        rsu.uplink_bw_mhz,
        rsu.downlink_bw_mhz,
        channel.gain,
        av.transmit_power_mw,
        rsu.transmit_power_mw,
        rsu.noise_power,
        channel.av_noise_power,
    )
    .expect("scenario validation guarantees positive noise power")
}

/// Surplus rate of the efficient offline outcome for the given per-simulator
/// budget: the better of the gamma-weighted driving value and the best
/// traffic value.
fn offline_surplus_rate(
    av: &AvProfile,
    window_s: f64,
    rates: &LinkRates,
    ctx: &ScoringContext,
) -> f64 {
    let mut best = 0.0_f64;
    for sim in ctx.sims {
        let mut q = effective_sim_budget(window_s, sim, rates.downlink_mbps, ctx.rsu.gpu_ghz);
        if ctx.floor_q {
            q = q.floor();
        }
        let m = match match_quality(
            ctx.generative_mode,
            sim.generative_score.for_av(av.id),
            q,
            sim.pref_hits[av.id],
            sim.relative_accuracy,
            ctx.theta_floor,
        ) {
            Ok(m) => m,
            Err(_) => continue, // theta below floor: excluded from the estimate
        };
        let value = simulator_value(av.valuation, m);
        let rate = match sim.kind {
            SimulatorKind::Driving => ctx.gamma * value,
            SimulatorKind::Traffic => value,
        };
        best = best.max(rate);
    }
    best
}

/// Externality of submitting deadline `deadline_s` for `task`: the estimated
/// offline surplus its residual window generates. Zero when the window is
/// empty or in zero mode.
pub fn externality_phi(
    task: &DtTask,
    deadline_s: f64,
    av: &AvProfile,
    channel: &ChannelState,
    ctx: &ScoringContext,
) -> f64 {
    if ctx.phi_mode == PhiMode::Zero || deadline_s <= 0.0 {
        return 0.0;
    }
    let rates = rates_for(av, channel, ctx.rsu);
    let dt = dt_latency(task, rates.uplink_mbps, ctx.rsu.cpu_ghz);
    let window = deadline_s - dt.total_s;
    if window <= 0.0 {
        return 0.0;
    }
    window * offline_surplus_rate(av, window, &rates, ctx)
}

/// Composes the multi-task score Phi = bid + sum(phi) and its marginal
/// sequence. With `sort_tasks`, phi values are reordered descending so the
/// marginal sequence is non-increasing by construction.
pub fn score(bid: f64, mut phi_values: Vec<f64>, sort_tasks: bool) -> ScoreVector {
    if sort_tasks {
        phi_values.sort_by(|a, b| b.partial_cmp(a).expect("phi values are finite"));
    }
    let total_score = bid + phi_values.iter().sum::<f64>();
    let mut marginals = Vec::with_capacity(phi_values.len());
    for (n, phi) in phi_values.iter().enumerate() {
        if n == 0 {
            marginals.push(bid + phi);
        } else {
            marginals.push(*phi);
        }
    }
    ScoreVector {
        total_score,
        marginals,
        phi_values,
    }
}

/// Convenience: phi per task at the given deadlines, then [`score`].
pub fn score_av(
    bid: f64,
    av: &AvProfile,
    deadlines: &[f64],
    channel: &ChannelState,
    ctx: &ScoringContext,
    sort_tasks: bool,
) -> ScoreVector {
    let phi_values = av
        .tasks
        .iter()
        .zip(deadlines)
        .map(|(task, d)| externality_phi(task, *d, av, channel, ctx))
        .collect();
    score(bid, phi_values, sort_tasks)
}

/// Optimal deadline for one task: grid argmax of the AV's score objective
/// over (0, d]. Ties break to the largest grid point, so a non-decreasing
/// phi always yields the true deadline.
pub fn optimal_deadline(
    task: &DtTask,
    av: &AvProfile,
    channel: &ChannelState,
    ctx: &ScoringContext,
    grid: u32,
) -> f64 {
    let grid = grid.max(1);
    let mut best_d = task.deadline_s;
    let mut best_phi = f64::NEG_INFINITY;
    for j in 1..=grid {
        let d = task.deadline_s * f64::from(j) / f64::from(grid);
        let phi = externality_phi(task, d, av, channel, ctx);
        if phi >= best_phi {
            best_phi = phi;
            best_d = d;
        }
    }
    best_d
}

/// Marginal-score assumption: the sequence is non-negative and
/// non-increasing. Independent of how the vector was built.
pub fn assumption1_check(score_vec: &ScoreVector) -> bool {
    let m = &score_vec.marginals;
    m.windows(2).all(|w| w[0] >= w[1]) && m.last().map_or(true, |last| *last >= 0.0)
}
