//! Simulation budgets, match quality, pairwise values and surplus accounting:
//! the economics connecting residual DT windows to simulator values.

use crate::domain::{GenerativeMode, MarketOutcome, SimulatorKind, SimulatorProfile};
use crate::network::MBIT_PER_MB;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimValueError {
    #[error("relative accuracy {got} below floor {floor}")]
    ThetaBelowFloor { got: f64, floor: f64 },
    #[error("outcome violates constraint ({0})")]
    InfeasibleOutcome(&'static str),
}

/// Number of simulations that fit the residual window when only the downlink
/// stream bounds throughput: Q = max(0, d - T_dt) * R_d / (8 s_sim).
/// Real-valued; flooring is the caller's choice.
pub fn simulation_budget(
    deadline_s: f64,
    dt_total_s: f64,
    downlink_mbps: f64,
    sim_data_size_mb: f64,
) -> f64 {
    let window = (deadline_s - dt_total_s).max(0.0);
    window * downlink_mbps / (MBIT_PER_MB * sim_data_size_mb)
}

/// Number of simulations whose streaming plus GPU time exactly fill the
/// window, so the allocated pair always meets the deadline. Coincides with
/// [`simulation_budget`] when the simulator needs no GPU cycles.
pub fn effective_sim_budget(
    window_s: f64,
    sim: &SimulatorProfile,
    downlink_mbps: f64,
    gpu_ghz: f64,
) -> f64 {
    if window_s <= 0.0 || downlink_mbps <= 0.0 {
        return 0.0;
    }
    let secs_per_sim = MBIT_PER_MB * sim.sim_data_size_mb / downlink_mbps
        + sim.sim_data_size_mb * sim.gpu_cycles_per_mb / gpu_ghz;
    window_s / secs_per_sim
}

/// Match quality of one (AV, simulator) pair.
///
/// Generative mode amplifies preference hits by the synthesized-simulation
/// count: m = log2(1 + G Q) * h / theta. Baseline mode is the pre-generative
/// regime m = h.
pub fn match_quality(
    mode: GenerativeMode,
    generative_score: f64,
    q_count: f64,
    pref_hits: u32,
    relative_accuracy: f64,
    theta_floor: f64,
) -> Result<f64, SimValueError> {
    if relative_accuracy < theta_floor {
        return Err(SimValueError::ThetaBelowFloor {
            got: relative_accuracy,
            floor: theta_floor,
        });
    }
    Ok(match mode {
        GenerativeMode::Generative => {
            (1.0 + generative_score * q_count).log2() * f64::from(pref_hits) / relative_accuracy
        }
        GenerativeMode::Baseline => f64::from(pref_hits),
    })
}

/// Pair value U = v * m.
pub fn simulator_value(valuation: f64, match_quality: f64) -> f64 {
    valuation * match_quality
}

/// Online-submarket surplus contribution of one AV: the prediction-weighted
/// value R * v when allocated, zero otherwise.
pub fn dt_surplus(r2_score: f64, valuation: f64, won: bool) -> f64 {
    if won {
        r2_score * valuation
    } else {
        0.0
    }
}

/// Offline-submarket surplus rates and their time-weighted contribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OfflineSurplus {
    pub s_driving: f64,
    pub s_traffic: f64,
    /// sum over task windows of window * (gamma * s_driving + s_traffic).
    pub contribution: f64,
}

/// Surplus fragment generated by the offline winner over the per-task
/// windows. Exactly one of the driving/traffic rates is nonzero when a
/// winner exists.
pub fn offline_surplus(
    gamma: f64,
    winner_kind: Option<SimulatorKind>,
    winner_value: f64,
    windows_s: &[f64],
) -> OfflineSurplus {
    let (s_driving, s_traffic) = match winner_kind {
        Some(SimulatorKind::Driving) => (winner_value, 0.0),
        Some(SimulatorKind::Traffic) => (0.0, winner_value),
        None => (0.0, 0.0),
    };
    let rate = gamma * s_driving + s_traffic;
    OfflineSurplus {
        s_driving,
        s_traffic,
        contribution: windows_s.iter().map(|w| w * rate).sum(),
    }
}

/// Total market objective: S_dt plus the time-weighted offline surplus.
/// Rejects outcomes that breach the allocation or pricing constraints.
pub fn total_objective(outcome: &MarketOutcome, gamma: f64) -> Result<f64, SimValueError> {
    if outcome.winner_av.is_none() && (outcome.winner_sim.is_some() || outcome.s_dt != 0.0) {
        return Err(SimValueError::InfeasibleOutcome("6f"));
    }
    if outcome.winner_sim.is_none() && (outcome.s_driving != 0.0 || outcome.s_traffic != 0.0) {
        return Err(SimValueError::InfeasibleOutcome("6g"));
    }
    if outcome.s_driving != 0.0 && outcome.s_traffic != 0.0 {
        return Err(SimValueError::InfeasibleOutcome("6g"));
    }
    if outcome.dt_payment < 0.0 || outcome.sim_payment < 0.0 {
        return Err(SimValueError::InfeasibleOutcome("6d"));
    }
    if outcome.per_task_windows.iter().any(|w| *w < 0.0) {
        return Err(SimValueError::InfeasibleOutcome("6b"));
    }
    let rate = gamma * outcome.s_driving + outcome.s_traffic;
    let offline: f64 = outcome.per_task_windows.iter().map(|w| w * rate).sum();
    Ok(outcome.s_dt + offline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GenerativeScore;

    #[test]
    fn simulation_budget_examples() {
        assert!((simulation_budget(1.5, 0.5, 20.0, 2.5) - 1.0).abs() < 1e-12);
        assert_eq!(simulation_budget(1.5, 1.5, 20.0, 2.5), 0.0);
        assert!((simulation_budget(1.25, 0.25, 40.0, 1.25) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn effective_budget_matches_transmit_only_budget_without_gpu_load() {
        let sim = SimulatorProfile {
            id: 1,
            kind: SimulatorKind::Traffic,
            sim_data_size_mb: 2.5,
            gpu_cycles_per_mb: 0.0,
            generative_score: GenerativeScore::Scalar(0.5),
            pref_hits: vec![0],
            relative_accuracy: 0.5,
        };
        let q = effective_sim_budget(1.0, &sim, 20.0, 19.0);
        assert!((q - simulation_budget(1.5, 0.5, 20.0, 2.5)).abs() < 1e-12);
        // GPU load shrinks the budget so streaming + compute still fit.
        let mut gpu_sim = sim;
        gpu_sim.gpu_cycles_per_mb = 5.0;
        let q2 = effective_sim_budget(1.0, &gpu_sim, 20.0, 19.0);
        assert!(q2 < q);
        let occupancy = q2 * (8.0 * 2.5 / 20.0 + 2.5 * 5.0 / 19.0);
        assert!((occupancy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn match_quality_examples() {
        let m = match_quality(GenerativeMode::Generative, 0.5, 2.0, 1, 0.5, 0.05).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
        assert_eq!(
            match_quality(GenerativeMode::Generative, 0.0, 7.0, 3, 0.5, 0.05).unwrap(),
            0.0
        );
        assert_eq!(
            match_quality(GenerativeMode::Generative, 0.5, 0.0, 3, 0.5, 0.05).unwrap(),
            0.0
        );
        assert_eq!(
            match_quality(GenerativeMode::Baseline, 0.9, 4.0, 3, 0.5, 0.05).unwrap(),
            3.0
        );
    }

    #[test]
    fn match_quality_rejects_theta_below_floor() {
        assert!(match_quality(GenerativeMode::Generative, 0.5, 1.0, 1, 0.01, 0.05).is_err());
    }

    #[test]
    fn simulator_value_examples() {
        assert_eq!(simulator_value(0.5, 2.0), 1.0);
        assert_eq!(simulator_value(0.0, 2.0), 0.0);
        assert_eq!(simulator_value(1.0, 0.9972), 0.9972);
    }

    #[test]
    fn dt_surplus_examples() {
        assert_eq!(dt_surplus(1.0, 0.5, true), 0.5);
        assert_eq!(dt_surplus(0.9972, 1.0, true), 0.9972);
        assert_eq!(dt_surplus(0.9, 0.5, false), 0.0);
    }

    #[test]
    fn offline_surplus_examples() {
        let s = offline_surplus(1.0, Some(SimulatorKind::Driving), 0.8, &[2.0]);
        assert_eq!(s.s_driving, 0.8);
        assert_eq!(s.s_traffic, 0.0);
        assert!((s.contribution - 1.6).abs() < 1e-12);

        assert_eq!(offline_surplus(1.0, None, 0.0, &[2.0]).contribution, 0.0);
        assert_eq!(
            offline_surplus(0.0, Some(SimulatorKind::Driving), 0.8, &[2.0]).contribution,
            0.0
        );
    }

    fn outcome(
        s_dt: f64,
        s_driving: f64,
        s_traffic: f64,
        windows: Vec<f64>,
    ) -> MarketOutcome {
        let mut o = MarketOutcome::empty();
        o.winner_av = Some(0);
        o.winner_sim = if s_driving != 0.0 || s_traffic != 0.0 {
            Some(if s_driving != 0.0 { 0 } else { 1 })
        } else {
            None
        };
        o.s_dt = s_dt;
        o.s_driving = s_driving;
        o.s_traffic = s_traffic;
        o.per_task_windows = windows;
        o
    }

    #[test]
    fn total_objective_examples() {
        assert_eq!(total_objective(&MarketOutcome::empty(), 1.0).unwrap(), 0.0);
        let o = outcome(0.5, 0.0, 0.8, vec![1.0]);
        assert!((total_objective(&o, 1.0).unwrap() - 1.3).abs() < 1e-12);
        let o2 = outcome(0.5, 0.8, 0.0, vec![1.0, 0.5]);
        assert!((total_objective(&o2, 1.0).unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn total_objective_rejects_double_offline_winner() {
        let o = outcome(0.5, 0.8, 0.4, vec![1.0]);
        assert_eq!(
            total_objective(&o, 1.0),
            Err(SimValueError::InfeasibleOutcome("6g"))
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Non-decreasing in G, Q and h; non-increasing in theta.
            #[test]
            fn match_quality_monotone(
                g in 0.0f64..1.0,
                q in 0.0f64..50.0,
                h in 0u32..20,
                theta in 0.05f64..1.0,
                bump in 0.001f64..0.5,
            ) {
                let m = |g, q, h, t| {
                    match_quality(GenerativeMode::Generative, g, q, h, t, 0.05).unwrap()
                };
                let base = m(g, q, h, theta);
                prop_assert!(m((g + bump).min(1.0), q, h, theta) >= base);
                prop_assert!(m(g, q + bump, h, theta) >= base);
                prop_assert!(m(g, q, h + 1, theta) >= base);
                prop_assert!(m(g, q, h, (theta + bump).min(1.0)) <= base + 1e-12);
            }

            // Concave in Q for fixed G: second finite difference <= 0.
            #[test]
            fn match_quality_concave_in_q(
                g in 0.01f64..1.0,
                q in 0.0f64..50.0,
                step in 0.01f64..2.0,
            ) {
                let m = |q| match_quality(GenerativeMode::Generative, g, q, 1, 0.5, 0.05).unwrap();
                let second = m(q + 2.0 * step) - 2.0 * m(q + step) + m(q);
                prop_assert!(second <= 1e-9);
            }

            // Baseline mode ignores G and Q entirely.
            #[test]
            fn baseline_independent_of_g_and_q(
                g1 in 0.0f64..1.0, g2 in 0.0f64..1.0,
                q1 in 0.0f64..50.0, q2 in 0.0f64..50.0,
                h in 0u32..20,
            ) {
                let a = match_quality(GenerativeMode::Baseline, g1, q1, h, 0.5, 0.05).unwrap();
                let b = match_quality(GenerativeMode::Baseline, g2, q2, h, 0.5, 0.05).unwrap();
                prop_assert_eq!(a, b);
            }

            // Linear in each window duration holding winners fixed.
            #[test]
            fn objective_linear_in_windows(
                w in 0.0f64..5.0,
                scale in 0.0f64..4.0,
                rate in 0.0f64..3.0,
                s_dt in 0.0f64..2.0,
            ) {
                let o1 = outcome(s_dt, 0.0, rate, vec![w]);
                let o2 = outcome(s_dt, 0.0, rate, vec![w * scale]);
                let t1 = total_objective(&o1, 1.0).unwrap();
                let t2 = total_objective(&o2, 1.0).unwrap();
                prop_assert!(((t2 - s_dt) - scale * (t1 - s_dt)).abs() < 1e-9);
            }
        }
    }
}
