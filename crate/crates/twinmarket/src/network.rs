//! Shannon-rate and latency arithmetic for DT uploads, DT execution and
//! simulation streaming. Pure functions, no shared state.

use crate::domain::{DtTask, SimulatorProfile};
use thiserror::Error;

pub const MBIT_PER_MB: f64 = 8.0;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("noise power must be positive, got {0}")]
    NonPositiveNoise(f64),
}

/// Uplink/downlink rates for one (AV, RSU) pair, Mbit/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRates {
    pub uplink_mbps: f64,
    pub downlink_mbps: f64,
}

/// Latency decomposition for one DT task at one RSU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtLatency {
    pub upload_s: f64,
    pub compute_s: f64,
    pub total_s: f64,
    /// total_s within the task deadline.
    pub feasible: bool,
}

/// Shannon capacity in Mbit/s: bandwidth * log2(1 + gain * power / noise).
///
/// Rates use the log2 (bits) convention so MHz of bandwidth yields Mbit/s.
pub fn shannon_rate(
    bandwidth_mhz: f64,
    gain: f64,
    tx_power_mw: f64,
    noise_power: f64,
) -> Result<f64, NetworkError> {
    if noise_power <= 0.0 {
        return Err(NetworkError::NonPositiveNoise(noise_power));
    }
    let snr = gain * tx_power_mw / noise_power;
    if snr <= 0.0 {
        return Ok(0.0);
    }
    Ok(bandwidth_mhz * (1.0 + snr).log2())
}

/// Both link rates for an (AV, RSU) pair. Uploads flow AV -> RSU against the
/// RSU-side noise; downlink streams RSU -> AV against the AV-side noise.
pub fn link_rates(
    uplink_bw_mhz: f64,
    downlink_bw_mhz: f64,
    gain: f64,
    av_power_mw: f64,
    rsu_power_mw: f64,
    rsu_noise: f64,
    av_noise: f64,
) -> Result<LinkRates, NetworkError> {
    Ok(LinkRates {
        uplink_mbps: shannon_rate(uplink_bw_mhz, gain, av_power_mw, rsu_noise)?,
        downlink_mbps: shannon_rate(downlink_bw_mhz, gain, rsu_power_mw, av_noise)?,
    })
}

/// Upload plus CPU execution latency of one DT task.
///
/// Upload converts MB to Mbit at 8 Mbit/MB; zero uplink with a non-empty
/// payload yields an infeasible result rather than an error.
pub fn dt_latency(task: &DtTask, uplink_mbps: f64, cpu_ghz: f64) -> DtLatency {
    let upload_s = if task.data_size_mb == 0.0 {
        0.0
    } else if uplink_mbps > 0.0 {
        MBIT_PER_MB * task.data_size_mb / uplink_mbps
    } else {
        f64::INFINITY
    };
    let compute_s = task.data_size_mb * task.cycles_per_mb / cpu_ghz;
    let total_s = upload_s + compute_s;
    DtLatency {
        upload_s,
        compute_s,
        total_s,
        feasible: total_s <= task.deadline_s,
    }
}

/// Streaming and GPU latency for `q_count` simulations of one simulator.
pub fn sim_latency(
    q_count: f64,
    sim: &SimulatorProfile,
    downlink_mbps: f64,
    gpu_ghz: f64,
) -> (f64, f64) {
    if q_count == 0.0 {
        return (0.0, 0.0);
    }
    let transmit_s = q_count * MBIT_PER_MB * sim.sim_data_size_mb / downlink_mbps;
    let compute_s = q_count * sim.sim_data_size_mb * sim.gpu_cycles_per_mb / gpu_ghz;
    (transmit_s, compute_s)
}

/// Total occupancy of the allocated (AV, simulator) pair: DT upload and
/// execution plus simulation streaming and GPU time. The caller checks the
/// sum against the task deadline.
pub fn total_latency(dt: &DtLatency, sim_transmit_s: f64, sim_compute_s: f64) -> f64 {
    dt.total_s + sim_transmit_s + sim_compute_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GenerativeScore, SimulatorKind};

    fn sim(size_mb: f64, gpu_cycles: f64) -> SimulatorProfile {
        SimulatorProfile {
            id: 1,
            kind: SimulatorKind::Traffic,
            sim_data_size_mb: size_mb,
            gpu_cycles_per_mb: gpu_cycles,
            generative_score: GenerativeScore::Scalar(0.5),
            pref_hits: vec![0],
            relative_accuracy: 0.5,
        }
    }

    #[test]
    fn shannon_rate_examples() {
        assert_eq!(shannon_rate(20.0, 1.0, 1.0, 1.0).unwrap(), 20.0);
        assert_eq!(shannon_rate(20.0, 1.0, 3.0, 1.0).unwrap(), 40.0);
        assert_eq!(shannon_rate(20.0, 0.0, 5.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn shannon_rate_rejects_bad_noise() {
        assert_eq!(
            shannon_rate(20.0, 1.0, 1.0, 0.0),
            Err(NetworkError::NonPositiveNoise(0.0))
        );
    }

    #[test]
    fn dt_latency_hand_example() {
        // s=0.5 MB, e=2 Gcycles/MB, d=1.5 s, R^u=4 Mbit/s, f=3.6 GHz.
        let task = DtTask {
            data_size_mb: 0.5,
            cycles_per_mb: 2.0,
            deadline_s: 1.5,
        };
        let lat = dt_latency(&task, 4.0, 3.6);
        assert!((lat.upload_s - 1.0).abs() < 1e-12);
        assert!((lat.compute_s - 0.2777777777777778).abs() < 1e-12);
        assert!((lat.total_s - 1.2777777777777777).abs() < 1e-12);
        assert!(lat.feasible);
    }

    #[test]
    fn dt_latency_zero_size_is_free_and_feasible() {
        let task = DtTask {
            data_size_mb: 0.0,
            cycles_per_mb: 2.0,
            deadline_s: 1.5,
        };
        let lat = dt_latency(&task, 0.0, 3.6);
        assert_eq!(lat.upload_s, 0.0);
        assert_eq!(lat.compute_s, 0.0);
        assert!(lat.feasible);
    }

    #[test]
    fn dt_latency_slow_uplink_infeasible() {
        let task = DtTask {
            data_size_mb: 0.5,
            cycles_per_mb: 0.0,
            deadline_s: 1.5,
        };
        let lat = dt_latency(&task, 2.0, 3.6);
        assert!((lat.upload_s - 2.0).abs() < 1e-12);
        assert!(!lat.feasible);
    }

    #[test]
    fn sim_latency_examples() {
        assert_eq!(sim_latency(0.0, &sim(2.5, 5.0), 20.0, 19.0), (0.0, 0.0));
        let (t, _) = sim_latency(1.0, &sim(2.5, 5.0), 20.0, 19.0);
        assert!((t - 1.0).abs() < 1e-12);
        let (_, c) = sim_latency(2.0, &sim(2.5, 5.0), 20.0, 19.0);
        assert!((c - 1.3157894736842106).abs() < 1e-12);
    }

    #[test]
    fn total_latency_is_exactly_additive() {
        let dt = DtLatency {
            upload_s: 1.0,
            compute_s: 0.2777777777777778,
            total_s: 1.2777777777777777,
            feasible: true,
        };
        assert_eq!(total_latency(&dt, 0.0, 0.0), 1.2777777777777777);
        let dt2 = DtLatency {
            upload_s: 0.3,
            compute_s: 0.2,
            total_s: 0.5,
            feasible: true,
        };
        assert_eq!(total_latency(&dt2, 0.3, 0.2), 1.0);
        // Negative feasibility fixture: 1.4 + 0.2 = 1.6 > deadline 1.5.
        let dt3 = DtLatency {
            upload_s: 1.4,
            compute_s: 0.0,
            total_s: 1.4,
            feasible: true,
        };
        assert!(total_latency(&dt3, 0.2, 0.0) > 1.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn shannon_rate_monotone(
                bw in 0.0f64..50.0,
                gain in 0.0f64..1.0,
                power in 0.0f64..5.0,
                noise in 0.01f64..2.0,
                bump in 0.0f64..1.0,
            ) {
                let base = shannon_rate(bw, gain, power, noise).unwrap();
                prop_assert!(shannon_rate(bw + bump, gain, power, noise).unwrap() >= base);
                prop_assert!(shannon_rate(bw, (gain + bump).min(1.0), power, noise).unwrap() >= base);
                prop_assert!(shannon_rate(bw, gain, power + bump, noise).unwrap() >= base);
                if gain * power > 0.0 && bump > 0.0 && bw > 0.0 {
                    prop_assert!(shannon_rate(bw, gain, power, noise + bump).unwrap() < base);
                }
            }

            #[test]
            fn total_latency_additive(a in 0.0f64..10.0, b in 0.0f64..10.0,
                                      c in 0.0f64..10.0, d in 0.0f64..10.0) {
                let dt = DtLatency { upload_s: a, compute_s: b, total_s: a + b, feasible: true };
                prop_assert_eq!(total_latency(&dt, c, d), a + b + c + d);
            }
        }
    }
}
