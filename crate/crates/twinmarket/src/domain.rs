//! Canonical data types, units and invariant enforcement for all market
//! entities.
//!
//! Unit conventions used throughout the crate: bandwidth in MHz yields rates
//! in Mbit/s (1 Hz of spectrum carries 1 bit/s of capacity under the log2
//! Shannon form), data sizes in MB convert at 8 Mbit per MB, compute densities
//! in Gcycles/MB against GHz frequencies yield seconds, and all surpluses are
//! in the same utility units as the AV valuations.

use serde::{Deserialize, Serialize};

/// Index of the driving simulator in every simulator list.
pub const DRIVING_SIM_ID: usize = 0;

/// Smallest admissible relative accuracy. The match-quality formula divides
/// by theta, so zero must be kept out of the domain.
pub const THETA_FLOOR: f64 = 0.05;

/// Smallest admissible noise power after the |N(0,1)| draw.
pub const NOISE_FLOOR: f64 = 0.01;

/// One digital-twin task: payload size, compute density and deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtTask {
    /// Task payload in MB.
    pub data_size_mb: f64,
    /// CPU cycles per unit data, in Gcycles/MB.
    pub cycles_per_mb: f64,
    /// Completion deadline in seconds.
    pub deadline_s: f64,
}

/// An autonomous vehicle: private valuation, radio parameters, preference
/// cache size and its DT task list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvProfile {
    pub id: usize,
    /// Private value for having the whole task list executed.
    pub valuation: f64,
    pub transmit_power_mw: f64,
    /// Number of stored preference-cache entries.
    pub cache_size: u32,
    pub tasks: Vec<DtTask>,
}

/// Roadside unit resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuProfile {
    pub uplink_bw_mhz: f64,
    pub downlink_bw_mhz: f64,
    pub cpu_ghz: f64,
    pub gpu_ghz: f64,
    pub transmit_power_mw: f64,
    /// Receiver-side noise power at the RSU (dimensionless power units).
    pub noise_power: f64,
}

/// Per-(AV, RSU) channel state and prediction quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelState {
    /// Channel gain in [0, 1].
    pub gain: f64,
    /// Noise power at the AV side.
    pub av_noise_power: f64,
    /// Movement-prediction quality (R2 score) in [0, 1].
    pub r2_score: f64,
}

/// Whether a simulator provides offline driving simulation or online traffic
/// simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorKind {
    Driving,
    Traffic,
}

/// Generative score, either a scalar default or a per-AV vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GenerativeScore {
    Scalar(f64),
    PerAv(Vec<f64>),
}

impl GenerativeScore {
    /// Score for a given AV, broadcasting a scalar value.
    pub fn for_av(&self, av_id: usize) -> f64 {
        match self {
            GenerativeScore::Scalar(g) => *g,
            GenerativeScore::PerAv(v) => v[av_id],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            GenerativeScore::Scalar(g) => std::slice::from_ref(g),
            GenerativeScore::PerAv(v) => v,
        }
    }
}

/// A virtual simulator bidding in the offline submarket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorProfile {
    pub id: usize,
    pub kind: SimulatorKind,
    /// Data size of one simulation in MB. Must be positive.
    pub sim_data_size_mb: f64,
    /// GPU cycles per unit data, in Gcycles/MB.
    pub gpu_cycles_per_mb: f64,
    /// Fraction of usable synthetic simulations, in [0, 1].
    pub generative_score: GenerativeScore,
    /// Preference-cache hits per AV, indexed by AV id.
    pub pref_hits: Vec<u32>,
    /// Relative accuracy theta in (0, 1]; smaller is better.
    pub relative_accuracy: f64,
}

/// Mechanism selection for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Multi-task enhanced second-score mechanism: externality scoring over
    /// every task, optimal deadline selection and alpha-scaled offline
    /// pricing.
    Mtepvisa,
    /// Externality scoring restricted to the first task, alpha-scaled
    /// offline pricing.
    Epvisa,
    /// Price-only online scoring, offline alpha fixed to 1 with driving
    /// fallback.
    Pvisa,
    /// Plain second-price in both submarkets; the driving simulator competes
    /// like any other bidder offline.
    Spa,
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Mtepvisa => "mtepvisa",
            Mechanism::Epvisa => "epvisa",
            Mechanism::Pvisa => "pvisa",
            Mechanism::Spa => "spa",
        }
    }

    /// Whether the online score carries externality terms.
    pub fn uses_externality(&self) -> bool {
        matches!(self, Mechanism::Mtepvisa | Mechanism::Epvisa)
    }
}

/// How the offline price scaling factor is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// Monte Carlo estimate of max(1, gamma E[U_0] / E[U_(2)]).
    Analytic,
    /// Pinned value, must be >= 1.
    Fixed(f64),
}

/// Externality-function mode for the scoring rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    /// Auctioneer's hypothetical offline-surplus evaluation of the task
    /// window.
    EfficientEstimate,
    /// phi identically zero (price-only scoring ablation).
    Zero,
}

/// Whether simulator match quality is amplified by synthesized data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerativeMode {
    Generative,
    Baseline,
}

/// Online payment rule. `Critical` is the strategy-proof rule; `FirstPrice`
/// exists as a deliberately broken negative control for the property
/// checkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlinePricing {
    Critical,
    FirstPrice,
}

fn default_alpha_cap() -> f64 {
    10.0
}
fn default_alpha_samples() -> u32 {
    256
}
fn default_theta_floor() -> f64 {
    THETA_FLOOR
}
fn default_deadline_grid() -> u32 {
    16
}
fn default_online_pricing() -> OnlinePricing {
    OnlinePricing::Critical
}
fn default_sort_tasks() -> bool {
    true
}
fn default_floor_q() -> bool {
    false
}

/// Full mechanism configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub mechanism: Mechanism,
    /// Relative bargaining power of the driving simulator.
    pub gamma: f64,
    pub alpha_policy: AlphaPolicy,
    pub phi_mode: PhiMode,
    pub generative_mode: GenerativeMode,
    #[serde(default = "default_theta_floor")]
    pub theta_floor: f64,
    /// Fallback alpha when the second-highest traffic expectation degenerates
    /// to zero.
    #[serde(default = "default_alpha_cap")]
    pub alpha_cap: f64,
    /// Monte Carlo samples behind the analytic alpha policy.
    #[serde(default = "default_alpha_samples")]
    pub alpha_samples: u32,
    /// Grid points per task interval for the optimal-deadline search.
    #[serde(default = "default_deadline_grid")]
    pub deadline_grid: u32,
    #[serde(default = "default_online_pricing")]
    pub online_pricing: OnlinePricing,
    /// Sort each AV's tasks by descending phi before scoring. Disabling this
    /// is a negative control for the marginal-score checker.
    #[serde(default = "default_sort_tasks")]
    pub sort_tasks: bool,
    /// Floor simulation budgets to integer counts.
    #[serde(default = "default_floor_q")]
    pub floor_q: bool,
}

impl MechanismConfig {
    pub fn new(mechanism: Mechanism) -> Self {
        MechanismConfig {
            mechanism,
            gamma: 1.0,
            alpha_policy: AlphaPolicy::Analytic,
            phi_mode: PhiMode::EfficientEstimate,
            generative_mode: GenerativeMode::Generative,
            theta_floor: THETA_FLOOR,
            alpha_cap: default_alpha_cap(),
            alpha_samples: default_alpha_samples(),
            deadline_grid: default_deadline_grid(),
            online_pricing: OnlinePricing::Critical,
            sort_tasks: true,
            floor_q: false,
        }
    }
}

/// One market instance: I AVs, one RSU, K+1 simulators, per-AV channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub avs: Vec<AvProfile>,
    pub rsu: RsuProfile,
    pub sims: Vec<SimulatorProfile>,
    /// Channel state per AV (single RSU).
    pub channels: Vec<ChannelState>,
}

/// Full clearing result of one market round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome {
    pub winner_av: Option<usize>,
    pub dt_payment: f64,
    pub winner_sim: Option<usize>,
    pub sim_payment: f64,
    pub alpha_used: f64,
    /// Online scores per AV, in AV-id order.
    pub scores: Vec<f64>,
    /// Residual simulation window per feasible winning task, seconds.
    pub per_task_windows: Vec<f64>,
    /// Winning tasks that missed their deadline and were excluded from the
    /// windows.
    pub infeasible_tasks: Vec<usize>,
    pub s_dt: f64,
    pub s_traffic: f64,
    pub s_driving: f64,
    pub total: f64,
    /// Top-two traffic simulator values for the winner, audit trail for the
    /// offline threshold.
    pub order_stats: Option<(f64, f64)>,
}

impl MarketOutcome {
    pub fn empty() -> Self {
        MarketOutcome {
            winner_av: None,
            dt_payment: 0.0,
            winner_sim: None,
            sim_payment: 0.0,
            alpha_used: 1.0,
            scores: Vec::new(),
            per_task_windows: Vec::new(),
            infeasible_tasks: Vec::new(),
            s_dt: 0.0,
            s_traffic: 0.0,
            s_driving: 0.0,
            total: 0.0,
            order_stats: None,
        }
    }
}

/// One invariant violation found by [`validate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Stable identifier, e.g. "6c" for constraint (6c) breaches.
    pub code: String,
    pub message: String,
}

/// Outcome of scenario validation. Report-style: never an error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: &str, message: String) {
        self.violations.push(Violation {
            code: code.to_string(),
            message,
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "[{}] {}", v.code, v.message)?;
        }
        Ok(())
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Checks every type invariant plus the structural requirements of a market
/// instance and returns the list of breaches.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let num_avs = scenario.avs.len();

    for (idx, av) in scenario.avs.iter().enumerate() {
        if av.id != idx {
            report.push("id", format!("av {} stored at index {}", av.id, idx));
        }
        if !finite_nonneg(av.valuation) {
            report.push("av", format!("av {}: valuation {} < 0", av.id, av.valuation));
        }
        if !finite_nonneg(av.transmit_power_mw) {
            report.push("av", format!("av {}: negative transmit power", av.id));
        }
        if av.tasks.is_empty() {
            report.push("av", format!("av {}: empty task list", av.id));
        }
        for (n, task) in av.tasks.iter().enumerate() {
            if !finite_nonneg(task.data_size_mb) {
                report.push("task", format!("av {} task {}: data size < 0", av.id, n));
            }
            if !finite_nonneg(task.cycles_per_mb) {
                report.push("task", format!("av {} task {}: cycle density < 0", av.id, n));
            }
            if !(task.deadline_s > 0.0 && task.deadline_s.is_finite()) {
                report.push("task", format!("av {} task {}: deadline must be > 0", av.id, n));
            }
        }
    }

    let rsu = &scenario.rsu;
    for (name, value) in [
        ("uplink_bw_mhz", rsu.uplink_bw_mhz),
        ("downlink_bw_mhz", rsu.downlink_bw_mhz),
        ("cpu_ghz", rsu.cpu_ghz),
        ("gpu_ghz", rsu.gpu_ghz),
        ("transmit_power_mw", rsu.transmit_power_mw),
        ("noise_power", rsu.noise_power),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            report.push("rsu", format!("rsu: {name} must be > 0, got {value}"));
        }
    }

    if scenario.channels.len() != num_avs {
        report.push(
            "channel",
            format!(
                "expected {} channel states (one per AV), got {}",
                num_avs,
                scenario.channels.len()
            ),
        );
    }
    for (i, ch) in scenario.channels.iter().enumerate() {
        if !finite_nonneg(ch.gain) {
            report.push("channel", format!("av {i}: channel gain < 0"));
        }
        if !(ch.av_noise_power > 0.0 && ch.av_noise_power.is_finite()) {
            report.push("channel", format!("av {i}: noise power must be > 0"));
        }
        if !(ch.r2_score >= 0.0 && ch.r2_score <= 1.0) {
            report.push("channel", format!("av {i}: r2 score outside [0, 1]"));
        }
    }

    match scenario.sims.first() {
        None => report.push("sim", "no driving simulator".to_string()),
        Some(first) => {
            if first.kind != SimulatorKind::Driving || first.id != DRIVING_SIM_ID {
                report.push(
                    "sim",
                    "no driving simulator: index 0 must be the driving simulator".to_string(),
                );
            }
        }
    }
    for (idx, sim) in scenario.sims.iter().enumerate() {
        if sim.id != idx {
            report.push("id", format!("simulator {} stored at index {}", sim.id, idx));
        }
        if idx > 0 && sim.kind != SimulatorKind::Traffic {
            report.push("sim", format!("simulator {}: only index 0 may be driving", sim.id));
        }
        if !(sim.sim_data_size_mb > 0.0 && sim.sim_data_size_mb.is_finite()) {
            report.push("sim", format!("simulator {}: sim data size must be > 0", sim.id));
        }
        if !finite_nonneg(sim.gpu_cycles_per_mb) {
            report.push("sim", format!("simulator {}: gpu cycle density < 0", sim.id));
        }
        for g in sim.generative_score.values() {
            if !(*g >= 0.0 && *g <= 1.0) {
                report.push("sim", format!("simulator {}: generative score outside [0, 1]", sim.id));
            }
        }
        if let GenerativeScore::PerAv(v) = &sim.generative_score {
            if v.len() != num_avs {
                report.push(
                    "sim",
                    format!(
                        "simulator {}: per-AV generative score has {} entries, expected {}",
                        sim.id,
                        v.len(),
                        num_avs
                    ),
                );
            }
        }
        if sim.pref_hits.len() != num_avs {
            report.push(
                "sim",
                format!(
                    "simulator {}: pref_hits has {} entries, expected {}",
                    sim.id,
                    sim.pref_hits.len(),
                    num_avs
                ),
            );
        }
        for (i, (&h, av)) in sim.pref_hits.iter().zip(&scenario.avs).enumerate() {
            if h > av.cache_size {
                report.push(
                    "6c",
                    format!(
                        "simulator {}: pref_hits {} for av {} exceeds cache size {}",
                        sim.id, h, i, av.cache_size
                    ),
                );
            }
        }
        if !(sim.relative_accuracy >= THETA_FLOOR && sim.relative_accuracy <= 1.0) {
            report.push(
                "theta",
                format!(
                    "simulator {}: relative accuracy {} outside [{}, 1]",
                    sim.id, sim.relative_accuracy, THETA_FLOOR
                ),
            );
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_scenario() -> Scenario {
        Scenario {
            avs: vec![AvProfile {
                id: 0,
                valuation: 0.5,
                transmit_power_mw: 1.0,
                cache_size: 3,
                tasks: vec![DtTask {
                    data_size_mb: 0.5,
                    cycles_per_mb: 2.0,
                    deadline_s: 1.5,
                }],
            }],
            rsu: RsuProfile {
                uplink_bw_mhz: 20.0,
                downlink_bw_mhz: 20.0,
                cpu_ghz: 3.6,
                gpu_ghz: 19.0,
                transmit_power_mw: 1.0,
                noise_power: 1.0,
            },
            sims: vec![
                SimulatorProfile {
                    id: 0,
                    kind: SimulatorKind::Driving,
                    sim_data_size_mb: 2.5,
                    gpu_cycles_per_mb: 0.0,
                    generative_score: GenerativeScore::Scalar(0.5),
                    pref_hits: vec![1],
                    relative_accuracy: 0.5,
                },
                SimulatorProfile {
                    id: 1,
                    kind: SimulatorKind::Traffic,
                    sim_data_size_mb: 2.5,
                    gpu_cycles_per_mb: 0.0,
                    generative_score: GenerativeScore::Scalar(0.5),
                    pref_hits: vec![1],
                    relative_accuracy: 0.5,
                },
            ],
            channels: vec![ChannelState {
                gain: 1.0,
                av_noise_power: 1.0,
                r2_score: 1.0,
            }],
        }
    }

    #[test]
    fn tiny_scenario_validates() {
        assert!(validate_scenario(&tiny_scenario()).ok());
    }

    #[test]
    fn pref_hits_over_cache_is_6c_violation() {
        let mut s = tiny_scenario();
        s.sims[1].pref_hits[0] = 5; // cache size is 3
        let report = validate_scenario(&s);
        assert!(!report.ok());
        assert!(report.violations.iter().any(|v| v.code == "6c"));
    }

    #[test]
    fn empty_simulator_list_is_missing_driving() {
        let mut s = tiny_scenario();
        s.sims.clear();
        let report = validate_scenario(&s);
        assert!(report
            .violations
            .iter()
            .any(|v| v.message.contains("no driving simulator")));
    }

    #[test]
    fn theta_below_floor_reported() {
        let mut s = tiny_scenario();
        s.sims[0].relative_accuracy = 0.0;
        assert!(validate_scenario(&s)
            .violations
            .iter()
            .any(|v| v.code == "theta"));
    }

    #[test]
    fn unknown_json_fields_rejected() {
        let json = r#"{"data_size_mb":0.5,"cycles_per_mb":2.0,"deadline_s":1.5,"bogus":1}"#;
        assert!(serde_json::from_str::<DtTask>(json).is_err());
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let s = tiny_scenario();
        let json = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
