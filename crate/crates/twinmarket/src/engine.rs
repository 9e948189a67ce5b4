//! Scenario sampling and Monte Carlo round orchestration.
//!
//! Determinism contract: every random stream is a ChaCha12 generator seeded
//! by splitmix64-mixing (master_seed, round_index, stream_id), so a given
//! (config, round) pair always produces the same scenario and the same alpha
//! estimate, regardless of execution order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AvProfile, ChannelState, DtTask, GenerativeScore, MechanismConfig, MarketOutcome, RsuProfile,
    Scenario, SimulatorKind, SimulatorProfile, NOISE_FLOOR,
};
use crate::mechanism::{self, AlphaSource};
use crate::simvalue::{effective_sim_budget, match_quality, simulator_value};

const STREAM_SCENARIO: u64 = 0x5ce7a210;
const STREAM_ALPHA: u64 = 0xa1fa0e57;

/// splitmix64 mixer, the standard finalizer for seed derivation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives a child seed from (master, round, stream).
pub fn child_seed(master: u64, round: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(round)) ^ stream)
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Closed sampling interval [lo, hi] for U[lo, hi] draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..self.hi)
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Shifts the interval so its midpoint lands on `mid`, clamped to [0, 1].
    pub fn with_mid(&self, mid: f64) -> Range {
        let half = 0.5 * (self.hi - self.lo);
        Range {
            lo: (mid - half).max(0.0),
            hi: (mid + half).min(1.0),
        }
    }
}

fn d30() -> usize {
    30
}
fn d1() -> usize {
    1
}
fn default_rsu() -> RsuConfig {
    RsuConfig::default()
}
fn r01() -> Range {
    Range::new(0.0, 1.0)
}
fn r05() -> Range {
    Range::new(0.0, 5.0)
}
fn r_dt_size() -> Range {
    Range::new(0.0, 0.5)
}
fn r_dt_cycles() -> Range {
    Range::new(0.0, 2.0)
}
fn r_deadline() -> Range {
    Range::new(1.0, 1.5)
}
fn r_sim_size() -> Range {
    Range::new(0.0, 2.5)
}
fn r_gen_score() -> Range {
    Range::new(0.4, 0.6)
}
fn r_r2() -> Range {
    Range::new(0.99, 1.0)
}
fn d_theta() -> f64 {
    0.53
}
fn d_gamma() -> f64 {
    1.0
}
fn d_zipf_exp() -> f64 {
    2.0
}
fn d_zipf_max() -> u32 {
    20
}

/// Fixed RSU resources (the single RSU of the default market).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RsuConfig {
    pub uplink_bw_mhz: f64,
    pub downlink_bw_mhz: f64,
    pub cpu_ghz: f64,
    pub gpu_ghz: f64,
}

impl Default for RsuConfig {
    fn default() -> Self {
        RsuConfig {
            uplink_bw_mhz: 20.0,
            downlink_bw_mhz: 20.0,
            cpu_ghz: 3.6,
            gpu_ghz: 19.0,
        }
    }
}

/// Market-sampling parameters. Defaults are the 30-AV / 30-simulator /
/// single-RSU setup with the standard distribution bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_avs: usize,
    pub num_traffic_sims: usize,
    pub num_tasks: usize,
    pub rsu: RsuConfig,
    pub channel_gain: Range,
    pub av_power_mw: Range,
    pub rsu_power_mw: Range,
    pub dt_size_mb: Range,
    pub dt_cycles_per_mb: Range,
    pub deadline_s: Range,
    pub sim_size_mb: Range,
    pub sim_gpu_cycles_per_mb: Range,
    pub valuation: Range,
    pub generative_score: Range,
    pub r2_score: Range,
    /// Relative accuracy theta, shared by all simulators.
    pub theta: f64,
    /// Bargaining power of the driving simulator.
    pub gamma: f64,
    pub zipf_exponent: f64,
    /// Cache sizes are Zipf draws truncated to {1..zipf_max}.
    pub zipf_max: u32,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_avs: d30(),
            num_traffic_sims: d30(),
            num_tasks: d1(),
            rsu: default_rsu(),
            channel_gain: r01(),
            av_power_mw: r01(),
            rsu_power_mw: r05(),
            dt_size_mb: r_dt_size(),
            dt_cycles_per_mb: r_dt_cycles(),
            deadline_s: r_deadline(),
            sim_size_mb: r_sim_size(),
            sim_gpu_cycles_per_mb: r05(),
            valuation: r01(),
            generative_score: r_gen_score(),
            r2_score: r_r2(),
            theta: d_theta(),
            gamma: d_gamma(),
            zipf_exponent: d_zipf_exp(),
            zipf_max: d_zipf_max(),
            master_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_avs == 0 || self.num_traffic_sims == 0 || self.num_tasks == 0 {
            return Err(ConfigError::Invalid("counts must be >= 1".into()));
        }
        for (name, r) in [
            ("channel_gain", self.channel_gain),
            ("av_power_mw", self.av_power_mw),
            ("rsu_power_mw", self.rsu_power_mw),
            ("dt_size_mb", self.dt_size_mb),
            ("dt_cycles_per_mb", self.dt_cycles_per_mb),
            ("deadline_s", self.deadline_s),
            ("sim_size_mb", self.sim_size_mb),
            ("sim_gpu_cycles_per_mb", self.sim_gpu_cycles_per_mb),
            ("valuation", self.valuation),
            ("generative_score", self.generative_score),
            ("r2_score", self.r2_score),
        ] {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(ConfigError::Invalid(format!(
                    "{name}: bounds [{}, {}] not ordered",
                    r.lo, r.hi
                )));
            }
        }
        if self.deadline_s.lo <= 0.0 {
            return Err(ConfigError::Invalid("deadlines must be > 0".into()));
        }
        if self.sim_size_mb.hi <= 0.0 {
            return Err(ConfigError::Invalid("sim data size must admit positive draws".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ConfigError::Invalid("theta must be in (0, 1]".into()));
        }
        if self.gamma < 0.0 {
            return Err(ConfigError::Invalid("gamma must be >= 0".into()));
        }
        if self.zipf_max == 0 {
            return Err(ConfigError::Invalid("zipf_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// |N(0,1)| clamped away from zero, via Box-Muller.
fn sample_noise_power<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    let n = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    n.abs().max(NOISE_FLOOR)
}

/// Zipf(s) truncated to {1..max}, inverse-CDF sampling.
fn sample_zipf<R: Rng>(rng: &mut R, exponent: f64, max: u32) -> u32 {
    let weights: Vec<f64> = (1..=max).map(|k| f64::from(k).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen_range(0.0..1.0) * total;
    for (k, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return k as u32 + 1;
        }
    }
    max
}

fn positive_draw<R: Rng>(range: Range, rng: &mut R) -> f64 {
    // Degenerate zero draws are resampled: a zero-size simulation is singular.
    loop {
        let x = range.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// Deterministic scenario for (config, round_index).
pub fn generate_scenario(config: &ScenarioConfig, round_index: u64) -> Scenario {
    let seed = child_seed(config.master_seed, round_index, STREAM_SCENARIO);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let rsu = RsuProfile {
        uplink_bw_mhz: config.rsu.uplink_bw_mhz,
        downlink_bw_mhz: config.rsu.downlink_bw_mhz,
        cpu_ghz: config.rsu.cpu_ghz,
        gpu_ghz: config.rsu.gpu_ghz,
        transmit_power_mw: config.rsu_power_mw.sample(&mut rng),
        noise_power: sample_noise_power(&mut rng),
    };

    let avs: Vec<AvProfile> = (0..config.num_avs)
        .map(|id| AvProfile {
            id,
            valuation: config.valuation.sample(&mut rng),
            transmit_power_mw: config.av_power_mw.sample(&mut rng),
            cache_size: sample_zipf(&mut rng, config.zipf_exponent, config.zipf_max),
            tasks: (0..config.num_tasks)
                .map(|_| DtTask {
                    data_size_mb: config.dt_size_mb.sample(&mut rng),
                    cycles_per_mb: config.dt_cycles_per_mb.sample(&mut rng),
                    deadline_s: config.deadline_s.sample(&mut rng),
                })
                .collect(),
        })
        .collect();

    let channels: Vec<ChannelState> = (0..config.num_avs)
        .map(|_| ChannelState {
            gain: config.channel_gain.sample(&mut rng),
            av_noise_power: sample_noise_power(&mut rng),
            r2_score: config.r2_score.sample(&mut rng),
        })
        .collect();

    // Driving simulator is always index 0; traffic simulators follow.
    let sims: Vec<SimulatorProfile> = (0..=config.num_traffic_sims)
        .map(|id| SimulatorProfile {
            id,
            kind: if id == 0 {
                SimulatorKind::Driving
            } else {
                SimulatorKind::Traffic
            },
            sim_data_size_mb: positive_draw(config.sim_size_mb, &mut rng),
            gpu_cycles_per_mb: config.sim_gpu_cycles_per_mb.sample(&mut rng),
            generative_score: GenerativeScore::Scalar(config.generative_score.sample(&mut rng)),
            pref_hits: avs
                .iter()
                .map(|av| rng.gen_range(0..=av.cache_size))
                .collect(),
            relative_accuracy: config.theta,
        })
        .collect();

    Scenario {
        avs,
        rsu,
        sims,
        channels,
    }
}

/// Mechanism run wired to this generator's alpha estimator: the analytic
/// alpha samples hypothetical simulator populations from the configured
/// distributions for the realized winner, seeded by (master, round).
pub fn run_round(
    scenario: &Scenario,
    scenario_config: &ScenarioConfig,
    mech_config: &MechanismConfig,
    round_index: u64,
) -> MarketOutcome {
    let alpha_seed = child_seed(scenario_config.master_seed, round_index, STREAM_ALPHA);
    let mut estimator = alpha_estimator(scenario, scenario_config, mech_config, alpha_seed);
    mechanism::run_mechanism(scenario, mech_config, AlphaSource::Estimator(&mut estimator))
}

/// Builds the Monte Carlo alpha estimator for one round. Each draw samples a
/// fresh driving simulator and traffic population from the config
/// distributions and values them for the winning AV over its realized
/// windows; simulator bids never enter, so the offline threshold stays
/// independent of the reports it prices.
pub fn alpha_estimator<'a>(
    scenario: &'a Scenario,
    config: &'a ScenarioConfig,
    mech: &'a MechanismConfig,
    seed: u64,
) -> impl FnMut(usize, &[f64]) -> f64 + 'a {
    move |winner: usize, windows: &[f64]| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let av = &scenario.avs[winner];
        let channel = &scenario.channels[winner];
        let rates = crate::scoring::rates_for(av, channel, &scenario.rsu);
        let gpu = scenario.rsu.gpu_ghz;
        let downlink = rates.downlink_mbps;
        let windows = windows.to_vec();
        let draw = |rng: &mut ChaCha12Rng| {
            let value_of = |rng: &mut ChaCha12Rng| {
                let sim = SimulatorProfile {
                    id: usize::MAX,
                    kind: SimulatorKind::Traffic,
                    sim_data_size_mb: positive_draw(config.sim_size_mb, rng),
                    gpu_cycles_per_mb: config.sim_gpu_cycles_per_mb.sample(rng),
                    generative_score: GenerativeScore::Scalar(
                        config.generative_score.sample(rng),
                    ),
                    pref_hits: Vec::new(),
                    relative_accuracy: config.theta,
                };
                let q: f64 = windows
                    .iter()
                    .map(|w| effective_sim_budget(*w, &sim, downlink, gpu))
                    .sum();
                let hits = rng.gen_range(0..=av.cache_size);
                let m = match_quality(
                    mech.generative_mode,
                    sim.generative_score.for_av(0),
                    q,
                    hits,
                    sim.relative_accuracy,
                    mech.theta_floor,
                )
                .unwrap_or(0.0);
                simulator_value(av.valuation, m)
            };
            let driving = value_of(rng);
            let traffic: Vec<f64> = (0..config.num_traffic_sims).map(|_| value_of(rng)).collect();
            (driving, traffic)
        };
        mechanism::price_scaling_factor(mech.gamma, mech.alpha_samples, mech.alpha_cap, &mut rng, draw)
    }
}

/// One mechanism's outcome in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: u64,
    pub outcomes: Vec<(String, MarketOutcome)>,
}

/// Mean and variance accumulator (naive two-pass over stored rounds).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub variance: f64,
}

pub fn mean_var(values: &[f64]) -> MeanVar {
    if values.is_empty() {
        return MeanVar::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanVar { mean, variance }
}

/// Aggregate statistics of one mechanism over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismAggregate {
    pub mechanism: String,
    pub s_dt: MeanVar,
    pub s_traffic: MeanVar,
    pub s_driving: MeanVar,
    pub total: MeanVar,
}

/// Full Monte Carlo report: per-round outcomes plus per-mechanism aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rounds: Vec<RoundResult>,
    pub aggregates: Vec<MechanismAggregate>,
}

impl RunReport {
    pub fn aggregate_for(&self, mechanism: &str) -> Option<&MechanismAggregate> {
        self.aggregates.iter().find(|a| a.mechanism == mechanism)
    }
}

/// Runs `rounds` paired Monte Carlo rounds: every mechanism sees the
/// identical scenario per round. `jobs` > 1 executes rounds on a rayon pool;
/// results are merged in round order so output never depends on scheduling.
pub fn run_monte_carlo(
    config: &ScenarioConfig,
    mechanisms: &[MechanismConfig],
    rounds: u64,
    jobs: usize,
) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let one_round = |round: u64| -> RoundResult {
        let scenario = generate_scenario(config, round);
        let outcomes = mechanisms
            .iter()
            .map(|mech| {
                (
                    mech.mechanism.name().to_string(),
                    run_round(&scenario, config, mech, round),
                )
            })
            .collect();
        RoundResult { round, outcomes }
    };

    let round_results: Vec<RoundResult> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..rounds).into_par_iter().map(one_round).collect())
    } else {
        (0..rounds).map(one_round).collect()
    };

    let aggregates = mechanisms
        .iter()
        .map(|mech| {
            let name = mech.mechanism.name().to_string();
            let pick = |f: fn(&MarketOutcome) -> f64| -> Vec<f64> {
                round_results
                    .iter()
                    .flat_map(|r| {
                        r.outcomes
                            .iter()
                            .filter(|(m, _)| *m == name)
                            .map(move |(_, o)| f(o))
                    })
                    .collect()
            };
            MechanismAggregate {
                mechanism: name.clone(),
                s_dt: mean_var(&pick(|o| o.s_dt)),
                s_traffic: mean_var(&pick(|o| o.s_traffic)),
                s_driving: mean_var(&pick(|o| o.s_driving)),
                total: mean_var(&pick(|o| o.total)),
            }
        })
        .collect();

    Ok(RunReport {
        rounds: round_results,
        aggregates,
    })
}
