//! Command-line front end: Monte Carlo runs, parameter sweeps, and property
//! verification over the market mechanisms.
//!
//! Exit codes: 0 success, 1 property violations, 2 usage/config error,
//! 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use twinmarket::domain::{GenerativeMode, Mechanism, MechanismConfig, OnlinePricing};
use twinmarket::engine::{run_monte_carlo, ScenarioConfig};
use twinmarket::report::{render_csv, rows_from_report, write_atomic, ResultRow};
use twinmarket::verify;

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "twinmarket", version, about = "Two-sided vehicular digital-twin market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run paired Monte Carlo rounds and write one CSV row per
    /// (mechanism, round).
    Run(RunArgs),
    /// Sweep one scenario parameter, one CSV section per value.
    Sweep(SweepArgs),
    /// Check mechanism properties; report JSON goes to stdout.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MechanismArg {
    Mtepvisa,
    Epvisa,
    Pvisa,
    Spa,
}

impl From<MechanismArg> for Mechanism {
    fn from(arg: MechanismArg) -> Self {
        match arg {
            MechanismArg::Mtepvisa => Mechanism::Mtepvisa,
            MechanismArg::Epvisa => Mechanism::Epvisa,
            MechanismArg::Pvisa => Mechanism::Pvisa,
            MechanismArg::Spa => Mechanism::Spa,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override (SIM_SEED in the environment wins over this).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for round execution; output is identical at any count.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Mechanism to run; repeat for paired comparisons.
    #[arg(long = "mechanism", value_enum)]
    mechanisms: Vec<MechanismArg>,
    #[arg(long, default_value_t = 1000)]
    rounds: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disable generative amplification (baseline match quality).
    #[arg(long)]
    no_generative: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    NumAvs,
    NumTrafficSims,
    GenerativeScoreMid,
    NumTasks,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "mechanism", value_enum)]
    mechanisms: Vec<MechanismArg>,
    #[arg(long, default_value_t = 1000)]
    rounds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_generative: bool,
    /// Parameter to sweep.
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Property {
    StrategyProofness,
    AdverseSelection,
    DeadlineOptimality,
    Assumption1,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Property to check.
    #[arg(value_enum)]
    property: Property,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Mechanism under test.
    #[arg(long, value_enum, default_value_t = MechanismArg::Mtepvisa)]
    mechanism: MechanismArg,
    /// Negative control: pay first price in the online submarket.
    #[arg(long)]
    first_price: bool,
    /// Negative control: skip the descending-phi task sort.
    #[arg(long)]
    unsorted: bool,
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, ExitCode> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage_error(&format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ScenarioConfig>(&text)
                .map_err(|e| usage_error(&format!("{}: {e}", path.display())))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Ok(env_seed) = std::env::var("SIM_SEED") {
        config.master_seed = env_seed
            .parse()
            .map_err(|_| usage_error(&format!("SIM_SEED is not a valid u64: {env_seed:?}")))?;
    }
    config
        .validate()
        .map_err(|e| usage_error(&e.to_string()))?;
    Ok(config)
}

fn mechanism_configs(args: &[MechanismArg], no_generative: bool) -> Vec<MechanismConfig> {
    let list = if args.is_empty() {
        vec![MechanismArg::Mtepvisa]
    } else {
        args.to_vec()
    };
    list.into_iter()
        .map(|m| {
            let mut config = MechanismConfig::new(m.into());
            if no_generative {
                config.generative_mode = GenerativeMode::Baseline;
            }
            config
        })
        .collect()
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), ExitCode> {
    match out {
        Some(path) => write_atomic(path, content).map_err(|e| {
            eprintln!("error: writing {}: {e}", path.display());
            ExitCode::from(EXIT_IO)
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let config = match load_config(&args.common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if args.rounds == 0 {
        return usage_error("--rounds must be at least 1");
    }
    let mechs = mechanism_configs(&args.mechanisms, args.no_generative);
    let mode = mechs[0].generative_mode;
    let report = match run_monte_carlo(&config, &mechs, args.rounds, args.common.jobs.max(1)) {
        Ok(r) => r,
        Err(e) => return usage_error(&e.to_string()),
    };
    let rows = rows_from_report(&report, &config, mode);
    let doc = render_csv(&rows, &[]);
    match emit(args.out.as_deref(), &doc) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn apply_sweep(config: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig, String> {
    let mut swept = config.clone();
    let as_count = |v: f64| -> Result<usize, String> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(format!("{v} is not a positive integer"))
        }
    };
    match param {
        SweepParam::NumAvs => swept.num_avs = as_count(value)?,
        SweepParam::NumTrafficSims => swept.num_traffic_sims = as_count(value)?,
        SweepParam::NumTasks => swept.num_tasks = as_count(value)?,
        SweepParam::GenerativeScoreMid => {
            if !(0.0..=1.0).contains(&value) {
                return Err(format!("generative score midpoint {value} outside [0, 1]"));
            }
            swept.generative_score = swept.generative_score.with_mid(value);
        }
    }
    Ok(swept)
}

fn cmd_sweep(args: &SweepArgs) -> ExitCode {
    let config = match load_config(&args.common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if args.rounds == 0 {
        return usage_error("--rounds must be at least 1");
    }
    if args.values.is_empty() {
        return usage_error("--values must list at least one value");
    }
    let mechs = mechanism_configs(&args.mechanisms, args.no_generative);
    let mode = mechs[0].generative_mode;
    let param_name = match args.param {
        SweepParam::NumAvs => "num_avs",
        SweepParam::NumTrafficSims => "num_traffic_sims",
        SweepParam::GenerativeScoreMid => "generative_score_mid",
        SweepParam::NumTasks => "num_tasks",
    };

    let mut sections = Vec::new();
    for &value in &args.values {
        let swept = match apply_sweep(&config, args.param, value) {
            Ok(c) => c,
            Err(e) => return usage_error(&format!("--param {param_name}: {e}")),
        };
        if let Err(e) = swept.validate() {
            return usage_error(&e.to_string());
        }
        let report = match run_monte_carlo(&swept, &mechs, args.rounds, args.common.jobs.max(1)) {
            Ok(r) => r,
            Err(e) => return usage_error(&e.to_string()),
        };
        let rows: Vec<ResultRow> = rows_from_report(&report, &swept, mode);
        let metadata = vec![
            (param_name.to_string(), format!("{value}")),
            ("zipf_max".to_string(), swept.zipf_max.to_string()),
        ];
        sections.push(render_csv(&rows, &metadata));
    }
    match emit(args.out.as_deref(), &sections.concat()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn cmd_verify(args: &VerifyArgs) -> ExitCode {
    let config = match load_config(&args.common) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if args.trials == 0 {
        return usage_error("--trials must be at least 1");
    }
    let mut mech = MechanismConfig::new(args.mechanism.into());
    if args.first_price {
        mech.online_pricing = OnlinePricing::FirstPrice;
    }
    if args.unsorted {
        mech.sort_tasks = false;
    }

    let reports = match args.property {
        Property::StrategyProofness => {
            vec![verify::check_strategy_proofness(&config, &mech, args.trials, 20)]
        }
        Property::AdverseSelection => vec![verify::check_adverse_selection_free(
            &config,
            &mech,
            args.trials,
            &[0.5, 1.0, 2.0],
        )],
        Property::DeadlineOptimality => {
            vec![verify::check_deadline_optimality(&config, &mech, args.trials, 16)]
        }
        Property::Assumption1 => vec![verify::check_assumption1(&config, &mech, args.trials)],
        Property::All => verify::verify_all(&config, &mech, args.trials),
    };

    match serde_json::to_string_pretty(&reports) {
        Ok(json) => println!("{json}"),
        Err(e) => {
            eprintln!("error: serializing report: {e}");
            return ExitCode::from(EXIT_IO);
        }
    }
    if reports.iter().all(verify::PropertyReport::ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATIONS)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    }
}
