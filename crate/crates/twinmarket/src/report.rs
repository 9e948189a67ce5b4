//! CSV result rows and atomic file output.
//!
//! The column order is frozen — downstream plotting scripts key on it — and
//! files are written to a temporary sibling then renamed, so a failed run
//! never leaves a partial CSV behind.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::domain::{GenerativeMode, MarketOutcome};
use crate::engine::{RunReport, ScenarioConfig};

/// Frozen CSV header.
pub const CSV_HEADER: &str = "mechanism,seed,round,num_avs,num_sims,num_tasks,generative_mode,alpha,winner_av,winner_sim,dt_payment,sim_payment,s_dt,s_traffic,s_driving,total";

/// One output row: a single mechanism's outcome in a single round.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mechanism: String,
    pub seed: u64,
    pub round: u64,
    pub num_avs: usize,
    pub num_sims: usize,
    pub num_tasks: usize,
    pub generative_mode: GenerativeMode,
    pub alpha: f64,
    pub winner_av: Option<usize>,
    pub winner_sim: Option<usize>,
    pub dt_payment: f64,
    pub sim_payment: f64,
    pub s_dt: f64,
    pub s_traffic: f64,
    pub s_driving: f64,
    pub total: f64,
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl ResultRow {
    pub fn from_outcome(
        mechanism: &str,
        config: &ScenarioConfig,
        generative_mode: GenerativeMode,
        round: u64,
        outcome: &MarketOutcome,
    ) -> Self {
        ResultRow {
            mechanism: mechanism.to_string(),
            seed: config.master_seed,
            round,
            num_avs: config.num_avs,
            num_sims: config.num_traffic_sims + 1,
            num_tasks: config.num_tasks,
            generative_mode,
            alpha: outcome.alpha_used,
            winner_av: outcome.winner_av,
            winner_sim: outcome.winner_sim,
            dt_payment: outcome.dt_payment,
            sim_payment: outcome.sim_payment,
            s_dt: outcome.s_dt,
            s_traffic: outcome.s_traffic,
            s_driving: outcome.s_driving,
            total: outcome.total,
        }
    }

    pub fn to_csv(&self) -> String {
        let mode = match self.generative_mode {
            GenerativeMode::Generative => "generative",
            GenerativeMode::Baseline => "baseline",
        };
        let mut line = String::new();
        write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mechanism,
            self.seed,
            self.round,
            self.num_avs,
            self.num_sims,
            self.num_tasks,
            mode,
            self.alpha,
            opt(self.winner_av),
            opt(self.winner_sim),
            self.dt_payment,
            self.sim_payment,
            self.s_dt,
            self.s_traffic,
            self.s_driving,
            self.total
        )
        .expect("write to String never fails");
        line
    }
}

/// Rows for every (mechanism, round) pair of a finished run, in round-major
/// order matching the report.
pub fn rows_from_report(
    report: &RunReport,
    config: &ScenarioConfig,
    generative_mode: GenerativeMode,
) -> Vec<ResultRow> {
    report
        .rounds
        .iter()
        .flat_map(|round| {
            round.outcomes.iter().map(|(mechanism, outcome)| {
                ResultRow::from_outcome(mechanism, config, generative_mode, round.round, outcome)
            })
        })
        .collect()
}

/// Renders a full CSV document: header, optional `# key=value` metadata
/// comment lines, then rows.
pub fn render_csv(rows: &[ResultRow], metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (key, value) in metadata {
        out.push_str(&format!("# {key}={value}\n"));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Writes `content` atomically: a temporary file in the destination's
/// directory is flushed and renamed over the target, so readers observe
/// either the old file or the complete new one, never a partial write.
pub fn write_atomic(path: &Path, content: &str) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    // Best-effort durability for the rename itself.
    if let Some(d) = dir {
        let _ = fs::File::open(d).and_then(|f| f.sync_all());
    }
    Ok(())
}
