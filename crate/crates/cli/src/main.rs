//! Batch CLI over the analysis library: Case-1 metrics, battery dispatch,
//! PV/battery sweeps and synthetic profile generation. Every command writes
//! its outputs plus a manifest into one directory; reruns with the same
//! inputs are byte-identical.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "mpimpe", version, about = "Avoided-transmission analysis for community PV with battery storage")]
pub struct Cli {
    /// Emit diagnostics on stderr as JSON lines instead of plain text.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// No-storage analysis: residual-load/surplus maxima and duration curve.
    Case1(Case1Args),
    /// Rolling-horizon battery dispatch for one PV size and battery ratio.
    Dispatch(DispatchArgs),
    /// Scenario grid over PV sizes and battery ratios with summary metrics.
    Sweep(SweepArgs),
    /// Generate synthetic load and per-unit PV profiles from a preset.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct InputArgs {
    /// Community load CSV: `timestamp,value` rows in MW.
    pub load: PathBuf,
    /// Per-unit PV CSV: `timestamp,value` rows per MW installed.
    pub pv_unit: PathBuf,
}

#[derive(Args)]
pub struct OutArgs {
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct Case1Args {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// PV capacity as percent of the community peak load.
    #[arg(long, default_value_t = 100.0)]
    pub pv_size_pct: f64,
    /// Cap surplus so the discarded energy stays within this fraction of
    /// annual PV energy; the flag alone means 0.05.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.05")]
    pub curtail_fraction: Option<f64>,
}

#[derive(Args)]
pub struct DispatchArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// PV capacity as percent of the community peak load.
    #[arg(long, default_value_t = 100.0)]
    pub pv_size_pct: f64,
    /// Battery energy per unit PV capacity, kWh per kW.
    #[arg(long, default_value_t = 4.5)]
    pub battery_ratio: f64,
    /// Reward weight on battery discharge serving local load.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda1: f64,
    /// Penalty weight on battery discharge into the grid.
    #[arg(long, default_value_t = 1e-6)]
    pub lambda2: f64,
    /// Hours committed per rolling-horizon step.
    #[arg(long, default_value_t = 24.0)]
    pub control_horizon_h: f64,
    /// Lookahead hours beyond the control block.
    #[arg(long, default_value_t = 144.0)]
    pub prediction_horizon_h: f64,
    /// Clock hour at which control blocks begin.
    #[arg(long, default_value_t = 9.0)]
    pub anchor_hour: f64,
    /// Lower state-of-charge bound as a fraction of capacity.
    #[arg(long, default_value_t = 0.1)]
    pub soc_min_frac: f64,
    /// Upper state-of-charge bound as a fraction of capacity.
    #[arg(long, default_value_t = 0.9)]
    pub soc_max_frac: f64,
    /// Initial state of charge as a fraction of capacity.
    #[arg(long, default_value_t = 0.5)]
    pub initial_soc_frac: f64,
    /// Cap surplus before dispatch; the flag alone means 0.05.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.05")]
    pub curtail_fraction: Option<f64>,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// PV sizes in percent: `start:end:step` or a comma list.
    #[arg(long, default_value = "0:480:10", value_parser = commands::parse_sizes)]
    pub sizes: std::vec::Vec<f64>,
    /// Battery ratios in kWh per kW, comma separated.
    #[arg(long, default_value = "0,1.5,2.5,3.5,4.5", value_parser = commands::parse_list)]
    pub ratios: std::vec::Vec<f64>,
    /// Cap surplus before dispatch; the flag alone means 0.05.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.05")]
    pub curtail_fraction: Option<f64>,
    /// Refine each curve's interaction minimum down to this size resolution.
    #[arg(long)]
    pub refine_to_pct: Option<f64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "MPIMPE_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Reward weight on battery discharge serving local load.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda1: f64,
    /// Penalty weight on battery discharge into the grid.
    #[arg(long, default_value_t = 1e-6)]
    pub lambda2: f64,
    /// Hours committed per rolling-horizon step.
    #[arg(long, default_value_t = 24.0)]
    pub control_horizon_h: f64,
    /// Lookahead hours beyond the control block.
    #[arg(long, default_value_t = 144.0)]
    pub prediction_horizon_h: f64,
    /// Clock hour at which control blocks begin.
    #[arg(long, default_value_t = 9.0)]
    pub anchor_hour: f64,
}

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Named profile family: winter-evening-peak or summer-afternoon-peak.
    #[arg(long, default_value = "winter-evening-peak")]
    pub preset: String,
    /// Override the preset's day count.
    #[arg(long)]
    pub days: Option<u32>,
    /// Override the preset's step length in hours.
    #[arg(long)]
    pub dt_hours: Option<f64>,
    /// Override the preset's cloud seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let json_errors = cli.json_errors;
    if let Err(e) = commands::run(cli) {
        if json_errors {
            eprintln!(
                "{}",
                serde_json::json!({ "code": e.code, "error": e.message })
            );
        } else {
            eprintln!("error: {}", e.message);
        }
        std::process::exit(e.code);
    }
}
