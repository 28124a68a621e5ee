//! Command implementations. Each loads its inputs, runs the library
//! pipeline, and writes results plus a manifest into the output directory.
//! Exit codes: 2 input validation, 3 solver failure, 4 sweep with no
//! surviving scenario; anything else unexpected is 1.

use crate::manifest::RunManifest;
use crate::{Case1Args, Cli, Command, DispatchArgs, InputArgs, SweepArgs, SynthArgs};
use mpimpe::dispatch::{self, BatterySpec, DispatchConfig, DispatchError};
use mpimpe::metrics;
use mpimpe::profiles::{
    self, CsvSchema, LoadProfile, NetLoadDecomposition, ProfileError, PvSize, PvUnitProfile,
};
use mpimpe::sweep::{self, ScenarioFailure, SweepSpec};
use mpimpe::synth::SynthSpec;
use serde::Serialize;
use std::fs;
use std::path::Path;

pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<DispatchError> for CliError {
    fn from(e: DispatchError) -> Self {
        let code = match e {
            DispatchError::WindowSolve { .. } => 3,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Case1(a) => cmd_case1(a),
        Command::Dispatch(a) => cmd_dispatch(a),
        Command::Sweep(a) => cmd_sweep(a, cli.json_errors),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// `start:end:step` inclusive range, or a comma list.
pub fn parse_sizes(s: &str) -> Result<Vec<f64>, String> {
    if !s.contains(':') {
        return parse_list(s);
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:end:step, got {s:?}"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(format!("range {s:?} must ascend with positive step"));
    }
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let x = start + f64::from(k) * step;
        if x > end + 1e-9 {
            break;
        }
        out.push(x);
        k += 1;
    }
    Ok(out)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number {p:?}: {e}"))
        })
        .collect()
}

/// Clamp serialized values to six decimals; below every tolerance in use.
fn round6(v: f64) -> f64 {
    ((v * 1e6).round() + 0.0) / 1e6
}

fn load_inputs(args: &InputArgs) -> Result<(LoadProfile, PvUnitProfile), CliError> {
    let schema = CsvSchema::default();
    let load = profiles::ingest_csv_auto(&args.load, &schema)
        .and_then(LoadProfile::new)
        .map_err(|e| CliError::input(format!("{}: {e}", args.load.display())))?;
    let unit = profiles::ingest_csv_auto(&args.pv_unit, &schema)
        .and_then(PvUnitProfile::new)
        .map_err(|e| CliError::input(format!("{}: {e}", args.pv_unit.display())))?;
    Ok((load, unit))
}

#[derive(Serialize)]
struct CurtailJson {
    fraction: f64,
    cap_mw: f64,
    curtailed_energy_mwh: f64,
}

/// Applies the static feed-in cap when requested. With zero PV energy there
/// is nothing to curtail and the cap degenerates to zero.
fn apply_curtailment(
    decomp: NetLoadDecomposition,
    pv_energy_mwh: f64,
    fraction: Option<f64>,
) -> Result<(NetLoadDecomposition, Option<CurtailJson>), CliError> {
    match fraction {
        None => Ok((decomp, None)),
        Some(f) if pv_energy_mwh > 0.0 => {
            let r = metrics::curtailment_cap(&decomp, pv_energy_mwh, f)
                .map_err(|e| CliError::input(e.to_string()))?;
            let capped = decomp.with_sg_capped(r.cap_mw);
            Ok((
                capped,
                Some(CurtailJson {
                    fraction: f,
                    cap_mw: round6(r.cap_mw),
                    curtailed_energy_mwh: round6(r.curtailed_energy_mwh),
                }),
            ))
        }
        Some(f) => {
            if !(0.0..1.0).contains(&f) {
                return Err(CliError::input(format!(
                    "curtail fraction {f} outside [0, 1)"
                )));
            }
            Ok((
                decomp,
                Some(CurtailJson {
                    fraction: f,
                    cap_mw: 0.0,
                    curtailed_energy_mwh: 0.0,
                }),
            ))
        }
    }
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(dir.join(name), bytes).map_err(CliError::io)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })?;
    text.push('\n');
    write_bytes(dir, name, text.as_bytes())
}

#[derive(Serialize)]
struct Case1Json {
    peak_load_mw: f64,
    annual_load_mwh: f64,
    pv_size_pct: f64,
    pv_nominal_mw: f64,
    pv_annual_mwh: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_size_pct: Option<f64>,
    mrl_mw: f64,
    msg_mw: f64,
    mrl_time_index: usize,
    msg_time_index: usize,
    grid_interaction_mw: f64,
    curtailment: Option<CurtailJson>,
}

fn cmd_case1(a: Case1Args) -> Result<(), CliError> {
    if a.pv_size_pct < 0.0 {
        return Err(CliError::input("pv size must be nonnegative"));
    }
    let (load, unit) = load_inputs(&a.inputs)?;
    let size = PvSize::from_pct(a.pv_size_pct, load.peak_mw());
    let pv = profiles::pv_generation(&unit, size);
    let pv_energy = pv.energy_mwh();
    let decomp = NetLoadDecomposition::decompose(load.series(), &pv)?;
    let (decomp, curtailment) = apply_curtailment(decomp, pv_energy, a.curtail_fraction)?;
    let m = metrics::case1_metrics(&decomp);
    let curve = metrics::duration_curve(&decomp);

    let json = Case1Json {
        peak_load_mw: round6(load.peak_mw()),
        annual_load_mwh: round6(load.annual_energy_mwh()),
        pv_size_pct: a.pv_size_pct,
        pv_nominal_mw: round6(size.nominal_mw),
        pv_annual_mwh: round6(pv_energy),
        energy_size_pct: profiles::energy_size_pct(&load, &unit).ok().map(round6),
        mrl_mw: round6(m.mrl_mw),
        msg_mw: round6(m.msg_mw),
        mrl_time_index: m.mrl_time_index,
        msg_time_index: m.msg_time_index,
        grid_interaction_mw: round6(m.mrl_mw.max(m.msg_mw)),
        curtailment,
    };

    let out = &a.out.out_dir;
    fs::create_dir_all(out).map_err(CliError::io)?;
    write_json(out, "case1.json", &json)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).map_err(CliError::io)?;
    write_bytes(out, "duration_curve.csv", &buf)?;

    let mut man = RunManifest::new(
        "case1",
        serde_json::json!({
            "pv_size_pct": a.pv_size_pct,
            "curtail_fraction": a.curtail_fraction,
        }),
    );
    man.add_input(&a.inputs.load).map_err(CliError::io)?;
    man.add_input(&a.inputs.pv_unit).map_err(CliError::io)?;
    man.outputs = vec!["case1.json".into(), "duration_curve.csv".into()];
    write_bytes(out, "manifest.json", man.render().as_bytes())
}

#[derive(Serialize)]
struct WindowJson {
    start_index: usize,
    committed_len: usize,
    p_max_mw: f64,
}

#[derive(Serialize)]
struct DispatchJson {
    peak_load_mw: f64,
    pv_size_pct: f64,
    pv_nominal_mw: f64,
    battery_ratio: f64,
    battery_mwh: f64,
    mpi_mw: f64,
    mpe_mw: f64,
    grid_interaction_mw: f64,
    windows: Vec<WindowJson>,
    curtailment: Option<CurtailJson>,
}

fn cmd_dispatch(a: DispatchArgs) -> Result<(), CliError> {
    if a.pv_size_pct < 0.0 || a.battery_ratio < 0.0 {
        return Err(CliError::input(
            "pv size and battery ratio must be nonnegative",
        ));
    }
    let (load, unit) = load_inputs(&a.inputs)?;
    let size = PvSize::from_pct(a.pv_size_pct, load.peak_mw());
    let pv = profiles::pv_generation(&unit, size);
    let pv_energy = pv.energy_mwh();
    let decomp = NetLoadDecomposition::decompose(load.series(), &pv)?;
    let (decomp, curtailment) = apply_curtailment(decomp, pv_energy, a.curtail_fraction)?;

    let battery_mwh = sweep::battery_capacity(load.peak_mw(), a.pv_size_pct, a.battery_ratio);
    let battery = BatterySpec {
        capacity_mwh: battery_mwh,
        soc_min_frac: a.soc_min_frac,
        soc_max_frac: a.soc_max_frac,
        initial_soc_frac: a.initial_soc_frac,
    };
    let cfg = DispatchConfig {
        lambda1: a.lambda1,
        lambda2: a.lambda2,
        control_horizon_h: a.control_horizon_h,
        prediction_horizon_h: a.prediction_horizon_h,
        window_anchor_hour: a.anchor_hour,
    };
    let sol = dispatch::rolling_horizon(&decomp, &battery, &cfg)?;

    let json = DispatchJson {
        peak_load_mw: round6(load.peak_mw()),
        pv_size_pct: a.pv_size_pct,
        pv_nominal_mw: round6(size.nominal_mw),
        battery_ratio: a.battery_ratio,
        battery_mwh: round6(battery_mwh),
        mpi_mw: round6(sol.mpi_mw),
        mpe_mw: round6(sol.mpe_mw),
        grid_interaction_mw: round6(sol.mpi_mw.max(sol.mpe_mw)),
        windows: sol
            .windows
            .iter()
            .map(|w| WindowJson {
                start_index: w.start_index,
                committed_len: w.committed_len,
                p_max_mw: round6(w.p_max),
            })
            .collect(),
        curtailment,
    };

    let out = &a.out.out_dir;
    fs::create_dir_all(out).map_err(CliError::io)?;
    let mut buf = Vec::new();
    dispatch::write_dispatch_csv(&mut buf, &decomp, &sol).map_err(CliError::io)?;
    write_bytes(out, "dispatch.csv", &buf)?;
    write_json(out, "summary.json", &json)?;

    let mut man = RunManifest::new(
        "dispatch",
        serde_json::json!({
            "pv_size_pct": a.pv_size_pct,
            "battery_ratio": a.battery_ratio,
            "lambda1": a.lambda1,
            "lambda2": a.lambda2,
            "control_horizon_h": a.control_horizon_h,
            "prediction_horizon_h": a.prediction_horizon_h,
            "anchor_hour": a.anchor_hour,
            "soc_min_frac": a.soc_min_frac,
            "soc_max_frac": a.soc_max_frac,
            "initial_soc_frac": a.initial_soc_frac,
            "curtail_fraction": a.curtail_fraction,
        }),
    );
    man.add_input(&a.inputs.load).map_err(CliError::io)?;
    man.add_input(&a.inputs.pv_unit).map_err(CliError::io)?;
    man.outputs = vec!["dispatch.csv".into(), "summary.json".into()];
    write_bytes(out, "manifest.json", man.render().as_bytes())
}

#[derive(Serialize)]
struct RatioCurveJson {
    battery_ratio: f64,
    reference_mpi_mw: f64,
    range_pct: f64,
    degree_mw: f64,
    degree_pct: f64,
    argmin_pv_pct: f64,
}

#[derive(Serialize)]
struct CurveErrorJson {
    battery_ratio: f64,
    detail: String,
}

#[derive(Serialize)]
struct SweepJson {
    curves: Vec<RatioCurveJson>,
    curve_errors: Vec<CurveErrorJson>,
    failures: Vec<ScenarioFailure>,
}

fn cmd_sweep(a: SweepArgs, json_errors: bool) -> Result<(), CliError> {
    if a.jobs > 0 {
        // First global-pool configuration wins; later calls are no-ops.
        rayon::ThreadPoolBuilder::new()
            .num_threads(a.jobs)
            .build_global()
            .ok();
    }
    let (load, unit) = load_inputs(&a.inputs)?;
    let spec = SweepSpec {
        pv_sizes_pct: a.sizes.clone(),
        battery_ratios: a.ratios.clone(),
        curtail_fraction: a.curtail_fraction,
        refine_to_pct: a.refine_to_pct,
    };
    let cfg = DispatchConfig {
        lambda1: a.lambda1,
        lambda2: a.lambda2,
        control_horizon_h: a.control_horizon_h,
        prediction_horizon_h: a.prediction_horizon_h,
        window_anchor_hour: a.anchor_hour,
    };
    let outcome = sweep::run_sweep(&load, &unit, &spec, &cfg)
        .map_err(|e| CliError::input(e.to_string()))?;

    for p in &outcome.points {
        if json_errors {
            eprintln!(
                "{}",
                serde_json::json!({ "scenario": { "pv_size_pct": p.pv_size_pct, "battery_ratio": p.battery_ratio, "grid_interaction_mw": p.grid_interaction_mw } })
            );
        } else {
            eprintln!(
                "done pv {:7.2} % ratio {:3.1}: interaction {:.3} MW",
                p.pv_size_pct, p.battery_ratio, p.grid_interaction_mw
            );
        }
    }
    for f in &outcome.failures {
        if json_errors {
            eprintln!(
                "{}",
                serde_json::json!({ "scenario_failure": { "pv_size_pct": f.pv_size_pct, "battery_ratio": f.battery_ratio, "detail": f.detail } })
            );
        } else {
            eprintln!(
                "failed pv {:7.2} % ratio {:3.1}: {}",
                f.pv_size_pct, f.battery_ratio, f.detail
            );
        }
    }

    let mut curves = Vec::new();
    let mut curve_errors = Vec::new();
    for &r in &spec.battery_ratios {
        match sweep::avoided_transmission(&outcome.curve_for_ratio(r)) {
            Ok(at) => curves.push(RatioCurveJson {
                battery_ratio: r,
                reference_mpi_mw: round6(at.reference_mpi_mw),
                range_pct: round6(at.range_pct),
                degree_mw: round6(at.degree_mw),
                degree_pct: round6(at.degree_pct),
                argmin_pv_pct: round6(at.argmin_pv_pct),
            }),
            Err(e) => curve_errors.push(CurveErrorJson {
                battery_ratio: r,
                detail: e.to_string(),
            }),
        }
    }
    let json = SweepJson {
        curves,
        curve_errors,
        failures: outcome.failures.clone(),
    };

    let out = &a.out.out_dir;
    fs::create_dir_all(out).map_err(CliError::io)?;
    let mut buf = Vec::new();
    sweep::write_diagram_csv(&mut buf, &outcome.points).map_err(CliError::io)?;
    write_bytes(out, "diagram.csv", &buf)?;
    write_json(out, "avoided_transmission.json", &json)?;

    let mut man = RunManifest::new(
        "sweep",
        serde_json::json!({
            "sizes": a.sizes,
            "ratios": a.ratios,
            "curtail_fraction": a.curtail_fraction,
            "refine_to_pct": a.refine_to_pct,
            "lambda1": a.lambda1,
            "lambda2": a.lambda2,
            "control_horizon_h": a.control_horizon_h,
            "prediction_horizon_h": a.prediction_horizon_h,
            "anchor_hour": a.anchor_hour,
        }),
    );
    man.add_input(&a.inputs.load).map_err(CliError::io)?;
    man.add_input(&a.inputs.pv_unit).map_err(CliError::io)?;
    man.outputs = vec!["diagram.csv".into(), "avoided_transmission.json".into()];
    write_bytes(out, "manifest.json", man.render().as_bytes())?;

    if outcome.points.is_empty() && !outcome.failures.is_empty() {
        return Err(CliError {
            code: 4,
            message: format!(
                "all {} scenarios failed; first failure: {}",
                outcome.failures.len(),
                outcome.failures[0].detail
            ),
        });
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let mut spec = SynthSpec::preset(&a.preset).ok_or_else(|| {
        CliError::input(format!(
            "unknown preset {:?}; available: {}",
            a.preset,
            SynthSpec::preset_names().join(", ")
        ))
    })?;
    if let Some(d) = a.days {
        spec.days = d;
    }
    if let Some(dt) = a.dt_hours {
        spec.dt_hours = dt;
    }
    if let Some(s) = a.seed {
        spec.cloud_seed = s;
    }
    let (load, unit) = spec.generate().map_err(|e| CliError::input(e.to_string()))?;

    let out = &a.out.out_dir;
    fs::create_dir_all(out).map_err(CliError::io)?;
    let mut buf = Vec::new();
    profiles::write_csv(&mut buf, load.series()).map_err(CliError::io)?;
    write_bytes(out, "load.csv", &buf)?;
    buf = Vec::new();
    profiles::write_csv(&mut buf, unit.series()).map_err(CliError::io)?;
    write_bytes(out, "pv_unit.csv", &buf)?;

    let mut man = RunManifest::new(
        "synth",
        serde_json::json!({
            "preset": a.preset,
            "days": spec.days,
            "dt_hours": spec.dt_hours,
            "load_base_mw": spec.load_base_mw,
            "load_daily_amp_mw": spec.load_daily_amp_mw,
            "load_seasonal_amp_mw": spec.load_seasonal_amp_mw,
            "load_peak_hour": spec.load_peak_hour,
            "pv_clearsky_peak_pu": spec.pv_clearsky_peak_pu,
            "pv_seasonal_amp_pu": spec.pv_seasonal_amp_pu,
            "cloud_seed": spec.cloud_seed,
        }),
    );
    man.outputs = vec!["load.csv".into(), "pv_unit.csv".into()];
    write_bytes(out, "manifest.json", man.render().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_range_parsing() {
        assert_eq!(parse_sizes("0:30:10").unwrap(), vec![0.0, 10.0, 20.0, 30.0]);
        assert_eq!(parse_sizes("0,15,40").unwrap(), vec![0.0, 15.0, 40.0]);
        assert_eq!(parse_sizes("0:480:10").unwrap().len(), 49);
        assert_eq!(parse_sizes("5:5:1").unwrap(), vec![5.0]);
        assert!(parse_sizes("10:0:5").is_err());
        assert!(parse_sizes("0:10:0").is_err());
        assert!(parse_sizes("0:10").is_err());
        assert!(parse_sizes("a,b").is_err());
    }

    #[test]
    fn ratio_list_parsing() {
        assert_eq!(parse_list("0,1.5,4.5").unwrap(), vec![0.0, 1.5, 4.5]);
        assert_eq!(parse_list(" 2 ").unwrap(), vec![2.0]);
        assert!(parse_list("").is_err());
    }

    #[test]
    fn rounding_to_six_decimals() {
        assert_eq!(round6(1.23456789), 1.234568);
        assert_eq!(round6(-1.23456749), -1.234567);
        assert_eq!(round6(0.0), 0.0);
        assert!(round6(-1e-9).to_bits() == 0.0f64.to_bits());
    }
}
