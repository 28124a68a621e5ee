//! Scenario grid over PV sizes and battery ratios, MPI-MPE curves, and the
//! avoided-transmission range/degree read off each ratio's curve.
//!
//! Ratio is battery energy per unit PV capacity (kWh per kW, i.e. hours), so
//! battery capacity scales with the PV size under test. Scenarios are
//! independent and run in parallel; failures carry their grid coordinates and
//! never abort the rest of the sweep.

use crate::dispatch::{rolling_horizon, BatterySpec, DispatchConfig};
use crate::metrics::{case1_metrics, curtailment_cap};
use crate::profiles::{pv_generation, LoadProfile, NetLoadDecomposition, PvSize, PvUnitProfile};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("curve has no points")]
    EmptyCurve,
    #[error("curve has no zero-PV reference point")]
    MissingReferencePoint,
    #[error("sweep spec invalid: {detail}")]
    InvalidSpec { detail: String },
}

/// Scenario grid; sizes are percent of community peak load.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub pv_sizes_pct: Vec<f64>,
    /// kWh of storage per kW of PV.
    pub battery_ratios: Vec<f64>,
    pub curtail_fraction: Option<f64>,
    /// When set, bisect each ratio's curve around its interaction minimum
    /// down to this size resolution and merge the extra points in.
    pub refine_to_pct: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            pv_sizes_pct: (0..=48).map(|k| (k * 10) as f64).collect(),
            battery_ratios: vec![0.0, 1.5, 2.5, 3.5, 4.5],
            curtail_fraction: None,
            refine_to_pct: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        let fail = |detail: String| Err(SweepError::InvalidSpec { detail });
        for w in self.pv_sizes_pct.windows(2) {
            if w[1] <= w[0] {
                return fail(format!("pv sizes must be strictly increasing: {w:?}"));
            }
        }
        if self.pv_sizes_pct.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return fail("pv sizes must be finite and nonnegative".into());
        }
        if self.battery_ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return fail("battery ratios must be finite and nonnegative".into());
        }
        if let Some(f) = self.curtail_fraction {
            if !(0.0..1.0).contains(&f) {
                return fail(format!("curtail fraction {f} outside [0, 1)"));
            }
        }
        if let Some(tol) = self.refine_to_pct {
            if !tol.is_finite() || tol <= 0.0 {
                return fail(format!("refinement resolution {tol} must be positive"));
            }
        }
        Ok(())
    }
}

/// One scenario's result on the MPI-MPE diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpiMpePoint {
    pub pv_size_pct: f64,
    pub battery_ratio: f64,
    pub battery_mwh: f64,
    pub mpi_mw: f64,
    pub mpe_mw: f64,
    pub grid_interaction_mw: f64,
}

/// A scenario that could not be evaluated, with its grid coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioFailure {
    pub pv_size_pct: f64,
    pub battery_ratio: f64,
    pub detail: String,
}

/// Points in deterministic order (ratio-major, sizes ascending) plus any
/// per-scenario failures.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: Vec<MpiMpePoint>,
    pub failures: Vec<ScenarioFailure>,
}

impl SweepOutcome {
    /// The curve belonging to one ratio, in size order.
    pub fn curve_for_ratio(&self, ratio: f64) -> Vec<MpiMpePoint> {
        self.points
            .iter()
            .copied()
            .filter(|p| p.battery_ratio == ratio)
            .collect()
    }
}

/// Range and degree of avoided transmission for one ratio's curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AvoidedTransmission {
    pub reference_mpi_mw: f64,
    pub range_pct: f64,
    pub degree_mw: f64,
    pub degree_pct: f64,
    pub argmin_pv_pct: f64,
}

/// Storage sized relative to installed PV: peak × size% × hours.
pub fn battery_capacity(peak_load_mw: f64, pv_size_pct: f64, ratio: f64) -> f64 {
    assert!(
        peak_load_mw >= 0.0 && pv_size_pct >= 0.0 && ratio >= 0.0,
        "battery capacity inputs must be nonnegative"
    );
    peak_load_mw * pv_size_pct / 100.0 * ratio
}

fn evaluate_scenario(
    load: &LoadProfile,
    unit_pv: &PvUnitProfile,
    size_pct: f64,
    ratio: f64,
    curtail_fraction: Option<f64>,
    cfg: &DispatchConfig,
) -> Result<MpiMpePoint, String> {
    let peak = load.peak_mw();
    let pv = pv_generation(unit_pv, PvSize::from_pct(size_pct, peak));
    let pv_energy = pv.energy_mwh();
    let decomp =
        NetLoadDecomposition::decompose(load.series(), &pv).map_err(|e| e.to_string())?;
    let decomp = match curtail_fraction {
        Some(f) if pv_energy > 0.0 => {
            let cap = curtailment_cap(&decomp, pv_energy, f).map_err(|e| e.to_string())?;
            decomp.with_sg_capped(cap.cap_mw)
        }
        _ => decomp,
    };
    let battery_mwh = battery_capacity(peak, size_pct, ratio);
    let (mpi_mw, mpe_mw) = if ratio == 0.0 && curtail_fraction.is_none() {
        let m = case1_metrics(&decomp);
        (m.mrl_mw, m.msg_mw)
    } else {
        let sol = rolling_horizon(&decomp, &BatterySpec::with_capacity(battery_mwh), cfg)
            .map_err(|e| e.to_string())?;
        (sol.mpi_mw, sol.mpe_mw)
    };
    Ok(MpiMpePoint {
        pv_size_pct: size_pct,
        battery_ratio: ratio,
        battery_mwh,
        mpi_mw,
        mpe_mw,
        grid_interaction_mw: mpi_mw.max(mpe_mw),
    })
}

/// Evaluates the whole grid. Point order is ratio-major in spec order, sizes
/// ascending, independent of worker scheduling.
pub fn run_sweep(
    load: &LoadProfile,
    unit_pv: &PvUnitProfile,
    spec: &SweepSpec,
    battery_cfg: &DispatchConfig,
) -> Result<SweepOutcome, SweepError> {
    spec.validate()?;
    battery_cfg.validate().map_err(|e| SweepError::InvalidSpec {
        detail: e.to_string(),
    })?;
    if !load.series().aligned_with(unit_pv.series()) {
        return Err(SweepError::InvalidSpec {
            detail: "load and pv profiles are misaligned".into(),
        });
    }

    let coords: Vec<(f64, f64)> = spec
        .battery_ratios
        .iter()
        .flat_map(|&r| spec.pv_sizes_pct.iter().map(move |&s| (s, r)))
        .collect();
    let results: Vec<Result<MpiMpePoint, String>> = coords
        .par_iter()
        .map(|&(s, r)| evaluate_scenario(load, unit_pv, s, r, spec.curtail_fraction, battery_cfg))
        .collect();

    let mut points = Vec::with_capacity(coords.len());
    let mut failures = Vec::new();
    for (&(s, r), res) in coords.iter().zip(results) {
        match res {
            Ok(p) => points.push(p),
            Err(detail) => failures.push(ScenarioFailure {
                pv_size_pct: s,
                battery_ratio: r,
                detail,
            }),
        }
    }

    if let Some(tol) = spec.refine_to_pct {
        let mut refined = Vec::with_capacity(points.len());
        for &ratio in &spec.battery_ratios {
            let mut curve: Vec<MpiMpePoint> = points
                .iter()
                .copied()
                .filter(|p| p.battery_ratio == ratio)
                .collect();
            refine_curve(
                load,
                unit_pv,
                ratio,
                spec.curtail_fraction,
                battery_cfg,
                tol,
                &mut curve,
                &mut failures,
            );
            refined.extend(curve);
        }
        points = refined;
    }

    Ok(SweepOutcome { points, failures })
}

/// Bisects on pv size around the curve's interaction minimum. MPI falls and
/// MPE rises in size, so the min of their max sits where the curves cross;
/// the sign of mpi - mpe steers the bisection.
#[allow(clippy::too_many_arguments)]
fn refine_curve(
    load: &LoadProfile,
    unit_pv: &PvUnitProfile,
    ratio: f64,
    curtail_fraction: Option<f64>,
    cfg: &DispatchConfig,
    tol_pct: f64,
    curve: &mut Vec<MpiMpePoint>,
    failures: &mut Vec<ScenarioFailure>,
) {
    if curve.len() < 2 {
        return;
    }
    let mut k = 0usize;
    for (i, p) in curve.iter().enumerate() {
        if p.grid_interaction_mw < curve[k].grid_interaction_mw {
            k = i;
        }
    }
    let mut lo = curve[k.saturating_sub(1)].pv_size_pct;
    let mut hi = curve[(k + 1).min(curve.len() - 1)].pv_size_pct;
    let mut extra = Vec::new();
    while hi - lo > tol_pct && extra.len() < 64 {
        let mid = 0.5 * (lo + hi);
        match evaluate_scenario(load, unit_pv, mid, ratio, curtail_fraction, cfg) {
            Ok(p) => {
                if p.mpi_mw > p.mpe_mw {
                    lo = mid;
                } else {
                    hi = mid;
                }
                extra.push(p);
            }
            Err(detail) => {
                failures.push(ScenarioFailure {
                    pv_size_pct: mid,
                    battery_ratio: ratio,
                    detail,
                });
                return;
            }
        }
    }
    curve.extend(extra);
    curve.sort_by(|a, b| a.pv_size_pct.partial_cmp(&b.pv_size_pct).unwrap());
    curve.dedup_by(|a, b| (a.pv_size_pct - b.pv_size_pct).abs() < 1e-9);
}

/// Reads reference, minimum, degree and interpolated range off one curve.
pub fn avoided_transmission(points: &[MpiMpePoint]) -> Result<AvoidedTransmission, SweepError> {
    if points.is_empty() {
        return Err(SweepError::EmptyCurve);
    }
    let mut curve: Vec<&MpiMpePoint> = points.iter().collect();
    curve.sort_by(|a, b| a.pv_size_pct.partial_cmp(&b.pv_size_pct).unwrap());
    if curve[0].pv_size_pct.abs() > 1e-9 {
        return Err(SweepError::MissingReferencePoint);
    }
    let reference = curve[0].grid_interaction_mw;
    let eps = 1e-9 * reference.abs().max(1.0);

    let mut k = 0usize;
    for (i, p) in curve.iter().enumerate() {
        if p.grid_interaction_mw < curve[k].grid_interaction_mw {
            k = i;
        }
    }
    let min_interaction = curve[k].grid_interaction_mw;
    let degree_mw = (reference - min_interaction).max(0.0);
    let degree_pct = if reference > 0.0 {
        100.0 * degree_mw / reference
    } else {
        0.0
    };

    // Last size still within the reference, then the sub-grid crossing of the
    // rising branch. The export curve is the branch that crosses; fall back to
    // raw interaction values when it does not bracket the reference.
    let i = curve
        .iter()
        .rposition(|p| p.grid_interaction_mw <= reference + eps)
        .expect("reference point qualifies");
    let range_pct = if i + 1 == curve.len() {
        curve[i].pv_size_pct
    } else {
        let (a, b) = (curve[i], curve[i + 1]);
        let (ya, yb) = if a.mpe_mw <= reference + eps && b.mpe_mw > reference + eps {
            (a.mpe_mw, b.mpe_mw)
        } else {
            (a.grid_interaction_mw, b.grid_interaction_mw)
        };
        if yb > ya + eps {
            a.pv_size_pct + (reference - ya) / (yb - ya) * (b.pv_size_pct - a.pv_size_pct)
        } else {
            a.pv_size_pct
        }
    };

    Ok(AvoidedTransmission {
        reference_mpi_mw: reference,
        range_pct,
        degree_mw,
        degree_pct,
        argmin_pv_pct: curve[k].pv_size_pct,
    })
}

/// Writes the diagram as CSV, one row per scenario point.
pub fn write_diagram_csv<W: Write>(w: &mut W, points: &[MpiMpePoint]) -> std::io::Result<()> {
    writeln!(
        w,
        "pv_size_pct,battery_ratio,battery_mwh,mpi_mw,mpe_mw,grid_interaction_mw"
    )?;
    for p in points {
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            p.pv_size_pct,
            p.battery_ratio,
            p.battery_mwh,
            p.mpi_mw,
            p.mpe_mw,
            p.grid_interaction_mw
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SynthSpec;

    fn point(size: f64, mpi: f64, mpe: f64) -> MpiMpePoint {
        MpiMpePoint {
            pv_size_pct: size,
            battery_ratio: 0.0,
            battery_mwh: 0.0,
            mpi_mw: mpi,
            mpe_mw: mpe,
            grid_interaction_mw: mpi.max(mpe),
        }
    }

    fn small(days: u32, preset: &str) -> (LoadProfile, PvUnitProfile) {
        SynthSpec {
            days,
            ..SynthSpec::preset(preset).unwrap()
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn battery_capacity_examples() {
        assert_eq!(battery_capacity(36.22, 426.0, 4.5).round(), 694.0);
        assert_eq!(battery_capacity(36.22, 387.0, 4.5).round(), 631.0);
        assert_eq!(battery_capacity(36.22, 426.0, 0.0), 0.0);
    }

    #[test]
    fn avoided_transmission_hand_example() {
        let curve = [
            point(0.0, 10.0, 0.0),
            point(100.0, 8.0, 7.0),
            point(200.0, 6.0, 12.0),
        ];
        let at = avoided_transmission(&curve).unwrap();
        assert_eq!(at.reference_mpi_mw, 10.0);
        assert!((at.degree_mw - 2.0).abs() < 1e-9);
        assert!((at.degree_pct - 20.0).abs() < 1e-9);
        assert!((at.argmin_pv_pct - 100.0).abs() < 1e-9);
        assert!((at.range_pct - 160.0).abs() < 1e-9, "range {}", at.range_pct);
    }

    #[test]
    fn flat_import_curve_interpolates_on_export() {
        // Import stays at the reference while export climbs past it.
        let curve = [
            point(0.0, 10.0, 0.0),
            point(100.0, 10.0, 4.0),
            point(200.0, 10.0, 12.0),
        ];
        let at = avoided_transmission(&curve).unwrap();
        assert_eq!(at.degree_mw, 0.0);
        assert!((at.range_pct - 175.0).abs() < 1e-9, "range {}", at.range_pct);
    }

    #[test]
    fn single_reference_point_curve() {
        let at = avoided_transmission(&[point(0.0, 10.0, 0.0)]).unwrap();
        assert_eq!(at.degree_mw, 0.0);
        assert_eq!(at.degree_pct, 0.0);
        assert_eq!(at.range_pct, 0.0);
        assert_eq!(at.argmin_pv_pct, 0.0);
    }

    #[test]
    fn curve_errors() {
        assert!(matches!(
            avoided_transmission(&[]),
            Err(SweepError::EmptyCurve)
        ));
        assert!(matches!(
            avoided_transmission(&[point(50.0, 5.0, 1.0)]),
            Err(SweepError::MissingReferencePoint)
        ));
    }

    #[test]
    fn ratio_zero_matches_case1_exactly() {
        let (load, unit) = small(7, "summer-afternoon-peak");
        let spec = SweepSpec {
            pv_sizes_pct: vec![0.0, 50.0, 100.0, 200.0],
            battery_ratios: vec![0.0],
            curtail_fraction: None,
            refine_to_pct: None,
        };
        let out = run_sweep(&load, &unit, &spec, &DispatchConfig::default()).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.points.len(), 4);
        for p in &out.points {
            let pv = pv_generation(&unit, PvSize::from_pct(p.pv_size_pct, load.peak_mw()));
            let d = NetLoadDecomposition::decompose(load.series(), &pv).unwrap();
            let m = case1_metrics(&d);
            assert_eq!(p.mpi_mw, m.mrl_mw);
            assert_eq!(p.mpe_mw, m.msg_mw);
            assert_eq!(p.battery_mwh, 0.0);
        }
        // Zero-size point doubles as the reference: no PV, no export.
        assert_eq!(out.points[0].mpi_mw, load.peak_mw());
        assert_eq!(out.points[0].mpe_mw, 0.0);
        // Pointwise dominance in PV size for the no-battery case.
        for w in out.points.windows(2) {
            assert!(w[1].mpi_mw <= w[0].mpi_mw + 1e-9);
            assert!(w[1].mpe_mw >= w[0].mpe_mw - 1e-9);
        }
    }

    #[test]
    fn point_order_is_ratio_major() {
        let (load, unit) = small(2, "summer-afternoon-peak");
        let spec = SweepSpec {
            pv_sizes_pct: vec![0.0, 120.0],
            battery_ratios: vec![0.0, 1.5],
            curtail_fraction: None,
            refine_to_pct: None,
        };
        let out = run_sweep(&load, &unit, &spec, &DispatchConfig::default()).unwrap();
        let got: Vec<(f64, f64)> = out
            .points
            .iter()
            .map(|p| (p.battery_ratio, p.pv_size_pct))
            .collect();
        assert_eq!(
            got,
            vec![(0.0, 0.0), (0.0, 120.0), (1.5, 0.0), (1.5, 120.0)]
        );
    }

    #[test]
    fn storage_never_hurts_single_window() {
        let (load, unit) = small(2, "summer-afternoon-peak");
        let spec = SweepSpec {
            pv_sizes_pct: vec![0.0, 150.0],
            battery_ratios: vec![0.0, 2.0],
            curtail_fraction: None,
            refine_to_pct: None,
        };
        let out = run_sweep(&load, &unit, &spec, &DispatchConfig::default()).unwrap();
        assert!(out.failures.is_empty());
        let without = out.curve_for_ratio(0.0);
        let with = out.curve_for_ratio(2.0);
        for (a, b) in without.iter().zip(&with) {
            assert!(b.grid_interaction_mw <= a.grid_interaction_mw + 1e-7);
        }
    }

    #[test]
    fn curtailment_caps_export_only() {
        let (load, unit) = small(7, "summer-afternoon-peak");
        let base = SweepSpec {
            pv_sizes_pct: vec![0.0, 100.0, 250.0],
            battery_ratios: vec![0.0],
            curtail_fraction: None,
            refine_to_pct: None,
        };
        let capped = SweepSpec {
            curtail_fraction: Some(0.05),
            ..base.clone()
        };
        let a = run_sweep(&load, &unit, &base, &DispatchConfig::default()).unwrap();
        let b = run_sweep(&load, &unit, &capped, &DispatchConfig::default()).unwrap();
        assert!(b.failures.is_empty());
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert!((pa.mpi_mw - pb.mpi_mw).abs() <= 1e-9, "import must not move");
            assert!(pb.mpe_mw <= pa.mpe_mw + 1e-9, "export must not grow");
        }
        let at_a = avoided_transmission(&a.curve_for_ratio(0.0)).unwrap();
        let at_b = avoided_transmission(&b.curve_for_ratio(0.0)).unwrap();
        assert!(at_b.range_pct >= at_a.range_pct - 1e-9);
    }

    #[test]
    fn failures_carry_coordinates_without_aborting() {
        let (load, unit) = small(2, "summer-afternoon-peak");
        let spec = SweepSpec {
            pv_sizes_pct: vec![0.0, 100.0],
            battery_ratios: vec![1.5],
            curtail_fraction: None,
            refine_to_pct: None,
        };
        // Control horizon not a multiple of dt: every dispatch fails.
        let bad_cfg = DispatchConfig {
            control_horizon_h: 5.3,
            ..DispatchConfig::default()
        };
        let out = run_sweep(&load, &unit, &spec, &bad_cfg).unwrap();
        assert!(out.points.is_empty());
        assert_eq!(out.failures.len(), 2);
        assert_eq!(out.failures[0].pv_size_pct, 0.0);
        assert_eq!(out.failures[1].pv_size_pct, 100.0);
        assert!(out.failures[0].detail.contains("not a multiple"));
    }

    #[test]
    fn refinement_adds_subgrid_points() {
        let (load, unit) = small(7, "summer-afternoon-peak");
        let coarse_spec = SweepSpec {
            pv_sizes_pct: vec![0.0, 100.0, 200.0, 300.0, 400.0],
            battery_ratios: vec![0.0],
            curtail_fraction: None,
            refine_to_pct: None,
        };
        let fine_spec = SweepSpec {
            refine_to_pct: Some(5.0),
            ..coarse_spec.clone()
        };
        let coarse = run_sweep(&load, &unit, &coarse_spec, &DispatchConfig::default()).unwrap();
        let fine = run_sweep(&load, &unit, &fine_spec, &DispatchConfig::default()).unwrap();
        assert!(fine.points.len() > coarse.points.len());
        for w in fine.points.windows(2) {
            assert!(w[1].pv_size_pct > w[0].pv_size_pct);
        }
        let min_coarse = coarse
            .points
            .iter()
            .map(|p| p.grid_interaction_mw)
            .fold(f64::INFINITY, f64::min);
        let min_fine = fine
            .points
            .iter()
            .map(|p| p.grid_interaction_mw)
            .fold(f64::INFINITY, f64::min);
        assert!(min_fine <= min_coarse + 1e-9);
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::default();
        assert_eq!(spec.pv_sizes_pct.len(), 49);
        assert_eq!(spec.pv_sizes_pct[48], 480.0);
        assert_eq!(spec.battery_ratios, vec![0.0, 1.5, 2.5, 3.5, 4.5]);
        spec.validate().unwrap();

        spec.pv_sizes_pct = vec![0.0, 50.0, 50.0];
        assert!(spec.validate().is_err());
        spec.pv_sizes_pct = vec![0.0, 50.0];
        spec.curtail_fraction = Some(1.0);
        assert!(spec.validate().is_err());
        spec.curtail_fraction = None;
        spec.refine_to_pct = Some(0.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn diagram_csv_format() {
        let mut buf = Vec::new();
        write_diagram_csv(&mut buf, &[point(100.0, 8.0, 7.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "pv_size_pct,battery_ratio,battery_mwh,mpi_mw,mpe_mw,grid_interaction_mw\n\
             100.000000,0.000000,0.000000,8.000000,7.000000,8.000000\n"
        );
    }
}
