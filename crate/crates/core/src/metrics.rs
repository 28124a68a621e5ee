//! Storage-free analysis of a net-load decomposition: annual maxima, ordered
//! duration curves, and the static feed-in curtailment cap.

use crate::profiles::NetLoadDecomposition;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("curtailment fraction {fraction} outside [0, 1)")]
    InvalidFraction { fraction: f64 },
    #[error("annual PV energy must be positive, got {energy_mwh} MWh")]
    NonPositivePvEnergy { energy_mwh: f64 },
}

/// Annual maximum residual load and surplus generation with the step indices
/// of their first occurrence. Without storage these maxima are the maximum
/// power import and export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Case1Metrics {
    pub mrl_mw: f64,
    pub msg_mw: f64,
    pub mrl_time_index: usize,
    pub msg_time_index: usize,
}

pub fn case1_metrics(decomp: &NetLoadDecomposition) -> Case1Metrics {
    let (mrl_time_index, mrl_mw) = first_max(decomp.rl().values());
    let (msg_time_index, msg_mw) = first_max(decomp.sg().values());
    Case1Metrics {
        mrl_mw,
        msg_mw,
        mrl_time_index,
        msg_time_index,
    }
}

fn first_max(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Net load sorted descending; spans from the annual maximum residual load
/// down to minus the annual maximum surplus.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationCurve {
    sorted_net_load: Vec<f64>,
    dt_hours: f64,
}

impl DurationCurve {
    pub fn values(&self) -> &[f64] {
        &self.sorted_net_load
    }

    pub fn dt_hours(&self) -> f64 {
        self.dt_hours
    }

    /// Writes `rank,net_load_mw` rows, rank 1-based.
    pub fn write_csv<W: Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writeln!(writer, "rank,net_load_mw")?;
        for (i, v) in self.sorted_net_load.iter().enumerate() {
            writeln!(writer, "{},{:.6}", i + 1, v)?;
        }
        Ok(())
    }
}

pub fn duration_curve(decomp: &NetLoadDecomposition) -> DurationCurve {
    let mut net: Vec<f64> = (0..decomp.len()).map(|t| decomp.net(t)).collect();
    // Finite by construction, so total order exists.
    net.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    DurationCurve {
        sorted_net_load: net,
        dt_hours: decomp.dt_hours(),
    }
}

/// Static feed-in cap sized against an annual curtailment budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurtailmentResult {
    pub cap_mw: f64,
    pub curtailed_energy_mwh: f64,
    pub fraction_of_pv_energy: f64,
}

const CAP_TOLERANCE_MW: f64 = 1e-6;

/// Smallest cap such that the surplus energy clipped above it stays within
/// `fraction` of the annual PV generation energy. The budget is referenced to
/// PV generation (plant output), not to surplus or demand; pass a different
/// basis energy to change that. Bisection on [0, MSG] to 1e-6 MW; the `<=`
/// budget test means ties resolve toward the smaller cap.
pub fn curtailment_cap(
    decomp: &NetLoadDecomposition,
    pv_annual_energy_mwh: f64,
    fraction: f64,
) -> Result<CurtailmentResult, MetricsError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(MetricsError::InvalidFraction { fraction });
    }
    if pv_annual_energy_mwh <= 0.0 {
        return Err(MetricsError::NonPositivePvEnergy {
            energy_mwh: pv_annual_energy_mwh,
        });
    }
    let sg = decomp.sg().values();
    let dt = decomp.dt_hours();
    let msg = sg.iter().cloned().fold(0.0, f64::max);
    let allowed = fraction * pv_annual_energy_mwh;
    let curtailed = |cap: f64| sg.iter().map(|v| (v - cap).max(0.0)).sum::<f64>() * dt;

    let cap = if curtailed(0.0) <= allowed {
        0.0
    } else {
        // Invariant: curtailed(lo) > allowed >= curtailed(hi).
        let mut lo = 0.0;
        let mut hi = msg;
        while hi - lo > CAP_TOLERANCE_MW {
            let mid = 0.5 * (lo + hi);
            if curtailed(mid) <= allowed {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let curtailed_energy_mwh = curtailed(cap);
    Ok(CurtailmentResult {
        cap_mw: cap,
        curtailed_energy_mwh,
        fraction_of_pv_energy: curtailed_energy_mwh / pv_annual_energy_mwh,
    })
}
