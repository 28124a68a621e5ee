//! Scenario builders shared by the benchmark suite.

use mpimpe::profiles::{pv_generation, NetLoadDecomposition};
use mpimpe::sweep::battery_capacity;
use mpimpe::{BatterySpec, LoadProfile, PvSize, PvUnitProfile, SynthSpec};

/// Summer preset trimmed to the requested span and resolution.
pub fn preset_days(days: u32, dt_hours: f64) -> (LoadProfile, PvUnitProfile) {
    let mut spec = SynthSpec::preset("summer-afternoon-peak").expect("known preset");
    spec.days = days;
    spec.dt_hours = dt_hours;
    spec.generate().expect("preset generates")
}

/// Net-load decomposition at `pct` percent of community peak.
pub fn decomposition(
    load: &LoadProfile,
    unit: &PvUnitProfile,
    pct: f64,
) -> NetLoadDecomposition {
    let pv = pv_generation(unit, PvSize::from_pct(pct, load.peak_mw()));
    NetLoadDecomposition::decompose(load.series(), &pv).expect("aligned series")
}

/// Battery sized by the peak x size x ratio rule.
pub fn battery_spec(load: &LoadProfile, pct: f64, ratio: f64) -> BatterySpec {
    BatterySpec::with_capacity(battery_capacity(load.peak_mw(), pct, ratio))
}
