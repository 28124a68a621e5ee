//! Avoided-transmission analysis for communities with local PV and battery storage.
//!
//! The pipeline: ingest or synthesize load and per-unit PV profiles
//! ([`profiles`], [`synth`]), decompose net load into residual load and surplus
//! generation, analyze the PV-only case with duration curves and a static
//! feed-in cap ([`metrics`]), schedule a battery with a rolling-horizon linear
//! program ([`dispatch`] on top of the bundled [`lp`] solver), and sweep PV
//! sizes and battery ratios into MPI-MPE diagrams with avoided-transmission
//! range and degree metrics ([`sweep`]).
//!
//! MPI / MPE are the annual maximum power import from / export to the public
//! grid; their maximum is the grid interaction the upstream infrastructure has
//! to be dimensioned for.

pub mod dispatch;
pub mod lp;
pub mod metrics;
pub mod profiles;
pub mod sweep;
pub mod synth;

pub use dispatch::{BatterySpec, DispatchConfig, DispatchSolution, WindowSolution};
pub use lp::{LinearProgram, LpSolution, LpStatus};
pub use metrics::{Case1Metrics, CurtailmentResult, DurationCurve};
pub use profiles::{LoadProfile, NetLoadDecomposition, PvSize, PvUnitProfile, TimeSeries};
pub use sweep::{AvoidedTransmission, MpiMpePoint, SweepOutcome, SweepSpec};
pub use synth::SynthSpec;
