//! Battery dispatch: one LP per rolling-horizon window, committed decisions
//! stitched across the year, annual import/export peaks extracted at the end.
//!
//! Window variables per step are charge from surplus (ch), discharge into
//! residual load (ds), discharge into the grid (dg) and the stored energy
//! (soc), plus a single peak variable p_max bounding both the import
//! `rl - ds` and the export `sg - ch + dg`. The objective is dominated by
//! p_max; a small reward on total ds prefers self-consumption and a smaller
//! penalty on dg suppresses pointless simultaneous charge/discharge. ds is
//! additionally capped at rl so the reward cannot relabel exports as
//! self-consumption.
//!
//! Windows advance by the control horizon, anchored at a fixed clock hour;
//! each solve looks ahead by the prediction horizon with perfect foresight.
//! Only the control block is committed, except that the window reaching the
//! end of the data commits in full, so inputs no longer than control plus
//! prediction are a single solve. A leading partial block before the first
//! anchor is solved as its own short window with the same lookahead. The
//! committed state of charge is reproduced by exact forward recursion from
//! the committed controls, which makes cross-window continuity exact.

use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::profiles::NetLoadDecomposition;
use chrono::Timelike;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("battery spec invalid: {detail}")]
    InvalidBattery { detail: String },
    #[error("dispatch config invalid: {detail}")]
    InvalidConfig { detail: String },
    #[error("window {window_index} (steps {start_index}..{end_index}): solver status {status:?}")]
    WindowSolve {
        window_index: usize,
        start_index: usize,
        end_index: usize,
        status: LpStatus,
    },
}

/// Battery parameters; the SOC window is a fraction of nominal capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySpec {
    pub capacity_mwh: f64,
    pub soc_min_frac: f64,
    pub soc_max_frac: f64,
    pub initial_soc_frac: f64,
}

impl BatterySpec {
    /// Default SOC window 0.1..0.9 of capacity, starting mid-range at 0.5.
    pub fn with_capacity(capacity_mwh: f64) -> Self {
        Self {
            capacity_mwh,
            soc_min_frac: 0.1,
            soc_max_frac: 0.9,
            initial_soc_frac: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let ok = self.capacity_mwh >= 0.0
            && self.capacity_mwh.is_finite()
            && (0.0..1.0).contains(&self.soc_min_frac)
            && self.soc_min_frac < self.soc_max_frac
            && self.soc_max_frac <= 1.0
            && self.initial_soc_frac >= self.soc_min_frac
            && self.initial_soc_frac <= self.soc_max_frac;
        if ok {
            Ok(())
        } else {
            Err(DispatchError::InvalidBattery {
                detail: format!("{self:?}"),
            })
        }
    }

    pub fn soc_min_mwh(&self) -> f64 {
        self.soc_min_frac * self.capacity_mwh
    }

    pub fn soc_max_mwh(&self) -> f64 {
        self.soc_max_frac * self.capacity_mwh
    }

    pub fn initial_soc_mwh(&self) -> f64 {
        self.initial_soc_frac * self.capacity_mwh
    }
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self::with_capacity(0.0)
    }
}

/// Objective weights and rolling-horizon geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub control_horizon_h: f64,
    pub prediction_horizon_h: f64,
    /// Clock hour at which each control block begins.
    pub window_anchor_hour: f64,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e-3,
            lambda2: 1e-6,
            control_horizon_h: 24.0,
            prediction_horizon_h: 144.0,
            window_anchor_hour: 9.0,
        }
    }
}

impl DispatchConfig {
    pub fn validate(&self) -> Result<(), DispatchError> {
        let ok = (0.0..=1.0).contains(&self.lambda1)
            && (0.0..=1.0).contains(&self.lambda2)
            && self.lambda1 + self.lambda2 < 1.0
            && self.control_horizon_h > 0.0
            && self.prediction_horizon_h >= 0.0
            && (0.0..24.0).contains(&self.window_anchor_hour);
        if ok {
            Ok(())
        } else {
            Err(DispatchError::InvalidConfig {
                detail: format!("{self:?}"),
            })
        }
    }

    fn steps(&self, horizon_h: f64, dt_hours: f64) -> Result<usize, DispatchError> {
        let ratio = horizon_h / dt_hours;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 {
            return Err(DispatchError::InvalidConfig {
                detail: format!("horizon {horizon_h} h is not a multiple of dt {dt_hours} h"),
            });
        }
        Ok(rounded as usize)
    }
}

/// One window's optimal trajectory.
#[derive(Debug, Clone)]
pub struct WindowSolution {
    pub p_max: f64,
    pub ch: Vec<f64>,
    pub ds: Vec<f64>,
    pub dg: Vec<f64>,
    pub soc: Vec<f64>,
}

/// Committed-range bookkeeping for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMeta {
    pub start_index: usize,
    pub committed_len: usize,
    pub p_max: f64,
}

/// Committed controls for the whole period plus derived annual peaks.
#[derive(Debug, Clone)]
pub struct DispatchSolution {
    pub ch: Vec<f64>,
    pub ds: Vec<f64>,
    pub dg: Vec<f64>,
    /// Stored energy after each step, by exact recursion from the controls.
    pub soc: Vec<f64>,
    pub windows: Vec<WindowMeta>,
    pub mpi_mw: f64,
    pub mpe_mw: f64,
}

impl DispatchSolution {
    pub fn per_window_p_max(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.p_max).collect()
    }
}

/// Builds the window LP. Import rows that are trivially implied (rl = 0
/// forces ds = 0) are omitted; export rows are always present because dg is
/// unbounded above.
pub fn build_window_lp(
    rl: &[f64],
    sg: &[f64],
    dt_hours: f64,
    battery: &BatterySpec,
    cfg: &DispatchConfig,
    s_start_mwh: f64,
) -> LinearProgram {
    let n = rl.len();
    assert_eq!(n, sg.len());
    assert!(n > 0);
    let (s_lo, s_hi) = (battery.soc_min_mwh(), battery.soc_max_mwh());
    debug_assert!(s_start_mwh >= s_lo - 1e-9 && s_start_mwh <= s_hi + 1e-9);

    let ch = |t: usize| 4 * t;
    let ds = |t: usize| 4 * t + 1;
    let dg = |t: usize| 4 * t + 2;
    let s = |t: usize| 4 * t + 3;
    let p_max = 4 * n;

    let mut lp = LinearProgram::new(4 * n + 1);
    lp.set_objective(p_max, 1.0 - cfg.lambda1 - cfg.lambda2)
        .unwrap();
    for t in 0..n {
        lp.set_objective(ds(t), -cfg.lambda1).unwrap();
        lp.set_objective(dg(t), cfg.lambda2).unwrap();
        lp.set_bounds(ch(t), 0.0, sg[t]).unwrap();
        lp.set_bounds(ds(t), 0.0, rl[t]).unwrap();
        lp.set_bounds(s(t), s_lo, s_hi).unwrap();

        // s_t - s_{t-1} = (ch - ds - dg) * dt
        let mut soc_row = vec![
            (s(t), 1.0),
            (ch(t), -dt_hours),
            (ds(t), dt_hours),
            (dg(t), dt_hours),
        ];
        let rhs = if t == 0 {
            s_start_mwh
        } else {
            soc_row.push((s(t - 1), -1.0));
            0.0
        };
        lp.add_row(&soc_row, Relation::Eq, rhs).unwrap();

        if rl[t] > 0.0 {
            lp.add_row(&[(ds(t), 1.0), (p_max, 1.0)], Relation::Ge, rl[t])
                .unwrap();
        }
        lp.add_row(
            &[(ch(t), 1.0), (dg(t), -1.0), (p_max, 1.0)],
            Relation::Ge,
            sg[t],
        )
        .unwrap();
    }
    lp
}

/// Solves one window and unpacks the trajectory.
pub fn solve_window(
    rl: &[f64],
    sg: &[f64],
    dt_hours: f64,
    battery: &BatterySpec,
    cfg: &DispatchConfig,
    s_start_mwh: f64,
) -> Result<WindowSolution, LpStatus> {
    let lp = build_window_lp(rl, sg, dt_hours, battery, cfg, s_start_mwh);
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        // Zero action is always feasible, so anything else is numerical.
        return Err(sol.status);
    }
    let n = rl.len();
    let pick = |base: usize| -> Vec<f64> {
        (0..n).map(|t| sol.x[4 * t + base].max(0.0)).collect()
    };
    Ok(WindowSolution {
        p_max: sol.x[4 * n].max(0.0),
        ch: pick(0),
        ds: pick(1),
        dg: pick(2),
        soc: (0..n).map(|t| sol.x[4 * t + 3]).collect(),
    })
}

/// Runs the rolling horizon over the full decomposition.
pub fn rolling_horizon(
    decomp: &NetLoadDecomposition,
    battery: &BatterySpec,
    cfg: &DispatchConfig,
) -> Result<DispatchSolution, DispatchError> {
    battery.validate()?;
    cfg.validate()?;
    let rl = decomp.rl().values();
    let sg = decomp.sg().values();
    let dt = decomp.dt_hours();
    let n = rl.len();
    let control_steps = cfg.steps(cfg.control_horizon_h, dt)?.max(1);
    let pred_steps = cfg.steps(cfg.prediction_horizon_h, dt)?;

    let start = decomp.rl().start_time();
    let start_hour = start.hour() as f64
        + start.minute() as f64 / 60.0
        + start.second() as f64 / 3600.0;
    let hours_until_anchor = (cfg.window_anchor_hour - start_hour).rem_euclid(24.0);
    let anchor_idx = (hours_until_anchor / dt - 1e-9).ceil().max(0.0) as usize;

    let (s_lo, s_hi) = (battery.soc_min_mwh(), battery.soc_max_mwh());
    let mut s = battery.initial_soc_mwh();
    let mut ch = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    let mut dg = Vec::with_capacity(n);
    let mut soc = Vec::with_capacity(n);
    let mut windows = Vec::new();

    let mut block_start = 0usize;
    let mut first_partial = anchor_idx > 0;
    while block_start < n {
        let commit_target = if first_partial {
            anchor_idx.min(n)
        } else {
            (block_start + control_steps).min(n)
        };
        first_partial = false;
        let window_end = (commit_target + pred_steps).min(n);
        let win = solve_window(
            &rl[block_start..window_end],
            &sg[block_start..window_end],
            dt,
            battery,
            cfg,
            s.clamp(s_lo, s_hi),
        )
        .map_err(|status| DispatchError::WindowSolve {
            window_index: windows.len(),
            start_index: block_start,
            end_index: window_end,
            status,
        })?;
        let commit_len = if window_end == n {
            n - block_start
        } else {
            commit_target - block_start
        };
        for k in 0..commit_len {
            ch.push(win.ch[k]);
            ds.push(win.ds[k]);
            dg.push(win.dg[k]);
            s += (win.ch[k] - win.ds[k] - win.dg[k]) * dt;
            soc.push(s);
        }
        windows.push(WindowMeta {
            start_index: block_start,
            committed_len: commit_len,
            p_max: win.p_max,
        });
        block_start += commit_len;
    }

    let mut sol = DispatchSolution {
        ch,
        ds,
        dg,
        soc,
        windows,
        mpi_mw: 0.0,
        mpe_mw: 0.0,
    };
    let (mpi, mpe) = extract_mpi_mpe(&sol, decomp);
    sol.mpi_mw = mpi;
    sol.mpe_mw = mpe;
    Ok(sol)
}

/// Solves the whole period as one window; the oracle the rolling variant is
/// checked against.
pub fn monolithic(
    decomp: &NetLoadDecomposition,
    battery: &BatterySpec,
    cfg: &DispatchConfig,
) -> Result<DispatchSolution, DispatchError> {
    battery.validate()?;
    cfg.validate()?;
    let rl = decomp.rl().values();
    let sg = decomp.sg().values();
    let dt = decomp.dt_hours();
    let n = rl.len();
    let win = solve_window(rl, sg, dt, battery, cfg, battery.initial_soc_mwh()).map_err(
        |status| DispatchError::WindowSolve {
            window_index: 0,
            start_index: 0,
            end_index: n,
            status,
        },
    )?;
    let mut s = battery.initial_soc_mwh();
    let mut soc = Vec::with_capacity(n);
    for k in 0..n {
        s += (win.ch[k] - win.ds[k] - win.dg[k]) * dt;
        soc.push(s);
    }
    let mut sol = DispatchSolution {
        ch: win.ch,
        ds: win.ds,
        dg: win.dg,
        soc,
        windows: vec![WindowMeta {
            start_index: 0,
            committed_len: n,
            p_max: win.p_max,
        }],
        mpi_mw: 0.0,
        mpe_mw: 0.0,
    };
    let (mpi, mpe) = extract_mpi_mpe(&sol, decomp);
    sol.mpi_mw = mpi;
    sol.mpe_mw = mpe;
    Ok(sol)
}

/// Annual peaks of committed import `rl - ds` and export `sg - ch + dg`,
/// clamped at zero.
pub fn extract_mpi_mpe(sol: &DispatchSolution, decomp: &NetLoadDecomposition) -> (f64, f64) {
    let rl = decomp.rl().values();
    let sg = decomp.sg().values();
    let mut mpi = 0.0f64;
    let mut mpe = 0.0f64;
    for t in 0..rl.len() {
        mpi = mpi.max(rl[t] - sol.ds[t]);
        mpe = mpe.max(sg[t] - sol.ch[t] + sol.dg[t]);
    }
    (mpi.max(0.0), mpe.max(0.0))
}

/// Writes the committed trajectory as CSV with per-step grid import/export.
pub fn write_dispatch_csv<W: Write>(
    w: &mut W,
    decomp: &NetLoadDecomposition,
    sol: &DispatchSolution,
) -> std::io::Result<()> {
    writeln!(w, "timestamp,rl,sg,ch,ds,dg,soc,import,export")?;
    let rl = decomp.rl().values();
    let sg = decomp.sg().values();
    for t in 0..rl.len() {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            decomp.rl().timestamp(t).format("%Y-%m-%dT%H:%M:%S"),
            rl[t],
            sg[t],
            sol.ch[t],
            sol.ds[t],
            sol.dg[t],
            sol.soc[t],
            (rl[t] - sol.ds[t]).max(0.0),
            (sg[t] - sol.ch[t] + sol.dg[t]).max(0.0),
        )?;
    }
    Ok(())
}
