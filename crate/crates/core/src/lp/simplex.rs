//! Bounded-variable revised simplex with a composite phase-1/phase-2 loop.
//!
//! The caller provides the slack-augmented column matrix [A | I] with the m
//! identity columns last; the initial basis is the slack set. Reduced costs
//! are recomputed from scratch every iteration (one btran plus one pass over
//! the nonzeros), which keeps the implementation robust against drift at a
//! cost that is negligible for the problem sizes at hand. The basis inverse
//! is a sparse LU refreshed every `REFACTOR_EVERY` pivots with product-form
//! eta updates in between.
//!
//! Determinism: pricing scans columns in ascending index with strict-greater
//! replacement, the ratio test scans basis slots in ascending order with a
//! fixed tie-break (largest |pivot|, then first slot), and no hashing or
//! randomness is involved anywhere.

use super::lu::LuFactors;
use super::LpStatus;

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const SMALL_PIVOT: f64 = 1e-7;
const RATIO_TIE: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const BLAND_AFTER: usize = 500;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Doubly unbounded nonbasic variable parked at zero.
    Free,
}

struct Eta {
    p: usize,
    wp: f64,
    /// Nonzero w_i for i != p.
    entries: Vec<(usize, f64)>,
}

pub(crate) struct SimplexInput<'a> {
    pub m: usize,
    /// n structural columns followed by m unit slack columns.
    pub cols: &'a [Vec<(usize, f64)>],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub cost: &'a [f64],
    pub b: &'a [f64],
    pub max_iterations: usize,
}

pub(crate) struct SimplexResult {
    pub status: LpStatus,
    /// Values for every column, structurals and slacks.
    pub x: Vec<f64>,
    pub iterations: usize,
}

struct Solver<'a> {
    inp: &'a SimplexInput<'a>,
    n_total: usize,
    state: Vec<VarState>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
    // Scratch buffers, all length m.
    work_a: Vec<f64>,
    work_b: Vec<f64>,
    w: Vec<f64>,
    y: Vec<f64>,
    cb: Vec<f64>,
}

pub(crate) fn solve(inp: &SimplexInput) -> SimplexResult {
    let m = inp.m;
    let n_total = inp.cols.len();
    debug_assert!(n_total >= m);
    let n_struct = n_total - m;
    let state: Vec<VarState> = (0..n_total)
        .map(|j| {
            if j >= n_struct {
                VarState::Basic(j - n_struct)
            } else if inp.lower[j].is_finite() {
                VarState::AtLower
            } else if inp.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            }
        })
        .collect();
    let basis: Vec<usize> = (n_struct..n_total).collect();
    let mut solver = Solver {
        inp,
        n_total,
        state,
        basis,
        xb: vec![0.0; m],
        lu: LuFactors::factor(0, &[]).expect("empty factorization"),
        etas: Vec::new(),
        work_a: vec![0.0; m],
        work_b: vec![0.0; m],
        w: vec![0.0; m],
        y: vec![0.0; m],
        cb: vec![0.0; m],
    };
    solver.run()
}

impl<'a> Solver<'a> {
    fn run(&mut self) -> SimplexResult {
        let m = self.inp.m;
        if !self.refactor() {
            return self.finish(LpStatus::IterationLimit, 0);
        }
        let mut iterations = 0usize;
        let mut degenerate_streak = 0usize;
        let mut bland = false;
        let mut fresh_factors = true;

        loop {
            if iterations >= self.inp.max_iterations {
                return self.finish(LpStatus::IterationLimit, iterations);
            }
            if self.etas.len() >= REFACTOR_EVERY {
                if !self.refactor() {
                    return self.finish(LpStatus::IterationLimit, iterations);
                }
                fresh_factors = true;
            }

            // Composite phase: basics outside their bounds get unit costs
            // pointing back toward feasibility; otherwise the true costs apply.
            let mut phase1 = false;
            for i in 0..m {
                let j = self.basis[i];
                let x = self.xb[i];
                if x < self.inp.lower[j] - tol_for(self.inp.lower[j]) {
                    self.cb[i] = -1.0;
                    phase1 = true;
                } else if x > self.inp.upper[j] + tol_for(self.inp.upper[j]) {
                    self.cb[i] = 1.0;
                    phase1 = true;
                } else {
                    self.cb[i] = 0.0;
                }
            }
            if !phase1 {
                for i in 0..m {
                    self.cb[i] = self.inp.cost[self.basis[i]];
                }
            }

            self.btran_costs();

            // Pricing: most negative improvement, ascending index on ties;
            // plain Bland (first candidate) after a degenerate streak.
            let mut enter: Option<(usize, f64, f64)> = None; // (col, score, dir)
            for j in 0..self.n_total {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) {
                    continue;
                }
                if self.inp.upper[j] - self.inp.lower[j] <= 0.0 {
                    continue; // fixed
                }
                let cj = if phase1 { 0.0 } else { self.inp.cost[j] };
                let mut d = cj;
                for &(r, v) in &self.inp.cols[j] {
                    d -= self.y[r] * v;
                }
                let cand = match st {
                    VarState::AtLower => {
                        if d < -DUAL_TOL {
                            Some((-d, 1.0))
                        } else {
                            None
                        }
                    }
                    VarState::AtUpper => {
                        if d > DUAL_TOL {
                            Some((d, -1.0))
                        } else {
                            None
                        }
                    }
                    VarState::Free => {
                        if d < -DUAL_TOL {
                            Some((-d, 1.0))
                        } else if d > DUAL_TOL {
                            Some((d, -1.0))
                        } else {
                            None
                        }
                    }
                    VarState::Basic(_) => unreachable!(),
                };
                if let Some((score, dir)) = cand {
                    if bland {
                        enter = Some((j, score, dir));
                        break;
                    }
                    if enter.is_none_or(|(_, s, _)| score > s) {
                        enter = Some((j, score, dir));
                    }
                }
            }

            let (q, _, dir) = match enter {
                Some(e) => e,
                None => {
                    if phase1 {
                        return self.finish(LpStatus::Infeasible, iterations);
                    }
                    return self.finish(LpStatus::Optimal, iterations);
                }
            };

            self.ftran_col(q);

            // Ratio test. rate_i = d x_Bi / d theta = -dir * w_i.
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None; // (slot, lands_at_upper)
            let mut leave_w = 0.0f64;
            for i in 0..m {
                let wi = self.w[i];
                if wi.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * wi;
                let j = self.basis[i];
                let x = self.xb[i];
                let (l, u) = (self.inp.lower[j], self.inp.upper[j]);
                let below = x < l - tol_for(l);
                let above = x > u + tol_for(u);
                // First breakpoint in the movement direction; a basic outside
                // its bounds blocks at the violated bound it is returning to,
                // and imposes no breakpoint while moving further away (the
                // phase-1 costs already price that drift).
                let (gap, lands_upper) = if rate > 0.0 {
                    if below {
                        (l - x, false)
                    } else if above {
                        continue;
                    } else if u.is_finite() {
                        (u - x, true)
                    } else {
                        continue;
                    }
                } else if above {
                    (x - u, true)
                } else if below {
                    continue;
                } else if l.is_finite() {
                    (x - l, false)
                } else {
                    continue;
                };
                let t = (gap / rate.abs()).max(0.0);
                if t < theta - RATIO_TIE {
                    theta = t;
                    leave = Some((i, lands_upper));
                    leave_w = wi.abs();
                } else if t < theta + RATIO_TIE {
                    let better = if bland {
                        leave.is_none_or(|(slot, _)| self.basis[i] < self.basis[slot])
                    } else {
                        wi.abs() > leave_w
                    };
                    if better {
                        theta = theta.min(t);
                        leave = Some((i, lands_upper));
                        leave_w = wi.abs();
                    }
                }
            }

            let flip_gap = self.inp.upper[q] - self.inp.lower[q]; // inf for free
            iterations += 1;

            let step;
            if leave.is_none() && !flip_gap.is_finite() {
                if phase1 {
                    // An improving phase-1 direction always hits the violated
                    // bound of some infeasible basic; reaching this point means
                    // the residual infeasibility is below resolution.
                    return self.finish(LpStatus::Infeasible, iterations);
                }
                return self.finish(LpStatus::Unbounded, iterations);
            } else if leave.is_none() || (flip_gap.is_finite() && flip_gap < theta - RATIO_TIE) {
                // Bound flip: the entering variable traverses to its opposite
                // bound; the basis is unchanged.
                step = flip_gap;
                let delta = dir * flip_gap;
                for i in 0..m {
                    if self.w[i] != 0.0 {
                        self.xb[i] -= delta * self.w[i];
                    }
                }
                self.state[q] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
            } else {
                let (p, lands_upper) = leave.unwrap();
                step = theta;
                let wp = self.w[p];
                if wp.abs() < SMALL_PIVOT && !fresh_factors {
                    // Suspicious pivot on stale factors: refactor and retry.
                    if !self.refactor() {
                        return self.finish(LpStatus::IterationLimit, iterations);
                    }
                    fresh_factors = true;
                    iterations -= 1;
                    continue;
                }
                let delta = dir * theta;
                for i in 0..m {
                    if self.w[i] != 0.0 {
                        self.xb[i] -= delta * self.w[i];
                    }
                }
                let entering_value = match self.state[q] {
                    VarState::AtLower => self.inp.lower[q] + delta,
                    VarState::AtUpper => self.inp.upper[q] + delta,
                    VarState::Free => delta,
                    VarState::Basic(_) => unreachable!(),
                };
                let lv = self.basis[p];
                self.state[lv] = if lands_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.basis[p] = q;
                self.state[q] = VarState::Basic(p);
                self.xb[p] = entering_value;
                let entries: Vec<(usize, f64)> = (0..m)
                    .filter(|&i| i != p && self.w[i] != 0.0)
                    .map(|i| (i, self.w[i]))
                    .collect();
                self.etas.push(Eta { p, wp, entries });
                fresh_factors = false;
            }

            if step > DEGENERATE_STEP {
                degenerate_streak = 0;
                bland = false;
            } else {
                degenerate_streak += 1;
                if degenerate_streak > BLAND_AFTER {
                    bland = true;
                }
            }
        }
    }

    /// Rebuilds the LU from the current basis and recomputes x_B from scratch.
    fn refactor(&mut self) -> bool {
        let m = self.inp.m;
        let cols: Vec<&[(usize, f64)]> = self
            .basis
            .iter()
            .map(|&j| self.inp.cols[j].as_slice())
            .collect();
        match LuFactors::factor(m, &cols) {
            Ok(lu) => {
                self.lu = lu;
                self.etas.clear();
                self.work_a.copy_from_slice(self.inp.b);
                for j in 0..self.n_total {
                    let xj = match self.state[j] {
                        VarState::Basic(_) => continue,
                        VarState::AtLower => self.inp.lower[j],
                        VarState::AtUpper => self.inp.upper[j],
                        VarState::Free => 0.0,
                    };
                    if xj != 0.0 {
                        for &(r, v) in &self.inp.cols[j] {
                            self.work_a[r] -= v * xj;
                        }
                    }
                }
                self.lu.ftran(&mut self.work_a, &mut self.xb);
                true
            }
            Err(_) => false,
        }
    }

    /// y = B^{-T} c_B through the eta file.
    fn btran_costs(&mut self) {
        let m = self.inp.m;
        self.work_a[..m].copy_from_slice(&self.cb);
        for eta in self.etas.iter().rev() {
            let mut s = 0.0;
            for &(i, wi) in &eta.entries {
                s += wi * self.work_a[i];
            }
            self.work_a[eta.p] = (self.work_a[eta.p] - s) / eta.wp;
        }
        // Split borrows: work_a is the rhs, work_b the scratch, y the output.
        let rhs = &self.work_a[..m];
        self.lu.btran(rhs, &mut self.work_b, &mut self.y);
    }

    /// w = B^{-1} a_q through the eta file.
    fn ftran_col(&mut self, q: usize) {
        let m = self.inp.m;
        for v in self.work_a[..m].iter_mut() {
            *v = 0.0;
        }
        for &(r, v) in &self.inp.cols[q] {
            self.work_a[r] += v;
        }
        self.lu.ftran(&mut self.work_a, &mut self.w);
        for eta in &self.etas {
            let t = self.w[eta.p] / eta.wp;
            if t != 0.0 {
                for &(i, wi) in &eta.entries {
                    self.w[i] -= wi * t;
                }
            }
            self.w[eta.p] = t;
        }
    }

    fn finish(&mut self, status: LpStatus, iterations: usize) -> SimplexResult {
        // Final clean recompute, then snap near-bound values exactly onto
        // their bounds so downstream feasibility checks see zero violation.
        if status == LpStatus::Optimal {
            self.refactor();
            let m = self.inp.m;
            for i in 0..m {
                let j = self.basis[i];
                let (l, u) = (self.inp.lower[j], self.inp.upper[j]);
                let x = self.xb[i];
                if x < l && l - x <= 1e-6 * (1.0 + l.abs()) {
                    self.xb[i] = l;
                } else if x > u && x - u <= 1e-6 * (1.0 + u.abs()) {
                    self.xb[i] = u;
                }
            }
        }
        let mut x = vec![0.0; self.n_total];
        for j in 0..self.n_total {
            x[j] = match self.state[j] {
                VarState::Basic(slot) => self.xb[slot],
                VarState::AtLower => self.inp.lower[j],
                VarState::AtUpper => self.inp.upper[j],
                VarState::Free => 0.0,
            };
        }
        SimplexResult {
            status,
            x,
            iterations,
        }
    }
}

fn tol_for(bound: f64) -> f64 {
    if bound.is_finite() {
        FEAS_TOL * (1.0 + bound.abs())
    } else {
        f64::INFINITY
    }
}
