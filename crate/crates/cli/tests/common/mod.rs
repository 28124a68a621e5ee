//! Shared helpers for the acceptance suite: a deterministic generator with
//! two independent oracles. LP instances are checked against brute-force
//! vertex enumeration; dispatch instances against a dynamic program over
//! discretized state-of-charge transitions, i.e. exhaustive search over
//! discretized controls.

use mpimpe::lp::{LinearProgram, Relation};

/// Small deterministic generator; identical sequences on every platform.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0
    }

    /// Uniform in [0, 1).
    pub fn next(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() * n as f64) as usize % n
    }
}

/// Dense LP form used by the vertex oracle.
pub struct DenseLp {
    pub n: usize,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl DenseLp {
    pub fn to_lp(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.n);
        for j in 0..self.n {
            lp.set_objective(j, self.objective[j]).unwrap();
            lp.set_bounds(j, self.lower[j], self.upper[j]).unwrap();
        }
        for (coeffs, rel, rhs) in &self.rows {
            let entries: Vec<(usize, f64)> =
                coeffs.iter().copied().enumerate().collect();
            lp.add_row(&entries, *rel, *rhs).unwrap();
        }
        lp
    }
}

fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Vertex candidates for n vars, m inequality rows.
fn enumeration_count(n: usize, m: usize) -> usize {
    (0..=m.min(n))
        .map(|k| choose(m, k) * choose(n, k) * (1usize << (n - k)))
        .sum()
}

/// Random box-bounded feasible LP, kept small enough to enumerate.
pub fn random_dense_lp(g: &mut Lcg) -> DenseLp {
    let (n, m) = loop {
        let n = 2 + g.below(11);
        let m = 1 + g.below(3);
        if enumeration_count(n, m) <= 130_000 {
            break (n, m);
        }
    };
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut interior = Vec::with_capacity(n);
    for _ in 0..n {
        let l = g.range(-5.0, -1.0);
        let u = l + g.range(0.5, 5.5);
        lower.push(l);
        upper.push(u);
        interior.push(l + (u - l) * g.next());
    }
    let objective: Vec<f64> = (0..n).map(|_| g.range(-2.0, 2.0)).collect();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let coeffs: Vec<f64> = (0..n).map(|_| g.range(-3.0, 3.0)).collect();
        let act: f64 = coeffs.iter().zip(&interior).map(|(a, x)| a * x).sum();
        let slack = g.range(0.0, 2.0);
        if g.next() < 0.5 {
            rows.push((coeffs, Relation::Le, act + slack));
        } else {
            rows.push((coeffs, Relation::Ge, act - slack));
        }
    }
    DenseLp {
        n,
        objective,
        lower,
        upper,
        rows,
    }
}

/// Solves a k x k dense system in place; None when singular.
fn solve_small(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let mut s = b[r];
        for c in r + 1..k {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// Minimum objective over all feasible vertices: every choice of active rows
/// plus variables pinned to a bound. Exact up to the feasibility tolerance.
pub fn vertex_optimum(lp: &DenseLp) -> Option<f64> {
    let n = lp.n;
    let m = lp.rows.len();
    let tol = 1e-7;
    let mut best: Option<f64> = None;

    for rmask in 0u32..(1 << m) {
        let k = rmask.count_ones() as usize;
        if k > n {
            continue;
        }
        let active: Vec<usize> = (0..m).filter(|i| rmask >> i & 1 == 1).collect();
        for fmask in 0u32..(1 << n) {
            if fmask.count_ones() as usize != k {
                continue;
            }
            let free: Vec<usize> = (0..n).filter(|j| fmask >> j & 1 == 1).collect();
            let fixed: Vec<usize> = (0..n).filter(|j| fmask >> j & 1 == 0).collect();
            for side in 0u32..(1u32 << fixed.len()) {
                let mut x = vec![0.0; n];
                for (b, &j) in fixed.iter().enumerate() {
                    x[j] = if side >> b & 1 == 1 {
                        lp.upper[j]
                    } else {
                        lp.lower[j]
                    };
                }
                if k > 0 {
                    let mut a: Vec<Vec<f64>> = active
                        .iter()
                        .map(|&r| free.iter().map(|&j| lp.rows[r].0[j]).collect())
                        .collect();
                    let mut rhs: Vec<f64> = active
                        .iter()
                        .map(|&r| {
                            lp.rows[r].2
                                - fixed
                                    .iter()
                                    .map(|&j| lp.rows[r].0[j] * x[j])
                                    .sum::<f64>()
                        })
                        .collect();
                    let Some(sol) = solve_small(&mut a, &mut rhs) else {
                        continue;
                    };
                    for (i, &j) in free.iter().enumerate() {
                        x[j] = sol[i];
                    }
                }
                let bounds_ok = free
                    .iter()
                    .all(|&j| x[j] >= lp.lower[j] - tol && x[j] <= lp.upper[j] + tol);
                if !bounds_ok {
                    continue;
                }
                let rows_ok = lp.rows.iter().all(|(coeffs, rel, rhs)| {
                    let v: f64 = coeffs.iter().zip(&x).map(|(a, x)| a * x).sum();
                    match rel {
                        Relation::Le => v <= rhs + tol,
                        Relation::Ge => v >= rhs - tol,
                        Relation::Eq => (v - rhs).abs() <= tol,
                    }
                });
                if !rows_ok {
                    continue;
                }
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    }
    best
}

/// Peak contribution of one step for a given stored-energy change per hour.
/// None when no control choice produces that change.
fn step_peak(rl: f64, sg: f64, d_mw: f64) -> Option<f64> {
    let slack = 1e-9;
    if sg > 0.0 {
        if d_mw > sg + slack {
            return None;
        }
        Some((sg - d_mw).max(0.0))
    } else if rl > 0.0 {
        if d_mw > slack {
            return None;
        }
        let take = (-d_mw).max(0.0);
        let ds = take.min(rl);
        Some((rl - ds).max(take - ds))
    } else {
        if d_mw > slack {
            return None;
        }
        Some((-d_mw).max(0.0))
    }
}

/// Brute-force minimum peak: dynamic program over every pair of discretized
/// SOC states per step, which enumerates all discretized control sequences.
pub fn dp_min_peak(
    rl: &[f64],
    sg: &[f64],
    dt: f64,
    capacity_mwh: f64,
    states: usize,
) -> f64 {
    let smin = 0.1 * capacity_mwh;
    let smax = 0.9 * capacity_mwh;
    let s0 = 0.5 * capacity_mwh;
    let grid: Vec<f64> = if smax - smin < 1e-12 {
        vec![smin]
    } else {
        (0..states)
            .map(|i| smin + (smax - smin) * i as f64 / (states - 1) as f64)
            .collect()
    };

    let mut f = vec![f64::INFINITY; grid.len()];
    for (i, &s) in grid.iter().enumerate() {
        if let Some(p) = step_peak(rl[0], sg[0], (s - s0) / dt) {
            f[i] = p;
        }
    }
    for t in 1..rl.len() {
        let mut g = vec![f64::INFINITY; grid.len()];
        for (i, &si) in grid.iter().enumerate() {
            if !f[i].is_finite() {
                continue;
            }
            for (j, &sj) in grid.iter().enumerate() {
                if let Some(p) = step_peak(rl[t], sg[t], (sj - si) / dt) {
                    let v = f[i].max(p);
                    if v < g[j] {
                        g[j] = v;
                    }
                }
            }
        }
        f = g;
    }
    f.into_iter().fold(f64::INFINITY, f64::min)
}
