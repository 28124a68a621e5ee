//! Linear programs in the form min c·x subject to row constraints and
//! per-variable bounds, plus a bundled deterministic solver.
//!
//! The solver (a bounded-variable revised simplex, see `simplex`) exists so
//! the crate has no external solver dependency; `verify` is an independent
//! feasibility check the test suites use as an oracle against it.

mod lu;
mod simplex;

use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable index {index} out of range (num_vars {num_vars})")]
    BadIndex { index: usize, num_vars: usize },
    #[error("non-finite coefficient at variable {index}")]
    BadCoefficient { index: usize },
    #[error("invalid bounds [{lower}, {upper}] for variable {index}")]
    BadBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite right-hand side")]
    BadRhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

/// min c·x s.t. rows and bounds. Variables default to [0, +inf).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration budget exhausted (also reports unrecoverable numerical
    /// breakdown; the returned point is best-effort).
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// None picks 10_000 + 50·(rows + columns).
    pub max_iterations: Option<usize>,
}

/// Worst constraint and bound violations of a candidate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub max_constraint_violation: f64,
    pub worst_row: Option<usize>,
    pub max_bound_violation: f64,
    pub worst_var: Option<usize>,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.max_constraint_violation.max(self.max_bound_violation)
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        assert!(num_vars > 0, "LP needs at least one variable");
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, index: usize, coeff: f64) -> Result<(), LpError> {
        self.check_index(index)?;
        if !coeff.is_finite() {
            return Err(LpError::BadCoefficient { index });
        }
        self.objective[index] = coeff;
        Ok(())
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_bounds(&mut self, index: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        self.check_index(index)?;
        let bad = lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY;
        if bad {
            return Err(LpError::BadBounds {
                index,
                lower,
                upper,
            });
        }
        self.lower[index] = lower;
        self.upper[index] = upper;
        Ok(())
    }

    pub fn bounds(&self, index: usize) -> (f64, f64) {
        (self.lower[index], self.upper[index])
    }

    /// Adds a constraint row; duplicate indices are summed. Returns the row
    /// index.
    pub fn add_row(
        &mut self,
        coeffs: &[(usize, f64)],
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, LpError> {
        if !rhs.is_finite() {
            return Err(LpError::BadRhs);
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs.to_vec();
        sorted.sort_unstable_by_key(|&(i, _)| i);
        for &(i, v) in &sorted {
            self.check_index(i)?;
            if !v.is_finite() {
                return Err(LpError::BadCoefficient { index: i });
            }
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        self.rows.push(Row {
            coeffs: merged,
            relation,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    fn check_index(&self, index: usize) -> Result<(), LpError> {
        if index >= self.num_vars {
            return Err(LpError::BadIndex {
                index,
                num_vars: self.num_vars,
            });
        }
        Ok(())
    }

    pub fn solve(&self) -> LpSolution {
        self.solve_with(&SolveOptions::default())
    }

    pub fn solve_with(&self, opts: &SolveOptions) -> LpSolution {
        let n = self.num_vars;
        let m = self.rows.len();
        let n_total = n + m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_total];
        let mut b = Vec::with_capacity(m);
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        lower.resize(n_total, 0.0);
        upper.resize(n_total, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                cols[j].push((i, v));
            }
            let slack = n + i;
            cols[slack].push((i, 1.0));
            // a·x + s = rhs with the slack sign encoding the relation.
            let (sl, su) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower[slack] = sl;
            upper[slack] = su;
            b.push(row.rhs);
        }
        let mut cost = self.objective.clone();
        cost.resize(n_total, 0.0);
        let max_iterations = opts
            .max_iterations
            .unwrap_or(10_000 + 50 * (m + n_total));
        let result = simplex::solve(&simplex::SimplexInput {
            m,
            cols: &cols,
            lower: &lower,
            upper: &upper,
            cost: &cost,
            b: &b,
            max_iterations,
        });
        let x: Vec<f64> = result.x[..n].to_vec();
        let objective_value = self
            .objective
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .sum::<f64>();
        LpSolution {
            status: result.status,
            x,
            objective_value,
            iterations: result.iterations,
        }
    }

    /// Independent feasibility check of an arbitrary point.
    pub fn verify(&self, x: &[f64]) -> Result<FeasibilityReport, LpError> {
        if x.len() != self.num_vars {
            return Err(LpError::DimensionMismatch {
                expected: self.num_vars,
                got: x.len(),
            });
        }
        let mut report = FeasibilityReport {
            max_constraint_violation: 0.0,
            worst_row: None,
            max_bound_violation: 0.0,
            worst_var: None,
        };
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            let viol = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            }
            .max(0.0);
            if viol > report.max_constraint_violation {
                report.max_constraint_violation = viol;
                report.worst_row = Some(i);
            }
        }
        for j in 0..self.num_vars {
            let viol = (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0);
            if viol > report.max_bound_violation {
                report.max_bound_violation = viol;
                report.worst_var = Some(j);
            }
        }
        Ok(report)
    }

    /// Writes the problem in CPLEX LP text format with 12 significant digits,
    /// for inspection with external tools.
    pub fn write_lp_format<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        let mut any = false;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(w, " {} x{}", signed(c, !any), j)?;
                any = true;
            }
        }
        if !any {
            write!(w, " 0 x0")?;
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(w, " c{}:", i)?;
            if row.coeffs.is_empty() {
                write!(w, " 0 x0")?;
            }
            for (k, &(j, v)) in row.coeffs.iter().enumerate() {
                write!(w, " {} x{}", signed(v, k == 0), j)?;
            }
            let op = match row.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            writeln!(w, " {} {}", op, fixed12(row.rhs))?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_vars {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == u {
                writeln!(w, " x{} = {}", j, fixed12(l))?;
            } else if l.is_infinite() && u.is_infinite() {
                writeln!(w, " x{} free", j)?;
            } else if l.is_infinite() {
                writeln!(w, " -inf <= x{} <= {}", j, fixed12(u))?;
            } else if u.is_infinite() {
                writeln!(w, " x{} >= {}", j, fixed12(l))?;
            } else {
                writeln!(w, " {} <= x{} <= {}", fixed12(l), j, fixed12(u))?;
            }
        }
        writeln!(w, "End")
    }
}

fn signed(v: f64, first: bool) -> String {
    if first {
        fixed12(v)
    } else if v < 0.0 {
        format!("- {}", fixed12(-v))
    } else {
        format!("+ {}", fixed12(v))
    }
}

/// Fixed-point rendering with 12 significant digits, trailing zeros trimmed.
fn fixed12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).clamp(0, 20) as usize;
    let s = format!("{:.*}", decimals, v);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
