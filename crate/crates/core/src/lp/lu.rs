//! Sparse LU factorization with partial pivoting for simplex basis matrices.
//!
//! Left-looking, column by column, with a dense accumulator and an epoch mark
//! array instead of a symbolic phase. Row order is chosen greedily by largest
//! pivot magnitude; columns are factored in the order given, so solution
//! component `k` of `ftran` corresponds to basis column `k`.

const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    /// Column k of L: (original row, multiplier) for rows unpivoted at step k.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Column k of U: (pivot position i < k, value).
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    /// Original row chosen as the k-th pivot.
    pivot_row: Vec<usize>,
    /// Inverse of pivot_row.
    pos_of_row: Vec<usize>,
}

impl LuFactors {
    /// Factors the m-by-m matrix whose columns are the given sparse vectors.
    /// Returns the column index at which no acceptable pivot remains.
    pub fn factor(m: usize, cols: &[&[(usize, f64)]]) -> Result<LuFactors, usize> {
        assert_eq!(cols.len(), m, "basis must be square");
        const UNSET: usize = usize::MAX;
        let mut l_cols = Vec::with_capacity(m);
        let mut u_cols = Vec::with_capacity(m);
        let mut u_diag = Vec::with_capacity(m);
        let mut pivot_row = Vec::with_capacity(m);
        let mut pos_of_row = vec![UNSET; m];

        let mut acc = vec![0.0f64; m];
        let mut mark = vec![0u32; m];
        let mut epoch = 0u32;

        for (j, col) in cols.iter().enumerate() {
            epoch += 1;
            for &(r, v) in col.iter() {
                debug_assert!(r < m);
                if mark[r] != epoch {
                    mark[r] = epoch;
                    acc[r] = 0.0;
                }
                acc[r] += v;
            }
            let mut off_u = Vec::new();
            for k in 0..j {
                let pr = pivot_row[k];
                if mark[pr] != epoch {
                    continue;
                }
                let x = acc[pr];
                if x == 0.0 {
                    continue;
                }
                off_u.push((k, x));
                for &(r, l) in &l_cols[k] {
                    if mark[r] != epoch {
                        mark[r] = epoch;
                        acc[r] = 0.0;
                    }
                    acc[r] -= l * x;
                }
            }
            // Partial pivoting over rows not yet assigned a position.
            let mut best = UNSET;
            let mut best_abs = 0.0;
            for r in 0..m {
                if pos_of_row[r] != UNSET || mark[r] != epoch {
                    continue;
                }
                let a = acc[r].abs();
                if a > best_abs {
                    best_abs = a;
                    best = r;
                }
            }
            if best == UNSET || best_abs <= SINGULAR_TOL {
                return Err(j);
            }
            let diag = acc[best];
            let mut lcol = Vec::new();
            for r in 0..m {
                if r == best || pos_of_row[r] != UNSET || mark[r] != epoch {
                    continue;
                }
                let v = acc[r];
                if v != 0.0 {
                    lcol.push((r, v / diag));
                }
            }
            pivot_row.push(best);
            pos_of_row[best] = j;
            u_diag.push(diag);
            l_cols.push(lcol);
            u_cols.push(off_u);
        }
        Ok(LuFactors {
            m,
            l_cols,
            u_cols,
            u_diag,
            pivot_row,
            pos_of_row,
        })
    }

    /// Solves B x = b. `work` holds b indexed by original row on entry and is
    /// destroyed; `out[k]` receives the value of basis column k.
    pub fn ftran(&self, work: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let xk = work[self.pivot_row[k]];
            if xk == 0.0 {
                continue;
            }
            for &(r, l) in &self.l_cols[k] {
                work[r] -= l * xk;
            }
        }
        for k in (0..self.m).rev() {
            let xk = work[self.pivot_row[k]] / self.u_diag[k];
            out[k] = xk;
            if xk == 0.0 {
                continue;
            }
            for &(pos, u) in &self.u_cols[k] {
                work[self.pivot_row[pos]] -= u * xk;
            }
        }
    }

    /// Solves Bᵀ y = c. `c` is indexed by basis position, `out` by original
    /// row; `work` is position-indexed scratch.
    pub fn btran(&self, c: &[f64], work: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let mut v = c[k];
            for &(pos, u) in &self.u_cols[k] {
                v -= u * work[pos];
            }
            work[k] = v / self.u_diag[k];
        }
        for k in (0..self.m).rev() {
            let mut v = work[k];
            for &(r, l) in &self.l_cols[k] {
                v -= l * work[self.pos_of_row[r]];
            }
            work[k] = v;
        }
        for r in 0..self.m {
            out[r] = work[self.pos_of_row[r]];
        }
    }
}
