//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! The factorization is left-looking (one basis column at a time, each
//! column obtained by a sparse triangular solve against the columns already
//! factored) with threshold partial pivoting on rows. Columns are processed
//! in order of increasing nonzero count so that the many unit columns of a
//! typical basis pivot first without producing any fill.
//!
//! With `B` the basis matrix and `Q` the column processing order, the
//! factors satisfy `B Q = L U`, where column `j` of `L` is the unit vector of
//! the row pivoted at step `j` plus the multipliers stored for that step.

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const NONE: usize = usize::MAX;

/// A sparse column: row indices and values of equal length.
pub(crate) type SparseCol<'a> = (&'a [usize], &'a [f64]);

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions whose columns could not be pivoted.
    pub positions: Vec<usize>,
    /// Rows left without a pivot, as many as `positions`.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    prow: Vec<usize>,
    pcol: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
}

impl LuFactors {
    /// Factorizes the `m` columns returned by `col(position)`.
    pub(crate) fn factorize<'a, F>(m: usize, col: F) -> Result<LuFactors, Singular>
    where
        F: Fn(usize) -> SparseCol<'a>,
    {
        let mut row_count = vec![0usize; m];
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(m);
        for pos in 0..m {
            let (idx, _) = col(pos);
            for &r in idx {
                row_count[r] += 1;
            }
            order.push((idx.len(), pos));
        }
        order.sort_unstable();

        let mut f = LuFactors {
            m,
            prow: Vec::with_capacity(m),
            pcol: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
        };

        let mut row_step = vec![NONE; m];
        let mut work = vec![0.0f64; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        // DFS scratch over steps.
        let mut visited = vec![usize::MAX; m];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut bad_positions = Vec::new();

        for (stamp, &(_, pos)) in order.iter().enumerate() {
            let (idx, val) = col(pos);
            pattern.clear();
            for (&r, &v) in idx.iter().zip(val) {
                if !in_pattern[r] {
                    in_pattern[r] = true;
                    pattern.push(r);
                }
                work[r] += v;
            }

            // Steps reachable from the column's pivoted rows, in topological order.
            topo.clear();
            for &r in idx {
                let s = row_step[r];
                if s == NONE || visited[s] == stamp {
                    continue;
                }
                visited[s] = stamp;
                stack.push((s, f.l_start[s]));
                while let Some(&mut (step, ref mut next)) = stack.last_mut() {
                    let end = f.l_start[step + 1];
                    let mut pushed = false;
                    while *next < end {
                        let rr = f.l_idx[*next];
                        *next += 1;
                        let ss = row_step[rr];
                        if ss != NONE && visited[ss] != stamp {
                            visited[ss] = stamp;
                            stack.push((ss, f.l_start[ss]));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        topo.push(step);
                        stack.pop();
                    }
                }
            }

            for &step in topo.iter().rev() {
                let xr = work[f.prow[step]];
                if xr == 0.0 {
                    continue;
                }
                for k in f.l_start[step]..f.l_start[step + 1] {
                    let r = f.l_idx[k];
                    if !in_pattern[r] {
                        in_pattern[r] = true;
                        pattern.push(r);
                    }
                    work[r] -= f.l_val[k] * xr;
                }
            }

            let mut max_abs = 0.0f64;
            for &r in &pattern {
                if row_step[r] == NONE {
                    max_abs = max_abs.max(work[r].abs());
                }
            }

            if max_abs <= SINGULAR_TOL {
                bad_positions.push(pos);
                for &r in &pattern {
                    work[r] = 0.0;
                    in_pattern[r] = false;
                }
                continue;
            }

            let mut pivot_row = NONE;
            for &r in &pattern {
                if row_step[r] != NONE || work[r].abs() < PIVOT_THRESHOLD * max_abs {
                    continue;
                }
                if pivot_row == NONE
                    || row_count[r] < row_count[pivot_row]
                    || (row_count[r] == row_count[pivot_row] && r < pivot_row)
                {
                    pivot_row = r;
                }
            }
            let pivot = work[pivot_row];
            let step = f.prow.len();

            pattern.sort_unstable();
            for &r in &pattern {
                let v = work[r];
                if v != 0.0 {
                    let s = row_step[r];
                    if s != NONE {
                        f.u_idx.push(s);
                        f.u_val.push(v);
                    } else if r != pivot_row {
                        f.l_idx.push(r);
                        f.l_val.push(v / pivot);
                    }
                }
                work[r] = 0.0;
                in_pattern[r] = false;
            }
            f.u_start.push(f.u_idx.len());
            f.l_start.push(f.l_idx.len());
            f.u_diag.push(pivot);
            f.prow.push(pivot_row);
            f.pcol.push(pos);
            row_step[pivot_row] = step;
        }

        if !bad_positions.is_empty() {
            let rows: Vec<usize> = (0..m).filter(|&r| row_step[r] == NONE).collect();
            bad_positions.sort_unstable();
            return Err(Singular {
                positions: bad_positions,
                rows,
            });
        }
        Ok(f)
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs`. `rhs` is indexed by row and is consumed as
    /// scratch; the result is indexed by basis position.
    pub(crate) fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        let m = self.m;
        for j in 0..m {
            let v = rhs[self.prow[j]];
            if v != 0.0 {
                for k in self.l_start[j]..self.l_start[j + 1] {
                    rhs[self.l_idx[k]] -= self.l_val[k] * v;
                }
            }
        }
        // z_j = rhs[prow[j]]; back-substitute in step space, reusing `out`
        // as the step-indexed buffer before scattering to positions.
        let mut z: Vec<f64> = (0..m).map(|j| rhs[self.prow[j]]).collect();
        for k in (0..m).rev() {
            let w = z[k] / self.u_diag[k];
            z[k] = w;
            if w != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    z[self.u_idx[t]] -= self.u_val[t] * w;
                }
            }
        }
        for k in 0..m {
            out[self.pcol[k]] = z[k];
        }
        for eta in &self.etas {
            let xp = out[eta.pos] / eta.pivot;
            out[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * xp;
                }
            }
        }
    }

    /// Solves `yᵀ B = cᵀ`. `c` is indexed by basis position and is consumed
    /// as scratch; the result is indexed by row.
    pub(crate) fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= c[i] * a;
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut t = vec![0.0f64; m];
        for k in 0..m {
            let mut s = c[self.pcol[k]];
            for q in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[q] * t[self.u_idx[q]];
            }
            t[k] = s / self.u_diag[k];
        }
        for j in (0..m).rev() {
            let mut s = t[j];
            for k in self.l_start[j]..self.l_start[j + 1] {
                s -= self.l_val[k] * y[self.l_idx[k]];
            }
            y[self.prow[j]] = s;
        }
    }

    /// Records the replacement of the column at basis position `pos` by a
    /// column whose representation in the current basis is `alpha`.
    pub(crate) fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}
