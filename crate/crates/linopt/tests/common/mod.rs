//! Test-only references: a dense two-phase tableau simplex (Bland's rule)
//! and random instance generators. Deliberately shares nothing with the
//! library's revised simplex.

#![allow(dead_code)]

use linopt::{LinearProgram, RowKind, VarId};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Solves `min c'x` s.t. rows, `lo <= x <= hi` (finite bounds) with a dense
/// tableau. Returns `None` when infeasible.
pub fn tableau_solve(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // Shift x = lo + x', so x' >= 0, and add x' <= hi - lo rows.
    let mut rows: Vec<(Vec<f64>, RowKind, f64)> = Vec::new();
    let mut shift_obj = lp.objective_offset();
    let lo: Vec<f64> = (0..n).map(|j| lp.bounds(VarId(j)).0).collect();
    let hi: Vec<f64> = (0..n).map(|j| lp.bounds(VarId(j)).1).collect();
    let cost: Vec<f64> = (0..n).map(|j| lp.cost(VarId(j))).collect();
    for j in 0..n {
        shift_obj += cost[j] * lo[j];
    }
    for row in lp.rows() {
        let mut a = vec![0.0; n];
        let mut rhs = row.rhs;
        for &(v, c) in &row.coefs {
            a[v.0] += c;
            rhs -= c * lo[v.0];
        }
        rows.push((a, row.kind, rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, RowKind::Le, hi[j] - lo[j]));
    }
    // Normalize to nonnegative rhs.
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|v| *v = -*v);
            r.2 = -r.2;
            r.1 = match r.1 {
                RowKind::Le => RowKind::Ge,
                RowKind::Ge => RowKind::Le,
                RowKind::Eq => RowKind::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != RowKind::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != RowKind::Le).count();
    let width = n + n_slack + n_art;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut s = n;
    let mut a = n + n_slack;
    let mut artificial = vec![false; width];
    for (i, (coef, kind, rhs)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(coef);
        t[i][width] = *rhs;
        match kind {
            RowKind::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            RowKind::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                artificial[a] = true;
                basis[i] = a;
                a += 1;
            }
            RowKind::Eq => {
                t[i][a] = 1.0;
                artificial[a] = true;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let phase1: Vec<f64> = (0..width).map(|j| if artificial[j] { 1.0 } else { 0.0 }).collect();
    let v1 = run_tableau(&mut t, &mut basis, &phase1, &vec![false; width]);
    if v1 > 1e-7 {
        return None;
    }
    // Drive remaining artificials out where possible.
    for i in 0..m {
        if artificial[basis[i]] {
            if let Some(j) = (0..width).find(|&j| !artificial[j] && t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut c2 = vec![0.0; width];
    c2[..n].copy_from_slice(&cost);
    let v2 = run_tableau(&mut t, &mut basis, &c2, &artificial);
    Some(v2 + shift_obj)
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let pr = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (v, q) in row.iter_mut().zip(&pr) {
                    *v -= f * q;
                }
            }
        }
    }
    basis[r] = c;
}

fn run_tableau(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], banned: &[bool]) -> f64 {
    let width = cost.len();
    loop {
        // Reduced costs d_j = c_j - c_B B^-1 a_j; smallest index with d < 0 (Bland).
        let mut enter = None;
        for j in 0..width {
            if banned[j] || basis.contains(&j) {
                continue;
            }
            let d = cost[j] - basis.iter().enumerate().map(|(i, &b)| cost[b] * t[i][j]).sum::<f64>();
            if d < -1e-10 {
                enter = Some(j);
                break;
            }
        }
        let Some(c) = enter else {
            return basis.iter().enumerate().map(|(i, &b)| cost[b] * t[i][width]).sum();
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            if t[i][c] > 1e-10 {
                let ratio = t[i][width] / t[i][c];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let (r, _) = leave.expect("bounded by construction");
        pivot(t, basis, r, c);
    }
}

/// Random feasible, bounded LP with `m` rows and `n` boxed columns.
pub fn random_lp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for j in 0..n {
        let lo = rng.gen_range(-5..=0) as f64;
        let hi = lo + rng.gen_range(1..=10) as f64;
        let c = rng.gen_range(-10..=10) as f64;
        lp.add_var(format!("x{j}"), lo, hi, c);
        x0.push(lo + (hi - lo) * rng.gen::<f64>());
    }
    for i in 0..m {
        let mut coefs = Vec::new();
        let mut act = 0.0;
        for j in 0..n {
            if rng.gen_bool(0.3) {
                let a = rng.gen_range(-5..=5) as f64;
                if a != 0.0 {
                    coefs.push((VarId(j), a));
                    act += a * x0[j];
                }
            }
        }
        let kind = match rng.gen_range(0..3) {
            0 => RowKind::Eq,
            1 => RowKind::Le,
            _ => RowKind::Ge,
        };
        let rhs = match kind {
            RowKind::Eq => act,
            RowKind::Le => act + rng.gen_range(0.0..3.0),
            RowKind::Ge => act - rng.gen_range(0.0..3.0),
        };
        lp.add_row(format!("r{i}"), coefs, kind, rhs);
    }
    lp
}
