//! Bounded-variable primal revised simplex.
//!
//! Every row `r` gets a logical variable `s_r = a_r x` whose bounds encode
//! the row sense, so the working system is `[A | -I] (x, s) = 0` with all
//! variables box-bounded. Phase 1 minimizes the sum of bound violations of
//! the basic variables; phase 2 minimizes the true objective. Pricing is
//! Dantzig with a Harris two-pass ratio test, falling back to Bland's rule
//! while a run of degenerate pivots persists.

use crate::error::LpError;
use crate::lu::LuFactors;
use crate::model::{LinearProgram, RowKind};
use crate::Tolerances;

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_RUN: usize = 60;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic strictly inside its bounds (or free).
    Between,
}

/// Simplex basis over the structural variables followed by one logical
/// variable per row. Used to warm-start related solves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the optimal objective to each row's right-hand side.
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
    /// Scaled worst bound or row violation.
    pub primal_residual: f64,
    /// Scaled worst complementary-slackness violation.
    pub complementarity_residual: f64,
    pub dual_objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &lp.lower, &lp.upper, None, tol)
}

pub fn solve_lp_warm(
    lp: &LinearProgram,
    basis: Option<&Basis>,
    tol: &Tolerances,
) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &lp.lower, &lp.upper, basis, tol)
}

/// Solves `lp` with its column bounds replaced by `lower`/`upper`.
pub fn solve_lp_with(
    lp: &LinearProgram,
    lower: &[f64],
    upper: &[f64],
    basis: Option<&Basis>,
    tol: &Tolerances,
) -> Result<LpSolution, LpError> {
    let issues = lp.check();
    if !issues.is_empty() {
        return Err(LpError::Invalid(issues));
    }
    if let Some(j) = (0..lp.num_vars()).find(|&j| lower[j] > upper[j]) {
        return Ok(trivially_infeasible(lp, j));
    }
    let mut solver = Solver::new(lp, lower, upper, tol);
    solver.start(basis);
    solver.run()
}

fn trivially_infeasible(lp: &LinearProgram, _var: usize) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let mut status = vec![VarStatus::AtLower; n];
    status.extend(std::iter::repeat_n(VarStatus::Basic, m));
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective: f64::NAN,
        row_duals: vec![0.0; m],
        reduced_costs: vec![0.0; n],
        row_activity: vec![0.0; m],
        basis: Basis { status },
        iterations: 0,
        primal_residual: f64::INFINITY,
        complementarity_residual: 0.0,
        dual_objective: f64::NAN,
    }
}

struct Solver<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    unit_idx: Vec<usize>,
    unit_val: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    pos_of: Vec<usize>,
    lu: Option<LuFactors>,
    /// Bounds moved by `shift_bounds`, with their original values.
    shifted: Vec<(usize, f64, f64)>,
    ptol: f64,
    dtol: f64,
    tol: Tolerances,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Continue,
    Done(LpStatus),
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LinearProgram, lower: &[f64], upper: &[f64], tol: &Tolerances) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(v, _) in &row.coefs {
                counts[v.0 + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut fill = counts;
        let mut col_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(v, a) in &row.coefs {
                let k = fill[v.0];
                col_idx[k] = r;
                col_val[k] = a;
                fill[v.0] += 1;
            }
        }

        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        for row in &lp.rows {
            let (l, u) = match row.kind {
                RowKind::Eq => (row.rhs, row.rhs),
                RowKind::Le => (f64::NEG_INFINITY, row.rhs),
                RowKind::Ge => (row.rhs, f64::INFINITY),
            };
            lo.push(l);
            hi.push(u);
        }
        let mut cost = lp.cost.clone();
        cost.extend(std::iter::repeat_n(0.0, m));

        let max_iterations = if tol.max_iterations > 0 {
            tol.max_iterations
        } else {
            50 * (n + m) + 10_000
        };

        Solver {
            lp,
            n,
            m,
            col_start,
            col_idx,
            col_val,
            unit_idx: (0..m).collect(),
            unit_val: vec![-1.0; m],
            lower: lo,
            upper: hi,
            cost,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::with_capacity(m),
            pos_of: vec![NONE; n + m],
            lu: None,
            shifted: Vec::new(),
            ptol: tol.feas_tol,
            // Reduced-cost noise grows with the size of the costs.
            dtol: tol.feas_tol * (1.0 + lp.cost.iter().fold(0.0f64, |a, c| a.max(c.abs()))),
            tol: *tol,
            iterations: 0,
            max_iterations,
        }
    }

    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        if j < self.n {
            let (s, e) = (self.col_start[j], self.col_start[j + 1]);
            (&self.col_idx[s..e], &self.col_val[s..e])
        } else {
            let r = j - self.n;
            (&self.unit_idx[r..r + 1], &self.unit_val[r..r + 1])
        }
    }

    fn place_nonbasic(&mut self, j: usize, prefer: VarStatus) {
        let (l, u) = (self.lower[j], self.upper[j]);
        let (st, v) = match prefer {
            VarStatus::AtLower if l.is_finite() => (VarStatus::AtLower, l),
            VarStatus::AtUpper if u.is_finite() => (VarStatus::AtUpper, u),
            _ => {
                let v = 0.0f64.max(l).min(u);
                if v == l {
                    (VarStatus::AtLower, v)
                } else if v == u {
                    (VarStatus::AtUpper, v)
                } else {
                    (VarStatus::Between, v)
                }
            }
        };
        self.status[j] = st;
        self.x[j] = v;
        self.pos_of[j] = NONE;
    }

    fn start(&mut self, warm: Option<&Basis>) {
        let total = self.n + self.m;
        let usable = warm.filter(|b| {
            b.status.len() == total
                && b.status.iter().filter(|s| **s == VarStatus::Basic).count() == self.m
        });
        self.head.clear();
        match usable {
            Some(b) => {
                for j in 0..total {
                    if b.status[j] == VarStatus::Basic {
                        self.status[j] = VarStatus::Basic;
                        self.pos_of[j] = self.head.len();
                        self.head.push(j);
                    } else {
                        self.place_nonbasic(j, b.status[j]);
                    }
                }
            }
            None => {
                for j in 0..self.n {
                    self.place_nonbasic(j, VarStatus::Between);
                }
                for r in 0..self.m {
                    let j = self.n + r;
                    self.status[j] = VarStatus::Basic;
                    self.pos_of[j] = r;
                    self.head.push(j);
                }
            }
        }
        self.refactor();
    }

    /// Refactors the basis, replacing dependent columns by logicals, and
    /// recomputes the basic values from the nonbasic ones.
    fn refactor(&mut self) {
        loop {
            let result = {
                let head = &self.head;
                LuFactors::factorize(self.m, |p| self.column(head[p]))
            };
            match result {
                Ok(lu) => {
                    self.lu = Some(lu);
                    break;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        let v = self.x[out];
                        let (l, u) = (self.lower[out], self.upper[out]);
                        let prefer = if l.is_finite() && (!u.is_finite() || v - l <= u - v) {
                            VarStatus::AtLower
                        } else if u.is_finite() {
                            VarStatus::AtUpper
                        } else {
                            VarStatus::Between
                        };
                        self.place_nonbasic(out, prefer);
                        let inn = self.n + row;
                        self.head[pos] = inn;
                        self.status[inn] = VarStatus::Basic;
                        self.pos_of[inn] = pos;
                    }
                }
            }
        }
        self.compute_basic_values();
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0f64; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                let (idx, val) = self.column(j);
                for (&r, &a) in idx.iter().zip(val) {
                    rhs[r] -= a * v;
                }
            }
        }
        let mut xb = vec![0.0f64; self.m];
        let lu = self.lu.as_ref().unwrap();
        lu.ftran(&mut rhs.clone(), &mut xb);
        // Two rounds of iterative refinement against the original columns.
        for _ in 0..2 {
            let mut resid = rhs.clone();
            for (p, &j) in self.head.iter().enumerate() {
                let (idx, val) = self.column(j);
                for (&r, &a) in idx.iter().zip(val) {
                    resid[r] -= a * xb[p];
                }
            }
            if resid.iter().all(|&r| r == 0.0) {
                break;
            }
            let mut dx = vec![0.0f64; self.m];
            lu.ftran(&mut resid, &mut dx);
            for (x, d) in xb.iter_mut().zip(&dx) {
                *x += d;
            }
        }
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn below(&self, j: usize) -> bool {
        self.x[j] < self.lower[j] - self.ptol
    }

    fn above(&self, j: usize) -> bool {
        self.x[j] > self.upper[j] + self.ptol
    }

    /// Moves bounds onto basic values that violate them by no more than
    /// roundoff relative to the bound's size. Returns false (and shifts
    /// nothing) if any violation is larger.
    fn shift_bounds(&mut self) -> bool {
        let small = |v: f64, b: f64| v <= self.ptol * (1.0 + b.abs());
        let mut moves = Vec::new();
        for &j in &self.head {
            let (x, l, u) = (self.x[j], self.lower[j], self.upper[j]);
            if self.below(j) {
                if !small(l - x, l) {
                    return false;
                }
                moves.push((j, x, u));
            } else if self.above(j) {
                if !small(x - u, u) {
                    return false;
                }
                moves.push((j, l, x));
            }
        }
        for (j, l, u) in moves {
            self.shifted.push((j, self.lower[j], self.upper[j]));
            self.lower[j] = l;
            self.upper[j] = u;
        }
        true
    }

    fn basic_infeasibility(&self) -> bool {
        self.head.iter().any(|&j| self.below(j) || self.above(j))
    }

    fn phase_costs(&self, phase1: bool) -> Vec<f64> {
        self.head
            .iter()
            .map(|&j| {
                if phase1 {
                    if self.below(j) {
                        -1.0
                    } else if self.above(j) {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                }
            })
            .collect()
    }

    fn duals(&self, cb: &[f64]) -> Vec<f64> {
        let lu = self.lu.as_ref().unwrap();
        let mut y = vec![0.0f64; self.m];
        lu.btran(&mut cb.to_vec(), &mut y);
        y
    }

    /// Duals with one round of iterative refinement, for final reporting.
    fn refined_duals(&self, cb: &[f64]) -> Vec<f64> {
        let lu = self.lu.as_ref().unwrap();
        let mut y = self.duals(cb);
        let mut resid = cb.to_vec();
        for (p, &j) in self.head.iter().enumerate() {
            let (idx, val) = self.column(j);
            for (&r, &a) in idx.iter().zip(val) {
                resid[p] -= a * y[r];
            }
        }
        if resid.iter().any(|&r| r != 0.0) {
            let mut dy = vec![0.0f64; self.m];
            lu.btran(&mut resid, &mut dy);
            for (v, d) in y.iter_mut().zip(&dy) {
                *v += d;
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        let (idx, val) = self.column(j);
        let mut d = c;
        for (&r, &a) in idx.iter().zip(val) {
            d -= a * y[r];
        }
        d
    }

    /// Entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, y: &[f64], phase1: bool, bland: bool, rejected: &[bool]) -> Option<(usize, f64)> {
        let dtol = if phase1 { self.ptol } else { self.dtol };
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || rejected[j] {
                continue;
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == u {
                continue;
            }
            let d = self.reduced_cost(j, y, phase1);
            let dir = match st {
                VarStatus::AtLower if d < -dtol => 1.0,
                VarStatus::AtUpper if d > dtol => -1.0,
                VarStatus::Between if d.abs() > dtol => {
                    if d < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d.abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut rejected = vec![false; self.n + self.m];
        let mut any_rejected = false;
        let mut verified = false;
        let mut shifts = 0usize;

        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit {
                    iterations: self.iterations,
                });
            }
            if self.lu.as_ref().unwrap().num_updates() >= REFACTOR_EVERY {
                self.refactor();
            }
            match self.iterate(&mut bland, &mut degenerate, &mut rejected, &mut any_rejected)? {
                Step::Continue => verified = false,
                Step::Done(status) => {
                    // Confirm on a fresh factorization before stopping.
                    if !verified && self.lu.as_ref().unwrap().num_updates() > 0 {
                        self.refactor();
                        verified = true;
                        continue;
                    }
                    if any_rejected {
                        rejected.iter_mut().for_each(|r| *r = false);
                        any_rejected = false;
                        self.refactor();
                        verified = true;
                        continue;
                    }
                    if status == LpStatus::Infeasible && shifts < 10 && self.shift_bounds() {
                        shifts += 1;
                        continue;
                    }
                    return self.finish(status);
                }
            }
        }
    }

    fn iterate(
        &mut self,
        bland: &mut bool,
        degenerate: &mut usize,
        rejected: &mut [bool],
        any_rejected: &mut bool,
    ) -> Result<Step, LpError> {
        let phase1 = self.basic_infeasibility();
        let cb = self.phase_costs(phase1);
        let y = self.duals(&cb);
        let Some((q, dir)) = self.price(&y, phase1, *bland, rejected) else {
            return Ok(Step::Done(if phase1 {
                LpStatus::Infeasible
            } else {
                LpStatus::Optimal
            }));
        };

        let mut rhs = vec![0.0f64; self.m];
        {
            let (idx, val) = self.column(q);
            for (&r, &a) in idx.iter().zip(val) {
                rhs[r] += a;
            }
        }
        let mut alpha = vec![0.0f64; self.m];
        self.lu.as_ref().unwrap().ftran(&mut rhs, &mut alpha);

        // Distance the entering variable may travel before its own bound.
        let range = if dir > 0.0 {
            self.upper[q] - self.x[q]
        } else {
            self.x[q] - self.lower[q]
        };

        // (position, exact ratio, |alpha|, target bound)
        let mut candidates: Vec<(usize, f64, f64, f64)> = Vec::new();
        let mut relaxed_min = f64::INFINITY;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let j = self.head[p];
            let rate = -dir * a;
            let xj = self.x[j];
            let (l, u) = (self.lower[j], self.upper[j]);
            let (low, high) = (xj < l - self.ptol, xj > u + self.ptol);
            let target = if rate < 0.0 {
                if low {
                    continue;
                } else if high {
                    u
                } else {
                    l
                }
            } else if high {
                continue;
            } else if low {
                l
            } else {
                u
            };
            if !target.is_finite() {
                continue;
            }
            let exact = (xj - target) / -rate;
            let relaxed = ((xj - target).abs() + self.ptol) / rate.abs();
            relaxed_min = relaxed_min.min(relaxed);
            candidates.push((p, exact, a.abs(), target));
        }

        let chosen = if *bland {
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for &c in &candidates {
                best = match best {
                    None => Some(c),
                    Some(b) => {
                        let tie = (c.1 - b.1).abs() <= 1e-12 * (1.0 + b.1.abs());
                        if c.1 < b.1 && !tie || tie && self.head[c.0] < self.head[b.0] {
                            Some(c)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            best
        } else {
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for &c in &candidates {
                if c.1 > relaxed_min {
                    continue;
                }
                best = match best {
                    None => Some(c),
                    Some(b) if c.2 > b.2 => Some(c),
                    keep => keep,
                };
            }
            best
        };

        let flip = match chosen {
            None => true,
            Some((_, exact, _, _)) => range <= exact.max(0.0),
        };

        if flip && !range.is_finite() {
            if phase1 {
                rejected[q] = true;
                *any_rejected = true;
                return Ok(Step::Continue);
            }
            return Ok(Step::Done(LpStatus::Unbounded));
        }

        self.iterations += 1;
        let t = if flip {
            range
        } else {
            chosen.unwrap().1.max(0.0)
        };

        if t > 1e-12 {
            *degenerate = 0;
            *bland = false;
        } else {
            *degenerate += 1;
            if *degenerate > DEGENERATE_RUN {
                *bland = true;
            }
        }

        if t != 0.0 {
            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= dir * t * a;
                }
            }
        }

        if flip {
            if dir > 0.0 {
                self.x[q] = self.upper[q];
                self.status[q] = VarStatus::AtUpper;
            } else {
                self.x[q] = self.lower[q];
                self.status[q] = VarStatus::AtLower;
            }
            return Ok(Step::Continue);
        }

        let (r, _, _, target) = chosen.unwrap();
        self.x[q] += dir * t;
        let leaving = self.head[r];
        self.x[leaving] = target;
        self.status[leaving] = if target == self.lower[leaving] {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        };
        self.pos_of[leaving] = NONE;
        self.head[r] = q;
        self.status[q] = VarStatus::Basic;
        self.pos_of[q] = r;
        self.lu.as_mut().unwrap().update(r, &alpha);
        if rejected.iter().any(|&b| b) {
            rejected.iter_mut().for_each(|b| *b = false);
            *any_rejected = false;
        }
        Ok(Step::Continue)
    }

    fn finish(mut self, status: LpStatus) -> Result<LpSolution, LpError> {
        for (j, l, u) in std::mem::take(&mut self.shifted).into_iter().rev() {
            self.lower[j] = l;
            self.upper[j] = u;
        }
        let n = self.n;
        let m = self.m;
        let cb = self.phase_costs(false);
        let y = self.refined_duals(&cb);
        let x: Vec<f64> = self.x[..n].to_vec();
        // Basic columns have zero reduced cost by construction; computing
        // it would only expose roundoff.
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| {
                if self.status[j] == VarStatus::Basic {
                    0.0
                } else {
                    self.reduced_cost(j, &y, false)
                }
            })
            .collect();

        let mut row_activity = vec![0.0f64; m];
        for j in 0..n {
            let v = x[j];
            if v != 0.0 {
                let (idx, val) = self.column(j);
                for (&r, &a) in idx.iter().zip(val) {
                    row_activity[r] += a * v;
                }
            }
        }

        let objective = self.lp.evaluate(&x);

        // Residuals are measured on all variables: structurals use their
        // column bounds, logicals the row bounds with the row activity.
        let mut primal_residual = 0.0f64;
        let mut comp = 0.0f64;
        let mut dual_objective = self.lp.objective_offset;
        let mut dual_feasible = true;
        for j in 0..n + m {
            let (v, d) = if j < n {
                (x[j], reduced_costs[j])
            } else if self.status[j] == VarStatus::Basic {
                (row_activity[j - n], 0.0)
            } else {
                (row_activity[j - n], y[j - n])
            };
            let (l, u) = (self.lower[j], self.upper[j]);
            if v < l {
                primal_residual = primal_residual.max((l - v) / (1.0 + l.abs()));
            } else if v > u {
                primal_residual = primal_residual.max((v - u) / (1.0 + u.abs()));
            }
            if d > 0.0 {
                if l.is_finite() {
                    comp = comp.max(d * (v - l).abs());
                    dual_objective += d * l;
                } else if d > self.dtol {
                    dual_feasible = false;
                }
            } else if d < 0.0 {
                if u.is_finite() {
                    comp = comp.max(-d * (u - v).abs());
                    dual_objective += d * u;
                } else if d < -self.dtol {
                    dual_feasible = false;
                }
            }
        }
        let obj_scale = 1.0 + objective.abs();
        let complementarity_residual = comp / obj_scale;

        let sol = LpSolution {
            status,
            x,
            objective,
            row_duals: y,
            reduced_costs,
            row_activity,
            basis: Basis {
                status: self.status.clone(),
            },
            iterations: self.iterations,
            primal_residual,
            complementarity_residual,
            dual_objective,
        };

        if status == LpStatus::Optimal {
            let gap = (sol.objective - sol.dual_objective).abs() / obj_scale;
            let worst = sol
                .primal_residual
                .max(sol.complementarity_residual)
                .max(if dual_feasible { 0.0 } else { f64::INFINITY });
            if worst > self.tol.feas_tol || gap > self.tol.duality_gap_tol {
                return Err(LpError::NumericalFailure {
                    iterations: self.iterations,
                    residual: worst.max(gap),
                });
            }
        }
        Ok(sol)
    }
}
