//! Operation under a fixed expansion plan and a fixed realization: DC
//! dispatch with load shedding.
//!
//! Realized demands and capacities enter through fixing rows
//! (`demand_j = d_j`, `capacity_i = c_i`) so that their duals are the cost
//! sensitivities used by the worst-case search.

use linopt::{solve_lp_warm, Basis, LinearProgram, LpSolution, LpStatus, RowId, RowKind, Tolerances, VarId};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{components, GridCase};
use crate::uncertainty::Realization;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPlan {
    /// One entry per candidate line, in `GridCase::candidates` order.
    pub built: Vec<bool>,
    pub investment_cost: f64,
}

impl ExpansionPlan {
    pub fn empty(case: &GridCase) -> Self {
        Self::from_built(case, vec![false; case.num_candidates()])
    }

    pub fn from_built(case: &GridCase, built: Vec<bool>) -> Self {
        let investment_cost = case
            .candidates()
            .iter()
            .zip(&built)
            .filter(|(_, &b)| b)
            .map(|(&l, _)| case.lines[l].build_cost.unwrap_or(0.0))
            .sum();
        Self {
            built,
            investment_cost,
        }
    }

    /// Whether line `l` (any line index) is in service under this plan.
    pub fn in_service(&self, case: &GridCase) -> Vec<bool> {
        let mut k = 0;
        case.lines
            .iter()
            .map(|line| {
                if line.is_candidate() {
                    k += 1;
                    self.built[k - 1]
                } else {
                    true
                }
            })
            .collect()
    }

    pub fn check(&self, case: &GridCase) -> Result<()> {
        let n = case.num_candidates();
        if self.built.len() != n {
            return Err(Error::Dimension(format!(
                "plan has {} entries; case has {} candidate lines",
                self.built.len(),
                n
            )));
        }
        Ok(())
    }
}

/// Serialized plan, keyed by candidate line ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub investment_cost: f64,
    pub built: Vec<u64>,
    pub not_built: Vec<u64>,
}

impl PlanFile {
    pub fn new(case: &GridCase, plan: &ExpansionPlan) -> Self {
        let mut built = Vec::new();
        let mut not_built = Vec::new();
        for (k, &l) in case.candidates().iter().enumerate() {
            if plan.built[k] {
                built.push(case.lines[l].id);
            } else {
                not_built.push(case.lines[l].id);
            }
        }
        Self {
            investment_cost: plan.investment_cost,
            built,
            not_built,
        }
    }

    /// The plan for `case`; every candidate must be listed exactly once.
    pub fn to_plan(&self, case: &GridCase) -> Result<ExpansionPlan> {
        let cands = case.candidates();
        let ids: Vec<u64> = cands.iter().map(|&l| case.lines[l].id).collect();
        let listed = self.built.len() + self.not_built.len();
        let mut built = vec![false; ids.len()];
        let mut seen = vec![false; ids.len()];
        for (list, value) in [(&self.built, true), (&self.not_built, false)] {
            for id in list {
                let Some(k) = ids.iter().position(|c| c == id) else {
                    return Err(Error::Dimension(format!("plan lists line {id}, which is not a candidate")));
                };
                if seen[k] {
                    return Err(Error::Dimension(format!("plan lists line {id} twice")));
                }
                seen[k] = true;
                built[k] = value;
            }
        }
        if listed != ids.len() {
            return Err(Error::Dimension(format!(
                "plan covers {listed} lines; case has {} candidate lines",
                ids.len()
            )));
        }
        Ok(ExpansionPlan::from_built(case, built))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub operating_cost: f64,
    /// MW per generating unit.
    pub generation: Vec<f64>,
    /// MW per load.
    pub shedding: Vec<f64>,
    /// MW per line, from-bus to to-bus; zero for unbuilt candidates.
    pub flows: Vec<f64>,
    /// Radians per bus.
    pub angles: Vec<f64>,
    /// Cost sensitivity to each realized demand.
    pub mu_d: Vec<f64>,
    /// Cost sensitivity to each realized capacity.
    pub mu_g: Vec<f64>,
}

impl DispatchResult {
    /// Broken feasibility invariants at tolerance `tol` (MW, scaled by
    /// `1 + |value|`).
    pub fn violations(&self, case: &GridCase, plan: &ExpansionPlan, r: &Realization, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let near = |a: f64, b: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));
        let cost: f64 = case
            .generators
            .iter()
            .zip(&self.generation)
            .map(|(g, p)| g.marginal_cost * p)
            .chain(case.loads.iter().zip(&self.shedding).map(|(l, p)| l.marginal_shed_cost * p))
            .sum();
        if !near(cost, self.operating_cost) {
            out.push(format!("operating cost {} differs from priced dispatch {cost}", self.operating_cost));
        }
        let mut net = vec![0.0; case.buses.len()];
        let mut mag = vec![0.0; case.buses.len()];
        for (i, g) in case.generators.iter().enumerate() {
            net[g.bus] += self.generation[i];
            mag[g.bus] += self.generation[i].abs();
            if self.generation[i] < -tol || self.generation[i] > r.capacity[i] + tol * (1.0 + r.capacity[i]) {
                out.push(format!("unit {} generation {} outside [0, {}]", g.id, self.generation[i], r.capacity[i]));
            }
        }
        for (j, l) in case.loads.iter().enumerate() {
            net[l.bus] += self.shedding[j] - r.demand[j];
            mag[l.bus] += self.shedding[j].abs() + r.demand[j].abs();
            let cap = l.shed_fraction * r.demand[j];
            if self.shedding[j] < -tol || self.shedding[j] > cap + tol * (1.0 + cap) {
                out.push(format!("load {} shedding {} outside [0, {cap}]", l.id, self.shedding[j]));
            }
        }
        let in_service = plan.in_service(case);
        for (k, line) in case.lines.iter().enumerate() {
            let f = self.flows[k];
            net[line.from_bus] -= f;
            net[line.to_bus] += f;
            mag[line.from_bus] += f.abs();
            mag[line.to_bus] += f.abs();
            if !in_service[k] {
                if f != 0.0 {
                    out.push(format!("unbuilt line {} carries {f}", line.id));
                }
                continue;
            }
            if f.abs() > line.capacity + tol * (1.0 + line.capacity) {
                out.push(format!("line {} flow {f} above capacity {}", line.id, line.capacity));
            }
            let dc = case.base_mva * (self.angles[line.from_bus] - self.angles[line.to_bus]) / line.reactance;
            if !near(f, dc) {
                out.push(format!("line {} flow {f} does not match angle difference flow {dc}", line.id));
            }
        }
        for (n, b) in net.iter().enumerate() {
            if b.abs() > tol * (1.0 + mag[n]) {
                out.push(format!("bus {} balance residual {b}", case.buses[n].id));
            }
        }
        out
    }
}

/// Dispatch LP with handles to the rows and columns the rest of the crate
/// reads back.
#[derive(Debug, Clone)]
pub struct DispatchLp {
    pub lp: LinearProgram,
    pub angle: Vec<VarId>,
    pub flow: Vec<VarId>,
    pub generation: Vec<VarId>,
    pub shedding: Vec<VarId>,
    pub balance_rows: Vec<RowId>,
    pub demand_rows: Vec<RowId>,
    pub capacity_rows: Vec<RowId>,
}

impl DispatchLp {
    /// Replaces the realized demands and capacities.
    pub fn set_realization(&mut self, r: &Realization) {
        for (row, &d) in self.demand_rows.iter().zip(&r.demand) {
            self.lp.set_rhs(*row, d);
        }
        for (row, &c) in self.capacity_rows.iter().zip(&r.capacity) {
            self.lp.set_rhs(*row, c);
        }
    }
}

pub fn build_dispatch_lp(case: &GridCase, plan: &ExpansionPlan, r: &Realization) -> DispatchLp {
    let in_service = plan.in_service(case);
    let mut lp = LinearProgram::new();
    let inf = f64::INFINITY;

    let angle: Vec<VarId> = case
        .buses
        .iter()
        .map(|b| lp.add_var(format!("theta_{}", b.id), -inf, inf, 0.0))
        .collect();
    let flow: Vec<VarId> = case
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let cap = if in_service[k] { l.capacity } else { 0.0 };
            lp.add_var(format!("flow_{}", l.id), -cap, cap, 0.0)
        })
        .collect();
    let generation: Vec<VarId> = case
        .generators
        .iter()
        .map(|g| lp.add_var(format!("gen_{}", g.id), 0.0, inf, g.marginal_cost))
        .collect();
    let capacity: Vec<VarId> = case
        .generators
        .iter()
        .map(|g| lp.add_var(format!("cap_{}", g.id), -inf, inf, 0.0))
        .collect();
    let shedding: Vec<VarId> = case
        .loads
        .iter()
        .map(|d| lp.add_var(format!("shed_{}", d.id), 0.0, inf, d.marginal_shed_cost))
        .collect();
    let demand: Vec<VarId> = case
        .loads
        .iter()
        .map(|d| lp.add_var(format!("demand_{}", d.id), -inf, inf, 0.0))
        .collect();

    let mut terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); case.buses.len()];
    for (i, g) in case.generators.iter().enumerate() {
        terms[g.bus].push((generation[i], 1.0));
    }
    for (j, d) in case.loads.iter().enumerate() {
        terms[d.bus].push((shedding[j], 1.0));
        terms[d.bus].push((demand[j], -1.0));
    }
    for (k, l) in case.lines.iter().enumerate() {
        if in_service[k] {
            terms[l.from_bus].push((flow[k], -1.0));
            terms[l.to_bus].push((flow[k], 1.0));
        }
    }
    let balance_rows = terms
        .into_iter()
        .enumerate()
        .map(|(n, t)| lp.add_row(format!("balance_{}", case.buses[n].id), t, RowKind::Eq, 0.0))
        .collect();

    for (k, l) in case.lines.iter().enumerate() {
        if in_service[k] {
            let b = case.base_mva / l.reactance;
            lp.add_row(
                format!("dcflow_{}", l.id),
                vec![(flow[k], 1.0), (angle[l.from_bus], -b), (angle[l.to_bus], b)],
                RowKind::Eq,
                0.0,
            );
        }
    }
    for (i, g) in case.generators.iter().enumerate() {
        lp.add_row(
            format!("genmax_{}", g.id),
            vec![(generation[i], 1.0), (capacity[i], -1.0)],
            RowKind::Le,
            0.0,
        );
    }
    for (j, d) in case.loads.iter().enumerate() {
        lp.add_row(
            format!("shedmax_{}", d.id),
            vec![(shedding[j], 1.0), (demand[j], -d.shed_fraction)],
            RowKind::Le,
            0.0,
        );
    }
    let demand_rows = case
        .loads
        .iter()
        .enumerate()
        .map(|(j, d)| lp.add_row(format!("fixdemand_{}", d.id), vec![(demand[j], 1.0)], RowKind::Eq, r.demand[j]))
        .collect();
    let capacity_rows = case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| {
            lp.add_row(format!("fixcapacity_{}", g.id), vec![(capacity[i], 1.0)], RowKind::Eq, r.capacity[i])
        })
        .collect();

    let comp = components(case, |l| in_service[l]);
    for (n, &c) in comp.iter().enumerate() {
        if c == n {
            lp.add_row(format!("reference_{}", case.buses[n].id), vec![(angle[n], 1.0)], RowKind::Eq, 0.0);
        }
    }

    DispatchLp {
        lp,
        angle,
        flow,
        generation,
        shedding,
        balance_rows,
        demand_rows,
        capacity_rows,
    }
}

fn extract(model: &DispatchLp, sol: &LpSolution) -> DispatchResult {
    let pick = |vars: &[VarId]| vars.iter().map(|v| sol.x[v.0]).collect::<Vec<_>>();
    let duals = |rows: &[RowId]| rows.iter().map(|r| sol.row_duals[r.0]).collect::<Vec<_>>();
    DispatchResult {
        operating_cost: sol.objective,
        generation: pick(&model.generation),
        shedding: pick(&model.shedding),
        flows: pick(&model.flow),
        angles: pick(&model.angle),
        mu_d: duals(&model.demand_rows),
        mu_g: duals(&model.capacity_rows),
    }
}

/// Buses whose balance cannot be met: solves a phase-one style program with
/// unserved and surplus slack on every balance row and reports the buses
/// where some slack is needed.
fn infeasible_buses(case: &GridCase, model: &DispatchLp, tol: &Tolerances) -> Result<Vec<u64>> {
    let src = &model.lp;
    let mut probe = LinearProgram::new();
    for v in 0..src.num_vars() {
        let (lo, hi) = src.bounds(VarId(v));
        probe.add_var(src.var_name(VarId(v)), lo, hi, 0.0);
    }
    let mut bus_of_row = vec![None; src.num_rows()];
    for (n, r) in model.balance_rows.iter().enumerate() {
        bus_of_row[r.0] = Some(n);
    }
    let mut slacks = Vec::new();
    for (k, row) in src.rows().iter().enumerate() {
        let mut coefs = row.coefs.clone();
        if let Some(n) = bus_of_row[k] {
            let up = probe.add_var(format!("unserved_{n}"), 0.0, f64::INFINITY, 1.0);
            let down = probe.add_var(format!("surplus_{n}"), 0.0, f64::INFINITY, 1.0);
            coefs.push((up, 1.0));
            coefs.push((down, -1.0));
            slacks.push((n, up, down));
        }
        probe.add_row(row.name.clone(), coefs, row.kind, row.rhs);
    }
    let sol = linopt::solve_lp(&probe, tol)?;
    let mut buses: Vec<u64> = slacks
        .into_iter()
        .filter(|&(_, up, down)| sol.x[up.0] + sol.x[down.0] > 1e-7)
        .map(|(n, _, _)| case.buses[n].id)
        .collect();
    buses.sort_unstable();
    Ok(buses)
}

/// Repeated dispatch solves for one plan, warm-started from the previous
/// basis.
pub struct Dispatcher<'a> {
    case: &'a GridCase,
    model: DispatchLp,
    basis: Option<Basis>,
    tol: Tolerances,
}

impl<'a> Dispatcher<'a> {
    pub fn new(case: &'a GridCase, plan: &ExpansionPlan) -> Result<Self> {
        plan.check(case)?;
        let model = build_dispatch_lp(case, plan, &Realization::nominal(case));
        Ok(Self {
            case,
            model,
            basis: None,
            tol: Tolerances::default(),
        })
    }

    pub fn solve(&mut self, r: &Realization) -> Result<DispatchResult> {
        let basis = self.basis.take();
        let (res, basis) = self.solve_from(r, basis.as_ref())?;
        self.basis = Some(basis);
        Ok(res)
    }

    /// Solves from an explicit starting basis, leaving the stored one alone.
    pub fn solve_from(&mut self, r: &Realization, start: Option<&Basis>) -> Result<(DispatchResult, Basis)> {
        if r.demand.len() != self.case.loads.len() || r.capacity.len() != self.case.generators.len() {
            return Err(Error::Dimension("realization does not match the case".into()));
        }
        self.model.set_realization(r);
        let sol = solve_lp_warm(&self.model.lp, start, &self.tol)?;
        match sol.status {
            LpStatus::Optimal => Ok((extract(&self.model, &sol), sol.basis)),
            _ => {
                let buses = infeasible_buses(self.case, &self.model, &self.tol)?;
                debug_assert!(
                    self.case.loads.iter().any(|l| l.shed_fraction < 1.0),
                    "dispatch cannot be infeasible when every load may be fully shed"
                );
                Err(Error::InfeasibleDispatch { buses })
            }
        }
    }

    pub fn model(&self) -> &DispatchLp {
        &self.model
    }
}

pub fn solve_dispatch(case: &GridCase, plan: &ExpansionPlan, r: &Realization) -> Result<DispatchResult> {
    Dispatcher::new(case, plan)?.solve(r)
}
