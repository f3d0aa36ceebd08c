//! Outer loop: alternate the worst-case search for the current plan with
//! the master problem over every realization found so far.

use std::time::{Duration, Instant};

use linopt::Tolerances;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::master::{solve_master, BigMPolicy, MasterOptions};
use crate::recourse::{solve_dispatch, DispatchResult, ExpansionPlan};
use crate::uncertainty::{Budgets, Realization};
use crate::worstcase::{default_starts, multistart_worst_case, InnerState};

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub budgets: Budgets,
    pub eps_ol: f64,
    pub eps_il: f64,
    /// Random starts for the worst-case search in addition to the nominal
    /// and heuristic ones. Zero runs a single search from nominal.
    pub multistart: usize,
    pub seed: u64,
    /// Largest number of master solves.
    pub max_outer: usize,
    pub max_inner: usize,
    pub time_limit: Option<Duration>,
    pub big_m: BigMPolicy,
    pub tolerances: Tolerances,
    pub node_limit: usize,
}

impl SolveConfig {
    pub fn new(budgets: Budgets) -> Self {
        Self {
            budgets,
            eps_ol: 1e-6,
            eps_il: 1e-12,
            multistart: 0,
            seed: 0,
            max_outer: 100,
            max_inner: 200,
            time_limit: None,
            big_m: BigMPolicy::default(),
            tolerances: Tolerances::default(),
            node_limit: 2_000_000,
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{name} must be positive, got {v}")))
            }
        };
        positive("outer tolerance", self.eps_ol)?;
        positive("inner tolerance", self.eps_il)?;
        positive("feasibility tolerance", self.tolerances.feas_tol)?;
        positive("duality gap tolerance", self.tolerances.duality_gap_tol)?;
        positive("MIP gap tolerance", self.tolerances.mip_gap_tol)?;
        positive("big-M angle span", self.big_m.angle_span)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    /// The search returned a realization already in the master without
    /// meeting the outer tolerance.
    Stalled,
    IterationLimit,
    TimeLimit,
}

impl Termination {
    pub fn converged(self) -> bool {
        self == Termination::Converged
    }
}

/// One master solve and the worst-case search that preceded it.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Plan returned by this iteration's master.
    pub plan: Vec<bool>,
    pub investment_cost: f64,
    /// Master objective.
    pub lower_bound: f64,
    /// Worst operating cost found for the previous plan.
    pub worst_cost: f64,
    /// This plan's investment plus `sigma * worst_cost`.
    pub upper_bound: f64,
    pub gap: f64,
    /// Previous plan's investment plus `sigma * worst_cost`: the cost of a
    /// feasible plan when the search is exact.
    pub searched_plan_cost: f64,
    pub inner_iters: usize,
    pub inner_runs: Vec<InnerState>,
    pub master_nodes: usize,
    pub big_m_doublings: usize,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveLog {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Outer-loop gap when the loop stopped.
    pub final_gap: f64,
    /// Lowest `investment + sigma * worst_cost` over every searched plan.
    pub best_searched_cost: f64,
    pub total_wall_ms: u128,
}

impl SolveLog {
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lower_bound).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub plan: ExpansionPlan,
    pub worst: Realization,
    pub worst_dispatch: DispatchResult,
    /// Plan investment plus `sigma` times the last worst operating cost.
    pub total_cost: f64,
    pub log: SolveLog,
}

fn rel_gap(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1.0)
}

fn derived_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn solve_robust_tnep(case: &GridCase, config: &SolveConfig) -> Result<SolveReport> {
    config.check()?;
    config.budgets.check(case)?;
    let started = Instant::now();
    let out_of_time = || config.time_limit.is_some_and(|t| started.elapsed() > t);

    let mut plan = ExpansionPlan::empty(case);
    let mut c_ol = 0.0;
    let mut realizations: Vec<Realization> = Vec::new();
    let mut records = Vec::new();
    let mut best_searched: Option<(f64, ExpansionPlan, Realization, DispatchResult)> = None;
    let mut k = 1;

    let (termination, final_gap, worst, worst_dispatch, final_plan, total) = loop {
        let iter_started = Instant::now();
        let starts = default_starts(case, config.budgets, config.multistart, derived_seed(config.seed, k));
        let search = multistart_worst_case(case, &plan, config.budgets, &starts, config.eps_il, config.max_inner)?;
        let wc = search.best.dispatch.operating_cost;
        let searched_cost = plan.investment_cost + case.sigma * wc;
        if best_searched.as_ref().is_none_or(|b| searched_cost < b.0) {
            best_searched = Some((
                searched_cost,
                plan.clone(),
                search.best.realization.clone(),
                search.best.dispatch.clone(),
            ));
        }
        let r = search.best.realization;

        if realizations.iter().any(|m| m.same_vertex(&r)) {
            let gap = rel_gap(searched_cost, c_ol);
            let t = if gap <= config.eps_ol {
                Termination::Converged
            } else {
                Termination::Stalled
            };
            break (t, gap, r, search.best.dispatch, plan, searched_cost);
        }
        if out_of_time() || records.len() >= config.max_outer {
            let t = if out_of_time() {
                Termination::TimeLimit
            } else {
                Termination::IterationLimit
            };
            let (cost, p, w, d) = best_searched.clone().expect("one search ran");
            break (t, rel_gap(searched_cost, c_ol), w, d, p, cost);
        }

        realizations.push(r.clone());
        k += 1;
        let opts = MasterOptions {
            big_m: config.big_m,
            tolerances: config.tolerances,
            hint: Some(plan.clone()),
            node_limit: config.node_limit,
            time_limit: config.time_limit.map(|t| t.saturating_sub(started.elapsed())),
        };
        let master = match solve_master(case, &realizations, &opts) {
            Ok(m) => m,
            Err(Error::TimeLimit(_)) => {
                let (cost, p, w, d) = best_searched.clone().expect("one search ran");
                break (Termination::TimeLimit, rel_gap(searched_cost, c_ol), w, d, p, cost);
            }
            Err(e) => return Err(e),
        };
        let upper = master.plan.investment_cost + case.sigma * wc;
        let gap = rel_gap(upper, master.total_cost);
        records.push(IterationRecord {
            k,
            plan: master.plan.built.clone(),
            investment_cost: master.plan.investment_cost,
            lower_bound: master.total_cost,
            worst_cost: wc,
            upper_bound: upper,
            gap,
            searched_plan_cost: searched_cost,
            inner_iters: search.runs.iter().map(|s| s.nu).sum(),
            inner_runs: search.runs,
            master_nodes: master.nodes,
            big_m_doublings: master.big_m_doublings,
            wall_ms: iter_started.elapsed().as_millis(),
        });
        plan = master.plan;
        c_ol = master.total_cost;
        if gap <= config.eps_ol {
            break (Termination::Converged, gap, r, search.best.dispatch, plan, upper);
        }
    };

    Ok(SolveReport {
        plan: final_plan,
        worst,
        worst_dispatch,
        total_cost: total,
        log: SolveLog {
            records,
            termination,
            final_gap,
            best_searched_cost: best_searched.map_or(f64::INFINITY, |b| b.0),
            total_wall_ms: started.elapsed().as_millis(),
        },
    })
}

/// Plan for the nominal realization only: the first master of the outer
/// loop, solved once.
pub fn deterministic_plan(case: &GridCase, config: &SolveConfig) -> Result<(ExpansionPlan, f64)> {
    config.check()?;
    let nominal = Realization::nominal(case);
    let opts = MasterOptions {
        big_m: config.big_m,
        tolerances: config.tolerances,
        hint: Some(ExpansionPlan::empty(case)),
        node_limit: config.node_limit,
        time_limit: config.time_limit,
    };
    let master = solve_master(case, std::slice::from_ref(&nominal), &opts)?;
    let cost = solve_dispatch(case, &master.plan, &nominal)?.operating_cost;
    let total = master.plan.investment_cost + case.sigma * cost;
    Ok((master.plan, total))
}
