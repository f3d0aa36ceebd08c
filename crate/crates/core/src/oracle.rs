//! Brute-force references for small instances: the exact worst case of a
//! plan by enumerating every vertex, and the exact robust plan by
//! enumerating every affordable plan on top of that.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::recourse::{DispatchResult, Dispatcher, ExpansionPlan};
use crate::uncertainty::{enumerate_vertices, vertex_count, Budgets, Realization};

/// Costs within this relative distance of each other count as ties.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_vertices: u128,
    pub max_plans: u128,
    pub time_limit: Option<Duration>,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_vertices: 1_000_000,
            max_plans: 1 << 20,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorstCase {
    pub realization: Realization,
    pub dispatch: DispatchResult,
}

fn near_or_above(cost: f64, best: f64) -> bool {
    cost >= best - TIE_TOL * (1.0 + best.abs())
}

/// Costliest vertex for `plan`; among near-ties the lexicographically
/// smallest one.
pub fn exact_worst_case(case: &GridCase, plan: &ExpansionPlan, budgets: Budgets, cap: u128) -> Result<WorstCase> {
    let vertices: Vec<Realization> = enumerate_vertices(case, budgets, cap)?.collect();
    let mut dispatcher = Dispatcher::new(case, plan)?;
    let results = vertices
        .iter()
        .map(|r| dispatcher.solve(r))
        .collect::<Result<Vec<_>>>()?;
    let max = results.iter().map(|d| d.operating_cost).fold(f64::NEG_INFINITY, f64::max);
    let k = results
        .iter()
        .position(|d| near_or_above(d.operating_cost, max))
        .expect("at least the nominal vertex exists");
    Ok(WorstCase {
        realization: vertices[k].clone(),
        dispatch: results[k].clone(),
    })
}

#[derive(Debug, Clone)]
pub struct RobustPlan {
    pub plan: ExpansionPlan,
    pub total_cost: f64,
    pub worst: Realization,
    pub worst_cost: f64,
    /// Plans whose worst case was fully enumerated.
    pub plans_evaluated: usize,
}

/// Every plan within the investment budget, cheapest first; equal costs in
/// increasing binary order of the build vector.
fn affordable_plans(case: &GridCase) -> Vec<ExpansionPlan> {
    let n = case.num_candidates();
    let mut plans: Vec<ExpansionPlan> = (0u64..1 << n)
        .map(|mask| ExpansionPlan::from_built(case, (0..n).map(|k| mask >> (n - 1 - k) & 1 == 1).collect()))
        .filter(|p| case.investment_budget.is_none_or(|b| p.investment_cost <= b))
        .collect();
    plans.sort_by(|a, b| a.investment_cost.total_cmp(&b.investment_cost).then_with(|| a.built.cmp(&b.built)));
    plans
}

/// Cheapest plan by investment plus `sigma` times its exact worst
/// operating cost. Near-ties go to the plan listed first by
/// [`affordable_plans`] order.
pub fn exact_robust_plan(case: &GridCase, budgets: Budgets, caps: OracleBudget) -> Result<RobustPlan> {
    let n = case.num_candidates();
    let plan_count = if n >= 127 { u128::MAX } else { 1u128 << n };
    if plan_count > caps.max_plans {
        return Err(Error::CapExceeded {
            what: "plan",
            count: plan_count,
            cap: caps.max_plans,
        });
    }
    let count = vertex_count(case, budgets);
    let vertices: Vec<Realization> = enumerate_vertices(case, budgets, caps.max_vertices)?.collect();
    debug_assert_eq!(vertices.len() as u128, count);
    let started = Instant::now();

    let mut best: Option<RobustPlan> = None;
    // Vertices that were worst for recent plans; tried first so that
    // hopeless plans are abandoned early.
    let mut hot: Vec<usize> = Vec::new();
    let mut evaluated = 0;
    for plan in affordable_plans(case) {
        if let Some(t) = caps.time_limit {
            if started.elapsed() > t {
                return Err(Error::TimeLimit(t));
            }
        }
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.total_cost);
        let beats = |total: f64| !incumbent.is_finite() || total < incumbent - TIE_TOL * (1.0 + incumbent.abs());
        if !beats(plan.investment_cost) {
            break;
        }
        let mut dispatcher = Dispatcher::new(case, &plan)?;
        let mut costs: Vec<Option<f64>> = vec![None; vertices.len()];
        let mut running = f64::NEG_INFINITY;
        let order = hot.iter().copied().chain((0..vertices.len()).filter(|k| !hot.contains(k)));
        let mut pruned = false;
        for k in order.collect::<Vec<_>>() {
            let c = dispatcher.solve(&vertices[k])?.operating_cost;
            costs[k] = Some(c);
            running = running.max(c);
            if !beats(plan.investment_cost + case.sigma * running) {
                pruned = true;
                hot.retain(|&h| h != k);
                hot.insert(0, k);
                hot.truncate(8);
                break;
            }
        }
        if pruned {
            continue;
        }
        evaluated += 1;
        let worst_k = (0..vertices.len())
            .find(|&k| near_or_above(costs[k].expect("every vertex evaluated"), running))
            .expect("at least one vertex");
        hot.retain(|&h| h != worst_k);
        hot.insert(0, worst_k);
        hot.truncate(8);
        best = Some(RobustPlan {
            total_cost: plan.investment_cost + case.sigma * running,
            worst_cost: running,
            worst: vertices[worst_k].clone(),
            plan,
            plans_evaluated: evaluated,
        });
    }
    let mut best = best.ok_or(Error::MasterInfeasible)?;
    best.plans_evaluated = evaluated;
    Ok(best)
}
