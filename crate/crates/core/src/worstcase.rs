//! Worst-case search for a fixed plan by block coordinate descent.
//!
//! Each round solves the dispatch at the current realization, then moves to
//! the vertex maximizing the first-order expansion of the operating cost
//! around it. Because the operating cost is convex in the realized demands
//! and capacities, the expansion underestimates the true cost and the cost
//! sequence never decreases.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::Result;
use crate::grid::GridCase;
use crate::recourse::{DispatchResult, Dispatcher, ExpansionPlan};
use crate::uncertainty::{
    eligible_loads, eligible_units, realize, sample_realizations, Budgets, Realization, SampleMode,
};

/// Increase of the linearized cost from deviating each load and each unit.
/// Entries for loads or units that cannot deviate are zero.
pub fn taylor_gains(case: &GridCase, dispatch: &DispatchResult) -> (Vec<f64>, Vec<f64>) {
    let gd = case
        .loads
        .iter()
        .zip(&dispatch.mu_d)
        .map(|(l, &mu)| if l.demand_deviation > 0.0 { mu * l.demand_deviation } else { 0.0 })
        .collect();
    let gg = case
        .generators
        .iter()
        .zip(&dispatch.mu_g)
        .map(|(g, &mu)| if g.capacity_deviation > 0.0 { -mu * g.capacity_deviation } else { 0.0 })
        .collect();
    (gd, gg)
}

/// Indices of the `budget` largest strictly positive gains, ties by lowest
/// index.
fn top_positive(gains: &[f64], budget: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..gains.len()).filter(|&k| gains[k] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut z = vec![false; gains.len()];
    for &k in order.iter().take(budget) {
        z[k] = true;
    }
    z
}

/// Vertex maximizing the linearized cost around the realization at which
/// `dispatch` was computed.
pub fn taylor_argmax(case: &GridCase, budgets: Budgets, dispatch: &DispatchResult) -> Realization {
    let (gd, gg) = taylor_gains(case, dispatch);
    let z_d = top_positive(&gd, budgets.gamma_d);
    let z_g = top_positive(&gg, budgets.gamma_g);
    realize(case, &z_d, &z_g, budgets).expect("selection respects eligibility and budgets")
}

/// Linearized cost at `next`, expanded around `prev` where `dispatch` was
/// computed.
pub fn taylor_value(dispatch: &DispatchResult, prev: &Realization, next: &Realization) -> f64 {
    let dd: f64 = dispatch
        .mu_d
        .iter()
        .zip(next.demand.iter().zip(&prev.demand))
        .map(|(mu, (a, b))| mu * (a - b))
        .sum();
    let dg: f64 = dispatch
        .mu_g
        .iter()
        .zip(next.capacity.iter().zip(&prev.capacity))
        .map(|(mu, (a, b))| mu * (a - b))
        .sum();
    dispatch.operating_cost + dd + dg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerState {
    /// Iterations performed (dispatch evaluations, counting reused ones).
    pub nu: usize,
    pub c_il: f64,
    /// Operating cost at every iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub realization: Realization,
    pub dispatch: DispatchResult,
    pub state: InnerState,
}

fn relative_change(reference: f64, value: f64) -> f64 {
    if !reference.is_finite() {
        return f64::INFINITY;
    }
    (reference - value).abs() / reference.abs().max(1.0)
}

pub fn coordinate_descent(
    case: &GridCase,
    plan: &ExpansionPlan,
    budgets: Budgets,
    init: &Realization,
    eps_il: f64,
    max_iter: usize,
) -> Result<InnerOutcome> {
    let mut dispatcher = Dispatcher::new(case, plan)?;
    coordinate_descent_with(&mut dispatcher, case, budgets, init, eps_il, max_iter)
}

/// As [`coordinate_descent`], reusing a dispatcher built for the plan.
pub fn coordinate_descent_with(
    dispatcher: &mut Dispatcher<'_>,
    case: &GridCase,
    budgets: Budgets,
    init: &Realization,
    eps_il: f64,
    max_iter: usize,
) -> Result<InnerOutcome> {
    assert!(eps_il > 0.0, "inner tolerance must be positive");
    let mut r = init.clone();
    let mut d = dispatcher.solve(&r)?;
    let mut trace = vec![d.operating_cost];
    let mut best = (d.operating_cost, r.clone(), d.clone());
    let mut c_il = f64::INFINITY;
    let mut nu = 1;
    let converged = loop {
        if relative_change(c_il, d.operating_cost) <= eps_il {
            break true;
        }
        c_il = d.operating_cost;
        if nu >= max_iter.max(1) {
            break false;
        }
        nu += 1;
        let next = taylor_argmax(case, budgets, &d);
        if !next.same_vertex(&r) {
            r = next;
            d = dispatcher.solve(&r)?;
        }
        trace.push(d.operating_cost);
        if d.operating_cost > best.0 {
            best = (d.operating_cost, r.clone(), d.clone());
        }
    };
    let state = InnerState {
        nu,
        c_il,
        trace,
        converged,
    };
    if converged {
        Ok(InnerOutcome {
            realization: r,
            dispatch: d,
            state,
        })
    } else {
        Ok(InnerOutcome {
            realization: best.1,
            dispatch: best.2,
            state,
        })
    }
}

/// Nominal, then the vertex deviating the loads with the largest
/// `deviation * shed cost` and the units with the largest
/// `deviation * generation cost`, then `random` exact-budget vertices.
/// Duplicates are dropped, keeping the first occurrence.
pub fn default_starts(case: &GridCase, budgets: Budgets, random: usize, seed: u64) -> Vec<Realization> {
    let mut starts = vec![Realization::nominal(case)];
    if random > 0 {
        let rank = |scores: Vec<f64>, eligible: Vec<bool>, budget: usize| {
            let mut order: Vec<usize> = (0..scores.len()).filter(|&k| eligible[k]).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
            let mut z = vec![false; scores.len()];
            for &k in order.iter().take(budget) {
                z[k] = true;
            }
            z
        };
        let z_d = rank(
            case.loads.iter().map(|l| l.demand_deviation * l.marginal_shed_cost).collect(),
            eligible_loads(case),
            budgets.gamma_d,
        );
        let z_g = rank(
            case.generators.iter().map(|g| g.capacity_deviation * g.marginal_cost).collect(),
            eligible_units(case),
            budgets.gamma_g,
        );
        starts.push(realize(case, &z_d, &z_g, budgets).expect("ranked selection respects budgets"));
        starts.extend(sample_realizations(case, budgets, random, seed, SampleMode::ExactBudget));
    }
    let mut unique: Vec<Realization> = Vec::with_capacity(starts.len());
    for s in starts {
        if !unique.iter().any(|u| u.same_vertex(&s)) {
            unique.push(s);
        }
    }
    unique
}

#[derive(Debug, Clone)]
pub struct MultistartOutcome {
    pub best: InnerOutcome,
    /// Index into the start list of the winning run.
    pub start: usize,
    /// Every run's state, in start order.
    pub runs: Vec<InnerState>,
    /// Final cost of every run, in start order.
    pub costs: Vec<f64>,
}

/// Runs coordinate descent from each start and keeps the costliest result
/// (ties go to the earlier start).
pub fn multistart_worst_case(
    case: &GridCase,
    plan: &ExpansionPlan,
    budgets: Budgets,
    starts: &[Realization],
    eps_il: f64,
    max_iter: usize,
) -> Result<MultistartOutcome> {
    assert!(!starts.is_empty(), "at least one start is required");
    let mut dispatcher = Dispatcher::new(case, plan)?;
    let mut best: Option<(usize, InnerOutcome)> = None;
    let mut runs = Vec::with_capacity(starts.len());
    let mut costs = Vec::with_capacity(starts.len());
    for (k, s) in starts.iter().enumerate() {
        let out = coordinate_descent_with(&mut dispatcher, case, budgets, s, eps_il, max_iter)?;
        runs.push(out.state.clone());
        costs.push(out.dispatch.operating_cost);
        if best
            .as_ref()
            .is_none_or(|(_, b)| out.dispatch.operating_cost > b.dispatch.operating_cost)
        {
            best = Some((k, out));
        }
    }
    let (start, best) = best.expect("starts is nonempty");
    Ok(MultistartOutcome {
        best,
        start,
        runs,
        costs,
    })
}
