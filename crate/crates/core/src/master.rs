//! Master problem: investment decisions plus one operation block per
//! stored worst-case realization, with `alpha` bounding every block's
//! operating cost from above.
//!
//! The flow on a candidate line is tied to the angle difference only when
//! the line is built, through the disjunction
//! `|flow - b (theta_from - theta_to)| <= M (1 - build)` and
//! `|flow| <= capacity * build`, where `b = base_mva / reactance`.

use std::time::Duration;

use linopt::{solve_mip, LinearProgram, MipError, MipOptions, MipStatus, MixedIntegerProgram, RowKind, Tolerances, VarId};

use crate::error::{Error, Result};
use crate::grid::{components, GridCase};
use crate::recourse::{DispatchResult, Dispatcher, ExpansionPlan};
use crate::uncertainty::Realization;

/// How big the disjunctive constant of each candidate line is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMPolicy {
    /// Largest angle difference (radians) assumed across an unbuilt
    /// candidate; `M = base_mva * angle_span / reactance`.
    pub angle_span: f64,
    /// Also bound the angle difference by the cheapest path of existing
    /// lines between the endpoints, each line contributing
    /// `capacity * reactance / base_mva`, and use the smaller bound.
    pub path_bound: bool,
    /// Refuse to build a model with any `M` above this.
    pub cap: f64,
    /// How many times `M` may be doubled after a failed validity check.
    pub max_doublings: usize,
}

impl Default for BigMPolicy {
    fn default() -> Self {
        Self {
            angle_span: 2.0 * std::f64::consts::PI / 5.0,
            path_bound: true,
            cap: 1e7,
            max_doublings: 3,
        }
    }
}

/// Largest possible angle difference from `source` to every bus when only
/// existing lines are in service (infinite where unreachable).
fn angle_reach(case: &GridCase, source: usize) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = case.buses.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for l in case.lines.iter().filter(|l| !l.is_candidate()) {
        let w = l.capacity * l.reactance / case.base_mva;
        adj[l.from_bus].push((l.to_bus, w));
        adj[l.to_bus].push((l.from_bus, w));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        let d = f64::from_bits(d);
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                // Nonnegative floats order like their bit patterns.
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    dist
}

impl BigMPolicy {
    /// One constant per candidate line, scaled by `2^doublings`.
    pub fn values(&self, case: &GridCase, doublings: usize) -> Result<Vec<f64>> {
        let scale = f64::powi(2.0, doublings as i32);
        let mut reach: std::collections::HashMap<usize, Vec<f64>> = std::collections::HashMap::new();
        case.candidates()
            .iter()
            .map(|&l| {
                let line = &case.lines[l];
                let mut span = self.angle_span;
                if self.path_bound {
                    let from = reach.entry(line.from_bus).or_insert_with(|| angle_reach(case, line.from_bus));
                    span = span.min(from[line.to_bus]);
                }
                let m = scale * case.base_mva * span / line.reactance;
                if m > self.cap || !m.is_finite() {
                    Err(Error::BigMOverflow {
                        line: line.id,
                        value: m,
                        cap: self.cap,
                    })
                } else {
                    Ok(m)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BlockVars {
    pub angle: Vec<VarId>,
    pub flow: Vec<VarId>,
    pub generation: Vec<VarId>,
    pub shedding: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct MasterModel {
    pub mip: MixedIntegerProgram,
    /// Build decision per candidate, in `GridCase::candidates` order.
    pub build: Vec<VarId>,
    pub alpha: VarId,
    pub blocks: Vec<BlockVars>,
}

pub fn build_master(case: &GridCase, realizations: &[Realization], big_m: &[f64]) -> MasterModel {
    let cands = case.candidates();
    assert_eq!(big_m.len(), cands.len(), "one big-M per candidate line");
    let mut cand_pos = vec![None; case.lines.len()];
    for (k, &l) in cands.iter().enumerate() {
        cand_pos[l] = Some(k);
    }
    let inf = f64::INFINITY;
    let mut lp = LinearProgram::new();

    let build: Vec<VarId> = cands
        .iter()
        .map(|&l| {
            let line = &case.lines[l];
            lp.add_var(format!("build_{}", line.id), 0.0, 1.0, line.build_cost.unwrap_or(0.0))
        })
        .collect();
    let alpha = lp.add_var("alpha", 0.0, inf, case.sigma);

    if let Some(budget) = case.investment_budget {
        let coefs = build
            .iter()
            .zip(&cands)
            .map(|(&v, &l)| (v, case.lines[l].build_cost.unwrap_or(0.0)))
            .collect();
        lp.add_row("investment_budget", coefs, RowKind::Le, budget);
    }

    // References per component of the full network: within a component the
    // disjunctions couple every angle, so one reference is enough.
    let comp = components(case, |_| true);

    let mut blocks = Vec::with_capacity(realizations.len());
    for (m, r) in realizations.iter().enumerate() {
        let angle: Vec<VarId> = case
            .buses
            .iter()
            .enumerate()
            .map(|(n, b)| {
                let fixed = comp[n] == n;
                let (lo, hi) = if fixed { (0.0, 0.0) } else { (-inf, inf) };
                lp.add_var(format!("theta_{}_{m}", b.id), lo, hi, 0.0)
            })
            .collect();
        let flow: Vec<VarId> = case
            .lines
            .iter()
            .map(|l| {
                let (lo, hi) = if l.is_candidate() { (-inf, inf) } else { (-l.capacity, l.capacity) };
                lp.add_var(format!("flow_{}_{m}", l.id), lo, hi, 0.0)
            })
            .collect();
        let generation: Vec<VarId> = case
            .generators
            .iter()
            .zip(&r.capacity)
            .map(|(g, &cap)| lp.add_var(format!("gen_{}_{m}", g.id), 0.0, cap, 0.0))
            .collect();
        let shedding: Vec<VarId> = case
            .loads
            .iter()
            .zip(&r.demand)
            .map(|(d, &p)| lp.add_var(format!("shed_{}_{m}", d.id), 0.0, d.shed_fraction * p, 0.0))
            .collect();

        let mut cost = vec![(alpha, 1.0)];
        for (i, g) in case.generators.iter().enumerate() {
            if g.marginal_cost != 0.0 {
                cost.push((generation[i], -g.marginal_cost));
            }
        }
        for (j, d) in case.loads.iter().enumerate() {
            if d.marginal_shed_cost != 0.0 {
                cost.push((shedding[j], -d.marginal_shed_cost));
            }
        }
        lp.add_row(format!("worst_cost_{m}"), cost, RowKind::Ge, 0.0);

        let mut terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); case.buses.len()];
        let mut demand = vec![0.0; case.buses.len()];
        for (i, g) in case.generators.iter().enumerate() {
            terms[g.bus].push((generation[i], 1.0));
        }
        for (j, d) in case.loads.iter().enumerate() {
            terms[d.bus].push((shedding[j], 1.0));
            demand[d.bus] += r.demand[j];
        }
        for (k, l) in case.lines.iter().enumerate() {
            terms[l.from_bus].push((flow[k], -1.0));
            terms[l.to_bus].push((flow[k], 1.0));
        }
        for (n, t) in terms.into_iter().enumerate() {
            lp.add_row(format!("balance_{}_{m}", case.buses[n].id), t, RowKind::Eq, demand[n]);
        }

        for (k, l) in case.lines.iter().enumerate() {
            let b = case.base_mva / l.reactance;
            let dc = vec![(flow[k], 1.0), (angle[l.from_bus], -b), (angle[l.to_bus], b)];
            match cand_pos[k] {
                None => {
                    lp.add_row(format!("dcflow_{}_{m}", l.id), dc, RowKind::Eq, 0.0);
                }
                Some(c) => {
                    let big = big_m[c];
                    let v = build[c];
                    let mut upper = dc.clone();
                    upper.push((v, big));
                    lp.add_row(format!("dcflow_up_{}_{m}", l.id), upper, RowKind::Le, big);
                    let mut lower = dc;
                    lower.push((v, -big));
                    lp.add_row(format!("dcflow_lo_{}_{m}", l.id), lower, RowKind::Ge, -big);
                    lp.add_row(
                        format!("cap_up_{}_{m}", l.id),
                        vec![(flow[k], 1.0), (v, -l.capacity)],
                        RowKind::Le,
                        0.0,
                    );
                    lp.add_row(
                        format!("cap_lo_{}_{m}", l.id),
                        vec![(flow[k], 1.0), (v, l.capacity)],
                        RowKind::Ge,
                        0.0,
                    );
                }
            }
        }
        blocks.push(BlockVars {
            angle,
            flow,
            generation,
            shedding,
        });
    }

    MasterModel {
        mip: MixedIntegerProgram::new(lp, build.clone()),
        build,
        alpha,
        blocks,
    }
}

#[derive(Debug, Clone)]
pub struct MasterOptions {
    pub big_m: BigMPolicy,
    pub tolerances: Tolerances,
    /// Previous plan, tried first as an incumbent.
    pub hint: Option<ExpansionPlan>,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            big_m: BigMPolicy::default(),
            tolerances: Tolerances::default(),
            hint: None,
            node_limit: 2_000_000,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub plan: ExpansionPlan,
    pub alpha_value: f64,
    /// Investment plus `sigma * alpha`.
    pub total_cost: f64,
    pub mip_gap: f64,
    pub nodes: usize,
    /// Per block: operating cost at the plan recomputed by the dispatch LP.
    pub dispatch_costs: Vec<f64>,
    /// Per block operating point read from the master solution (no
    /// sensitivities).
    pub blocks: Vec<DispatchResult>,
    /// Times every big-M was doubled before the validity check passed.
    pub big_m_doublings: usize,
    /// Whether the final solution passed the validity check.
    pub big_m_valid: bool,
}

/// Relative tolerance of the big-M validity check.
pub const VALIDITY_TOL: f64 = 1e-7;

pub fn solve_master(case: &GridCase, realizations: &[Realization], opts: &MasterOptions) -> Result<MasterSolution> {
    // The caller's plan, then building every candidate when affordable.
    let everything = ExpansionPlan::from_built(case, vec![true; case.num_candidates()]);
    let affordable = case.investment_budget.is_none_or(|b| everything.investment_cost <= b);
    let hints: Vec<Vec<f64>> = opts
        .hint
        .iter()
        .chain(affordable.then_some(&everything))
        .map(|p| p.built.iter().map(|&b| f64::from(u8::from(b))).collect())
        .collect();
    let mut doublings = 0;
    loop {
        let big_m = opts.big_m.values(case, doublings)?;
        let model = build_master(case, realizations, &big_m);
        let mip_opts = MipOptions {
            tolerances: opts.tolerances,
            node_limit: opts.node_limit,
            time_limit: opts.time_limit,
            incumbent_hints: hints.clone(),
            ..MipOptions::default()
        };
        let sol = match solve_mip(&model.mip, &mip_opts) {
            Ok(s) => s,
            Err(MipError::LimitExceeded { limit: "time", .. }) if opts.time_limit.is_some() => {
                return Err(Error::TimeLimit(opts.time_limit.unwrap_or_default()));
            }
            Err(e) => return Err(e.into()),
        };
        match sol.status {
            MipStatus::Optimal => {}
            MipStatus::Infeasible | MipStatus::Unbounded => return Err(Error::MasterInfeasible),
        }
        let built: Vec<bool> = model.build.iter().map(|v| sol.x[v.0] > 0.5).collect();
        let plan = ExpansionPlan::from_built(case, built);
        let alpha_value = sol.x[model.alpha.0];

        let mut dispatcher = Dispatcher::new(case, &plan)?;
        let dispatch_costs = realizations
            .iter()
            .map(|r| dispatcher.solve(r).map(|d| d.operating_cost))
            .collect::<Result<Vec<_>>>()?;
        let worst = dispatch_costs.iter().copied().fold(0.0, f64::max);
        let valid = alpha_value <= worst + VALIDITY_TOL * (1.0 + worst.abs());

        if valid || doublings >= opts.big_m.max_doublings {
            let blocks = model
                .blocks
                .iter()
                .map(|b| {
                    let pick = |vars: &[VarId]| vars.iter().map(|v| sol.x[v.0]).collect::<Vec<_>>();
                    let generation = pick(&b.generation);
                    let shedding = pick(&b.shedding);
                    let operating_cost = case
                        .generators
                        .iter()
                        .zip(&generation)
                        .map(|(g, p)| g.marginal_cost * p)
                        .chain(case.loads.iter().zip(&shedding).map(|(l, p)| l.marginal_shed_cost * p))
                        .sum();
                    DispatchResult {
                        operating_cost,
                        generation,
                        shedding,
                        flows: pick(&b.flow),
                        angles: pick(&b.angle),
                        mu_d: Vec::new(),
                        mu_g: Vec::new(),
                    }
                })
                .collect();
            return Ok(MasterSolution {
                total_cost: plan.investment_cost + case.sigma * alpha_value,
                plan,
                alpha_value,
                mip_gap: sol.rel_gap,
                nodes: sol.nodes,
                dispatch_costs,
                blocks,
                big_m_doublings: doublings,
                big_m_valid: valid,
            });
        }
        doublings += 1;
    }
}
