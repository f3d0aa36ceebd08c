#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rtnep::grid::{Bus, Generator, Line, LineStatus, Load};
use rtnep::{CaseFormat, ExpansionPlan, GridCase, Realization};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn garver() -> GridCase {
    GridCase::load(&data_path("garver6.json"), CaseFormat::NativeJson).expect("garver6 loads")
}

pub fn line(id: u64, from: usize, to: usize, x: f64, cap: f64, build_cost: Option<f64>) -> Line {
    Line {
        id,
        from_bus: from,
        to_bus: to,
        reactance: x,
        capacity: cap,
        status: if build_cost.is_some() {
            LineStatus::Candidate
        } else {
            LineStatus::Existing
        },
        build_cost,
    }
}

pub fn unit(id: u64, bus: usize, cost: f64, cap: f64, dev: f64) -> Generator {
    Generator {
        id,
        bus,
        marginal_cost: cost,
        nominal_capacity: cap,
        capacity_deviation: dev,
    }
}

pub fn load(id: u64, bus: usize, shed: f64, demand: f64, dev: f64) -> Load {
    Load {
        id,
        bus,
        marginal_shed_cost: shed,
        nominal_demand: demand,
        demand_deviation: dev,
        shed_fraction: 1.0,
    }
}

pub fn case(buses: usize, lines: Vec<Line>, generators: Vec<Generator>, loads: Vec<Load>) -> GridCase {
    GridCase {
        base_mva: 100.0,
        sigma: 1.0,
        investment_budget: None,
        buses: (0..buses).map(|b| Bus { id: b as u64 + 1 }).collect(),
        lines,
        generators,
        loads,
    }
}

/// Small random network: a random spanning tree of existing lines, a few
/// extra existing lines, random candidates, and random units and loads.
pub fn random_case(rng: &mut ChaCha8Rng, buses: usize, candidates: usize) -> GridCase {
    let mut lines = Vec::new();
    let mut id = 1;
    let mut next_id = || {
        id += 1;
        id - 1
    };
    for b in 1..buses {
        let a = rng.gen_range(0..b);
        let x = rng.gen_range(0.1..0.6);
        let cap = rng.gen_range(30.0..150.0f64).round();
        lines.push(line(next_id(), a, b, x, cap, None));
    }
    for _ in 0..buses / 3 {
        let a = rng.gen_range(0..buses);
        let b = (a + rng.gen_range(1..buses)) % buses;
        lines.push(line(next_id(), a, b, rng.gen_range(0.1..0.6), rng.gen_range(30.0..150.0f64).round(), None));
    }
    for _ in 0..candidates {
        let a = rng.gen_range(0..buses);
        let b = (a + rng.gen_range(1..buses)) % buses;
        let cost = rng.gen_range(5.0..60.0f64).round();
        lines.push(line(next_id(), a, b, rng.gen_range(0.1..0.6), rng.gen_range(50.0..150.0f64).round(), Some(cost)));
    }
    let units = rng.gen_range(2..=buses.max(2));
    let generators = (0..units)
        .map(|i| {
            let cap = rng.gen_range(50.0..300.0f64).round();
            let frac = if rng.gen_bool(0.8) { rng.gen_range(0.1..0.6) } else { 0.0 };
            unit(
                i as u64 + 1,
                rng.gen_range(0..buses),
                rng.gen_range(5.0..60.0f64).round(),
                cap,
                (cap * frac).round(),
            )
        })
        .collect();
    let count = rng.gen_range(2..=buses.max(2));
    let loads = (0..count)
        .map(|j| {
            let d = rng.gen_range(20.0..150.0f64).round();
            let frac = if rng.gen_bool(0.85) { rng.gen_range(0.05..0.4) } else { 0.0 };
            load(
                j as u64 + 1,
                rng.gen_range(0..buses),
                rng.gen_range(100.0..1500.0f64).round(),
                d,
                (d * frac).round(),
            )
        })
        .collect();
    let mut c = case(buses, lines, generators, loads);
    c.sigma = rng.gen_range(0.005..0.05);
    c
}

/// Garver topology with randomly drawn demands, capacities, costs and
/// deviations.
pub fn random_garver(rng: &mut ChaCha8Rng) -> GridCase {
    let mut c = garver();
    for l in &mut c.loads {
        l.nominal_demand = rng.gen_range(20.0..300.0f64).round();
        l.demand_deviation = (l.nominal_demand * rng.gen_range(0.0..0.5)).round();
        l.marginal_shed_cost = rng.gen_range(100.0..2000.0f64).round();
    }
    for g in &mut c.generators {
        g.nominal_capacity = rng.gen_range(100.0..600.0f64).round();
        g.capacity_deviation = (g.nominal_capacity * rng.gen_range(0.0..0.6)).round();
        g.marginal_cost = rng.gen_range(5.0..60.0f64).round();
    }
    c
}

pub fn random_plan(rng: &mut ChaCha8Rng, case: &GridCase) -> ExpansionPlan {
    let built = (0..case.num_candidates()).map(|_| rng.gen_bool(0.3)).collect();
    ExpansionPlan::from_built(case, built)
}

/// A point of the interval box (not necessarily a vertex).
pub fn random_point(rng: &mut ChaCha8Rng, case: &GridCase) -> Realization {
    let mut r = Realization::nominal(case);
    for (j, l) in case.loads.iter().enumerate() {
        r.demand[j] = l.nominal_demand + rng.gen_range(0.0..=1.0) * l.demand_deviation;
    }
    for (i, g) in case.generators.iter().enumerate() {
        r.capacity[i] = g.nominal_capacity - rng.gen_range(0.0..=1.0) * g.capacity_deviation;
    }
    r
}

/// Drops every candidate line except those at the given candidate indices.
pub fn keep_candidates(case: &GridCase, keep: &[usize]) -> GridCase {
    let mut c = case.clone();
    let cands = case.candidates();
    c.lines = case
        .lines
        .iter()
        .enumerate()
        .filter(|(l, _)| cands.iter().position(|k| k == l).is_none_or(|k| keep.contains(&k)))
        .map(|(_, l)| l.clone())
        .collect();
    c
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Operating cost from a separate formulation: flows are not variables,
/// every line limit is a pair of rows on the angle difference, and no angle
/// is pinned.
pub fn independent_dispatch_cost(case: &GridCase, plan: &ExpansionPlan, r: &Realization) -> f64 {
    use linopt::{solve_lp, LinearProgram, LpStatus, RowKind, Tolerances};
    let mut lp = LinearProgram::new();
    let theta: Vec<_> = (0..case.buses.len())
        .map(|n| lp.add_var(format!("t{n}"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();
    let gen: Vec<_> = case
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| lp.add_var(format!("g{i}"), 0.0, r.capacity[i], g.marginal_cost))
        .collect();
    let shed: Vec<_> = case
        .loads
        .iter()
        .enumerate()
        .map(|(j, l)| lp.add_var(format!("s{j}"), 0.0, l.shed_fraction * r.demand[j], l.marginal_shed_cost))
        .collect();
    let in_service = plan.in_service(case);
    let mut balance: Vec<Vec<(linopt::VarId, f64)>> = vec![Vec::new(); case.buses.len()];
    let mut demand = vec![0.0; case.buses.len()];
    for (i, g) in case.generators.iter().enumerate() {
        balance[g.bus].push((gen[i], 1.0));
    }
    for (j, l) in case.loads.iter().enumerate() {
        balance[l.bus].push((shed[j], 1.0));
        demand[l.bus] += r.demand[j];
    }
    for (k, line) in case.lines.iter().enumerate() {
        if !in_service[k] {
            continue;
        }
        let b = case.base_mva / line.reactance;
        let (f, t) = (line.from_bus, line.to_bus);
        balance[f].push((theta[f], -b));
        balance[f].push((theta[t], b));
        balance[t].push((theta[t], -b));
        balance[t].push((theta[f], b));
        let diff = vec![(theta[f], b), (theta[t], -b)];
        lp.add_row(format!("up{k}"), diff.clone(), RowKind::Le, line.capacity);
        lp.add_row(format!("lo{k}"), diff, RowKind::Ge, -line.capacity);
    }
    for (n, coefs) in balance.into_iter().enumerate() {
        let mut merged = std::collections::BTreeMap::new();
        for (v, a) in coefs {
            *merged.entry(v).or_insert(0.0) += a;
        }
        let coefs = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        lp.add_row(format!("bal{n}"), coefs, RowKind::Eq, demand[n]);
    }
    let sol = solve_lp(&lp, &Tolerances::default()).expect("oracle LP solves");
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective
}
