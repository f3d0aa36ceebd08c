mod common;

use common::{case, garver, keep_candidates, line, load, rel_diff, unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtnep::master::{build_master, solve_master, BigMPolicy, MasterOptions};
use rtnep::oracle::{exact_robust_plan, OracleBudget};
use rtnep::recourse::solve_dispatch;
use rtnep::uncertainty::sample_realizations;
use rtnep::uncertainty::SampleMode;
use rtnep::{Budgets, Error, ExpansionPlan, GridCase, Realization};

fn solve(case: &GridCase, realizations: &[Realization]) -> rtnep::master::MasterSolution {
    solve_master(case, realizations, &MasterOptions::default()).unwrap()
}

#[test]
fn no_realizations_builds_nothing() {
    let c = garver();
    let m = solve(&c, &[]);
    assert_eq!(m.plan, ExpansionPlan::empty(&c));
    assert_eq!(m.alpha_value, 0.0);
    assert_eq!(m.total_cost, 0.0);
}

#[test]
fn nominal_block_matches_plan_enumeration() {
    let c = garver();
    let m = solve(&c, &[Realization::nominal(&c)]);
    let oracle = exact_robust_plan(&c, Budgets::new(0, 0), OracleBudget::default()).unwrap();
    assert!(rel_diff(m.total_cost, oracle.total_cost) <= 1e-8, "{} vs {}", m.total_cost, oracle.total_cost);
    let direct = solve_dispatch(&c, &m.plan, &Realization::nominal(&c)).unwrap();
    assert!(rel_diff(m.plan.investment_cost + c.sigma * direct.operating_cost, oracle.total_cost) <= 1e-8);
}

/// Plan enumeration written out here, on a case small enough to list every
/// plan.
#[test]
fn nominal_block_matches_local_enumeration() {
    let c = keep_candidates(&garver(), &[5, 8, 10, 12, 13, 14]);
    assert_eq!(c.num_candidates(), 6);
    let nominal = Realization::nominal(&c);
    let mut best = f64::INFINITY;
    for mask in 0u32..64 {
        let plan = ExpansionPlan::from_built(&c, (0..6).map(|k| mask >> k & 1 == 1).collect());
        if c.investment_budget.is_some_and(|b| plan.investment_cost > b) {
            continue;
        }
        let cost = plan.investment_cost + c.sigma * solve_dispatch(&c, &plan, &nominal).unwrap().operating_cost;
        best = best.min(cost);
    }
    let m = solve(&c, &[nominal]);
    assert!(rel_diff(m.total_cost, best) <= 1e-8, "{} vs {best}", m.total_cost);
}

#[test]
fn built_candidates_obey_flow_definition() {
    let c = garver();
    let rs = sample_realizations(&c, Budgets::new(2, 1), 3, 4, SampleMode::ExactBudget);
    let m = solve(&c, &rs);
    let cands = c.candidates();
    assert!(m.plan.built.iter().any(|&b| b));
    for block in &m.blocks {
        for (k, &l) in cands.iter().enumerate() {
            let line = &c.lines[l];
            let defined = c.base_mva * (block.angles[line.from_bus] - block.angles[line.to_bus]) / line.reactance;
            if m.plan.built[k] {
                assert!((block.flows[l] - defined).abs() <= 1e-6 * (1.0 + defined.abs()));
                assert!(block.flows[l].abs() <= line.capacity * (1.0 + 1e-9));
            } else {
                assert!(block.flows[l].abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn zero_budget_builds_nothing() {
    let mut c = garver();
    c.investment_budget = Some(0.0);
    let rs = sample_realizations(&c, Budgets::new(3, 2), 4, 1, SampleMode::ExactBudget);
    let m = solve(&c, &rs);
    assert!(m.plan.built.iter().all(|&b| !b));
}

#[test]
fn lower_bound_grows_with_realizations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = garver();
    let pool = sample_realizations(&c, Budgets::new(3, 2), 6, rng.gen(), SampleMode::WithinBudget);
    let mut previous = f64::NEG_INFINITY;
    for k in 0..=pool.len() {
        let m = solve(&c, &pool[..k]);
        assert!(m.total_cost >= previous - 1e-9 * (1.0 + previous.abs()), "k={k}");
        previous = m.total_cost;
    }
}

#[test]
fn alpha_covers_every_block_and_is_not_inflated() {
    let c = garver();
    let rs = sample_realizations(&c, Budgets::new(5, 3), 4, 2, SampleMode::WithinBudget);
    let m = solve(&c, &rs);
    assert!(m.big_m_valid);
    assert_eq!(m.big_m_doublings, 0);
    let worst = m.dispatch_costs.iter().copied().fold(0.0, f64::max);
    assert!(rel_diff(m.alpha_value, worst) <= 1e-7, "{} vs {worst}", m.alpha_value);
    assert!(m.mip_gap <= 1e-8);
}

#[test]
fn master_blocks_are_feasible_dispatches() {
    let c = garver();
    let rs = sample_realizations(&c, Budgets::new(2, 2), 3, 8, SampleMode::ExactBudget);
    let m = solve(&c, &rs);
    for (block, r) in m.blocks.iter().zip(&rs) {
        assert!(m.alpha_value >= block.operating_cost - 1e-6 * (1.0 + block.operating_cost));
        let issues = block.violations(&c, &m.plan, r, 1e-6);
        assert!(issues.is_empty(), "{issues:?}");
    }
}

#[test]
fn oversized_constants_are_refused() {
    let c = garver();
    let policy = BigMPolicy {
        cap: 1.0,
        ..BigMPolicy::default()
    };
    assert!(matches!(policy.values(&c, 0), Err(Error::BigMOverflow { .. })));
    let opts = MasterOptions {
        big_m: policy,
        ..MasterOptions::default()
    };
    assert!(matches!(
        solve_master(&c, &[Realization::nominal(&c)], &opts),
        Err(Error::BigMOverflow { .. })
    ));
}

#[test]
fn path_bound_never_exceeds_angle_span() {
    let c = garver();
    let plain = BigMPolicy {
        path_bound: false,
        ..BigMPolicy::default()
    };
    let a = plain.values(&c, 0).unwrap();
    let b = BigMPolicy::default().values(&c, 0).unwrap();
    let doubled = BigMPolicy::default().values(&c, 2).unwrap();
    for k in 0..a.len() {
        assert!(b[k] <= a[k]);
        assert_eq!(doubled[k], 4.0 * b[k]);
    }
}

/// A candidate between buses joined by a stiff, weak existing line. The
/// path bound gives a small constant; the result must still match the
/// plain angle-span constant.
#[test]
fn path_bound_keeps_the_optimum() {
    let c = case(
        3,
        vec![
            line(1, 0, 1, 0.05, 30.0, None),
            line(2, 1, 2, 0.2, 60.0, None),
            line(3, 0, 1, 0.1, 80.0, Some(40.0)),
            line(4, 0, 2, 0.3, 80.0, Some(90.0)),
        ],
        vec![unit(1, 0, 10.0, 300.0, 50.0)],
        vec![load(1, 1, 500.0, 70.0, 20.0), load(2, 2, 500.0, 60.0, 20.0)],
    );
    let rs = sample_realizations(&c, Budgets::new(2, 1), 3, 1, SampleMode::WithinBudget);
    let plain = MasterOptions {
        big_m: BigMPolicy {
            path_bound: false,
            ..BigMPolicy::default()
        },
        ..MasterOptions::default()
    };
    let a = solve_master(&c, &rs, &plain).unwrap();
    let b = solve(&c, &rs);
    assert!(rel_diff(a.total_cost, b.total_cost) <= 1e-8);
    assert!(b.big_m_valid);
}

#[test]
fn model_has_one_block_per_realization() {
    let c = garver();
    let rs = sample_realizations(&c, Budgets::new(1, 1), 3, 6, SampleMode::ExactBudget);
    let big_m = BigMPolicy::default().values(&c, 0).unwrap();
    let model = build_master(&c, &rs, &big_m);
    assert_eq!(model.blocks.len(), 3);
    assert_eq!(model.build.len(), 15);
    assert_eq!(model.mip.binaries, model.build);
    assert_eq!(model.mip.lp.bounds(model.alpha), (0.0, f64::INFINITY));
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

    #[test]
    fn path_bound_agrees_with_plain_span(seed in proptest::prelude::any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = common::random_case(&mut rng, 5, 4);
        let nd = c.loads.len();
        let ng = c.generators.len();
        let b = Budgets::new(rng.gen_range(0..=nd), rng.gen_range(0..=ng));
        let rs = sample_realizations(&c, b, 2, rng.gen(), SampleMode::WithinBudget);
        let plain = MasterOptions {
            big_m: BigMPolicy { path_bound: false, ..BigMPolicy::default() },
            ..MasterOptions::default()
        };
        let a = solve_master(&c, &rs, &plain).unwrap();
        let p = solve(&c, &rs);
        proptest::prop_assert!(rel_diff(a.total_cost, p.total_cost) <= 1e-7, "{} vs {}", a.total_cost, p.total_cost);
        proptest::prop_assert!(p.big_m_valid);
    }
}
