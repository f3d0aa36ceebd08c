mod common;

use common::{case, garver, load, unit};
use proptest::prelude::*;
use rtnep::assess::{assess_plan, histogram, Summary, EXCEED_TOL};
use rtnep::oracle::{exact_robust_plan, exact_worst_case, OracleBudget};
use rtnep::recourse::solve_dispatch;
use rtnep::uncertainty::{sample_realizations, SampleMode};
use rtnep::{Budgets, Error, ExpansionPlan, Realization};

#[test]
fn one_nominal_sample_costs_the_nominal_dispatch() {
    let c = garver();
    let plan = ExpansionPlan::empty(&c);
    let nominal = solve_dispatch(&c, &plan, &Realization::nominal(&c)).unwrap().operating_cost;
    for mode in [SampleMode::ExactBudget, SampleMode::WithinBudget] {
        let r = assess_plan(&c, &plan, Budgets::new(0, 0), 1, 3, mode, nominal, 1).unwrap();
        assert_eq!(r.costs, vec![Some(nominal)]);
        let s = r.summary.unwrap();
        assert_eq!((s.min, s.max, s.mean, s.std_dev), (nominal, nominal, nominal, 0.0));
        assert_eq!(r.exceedances, 0);
    }
}

#[test]
fn samples_never_exceed_the_exact_worst_case() {
    let c = garver();
    let b = Budgets::new(2, 1);
    let robust = exact_robust_plan(&c, b, OracleBudget::default()).unwrap();
    let exact = exact_worst_case(&c, &robust.plan, b, 10_000).unwrap();
    let reference = exact.dispatch.operating_cost;
    let r = assess_plan(&c, &robust.plan, b, 10_000, 42, SampleMode::ExactBudget, reference, 4).unwrap();
    assert_eq!(r.samples, 10_000);
    assert_eq!(r.infeasible, 0);
    assert_eq!(r.exceedances, 0);
    let s = r.summary.unwrap();
    assert!(s.max <= reference + EXCEED_TOL * (1.0 + reference));
    assert!(s.min <= s.mean && s.mean <= s.max);
}

#[test]
fn exceedances_count_costs_above_the_reference() {
    let c = garver();
    let plan = ExpansionPlan::empty(&c);
    let b = Budgets::new(2, 2);
    let base = assess_plan(&c, &plan, b, 200, 5, SampleMode::WithinBudget, 0.0, 1).unwrap();
    let mut costs = base.feasible_costs();
    costs.sort_by(f64::total_cmp);
    let reference = costs[costs.len() / 2];
    let r = assess_plan(&c, &plan, b, 200, 5, SampleMode::WithinBudget, reference, 1).unwrap();
    let limit = reference + EXCEED_TOL * (1.0 + reference.abs());
    assert_eq!(r.exceedances, costs.iter().filter(|&&x| x > limit).count());
    assert!(r.exceedances > 0 && r.exceedances < 200);
}

#[test]
fn costs_match_direct_dispatch() {
    let c = garver();
    let plan = ExpansionPlan::from_built(&c, (0..15).map(|k| k % 4 == 1).collect());
    let b = Budgets::new(3, 2);
    let r = assess_plan(&c, &plan, b, 50, 9, SampleMode::WithinBudget, 1e9, 2).unwrap();
    let rs = sample_realizations(&c, b, 50, 9, SampleMode::WithinBudget);
    for (cost, real) in r.costs.iter().zip(&rs) {
        let direct = solve_dispatch(&c, &plan, real).unwrap().operating_cost;
        let got = cost.unwrap();
        assert!((got - direct).abs() <= 1e-7 * (1.0 + direct.abs()), "{got} vs {direct}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let c = garver();
    let plan = ExpansionPlan::empty(&c);
    let b = Budgets::new(3, 2);
    let one = assess_plan(&c, &plan, b, 300, 17, SampleMode::WithinBudget, 5000.0, 1).unwrap();
    let four = assess_plan(&c, &plan, b, 300, 17, SampleMode::WithinBudget, 5000.0, 4).unwrap();
    assert_eq!(one.costs, four.costs);
    assert_eq!(one.summary, four.summary);
    let mut a = Vec::new();
    let mut z = Vec::new();
    one.write_samples_csv(&mut a).unwrap();
    four.write_samples_csv(&mut z).unwrap();
    assert_eq!(a, z);
}

#[test]
fn zero_samples_is_an_error() {
    let c = garver();
    let plan = ExpansionPlan::empty(&c);
    let r = assess_plan(&c, &plan, Budgets::new(1, 1), 0, 1, SampleMode::ExactBudget, 0.0, 1);
    assert!(matches!(r, Err(Error::Dimension(_))));
}

#[test]
fn mismatched_plan_is_an_error() {
    let c = garver();
    let plan = ExpansionPlan {
        built: vec![false; 3],
        investment_cost: 0.0,
    };
    assert!(assess_plan(&c, &plan, Budgets::new(1, 1), 5, 1, SampleMode::ExactBudget, 0.0, 1).is_err());
}

#[test]
fn infeasible_samples_are_counted() {
    // A load that may shed only a tenth of its demand: any deviation
    // leaves it short.
    let mut c = case(
        1,
        vec![],
        vec![unit(1, 0, 10.0, 50.0, 30.0)],
        vec![load(1, 0, 1000.0, 50.0, 10.0)],
    );
    c.loads[0].shed_fraction = 0.1;
    let b = Budgets::new(1, 1);
    let r = assess_plan(&c, &ExpansionPlan::empty(&c), b, 400, 8, SampleMode::WithinBudget, 500.0, 1).unwrap();
    let rs = sample_realizations(&c, b, 400, 8, SampleMode::WithinBudget);
    let deviated = rs.iter().filter(|r| r.deviations() != (0, 0)).count();
    assert_eq!(r.infeasible, deviated);
    assert!(deviated > 0 && deviated < 400);
    for (cost, real) in r.costs.iter().zip(&rs) {
        assert_eq!(cost.is_none(), real.deviations() != (0, 0));
    }
    assert_eq!(r.summary.unwrap().max, 500.0);

    let mut out = Vec::new();
    r.write_samples_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 401);
    assert_eq!(text.lines().filter(|l| l.ends_with(",,false")).count(), deviated);
}

#[test]
fn histogram_csv_counts_feasible_samples() {
    let c = garver();
    let plan = ExpansionPlan::empty(&c);
    let r = assess_plan(&c, &plan, Budgets::new(3, 2), 500, 21, SampleMode::WithinBudget, 0.0, 2).unwrap();
    let mut out = Vec::new();
    r.write_histogram_csv(&mut out).unwrap();
    let mut reader = csv::Reader::from_reader(out.as_slice());
    assert_eq!(reader.headers().unwrap(), vec!["bin_left", "bin_right", "count"]);
    let mut total = 0;
    let mut previous_right = f64::NEG_INFINITY;
    for row in reader.records() {
        let row = row.unwrap();
        let left: f64 = row[0].parse().unwrap();
        let right: f64 = row[1].parse().unwrap();
        assert!(left >= previous_right - 1e-9 * (1.0 + left.abs()));
        assert!(right >= left);
        previous_right = right;
        total += row[2].parse::<usize>().unwrap();
    }
    assert_eq!(total, 500);
    assert_eq!(histogram(&[]), vec![]);
}

proptest! {
    #[test]
    fn summary_is_order_free(values in prop::collection::vec(-1e6f64..1e6, 1..60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(Summary::of(&values), Summary::of(&shuffled));
        let s = Summary::of(&values).unwrap();
        prop_assert!(s.min <= s.mean + 1e-9 * s.mean.abs().max(1.0));
        prop_assert!(s.mean <= s.max + 1e-9 * s.mean.abs().max(1.0));
        prop_assert!(s.std_dev >= 0.0);
    }

    #[test]
    fn histogram_keeps_every_value(values in prop::collection::vec(-1e4f64..1e4, 1..300)) {
        let bins = histogram(&values);
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), values.len());
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(bins[0].left, min);
        prop_assert_eq!(bins[bins.len() - 1].right, max);
    }
}
