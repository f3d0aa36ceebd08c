//! Cardinality-constrained uncertainty on demands and generation capacities.
//!
//! Demands can only rise and capacities can only fall. A realization is a
//! vertex of the set: each load or unit is either nominal or at its
//! deviated extreme, with at most `gamma_d` deviating loads and `gamma_g`
//! deviating units. Loads and units with zero deviation never count toward
//! a budget.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Budgets {
    pub gamma_d: usize,
    pub gamma_g: usize,
}

impl Budgets {
    pub fn new(gamma_d: usize, gamma_g: usize) -> Self {
        Self { gamma_d, gamma_g }
    }

    /// Largest budgets meaningful for `case`.
    pub fn full(case: &GridCase) -> Self {
        Self::new(case.loads.len(), case.generators.len())
    }

    pub fn check(&self, case: &GridCase) -> Result<()> {
        if self.gamma_d > case.loads.len() {
            return Err(Error::Dimension(format!(
                "demand budget {} exceeds the {} loads",
                self.gamma_d,
                case.loads.len()
            )));
        }
        if self.gamma_g > case.generators.len() {
            return Err(Error::Dimension(format!(
                "capacity budget {} exceeds the {} generating units",
                self.gamma_g,
                case.generators.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub z_d: Vec<bool>,
    pub z_g: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub z_d: Vec<bool>,
    pub z_g: Vec<bool>,
    /// MW per load.
    pub demand: Vec<f64>,
    /// MW per generating unit.
    pub capacity: Vec<f64>,
}

impl Realization {
    pub fn nominal(case: &GridCase) -> Realization {
        build(case, vec![false; case.loads.len()], vec![false; case.generators.len()])
    }

    pub fn vertex(&self) -> Vertex {
        Vertex {
            z_d: self.z_d.clone(),
            z_g: self.z_g.clone(),
        }
    }

    pub fn same_vertex(&self, other: &Realization) -> bool {
        self.z_d == other.z_d && self.z_g == other.z_g
    }

    pub fn deviations(&self) -> (usize, usize) {
        (
            self.z_d.iter().filter(|&&z| z).count(),
            self.z_g.iter().filter(|&&z| z).count(),
        )
    }
}

fn build(case: &GridCase, z_d: Vec<bool>, z_g: Vec<bool>) -> Realization {
    let demand = case
        .loads
        .iter()
        .zip(&z_d)
        .map(|(l, &z)| if z { l.nominal_demand + l.demand_deviation } else { l.nominal_demand })
        .collect();
    let capacity = case
        .generators
        .iter()
        .zip(&z_g)
        .map(|(g, &z)| if z { g.nominal_capacity - g.capacity_deviation } else { g.nominal_capacity })
        .collect();
    Realization {
        z_d,
        z_g,
        demand,
        capacity,
    }
}

/// Loads whose demand can deviate.
pub fn eligible_loads(case: &GridCase) -> Vec<bool> {
    case.loads.iter().map(|l| l.demand_deviation > 0.0).collect()
}

/// Units whose capacity can deviate.
pub fn eligible_units(case: &GridCase) -> Vec<bool> {
    case.generators.iter().map(|g| g.capacity_deviation > 0.0).collect()
}

pub fn realize(case: &GridCase, z_d: &[bool], z_g: &[bool], budgets: Budgets) -> Result<Realization> {
    if z_d.len() != case.loads.len() || z_g.len() != case.generators.len() {
        return Err(Error::Dimension(format!(
            "realization has {} demand and {} capacity entries; case has {} loads and {} units",
            z_d.len(),
            z_g.len(),
            case.loads.len(),
            case.generators.len()
        )));
    }
    for (j, l) in case.loads.iter().enumerate() {
        if z_d[j] && l.demand_deviation <= 0.0 {
            return Err(Error::Dimension(format!("load {} has no demand deviation", l.id)));
        }
    }
    for (i, g) in case.generators.iter().enumerate() {
        if z_g[i] && g.capacity_deviation <= 0.0 {
            return Err(Error::Dimension(format!("unit {} has no capacity deviation", g.id)));
        }
    }
    let selected = z_d.iter().filter(|&&z| z).count();
    if selected > budgets.gamma_d {
        return Err(Error::Budget {
            budget: "demand",
            selected,
            limit: budgets.gamma_d,
        });
    }
    let selected = z_g.iter().filter(|&&z| z).count();
    if selected > budgets.gamma_g {
        return Err(Error::Budget {
            budget: "capacity",
            selected,
            limit: budgets.gamma_g,
        });
    }
    Ok(build(case, z_d.to_vec(), z_g.to_vec()))
}

/// Slack on normalized deviations, absorbing roundoff in
/// `(nominal + deviation) - nominal`.
const MEMBERSHIP_TOL: f64 = 1e-9;

/// Normalized deviations used by a value: `None` outside the interval,
/// otherwise `ceil(|value - nominal| / deviation)`.
fn used(value: f64, nominal: f64, deviation: f64) -> Option<f64> {
    let dev = (value - nominal).abs();
    if deviation <= 0.0 {
        return (dev <= MEMBERSHIP_TOL * (1.0 + nominal.abs())).then_some(0.0);
    }
    let ratio = dev / deviation;
    if ratio > 1.0 + MEMBERSHIP_TOL {
        None
    } else if ratio <= MEMBERSHIP_TOL {
        Some(0.0)
    } else {
        Some((ratio - MEMBERSHIP_TOL).ceil())
    }
}

/// Membership in the interval form of the set: every value inside its
/// interval and, per group, the sum of normalized deviations
/// `ceil(|value - nominal| / deviation)` within the budget.
pub fn in_interval_set(case: &GridCase, r: &Realization, budgets: Budgets) -> bool {
    let mut used_d = 0.0;
    for (l, &p) in case.loads.iter().zip(&r.demand) {
        match used(p, l.nominal_demand, l.demand_deviation) {
            Some(u) => used_d += u,
            None => return false,
        }
    }
    let mut used_g = 0.0;
    for (g, &p) in case.generators.iter().zip(&r.capacity) {
        match used(p, g.nominal_capacity, g.capacity_deviation) {
            Some(u) => used_g += u,
            None => return false,
        }
    }
    used_d <= budgets.gamma_d as f64 && used_g <= budgets.gamma_g as f64
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Exact at every step: acc * (n - i) is divisible by (i + 1).
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn subsets_up_to(n: usize, k: usize) -> u128 {
    (0..=k.min(n)).fold(0u128, |acc, a| acc.saturating_add(binomial(n, a)))
}

/// Number of vertices of the set.
pub fn vertex_count(case: &GridCase, budgets: Budgets) -> u128 {
    let nd = eligible_loads(case).iter().filter(|&&e| e).count();
    let ng = eligible_units(case).iter().filter(|&&e| e).count();
    subsets_up_to(nd, budgets.gamma_d).saturating_mul(subsets_up_to(ng, budgets.gamma_g))
}

/// Next vector in increasing binary order (first entry most significant)
/// with ones only at eligible positions and at most `cap` ones.
fn next_subset(bits: &mut [bool], eligible: &[bool], cap: usize) -> bool {
    let mut prefix_ones: Vec<usize> = Vec::with_capacity(bits.len() + 1);
    prefix_ones.push(0);
    for &b in bits.iter() {
        prefix_ones.push(prefix_ones.last().unwrap() + usize::from(b));
    }
    for i in (0..bits.len()).rev() {
        if eligible[i] && !bits[i] && prefix_ones[i] < cap {
            bits[i] = true;
            bits[i + 1..].iter_mut().for_each(|b| *b = false);
            return true;
        }
    }
    false
}

/// Lexicographic walk over every vertex: demand pattern first, capacity
/// pattern second, `false < true`.
pub struct VertexIter<'a> {
    case: &'a GridCase,
    budgets: Budgets,
    eligible_d: Vec<bool>,
    eligible_g: Vec<bool>,
    next: Option<(Vec<bool>, Vec<bool>)>,
}

impl Iterator for VertexIter<'_> {
    type Item = Realization;

    fn next(&mut self) -> Option<Realization> {
        let (z_d, z_g) = self.next.take()?;
        let out = build(self.case, z_d.clone(), z_g.clone());
        let mut nd = z_d;
        let mut ng = z_g;
        if next_subset(&mut ng, &self.eligible_g, self.budgets.gamma_g) {
            self.next = Some((nd, ng));
        } else if next_subset(&mut nd, &self.eligible_d, self.budgets.gamma_d) {
            ng.iter_mut().for_each(|b| *b = false);
            self.next = Some((nd, ng));
        }
        Some(out)
    }
}

pub fn enumerate_vertices(case: &GridCase, budgets: Budgets, cap: u128) -> Result<VertexIter<'_>> {
    budgets.check(case)?;
    let count = vertex_count(case, budgets);
    if count > cap {
        return Err(Error::CapExceeded {
            what: "vertex",
            count,
            cap,
        });
    }
    Ok(VertexIter {
        case,
        budgets,
        eligible_d: eligible_loads(case),
        eligible_g: eligible_units(case),
        next: Some((vec![false; case.loads.len()], vec![false; case.generators.len()])),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Exactly `min(budget, eligible)` deviations per group.
    ExactBudget,
    /// Uniform over every vertex within the budgets.
    WithinBudget,
}

fn pick(
    rng: &mut ChaCha8Rng,
    eligible: &[bool],
    budget: usize,
    mode: SampleMode,
    size_weights: Option<&WeightedIndex<f64>>,
) -> Vec<bool> {
    let mut pool: Vec<usize> = (0..eligible.len()).filter(|&k| eligible[k]).collect();
    let k = match mode {
        SampleMode::ExactBudget => budget.min(pool.len()),
        SampleMode::WithinBudget => size_weights.map_or(0, |w| w.sample(rng)),
    };
    let (chosen, _) = pool.partial_shuffle(rng, k);
    let mut z = vec![false; eligible.len()];
    for &j in chosen.iter() {
        z[j] = true;
    }
    z
}

fn size_weights(n: usize, budget: usize) -> Option<WeightedIndex<f64>> {
    let w: Vec<f64> = (0..=budget.min(n)).map(|a| binomial(n, a) as f64).collect();
    WeightedIndex::new(w).ok()
}

/// Independent uniform draws from the set, reproducible from `seed`.
pub fn sample_realizations(
    case: &GridCase,
    budgets: Budgets,
    count: usize,
    seed: u64,
    mode: SampleMode,
) -> Vec<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ed = eligible_loads(case);
    let eg = eligible_units(case);
    let nd = ed.iter().filter(|&&e| e).count();
    let ng = eg.iter().filter(|&&e| e).count();
    let wd = size_weights(nd, budgets.gamma_d);
    let wg = size_weights(ng, budgets.gamma_g);
    (0..count)
        .map(|_| {
            let z_d = pick(&mut rng, &ed, budgets.gamma_d, mode, wd.as_ref());
            let z_g = pick(&mut rng, &eg, budgets.gamma_g, mode, wg.as_ref());
            build(case, z_d, z_g)
        })
        .collect()
}

/// Serialized realization, keyed by external ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationFile {
    pub loads: Vec<LoadState>,
    pub generators: Vec<UnitState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadState {
    pub id: u64,
    pub deviated: bool,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitState {
    pub id: u64,
    pub deviated: bool,
    pub capacity: f64,
}

impl RealizationFile {
    pub fn new(case: &GridCase, r: &Realization) -> Self {
        Self {
            loads: case
                .loads
                .iter()
                .enumerate()
                .map(|(j, l)| LoadState {
                    id: l.id,
                    deviated: r.z_d[j],
                    demand: r.demand[j],
                })
                .collect(),
            generators: case
                .generators
                .iter()
                .enumerate()
                .map(|(i, g)| UnitState {
                    id: g.id,
                    deviated: r.z_g[i],
                    capacity: r.capacity[i],
                })
                .collect(),
        }
    }

    pub fn to_realization(&self, case: &GridCase, budgets: Budgets) -> Result<Realization> {
        let ids_match = self.loads.len() == case.loads.len()
            && self.generators.len() == case.generators.len()
            && self.loads.iter().zip(&case.loads).all(|(a, b)| a.id == b.id)
            && self.generators.iter().zip(&case.generators).all(|(a, b)| a.id == b.id);
        if !ids_match {
            return Err(Error::Dimension("realization does not match the case".into()));
        }
        let z_d: Vec<bool> = self.loads.iter().map(|l| l.deviated).collect();
        let z_g: Vec<bool> = self.generators.iter().map(|g| g.deviated).collect();
        realize(case, &z_d, &z_g, budgets)
    }
}
