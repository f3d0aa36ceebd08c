//! Out-of-sample check of a fixed plan: sample realizations, dispatch each,
//! and compare the operating costs with the worst case the planner used.

use std::io::Write;
use std::thread;

use linopt::Basis;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridCase;
use crate::recourse::{Dispatcher, ExpansionPlan};
use crate::uncertainty::{sample_realizations, Budgets, Realization, SampleMode};

/// A sample exceeds the reference when its cost is above
/// `reference + EXCEED_TOL * (1 + |reference|)`.
pub const EXCEED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation (zero for a single sample).
    pub std_dev: f64,
}

impl Summary {
    /// Statistics of `values`, independent of their order.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        dev.sort_by(f64::total_cmp);
        let var = if v.len() > 1 { dev.iter().sum::<f64>() / (n - 1.0) } else { 0.0 };
        Some(Summary {
            min: v[0],
            max: v[v.len() - 1],
            mean,
            std_dev: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssessmentReport {
    pub samples: usize,
    /// Operating cost per sample; `None` where the dispatch was infeasible.
    #[serde(skip)]
    pub costs: Vec<Option<f64>>,
    pub summary: Option<Summary>,
    pub worst_case_reference: f64,
    pub exceedances: usize,
    pub infeasible: usize,
}

impl AssessmentReport {
    pub fn feasible_costs(&self) -> Vec<f64> {
        self.costs.iter().flatten().copied().collect()
    }

    pub fn write_samples_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample_id", "cost", "feasible"])?;
        for (k, c) in self.costs.iter().enumerate() {
            match c {
                Some(c) => w.write_record([k.to_string(), c.to_string(), "true".into()])?,
                None => w.write_record([k.to_string(), String::new(), "false".into()])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_left", "bin_right", "count"])?;
        for b in histogram(&self.feasible_costs()) {
            w.write_record([b.left.to_string(), b.right.to_string(), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

const MAX_BINS: usize = 10_000;

/// Freedman–Diaconis binning: width `2 * IQR / n^(1/3)`. Falls back to a
/// single bin when the spread is zero. The last bin is closed on the right.
pub fn histogram(values: &[f64]) -> Vec<Bin> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (min, max) = (v[0], v[v.len() - 1]);
    let iqr = quantile(&v, 0.75) - quantile(&v, 0.25);
    let width = 2.0 * iqr / (v.len() as f64).cbrt();
    let bins = if width > 0.0 && max > min {
        (((max - min) / width).ceil() as usize).clamp(1, MAX_BINS)
    } else {
        1
    };
    let width = if bins > 1 { (max - min) / bins as f64 } else { max - min };
    let mut out: Vec<Bin> = (0..bins)
        .map(|b| Bin {
            left: min + b as f64 * width,
            right: if b + 1 == bins { max } else { min + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for &x in &v {
        let b = if width > 0.0 { (((x - min) / width) as usize).min(bins - 1) } else { 0 };
        out[b].count += 1;
    }
    out
}

/// Costs of `realizations` under `plan`, each solve started from `start`
/// so results do not depend on how samples are split among workers.
fn dispatch_all(
    case: &GridCase,
    plan: &ExpansionPlan,
    realizations: &[Realization],
    start: Option<&Basis>,
    jobs: usize,
) -> Result<Vec<Option<f64>>> {
    let run = |chunk: &[Realization]| -> Result<Vec<Option<f64>>> {
        let mut dispatcher = Dispatcher::new(case, plan)?;
        chunk
            .iter()
            .map(|r| match dispatcher.solve_from(r, start) {
                Ok((d, _)) => Ok(Some(d.operating_cost)),
                Err(Error::InfeasibleDispatch { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    };
    let jobs = jobs.max(1);
    if jobs == 1 || realizations.len() < 2 {
        return run(realizations);
    }
    let chunk = realizations.len().div_ceil(jobs);
    let run = &run;
    thread::scope(|s| {
        let handles: Vec<_> = realizations
            .chunks(chunk)
            .map(|c| s.spawn(move || run(c)))
            .collect();
        let mut out = Vec::with_capacity(realizations.len());
        for h in handles {
            out.extend(h.join().expect("assessment worker panicked")?);
        }
        Ok(out)
    })
}

#[allow(clippy::too_many_arguments)]
pub fn assess_plan(
    case: &GridCase,
    plan: &ExpansionPlan,
    budgets: Budgets,
    samples: usize,
    seed: u64,
    mode: SampleMode,
    worst_case_reference: f64,
    jobs: usize,
) -> Result<AssessmentReport> {
    plan.check(case)?;
    budgets.check(case)?;
    if samples == 0 {
        return Err(Error::Dimension("at least one sample is required".into()));
    }
    let realizations = sample_realizations(case, budgets, samples, seed, mode);
    let start = Dispatcher::new(case, plan)?
        .solve_from(&Realization::nominal(case), None)
        .ok()
        .map(|(_, basis)| basis);
    let costs = dispatch_all(case, plan, &realizations, start.as_ref(), jobs)?;
    let feasible: Vec<f64> = costs.iter().flatten().copied().collect();
    let limit = worst_case_reference + EXCEED_TOL * (1.0 + worst_case_reference.abs());
    Ok(AssessmentReport {
        samples,
        summary: Summary::of(&feasible),
        worst_case_reference,
        exceedances: feasible.iter().filter(|&&c| c > limit).count(),
        infeasible: costs.len() - feasible.len(),
        costs,
    })
}
