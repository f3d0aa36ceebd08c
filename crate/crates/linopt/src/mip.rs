//! Branch-and-bound over binary variables.
//!
//! Branching picks the most fractional binary (ties by lowest index). The
//! default node order is depth-first, diving into the child on the side the
//! relaxation leans toward, with a jump to the best-bound open node every
//! `restart_every` nodes. Children warm-start from the parent's basis.

use std::collections::VecDeque;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::MipError;
use crate::model::MixedIntegerProgram;
use crate::simplex::{solve_lp_with, Basis, LpStatus};
use crate::{LpError, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeOrder {
    #[default]
    DepthFirst,
    BestFirst,
    BreadthFirst,
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub tolerances: Tolerances,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub order: NodeOrder,
    pub restart_every: usize,
    /// Candidate values for the binaries (in `MixedIntegerProgram::binaries`
    /// order); each is evaluated before the search and the best feasible
    /// one becomes the initial incumbent.
    pub incumbent_hints: Vec<Vec<f64>>,
    pub integrality_tol: f64,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            node_limit: 2_000_000,
            time_limit: None,
            order: NodeOrder::DepthFirst,
            restart_every: 1000,
            incumbent_hints: Vec::new(),
            integrality_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub nodes: usize,
}

struct Node {
    id: usize,
    /// 0 = free, 1 = fixed at zero, 2 = fixed at one; per binary.
    fixes: Vec<u8>,
    bound: f64,
    basis: Option<Rc<Basis>>,
}

struct Incumbent {
    objective: f64,
    x: Vec<f64>,
}

pub fn solve_mip(mip: &MixedIntegerProgram, opts: &MipOptions) -> Result<MipSolution, MipError> {
    let issues = mip.check();
    if !issues.is_empty() {
        return Err(LpError::Invalid(issues).into());
    }
    let lp = &mip.lp;
    let tol = &opts.tolerances;
    let started = Instant::now();
    let nb = mip.binaries.len();

    let bounds_for = |fixes: &[u8]| {
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        for (k, &f) in fixes.iter().enumerate() {
            let j = mip.binaries[k].0;
            match f {
                1 => {
                    lo[j] = lo[j].max(0.0);
                    hi[j] = 0.0;
                }
                2 => {
                    lo[j] = 1.0;
                    hi[j] = hi[j].min(1.0);
                }
                _ => {}
            }
        }
        (lo, hi)
    };
    let cutoff = |inc: &Option<Incumbent>| match inc {
        Some(i) => i.objective - tol.mip_gap_tol * i.objective.abs().max(1.0),
        None => f64::INFINITY,
    };

    let mut incumbent: Option<Incumbent> = None;
    for hint in opts.incumbent_hints.iter().filter(|h| h.len() == nb) {
        let fixes: Vec<u8> = hint.iter().map(|&v| if v >= 0.5 { 2 } else { 1 }).collect();
        let (lo, hi) = bounds_for(&fixes);
        let sol = solve_lp_with(lp, &lo, &hi, None, tol)?;
        if sol.status == LpStatus::Optimal && incumbent.as_ref().is_none_or(|i| sol.objective < i.objective) {
            incumbent = Some(Incumbent {
                objective: sol.objective,
                x: sol.x,
            });
        }
    }

    let mut open: VecDeque<Node> = VecDeque::new();
    open.push_back(Node {
        id: 0,
        fixes: vec![0; nb],
        bound: f64::NEG_INFINITY,
        basis: None,
    });
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut pruned_bound = f64::INFINITY;

    loop {
        let node = match opts.order {
            NodeOrder::DepthFirst => {
                if nodes > 0 && opts.restart_every > 0 && nodes.is_multiple_of(opts.restart_every) {
                    if let Some(k) = best_open(&open) {
                        let n = open.remove(k).unwrap();
                        open.push_back(n);
                    }
                }
                open.pop_back()
            }
            NodeOrder::BreadthFirst => open.pop_front(),
            NodeOrder::BestFirst => best_open(&open).and_then(|k| open.remove(k)),
        };
        let Some(node) = node else { break };

        let limit = if nodes >= opts.node_limit {
            Some("node")
        } else if opts.time_limit.is_some_and(|t| started.elapsed() > t) {
            Some("time")
        } else {
            None
        };
        if let Some(limit) = limit {
            let bound = open
                .iter()
                .map(|n| n.bound)
                .fold(node.bound.min(pruned_bound), f64::min);
            let best = incumbent.as_ref().map(|inc| {
                Box::new(finish(MipStatus::Optimal, inc, bound.min(inc.objective), nodes))
            });
            return Err(MipError::LimitExceeded {
                limit,
                nodes,
                incumbent: incumbent.as_ref().map(|i| i.objective),
                bound,
                best,
            });
        }
        nodes += 1;

        if node.bound >= cutoff(&incumbent) {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }

        let (lo, hi) = bounds_for(&node.fixes);
        let sol = solve_lp_with(lp, &lo, &hi, node.basis.as_deref(), tol)?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Ok(MipSolution {
                    status: MipStatus::Unbounded,
                    x: sol.x,
                    objective: f64::NEG_INFINITY,
                    best_bound: f64::NEG_INFINITY,
                    abs_gap: f64::NAN,
                    rel_gap: f64::NAN,
                    nodes,
                });
            }
            LpStatus::Optimal => {}
        }
        if sol.objective >= cutoff(&incumbent) {
            pruned_bound = pruned_bound.min(sol.objective);
            continue;
        }

        let mut branch: Option<(usize, f64, f64)> = None;
        for (k, b) in mip.binaries.iter().enumerate() {
            let v = sol.x[b.0];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > opts.integrality_tol && branch.is_none_or(|(_, f, _)| frac > f) {
                branch = Some((k, frac, v));
            }
        }

        let Some((k, _, value)) = branch else {
            let needs_polish = mip
                .binaries
                .iter()
                .any(|b| (sol.x[b.0] - sol.x[b.0].round()).abs() > 1e-12);
            let (objective, x) = if needs_polish {
                let fixes: Vec<u8> = mip
                    .binaries
                    .iter()
                    .map(|b| if sol.x[b.0] >= 0.5 { 2 } else { 1 })
                    .collect();
                let (lo, hi) = bounds_for(&fixes);
                let polished = solve_lp_with(lp, &lo, &hi, Some(&sol.basis), tol)?;
                if polished.status != LpStatus::Optimal {
                    continue;
                }
                (polished.objective, polished.x)
            } else {
                (sol.objective, sol.x)
            };
            if incumbent.as_ref().is_none_or(|i| objective < i.objective) {
                incumbent = Some(Incumbent { objective, x });
            }
            continue;
        };

        let basis = Rc::new(sol.basis);
        let prefer_up = value >= 0.5;
        let mut child = |up: bool| {
            let mut fixes = node.fixes.clone();
            fixes[k] = if up { 2 } else { 1 };
            let n = Node {
                id: next_id,
                fixes,
                bound: sol.objective,
                basis: Some(basis.clone()),
            };
            next_id += 1;
            n
        };
        let first = child(prefer_up);
        let second = child(!prefer_up);
        match opts.order {
            NodeOrder::DepthFirst => {
                open.push_back(second);
                open.push_back(first);
            }
            NodeOrder::BestFirst | NodeOrder::BreadthFirst => {
                open.push_back(first);
                open.push_back(second);
            }
        }
    }

    match incumbent {
        None => Ok(MipSolution {
            status: MipStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            abs_gap: f64::NAN,
            rel_gap: f64::NAN,
            nodes,
        }),
        Some(inc) => {
            let bound = pruned_bound.min(inc.objective);
            Ok(finish(MipStatus::Optimal, &inc, bound, nodes))
        }
    }
}

fn best_open(open: &VecDeque<Node>) -> Option<usize> {
    open.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.bound.total_cmp(&b.bound).then(a.id.cmp(&b.id)))
        .map(|(k, _)| k)
}

fn finish(status: MipStatus, inc: &Incumbent, bound: f64, nodes: usize) -> MipSolution {
    let abs_gap = (inc.objective - bound).max(0.0);
    MipSolution {
        status,
        x: inc.x.clone(),
        objective: inc.objective,
        best_bound: bound,
        abs_gap,
        rel_gap: abs_gap / inc.objective.abs().max(1.0),
        nodes,
    }
}
