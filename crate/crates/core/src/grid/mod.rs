//! Network and planning-instance data.
//!
//! Element references (`Line::from_bus`, `Generator::bus`, ...) are dense
//! internal indices into `GridCase::buses`; the external ids from the case
//! file are kept on each element.

mod matpower;
pub(crate) mod native;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

pub use matpower::parse_matpower;
pub use native::{CaseFile, parse_native};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseFormat {
    NativeJson,
    MatpowerLike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStatus {
    Existing,
    Candidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: u64,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Per unit on the case base.
    pub reactance: f64,
    /// MW.
    pub capacity: f64,
    pub status: LineStatus,
    pub build_cost: Option<f64>,
}

impl Line {
    pub fn is_candidate(&self) -> bool {
        self.status == LineStatus::Candidate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: u64,
    pub bus: usize,
    pub marginal_cost: f64,
    pub nominal_capacity: f64,
    pub capacity_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub id: u64,
    pub bus: usize,
    pub marginal_shed_cost: f64,
    pub nominal_demand: f64,
    pub demand_deviation: f64,
    /// Largest fraction of the realized demand that may be shed.
    pub shed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub base_mva: f64,
    pub sigma: f64,
    /// `None` means no limit on total investment.
    pub investment_budget: Option<f64>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

impl GridCase {
    pub fn load(path: &Path, format: CaseFormat) -> Result<GridCase> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        match format {
            CaseFormat::NativeJson => parse_native(&text),
            CaseFormat::MatpowerLike => parse_matpower(&text),
        }
    }

    /// Native JSON text. Parsing the output yields an identical case.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&CaseFile::from_case(self))
            .expect("case records always serialize");
        s.push('\n');
        s
    }

    /// Line indices of the candidate lines, in line order. Expansion plans
    /// are indexed by position in this list.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.lines.len())
            .filter(|&l| self.lines[l].is_candidate())
            .collect()
    }

    pub fn num_candidates(&self) -> usize {
        self.lines.iter().filter(|l| l.is_candidate()).count()
    }

    pub fn bus_index(&self) -> HashMap<u64, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Non-fatal findings, such as shedding being cheaper than generating.
    pub fn warnings(&self) -> Vec<String> {
        let max_gen = self
            .generators
            .iter()
            .map(|g| g.marginal_cost)
            .fold(f64::NEG_INFINITY, f64::max);
        self.loads
            .iter()
            .filter(|l| l.marginal_shed_cost <= max_gen)
            .map(|l| {
                format!(
                    "load {}: shed cost {} does not exceed the highest generation cost {}",
                    l.id, l.marginal_shed_cost, max_gen
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Case,
    Bus,
    Line,
    Generator,
    Load,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Case => "case",
            ElementKind::Bus => "bus",
            ElementKind::Line => "line",
            ElementKind::Generator => "generator",
            ElementKind::Load => "load",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub kind: ElementKind,
    pub id: u64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == ElementKind::Case {
            write!(f, "case: {}", self.message)
        } else {
            write!(f, "{} {}: {}", self.kind, self.id, self.message)
        }
    }
}

/// Every violated invariant, ordered by element kind, then id.
pub fn validate(case: &GridCase) -> Vec<Violation> {
    native::check(&CaseFile::from_case(case))
}

/// Component label per bus (the lowest bus index in its component) in the
/// graph formed by the lines for which `in_service` holds.
pub fn components(case: &GridCase, in_service: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..case.buses.len()).collect();
    fn root(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for (l, line) in case.lines.iter().enumerate() {
        if in_service(l) {
            let a = root(&mut parent, line.from_bus);
            let b = root(&mut parent, line.to_bus);
            // Keep the smaller index as root so labels are canonical.
            if a < b {
                parent[b] = a;
            } else {
                parent[a] = b;
            }
        }
    }
    (0..case.buses.len()).map(|n| root(&mut parent, n)).collect()
}
