use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Bus, ElementKind, Generator, GridCase, Line, LineStatus, Load, Violation};
use crate::error::{Error, Result};

/// On-disk layout of a case. Bus references use external ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub base_mva: f64,
    pub sigma: f64,
    #[serde(default)]
    pub investment_budget: Option<f64>,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub loads: Vec<LoadRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusRecord {
    Existing,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub id: u64,
    pub from: u64,
    pub to: u64,
    pub x: f64,
    pub fmax: f64,
    pub status: StatusRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub id: u64,
    pub bus: u64,
    pub cost: f64,
    pub pmax_nominal: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadRecord {
    pub id: u64,
    pub bus: u64,
    pub shed_cost: f64,
    pub demand_nominal: f64,
    pub delta: f64,
    pub gamma: f64,
}

pub fn parse_native(text: &str) -> Result<GridCase> {
    let file: CaseFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    file.into_case()
}

impl CaseFile {
    pub fn from_case(case: &GridCase) -> CaseFile {
        // Dangling indices map to an id no bus has, so `check` reports them.
        let bus_id = |i: usize| case.buses.get(i).map_or(u64::MAX, |b| b.id);
        CaseFile {
            base_mva: case.base_mva,
            sigma: case.sigma,
            investment_budget: case.investment_budget,
            buses: case.buses.iter().map(|b| BusRecord { id: b.id }).collect(),
            lines: case
                .lines
                .iter()
                .map(|l| LineRecord {
                    id: l.id,
                    from: bus_id(l.from_bus),
                    to: bus_id(l.to_bus),
                    x: l.reactance,
                    fmax: l.capacity,
                    status: match l.status {
                        LineStatus::Existing => StatusRecord::Existing,
                        LineStatus::Candidate => StatusRecord::Candidate,
                    },
                    build_cost: l.build_cost,
                })
                .collect(),
            generators: case
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    id: g.id,
                    bus: bus_id(g.bus),
                    cost: g.marginal_cost,
                    pmax_nominal: g.nominal_capacity,
                    delta: g.capacity_deviation,
                })
                .collect(),
            loads: case
                .loads
                .iter()
                .map(|d| LoadRecord {
                    id: d.id,
                    bus: bus_id(d.bus),
                    shed_cost: d.marginal_shed_cost,
                    demand_nominal: d.nominal_demand,
                    delta: d.demand_deviation,
                    gamma: d.shed_fraction,
                })
                .collect(),
        }
    }

    /// Validates and converts to the dense representation.
    pub fn into_case(self) -> Result<GridCase> {
        let violations = check(&self);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let index: HashMap<u64, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        Ok(GridCase {
            base_mva: self.base_mva,
            sigma: self.sigma,
            investment_budget: self.investment_budget,
            buses: self.buses.iter().map(|b| Bus { id: b.id }).collect(),
            lines: self
                .lines
                .iter()
                .map(|l| Line {
                    id: l.id,
                    from_bus: index[&l.from],
                    to_bus: index[&l.to],
                    reactance: l.x,
                    capacity: l.fmax,
                    status: match l.status {
                        StatusRecord::Existing => LineStatus::Existing,
                        StatusRecord::Candidate => LineStatus::Candidate,
                    },
                    build_cost: l.build_cost,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| Generator {
                    id: g.id,
                    bus: index[&g.bus],
                    marginal_cost: g.cost,
                    nominal_capacity: g.pmax_nominal,
                    capacity_deviation: g.delta,
                })
                .collect(),
            loads: self
                .loads
                .iter()
                .map(|d| Load {
                    id: d.id,
                    bus: index[&d.bus],
                    marginal_shed_cost: d.shed_cost,
                    nominal_demand: d.demand_nominal,
                    demand_deviation: d.delta,
                    shed_fraction: d.gamma,
                })
                .collect(),
        })
    }
}

fn nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

pub(super) fn check(file: &CaseFile) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind: ElementKind, id: u64, message: String| {
        out.push(Violation { kind, id, message });
    };

    if !(file.base_mva.is_finite() && file.base_mva > 0.0) {
        push(ElementKind::Case, 0, format!("base_mva must be positive, got {}", file.base_mva));
    }
    if !(file.sigma.is_finite() && file.sigma > 0.0) {
        push(ElementKind::Case, 0, format!("sigma must be positive, got {}", file.sigma));
    }
    if let Some(b) = file.investment_budget {
        if !nonneg(b) {
            push(ElementKind::Case, 0, format!("investment_budget must be nonnegative, got {b}"));
        }
    }

    let mut seen = HashSet::new();
    for b in &file.buses {
        if !seen.insert(b.id) {
            push(ElementKind::Bus, b.id, "duplicate id".into());
        }
    }
    let buses = seen;

    let mut seen = HashSet::new();
    for l in &file.lines {
        let kind = ElementKind::Line;
        if !seen.insert(l.id) {
            push(kind, l.id, "duplicate id".into());
        }
        for end in [l.from, l.to] {
            if !buses.contains(&end) {
                push(kind, l.id, format!("references unknown bus {end}"));
            }
        }
        if l.from == l.to {
            push(kind, l.id, format!("both ends at bus {}", l.from));
        }
        if !(l.x.is_finite() && l.x > 0.0) {
            push(kind, l.id, format!("nonpositive reactance {}", l.x));
        }
        if !nonneg(l.fmax) {
            push(kind, l.id, format!("capacity must be finite and nonnegative, got {}", l.fmax));
        }
        match (l.status, l.build_cost) {
            (StatusRecord::Candidate, None) => push(kind, l.id, "candidate line without build_cost".into()),
            (StatusRecord::Existing, Some(_)) => push(kind, l.id, "existing line with build_cost".into()),
            (_, Some(c)) if !nonneg(c) => {
                push(kind, l.id, format!("build_cost must be nonnegative, got {c}"))
            }
            _ => {}
        }
    }

    let mut seen = HashSet::new();
    for g in &file.generators {
        let kind = ElementKind::Generator;
        if !seen.insert(g.id) {
            push(kind, g.id, "duplicate id".into());
        }
        if !buses.contains(&g.bus) {
            push(kind, g.id, format!("references unknown bus {}", g.bus));
        }
        if !nonneg(g.cost) {
            push(kind, g.id, format!("marginal cost must be nonnegative, got {}", g.cost));
        }
        if !nonneg(g.pmax_nominal) {
            push(kind, g.id, format!("nominal capacity must be nonnegative, got {}", g.pmax_nominal));
        }
        if !(nonneg(g.delta) && g.delta <= g.pmax_nominal) {
            push(
                kind,
                g.id,
                format!("capacity deviation {} outside [0, {}]", g.delta, g.pmax_nominal),
            );
        }
    }

    let mut seen = HashSet::new();
    for d in &file.loads {
        let kind = ElementKind::Load;
        if !seen.insert(d.id) {
            push(kind, d.id, "duplicate id".into());
        }
        if !buses.contains(&d.bus) {
            push(kind, d.id, format!("references unknown bus {}", d.bus));
        }
        if !nonneg(d.shed_cost) {
            push(kind, d.id, format!("shed cost must be nonnegative, got {}", d.shed_cost));
        }
        if !nonneg(d.demand_nominal) {
            push(kind, d.id, format!("nominal demand must be nonnegative, got {}", d.demand_nominal));
        }
        if !nonneg(d.delta) {
            push(kind, d.id, format!("demand deviation must be nonnegative, got {}", d.delta));
        }
        if !(d.gamma >= 0.0 && d.gamma <= 1.0) {
            push(kind, d.id, format!("shed fraction {} outside [0, 1]", d.gamma));
        }
    }

    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "base_mva": 100, "sigma": 1, "investment_budget": null,
        "buses": [{"id": 10}, {"id": 20}],
        "lines": [{"id": 1, "from": 10, "to": 20, "x": 0.1, "fmax": 50, "status": "existing"}],
        "generators": [{"id": 1, "bus": 10, "cost": 5, "pmax_nominal": 100, "delta": 10}],
        "loads": [{"id": 1, "bus": 20, "shed_cost": 100, "demand_nominal": 40, "delta": 4, "gamma": 1}]
    }"#;

    #[test]
    fn dense_reindexing() {
        let case = parse_native(TINY).unwrap();
        assert_eq!(case.lines[0].from_bus, 0);
        assert_eq!(case.lines[0].to_bus, 1);
        assert_eq!(case.loads[0].bus, 1);
        assert_eq!(case.investment_budget, None);
    }

    #[test]
    fn unknown_key_is_a_parse_error_with_location() {
        let text = TINY.replace("\"sigma\": 1,", "\"sigma\": 1, \"extra\": 3,");
        match parse_native(&text) {
            Err(Error::Parse { location, message }) => {
                assert!(location.starts_with("line 2"), "{location}");
                assert!(message.contains("extra"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reports_every_violation_in_order() {
        let text = TINY
            .replace("\"x\": 0.1", "\"x\": 0")
            .replace("\"gamma\": 1", "\"gamma\": 1.2")
            .replace("\"to\": 20", "\"to\": 30");
        let Err(Error::Validation(v)) = parse_native(&text) else {
            panic!("expected validation failure");
        };
        let kinds: Vec<_> = v.iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ElementKind::Line, ElementKind::Line, ElementKind::Load]);
        assert!(v.iter().any(|v| v.message.contains("nonpositive reactance")));
        assert!(v.iter().any(|v| v.message.contains("unknown bus 30")));
    }
}
