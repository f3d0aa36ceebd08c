//! Reader for MATPOWER-style case scripts.
//!
//! Recognized assignments: `mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
//! `mpc.gencost`, `mpc.branch`, plus these planning extensions:
//!
//! * `mpc.candidate = [branch_row build_cost; ...]` turns an out-of-service
//!   branch (1-based row of `mpc.branch`) into a candidate line.
//! * scalars `mpc.sigma` (default 1), `mpc.investment_budget` (default
//!   unlimited), `mpc.shed_cost` (default ten times the largest generation
//!   cost), `mpc.demand_deviation` and `mpc.capacity_deviation` (fractions of
//!   nominal, default 0), `mpc.shed_fraction` (default 1).
//!
//! Every bus with positive `Pd` becomes a load with the bus id as its id.
//! Generators and lines take their 1-based row number as id. Out-of-service
//! generators and out-of-service branches without a candidate entry are
//! dropped. A zero `rateA` (unlimited) becomes the total nominal generation
//! capacity. Generation cost is the linear coefficient of a polynomial
//! `gencost` row.

use std::collections::HashMap;

use super::native::{
    BusRecord, CaseFile, GeneratorRecord, LineRecord, LoadRecord, StatusRecord,
};
use super::GridCase;
use crate::error::{Error, Result};

struct Matrix {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

enum Value {
    Scalar(usize, f64),
    Matrix(Matrix),
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok
            .parse()
            .map_err(|_| parse_err(line, format!("expected a number, found `{tok}`"))),
    }
}

fn assignments(text: &str) -> Result<HashMap<String, Value>> {
    let mut out = HashMap::new();
    let mut open: Option<(String, Matrix)> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let code = raw.split('%').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        let body = if open.is_some() {
            code
        } else {
            let Some(rest) = code.strip_prefix("mpc.") else {
                continue;
            };
            let Some((name, value)) = rest.split_once('=') else {
                return Err(parse_err(line, format!("expected an assignment: `{code}`")));
            };
            let name = name.trim().to_string();
            let value = value.trim();
            if let Some(inner) = value.strip_prefix('[') {
                open = Some((name, Matrix { line, rows: Vec::new() }));
                inner
            } else {
                let v = value.trim_end_matches(';').trim();
                if v.starts_with('\'') {
                    continue;
                }
                out.insert(name, Value::Scalar(line, parse_number(v, line)?));
                continue;
            }
        };

        let (content, closed) = match body.find(']') {
            Some(p) => (&body[..p], true),
            None => (body, false),
        };
        let (_, m) = open.as_mut().expect("inside a matrix");
        for row in content.split(';') {
            let nums = row
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| parse_number(t, line))
                .collect::<Result<Vec<_>>>()?;
            if !nums.is_empty() {
                m.rows.push((line, nums));
            }
        }
        if closed {
            let (name, m) = open.take().expect("inside a matrix");
            out.insert(name, Value::Matrix(m));
        }
    }
    if let Some((name, m)) = open {
        return Err(parse_err(m.line, format!("matrix mpc.{name} is never closed")));
    }
    Ok(out)
}

fn matrix<'a>(vals: &'a HashMap<String, Value>, name: &str) -> Result<&'a Matrix> {
    match vals.get(name) {
        Some(Value::Matrix(m)) => Ok(m),
        Some(Value::Scalar(line, _)) => Err(parse_err(*line, format!("mpc.{name} must be a matrix"))),
        None => Err(parse_err(0, format!("missing mpc.{name}"))),
    }
}

fn scalar(vals: &HashMap<String, Value>, name: &str) -> Result<Option<f64>> {
    match vals.get(name) {
        Some(Value::Scalar(_, v)) => Ok(Some(*v)),
        Some(Value::Matrix(m)) => Err(parse_err(m.line, format!("mpc.{name} must be a scalar"))),
        None => Ok(None),
    }
}

fn col(row: &(usize, Vec<f64>), k: usize, what: &str) -> Result<f64> {
    row.1
        .get(k)
        .copied()
        .ok_or_else(|| parse_err(row.0, format!("{what} row has fewer than {} columns", k + 1)))
}

fn as_id(v: f64, line: usize) -> Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as u64)
    } else {
        Err(parse_err(line, format!("`{v}` is not a valid id")))
    }
}

pub fn parse_matpower(text: &str) -> Result<GridCase> {
    let vals = assignments(text)?;
    let base_mva = scalar(&vals, "baseMVA")?.ok_or_else(|| parse_err(0, "missing mpc.baseMVA"))?;
    let sigma = scalar(&vals, "sigma")?.unwrap_or(1.0);
    let investment_budget = scalar(&vals, "investment_budget")?;
    let dev_d = scalar(&vals, "demand_deviation")?.unwrap_or(0.0);
    let dev_g = scalar(&vals, "capacity_deviation")?.unwrap_or(0.0);
    let gamma = scalar(&vals, "shed_fraction")?.unwrap_or(1.0);

    let bus_m = matrix(&vals, "bus")?;
    let gen_m = matrix(&vals, "gen")?;
    let cost_m = matrix(&vals, "gencost")?;
    let branch_m = matrix(&vals, "branch")?;

    let mut buses = Vec::new();
    let mut demands = Vec::new();
    for row in &bus_m.rows {
        let id = as_id(col(row, 0, "bus")?, row.0)?;
        buses.push(BusRecord { id });
        let pd = col(row, 2, "bus")?;
        if pd > 0.0 {
            demands.push((id, pd));
        }
    }

    let mut generators = Vec::new();
    for (k, row) in gen_m.rows.iter().enumerate() {
        let status = col(row, 7, "gen")?;
        if status <= 0.0 {
            continue;
        }
        let cost_row = cost_m
            .rows
            .get(k)
            .ok_or_else(|| parse_err(row.0, format!("no gencost row for generator row {}", k + 1)))?;
        let model = col(cost_row, 0, "gencost")?;
        if model != 2.0 {
            return Err(parse_err(cost_row.0, "only polynomial (model 2) generation costs are supported"));
        }
        let n = col(cost_row, 3, "gencost")? as usize;
        let cost = if n >= 2 { col(cost_row, 4 + n - 2, "gencost")? } else { 0.0 };
        let pmax = col(row, 8, "gen")?;
        generators.push(GeneratorRecord {
            id: k as u64 + 1,
            bus: as_id(col(row, 0, "gen")?, row.0)?,
            cost,
            pmax_nominal: pmax,
            delta: dev_g * pmax,
        });
    }
    let total_capacity: f64 = generators.iter().map(|g| g.pmax_nominal).sum();
    let max_cost = generators.iter().map(|g| g.cost).fold(0.0, f64::max);
    let shed_cost = scalar(&vals, "shed_cost")?.unwrap_or((10.0 * max_cost).max(1.0));

    let mut candidate_cost: HashMap<usize, (usize, f64)> = HashMap::new();
    if let Some(Value::Matrix(m)) = vals.get("candidate") {
        for row in &m.rows {
            let r = as_id(col(row, 0, "candidate")?, row.0)? as usize;
            if r == 0 || r > branch_m.rows.len() {
                return Err(parse_err(row.0, format!("candidate refers to missing branch row {r}")));
            }
            candidate_cost.insert(r, (row.0, col(row, 1, "candidate")?));
        }
    }

    let mut lines = Vec::new();
    for (k, row) in branch_m.rows.iter().enumerate() {
        let r = k + 1;
        let in_service = col(row, 10, "branch")? > 0.0;
        let candidate = candidate_cost.get(&r);
        if let (true, Some((line, _))) = (in_service, candidate) {
            return Err(parse_err(*line, format!("candidate branch row {r} is in service")));
        }
        if !in_service && candidate.is_none() {
            continue;
        }
        let rate = col(row, 5, "branch")?;
        lines.push(LineRecord {
            id: r as u64,
            from: as_id(col(row, 0, "branch")?, row.0)?,
            to: as_id(col(row, 1, "branch")?, row.0)?,
            x: col(row, 3, "branch")?,
            fmax: if rate == 0.0 { total_capacity } else { rate },
            status: if candidate.is_some() { StatusRecord::Candidate } else { StatusRecord::Existing },
            build_cost: candidate.map(|c| c.1),
        });
    }

    let loads = demands
        .into_iter()
        .map(|(id, pd)| LoadRecord {
            id,
            bus: id,
            shed_cost,
            demand_nominal: pd,
            delta: dev_d * pd,
            gamma,
        })
        .collect();

    CaseFile {
        base_mva,
        sigma,
        investment_budget,
        buses,
        lines,
        generators,
        loads,
    }
    .into_case()
}
