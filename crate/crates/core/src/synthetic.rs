//! Seeded generator of large planning cases for scale testing.
//!
//! The network has a meshed core and a number of small radial pockets, each
//! hanging off the core by a single line. Core buses sit on a line; each one
//! attaches to a random earlier bus within a short window, and extra lines
//! close loops inside the same window, so paths stay local. Units are spread
//! so every stretch of the core is supplied nearby. Pockets hold load only,
//! and their connecting line is rated near the pocket's peak, so some of
//! them congest once demand rises. Every candidate reinforces one pocket
//! connection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::native::{BusRecord, CaseFile, GeneratorRecord, LineRecord, LoadRecord, StatusRecord};
use crate::grid::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticParams {
    pub buses: usize,
    /// Existing lines.
    pub lines: usize,
    /// Candidate lines; also the number of pockets.
    pub candidates: usize,
    /// Buses per pocket.
    pub pocket_size: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            buses: 2000,
            lines: 2500,
            candidates: 100,
            pocket_size: 4,
            seed: 1,
        }
    }
}

const WINDOW: usize = 12;
const UNIT_SPACING: usize = 6;
const CORE_RATING: f64 = 500.0;

struct Builder {
    rng: ChaCha8Rng,
    lines: Vec<LineRecord>,
    generators: Vec<GeneratorRecord>,
    loads: Vec<LoadRecord>,
}

impl Builder {
    fn line(&mut self, from: usize, to: usize, fmax: f64) -> usize {
        let x = self.rng.gen_range(5..=30) as f64 / 100.0;
        self.lines.push(LineRecord {
            id: self.lines.len() as u64 + 1,
            from: from as u64 + 1,
            to: to as u64 + 1,
            x,
            fmax,
            status: StatusRecord::Existing,
            build_cost: None,
        });
        self.lines.len() - 1
    }

    fn unit(&mut self, bus: usize, cost: f64, pmax: f64) {
        self.generators.push(GeneratorRecord {
            id: self.generators.len() as u64 + 1,
            bus: bus as u64 + 1,
            cost,
            pmax_nominal: pmax,
            delta: (0.3 * pmax).round(),
        });
    }

    fn load(&mut self, bus: usize, demand: f64) {
        self.loads.push(LoadRecord {
            id: self.loads.len() as u64 + 1,
            bus: bus as u64 + 1,
            shed_cost: 1000.0,
            demand_nominal: demand,
            delta: (0.2 * demand).round(),
            gamma: 1.0,
        });
    }
}

pub fn generate(params: &SyntheticParams) -> GridCase {
    let pockets = params.candidates;
    let core = params
        .buses
        .checked_sub(pockets * params.pocket_size)
        .filter(|&c| c >= 2)
        .expect("pockets leave fewer than two core buses");
    assert!(params.pocket_size >= 1, "pockets need at least one bus");
    assert!(params.lines >= params.buses - 1, "too few lines to connect every bus");

    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        lines: Vec::new(),
        generators: Vec::new(),
        loads: Vec::new(),
    };

    // Core tree, then loops.
    let mut corridors: Vec<(usize, usize)> = Vec::new();
    for k in 1..core {
        let a = b.rng.gen_range(k.saturating_sub(WINDOW)..k);
        corridors.push((a, k));
    }
    let chords = params.lines - (params.buses - 1);
    while corridors.len() < core - 1 + chords {
        let a = b.rng.gen_range(0..core - 1);
        let c = (a + b.rng.gen_range(2..=WINDOW)).min(core - 1);
        if a != c && !corridors.contains(&(a, c)) {
            corridors.push((a, c));
        }
    }
    for &(a, c) in &corridors {
        b.line(a, c, CORE_RATING);
    }

    let core_demand: Vec<f64> = (0..core)
        .map(|_| if b.rng.gen_bool(0.6) { b.rng.gen_range(10..=60) as f64 } else { 0.0 })
        .collect();
    for (bus, &d) in core_demand.iter().enumerate() {
        if d > 0.0 {
            b.load(bus, d);
        }
    }

    // Pockets: a radial chain behind one connecting line.
    let mut links = Vec::with_capacity(pockets);
    let mut pocket_load = 0.0;
    for p in 0..pockets {
        let first = core + p * params.pocket_size;
        let anchor = b.rng.gen_range(0..core);
        let mut transfer = 0.0;
        for k in 0..params.pocket_size {
            let bus = first + k;
            if k > 0 {
                b.line(bus - 1, bus, CORE_RATING);
            }
            let d = b.rng.gen_range(10..=40) as f64;
            b.load(bus, d);
            transfer += d;
            pocket_load += d;
        }
        let rating = (transfer * b.rng.gen_range(0.7..1.1)).round();
        links.push(b.line(anchor, first, rating));
    }

    // Units sized to local demand, then scaled to cover the pockets.
    for start in (0..core).step_by(UNIT_SPACING) {
        let local: f64 = core_demand[start..(start + UNIT_SPACING).min(core)].iter().sum();
        let bus = start + b.rng.gen_range(0..UNIT_SPACING.min(core - start));
        let cost = b.rng.gen_range(15..=60) as f64;
        b.unit(bus, cost, (1.5 * local).max(20.0));
    }
    let core_capacity: f64 = b.generators.iter().map(|g| g.pmax_nominal).sum();
    let needed = 1.5 * (core_demand.iter().sum::<f64>() + pocket_load);
    let scale = (needed / core_capacity).max(1.0);
    for g in &mut b.generators {
        g.pmax_nominal = (g.pmax_nominal * scale).round();
        g.delta = (0.3 * g.pmax_nominal).round();
    }

    for &l in &links {
        let base = b.lines[l].clone();
        let cost = b.rng.gen_range(20..=200) as f64;
        b.lines.push(LineRecord {
            id: b.lines.len() as u64 + 1,
            from: base.from,
            to: base.to,
            x: base.x,
            fmax: base.fmax.max(50.0),
            status: StatusRecord::Candidate,
            build_cost: Some(cost),
        });
    }

    CaseFile {
        base_mva: 100.0,
        sigma: 1.0,
        investment_budget: None,
        buses: (0..params.buses).map(|n| BusRecord { id: n as u64 + 1 }).collect(),
        lines: b.lines,
        generators: b.generators,
        loads: b.loads,
    }
    .into_case()
    .expect("generated case is valid")
}
