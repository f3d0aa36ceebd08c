use std::fmt;

/// Index of a variable (column) in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of a constraint (row) in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowKind::Eq => "=",
            RowKind::Le => "<=",
            RowKind::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
    pub coefs: Vec<(VarId, f64)>,
}

/// A minimization problem `min cᵀx` over box-bounded variables subject to
/// named linear rows.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub(crate) names: Vec<String>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) cost: Vec<f64>,
    pub(crate) rows: Vec<Row>,
    pub(crate) objective_offset: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        VarId(self.lower.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coefs: Vec<(VarId, f64)>,
        kind: RowKind,
        rhs: f64,
    ) -> RowId {
        self.rows.push(Row {
            name: name.into(),
            kind,
            rhs,
            coefs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.lower[var.0] = lower;
        self.upper[var.0] = upper;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.cost[var.0] = cost;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.rows[row.0].rhs = rhs;
    }

    /// Constant added to every reported objective value.
    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.names[var.0]
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.lower[var.0], self.upper[var.0])
    }

    pub fn cost(&self, var: VarId) -> f64 {
        self.cost[var.0]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row(&self, row: RowId) -> &Row {
        &self.rows[row.0]
    }

    /// Objective value of `x`, including the offset.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Lists every structural defect: non-finite coefficients, inverted
    /// bounds, references to unknown variables.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let n = self.num_vars();
        for j in 0..n {
            if !self.cost[j].is_finite() {
                issues.push(format!("variable {}: non-finite cost", self.names[j]));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                issues.push(format!("variable {}: NaN bound", self.names[j]));
            } else if self.lower[j] > self.upper[j] {
                issues.push(format!(
                    "variable {}: lower bound {} exceeds upper bound {}",
                    self.names[j], self.lower[j], self.upper[j]
                ));
            } else if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                issues.push(format!("variable {}: empty domain", self.names[j]));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                issues.push(format!("row {}: non-finite right-hand side", row.name));
            }
            for &(v, a) in &row.coefs {
                if v.0 >= n {
                    issues.push(format!("row {}: unknown variable index {}", row.name, v.0));
                } else if !a.is_finite() {
                    issues.push(format!("row {}: non-finite coefficient", row.name));
                }
            }
        }
        issues
    }
}

/// A [`LinearProgram`] in which some variables are restricted to `{0, 1}`.
#[derive(Debug, Clone, Default)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<VarId>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram, binaries: Vec<VarId>) -> Self {
        Self { lp, binaries }
    }

    pub fn check(&self) -> Vec<String> {
        let mut issues = self.lp.check();
        for &b in &self.binaries {
            if b.0 >= self.lp.num_vars() {
                issues.push(format!("binary index {} out of range", b.0));
                continue;
            }
            let (lo, hi) = self.lp.bounds(b);
            if lo < 0.0 || hi > 1.0 {
                issues.push(format!(
                    "binary {} has bounds [{lo}, {hi}] outside [0, 1]",
                    self.lp.var_name(b)
                ));
            }
        }
        issues
    }
}
