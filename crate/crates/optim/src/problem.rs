use crate::OptimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A single linear row `Σ coef·x  (≤ | = | ≥)  rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program with per-variable bounds. Infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            constraints: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            names: Vec::new(),
        }
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> usize {
        self.objective.push(objective);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    /// Adds a constraint and returns its row index. Repeated variable indices
    /// in `terms` are summed.
    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (var, coef) in terms {
            match merged.iter_mut().find(|(v, _)| *v == var) {
                Some(entry) => entry.1 += coef,
                None => merged.push((var, coef)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.constraints.push(Constraint { terms: merged, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n || self.names.len() != n {
            return Err(OptimError::Dimension(format!(
                "objective has {} entries, bounds have {}/{}, names {}",
                n,
                self.lower.len(),
                self.upper.len(),
                self.names.len()
            )));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(OptimError::InvalidBounds { index: j, lower: lo, upper: hi });
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(OptimError::NonFinite("objective".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(OptimError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, c) in &row.terms {
                if j >= n {
                    return Err(OptimError::Dimension(format!(
                        "row {i} references variable {j} but only {n} exist"
                    )));
                }
                if !c.is_finite() {
                    return Err(OptimError::NonFinite(format!("row {i}, variable {j}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.constraints {
            let lhs: f64 = row.terms.iter().map(|&(j, c)| c * x[j]).sum();
            let viol = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// A linear program whose `integer_vars` are restricted to `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub base: LinearProgram,
    pub integer_vars: Vec<usize>,
    /// Optional binary assignments (one value per entry of `integer_vars`)
    /// tried as starting incumbents.
    pub hints: Vec<Vec<f64>>,
}

impl MilpProblem {
    pub fn new(base: LinearProgram) -> Self {
        Self { base, integer_vars: Vec::new(), hints: Vec::new() }
    }

    /// Adds a `{0,1}` variable and returns its index.
    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        let j = self.base.add_variable(name, 0.0, 1.0, objective);
        self.integer_vars.push(j);
        j
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        self.base.validate()?;
        for &j in &self.integer_vars {
            if j >= self.base.num_variables() {
                return Err(OptimError::Dimension(format!("integer variable {j} out of range")));
            }
            if self.base.lower[j] < 0.0 || self.base.upper[j] > 1.0 {
                return Err(OptimError::NonBinaryInteger(j));
            }
        }
        for (h, hint) in self.hints.iter().enumerate() {
            if hint.len() != self.integer_vars.len() {
                return Err(OptimError::Dimension(format!(
                    "hint {h} has {} entries, expected {}",
                    hint.len(),
                    self.integer_vars.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// A MILP search stopped early at its target objective value.
    TargetReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective of `values` in the problem's own sense. NaN when no
    /// assignment is available.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Best proven bound on the optimum (equal to `objective` for LPs).
    pub bound: f64,
    /// Absolute distance between `objective` and `bound`.
    pub gap: f64,
    /// Simplex pivots (LP) or branch-and-bound nodes (MILP).
    pub work: usize,
}

impl SolveResult {
    pub(crate) fn without_solution(status: SolveStatus, work: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            bound: f64::NAN,
            gap: f64::INFINITY,
            work,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}
