use std::fmt::{self, Write as _};

use crate::MilpError;

/// Relation between a constraint row and its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// A sparse constraint row `Σ coeffs · x  (relation)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: Option<String>,
}

/// Maximize `cᵀx` subject to linear rows, variable bounds and a set of binary variables.
///
/// Built incrementally with [`MilpProblem::add_var`], [`MilpProblem::add_binary`] and
/// [`MilpProblem::add_constraint`]; treated as an immutable value once handed to a solver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    names: Vec<String>,
    binaries: Vec<usize>,
    constraints: Vec<Constraint>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a continuous variable and returns its index. `upper` may be `f64::INFINITY`.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> usize {
        self.objective.push(objective);
        self.bounds.push((lower, upper));
        self.names.push(name.into());
        self.objective.len() - 1
    }

    /// Adds a binary variable (bounds `[0, 1]`, integrality enforced by branch-and-bound).
    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> usize {
        let idx = self.add_var(name, 0.0, 1.0, objective);
        self.binaries.push(idx);
        idx
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
            name: None,
        });
        self.constraints.len() - 1
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let idx = self.add_constraint(coeffs, relation, rhs);
        self.constraints[idx].name = Some(name.into());
        idx
    }

    /// Marks an existing variable as binary. Its bounds must already lie within `[0, 1]`.
    pub fn mark_binary(&mut self, var: usize) {
        if !self.binaries.contains(&var) {
            self.binaries.push(var);
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Copy of the problem with the given variable bounds replaced.
    pub fn with_bounds(&self, bounds: Vec<(f64, f64)>) -> Self {
        Self {
            bounds,
            ..self.clone()
        }
    }

    /// Copy of the problem with the binary set emptied (the LP relaxation).
    pub fn relaxed(&self) -> Self {
        Self {
            binaries: Vec::new(),
            ..self.clone()
        }
    }

    /// Evaluates `cᵀx`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation over all rows and bounds at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.constraints {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&(lo, hi), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.num_vars();
        if self.bounds.len() != n || self.names.len() != n {
            return Err(MilpError::Malformed("dimension mismatch between objective and bounds".into()));
        }
        for (j, (&c, &(lo, hi))) in self.objective.iter().zip(&self.bounds).enumerate() {
            if !c.is_finite() {
                return Err(MilpError::Malformed(format!("objective coefficient of x{j} is not finite")));
            }
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(MilpError::Malformed(format!("invalid bounds [{lo}, {hi}] on x{j}")));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::Malformed(format!("row {i} has a non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(MilpError::Malformed(format!("row {i} references unknown variable {j}")));
                }
                if !a.is_finite() {
                    return Err(MilpError::Malformed(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        for &b in &self.binaries {
            if b >= n {
                return Err(MilpError::Malformed(format!("binary index {b} out of range")));
            }
            let (lo, hi) = self.bounds[b];
            if lo < 0.0 || hi > 1.0 {
                return Err(MilpError::Malformed(format!("binary x{b} has bounds outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Plain-text dump in the CPLEX LP dialect, readable by most external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::new();
        let name = |j: usize| -> String {
            let raw = &self.names[j];
            if raw.is_empty() {
                format!("x{j}")
            } else {
                raw.clone()
            }
        };
        let terms = |coeffs: &mut dyn Iterator<Item = (usize, f64)>| -> String {
            let mut s = String::new();
            for (k, (j, a)) in coeffs.enumerate() {
                if k == 0 {
                    if a < 0.0 {
                        s.push_str("- ");
                    }
                } else {
                    s.push_str(if a < 0.0 { " - " } else { " + " });
                }
                let _ = write!(s, "{} {}", a.abs(), name(j));
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };

        out.push_str("Maximize\n obj: ");
        let mut obj = self.objective.iter().copied().enumerate().filter(|&(_, c)| c != 0.0);
        out.push_str(&terms(&mut obj));
        out.push_str("\nSubject To\n");
        for (i, row) in self.constraints.iter().enumerate() {
            let label = row.name.clone().unwrap_or_else(|| format!("c{i}"));
            let mut it = row.coeffs.iter().copied();
            let _ = writeln!(out, " {label}: {} {} {}", terms(&mut it), row.relation, row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) if lo == hi => {
                    let _ = writeln!(out, " {} = {}", name(j), lo);
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", lo, name(j), hi);
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", name(j), lo);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", name(j), hi);
                }
                (false, false) => {
                    let _ = writeln!(out, " {} free", name(j));
                }
            }
        }
        if !self.binaries.is_empty() {
            out.push_str("Binaries\n");
            let mut sorted = self.binaries.clone();
            sorted.sort_unstable();
            for b in sorted {
                let _ = writeln!(out, " {}", name(b));
            }
        }
        out.push_str("End\n");
        out
    }
}
