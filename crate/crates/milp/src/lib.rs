//! Small dense mixed-integer linear programming.
//!
//! [`solve_lp`] runs a bounded-variable primal simplex on the continuous relaxation;
//! [`solve_milp`] wraps it in best-first branch-and-bound over the binary variables.
//! Both maximize. The solver targets problems with a few hundred variables, where dense
//! linear algebra is adequate.

mod branch;
mod problem;
mod simplex;

pub use branch::{solve_milp, MilpOptions};
pub use problem::{Constraint, MilpProblem, Relation};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Variable values; meaningful only when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Number of LP relaxations solved.
    pub nodes_explored: usize,
    /// Relative gap between the best open bound and the returned objective.
    pub gap: f64,
    /// Row multipliers `y` of the final LP, with reduced costs `c - Aᵀy`.
    pub duals: Vec<f64>,
    /// Total simplex iterations across all nodes.
    pub iterations: usize,
}

impl MilpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn without_solution(status: SolveStatus, n: usize, m: usize, nodes: usize, iterations: usize) -> Self {
        let objective_value = match status {
            SolveStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            x: vec![0.0; n],
            objective_value,
            nodes_explored: nodes,
            gap: f64::INFINITY,
            duals: vec![0.0; m],
            iterations,
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum MilpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("node limit reached after {nodes} nodes (gap {gap:.3e})")]
    NodeLimitExceeded {
        incumbent: Option<Box<MilpSolution>>,
        gap: f64,
        nodes: usize,
    },
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
}

/// Solves the continuous relaxation of `problem` (binary markers are ignored).
pub fn solve_lp(problem: &MilpProblem) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    let out = simplex::solve_relaxation(problem, problem.bounds())?;
    let (n, m) = (problem.num_vars(), problem.num_constraints());
    Ok(match out.status {
        simplex::LpStatus::Optimal => MilpSolution {
            status: SolveStatus::Optimal,
            x: out.x,
            objective_value: out.objective,
            nodes_explored: 1,
            gap: 0.0,
            duals: out.duals,
            iterations: out.iterations,
        },
        simplex::LpStatus::Infeasible => MilpSolution::without_solution(SolveStatus::Infeasible, n, m, 1, out.iterations),
        simplex::LpStatus::Unbounded => MilpSolution::without_solution(SolveStatus::Unbounded, n, m, 1, out.iterations),
    })
}
