use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::simplex::{solve_relaxation, LpOutcome, LpStatus};
use crate::{MilpError, MilpProblem, MilpSolution, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap_tol: f64,
    /// Maximum number of LP relaxations.
    pub node_limit: usize,
    /// Distance from {0, 1} under which a binary counts as integral.
    pub int_tol: f64,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            node_limit: 100_000,
            int_tol: 1e-6,
        }
    }
}

struct Node {
    bound: f64,
    id: usize,
    bounds: Vec<(f64, f64)>,
    lp: LpOutcome,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap on bound; older nodes first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

fn scaled_gap(bound: f64, incumbent: f64) -> f64 {
    ((bound - incumbent) / incumbent.abs().max(1.0)).max(0.0)
}

/// Most fractional binary, lowest index on ties.
fn branching_var(binaries: &[usize], x: &[f64], int_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &b in binaries {
        let dist = (x[b] - x[b].round()).abs();
        if dist <= int_tol {
            continue;
        }
        match best {
            Some((bi, bd)) if dist < bd || (dist == bd && b > bi) => {}
            _ => best = Some((b, dist)),
        }
    }
    best.map(|(b, _)| b)
}

/// Best-first branch-and-bound over the binary variables of `problem`.
///
/// Each node solves its LP relaxation from scratch. Branching picks the most fractional
/// binary (lowest index on ties) and nodes are expanded in order of their LP bound, so the
/// result is deterministic for identical inputs.
pub fn solve_milp(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    let (n, m) = (problem.num_vars(), problem.num_constraints());
    let mut binaries = problem.binaries().to_vec();
    binaries.sort_unstable();

    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut next_id = 0usize;
    let mut incumbent: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    let mut open = BinaryHeap::new();

    let evaluate = |bounds: &[(f64, f64)], nodes: &mut usize, iterations: &mut usize| {
        *nodes += 1;
        let lp = solve_relaxation(problem, bounds)?;
        *iterations += lp.iterations;
        Ok::<_, MilpError>(lp)
    };

    let root_bounds = problem.bounds().to_vec();
    let root = evaluate(&root_bounds, &mut nodes, &mut iterations)?;
    match root.status {
        LpStatus::Infeasible => {
            return Ok(MilpSolution::without_solution(SolveStatus::Infeasible, n, m, nodes, iterations));
        }
        LpStatus::Unbounded => {
            return Ok(MilpSolution::without_solution(SolveStatus::Unbounded, n, m, nodes, iterations));
        }
        LpStatus::Optimal => {}
    }
    open.push(Node {
        bound: root.objective,
        id: next_id,
        bounds: root_bounds,
        lp: root,
    });
    next_id += 1;

    let mut closed_bound = f64::NEG_INFINITY;
    while let Some(node) = open.pop() {
        if let Some((_, inc_obj, _)) = &incumbent {
            if node.bound - inc_obj <= options.gap_tol * inc_obj.abs().max(1.0) {
                // Best-first: every remaining node is bounded by this one.
                closed_bound = node.bound;
                open.clear();
                break;
            }
        }
        let Some(var) = branching_var(&binaries, &node.lp.x, options.int_tol) else {
            let (x, obj, duals) = integral_point(problem, &binaries, node.bounds, node.lp, &mut nodes, &mut iterations)?;
            if let Some(x) = x {
                if incumbent.as_ref().is_none_or(|(_, best, _)| obj > *best) {
                    incumbent = Some((x, obj, duals));
                }
            }
            continue;
        };

        if nodes >= options.node_limit {
            open.push(node);
            break;
        }

        for value in [0.0, 1.0] {
            let mut bounds = node.bounds.clone();
            bounds[var] = (value, value);
            let lp = evaluate(&bounds, &mut nodes, &mut iterations)?;
            if lp.status != LpStatus::Optimal {
                // An unbounded child under a bounded parent cannot happen; drop it with the infeasible ones.
                continue;
            }
            if let Some((_, inc_obj, _)) = &incumbent {
                if lp.objective - inc_obj <= options.gap_tol * inc_obj.abs().max(1.0) {
                    continue;
                }
            }
            open.push(Node {
                bound: lp.objective,
                id: next_id,
                bounds,
                lp,
            });
            next_id += 1;
        }
    }

    let best_open = open.iter().map(|nd| nd.bound).fold(closed_bound, f64::max);
    match incumbent {
        Some((x, obj, duals)) => {
            let gap = if best_open.is_finite() { scaled_gap(best_open, obj) } else { 0.0 };
            let sol = MilpSolution {
                status: SolveStatus::Optimal,
                x,
                objective_value: obj,
                nodes_explored: nodes,
                gap,
                duals,
                iterations,
            };
            if !open.is_empty() && gap > options.gap_tol {
                return Err(MilpError::NodeLimitExceeded {
                    incumbent: Some(Box::new(sol)),
                    gap,
                    nodes,
                });
            }
            Ok(sol)
        }
        None if !open.is_empty() => Err(MilpError::NodeLimitExceeded {
            incumbent: None,
            gap: f64::INFINITY,
            nodes,
        }),
        None => Ok(MilpSolution::without_solution(SolveStatus::Infeasible, n, m, nodes, iterations)),
    }
}

/// Point (if any), objective and row duals.
type IntegralPoint = (Option<Vec<f64>>, f64, Vec<f64>);

/// Turns an LP point whose binaries are within tolerance of {0, 1} into an exactly
/// integral one, re-solving with the binaries fixed when any of them is not exact.
fn integral_point(
    problem: &MilpProblem,
    binaries: &[usize],
    mut bounds: Vec<(f64, f64)>,
    lp: LpOutcome,
    nodes: &mut usize,
    iterations: &mut usize,
) -> Result<IntegralPoint, MilpError> {
    if binaries.iter().all(|&b| lp.x[b] == 0.0 || lp.x[b] == 1.0) {
        return Ok((Some(lp.x), lp.objective, lp.duals));
    }
    for &b in binaries {
        let v = lp.x[b].round();
        bounds[b] = (v, v);
    }
    *nodes += 1;
    let fixed = solve_relaxation(problem, &bounds)?;
    *iterations += fixed.iterations;
    if fixed.status == LpStatus::Optimal {
        Ok((Some(fixed.x), fixed.objective, fixed.duals))
    } else {
        Ok((None, f64::NEG_INFINITY, fixed.duals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branching_prefers_most_fractional_then_lowest_index() {
        let x = [0.5, 0.2, 0.5, 1.0];
        assert_eq!(branching_var(&[0, 1, 2, 3], &x, 1e-6), Some(0));
        assert_eq!(branching_var(&[1, 2, 3], &x, 1e-6), Some(2));
        assert_eq!(branching_var(&[3], &x, 1e-6), None);
    }

    #[test]
    fn gap_is_relative_with_unit_floor() {
        assert_eq!(scaled_gap(10.0, 10.0), 0.0);
        assert!((scaled_gap(11.0, 10.0) - 0.1).abs() < 1e-15);
        assert!((scaled_gap(0.5, 0.0) - 0.5).abs() < 1e-15);
    }
}
