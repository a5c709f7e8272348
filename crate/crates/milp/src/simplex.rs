//! Dense bounded-variable primal simplex.
//!
//! Every row `aᵢx (rel) bᵢ` becomes `aᵢx + sᵢ = bᵢ` with a slack whose bounds encode the
//! relation (`≤`: `[0, ∞)`, `≥`: `(-∞, 0]`, `=`: `[0, 0]`), so equality rows are handled
//! natively. Nonbasic variables sit at one of their bounds. Rows whose slack cannot absorb
//! the initial residual get an artificial column and a sum-of-artificials phase 1.

use crate::{MilpError, MilpProblem, Relation};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-10;
const PHASE1_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    /// Structural variable values.
    pub x: Vec<f64>,
    /// `cᵀx` in the problem's maximization sense.
    pub objective: f64,
    /// Row multipliers for the maximization problem: `c - Aᵀy` is the reduced-cost vector.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

struct Tableau {
    m: usize,
    ncol: usize,
    n_struct: usize,
    /// `B⁻¹A`, row-major `m × ncol`.
    t: Vec<f64>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    scale: Vec<f64>,
    rhs: Vec<f64>,
    a_scaled: Vec<f64>,
    art_sign: Vec<(usize, usize, f64)>,
    iterations: usize,
    max_iterations: usize,
    degenerate: usize,
    bland_after: usize,
    bland: bool,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

/// Solves the LP relaxation of `problem` under the given variable bounds.
pub(crate) fn solve_relaxation(problem: &MilpProblem, bounds: &[(f64, f64)]) -> Result<LpOutcome, MilpError> {
    let n = problem.num_vars();
    for &(lo, hi) in bounds {
        if lo > hi {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                objective: f64::NAN,
                duals: vec![0.0; problem.num_constraints()],
                iterations: 0,
            });
        }
    }
    let mut tab = Tableau::new(problem, bounds);
    if !tab.art_sign.is_empty() {
        let mut phase1 = vec![0.0; tab.ncol];
        for &(j, _, _) in &tab.art_sign {
            phase1[j] = 1.0;
        }
        tab.set_cost(phase1);
        tab.run()?;
        let infeas: f64 = tab.art_sign.iter().map(|&(j, _, _)| tab.x[j]).sum();
        if infeas > PHASE1_TOL {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                x: tab.x[..n].to_vec(),
                objective: f64::NAN,
                duals: vec![0.0; tab.m],
                iterations: tab.iterations,
            });
        }
        tab.retire_artificials();
    }
    let mut phase2 = vec![0.0; tab.ncol];
    for (j, &c) in problem.objective().iter().enumerate() {
        phase2[j] = -c;
    }
    tab.set_cost(phase2);
    tab.degenerate = 0;
    tab.bland = false;
    let end = tab.run()?;
    tab.refine();
    let x = tab.x[..n].to_vec();
    let objective = problem.objective_value(&x);
    let status = match end {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
    };
    let duals = (0..tab.m).map(|i| tab.d[n + i] / tab.scale[i]).collect();
    Ok(LpOutcome {
        status,
        x,
        objective,
        duals,
        iterations: tab.iterations,
    })
}

fn initial_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

impl Tableau {
    fn new(problem: &MilpProblem, bounds: &[(f64, f64)]) -> Self {
        let n = problem.num_vars();
        let rows = problem.constraints();
        let m = rows.len();

        let mut dense = vec![0.0; m * n];
        let mut scale = vec![1.0; m];
        let mut rhs = vec![0.0; m];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                dense[i * n + j] += a;
            }
            let max_abs = dense[i * n..(i + 1) * n].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if max_abs > 0.0 {
                scale[i] = max_abs;
                for v in &mut dense[i * n..(i + 1) * n] {
                    *v /= max_abs;
                }
            }
            rhs[i] = row.rhs / scale[i];
        }

        let mut x0: Vec<f64> = bounds.iter().map(|&(lo, hi)| initial_value(lo, hi)).collect();

        // Decide which rows need an artificial.
        let mut slack_bounds = Vec::with_capacity(m);
        let mut residual = Vec::with_capacity(m);
        let mut arts = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let (slo, shi) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            let r = rhs[i] - dense[i * n..(i + 1) * n].iter().zip(&x0).map(|(a, v)| a * v).sum::<f64>();
            slack_bounds.push((slo, shi));
            residual.push(r);
            if r < slo || r > shi {
                arts.push(i);
            }
        }

        let n_art = arts.len();
        let ncol = n + m + n_art;
        let mut t = vec![0.0; m * ncol];
        let mut lower = Vec::with_capacity(ncol);
        let mut upper = Vec::with_capacity(ncol);
        for &(lo, hi) in bounds {
            lower.push(lo);
            upper.push(hi);
        }
        for &(lo, hi) in &slack_bounds {
            lower.push(lo);
            upper.push(hi);
        }
        for _ in 0..n_art {
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }

        let mut basis = vec![0; m];
        let mut art_sign = Vec::with_capacity(n_art);
        let mut art_of_row = vec![None; m];
        for (k, &i) in arts.iter().enumerate() {
            art_of_row[i] = Some(n + m + k);
        }
        x0.resize(ncol, 0.0);
        for i in 0..m {
            let row = &mut t[i * ncol..(i + 1) * ncol];
            row[..n].copy_from_slice(&dense[i * n..(i + 1) * n]);
            row[n + i] = 1.0;
            match art_of_row[i] {
                None => {
                    basis[i] = n + i;
                    x0[n + i] = residual[i];
                }
                Some(a) => {
                    let (slo, shi) = slack_bounds[i];
                    let clip = residual[i].clamp(slo, shi);
                    let sigma = if residual[i] > clip { 1.0 } else { -1.0 };
                    x0[n + i] = clip;
                    // Row is divided by sigma so the artificial has a unit coefficient.
                    if sigma < 0.0 {
                        for v in row.iter_mut() {
                            *v = -*v;
                        }
                    }
                    row[a] = 1.0;
                    x0[a] = (residual[i] - clip).abs();
                    basis[i] = a;
                    art_sign.push((a, i, sigma));
                }
            }
        }
        let mut is_basic = vec![false; ncol];
        for &b in &basis {
            is_basic[b] = true;
        }

        Tableau {
            m,
            ncol,
            n_struct: n,
            t,
            x: x0,
            lower,
            upper,
            cost: vec![0.0; ncol],
            d: vec![0.0; ncol],
            basis,
            is_basic,
            scale,
            rhs,
            a_scaled: dense,
            art_sign,
            iterations: 0,
            max_iterations: 50_000 + 50 * (m + ncol),
            degenerate: 0,
            bland_after: 100 * n.max(1),
            bland: false,
        }
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
                for (dj, &tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = OPT_TOL;
        for j in 0..self.ncol {
            if self.is_basic[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -OPT_TOL && self.x[j] < self.upper[j] {
                1.0
            } else if dj > OPT_TOL && self.x[j] > self.lower[j] {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Step limit imposed by basic row `i` when the entering column moves with `alpha = dir·t[i][q]`.
    fn row_limit(&self, i: usize, alpha: f64, slack: f64) -> f64 {
        let b = self.basis[i];
        let xb = self.x[b];
        if alpha > 0.0 {
            let lo = self.lower[b];
            if lo.is_finite() {
                ((xb - lo + slack) / alpha).max(0.0)
            } else {
                f64::INFINITY
            }
        } else {
            let hi = self.upper[b];
            if hi.is_finite() {
                ((hi - xb + slack) / -alpha).max(0.0)
            } else {
                f64::INFINITY
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn run(&mut self) -> Result<PhaseEnd, MilpError> {
        let ncol = self.ncol;
        let mut alpha = vec![0.0; self.m];
        loop {
            if self.iterations >= self.max_iterations {
                return Err(MilpError::IterationLimit(self.iterations));
            }
            let Some((q, dir)) = self.price() else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;

            for (i, a) in alpha.iter_mut().enumerate() {
                *a = dir * self.t[i * ncol + q];
            }

            let flip = self.upper[q] - self.lower[q];
            let mut leave: Option<usize> = None;
            let mut step;
            if self.bland {
                step = flip;
                for i in 0..self.m {
                    if alpha[i].abs() <= PIVOT_TOL {
                        continue;
                    }
                    let lim = self.row_limit(i, alpha[i], 0.0);
                    let better = match leave {
                        _ if lim < step => true,
                        Some(r) => lim == step && self.basis[i] < self.basis[r],
                        None => false,
                    };
                    if better {
                        step = lim;
                        leave = Some(i);
                    }
                }
            } else {
                // Harris two-pass ratio test.
                let mut relaxed = f64::INFINITY;
                for i in 0..self.m {
                    if alpha[i].abs() > PIVOT_TOL {
                        relaxed = relaxed.min(self.row_limit(i, alpha[i], HARRIS_TOL));
                    }
                }
                if flip <= relaxed {
                    step = flip;
                } else {
                    let mut best_abs = 0.0;
                    step = f64::INFINITY;
                    for i in 0..self.m {
                        if alpha[i].abs() > PIVOT_TOL {
                            let lim = self.row_limit(i, alpha[i], 0.0);
                            if lim <= relaxed && alpha[i].abs() > best_abs {
                                best_abs = alpha[i].abs();
                                leave = Some(i);
                                step = lim;
                            }
                        }
                    }
                }
            }

            if !step.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }

            if step <= 1e-12 {
                self.degenerate += 1;
                if self.degenerate >= self.bland_after && !self.bland {
                    log::debug!("switching to Bland's rule after {} degenerate pivots", self.degenerate);
                    self.bland = true;
                }
            }

            if step > 0.0 {
                self.x[q] += dir * step;
                for i in 0..self.m {
                    if alpha[i] != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= alpha[i] * step;
                    }
                }
            }

            match leave {
                None => {
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    self.x[out] = if alpha[r] > 0.0 { self.lower[out] } else { self.upper[out] };
                    self.pivot(r, q);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let p = self.t[r * ncol + q];
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * ncol);
        let (pivot_row, after) = rest.split_at_mut(ncol);
        for row in before.chunks_exact_mut(ncol).chain(after.chunks_exact_mut(ncol)) {
            let f = row[q];
            if f != 0.0 {
                for (v, &pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * pr;
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, &pr) in self.d.iter_mut().zip(pivot_row.iter()) {
                *v -= f * pr;
            }
            self.d[q] = 0.0;
        }
        let out = self.basis[r];
        self.is_basic[out] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
    }

    /// Fixes artificials at zero and pivots any basic ones out where possible.
    fn retire_artificials(&mut self) {
        let first_art = self.n_struct + self.m;
        for j in first_art..self.ncol {
            self.upper[j] = 0.0;
            if !self.is_basic[j] {
                self.x[j] = 0.0;
            }
        }
        for r in 0..self.m {
            let b = self.basis[r];
            if b < first_art {
                continue;
            }
            let row = &self.t[r * self.ncol..(r + 1) * self.ncol];
            let mut best = None;
            let mut best_abs = 1e-7;
            for (j, &v) in row[..first_art].iter().enumerate() {
                if !self.is_basic[j] && v.abs() > best_abs {
                    best_abs = v.abs();
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                // Degenerate pivot: the entering variable keeps its current value.
                self.x[b] = 0.0;
                self.pivot(r, q);
            }
        }
    }

    /// One round of iterative refinement of the basic values against the scaled rows,
    /// using the slack block of the tableau as `B⁻¹`.
    fn refine(&mut self) {
        let n = self.n_struct;
        let mut resid = vec![0.0; self.m];
        for (i, r) in resid.iter_mut().enumerate() {
            let row = &self.a_scaled[i * n..(i + 1) * n];
            let lhs: f64 = row.iter().zip(&self.x[..n]).map(|(a, v)| a * v).sum::<f64>() + self.x[n + i];
            *r = self.rhs[i] - lhs;
        }
        for &(j, row, sigma) in &self.art_sign {
            resid[row] -= sigma * self.x[j];
        }
        if resid.iter().all(|r| r.abs() < 1e-15) {
            return;
        }
        for k in 0..self.m {
            let binv = &self.t[k * self.ncol + n..k * self.ncol + n + self.m];
            let delta: f64 = binv.iter().zip(&resid).map(|(b, r)| b * r).sum();
            let b = self.basis[k];
            self.x[b] += delta;
        }
    }
}
