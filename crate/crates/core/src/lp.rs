//! Dense bounded-variable primal simplex.
//!
//! Problems here are tiny (the 5-bus OPF has ten columns, the 6x6 game
//! seven), so the solver keeps a full Gauss-Jordan tableau and recomputes
//! reduced costs from scratch every iteration. Pricing is Dantzig's rule
//! until an iteration budget is spent, then Bland's rule, which cannot
//! cycle. A hard cap past that turns into [`LpError::SolverFailure`].
//!
//! Variable bounds are handled by the upper-bounding technique: every
//! internal column lives in `[0, u]` with `u` possibly infinite, and a
//! nonbasic column sits at either end. Callers' bounds are mapped onto that
//! form by shifting (finite lower bound), reflecting (finite upper bound
//! only) or splitting (free variable).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Primal feasibility tolerance on normalized rows.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost tolerance for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c·x` subject to linear rows and per-variable bounds.
///
/// Bounds default to `[0, +inf)`; use `f64::NEG_INFINITY` / `f64::INFINITY`
/// for open ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "bounds".into(),
                expected: n,
                found: self.bounds.len(),
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    what: format!("constraint {i}"),
                    expected: n,
                    found: row.coeffs.len(),
                });
            }
            if row.coeffs.iter().any(|a| !a.is_finite()) || !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("constraint {i}")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidBounds {
                    var: j,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    /// Optimal objective, `+inf` when infeasible and `-inf` when unbounded.
    pub objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("variable {var} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("simplex did not terminate within {iterations} iterations")]
    SolverFailure { iterations: usize },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// How an original variable maps onto internal columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = shift + col
    Shifted { col: usize, shift: f64 },
    /// x = upper - col
    Reflected { col: usize, upper: f64 },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NonBasic {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    /// m x ncols, B^-1 A
    rows: Vec<Vec<f64>>,
    /// current values of the basic variables
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<NonBasic>,
    upper: Vec<f64>,
    /// columns that may never enter (artificials in phase 2)
    frozen: Vec<bool>,
    iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();

    // Map original variables onto nonnegative internal columns.
    let mut maps = Vec::with_capacity(n);
    let mut col_upper: Vec<f64> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: col_upper.len(),
                shift: lo,
            });
            col_upper.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(VarMap::Reflected {
                col: col_upper.len(),
                upper: hi,
            });
            col_upper.push(f64::INFINITY);
        } else {
            let pos = col_upper.len();
            maps.push(VarMap::Split { pos, neg: pos + 1 });
            col_upper.push(f64::INFINITY);
            col_upper.push(f64::INFINITY);
        }
    }
    let n_struct = col_upper.len();

    let map_row = |coeffs: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; n_struct];
        let mut offset = 0.0;
        for (j, m) in maps.iter().enumerate() {
            let a = coeffs[j];
            match *m {
                VarMap::Shifted { col, shift } => {
                    out[col] = a;
                    offset += a * shift;
                }
                VarMap::Reflected { col, upper } => {
                    out[col] = -a;
                    offset += a * upper;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] = a;
                    out[neg] = -a;
                }
            }
        }
        (out, offset)
    };

    let (cost_struct, _) = map_row(&lp.objective);

    let m = lp.constraints.len();
    let n_slack = lp
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let n_cols = n_struct + n_slack + m;
    let art0 = n_struct + n_slack;

    let mut rows = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut slack_idx = n_struct;
    for (i, c) in lp.constraints.iter().enumerate() {
        let (mapped, offset) = map_row(&c.coeffs);
        let scale = c.coeffs.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut row = vec![0.0; n_cols];
        for (dst, src) in row.iter_mut().zip(&mapped) {
            *dst = src / scale;
        }
        let mut rhs = (c.rhs - offset) / scale;
        match c.relation {
            Relation::Le => {
                row[slack_idx] = 1.0;
                slack_idx += 1;
            }
            Relation::Ge => {
                row[slack_idx] = -1.0;
                slack_idx += 1;
            }
            Relation::Eq => {}
        }
        if rhs < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
        }
        row[art0 + i] = 1.0;
        rows.push(row);
        beta.push(rhs);
    }

    let mut upper = col_upper;
    upper.extend(std::iter::repeat(f64::INFINITY).take(n_slack + m));
    let mut state = vec![NonBasic::AtLower; n_cols];
    let basis: Vec<usize> = (0..m).map(|i| art0 + i).collect();
    for &b in &basis {
        state[b] = NonBasic::Basic;
    }

    let mut tab = Tableau {
        rows,
        beta,
        basis,
        state,
        upper,
        frozen: vec![false; n_cols],
        iterations: 0,
    };
    let budget = 10 * (m + n_cols) + 50;
    let cap = budget + 200 * (m + n_cols) + 1000;

    // Phase 1: minimize the sum of artificials.
    let mut phase1_cost = vec![0.0; n_cols];
    for c in phase1_cost.iter_mut().skip(art0) {
        *c = 1.0;
    }
    tab.run(&phase1_cost, budget, cap)?;
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.beta)
        .filter(|(b, _)| **b >= art0)
        .map(|(_, v)| *v)
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
        });
    }

    // Phase 2: artificials pinned at zero.
    for j in art0..n_cols {
        tab.upper[j] = 0.0;
        tab.frozen[j] = true;
        if tab.state[j] == NonBasic::AtUpper {
            tab.state[j] = NonBasic::AtLower;
        }
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        if b >= art0 {
            tab.beta[i] = tab.beta[i].max(0.0);
        }
    }
    let mut phase2_cost = vec![0.0; n_cols];
    phase2_cost[..n_struct].copy_from_slice(&cost_struct);
    match tab.run(&phase2_cost, budget, cap)? {
        PhaseOutcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NEG_INFINITY,
            })
        }
        PhaseOutcome::Optimal => {}
    }

    let col_values = tab.column_values();
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shifted { col, shift } => shift + col_values[col],
            VarMap::Reflected { col, upper } => upper - col_values[col],
            VarMap::Split { pos, neg } => col_values[pos] - col_values[neg],
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    check_feasible(lp, &x)?;

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

/// Largest normalized violation of `x` over rows and bounds.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for c in &lp.constraints {
        let scale = c.coeffs.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let r = (lhs - c.rhs) / scale;
        let v = match c.relation {
            Relation::Le => r.max(0.0),
            Relation::Ge => (-r).max(0.0),
            Relation::Eq => r.abs(),
        };
        worst = worst.max(v);
    }
    for (&(lo, hi), &v) in lp.bounds.iter().zip(x) {
        worst = worst.max(lo - v).max(v - hi);
    }
    worst
}

fn check_feasible(lp: &LinearProgram, x: &[f64]) -> Result<(), LpError> {
    let v = max_violation(lp, x);
    if v > FEASIBILITY_TOL {
        return Err(LpError::NumericalBreakdown(format!(
            "returned point violates a constraint by {v:e}"
        )));
    }
    Ok(())
}

impl Tableau {
    fn column_values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .state
            .iter()
            .zip(&self.upper)
            .map(|(s, u)| match s {
                NonBasic::AtUpper => *u,
                _ => 0.0,
            })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            vals[b] = self.beta[i];
        }
        vals
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn run(&mut self, cost: &[f64], budget: usize, cap: usize) -> Result<PhaseOutcome, LpError> {
        loop {
            if self.iterations >= cap {
                return Err(LpError::SolverFailure {
                    iterations: self.iterations,
                });
            }
            let bland = self.iterations >= budget;
            let d = self.reduced_costs(cost);

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            for (j, &dj) in d.iter().enumerate() {
                if self.frozen[j] || self.upper[j] <= 0.0 {
                    continue;
                }
                let dir = match self.state[j] {
                    NonBasic::Basic => continue,
                    NonBasic::AtLower if dj < -OPTIMALITY_TOL => 1.0,
                    NonBasic::AtUpper if dj > OPTIMALITY_TOL => -1.0,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                match entering {
                    Some((k, _)) if d[k].abs() >= dj.abs() => {}
                    _ => entering = Some((j, dir)),
                }
            }
            let Some((j, dir)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            // Ratio test.
            let mut best = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper)
            for (i, row) in self.rows.iter().enumerate() {
                let alpha = row[j] * dir;
                let b = self.basis[i];
                let (ratio, at_upper) = if alpha > PIVOT_TOL {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let replace = match leave {
                    None => true,
                    Some(_) if ratio < best - 1e-12 => true,
                    Some((r, _)) if ratio <= best + 1e-12 => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            alpha.abs() > self.rows[r][j].abs()
                        }
                    }
                    Some(_) => false,
                };
                if replace {
                    best = if leave.is_none() {
                        ratio
                    } else {
                        best.min(ratio)
                    };
                    leave = Some((i, at_upper));
                }
            }
            let mut step = best;
            if self.upper[j] <= best {
                step = self.upper[j];
                leave = None;
            }
            if step.is_infinite() {
                return Ok(PhaseOutcome::Unbounded);
            }

            self.iterations += 1;
            for (bi, row) in self.beta.iter_mut().zip(&self.rows) {
                *bi -= dir * step * row[j];
            }
            match leave {
                None => {
                    // Bound flip.
                    self.state[j] = if dir > 0.0 {
                        NonBasic::AtUpper
                    } else {
                        NonBasic::AtLower
                    };
                }
                Some((r, at_upper)) => {
                    let start = if self.state[j] == NonBasic::AtUpper {
                        self.upper[j]
                    } else {
                        0.0
                    };
                    let leaving = self.basis[r];
                    self.state[leaving] = if at_upper {
                        NonBasic::AtUpper
                    } else {
                        NonBasic::AtLower
                    };
                    self.pivot(r, j);
                    self.beta[r] = start + dir * step;
                    self.basis[r] = j;
                    self.state[j] = NonBasic::Basic;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[j] = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} != {b}");
    }

    #[test]
    fn bound_tight_minimum() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_constraint(vec![1.0], Relation::Ge, 3.0);
        lp.add_constraint(vec![1.0], Relation::Le, 10.0);
        let s = solve_lp(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_close(s.x[0], 3.0);
        assert_close(s.objective, 3.0);
    }

    #[test]
    fn single_active_constraint() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 2.0);
        let s = solve_lp(&lp).unwrap();
        assert!(s.is_optimal());
        assert_close(s.objective, 2.0);
    }

    #[test]
    fn infeasible_reported() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 5.0);
        lp.add_constraint(vec![1.0], Relation::Le, 4.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_reported() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_reflected_variables() {
        // min -x - y, x <= 2 (no lower), y free, x + y <= 5, y - x <= 1
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 2.0);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 5.0);
        lp.add_constraint(vec![-1.0, 1.0], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_close(s.objective, -5.0);
        assert!(s.x[0] <= 2.0 + 1e-9);
    }

    #[test]
    fn equality_with_redundant_row() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 4.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 8.0);
        let s = solve_lp(&lp).unwrap();
        assert_close(s.objective, 4.0);
        assert_close(s.x[0], 4.0);
    }

    #[test]
    fn upper_bounds_flip() {
        // max x + y with box [0,1]^2 and no rows: pure bound flips.
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.set_bounds(0, 0.0, 1.0);
        lp.set_bounds(1, 0.0, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_close(s.objective, -2.0);
    }

    #[test]
    fn fixed_variable() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.set_bounds(0, 2.5, 2.5);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert_close(s.x[0], 2.5);
        assert_close(s.objective, 3.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(
            solve_lp(&lp),
            Err(LpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::InvalidBounds { .. })));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling LP under Dantzig pricing.
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve_lp(&lp).unwrap();
        assert_close(s.objective, -0.05);
    }
}
