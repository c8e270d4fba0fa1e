//! Independent oracles shared by the integration tests. Nothing in here
//! calls into the simplex solver.
#![allow(dead_code)]

use gridsec::lp::{LinearProgram, Relation};
use rand::rngs::StdRng;
use rand::Rng;

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for c in &lp.constraints {
        let scale = c.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let r = (lhs - c.rhs) / scale;
        worst = worst.max(match c.relation {
            Relation::Le => r,
            Relation::Ge => -r,
            Relation::Eq => r.abs(),
        });
    }
    for (&(lo, hi), &v) in lp.bounds.iter().zip(x) {
        worst = worst.max(lo - v).max(v - hi);
    }
    worst
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Minimum objective over all basic feasible solutions, found by solving
/// every square subsystem of active hyperplanes. Requires a bounded
/// feasible region with at least one vertex. `None` means no feasible
/// vertex exists.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.objective.len();
    let mut eq: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut ineq: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        match c.relation {
            Relation::Eq => eq.push((c.coeffs.clone(), c.rhs)),
            _ => ineq.push((c.coeffs.clone(), c.rhs)),
        }
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lo.is_finite() {
            ineq.push((e.clone(), lo));
        }
        if hi.is_finite() && hi != lo {
            ineq.push((e, hi));
        }
    }
    if eq.len() > n {
        // keep the system square by using independent equality rows only
        return vertex_enumeration_overdetermined(lp, &eq, &ineq);
    }
    let need = n - eq.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for combo in combinations(ineq.len(), need) {
        let mut a: Vec<Vec<f64>> = eq.iter().map(|r| r.0.clone()).collect();
        let mut b: Vec<f64> = eq.iter().map(|r| r.1).collect();
        for &k in &combo {
            a.push(ineq[k].0.clone());
            b.push(ineq[k].1);
        }
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        if violation(lp, &x) > 1e-8 {
            continue;
        }
        let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best
}

fn vertex_enumeration_overdetermined(
    lp: &LinearProgram,
    eq: &[(Vec<f64>, f64)],
    ineq: &[(Vec<f64>, f64)],
) -> Option<(f64, Vec<f64>)> {
    let n = lp.objective.len();
    let all: Vec<&(Vec<f64>, f64)> = eq.iter().chain(ineq.iter()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for combo in combinations(all.len(), n) {
        let a = combo.iter().map(|&k| all[k].0.clone()).collect();
        let b = combo.iter().map(|&k| all[k].1).collect();
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        if violation(lp, &x) > 1e-8 {
            continue;
        }
        let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best
}

/// The case-study wiring: each line is watched by two local cyber nodes.
pub const LOCAL_MAP: [(&str, [usize; 2]); 6] = [
    ("p1", [0, 4]),
    ("p2", [1, 9]),
    ("p3", [2, 3]),
    ("p4", [5, 6]),
    ("p5", [7, 8]),
    ("p6", [10, 11]),
];

pub fn line_ids() -> Vec<String> {
    LOCAL_MAP.iter().map(|(l, _)| l.to_string()).collect()
}

pub fn local_map() -> std::collections::HashMap<String, Vec<String>> {
    LOCAL_MAP
        .iter()
        .map(|(l, n)| {
            (
                l.to_string(),
                n.iter().map(|c| format!("c{}", c + 1)).collect(),
            )
        })
        .collect()
}

/// `r[c][p]` written straight from the 0.25 / 0.05 rule.
pub fn r_by_hand() -> Vec<Vec<f64>> {
    let mut r = vec![vec![0.05; 6]; 12];
    for (p, (_, nodes)) in LOCAL_MAP.iter().enumerate() {
        for &c in nodes {
            r[c][p] = 0.25;
        }
    }
    r
}

/// Expected loss by a scalar double loop, no library code involved.
pub fn loss_by_hand(
    base: f64,
    attacked: &[usize],
    defended: &[usize],
    r: &[Vec<f64>],
    f: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (p, fp) in f.iter().enumerate() {
        let mut pi = 0.0;
        for (c, row) in r.iter().enumerate() {
            let kappa = if defended.contains(&c) {
                0.0
            } else if attacked.contains(&c) {
                1.0
            } else {
                base
            };
            pi += row[p] * kappa;
        }
        total += pi * fp;
    }
    total
}

/// Random LP over the box [0, 10]^n with a known interior point, so it is
/// feasible and bounded.
pub fn random_lp(rng: &mut StdRng, n: usize, m: usize) -> LinearProgram {
    let mut lp = LinearProgram::new((0..n).map(|_| rng.gen_range(-5.0..5.0)).collect());
    for j in 0..n {
        lp.set_bounds(j, 0.0, 10.0);
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..9.0)).collect();
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let ax0: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
        match rng.gen_range(0..5) {
            0 => lp.add_constraint(a, Relation::Eq, ax0),
            1 | 2 => {
                let slack = rng.gen_range(0.0..5.0);
                lp.add_constraint(a, Relation::Le, ax0 + slack)
            }
            _ => {
                let slack = rng.gen_range(0.0..5.0);
                lp.add_constraint(a, Relation::Ge, ax0 - slack)
            }
        }
    }
    lp
}
