//! Finite zero-sum defender/attacker game.
//!
//! Rows of a [`PayoffMatrix`] are defender strategies and columns attacker
//! strategies. Entries are the attacker's payoff (the expected loss it
//! inflicts); the defender receives the negation.

use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::diffusion::{
    apply_attack_defense, diffuse, expected_loss, CyberLayer, DiffusionError, InterconnectionMatrix,
};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};

/// Mixed strategies must sum to one within this.
pub const MIX_TOL: f64 = 1e-9;
/// Largest allowed gain from a pure deviation, on a matrix scaled to unit
/// max-entry.
pub const CERTIFICATE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid strategy set: {0}")]
    InvalidStrategySet(String),
    #[error("invalid mixed strategy: {0}")]
    InvalidMix(String),
    #[error("payoff matrix has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("payoff matrix is empty")]
    Empty,
    #[error("equilibrium LP ended {0:?}")]
    LpStatus(LpStatus),
    #[error("equilibrium certificate failed: deviation gain {0:e}")]
    Certificate(f64),
    #[error("payoff CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strategy {
    /// Cyber node indices compromised (attacker) or secured (defender).
    pub nodes: Vec<usize>,
    /// Physical component this strategy targets, if any.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySet {
    strategies: Vec<Strategy>,
}

impl StrategySet {
    /// Strategies must be distinct node sets of a common size, every node
    /// below `n_cyber`.
    pub fn new(strategies: Vec<Strategy>, n_cyber: usize) -> Result<Self, GameError> {
        let Some(first) = strategies.first() else {
            return Err(GameError::InvalidStrategySet("no strategies".into()));
        };
        let size = first.nodes.len();
        let mut seen: Vec<Vec<usize>> = Vec::new();
        for (i, s) in strategies.iter().enumerate() {
            if s.nodes.len() != size {
                return Err(GameError::InvalidStrategySet(format!(
                    "strategy {i} has {} nodes, expected {size}",
                    s.nodes.len()
                )));
            }
            if let Some(&bad) = s.nodes.iter().find(|&&c| c >= n_cyber) {
                return Err(GameError::InvalidStrategySet(format!(
                    "strategy {i} references node index {bad}"
                )));
            }
            let mut key = s.nodes.clone();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(GameError::InvalidStrategySet(format!(
                    "strategy {i} repeats a node"
                )));
            }
            if seen.contains(&key) {
                return Err(GameError::InvalidStrategySet(format!(
                    "strategy {i} duplicates an earlier one"
                )));
            }
            seen.push(key);
        }
        Ok(Self { strategies })
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    /// Per-strategy label, falling back to `s<i>`.
    pub fn labels(&self) -> Vec<String> {
        self.strategies
            .iter()
            .enumerate()
            .map(|(i, s)| s.label.clone().unwrap_or_else(|| format!("s{}", i + 1)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffMatrix {
    attacker: Vec<Vec<f64>>,
    defender_labels: Vec<String>,
    attacker_labels: Vec<String>,
}

impl PayoffMatrix {
    /// `attacker[i][j]`: attacker payoff when the defender plays row `i`
    /// and the attacker column `j`.
    pub fn new(
        attacker: Vec<Vec<f64>>,
        defender_labels: Vec<String>,
        attacker_labels: Vec<String>,
    ) -> Result<Self, GameError> {
        if attacker.is_empty() || attacker[0].is_empty() {
            return Err(GameError::Empty);
        }
        if defender_labels.len() != attacker.len() {
            return Err(GameError::DimensionMismatch {
                what: "defender labels",
                expected: attacker.len(),
                found: defender_labels.len(),
            });
        }
        let cols = attacker_labels.len();
        for (i, row) in attacker.iter().enumerate() {
            if row.len() != cols {
                return Err(GameError::DimensionMismatch {
                    what: "payoff row",
                    expected: cols,
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(GameError::NonFinite(i, j));
            }
        }
        Ok(Self {
            attacker,
            defender_labels,
            attacker_labels,
        })
    }

    /// Matrix with generated labels `d1..`, `a1..`.
    pub fn from_rows(attacker: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let r = attacker.len();
        let c = attacker.first().map_or(0, Vec::len);
        Self::new(
            attacker,
            (1..=r).map(|i| format!("d{i}")).collect(),
            (1..=c).map(|j| format!("a{j}")).collect(),
        )
    }

    pub fn n_defender(&self) -> usize {
        self.attacker.len()
    }

    pub fn n_attacker(&self) -> usize {
        self.attacker_labels.len()
    }

    pub fn attacker_payoff(&self, d: usize, a: usize) -> f64 {
        self.attacker[d][a]
    }

    pub fn defender_payoff(&self, d: usize, a: usize) -> f64 {
        -self.attacker[d][a]
    }

    pub fn attacker_rows(&self) -> &[Vec<f64>] {
        &self.attacker
    }

    pub fn defender_labels(&self) -> &[String] {
        &self.defender_labels
    }

    pub fn attacker_labels(&self) -> &[String] {
        &self.attacker_labels
    }

    pub fn max_abs(&self) -> f64 {
        self.attacker
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            attacker: self
                .attacker
                .iter()
                .map(|r| r.iter().map(|&v| f(v)).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// CSV with a header row of attacker labels and a leading column of
    /// defender labels; values are attacker payoffs in shortest round-trip
    /// form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GameError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| GameError::Csv(e.to_string());
        let mut header = vec!["defender\\attacker".to_string()];
        header.extend(self.attacker_labels.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (label, row) in self.defender_labels.iter().zip(&self.attacker) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| GameError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads what [`write_csv`](Self::write_csv) writes. Lines starting
    /// with `#` are ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, GameError> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(input);
        let csv_err = |e: csv::Error| GameError::Csv(e.to_string());
        let header = r.headers().map_err(csv_err)?.clone();
        if header.len() < 2 {
            return Err(GameError::Csv(
                "header needs at least one attacker label".into(),
            ));
        }
        let attacker_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut defender_labels = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            defender_labels.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| GameError::Csv(format!("`{v}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::new(rows, defender_labels, attacker_labels)
    }
}

/// Expected loss for every (defense, attack) pair.
pub fn build_payoff_matrix(
    layer: &CyberLayer,
    r: &InterconnectionMatrix,
    costs: &[f64],
    defender: &StrategySet,
    attacker: &StrategySet,
) -> Result<PayoffMatrix, GameError> {
    let mut rows = Vec::with_capacity(defender.len());
    for d in defender.strategies() {
        let mut row = Vec::with_capacity(attacker.len());
        for a in attacker.strategies() {
            let state = apply_attack_defense(layer, &a.nodes, &d.nodes)?;
            let risk = diffuse(&state, r)?;
            row.push(expected_loss(&risk, costs)?);
        }
        rows.push(row);
    }
    PayoffMatrix::new(rows, defender.labels(), attacker.labels())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::InvalidMix("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(GameError::InvalidMix(format!(
                "entry {p} is not a probability"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MIX_TOL {
            return Err(GameError::InvalidMix(format!("sums to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn pure(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    /// Uniform over `support`.
    pub fn uniform_over(n: usize, support: &[usize]) -> Self {
        let mut v = vec![0.0; n];
        for &i in support {
            v[i] = 1.0 / support.len() as f64;
        }
        Self(v)
    }

    /// Convex combination `sum_k w[k] * mixes[k]`.
    pub fn combine(weights: &[f64], mixes: &[&MixedStrategy]) -> Result<Self, GameError> {
        let n = mixes.first().map_or(0, |m| m.len());
        if weights.len() != mixes.len() {
            return Err(GameError::DimensionMismatch {
                what: "mixture weights",
                expected: mixes.len(),
                found: weights.len(),
            });
        }
        let mut out = vec![0.0; n];
        for (w, m) in weights.iter().zip(mixes) {
            if m.len() != n {
                return Err(GameError::DimensionMismatch {
                    what: "mixture component",
                    expected: n,
                    found: m.len(),
                });
            }
            for (o, p) in out.iter_mut().zip(m.probs()) {
                *o += w * p;
            }
        }
        Self::new(out)
    }

    /// Clamps round-off negatives and renormalizes.
    fn from_lp(raw: &[f64]) -> Self {
        let clipped: Vec<f64> = raw.iter().map(|p| p.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        Self(clipped.into_iter().map(|p| p / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `(defender value, attacker value)` under independent mixing.
pub fn expected_utility(
    m: &PayoffMatrix,
    defender: &MixedStrategy,
    attacker: &MixedStrategy,
) -> Result<(f64, f64), GameError> {
    check_dims(m, Some(defender), Some(attacker))?;
    let mut ua = 0.0;
    for (row, pd) in m.attacker.iter().zip(defender.probs()) {
        let inner: f64 = row.iter().zip(attacker.probs()).map(|(u, pa)| u * pa).sum();
        ua += pd * inner;
    }
    Ok((-ua, ua))
}

fn check_dims(
    m: &PayoffMatrix,
    defender: Option<&MixedStrategy>,
    attacker: Option<&MixedStrategy>,
) -> Result<(), GameError> {
    if let Some(d) = defender {
        if d.len() != m.n_defender() {
            return Err(GameError::DimensionMismatch {
                what: "defender mix",
                expected: m.n_defender(),
                found: d.len(),
            });
        }
    }
    if let Some(a) = attacker {
        if a.len() != m.n_attacker() {
            return Err(GameError::DimensionMismatch {
                what: "attacker mix",
                expected: m.n_attacker(),
                found: a.len(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Player {
    Defender,
    Attacker,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    /// Lowest-index maximizer.
    pub index: usize,
    /// The player's own expected utility.
    pub value: f64,
    /// Every pure strategy attaining the maximum; longer than one on a tie.
    pub tied: Vec<usize>,
}

impl BestResponse {
    pub fn is_tie(&self) -> bool {
        self.tied.len() > 1
    }
}

/// Relative tolerance for declaring two utilities tied.
const TIE_TOL: f64 = 1e-12;

pub(crate) fn argmax_with_ties(values: &[f64]) -> (usize, Vec<usize>) {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * best.abs().max(1.0);
    let tied: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= best - tol)
        .map(|(i, _)| i)
        .collect();
    (tied[0], tied)
}

/// Pure best response to a fixed opponent mix. A pure maximizer attains the
/// best value over all mixtures in a finite game, so only pure strategies
/// are scanned.
pub fn best_response(
    m: &PayoffMatrix,
    player: Player,
    opponent: &MixedStrategy,
) -> Result<BestResponse, GameError> {
    let values = match player {
        Player::Defender => {
            check_dims(m, None, Some(opponent))?;
            defender_values(m, opponent)
        }
        Player::Attacker => {
            check_dims(m, Some(opponent), None)?;
            attacker_values(m, opponent)
        }
    };
    let (index, tied) = argmax_with_ties(&values);
    Ok(BestResponse {
        index,
        value: values[index],
        tied,
    })
}

/// Defender utility of each pure defense against an attacker mix.
pub fn defender_values(m: &PayoffMatrix, attacker: &MixedStrategy) -> Vec<f64> {
    m.attacker
        .iter()
        .map(|row| {
            -row.iter()
                .zip(attacker.probs())
                .map(|(u, p)| u * p)
                .sum::<f64>()
        })
        .collect()
}

/// Attacker utility of each pure attack against a defender mix.
pub fn attacker_values(m: &PayoffMatrix, defender: &MixedStrategy) -> Vec<f64> {
    (0..m.n_attacker())
        .map(|j| {
            m.attacker
                .iter()
                .zip(defender.probs())
                .map(|(row, p)| row[j] * p)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub defender: MixedStrategy,
    pub attacker: MixedStrategy,
    /// Defender's expected utility at the equilibrium.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// Best pure-deviation gain for the defender, normalized.
    pub defender_gain: f64,
    /// Best pure-deviation gain for the attacker, normalized.
    pub attacker_gain: f64,
    /// Defender's guaranteed value (max-min), normalized.
    pub maxmin: f64,
    /// Attacker's guaranteed concession (min-max), normalized, defender
    /// perspective.
    pub minmax: f64,
}

impl Certificate {
    pub fn worst_gain(&self) -> f64 {
        self.defender_gain.max(self.attacker_gain)
    }

    pub fn gap(&self) -> f64 {
        (self.maxmin - self.minmax).abs()
    }
}

/// Equilibrium via the two maximin LPs, post-checked against pure
/// deviations.
pub fn solve_zero_sum_ne(m: &PayoffMatrix) -> Result<Equilibrium, GameError> {
    let scale = match m.max_abs() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let a: Vec<Vec<f64>> = m
        .attacker
        .iter()
        .map(|r| r.iter().map(|v| v / scale).collect())
        .collect();
    let (nd, na) = (m.n_defender(), m.n_attacker());

    // Defender: minimize z subject to every attack earning at most z.
    let mut obj = vec![0.0; nd + 1];
    obj[nd] = 1.0;
    let mut lp = LinearProgram::new(obj);
    lp.set_bounds(nd, f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..na {
        let mut row: Vec<f64> = a.iter().map(|r| r[j]).collect();
        row.push(-1.0);
        lp.add_constraint(row, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; nd];
    simplex.push(0.0);
    lp.add_constraint(simplex, Relation::Eq, 1.0);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(GameError::LpStatus(sol.status));
    }
    let defender = MixedStrategy::from_lp(&sol.x[..nd]);

    // Attacker: maximize w subject to every defense conceding at least w.
    let mut obj = vec![0.0; na + 1];
    obj[na] = -1.0;
    let mut lp = LinearProgram::new(obj);
    lp.set_bounds(na, f64::NEG_INFINITY, f64::INFINITY);
    for row in &a {
        let mut r: Vec<f64> = row.iter().map(|v| -v).collect();
        r.push(1.0);
        lp.add_constraint(r, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; na];
    simplex.push(0.0);
    lp.add_constraint(simplex, Relation::Eq, 1.0);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(GameError::LpStatus(sol.status));
    }
    let attacker = MixedStrategy::from_lp(&sol.x[..na]);

    let (value, _) = expected_utility(m, &defender, &attacker)?;
    let eq = Equilibrium {
        defender,
        attacker,
        value,
    };
    let cert = certificate(m, &eq)?;
    if cert.worst_gain() > CERTIFICATE_TOL || cert.gap() > CERTIFICATE_TOL {
        return Err(GameError::Certificate(cert.worst_gain().max(cert.gap())));
    }
    Ok(eq)
}

/// No-profitable-deviation and value-sandwich residuals for a candidate
/// equilibrium, on the matrix scaled to unit max-entry.
pub fn certificate(m: &PayoffMatrix, eq: &Equilibrium) -> Result<Certificate, GameError> {
    check_dims(m, Some(&eq.defender), Some(&eq.attacker))?;
    let scale = match m.max_abs() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let (ud, ua) = expected_utility(m, &eq.defender, &eq.attacker)?;
    let dvals = defender_values(m, &eq.attacker);
    let avals = attacker_values(m, &eq.defender);
    let best_d = dvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_a = avals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // defender guarantees -max_j avals; attacker guarantees min_i of -dvals
    let maxmin = -best_a;
    let minmax = best_d;
    Ok(Certificate {
        defender_gain: ((best_d - ud) / scale).max(0.0),
        attacker_gain: ((best_a - ua) / scale).max(0.0),
        maxmin: maxmin / scale,
        minmax: minmax / scale,
    })
}
