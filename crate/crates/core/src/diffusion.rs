//! Cyber-to-physical failure diffusion.
//!
//! Cyber node `c` fails with probability `kappa[c]`; a failed node trips
//! physical component `p` with probability `r[c][p]`. Columns of the
//! interconnection matrix sum to one, so the physical failure probability
//! `pi[p] = sum_c kappa[c] * r[c][p]` stays in `[0, 1]`.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

/// Column sums must equal one to within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unknown cyber node `{0}`")]
    UnknownNode(String),
    #[error("cyber node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("probability {value} for {what} is outside [0, 1]")]
    InvalidProbability { what: String, value: f64 },
    #[error("weight rule violates column-stochasticity: column `{column}` sums to {sum}")]
    NotColumnStochastic { column: String, sum: f64 },
    #[error("invalid local map: {0}")]
    LocalMap(String),
    #[error("loss cost for component {index} is negative ({value})")]
    NegativeCost { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CyberLayer {
    pub nodes: Vec<String>,
    /// Failure probability of each node absent attack or defense.
    pub baseline: Vec<f64>,
}

impl CyberLayer {
    pub fn new(nodes: Vec<String>, baseline: Vec<f64>) -> Result<Self, DiffusionError> {
        if nodes.is_empty() {
            return Err(DiffusionError::DimensionMismatch {
                what: "cyber nodes",
                expected: 1,
                found: 0,
            });
        }
        if baseline.len() != nodes.len() {
            return Err(DiffusionError::DimensionMismatch {
                what: "baseline probabilities",
                expected: nodes.len(),
                found: baseline.len(),
            });
        }
        for (id, &p) in nodes.iter().zip(&baseline) {
            if !(0.0..=1.0).contains(&p) {
                return Err(DiffusionError::InvalidProbability {
                    what: id.clone(),
                    value: p,
                });
            }
        }
        Ok(Self { nodes, baseline })
    }

    /// Nodes `c1..cn`, all with the same baseline probability.
    pub fn uniform(n: usize, baseline: f64) -> Result<Self, DiffusionError> {
        Self::new(
            (1..=n).map(|i| format!("c{i}")).collect(),
            vec![baseline; n],
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, DiffusionError> {
        self.nodes
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| DiffusionError::UnknownNode(id.to_string()))
    }

    pub fn resolve<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, DiffusionError> {
        ids.iter().map(|id| self.index_of(id.as_ref())).collect()
    }
}

/// `N_c x N_p` weights, rows indexed by cyber node, columns by component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterconnectionMatrix {
    rows: Vec<Vec<f64>>,
    columns: Vec<String>,
}

impl InterconnectionMatrix {
    /// Validates entries in `[0, 1]` and unit column sums.
    pub fn new(rows: Vec<Vec<f64>>, columns: Vec<String>) -> Result<Self, DiffusionError> {
        let np = columns.len();
        for row in &rows {
            if row.len() != np {
                return Err(DiffusionError::DimensionMismatch {
                    what: "interconnection row",
                    expected: np,
                    found: row.len(),
                });
            }
            for &w in row {
                if !(0.0..=1.0).contains(&w) {
                    return Err(DiffusionError::InvalidProbability {
                        what: "interconnection weight".into(),
                        value: w,
                    });
                }
            }
        }
        for (p, name) in columns.iter().enumerate() {
            let sum: f64 = rows.iter().map(|r| r[p]).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(DiffusionError::NotColumnStochastic {
                    column: name.clone(),
                    sum,
                });
            }
        }
        Ok(Self { rows, columns })
    }

    pub fn n_cyber(&self) -> usize {
        self.rows.len()
    }

    pub fn n_physical(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn weight(&self, cyber: usize, physical: usize) -> f64 {
        self.rows[cyber][physical]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_physical())
            .map(|p| self.rows.iter().map(|r| r[p]).sum())
            .collect()
    }
}

/// How a component's unit of influence is spread over cyber nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WeightRule {
    /// Each local node gets `local`, each remote node `remote`; the result
    /// must already be column-stochastic.
    Fixed { local: f64, remote: f64 },
    /// Local nodes split `local_share` equally, remote nodes split the rest.
    Shared { local_share: f64 },
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::Fixed {
            local: 0.25,
            remote: 0.05,
        }
    }
}

/// Wide-area interconnection: every line is driven by two local cyber
/// nodes and, more weakly, by all the others.
pub fn build_wide_area_r(
    layer: &CyberLayer,
    lines: &[String],
    local_map: &HashMap<String, Vec<String>>,
    rule: WeightRule,
) -> Result<InterconnectionMatrix, DiffusionError> {
    let n = layer.len();
    let mut rows = vec![vec![0.0; lines.len()]; n];
    for (p, line) in lines.iter().enumerate() {
        let locals = local_map
            .get(line)
            .ok_or_else(|| DiffusionError::LocalMap(format!("line `{line}` has no local nodes")))?;
        if locals.len() != 2 {
            return Err(DiffusionError::LocalMap(format!(
                "line `{line}` needs exactly two local nodes, got {}",
                locals.len()
            )));
        }
        let idx = layer.resolve(locals)?;
        if idx[0] == idx[1] {
            return Err(DiffusionError::LocalMap(format!(
                "line `{line}` lists node `{}` twice",
                locals[0]
            )));
        }
        let remote_count = n - 2;
        let (local_w, remote_w) = match rule {
            WeightRule::Fixed { local, remote } => (local, remote),
            WeightRule::Shared { local_share } => {
                if !(0.0..=1.0).contains(&local_share) {
                    return Err(DiffusionError::InvalidProbability {
                        what: "local share".into(),
                        value: local_share,
                    });
                }
                let remote = if remote_count > 0 {
                    (1.0 - local_share) / remote_count as f64
                } else {
                    0.0
                };
                (local_share / 2.0, remote)
            }
        };
        let sum = 2.0 * local_w + remote_count as f64 * remote_w;
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(DiffusionError::NotColumnStochastic {
                column: line.clone(),
                sum,
            });
        }
        for (c, row) in rows.iter_mut().enumerate() {
            row[p] = if idx.contains(&c) { local_w } else { remote_w };
        }
    }
    InterconnectionMatrix::new(rows, lines.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureState {
    pub kappa: Vec<f64>,
    pub attacked: Vec<usize>,
    pub defended: Vec<usize>,
}

/// Defended nodes never fail; attacked, undefended nodes always fail.
pub fn apply_attack_defense(
    layer: &CyberLayer,
    attacked: &[usize],
    defended: &[usize],
) -> Result<FailureState, DiffusionError> {
    let n = layer.len();
    if let Some(&bad) = attacked.iter().chain(defended).find(|&&c| c >= n) {
        return Err(DiffusionError::NodeOutOfRange(bad));
    }
    let mut kappa = layer.baseline.clone();
    for &c in attacked {
        kappa[c] = 1.0;
    }
    for &c in defended {
        kappa[c] = 0.0;
    }
    Ok(FailureState {
        kappa,
        attacked: attacked.to_vec(),
        defended: defended.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalRisk {
    pub pi: Vec<f64>,
}

pub fn diffuse(
    state: &FailureState,
    r: &InterconnectionMatrix,
) -> Result<PhysicalRisk, DiffusionError> {
    diffuse_kappa(&state.kappa, r)
}

/// `pi = kappa R` for an arbitrary probability vector.
pub fn diffuse_kappa(
    kappa: &[f64],
    r: &InterconnectionMatrix,
) -> Result<PhysicalRisk, DiffusionError> {
    if kappa.len() != r.n_cyber() {
        return Err(DiffusionError::DimensionMismatch {
            what: "failure vector",
            expected: r.n_cyber(),
            found: kappa.len(),
        });
    }
    let mut pi = vec![0.0; r.n_physical()];
    for (k, row) in kappa.iter().zip(r.rows()) {
        for (p, w) in pi.iter_mut().zip(row) {
            *p += k * w;
        }
    }
    Ok(PhysicalRisk { pi })
}

/// `E_f = pi . f`.
pub fn expected_loss(risk: &PhysicalRisk, costs: &[f64]) -> Result<f64, DiffusionError> {
    if costs.len() != risk.pi.len() {
        return Err(DiffusionError::DimensionMismatch {
            what: "cost vector",
            expected: risk.pi.len(),
            found: costs.len(),
        });
    }
    if let Some((index, &value)) = costs.iter().enumerate().find(|(_, &f)| f < 0.0) {
        return Err(DiffusionError::NegativeCost { index, value });
    }
    Ok(risk.pi.iter().zip(costs).map(|(p, f)| p * f).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local_map(pairs: &[(&str, [&str; 2])]) -> HashMap<String, Vec<String>> {
        pairs
            .iter()
            .map(|(l, n)| (l.to_string(), n.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn generalized_rule_on_four_nodes() {
        let layer = CyberLayer::uniform(4, 0.0).unwrap();
        let map = local_map(&[("p", ["c1", "c2"])]);
        let r = build_wide_area_r(
            &layer,
            &["p".to_string()],
            &map,
            WeightRule::Shared { local_share: 0.5 },
        )
        .unwrap();
        for c in 0..4 {
            assert_eq!(r.weight(c, 0), 0.25);
        }
    }

    #[test]
    fn fixed_rule_that_breaks_stochasticity() {
        // 2 * 0.25 + 8 * 0.05 = 0.9 on ten nodes
        let layer = CyberLayer::uniform(10, 0.0).unwrap();
        let map = local_map(&[("p", ["c1", "c2"])]);
        let err = build_wide_area_r(&layer, &["p".to_string()], &map, WeightRule::default());
        assert!(matches!(
            err,
            Err(DiffusionError::NotColumnStochastic { .. })
        ));
    }

    #[test]
    fn local_map_errors() {
        let layer = CyberLayer::uniform(12, 0.0).unwrap();
        let lines = vec!["p".to_string()];
        let unknown = local_map(&[("p", ["c1", "c99"])]);
        assert_eq!(
            build_wide_area_r(&layer, &lines, &unknown, WeightRule::default()),
            Err(DiffusionError::UnknownNode("c99".into()))
        );
        let dup = local_map(&[("p", ["c1", "c1"])]);
        assert!(matches!(
            build_wide_area_r(&layer, &lines, &dup, WeightRule::default()),
            Err(DiffusionError::LocalMap(_))
        ));
        let missing = HashMap::new();
        assert!(matches!(
            build_wide_area_r(&layer, &lines, &missing, WeightRule::default()),
            Err(DiffusionError::LocalMap(_))
        ));
    }

    #[test]
    fn verbatim_matrix_must_be_stochastic() {
        let bad = InterconnectionMatrix::new(vec![vec![0.5], vec![0.4]], vec!["p".into()]);
        assert!(matches!(
            bad,
            Err(DiffusionError::NotColumnStochastic { .. })
        ));
        let ok = InterconnectionMatrix::new(vec![vec![0.5], vec![0.5]], vec!["p".into()]);
        assert!(ok.is_ok());
    }

    #[test]
    fn defense_beats_attack() {
        let layer = CyberLayer::uniform(12, 1.0 / 12.0).unwrap();
        let s = apply_attack_defense(&layer, &[0], &[0]).unwrap();
        assert_eq!(s.kappa[0], 0.0);
    }

    #[test]
    fn nothing_happens_at_zero_baseline() {
        let layer = CyberLayer::uniform(12, 0.0).unwrap();
        let s = apply_attack_defense(&layer, &[], &[]).unwrap();
        assert!(s.kappa.iter().all(|&k| k == 0.0));
    }

    #[test]
    fn mixed_attack_and_defense_vector() {
        let base = 1.0 / 12.0;
        let layer = CyberLayer::uniform(12, base).unwrap();
        // attack c3, c4; defend c1, c5
        let s = apply_attack_defense(&layer, &[2, 3], &[0, 4]).unwrap();
        let mut expect = vec![base; 12];
        expect[0] = 0.0;
        expect[2] = 1.0;
        expect[3] = 1.0;
        expect[4] = 0.0;
        assert_eq!(s.kappa, expect);
    }

    #[test]
    fn out_of_range_node_rejected() {
        let layer = CyberLayer::uniform(3, 0.0).unwrap();
        assert_eq!(
            apply_attack_defense(&layer, &[3], &[]),
            Err(DiffusionError::NodeOutOfRange(3))
        );
        assert_eq!(
            layer.resolve(&["c4"]),
            Err(DiffusionError::UnknownNode("c4".into()))
        );
    }

    #[test]
    fn diffusion_edge_cases() {
        let layer = CyberLayer::uniform(4, 0.0).unwrap();
        let map = local_map(&[("a", ["c1", "c2"]), ("b", ["c3", "c4"])]);
        let r = build_wide_area_r(
            &layer,
            &["a".to_string(), "b".to_string()],
            &map,
            WeightRule::Shared { local_share: 0.8 },
        )
        .unwrap();
        let zero = diffuse_kappa(&[0.0; 4], &r).unwrap();
        assert_eq!(zero.pi, vec![0.0, 0.0]);
        assert_eq!(expected_loss(&zero, &[5.0, 7.0]).unwrap(), 0.0);
        let unit = diffuse_kappa(&[0.0, 0.0, 1.0, 0.0], &r).unwrap();
        assert_eq!(unit.pi, r.rows()[2]);
        assert!(matches!(
            diffuse_kappa(&[0.0; 3], &r),
            Err(DiffusionError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            expected_loss(&unit, &[1.0]),
            Err(DiffusionError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            expected_loss(&unit, &[1.0, -1.0]),
            Err(DiffusionError::NegativeCost { .. })
        ));
    }

    #[test]
    fn bad_baseline_rejected() {
        assert!(CyberLayer::uniform(3, 1.5).is_err());
        assert!(CyberLayer::new(vec![], vec![]).is_err());
    }
}
