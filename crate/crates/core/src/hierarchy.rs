//! Bounded-rationality attackers: level distributions, the three attacker
//! types, the defender's best reply to a type mixture, and the sweep over
//! the level ratio `tau`.

use serde::Serialize;
use thiserror::Error;

use crate::game::{
    argmax_with_ties, defender_values, solve_zero_sum_ne, Equilibrium, GameError, MixedStrategy,
    PayoffMatrix, StrategySet,
};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient perception data: level {level} attacker needs {missing}")]
    InsufficientPerception { level: u8, missing: &'static str },
    #[error("strategy `{0}` has no matching entry in the perception vectors")]
    UnknownLine(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonLevels {
    pub lambda: f64,
    pub max_level: usize,
}

impl PoissonLevels {
    pub fn new(lambda: f64, max_level: usize) -> Result<Self, HierarchyError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(HierarchyError::InvalidParameter(format!(
                "lambda = {lambda}"
            )));
        }
        if max_level < 1 {
            return Err(HierarchyError::InvalidParameter(
                "max level must be >= 1".into(),
            ));
        }
        Ok(Self { lambda, max_level })
    }
}

/// `e^-lambda lambda^k / k!`, untruncated.
///
/// Not used for the three-type model: a Poisson has ratio
/// `alpha(k+1)/alpha(k) = lambda/(k+1)`, which is not constant.
pub fn poisson_alpha(levels: &PoissonLevels, k: usize) -> Result<f64, HierarchyError> {
    if k > levels.max_level {
        return Err(HierarchyError::InvalidParameter(format!(
            "level {k} above max level {}",
            levels.max_level
        )));
    }
    let mut p = (-levels.lambda).exp();
    for i in 1..=k {
        p *= levels.lambda / i as f64;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelDistribution {
    /// `alpha(k+1)/alpha(k)`; `None` for distributions given directly.
    pub tau: Option<f64>,
    pub alpha: [f64; 3],
}

impl LevelDistribution {
    /// Arbitrary weights over levels 0..=2.
    pub fn from_weights(alpha: [f64; 3]) -> Result<Self, HierarchyError> {
        if alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(HierarchyError::InvalidParameter(format!(
                "weights {alpha:?}"
            )));
        }
        let s: f64 = alpha.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(HierarchyError::InvalidParameter(format!(
                "weights sum to {s}"
            )));
        }
        Ok(Self { tau: None, alpha })
    }

    pub fn point(level: usize) -> Self {
        let mut alpha = [0.0; 3];
        alpha[level] = 1.0;
        Self { tau: None, alpha }
    }
}

/// `alpha = (1, tau, tau^2) / (1 + tau + tau^2)`.
pub fn truncated_levels(tau: f64) -> Result<LevelDistribution, HierarchyError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(HierarchyError::InvalidParameter(format!("tau = {tau}")));
    }
    let a0 = 1.0 / (1.0 + tau + tau * tau);
    Ok(LevelDistribution {
        tau: Some(tau),
        alpha: [a0, tau * a0, tau * tau * a0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rationale {
    Uniform,
    MaxFlow,
    MaxCost,
}

impl Rationale {
    pub fn as_str(self) -> &'static str {
        match self {
            Rationale::Uniform => "uniform",
            Rationale::MaxFlow => "max-flow",
            Rationale::MaxCost => "max-cost",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackerTypePolicy {
    pub level: u8,
    pub mix: MixedStrategy,
    pub rationale: Rationale,
    /// Attacks sharing the top perceived harm; more than one means the mix
    /// is split uniformly over them.
    pub tied: Vec<usize>,
}

impl AttackerTypePolicy {
    pub fn is_tie(&self) -> bool {
        self.tied.len() > 1
    }
}

/// What an attacker can observe, indexed by `lines`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Perception {
    pub lines: Vec<String>,
    pub flows: Option<Vec<f64>>,
    pub costs: Option<Vec<f64>>,
}

impl Perception {
    /// Perceived value for each attack: by label when the strategy has one,
    /// otherwise by position.
    fn per_strategy(&self, attacks: &StrategySet, v: &[f64]) -> Result<Vec<f64>, HierarchyError> {
        if v.len() != self.lines.len() {
            return Err(HierarchyError::DimensionMismatch {
                what: "perception vector",
                expected: self.lines.len(),
                found: v.len(),
            });
        }
        attacks
            .strategies()
            .iter()
            .enumerate()
            .map(|(i, s)| match &s.label {
                Some(l) => self
                    .lines
                    .iter()
                    .position(|x| x == l)
                    .map(|p| v[p])
                    .ok_or_else(|| HierarchyError::UnknownLine(l.clone())),
                None => v
                    .get(i)
                    .copied()
                    .ok_or_else(|| HierarchyError::UnknownLine(format!("#{i}"))),
            })
            .collect()
    }
}

/// Level 0 attacks uniformly, level 1 the most loaded line (by |flow|),
/// level 2 the costliest line.
pub fn attacker_policy(
    level: u8,
    attacks: &StrategySet,
    perception: &Perception,
) -> Result<AttackerTypePolicy, HierarchyError> {
    let n = attacks.len();
    let (values, rationale) = match level {
        0 => {
            return Ok(AttackerTypePolicy {
                level,
                mix: MixedStrategy::uniform(n),
                rationale: Rationale::Uniform,
                tied: (0..n).collect(),
            })
        }
        1 => {
            let flows =
                perception
                    .flows
                    .as_ref()
                    .ok_or(HierarchyError::InsufficientPerception {
                        level,
                        missing: "line flows",
                    })?;
            let abs: Vec<f64> = flows.iter().map(|w| w.abs()).collect();
            (perception.per_strategy(attacks, &abs)?, Rationale::MaxFlow)
        }
        2 => {
            let costs =
                perception
                    .costs
                    .as_ref()
                    .ok_or(HierarchyError::InsufficientPerception {
                        level,
                        missing: "loss costs",
                    })?;
            (perception.per_strategy(attacks, costs)?, Rationale::MaxCost)
        }
        _ => {
            return Err(HierarchyError::InvalidParameter(format!(
                "attacker level {level} (only 0, 1, 2 are modelled)"
            )))
        }
    };
    let (_, tied) = argmax_with_ties(&values);
    Ok(AttackerTypePolicy {
        level,
        mix: MixedStrategy::uniform_over(n, &tied),
        rationale,
        tied,
    })
}

/// The three policies for levels 0, 1, 2.
pub fn attacker_policies(
    attacks: &StrategySet,
    perception: &Perception,
) -> Result<[AttackerTypePolicy; 3], HierarchyError> {
    Ok([
        attacker_policy(0, attacks, perception)?,
        attacker_policy(1, attacks, perception)?,
        attacker_policy(2, attacks, perception)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefenderResponse {
    /// Lowest-index maximizer.
    pub defense: usize,
    pub tied: Vec<usize>,
    /// Uniform over `tied`; earns `value` like any of its members.
    pub mix: MixedStrategy,
    pub value: f64,
    /// Defender utility of every pure defense against the mixture.
    pub utilities: Vec<f64>,
}

/// Attack mix induced by the type distribution.
pub fn mixture_attack(
    dist: &LevelDistribution,
    policies: &[AttackerTypePolicy; 3],
) -> Result<MixedStrategy, HierarchyError> {
    for (k, p) in policies.iter().enumerate() {
        if p.level as usize != k {
            return Err(HierarchyError::InvalidParameter(format!(
                "policy {k} is for level {}",
                p.level
            )));
        }
    }
    let mixes: Vec<&MixedStrategy> = policies.iter().map(|p| &p.mix).collect();
    Ok(MixedStrategy::combine(&dist.alpha, &mixes)?)
}

/// Best pure defense against the type mixture, scanning every defense.
/// Mixing the three attack mixes first is exact because utilities are
/// linear in the attack mix.
pub fn defender_response_to_mixture(
    m: &PayoffMatrix,
    dist: &LevelDistribution,
    policies: &[AttackerTypePolicy; 3],
) -> Result<DefenderResponse, HierarchyError> {
    let attack = mixture_attack(dist, policies)?;
    if attack.len() != m.n_attacker() {
        return Err(HierarchyError::DimensionMismatch {
            what: "attacker policy",
            expected: m.n_attacker(),
            found: attack.len(),
        });
    }
    let utilities = defender_values(m, &attack);
    let (defense, tied) = argmax_with_ties(&utilities);
    Ok(DefenderResponse {
        defense,
        mix: MixedStrategy::uniform_over(m.n_defender(), &tied),
        tied,
        value: utilities[defense],
        utilities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl TauGrid {
    pub fn new(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Self, HierarchyError> {
        if !(min > 0.0 && min.is_finite() && max.is_finite() && max >= min) {
            return Err(HierarchyError::InvalidParameter(format!(
                "tau grid [{min}, {max}] must be positive and ordered"
            )));
        }
        if count == 0 || (count == 1 && max != min) {
            return Err(HierarchyError::InvalidParameter(format!(
                "tau grid needs at least two points to span [{min}, {max}]"
            )));
        }
        Ok(Self {
            min,
            max,
            count,
            spacing,
        })
    }

    /// Grid points; the end points are hit exactly.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == self.count - 1 {
                    return self.max;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub alpha: [f64; 3],
    pub ch_defense: usize,
    pub ch_tied: Vec<usize>,
    pub ch_value: f64,
    /// Equilibrium defender mix evaluated against the same type mixture.
    pub ne_value: f64,
    /// `(ch_value - ne_value) / |ne_value|`; NaN when `ne_value` is zero.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub equilibrium: Equilibrium,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    /// Grid intervals where the CH defense changes:
    /// `(tau before, tau after, old defense, new defense)`.
    pub fn switches(&self) -> Vec<(f64, f64, usize, usize)> {
        self.rows
            .windows(2)
            .filter(|w| w[0].ch_defense != w[1].ch_defense)
            .map(|w| (w[0].tau, w[1].tau, w[0].ch_defense, w[1].ch_defense))
            .collect()
    }
}

pub fn relative_gain(ch: f64, ne: f64) -> f64 {
    if ne == 0.0 {
        f64::NAN
    } else {
        (ch - ne) / ne.abs()
    }
}

pub fn sweep_row(
    m: &PayoffMatrix,
    policies: &[AttackerTypePolicy; 3],
    ne_defender: &MixedStrategy,
    tau: f64,
) -> Result<SweepRow, HierarchyError> {
    let dist = truncated_levels(tau)?;
    let ch = defender_response_to_mixture(m, &dist, policies)?;
    let attack = mixture_attack(&dist, policies)?;
    let (ne_value, _) = crate::game::expected_utility(m, ne_defender, &attack)?;
    Ok(SweepRow {
        tau,
        alpha: dist.alpha,
        ch_defense: ch.defense,
        ch_tied: ch.tied,
        ch_value: ch.value,
        ne_value,
        gain: relative_gain(ch.value, ne_value),
    })
}

/// CH play versus the exact equilibrium mix over a grid of `tau`.
pub fn tau_sweep(
    m: &PayoffMatrix,
    policies: &[AttackerTypePolicy; 3],
    grid: &TauGrid,
) -> Result<Sweep, HierarchyError> {
    let equilibrium = solve_zero_sum_ne(m)?;
    let rows = grid
        .points()
        .into_iter()
        .map(|tau| sweep_row(m, policies, &equilibrium.defender, tau))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep { equilibrium, rows })
}

/// Positive `tau` where defenses `i` and `j` earn the same against the
/// type mixture. The utility difference times `1 + tau + tau^2` is the
/// quadratic `d0 + d1 tau + d2 tau^2`.
pub fn indifference_taus(
    m: &PayoffMatrix,
    policies: &[AttackerTypePolicy; 3],
    i: usize,
    j: usize,
) -> Result<Vec<f64>, HierarchyError> {
    let mut d = [0.0; 3];
    for (k, p) in policies.iter().enumerate() {
        let u = defender_values(m, &p.mix);
        d[k] = u[i] - u[j];
    }
    let [c, b, a] = d;
    let mut roots = Vec::new();
    if a.abs() < 1e-300 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            // numerically stable pair
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots.push(q / a);
            if q != 0.0 {
                roots.push(c / q);
            }
        }
    }
    roots.retain(|t| *t > 0.0 && t.is_finite());
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{best_response, Player, Strategy};

    fn labelled(n: usize) -> StrategySet {
        StrategySet::new(
            (0..n)
                .map(|i| Strategy {
                    nodes: vec![i],
                    label: Some(format!("p{}", i + 1)),
                })
                .collect(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn poisson_values() {
        let one = PoissonLevels::new(1.0, 5).unwrap();
        let e = (-1.0f64).exp();
        assert_eq!(poisson_alpha(&one, 0).unwrap(), e);
        assert_eq!(poisson_alpha(&one, 1).unwrap(), e);
        let p = PoissonLevels::new(1.5, 2).unwrap();
        // 1.125 e^-1.5 to 40 digits
        let want = 0.251_021_430_166_983_557_549_940_529_609_514_086_5;
        assert!((poisson_alpha(&p, 2).unwrap() - want).abs() < 1e-12);
        assert!(poisson_alpha(&p, 3).is_err());
        assert!(PoissonLevels::new(0.0, 2).is_err());
        assert!(PoissonLevels::new(1.0, 0).is_err());
    }

    #[test]
    fn truncated_triples() {
        let u = truncated_levels(1.0).unwrap().alpha;
        assert!(u.iter().all(|a| (a - 1.0 / 3.0).abs() < 1e-15));
        let h = truncated_levels(0.5).unwrap().alpha;
        let want = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        for k in 0..3 {
            assert!((h[k] - want[k]).abs() < 1e-15);
        }
        let z = truncated_levels(1e-9).unwrap().alpha;
        assert!(z[0] > 1.0 - 1e-8 && z[1] < 1e-8 && z[2] < 1e-17);
        assert!(truncated_levels(0.0).is_err());
        assert!(truncated_levels(-1.0).is_err());
        assert!(truncated_levels(f64::NAN).is_err());
    }

    #[test]
    fn level_policies() {
        let s = labelled(4);
        let per = Perception {
            lines: vec!["p1".into(), "p2".into(), "p3".into(), "p4".into()],
            flows: Some(vec![10.0, -30.0, 20.0, 5.0]),
            costs: Some(vec![1.0, 2.0, 3.0, 3.0]),
        };
        let l0 = attacker_policy(0, &s, &per).unwrap();
        assert_eq!(l0.mix, MixedStrategy::uniform(4));
        let l1 = attacker_policy(1, &s, &per).unwrap();
        assert_eq!(l1.mix, MixedStrategy::pure(4, 1));
        assert_eq!(l1.rationale, Rationale::MaxFlow);
        let l2 = attacker_policy(2, &s, &per).unwrap();
        assert!(l2.is_tie());
        assert_eq!(l2.mix.probs(), &[0.0, 0.0, 0.5, 0.5]);
        assert!(attacker_policy(3, &s, &per).is_err());
    }

    #[test]
    fn missing_perception() {
        let s = labelled(2);
        let per = Perception {
            lines: vec!["p1".into(), "p2".into()],
            ..Default::default()
        };
        assert!(attacker_policy(0, &s, &per).is_ok());
        assert!(matches!(
            attacker_policy(1, &s, &per),
            Err(HierarchyError::InsufficientPerception { level: 1, .. })
        ));
        assert!(matches!(
            attacker_policy(2, &s, &per),
            Err(HierarchyError::InsufficientPerception { level: 2, .. })
        ));
    }

    #[test]
    fn perception_follows_labels() {
        let s = labelled(2);
        let per = Perception {
            lines: vec!["p2".into(), "p1".into()],
            flows: Some(vec![1.0, 2.0]),
            costs: None,
        };
        // p1 is the second entry of the perception vectors
        assert_eq!(attacker_policy(1, &s, &per).unwrap().tied, vec![0]);
        let bad = Perception {
            lines: vec!["p1".into(), "p9".into()],
            flows: Some(vec![1.0, 2.0]),
            costs: None,
        };
        assert!(matches!(
            attacker_policy(1, &s, &bad),
            Err(HierarchyError::UnknownLine(_))
        ));
    }

    #[test]
    fn point_mass_matches_best_response() {
        let m = PayoffMatrix::from_rows(vec![
            vec![1.0, 5.0, 4.0],
            vec![3.0, 1.0, 4.5],
            vec![2.0, 2.0, 1.0],
        ])
        .unwrap();
        let s = labelled(3);
        let per = Perception {
            lines: vec!["p1".into(), "p2".into(), "p3".into()],
            flows: Some(vec![3.0, 1.0, 2.0]),
            costs: Some(vec![0.0, 9.0, 1.0]),
        };
        let pol = attacker_policies(&s, &per).unwrap();
        for k in 0..3 {
            let r = defender_response_to_mixture(&m, &LevelDistribution::point(k), &pol).unwrap();
            let br = best_response(&m, Player::Defender, &pol[k].mix).unwrap();
            assert_eq!(r.defense, br.index);
            assert_eq!(r.value, br.value);
        }
    }

    #[test]
    fn grids() {
        let g = TauGrid::new(0.05, 20.0, 200, Spacing::Log).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 200);
        assert_eq!(p[0], 0.05);
        assert_eq!(p[199], 20.0);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        let l = TauGrid::new(1.0, 2.0, 3, Spacing::Linear).unwrap().points();
        assert_eq!(l, vec![1.0, 1.5, 2.0]);
        assert!(TauGrid::new(0.0, 1.0, 3, Spacing::Log).is_err());
        assert!(TauGrid::new(2.0, 1.0, 3, Spacing::Log).is_err());
        assert!(TauGrid::new(1.0, 2.0, 1, Spacing::Log).is_err());
        assert_eq!(
            TauGrid::new(1.0, 1.0, 1, Spacing::Log).unwrap().points(),
            vec![1.0]
        );
    }

    #[test]
    fn indifference_root_splits_defenses() {
        let m = PayoffMatrix::from_rows(vec![
            vec![1.0, 1.0, 5.0],
            vec![3.0, 9.0, 9.0],
            vec![4.0, 4.0, 1.0],
        ])
        .unwrap();
        let s = labelled(3);
        let per = Perception {
            lines: vec!["p1".into(), "p2".into(), "p3".into()],
            flows: Some(vec![0.0, 3.0, 1.0]),
            costs: Some(vec![0.0, 1.0, 9.0]),
        };
        let pol = attacker_policies(&s, &per).unwrap();
        let roots = indifference_taus(&m, &pol, 0, 2).unwrap();
        // 2/3 + 3 tau - 4 tau^2 = 0
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - (3.0 + (9.0f64 + 32.0 / 3.0).sqrt()) / 8.0).abs() < 1e-12);
        for t in roots {
            let dist = truncated_levels(t).unwrap();
            let r = defender_response_to_mixture(&m, &dist, &pol).unwrap();
            assert!((r.utilities[0] - r.utilities[2]).abs() < 1e-9);
        }
    }
}
