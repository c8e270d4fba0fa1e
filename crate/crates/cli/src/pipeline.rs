//! Stage orchestration: OPF -> costs -> payoffs -> equilibrium -> sweep.
//! Each stage is computed at most once per run and only when some
//! requested output needs it.

use std::fs::File;
use std::io::Read;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use gridsec::diffusion::{build_wide_area_r, CyberLayer, InterconnectionMatrix, WeightRule};
use gridsec::game::{
    build_payoff_matrix, certificate, solve_zero_sum_ne, Certificate, Equilibrium, PayoffMatrix,
    Strategy, StrategySet,
};
use gridsec::grid::{
    cost_vector, solve_dc_opf, ContingencyCost, DispatchResult, GridCase, GridError,
};
use gridsec::hierarchy::{
    attacker_policies, defender_response_to_mixture, indifference_taus, sweep_row,
    AttackerTypePolicy, LevelDistribution, Perception, SweepRow,
};

use crate::config::{node_index, InterconnectionSection, Scenario, StrategyEntry};

#[derive(Debug, Clone, Serialize)]
pub struct OpfReport {
    pub lines: Vec<String>,
    pub generators: Vec<String>,
    pub base: DispatchResult,
    pub contingencies: Vec<Contingency>,
}

/// One single-line outage. Islanding or unservable outages are recorded,
/// not fatal: the base case is still meaningful.
#[derive(Debug, Clone, Serialize)]
pub struct Contingency {
    pub line: String,
    pub status: &'static str,
    pub dispatch: Option<DispatchResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub lines: Vec<String>,
    /// Base OPF value, when costs came from the grid.
    pub base_value: Option<f64>,
    /// Per-line breakdown, when costs came from the grid.
    pub contingencies: Option<Vec<ContingencyCost>>,
    pub costs: Vec<f64>,
    pub overridden: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeReport {
    pub equilibrium: Equilibrium,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub policies: Vec<AttackerTypePolicy>,
    /// Defender utility of each pure defense against each level, rows =
    /// defense.
    pub level_utilities: Vec<[f64; 3]>,
    pub rows: Vec<SweepRow>,
    /// Exact `tau` values where the two defenses used across the sweep are
    /// equally good, if any.
    pub crossovers: Vec<f64>,
}

pub struct Pipeline<'a> {
    scenario: &'a Scenario,
    grid: Option<GridCase>,
    opf: Option<OpfReport>,
    costs: Option<CostReport>,
    payoffs: Option<PayoffMatrix>,
    ne: Option<NeReport>,
    sweep: Option<SweepReport>,
}

impl<'a> Pipeline<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            grid: None,
            opf: None,
            costs: None,
            payoffs: None,
            ne: None,
            sweep: None,
        }
    }

    pub fn case(&mut self) -> Result<&GridCase> {
        if self.grid.is_none() {
            let rel = self
                .scenario
                .config
                .grid
                .as_ref()
                .ok_or_else(|| anyhow!("the scenario has no grid case"))?;
            let path = self.scenario.resolve(rel);
            let case = GridCase::load(&path)
                .with_context(|| format!("loading grid case {}", path.display()))?;
            self.grid = Some(case);
        }
        Ok(self.grid.as_ref().unwrap())
    }

    pub fn opf(&mut self) -> Result<&OpfReport> {
        if self.opf.is_none() {
            let case = self.case()?.clone();
            let base = solve_dc_opf(&case, None).context("base-case OPF")?;
            let mut contingencies = Vec::with_capacity(case.lines.len());
            for line in &case.lines {
                let (status, dispatch, error) = match solve_dc_opf(&case, Some(&line.id)) {
                    Ok(d) => ("ok", Some(d), None),
                    Err(e @ GridError::NetworkSplit(_)) => {
                        ("network-split", None, Some(e.to_string()))
                    }
                    Err(e @ GridError::Infeasible { .. }) => {
                        ("infeasible", None, Some(e.to_string()))
                    }
                    Err(e) => return Err(anyhow!(e).context(format!("contingency `{}`", line.id))),
                };
                contingencies.push(Contingency {
                    line: line.id.clone(),
                    status,
                    dispatch,
                    error,
                });
            }
            self.opf = Some(OpfReport {
                lines: case.lines.iter().map(|l| l.id.clone()).collect(),
                generators: case.generators.iter().map(|g| g.id.clone()).collect(),
                base,
                contingencies,
            });
        }
        Ok(self.opf.as_ref().unwrap())
    }

    pub fn costs(&mut self) -> Result<&CostReport> {
        if self.costs.is_none() {
            let report = match self.scenario.config.costs.clone() {
                Some(o) => {
                    let lines = match o.lines {
                        Some(l) => l,
                        None => self.case()?.lines.iter().map(|l| l.id.clone()).collect(),
                    };
                    if lines.len() != o.values.len() {
                        bail!(
                            "costs.values has {} entries for {} lines",
                            o.values.len(),
                            lines.len()
                        );
                    }
                    CostReport {
                        lines,
                        base_value: None,
                        contingencies: None,
                        costs: o.values,
                        overridden: true,
                    }
                }
                None => {
                    let case = self.case()?;
                    let cv = cost_vector(case).context("line-loss costs")?;
                    CostReport {
                        lines: case.lines.iter().map(|l| l.id.clone()).collect(),
                        base_value: Some(cv.base.value),
                        costs: cv.costs(),
                        contingencies: Some(cv.contingencies),
                        overridden: false,
                    }
                }
            };
            self.costs = Some(report);
        }
        Ok(self.costs.as_ref().unwrap())
    }

    fn layer(&self) -> Result<CyberLayer> {
        let cyber = self
            .scenario
            .config
            .cyber
            .as_ref()
            .ok_or_else(|| anyhow!("the scenario has no [cyber] section"))?;
        let ids = (1..=cyber.nodes).map(|i| format!("c{i}")).collect();
        Ok(CyberLayer::new(ids, self.scenario.baseline().unwrap())?)
    }

    fn interconnection(
        &self,
        layer: &CyberLayer,
        lines: &[String],
    ) -> Result<InterconnectionMatrix> {
        let section = self
            .scenario
            .config
            .interconnection
            .as_ref()
            .ok_or_else(|| anyhow!("the scenario has no [interconnection] section"))?;
        let rule = match section {
            InterconnectionSection::Matrix { rows } => {
                return Ok(InterconnectionMatrix::new(rows.clone(), lines.to_vec())?);
            }
            InterconnectionSection::Fixed { local, remote, .. } => WeightRule::Fixed {
                local: *local,
                remote: *remote,
            },
            InterconnectionSection::Shared { local_share, .. } => WeightRule::Shared {
                local_share: *local_share,
            },
        };
        Ok(build_wide_area_r(
            layer,
            lines,
            &self.scenario.local_map(),
            rule,
        )?)
    }

    fn strategy_set(&self, entries: &[StrategyEntry], n: usize) -> Result<StrategySet> {
        let strategies = entries
            .iter()
            .map(|e| Strategy {
                nodes: e
                    .nodes
                    .iter()
                    .map(|id| node_index(id, n).unwrap())
                    .collect(),
                label: e.label.clone(),
            })
            .collect();
        Ok(StrategySet::new(strategies, n)?)
    }

    fn attacker_set(&self) -> Result<StrategySet> {
        let n = self.layer()?.len();
        let cfg = &self.scenario.config;
        self.strategy_set(
            cfg.attacker_strategies
                .as_deref()
                .unwrap_or(&cfg.strategies),
            n,
        )
    }

    pub fn payoffs(&mut self) -> Result<&PayoffMatrix> {
        if self.payoffs.is_none() {
            let m = match self.scenario.config.payoffs.clone() {
                Some(rel) => {
                    let path = self.scenario.resolve(&rel);
                    read_payoffs(&path)
                        .with_context(|| format!("importing payoffs from {}", path.display()))?
                }
                None => {
                    let layer = self.layer()?;
                    let costs = self.costs()?.clone();
                    let r = self.interconnection(&layer, &costs.lines)?;
                    let defender =
                        self.strategy_set(&self.scenario.config.strategies, layer.len())?;
                    let attacker = self.attacker_set()?;
                    build_payoff_matrix(&layer, &r, &costs.costs, &defender, &attacker)?
                }
            };
            self.payoffs = Some(m);
        }
        Ok(self.payoffs.as_ref().unwrap())
    }

    pub fn ne(&mut self) -> Result<&NeReport> {
        if self.ne.is_none() {
            let m = self.payoffs()?.clone();
            let equilibrium = solve_zero_sum_ne(&m).context("solving the equilibrium")?;
            let certificate = certificate(&m, &equilibrium)?;
            self.ne = Some(NeReport {
                equilibrium,
                certificate,
            });
        }
        Ok(self.ne.as_ref().unwrap())
    }

    fn perception(&mut self) -> Result<Perception> {
        let over = self.scenario.config.perception.clone();
        let over_lines = over.as_ref().and_then(|p| p.lines.clone());
        let flows = match over.as_ref().and_then(|p| p.flows.clone()) {
            Some(f) => Some(f),
            None if self.scenario.config.grid.is_some() => Some(self.opf()?.base.flows.clone()),
            None => None,
        };
        let costs = match over.as_ref().and_then(|p| p.costs.clone()) {
            Some(c) => Some(c),
            None if self.scenario.config.grid.is_some() || self.scenario.config.costs.is_some() => {
                Some(self.costs()?.costs.clone())
            }
            None => None,
        };
        let lines = match over_lines {
            Some(l) => l,
            None if self.scenario.config.grid.is_some() || self.scenario.config.costs.is_some() => {
                self.costs()?.lines.clone()
            }
            None => self.payoffs()?.attacker_labels().to_vec(),
        };
        Ok(Perception {
            lines,
            flows,
            costs,
        })
    }

    pub fn sweep(&mut self) -> Result<&SweepReport> {
        if self.sweep.is_none() {
            let m = self.payoffs()?.clone();
            let ne = self.ne()?.equilibrium.clone();
            let perception = self.perception()?;
            let attacks = if self.scenario.config.payoffs.is_some() {
                // imported matrices carry labels only
                StrategySet::new(
                    m.attacker_labels()
                        .iter()
                        .enumerate()
                        .map(|(i, l)| Strategy {
                            nodes: vec![i],
                            label: Some(l.clone()),
                        })
                        .collect(),
                    m.n_attacker(),
                )?
            } else {
                self.attacker_set()?
            };
            let policies = attacker_policies(&attacks, &perception)
                .context("building attacker level policies")?;
            let mut level_utilities = vec![[0.0; 3]; m.n_defender()];
            for k in 0..3 {
                let r = defender_response_to_mixture(&m, &LevelDistribution::point(k), &policies)?;
                for (row, u) in level_utilities.iter_mut().zip(r.utilities) {
                    row[k] = u;
                }
            }
            let grid = self
                .scenario
                .config
                .tau
                .as_ref()
                .ok_or_else(|| anyhow!("the scenario has no [tau] section"))?
                .grid()?;
            let rows = grid
                .points()
                .into_iter()
                .map(|tau| sweep_row(&m, &policies, &ne.defender, tau))
                .collect::<Result<Vec<_>, _>>()?;
            let mut used: Vec<usize> = rows.iter().map(|r| r.ch_defense).collect();
            used.sort_unstable();
            used.dedup();
            let crossovers = if used.len() == 2 {
                indifference_taus(&m, &policies, used[0], used[1])?
            } else {
                Vec::new()
            };
            self.sweep = Some(SweepReport {
                policies: policies.to_vec(),
                level_utilities,
                rows,
                crossovers,
            });
        }
        Ok(self.sweep.as_ref().unwrap())
    }
}

/// Reads a payoff CSV; a `# unit: 1000` comment scales values back to raw
/// currency.
pub fn read_payoffs(path: &std::path::Path) -> Result<PayoffMatrix> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let thousands = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .any(|l| l.trim_start_matches('#').trim() == "unit: 1000");
    let m = PayoffMatrix::read_csv(text.as_bytes())?;
    Ok(if thousands { m.map(|v| v * 1000.0) } else { m })
}
