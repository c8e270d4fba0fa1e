//! DC optimal power flow and the economic cost of losing a line.
//!
//! The network model is the usual lossless DC approximation: unit voltage
//! magnitudes, flow on a line equal to `base_mva * (theta_from - theta_to) / x`,
//! bus balance as linear equalities. Generators have constant marginal
//! costs, so the dispatch problem is an LP solved by [`crate::lp`].

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};

/// Flow magnitude within this distance of a limit counts as binding.
const BINDING_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("failed to read grid case: {0}")]
    Io(String),
    #[error("failed to parse grid case: {0}")]
    Parse(String),
    #[error("invalid grid case: {0}")]
    Invalid(String),
    #[error("unknown line id `{0}`")]
    UnknownLine(String),
    #[error("network split: removing line `{0}` islands part of the grid")]
    NetworkSplit(String),
    #[error("dispatch infeasible{}; binding: [{}]", outage_suffix(.outage), .binding.join(", "))]
    Infeasible {
        outage: Option<String>,
        binding: Vec<String>,
    },
    #[error("unservable contingency: outage of `{line}` leaves load unserved; binding: [{}]", .binding.join(", "))]
    UnservableContingency { line: String, binding: Vec<String> },
    #[error("{} contingencies failed: {}", .0.len(), describe_failures(.0))]
    Contingencies(Vec<(String, GridError)>),
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn outage_suffix(outage: &Option<String>) -> String {
    match outage {
        Some(l) => format!(" with line `{l}` out"),
        None => String::new(),
    }
}

fn describe_failures(f: &[(String, GridError)]) -> String {
    f.iter()
        .map(|(l, e)| format!("{l}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// MW
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// per unit on the case base
    pub reactance: f64,
    /// MW; `None` is unlimited
    pub limit: Option<f64>,
    /// hours to bring the line back
    pub repair_hours: f64,
    pub repair_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    /// currency per MWh
    pub cost: f64,
    pub pmin: f64,
    pub pmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub base_mva: f64,
    pub slack: String,
}

// On-disk layout. Unknown keys are rejected at every level.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    defaults: DefaultsSection,
    buses: Vec<BusSection>,
    lines: Vec<LineSection>,
    generators: Vec<GeneratorSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsSection {
    base_mva: f64,
    slack: String,
    repair_hours: f64,
    repair_cost: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusSection {
    id: String,
    #[serde(default)]
    load: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineSection {
    id: String,
    from: String,
    to: String,
    reactance: f64,
    limit: Option<f64>,
    repair_hours: Option<f64>,
    repair_cost: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    id: String,
    bus: String,
    cost: f64,
    #[serde(default)]
    pmin: f64,
    pmax: f64,
}

impl GridCase {
    pub fn from_toml_str(text: &str) -> Result<Self, GridError> {
        let file: CaseFile = toml::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        let d = file.defaults;
        let case = GridCase {
            buses: file
                .buses
                .into_iter()
                .map(|b| Bus {
                    id: b.id,
                    load: b.load,
                })
                .collect(),
            lines: file
                .lines
                .into_iter()
                .map(|l| Line {
                    id: l.id,
                    from: l.from,
                    to: l.to,
                    reactance: l.reactance,
                    limit: l.limit,
                    repair_hours: l.repair_hours.unwrap_or(d.repair_hours),
                    repair_cost: l.repair_cost.unwrap_or(d.repair_cost),
                })
                .collect(),
            generators: file
                .generators
                .into_iter()
                .map(|g| Generator {
                    id: g.id,
                    bus: g.bus,
                    cost: g.cost,
                    pmin: g.pmin,
                    pmax: g.pmax,
                })
                .collect(),
            base_mva: d.base_mva,
            slack: d.slack,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let invalid = |m: String| Err(GridError::Invalid(m));
        if self.buses.is_empty() {
            return invalid("no buses".into());
        }
        if !(self.base_mva > 0.0 && self.base_mva.is_finite()) {
            return invalid(format!("base MVA must be positive, got {}", self.base_mva));
        }
        let mut seen = HashSet::new();
        for b in &self.buses {
            if !seen.insert(b.id.as_str()) {
                return invalid(format!("duplicate bus id `{}`", b.id));
            }
            if !(b.load >= 0.0 && b.load.is_finite()) {
                return invalid(format!("bus `{}` has invalid load {}", b.id, b.load));
            }
        }
        if !seen.contains(self.slack.as_str()) {
            return invalid(format!("slack bus `{}` does not exist", self.slack));
        }
        let mut line_ids = HashSet::new();
        for l in &self.lines {
            if !line_ids.insert(l.id.as_str()) {
                return invalid(format!("duplicate line id `{}`", l.id));
            }
            if !seen.contains(l.from.as_str()) || !seen.contains(l.to.as_str()) {
                return invalid(format!("line `{}` references an unknown bus", l.id));
            }
            if l.from == l.to {
                return invalid(format!("line `{}` connects a bus to itself", l.id));
            }
            if !(l.reactance > 0.0 && l.reactance.is_finite()) {
                return invalid(format!("line `{}` needs positive reactance", l.id));
            }
            if let Some(lim) = l.limit {
                if !(lim > 0.0) {
                    return invalid(format!("line `{}` needs a positive limit", l.id));
                }
            }
            if !(l.repair_hours >= 0.0 && l.repair_cost >= 0.0) {
                return invalid(format!("line `{}` has negative repair data", l.id));
            }
        }
        let mut gen_ids = HashSet::new();
        for g in &self.generators {
            if !gen_ids.insert(g.id.as_str()) {
                return invalid(format!("duplicate generator id `{}`", g.id));
            }
            if !seen.contains(g.bus.as_str()) {
                return invalid(format!("generator `{}` sits on unknown bus", g.id));
            }
            if !(g.cost >= 0.0 && g.cost.is_finite()) {
                return invalid(format!("generator `{}` has invalid cost", g.id));
            }
            if !(0.0 <= g.pmin && g.pmin <= g.pmax && g.pmax.is_finite()) {
                return invalid(format!("generator `{}` needs 0 <= pmin <= pmax", g.id));
            }
        }
        let capacity: f64 = self.generators.iter().map(|g| g.pmax).sum();
        if capacity < self.total_load() {
            return invalid(format!(
                "generation capacity {capacity} MW below total load {} MW",
                self.total_load()
            ));
        }
        if !self.is_connected(None) {
            return invalid("network is not connected".into());
        }
        Ok(())
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.load).sum()
    }

    pub fn line_index(&self, id: &str) -> Result<usize, GridError> {
        self.lines
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| GridError::UnknownLine(id.to_string()))
    }

    fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect()
    }

    /// Whether every bus is reachable with line `without` removed.
    pub fn is_connected(&self, without: Option<usize>) -> bool {
        let idx = self.bus_index();
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for (k, l) in self.lines.iter().enumerate() {
            if Some(k) == without {
                continue;
            }
            let (a, b) = (idx[l.from.as_str()], idx[l.to.as_str()]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Copy of the case with every generator cost multiplied by `factor`.
    pub fn with_scaled_costs(&self, factor: f64) -> Self {
        let mut c = self.clone();
        for g in &mut c.generators {
            g.cost *= factor;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchResult {
    /// Total generation cost, currency per hour.
    pub value: f64,
    /// MW per generator, in case order.
    pub generation: Vec<f64>,
    /// Signed MW per line (from -> to positive); zero for the outaged line.
    pub flows: Vec<f64>,
    /// Radians per bus, slack at zero.
    pub angles: Vec<f64>,
    pub outaged: Option<usize>,
}

impl DispatchResult {
    /// Net injection (generation minus load) per bus implied by `generation`.
    pub fn injections(&self, case: &GridCase) -> Vec<f64> {
        let idx = case.bus_index();
        let mut inj: Vec<f64> = case.buses.iter().map(|b| -b.load).collect();
        for (g, p) in case.generators.iter().zip(&self.generation) {
            inj[idx[g.bus.as_str()]] += p;
        }
        inj
    }
}

struct OpfLayout {
    n_gen: usize,
    n_bus: usize,
}

impl OpfLayout {
    fn theta(&self, bus: usize) -> usize {
        self.n_gen + bus
    }
    fn n_vars(&self) -> usize {
        self.n_gen + self.n_bus
    }
}

/// Builds the DC-OPF LP. With `elastic`, each bus balance gets shortfall
/// and surplus columns and the objective becomes total imbalance.
fn build_opf_lp(case: &GridCase, outage: Option<usize>, elastic: bool) -> LinearProgram {
    let idx = case.bus_index();
    let layout = OpfLayout {
        n_gen: case.generators.len(),
        n_bus: case.buses.len(),
    };
    let n_core = layout.n_vars();
    let n_vars = if elastic {
        n_core + 2 * layout.n_bus
    } else {
        n_core
    };

    let mut objective = vec![0.0; n_vars];
    if elastic {
        for v in objective.iter_mut().skip(n_core) {
            *v = 1.0;
        }
    } else {
        for (j, g) in case.generators.iter().enumerate() {
            objective[j] = g.cost;
        }
    }
    let mut lp = LinearProgram::new(objective);
    for (j, g) in case.generators.iter().enumerate() {
        lp.set_bounds(j, g.pmin, g.pmax);
    }
    let slack = idx[case.slack.as_str()];
    for b in 0..layout.n_bus {
        let t = layout.theta(b);
        if b == slack {
            lp.set_bounds(t, 0.0, 0.0);
        } else {
            lp.set_bounds(t, f64::NEG_INFINITY, f64::INFINITY);
        }
    }

    // Bus balance: generation - outgoing flow = load.
    let mut balance = vec![vec![0.0; n_vars]; layout.n_bus];
    for (j, g) in case.generators.iter().enumerate() {
        balance[idx[g.bus.as_str()]][j] += 1.0;
    }
    for (k, l) in case.lines.iter().enumerate() {
        if Some(k) == outage {
            continue;
        }
        let (f, t) = (idx[l.from.as_str()], idx[l.to.as_str()]);
        let b = case.base_mva / l.reactance;
        balance[f][layout.theta(f)] -= b;
        balance[f][layout.theta(t)] += b;
        balance[t][layout.theta(t)] -= b;
        balance[t][layout.theta(f)] += b;
    }
    for (bus, mut row) in balance.into_iter().enumerate() {
        if elastic {
            row[n_core + bus] = 1.0;
            row[n_core + layout.n_bus + bus] = -1.0;
        }
        lp.add_constraint(row, Relation::Eq, case.buses[bus].load);
    }

    for (k, l) in case.lines.iter().enumerate() {
        if Some(k) == outage {
            continue;
        }
        let Some(limit) = l.limit else { continue };
        let (f, t) = (idx[l.from.as_str()], idx[l.to.as_str()]);
        let b = case.base_mva / l.reactance;
        let mut row = vec![0.0; n_vars];
        row[layout.theta(f)] = b;
        row[layout.theta(t)] = -b;
        lp.add_constraint(row.clone(), Relation::Le, limit);
        lp.add_constraint(row, Relation::Ge, -limit);
    }
    lp
}

fn flows_from_angles(case: &GridCase, angles: &[f64], outage: Option<usize>) -> Vec<f64> {
    let idx = case.bus_index();
    case.lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            if Some(k) == outage {
                0.0
            } else {
                let (f, t) = (idx[l.from.as_str()], idx[l.to.as_str()]);
                case.base_mva * (angles[f] - angles[t]) / l.reactance
            }
        })
        .collect()
}

/// Names the limits that bind in the least-imbalance dispatch.
fn diagnose_infeasible(case: &GridCase, outage: Option<usize>) -> Result<Vec<String>, GridError> {
    let lp = build_opf_lp(case, outage, true);
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Ok(Vec::new());
    }
    let ng = case.generators.len();
    let nb = case.buses.len();
    let angles = &sol.x[ng..ng + nb];
    let flows = flows_from_angles(case, angles, outage);
    let mut binding = Vec::new();
    for (k, l) in case.lines.iter().enumerate() {
        if let Some(lim) = l.limit {
            if Some(k) != outage && flows[k].abs() >= lim - BINDING_TOL {
                binding.push(format!("line {} limit {lim} MW", l.id));
            }
        }
    }
    for (j, g) in case.generators.iter().enumerate() {
        if sol.x[j] >= g.pmax - BINDING_TOL {
            binding.push(format!("generator {} at pmax {} MW", g.id, g.pmax));
        }
    }
    Ok(binding)
}

/// Least-cost dispatch, optionally with one line out of service.
pub fn solve_dc_opf(case: &GridCase, outage: Option<&str>) -> Result<DispatchResult, GridError> {
    let outage_idx = outage.map(|id| case.line_index(id)).transpose()?;
    if let Some(k) = outage_idx {
        if !case.is_connected(Some(k)) {
            return Err(GridError::NetworkSplit(case.lines[k].id.clone()));
        }
    }
    let lp = build_opf_lp(case, outage_idx, false);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(GridError::Infeasible {
                outage: outage.map(str::to_string),
                binding: diagnose_infeasible(case, outage_idx)?,
            })
        }
        LpStatus::Unbounded => {
            return Err(GridError::Invalid("dispatch LP is unbounded".into()));
        }
    }
    let ng = case.generators.len();
    let generation = sol.x[..ng].to_vec();
    let angles = sol.x[ng..].to_vec();
    let flows = flows_from_angles(case, &angles, outage_idx);
    Ok(DispatchResult {
        value: sol.objective,
        generation,
        flows,
        angles,
        outaged: outage_idx,
    })
}

/// `(V_out - V_base) * repair_hours + repair_cost` for one line.
pub fn line_loss_cost(case: &GridCase, line: &str) -> Result<f64, GridError> {
    let base = solve_dc_opf(case, None)?;
    let k = case.line_index(line)?;
    contingency_cost(case, k, base.value).map(|c| c.cost)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyCost {
    pub line: String,
    /// OPF value with the line out, currency per hour.
    pub outage_value: f64,
    pub repair_hours: f64,
    pub repair_cost: f64,
    pub cost: f64,
}

fn contingency_cost(
    case: &GridCase,
    k: usize,
    base_value: f64,
) -> Result<ContingencyCost, GridError> {
    let line = &case.lines[k];
    let out = match solve_dc_opf(case, Some(&line.id)) {
        Ok(d) => d,
        Err(GridError::Infeasible { binding, .. }) => {
            return Err(GridError::UnservableContingency {
                line: line.id.clone(),
                binding,
            })
        }
        Err(e) => return Err(e),
    };
    Ok(ContingencyCost {
        line: line.id.clone(),
        outage_value: out.value,
        repair_hours: line.repair_hours,
        repair_cost: line.repair_cost,
        cost: (out.value - base_value) * line.repair_hours + line.repair_cost,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostVector {
    pub base: DispatchResult,
    pub contingencies: Vec<ContingencyCost>,
}

impl CostVector {
    /// Loss cost per line, in case order.
    pub fn costs(&self) -> Vec<f64> {
        self.contingencies.iter().map(|c| c.cost).collect()
    }
}

/// Single-line outage cost for every line of the case.
pub fn cost_vector(case: &GridCase) -> Result<CostVector, GridError> {
    let base = solve_dc_opf(case, None)?;
    let mut contingencies = Vec::with_capacity(case.lines.len());
    let mut failures = Vec::new();
    for k in 0..case.lines.len() {
        match contingency_cost(case, k, base.value) {
            Ok(c) => contingencies.push(c),
            Err(e) => failures.push((case.lines[k].id.clone(), e)),
        }
    }
    if !failures.is_empty() {
        return Err(GridError::Contingencies(failures));
    }
    Ok(CostVector {
        base,
        contingencies,
    })
}
