//! Scenario-driven pipeline behind the `gridsec` binary.

pub mod config;
pub mod output;
pub mod pipeline;

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use config::{Format, InputDigest, Scenario};
use output::{json, payoff_csv, sig6, CsvDoc, Staging};
use pipeline::{CostReport, NeReport, OpfReport, Pipeline, SweepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Opf,
    Costs,
    Payoffs,
    Ne,
    ChSweep,
    All,
}

impl Command {
    fn stages(self) -> &'static [Command] {
        use Command::*;
        match self {
            All => &[Opf, Costs, Payoffs, Ne, ChSweep],
            Opf => &[Opf],
            Costs => &[Costs],
            Payoffs => &[Payoffs],
            Ne => &[Ne],
            ChSweep => &[ChSweep],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Opf => "opf",
            Command::Costs => "costs",
            Command::Payoffs => "payoffs",
            Command::Ne => "ne",
            Command::ChSweep => "ch-sweep",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub thousands: bool,
}

impl RunOptions {
    /// Output directory and formats as the scenario specifies them.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            out: s
                .config
                .output
                .dir
                .as_ref()
                .map(|d| s.resolve(d))
                .unwrap_or_else(|| PathBuf::from("out")),
            formats: s.config.output.formats.clone(),
            thousands: s.config.output.thousands,
        }
    }
}

/// Everything a run produced; stages that did not run are absent.
#[derive(Debug, Default, Serialize)]
pub struct RunReport {
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opf: Option<OpfReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<gridsec::game::PayoffMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ne: Option<NeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ch_sweep: Option<SweepReport>,
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: String,
    config_sha256: &'a str,
    inputs: &'a [InputDigest],
    formats: &'a [Format],
    thousands: bool,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    artifacts: Vec<String>,
    started_at: String,
    finished_at: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs `command`, leaving artifacts in `opts.out` on success or in
/// `opts.out/quarantine` on failure.
pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    let started_at = now();
    let mut staging = Staging::new(&opts.out)?;
    let result = run_stages(command, scenario, opts, &mut staging);
    let (status, error) = match &result {
        Ok(_) => ("ok", None),
        Err(e) => ("failed", Some(format!("{e:#}"))),
    };
    let mut artifacts = staging.files().to_vec();
    artifacts.push("provenance.json".into());
    let prov = Provenance {
        tool: "gridsec",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config: scenario.path.display().to_string(),
        config_sha256: &scenario.hash,
        inputs: &scenario.inputs,
        formats: &opts.formats,
        thousands: opts.thousands,
        status,
        error,
        artifacts,
        started_at,
        finished_at: now(),
    };
    staging.write("provenance.json", &json(&prov)?)?;
    match result {
        Ok(report) => {
            staging.commit()?;
            Ok(report)
        }
        Err(e) => {
            let q = staging.quarantine()?;
            Err(e.context(format!("partial artifacts moved to {}", q.display())))
        }
    }
}

fn run_stages(
    command: Command,
    scenario: &Scenario,
    opts: &RunOptions,
    staging: &mut Staging,
) -> Result<RunReport> {
    let mut p = Pipeline::new(scenario);
    let mut report = RunReport {
        config_sha256: scenario.hash.clone(),
        ..Default::default()
    };
    let csv = opts.formats.contains(&Format::Csv);
    let h = scenario.hash.as_str();
    let money = |x: f64| sig6(if opts.thousands { x / 1000.0 } else { x });
    let unit_note = if opts.thousands {
        "currency in thousands"
    } else {
        "currency in raw units"
    };

    let cfg = &scenario.config;
    for &stage in command.stages() {
        // `all` runs what the scenario has inputs for; single commands
        // report the missing input instead
        let applicable = match stage {
            Command::Opf => cfg.grid.is_some(),
            Command::Costs => cfg.grid.is_some() || cfg.costs.is_some(),
            Command::ChSweep => cfg.tau.is_some(),
            _ => true,
        };
        if command == Command::All && !applicable {
            continue;
        }
        match stage {
            Command::Opf => {
                let opf = p.opf()?.clone();
                if csv {
                    let case = p.case()?.clone();
                    let mut flows = CsvDoc::new(
                        h,
                        &["line", "from", "to", "flow_mw", "abs_flow_mw", "limit_mw"],
                    )?;
                    for (line, w) in case.lines.iter().zip(&opf.base.flows) {
                        flows.row([
                            line.id.clone(),
                            line.from.clone(),
                            line.to.clone(),
                            sig6(*w),
                            sig6(w.abs()),
                            line.limit.map(sig6).unwrap_or_default(),
                        ])?;
                    }
                    staging.write("flows.csv", &flows.finish()?)?;

                    let mut dispatch =
                        CsvDoc::new(h, &["generator", "bus", "output_mw", "marginal_cost"])?;
                    for (g, mw) in case.generators.iter().zip(&opf.base.generation) {
                        dispatch.row([g.id.clone(), g.bus.clone(), sig6(*mw), sig6(g.cost)])?;
                    }
                    staging.write("dispatch.csv", &dispatch.finish()?)?;

                    let mut cont =
                        CsvDoc::new(h, &["outage", "status", "value_per_hour", "delta_per_hour"])?
                            .comment(unit_note);
                    cont.row([
                        "base".to_string(),
                        "ok".into(),
                        money(opf.base.value),
                        money(0.0),
                    ])?;
                    for c in &opf.contingencies {
                        let (v, d) = match &c.dispatch {
                            Some(d) => (money(d.value), money(d.value - opf.base.value)),
                            None => (String::new(), String::new()),
                        };
                        cont.row([c.line.clone(), c.status.to_string(), v, d])?;
                    }
                    staging.write("contingencies.csv", &cont.finish()?)?;
                }
                report.opf = Some(opf);
            }
            Command::Costs => {
                let costs = p.costs()?.clone();
                if csv {
                    let mut doc = CsvDoc::new(
                        h,
                        &[
                            "line",
                            "outage_value",
                            "base_value",
                            "repair_hours",
                            "repair_cost",
                            "cost",
                        ],
                    )?
                    .comment("cost = (outage_value - base_value) * repair_hours + repair_cost")
                    .comment(unit_note);
                    let mut plot = CsvDoc::new(h, &["line", "cost"])?.comment(unit_note);
                    for (i, line) in costs.lines.iter().enumerate() {
                        let c = costs.contingencies.as_ref().map(|v| &v[i]);
                        doc.row([
                            line.clone(),
                            c.map(|c| money(c.outage_value)).unwrap_or_default(),
                            costs.base_value.map(money).unwrap_or_default(),
                            c.map(|c| sig6(c.repair_hours)).unwrap_or_default(),
                            c.map(|c| money(c.repair_cost)).unwrap_or_default(),
                            money(costs.costs[i]),
                        ])?;
                        plot.row([line.clone(), money(costs.costs[i])])?;
                    }
                    staging.write("costs.csv", &doc.finish()?)?;
                    staging.write("costs_plot.csv", &plot.finish()?)?;
                }
                report.costs = Some(costs);
            }
            Command::Payoffs => {
                let m = p.payoffs()?.clone();
                if csv {
                    staging.write("payoffs.csv", &payoff_csv(h, &m, opts.thousands)?)?;
                }
                report.payoffs = Some(m);
            }
            Command::Ne => {
                let ne = p.ne()?.clone();
                let m = p.payoffs()?.clone();
                if csv {
                    let mut doc = CsvDoc::new(h, &["player", "strategy", "probability"])?;
                    for (l, q) in m
                        .defender_labels()
                        .iter()
                        .zip(ne.equilibrium.defender.probs())
                    {
                        doc.row(["defender", l.as_str(), &sig6(*q)])?;
                    }
                    for (l, q) in m
                        .attacker_labels()
                        .iter()
                        .zip(ne.equilibrium.attacker.probs())
                    {
                        doc.row(["attacker", l.as_str(), &sig6(*q)])?;
                    }
                    staging.write("ne.csv", &doc.finish()?)?;

                    let c = &ne.certificate;
                    let mut sum = CsvDoc::new(h, &["quantity", "value"])?
                        .comment(unit_note)
                        .comment(
                            "gains, maxmin and minmax are on the matrix scaled to unit max-entry",
                        );
                    sum.row(["defender_value", &money(ne.equilibrium.value)])?;
                    sum.row(["attacker_value", &money(-ne.equilibrium.value)])?;
                    sum.row(["defender_deviation_gain", &sig6(c.defender_gain)])?;
                    sum.row(["attacker_deviation_gain", &sig6(c.attacker_gain)])?;
                    sum.row(["maxmin", &sig6(c.maxmin)])?;
                    sum.row(["minmax", &sig6(c.minmax)])?;
                    staging.write("ne_summary.csv", &sum.finish()?)?;
                }
                report.ne = Some(ne);
            }
            Command::ChSweep => {
                let sw = p.sweep()?.clone();
                let m = p.payoffs()?.clone();
                if csv {
                    let dl = m.defender_labels();
                    let al = m.attacker_labels();
                    let join = |idx: &[usize], labels: &[String]| {
                        idx.iter()
                            .map(|&i| labels[i].as_str())
                            .collect::<Vec<_>>()
                            .join(";")
                    };
                    let mut doc = CsvDoc::new(
                        h,
                        &[
                            "tau",
                            "alpha0",
                            "alpha1",
                            "alpha2",
                            "ch_defense",
                            "ch_value",
                            "ne_value",
                            "gain",
                            "ch_tied",
                        ],
                    )?
                    .comment("alpha = (1, tau, tau^2) / (1 + tau + tau^2)")
                    .comment("gain = (ch_value - ne_value) / |ne_value|")
                    .comment(unit_note);
                    for r in &sw.rows {
                        doc.row([
                            sig6(r.tau),
                            sig6(r.alpha[0]),
                            sig6(r.alpha[1]),
                            sig6(r.alpha[2]),
                            dl[r.ch_defense].clone(),
                            money(r.ch_value),
                            money(r.ne_value),
                            sig6(r.gain),
                            if r.ch_tied.len() > 1 {
                                join(&r.ch_tied, dl)
                            } else {
                                String::new()
                            },
                        ])?;
                    }
                    staging.write("ch_sweep.csv", &doc.finish()?)?;

                    let mut lv =
                        CsvDoc::new(h, &["defense", "vs_level0", "vs_level1", "vs_level2"])?
                            .comment("defender expected utility against each attacker level")
                            .comment(unit_note);
                    for (l, u) in dl.iter().zip(&sw.level_utilities) {
                        lv.row([l.clone(), money(u[0]), money(u[1]), money(u[2])])?;
                    }
                    staging.write("level_responses.csv", &lv.finish()?)?;

                    let mut pol = CsvDoc::new(h, &["level", "rationale", "targets", "tie"])?;
                    for a in &sw.policies {
                        pol.row([
                            a.level.to_string(),
                            a.rationale.as_str().to_string(),
                            join(&a.tied, al),
                            a.is_tie().to_string(),
                        ])?;
                    }
                    staging.write("attacker_levels.csv", &pol.finish()?)?;

                    let mut cx = CsvDoc::new(h, &["tau"])?.comment(
                        "exact indifference points between the defenses chosen in the sweep",
                    );
                    for t in &sw.crossovers {
                        cx.row([sig6(*t)])?;
                    }
                    staging.write("crossover.csv", &cx.finish()?)?;
                }
                report.ch_sweep = Some(sw);
            }
            Command::All => unreachable!(),
        }
    }

    if opts.formats.contains(&Format::Json) {
        staging.write("report.json", &json(&report)?)?;
    }
    Ok(report)
}

/// Default output directory for a scenario when `--out` is not given.
pub fn default_out(s: &Scenario) -> PathBuf {
    RunOptions::from_scenario(s).out
}

pub fn load(path: &Path) -> Result<Scenario> {
    Ok(Scenario::load(path)?)
}
