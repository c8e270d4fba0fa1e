//! Scenario file: one TOML document drives every command.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use gridsec::hierarchy::{Spacing, TauGrid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// A probability written as a number or as a fraction string like `"1/12"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probability(pub f64);

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let v = match Raw::deserialize(d)? {
            Raw::Num(x) => x,
            Raw::Text(s) => parse_fraction(&s).map_err(serde::de::Error::custom)?,
        };
        if !(0.0..=1.0).contains(&v) {
            return Err(serde::de::Error::custom(format!(
                "probability {v} outside [0, 1]"
            )));
        }
        Ok(Probability(v))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let bad = || format!("`{s}` is not a number or a fraction a/b");
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Grid case file, relative to the scenario file.
    pub grid: Option<PathBuf>,
    /// Payoff matrix CSV to use instead of building one.
    pub payoffs: Option<PathBuf>,
    pub cyber: Option<CyberSection>,
    pub interconnection: Option<InterconnectionSection>,
    #[serde(default)]
    pub strategies: Vec<StrategyEntry>,
    /// Attacker strategies, when they differ from the defender's.
    pub attacker_strategies: Option<Vec<StrategyEntry>>,
    pub costs: Option<CostOverride>,
    pub perception: Option<PerceptionOverride>,
    pub tau: Option<TauSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CyberSection {
    /// Nodes are named `c1..c<nodes>`.
    pub nodes: usize,
    pub baseline: Probability,
    /// Per-node baseline overrides.
    #[serde(default)]
    pub overrides: BTreeMap<String, Probability>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "rule", rename_all = "lowercase")]
pub enum InterconnectionSection {
    Fixed {
        local: f64,
        remote: f64,
        /// Line id -> its two local cyber nodes; defaults to the labelled
        /// strategies.
        local_map: Option<BTreeMap<String, Vec<String>>>,
    },
    Shared {
        local_share: f64,
        local_map: Option<BTreeMap<String, Vec<String>>>,
    },
    /// Verbatim matrix, one row per cyber node, one column per line.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyEntry {
    pub label: Option<String>,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CostOverride {
    /// Component ids, needed when there is no grid.
    pub lines: Option<Vec<String>>,
    pub values: Vec<f64>,
}

/// What level-1 and level-2 attackers see, if not the computed values.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionOverride {
    pub lines: Option<Vec<String>>,
    pub flows: Option<Vec<f64>>,
    pub costs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TauSection {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

impl TauSection {
    pub fn grid(&self) -> Result<TauGrid, ConfigError> {
        TauGrid::new(self.min, self.max, self.count, self.spacing)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Default output directory, relative to the scenario file.
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Report currency in thousands, as the published tables do.
    #[serde(default)]
    pub thousands: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
            thousands: false,
        }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

/// A parsed scenario plus where it came from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub path: PathBuf,
    pub base_dir: PathBuf,
    /// SHA-256 over the scenario file and every input it references.
    pub hash: String,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref().to_path_buf();
        let bytes = read(&path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| ConfigError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let config: ScenarioConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));

        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let mut inputs = Vec::new();
        for rel in [&config.grid, &config.payoffs].into_iter().flatten() {
            let data = read(&base_dir.join(rel))?;
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update(&data);
            inputs.push(InputDigest {
                path: rel.to_string_lossy().into_owned(),
                sha256: format!("{:x}", Sha256::digest(&data)),
            });
        }
        let scenario = Self {
            config,
            path,
            base_dir,
            hash: format!("{:x}", hasher.finalize()),
            inputs,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        if let Some(t) = &c.tau {
            t.grid()?;
        }
        if c.output.formats.is_empty() {
            return Err(ConfigError::Invalid("output.formats is empty".into()));
        }
        let strategies = || {
            c.strategies
                .iter()
                .chain(c.attacker_strategies.iter().flatten())
        };
        match &c.cyber {
            Some(cyber) => {
                if cyber.nodes == 0 {
                    return Err(ConfigError::Invalid(
                        "cyber.nodes must be at least 1".into(),
                    ));
                }
                let known = |id: &str| node_index(id, cyber.nodes).is_some();
                if let Some(id) = cyber.overrides.keys().find(|id| !known(id)) {
                    return Err(ConfigError::Invalid(format!(
                        "override for unknown node `{id}`"
                    )));
                }
                for s in strategies() {
                    if let Some(bad) = s.nodes.iter().find(|n| !known(n)) {
                        return Err(ConfigError::Invalid(format!(
                            "strategy {:?} references undeclared node `{bad}`",
                            s.label
                        )));
                    }
                }
            }
            None if strategies().next().is_some() => {
                return Err(ConfigError::Invalid(
                    "strategies are declared but there is no [cyber] section".into(),
                ));
            }
            None => {}
        }
        if c.grid.is_none() && c.costs.as_ref().is_some_and(|k| k.lines.is_none()) {
            return Err(ConfigError::Invalid(
                "without a grid, costs.lines must name the physical components".into(),
            ));
        }
        Ok(())
    }

    /// Baseline failure probability per cyber node.
    pub fn baseline(&self) -> Option<Vec<f64>> {
        let cyber = self.config.cyber.as_ref()?;
        let mut v = vec![cyber.baseline.0; cyber.nodes];
        for (id, p) in &cyber.overrides {
            v[node_index(id, cyber.nodes)?] = p.0;
        }
        Some(v)
    }

    /// Local map given explicitly, or derived from the labelled strategies.
    pub fn local_map(&self) -> HashMap<String, Vec<String>> {
        let explicit = match &self.config.interconnection {
            Some(InterconnectionSection::Fixed { local_map, .. })
            | Some(InterconnectionSection::Shared { local_map, .. }) => local_map.clone(),
            _ => None,
        };
        match explicit {
            Some(m) => m.into_iter().collect(),
            None => self
                .config
                .strategies
                .iter()
                .filter_map(|s| Some((s.label.clone()?, s.nodes.clone())))
                .collect(),
        }
    }
}

/// `c7` -> 6 when within range.
pub fn node_index(id: &str, n: usize) -> Option<usize> {
    let k: usize = id.strip_prefix('c')?.parse().ok()?;
    (1..=n).contains(&k).then(|| k - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("1/12").unwrap(), 1.0 / 12.0);
        assert_eq!(parse_fraction(" 0.5 ").unwrap(), 0.5);
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("one").is_err());
    }

    #[test]
    fn node_names() {
        assert_eq!(node_index("c1", 12), Some(0));
        assert_eq!(node_index("c12", 12), Some(11));
        assert_eq!(node_index("c13", 12), None);
        assert_eq!(node_index("c0", 12), None);
        assert_eq!(node_index("x1", 12), None);
    }

    #[test]
    fn probability_range_checked() {
        #[derive(Deserialize)]
        struct W {
            p: Probability,
        }
        assert!(toml::from_str::<W>("p = \"3/2\"").is_err());
        assert_eq!(toml::from_str::<W>("p = \"1/4\"").unwrap().p.0, 0.25);
        assert_eq!(toml::from_str::<W>("p = 0.5").unwrap().p.0, 0.5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "bogus = 1\n[tau]\nmin = 0.1\nmax = 1.0\ncount = 2\n";
        assert!(toml::from_str::<ScenarioConfig>(text).is_err());
    }
}
