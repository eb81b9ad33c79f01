use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::{BanditGenConfig, MdpGenConfig};
use crate::error::{check_confidence, Error, Result};
use crate::mdp::BetaForm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bandit,
    Mdp,
}

/// Which learner each seed runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    /// ABL or ARL over the whole family.
    #[default]
    Adaptive,
    /// The base algorithm on the smallest realizable class.
    Oracle,
    /// The base algorithm on the largest class.
    Largest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `C_1` for bandits, `C_2` for MDPs.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Rounds `T` for bandits, episodes `K` for MDPs.
    pub horizon: usize,
    #[serde(default)]
    pub beta_form: BetaForm,
}

fn default_delta() -> f64 {
    0.1
}

fn default_slack() -> f64 {
    0.25
}

fn default_seeds() -> usize {
    1
}

fn default_epsilon() -> f64 {
    0.5
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            slack: default_slack(),
            horizon: 1024,
            beta_form: BetaForm::Finite,
        }
    }
}

/// One experiment: an instance (generated or loaded), a learner, and a set
/// of seeded runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub learner: Learner,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// JSON instance to load instead of generating one.
    #[serde(default)]
    pub instance_file: Option<PathBuf>,
    /// Add eluder-dimension and entropy reports for each class to the summary.
    #[serde(default)]
    pub report_complexity: bool,
    #[serde(default = "default_epsilon")]
    pub eluder_epsilon: f64,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub bandit: Option<BanditGenConfig>,
    #[serde(default)]
    pub mdp: Option<MdpGenConfig>,
}

impl ExperimentConfig {
    pub fn bandit(generator: BanditGenConfig, algorithm: AlgorithmConfig) -> Self {
        Self::with_mode(Mode::Bandit, algorithm, Some(generator), None)
    }

    pub fn mdp(generator: MdpGenConfig, algorithm: AlgorithmConfig) -> Self {
        Self::with_mode(Mode::Mdp, algorithm, None, Some(generator))
    }

    fn with_mode(mode: Mode, algorithm: AlgorithmConfig, bandit: Option<BanditGenConfig>, mdp: Option<MdpGenConfig>) -> Self {
        Self {
            mode,
            learner: Learner::Adaptive,
            seeds: 1,
            root_seed: 0,
            out: None,
            instance_file: None,
            report_complexity: false,
            eluder_epsilon: default_epsilon(),
            algorithm,
            bandit,
            mdp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_confidence(self.algorithm.delta)?;
        if self.algorithm.horizon < 2 {
            return Err(Error::config("algorithm.horizon must be at least 2"));
        }
        if !(self.algorithm.slack >= 0.0) {
            return Err(Error::config("algorithm.slack must be nonnegative"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds must be at least 1"));
        }
        if !(self.eluder_epsilon > 0.0) {
            return Err(Error::config("eluder_epsilon must be positive"));
        }
        if self.instance_file.is_none() {
            match self.mode {
                Mode::Bandit if self.bandit.is_none() => {
                    return Err(Error::config("bandit mode needs a [bandit] section or instance_file"))
                }
                Mode::Mdp if self.mdp.is_none() => {
                    return Err(Error::config("mdp mode needs an [mdp] section or instance_file"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Parse TOML text, apply `key=value` overrides (dotted keys address
    /// nested tables; values are TOML literals, or bare strings), then
    /// validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cursor = table;
    for p in parents {
        let entry = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
