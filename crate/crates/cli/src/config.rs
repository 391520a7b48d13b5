//! Run configuration files.

use std::path::{Path, PathBuf};

use covert_skg::concentration::Lemma1Cell;
use covert_skg::estimator::Baseline;
use covert_skg::protocol::{ProtocolConfig, StateGenerator};
use covert_skg::StateDmc;
use serde::Deserialize;

use crate::failure::Failure;

/// Top-level run config. Every section is optional; each command reads the ones it needs.
///
/// ```toml
/// channel = "channel.toml"
/// seed = 7
///
/// [protocol]
/// n = 4
/// alpha = 0.3
/// kappa = 0.1
/// zeta = 0.1
/// mu = 0.5
/// codebooks = 4
/// sizing = { kind = "fixed", log_m1 = 1, log_m2 = 1, log_m3 = 0 }
///
/// [states]
/// kind = "constant-weight"
/// beta = 0.5
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Channel spec path, relative to the config file.
    pub channel: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub protocol: Option<ProtocolConfig>,
    pub states: Option<StateGenerator>,
    #[serde(default)]
    pub lemma1: Lemma1Section,
    #[serde(default)]
    pub oneshot: OneShotSection,
    #[serde(default)]
    pub estimate_beta: EstimateSection,
    pub derandomize: Option<DerandomizeSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Section {
    pub cells: Option<Vec<Lemma1Cell>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneShotSection {
    /// `(m1, m2)` pairs.
    pub grid: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub baseline: Baseline,
    /// State fraction of the probed sequence.
    pub beta: f64,
    pub length: usize,
    pub lambdas: Vec<f64>,
    pub probes: Vec<usize>,
    /// `(n, kappa, mu)` cells for the halting check.
    pub halting: Vec<(usize, f64, f64)>,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            baseline: Baseline::CrossState,
            beta: 0.3,
            length: 4_000,
            lambdas: vec![0.05, 0.1, 0.2],
            probes: vec![100, 1_000],
            halting: vec![(1_000, 0.05, 0.5), (400, 0.1, 0.5)],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerandomizeSection {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    #[serde(default = "one")]
    pub m3: usize,
    pub alpha: f64,
    pub family: usize,
    pub subset_size: usize,
    pub epsilon_prime: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    #[serde(default)]
    pub enforce_conditions: bool,
    /// Every sequence of length `n` when absent.
    pub states: Option<Vec<Vec<usize>>>,
}

fn one() -> usize {
    1
}

fn default_attempts() -> usize {
    200
}

impl RunConfig {
    /// Reads a config file and resolves its channel path against the file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
        if let (Some(ch), Some(dir)) = (&cfg.channel, path.parent()) {
            cfg.channel = Some(dir.join(ch));
        }
        Ok(cfg)
    }
}

pub fn load_channel(path: &Path) -> Result<StateDmc, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    StateDmc::from_spec_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}
