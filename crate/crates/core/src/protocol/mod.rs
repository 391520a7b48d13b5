//! The assembled protocol: secret probe positions, state-weight estimation,
//! code sizing, likelihood encoding at Bob and MMI decoding at Alice.
//!
//! All shared secret randomness (probe positions, code index, the pad on the
//! broadcast estimate) comes from the per-trial seed. Its cost in bits is
//! accounted in [`ProtocolConfig::common_randomness_bits`].

pub mod derandomize;
mod exact;
mod metrics;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::StateDmc;
use crate::error::{check_open_unit_interval, check_unit_interval, Error, Result};
use crate::estimator::{
    choose_m, estimate_beta, halting_check, minimal_budget, select_positions, Baseline, EstimatorConfig, MSelection,
};
use crate::oneshot::{Codebook, CodebookShape, MAX_CODEBOOK_SYMBOLS};
use crate::probcore::{binary_entropy, kl, Pmf};
use crate::rates::HYPOTHESIS_TOL;
use crate::seeds::{derived_rng, Domain};

pub use exact::{covertness_kl, exact_protocol_metrics, induced_output_law, ExactProtocolMetrics};
pub use metrics::{evaluate, simulate, throughput_report, MetricsReport, Simulation, ThroughputReport};

/// Largest code-size exponent accepted for a fixed sizing.
const MAX_LOG_SIZE: u32 = 24;

/// Where the code sizes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MSource {
    /// The true state fraction on the coding positions.
    #[default]
    Oracle,
    /// The estimate computed from the probes.
    Estimated,
}

impl std::str::FromStr for MSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(MSource::Oracle),
            "estimated" => Ok(MSource::Estimated),
            other => Err(Error::Parse(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sizing {
    /// Sizes from the selection rule, trial by trial.
    #[default]
    Selected,
    /// The same sizes on every trial. The selection is still computed and recorded.
    Fixed { log_m1: u32, log_m2: u32, log_m3: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Coding length.
    pub n: usize,
    /// Probe budget. The smallest admissible one when absent.
    #[serde(default)]
    pub g: Option<usize>,
    pub alpha: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub mu: f64,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub mode: MSource,
    #[serde(default)]
    pub sizing: Sizing,
    /// Number of seeded codebooks `U`.
    pub codebooks: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Precondition("n must be positive".into()));
        }
        if self.codebooks == 0 {
            return Err(Error::Precondition("at least one codebook is needed".into()));
        }
        check_open_unit_interval("alpha", self.alpha)?;
        check_open_unit_interval("kappa", self.kappa)?;
        check_open_unit_interval("mu", self.mu)?;
        if !(self.zeta > 0.0) {
            return Err(Error::Domain {
                name: "zeta",
                value: self.zeta,
                domain: "(0, inf)",
            });
        }
        if let Sizing::Fixed { log_m1, log_m2, log_m3 } = self.sizing {
            for v in [log_m1, log_m2, log_m3] {
                if v > MAX_LOG_SIZE {
                    return Err(Error::SizeGuard {
                        what: "code size exponent",
                        required: v as u128,
                        limit: MAX_LOG_SIZE as u128,
                    });
                }
            }
        }
        Ok(())
    }

    /// `2 n^4 (n + 1)`, the family size above which a uniformly indexed
    /// family of codes is guaranteed to exist.
    pub fn derandomized_family_size(&self) -> f64 {
        let n = self.n as f64;
        2.0 * n.powi(4) * (n + 1.0)
    }

    /// Conditions that are relaxed at toy scale.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let needed = self.derandomized_family_size();
        if (self.codebooks as f64) <= needed {
            out.push(format!(
                "U = {} codebooks is not above 2 n^4 (n+1) = {needed}; running with the smaller family",
                self.codebooks
            ));
        }
        out
    }

    /// `log U + n' H_b(kappa) + ceil(log (g + 1))` bits: code index, probe
    /// positions and the pad on the probe hit count.
    pub fn common_randomness_bits(&self, g: usize) -> Result<f64> {
        let n_prime = (self.n + g) as f64;
        Ok((self.codebooks as f64).log2() + n_prime * binary_entropy(self.kappa)? + ((g + 1) as f64).log2().ceil())
    }
}

/// Warden state sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateGenerator {
    /// `floor(beta len)` ones at uniformly chosen positions.
    ConstantWeight {
        beta: f64,
    },
    /// Independent Bernoulli(`beta`) states.
    Iid {
        beta: f64,
    },
    Explicit {
        states: Vec<usize>,
    },
}

impl StateGenerator {
    pub fn generate(&self, len: usize, seed: u64) -> Result<Vec<usize>> {
        let mut rng = derived_rng(seed, Domain::State, 0);
        match self {
            StateGenerator::ConstantWeight { beta } => {
                check_unit_interval("beta", *beta)?;
                let weight = (beta * len as f64).floor() as usize;
                let mut s = vec![0; len];
                for i in sample(&mut rng, len, weight) {
                    s[i] = 1;
                }
                Ok(s)
            }
            StateGenerator::Iid { beta } => {
                check_unit_interval("beta", *beta)?;
                Ok((0..len).map(|_| usize::from(rng.random::<f64>() < *beta)).collect())
            }
            StateGenerator::Explicit { states } => {
                if states.len() != len {
                    return Err(Error::Shape(format!("{} states for {len} channel uses", states.len())));
                }
                check_states(states)?;
                Ok(states.clone())
            }
        }
    }
}

fn check_states(s: &[usize]) -> Result<()> {
    match s.iter().find(|&&v| v > 1) {
        Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, size: 2 }),
        None => Ok(()),
    }
}

/// Roles of the `n'` channel uses once the probes are known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub probes: Vec<usize>,
    /// The first `n` unprobed positions.
    pub code: Vec<usize>,
    pub idle: Vec<usize>,
}

impl Layout {
    pub(crate) fn new(probes: Vec<usize>, n: usize, n_prime: usize) -> Self {
        let mut code = Vec::with_capacity(n);
        let mut idle = Vec::new();
        let mut next = probes.iter().peekable();
        for i in 0..n_prime {
            if next.peek() == Some(&&i) {
                next.next();
            } else if code.len() < n {
                code.push(i);
            } else {
                idle.push(i);
            }
        }
        Self { probes, code, idle }
    }
}

/// One run of the protocol. Key fields are absent on halted runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub halted: bool,
    pub halt_reason: Option<String>,
    /// Number of probes `L`.
    pub probes: usize,
    pub probe_positions: Vec<usize>,
    /// Weight of the whole state sequence.
    pub state_weight: usize,
    /// State fraction on the coding positions.
    pub beta_true: Option<f64>,
    /// Raw estimate, not clamped.
    pub beta_hat: Option<f64>,
    pub selection: Option<MSelection>,
    pub selection_note: Option<String>,
    /// Estimated mode only: the selection equals the oracle's.
    pub matches_oracle: Option<bool>,
    pub code_index: Option<usize>,
    pub key_bits: Option<u32>,
    pub w1: Option<usize>,
    pub w2: Option<usize>,
    pub w1_hat: Option<usize>,
    pub key_match: Option<bool>,
    pub fallback_used: Option<bool>,
}

impl TrialOutcome {
    fn halted(trial: u64, probes: Vec<usize>, state_weight: usize, reason: String) -> Self {
        Self {
            trial,
            halted: true,
            halt_reason: Some(reason),
            probes: probes.len(),
            probe_positions: probes,
            state_weight,
            beta_true: None,
            beta_hat: None,
            selection: None,
            selection_note: None,
            matches_oracle: None,
            code_index: None,
            key_bits: None,
            w1: None,
            w2: None,
            w1_hat: None,
            key_match: None,
            fallback_used: None,
        }
    }
}

/// A trial with the warden's observation and the covertness cost of its layout.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TrialDetail {
    pub outcome: TrialOutcome,
    pub z: Vec<usize>,
    /// `D(P_{Z|J} || prod Q_0^{s_i})` in bits for the realized probe set.
    pub layout_kl: f64,
}

/// A validated protocol instance over a fixed channel.
#[derive(Debug, Clone)]
pub struct Protocol<'a> {
    ch: &'a StateDmc,
    cfg: ProtocolConfig,
    est: EstimatorConfig,
    qy: Pmf,
    mu0_channel: f64,
    fixed: Option<Vec<Codebook>>,
    /// `D(Q_1^s || Q_0^s)` and `D(Q_alpha^s || Q_0^s)` per state.
    letter_kl: [[f64; 2]; 2],
}

impl<'a> Protocol<'a> {
    pub fn new(ch: &'a StateDmc, cfg: ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let hyp = ch.validate_hypotheses(HYPOTHESIS_TOL)?;
        if !hyp.active_hypotheses_hold() {
            return Err(Error::DegenerateChannel(hyp.failures().join("; ")));
        }
        let g = match cfg.g {
            Some(g) => g,
            None => minimal_budget(cfg.n, cfg.kappa, cfg.mu)?,
        };
        let est = EstimatorConfig::with_budget(ch, cfg.n, g, cfg.kappa, cfg.mu, cfg.baseline)?;
        let qy = ch.marginal_p(0, 0);
        let mu0_channel = qy.mass().iter().copied().filter(|&m| m > 0.0).fold(1.0, f64::min);
        check_open_unit_interval("smallest positive P_0(y)", mu0_channel)?;
        let mut letter_kl = [[0.0; 2]; 2];
        for (s, row) in letter_kl.iter_mut().enumerate() {
            let q0 = ch.marginal_q(0, s);
            let q1 = ch.marginal_q(1, s);
            *row = [kl(&q1, &q0)?, kl(&q0.mix(&q1, cfg.alpha)?, &q0)?];
        }
        let mut protocol = Self {
            ch,
            cfg,
            est,
            qy,
            mu0_channel,
            fixed: None,
            letter_kl,
        };
        if let Some(shape) = protocol.fixed_shape()? {
            let total = shape.symbols().saturating_mul(protocol.cfg.codebooks as u128);
            if total > MAX_CODEBOOK_SYMBOLS {
                return Err(Error::SizeGuard {
                    what: "symbols over all codebooks",
                    required: total,
                    limit: MAX_CODEBOOK_SYMBOLS,
                });
            }
            let books = (0..protocol.cfg.codebooks)
                .map(|k| protocol.codebook(k, shape))
                .collect::<Result<Vec<_>>>()?;
            protocol.fixed = Some(books);
        }
        Ok(protocol)
    }

    pub fn channel(&self) -> &StateDmc {
        self.ch
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn estimator(&self) -> &EstimatorConfig {
        &self.est
    }

    pub fn n_prime(&self) -> usize {
        self.est.n_prime()
    }

    /// Smallest positive Bob output probability at input 0, used by the sizing rule.
    pub fn mu0_channel(&self) -> f64 {
        self.mu0_channel
    }

    pub fn codebook_law(&self) -> &Pmf {
        &self.qy
    }

    pub fn common_randomness_bits(&self) -> Result<f64> {
        self.cfg.common_randomness_bits(self.est.g)
    }

    pub fn fixed_shape(&self) -> Result<Option<CodebookShape>> {
        match self.cfg.sizing {
            Sizing::Selected => Ok(None),
            Sizing::Fixed { log_m1, log_m2, log_m3 } => {
                CodebookShape::new(self.cfg.n, 1 << log_m1, 1 << log_m2, 1 << log_m3).map(Some)
            }
        }
    }

    /// Codebook `k` of the given shape.
    pub fn codebook(&self, k: usize, shape: CodebookShape) -> Result<Codebook> {
        if let (Some(books), Ok(Some(fixed))) = (&self.fixed, self.fixed_shape()) {
            if fixed == shape {
                return Ok(books[k].clone());
            }
        }
        Codebook::generate(
            &self.qy,
            shape,
            &mut derived_rng(self.cfg.seed, Domain::Codebook, k as u64),
        )
    }

    fn fixed_book(&self, k: usize, shape: CodebookShape) -> Result<std::borrow::Cow<'_, Codebook>> {
        match &self.fixed {
            Some(books) => Ok(std::borrow::Cow::Borrowed(&books[k])),
            None => self.codebook(k, shape).map(std::borrow::Cow::Owned),
        }
    }

    pub(crate) fn check_state_sequence(&self, s: &[usize]) -> Result<()> {
        if s.len() != self.n_prime() {
            return Err(Error::Shape(format!(
                "state sequence of length {} for n' = {}",
                s.len(),
                self.n_prime()
            )));
        }
        check_states(s)
    }

    fn select(&self, beta: f64) -> Result<MSelection> {
        choose_m(
            self.ch,
            beta,
            self.cfg.zeta,
            self.cfg.alpha,
            self.cfg.n,
            self.mu0_channel,
        )
    }

    /// Runs trial `trial` on its own derived stream.
    pub fn run_trial(&self, s: &[usize], trial: u64) -> Result<TrialOutcome> {
        self.check_state_sequence(s)?;
        self.trial_detail(s, trial).map(|d| d.outcome)
    }

    pub(crate) fn trial_detail(&self, s: &[usize], trial: u64) -> Result<TrialDetail> {
        let mut rng = derived_rng(self.cfg.seed, Domain::Trial, trial);
        let n_prime = self.n_prime();
        let weight = s.iter().sum();
        let probes = select_positions(n_prime, self.cfg.kappa, &mut rng)?;
        if halting_check(probes.len(), self.est.g) {
            let reason = format!("{} probes exceed the budget g = {}", probes.len(), self.est.g);
            return Ok(TrialDetail {
                outcome: TrialOutcome::halted(trial, probes, weight, reason),
                z: vec![0; 0],
                layout_kl: 0.0,
            });
        }
        let layout = Layout::new(probes, self.cfg.n, n_prime);
        let mut x = vec![0; n_prime];
        for &j in &layout.probes {
            x[j] = 1;
        }
        for &i in &layout.code {
            x[i] = usize::from(rng.random::<f64>() < self.cfg.alpha);
        }
        let (y, z) = self.ch.sample(&x, s, &mut rng)?;
        let layout_kl = layout.probes.iter().map(|&j| self.letter_kl[s[j]][0]).sum::<f64>()
            + layout.code.iter().map(|&i| self.letter_kl[s[i]][1]).sum::<f64>();

        let probe_y: Vec<usize> = layout.probes.iter().map(|&j| y[j]).collect();
        let beta_hat = estimate_beta(&probe_y, &self.est.probe);
        let beta_true = layout.code.iter().map(|&i| s[i]).sum::<usize>() as f64 / self.cfg.n as f64;

        let oracle = self.select(beta_true);
        let chosen = match self.cfg.mode {
            MSource::Oracle => oracle.clone(),
            MSource::Estimated => self.select(beta_hat),
        };
        let matches_oracle = match (self.cfg.mode, &oracle, &chosen) {
            (MSource::Oracle, _, _) => None,
            (MSource::Estimated, Ok(a), Ok(b)) => Some(sizes(a) == sizes(b)),
            (MSource::Estimated, Err(_), Err(_)) => Some(true),
            _ => Some(false),
        };
        let (selection, selection_note) = match chosen {
            Ok(sel) => (Some(sel), None),
            Err(e @ Error::InfeasibleSelection(_)) => (None, Some(e.to_string())),
            // fixed sizes do not depend on the selection, which is only recorded
            Err(e) if self.fixed.is_some() => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };

        let mut outcome = TrialOutcome::halted(trial, layout.probes.clone(), weight, String::new());
        outcome.beta_true = Some(beta_true);
        outcome.beta_hat = Some(beta_hat);
        outcome.selection = selection;
        outcome.selection_note = selection_note.clone();
        outcome.matches_oracle = matches_oracle;

        let shape = match (self.fixed_shape()?, &selection) {
            (Some(shape), _) => shape,
            (None, Some(sel)) => CodebookShape::new(
                self.cfg.n,
                size_of(sel.log_m1)?,
                size_of(sel.log_m2)?,
                size_of(sel.log_m3)?,
            )?,
            (None, None) => {
                outcome.halt_reason = selection_note;
                return Ok(TrialDetail { outcome, z, layout_kl });
            }
        };
        let k = rng.random_range(0..self.cfg.codebooks);
        let cb = self.fixed_book(k, shape)?;
        let y_code: Vec<usize> = layout.code.iter().map(|&i| y[i]).collect();
        let x_code: Vec<usize> = layout.code.iter().map(|&i| x[i]).collect();
        let enc = cb.likelihood_encode(&y_code, &mut rng)?;
        let w1_hat = cb.mmi_decode(&x_code, enc.w2)?;

        outcome.halted = false;
        outcome.halt_reason = None;
        outcome.code_index = Some(k);
        outcome.key_bits = Some(shape.m1.trailing_zeros());
        outcome.w1 = Some(enc.w1);
        outcome.w2 = Some(enc.w2);
        outcome.w1_hat = Some(w1_hat);
        outcome.key_match = Some(enc.w1 == w1_hat);
        outcome.fallback_used = Some(enc.fallback);
        Ok(TrialDetail { outcome, z, layout_kl })
    }
}

fn sizes(sel: &MSelection) -> (u32, u32, u32) {
    (sel.log_m1, sel.log_m2, sel.log_m3)
}

fn size_of(log: u32) -> Result<usize> {
    if log > MAX_LOG_SIZE {
        return Err(Error::SizeGuard {
            what: "selected code size exponent",
            required: log as u128,
            limit: MAX_LOG_SIZE as u128,
        });
    }
    Ok(1 << log)
}

/// One trial with the stream derived from `cfg.seed` and `trial`.
pub fn run_trial(ch: &StateDmc, s: &[usize], cfg: &ProtocolConfig, trial: u64) -> Result<TrialOutcome> {
    Protocol::new(ch, cfg.clone())?.run_trial(s, trial)
}
