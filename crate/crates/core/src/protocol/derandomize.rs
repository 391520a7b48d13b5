//! Replacing the random code by a small uniformly indexed family. `L` codes
//! drawn from the family keep the averaged error and secrecy below `eps'`
//! for every state sequence with probability at least
//! `1 - 2^n 2^(-L (eps' - log(1 + eps)) + 1)`, where `eps` bounds the
//! family-wide averages.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::StateDmc;
use crate::error::{Error, Result};
use crate::oneshot::exact::{exact_induced_joint, LetterSource};
use crate::oneshot::{Codebook, CodebookShape, Score};
use crate::seeds::{derived_rng, Domain};

/// Codebooks `0..size` of one shape, codebook `k` drawn from `P_0` on stream `k` of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeFamily {
    pub shape: CodebookShape,
    /// Input weight on the coding positions.
    pub alpha: f64,
    pub seed: u64,
    pub size: usize,
}

impl CodeFamily {
    pub fn codebook(&self, ch: &StateDmc, k: usize) -> Result<Codebook> {
        if k >= self.size {
            return Err(Error::SymbolOutOfRange {
                symbol: k,
                size: self.size,
            });
        }
        Codebook::generate(
            &ch.marginal_p(0, 0),
            self.shape,
            &mut derived_rng(self.seed, Domain::Codebook, k as u64),
        )
    }
}

/// Exact error probability and secrecy distance of every code on every state sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyTable {
    /// `error[k][j]` for code `k` and state sequence `j`.
    pub error: Vec<Vec<f64>>,
    pub secrecy: Vec<Vec<f64>>,
}

impl FamilyTable {
    pub fn new(error: Vec<Vec<f64>>, secrecy: Vec<Vec<f64>>) -> Result<Self> {
        let states = error.first().map_or(0, Vec::len);
        if error.is_empty() || states == 0 {
            return Err(Error::Precondition("empty code family or state set".into()));
        }
        if secrecy.len() != error.len() || error.iter().chain(&secrecy).any(|row| row.len() != states) {
            return Err(Error::Shape("error and secrecy tables differ in shape".into()));
        }
        Ok(Self { error, secrecy })
    }

    pub fn codes(&self) -> usize {
        self.error.len()
    }

    pub fn states(&self) -> usize {
        self.error[0].len()
    }

    /// Averages of the chosen codes, per state sequence.
    pub fn averages(&self, codes: &[usize]) -> Vec<StateAverage> {
        let l = codes.len() as f64;
        (0..self.states())
            .map(|j| StateAverage {
                error: codes.iter().map(|&k| self.error[k][j]).sum::<f64>() / l,
                secrecy: codes.iter().map(|&k| self.secrecy[k][j]).sum::<f64>() / l,
            })
            .collect()
    }

    /// Largest family-wide average over state sequences and the two metrics.
    pub fn epsilon(&self) -> f64 {
        let all: Vec<usize> = (0..self.codes()).collect();
        self.averages(&all)
            .iter()
            .map(|a| a.error.max(a.secrecy))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateAverage {
    pub error: f64,
    pub secrecy: f64,
}

/// Sufficient conditions for a random choice of `L` codes to work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsetConditions {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub subset_size: usize,
    /// Coding length.
    pub n: usize,
    /// `eps' > 2 log(1 + eps)`.
    pub margin_holds: bool,
    /// `L > 2 (1 + n) / eps'`.
    pub size_holds: bool,
    /// `2^n 2^(-L (eps' - log(1 + eps)) + 1)`; vacuous when at least 1.
    pub failure_bound: f64,
}

impl SubsetConditions {
    pub fn new(epsilon: f64, epsilon_prime: f64, subset_size: usize, n: usize) -> Self {
        let slack = epsilon_prime - (1.0 + epsilon).log2();
        Self {
            epsilon,
            epsilon_prime,
            subset_size,
            n,
            margin_holds: epsilon_prime > 2.0 * (1.0 + epsilon).log2(),
            size_holds: subset_size as f64 > 2.0 * (1.0 + n as f64) / epsilon_prime,
            failure_bound: (n as f64 - subset_size as f64 * slack + 1.0).exp2(),
        }
    }

    pub fn hold(&self) -> bool {
        self.margin_holds && self.size_holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerandomizeConfig {
    pub subset_size: usize,
    pub epsilon_prime: f64,
    pub max_attempts: usize,
    /// Refuse to search when the sufficient conditions fail.
    pub enforce_conditions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerandomizeOutcome {
    /// Family indices, possibly repeated.
    pub selected: Vec<usize>,
    /// Attempts used, counting the successful one.
    pub attempts: usize,
    pub conditions: SubsetConditions,
    pub per_state: Vec<StateAverage>,
    pub max_error: f64,
    pub max_secrecy: f64,
}

fn letter_source(ch: &StateDmc, family: &CodeFamily, states: &[usize]) -> Result<LetterSource> {
    if states.len() != family.shape.n {
        return Err(Error::Shape(format!(
            "state sequence of length {} for codes of length {}",
            states.len(),
            family.shape.n
        )));
    }
    LetterSource::from_channel(ch, &vec![family.alpha; states.len()], states)
}

/// Evaluates every code of the family on every state sequence exactly.
pub fn evaluate_family(ch: &StateDmc, family: &CodeFamily, states: &[Vec<usize>]) -> Result<FamilyTable> {
    let sources = states
        .iter()
        .map(|s| letter_source(ch, family, s))
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..family.size)
        .into_par_iter()
        .map(|k| {
            let cb = family.codebook(ch, k)?;
            let mut err = Vec::with_capacity(sources.len());
            let mut sec = Vec::with_capacity(sources.len());
            for src in &sources {
                let ev = exact_induced_joint(&cb, src, &Score::EmpiricalMi)?;
                err.push(ev.error_probability);
                sec.push(ev.secrecy_tv);
            }
            Ok((err, sec))
        })
        .collect::<Result<Vec<_>>>()?;
    let (error, secrecy) = rows.into_iter().unzip();
    FamilyTable::new(error, secrecy)
}

fn draw_subset(size: usize, l: usize, seed: u64, attempt: usize) -> Vec<usize> {
    let mut rng = derived_rng(seed, Domain::Derandomize, attempt as u64);
    (0..l).map(|_| rng.random_range(0..size)).collect()
}

fn max_averages(avg: &[StateAverage]) -> (f64, f64) {
    avg.iter()
        .fold((0.0, 0.0), |(e, s), a| (f64::max(e, a.error), f64::max(s, a.secrecy)))
}

/// Draws `L` codes uniformly with replacement until both averaged
/// constraints hold on every state sequence, up to `max_attempts` draws.
pub fn search(table: &FamilyTable, n: usize, cfg: &DerandomizeConfig, seed: u64) -> Result<DerandomizeOutcome> {
    if cfg.subset_size == 0 || cfg.max_attempts == 0 {
        return Err(Error::Precondition(
            "subset size and attempt cap must be positive".into(),
        ));
    }
    if !(cfg.epsilon_prime > 0.0) {
        return Err(Error::Domain {
            name: "epsilon_prime",
            value: cfg.epsilon_prime,
            domain: "(0, inf)",
        });
    }
    let conditions = SubsetConditions::new(table.epsilon(), cfg.epsilon_prime, cfg.subset_size, n);
    if cfg.enforce_conditions && !conditions.hold() {
        return Err(Error::Precondition(format!(
            "eps' = {} and L = {} miss the sufficient conditions for eps = {} (margin {}, size {})",
            cfg.epsilon_prime, cfg.subset_size, conditions.epsilon, conditions.margin_holds, conditions.size_holds
        )));
    }
    let (mut error_violations, mut secrecy_violations) = (0usize, 0usize);
    for attempt in 0..cfg.max_attempts {
        let selected = draw_subset(table.codes(), cfg.subset_size, seed, attempt);
        let per_state = table.averages(&selected);
        let (max_error, max_secrecy) = max_averages(&per_state);
        let error_ok = max_error <= cfg.epsilon_prime;
        let secrecy_ok = max_secrecy <= cfg.epsilon_prime;
        if error_ok && secrecy_ok {
            return Ok(DerandomizeOutcome {
                selected,
                attempts: attempt + 1,
                conditions,
                per_state,
                max_error,
                max_secrecy,
            });
        }
        error_violations += usize::from(!error_ok);
        secrecy_violations += usize::from(!secrecy_ok);
    }
    let rate = |v: usize| v as f64 / cfg.max_attempts as f64;
    Err(Error::SearchFailure {
        attempts: cfg.max_attempts,
        detail: format!(
            "error constraint violated on {:.3} of attempts, secrecy constraint on {:.3}",
            rate(error_violations),
            rate(secrecy_violations)
        ),
    })
}

/// Evaluates the family and searches it for a working subset.
pub fn derandomize(
    ch: &StateDmc,
    family: &CodeFamily,
    states: &[Vec<usize>],
    cfg: &DerandomizeConfig,
    seed: u64,
) -> Result<DerandomizeOutcome> {
    let table = evaluate_family(ch, family, states)?;
    search(&table, family.shape.n, cfg, seed)
}

/// Fraction of `draws` random subsets of size `L` meeting both constraints.
pub fn success_frequency(table: &FamilyTable, subset_size: usize, epsilon_prime: f64, draws: usize, seed: u64) -> f64 {
    let ok = (0..draws)
        .filter(|&a| {
            let (e, s) = max_averages(&table.averages(&draw_subset(table.codes(), subset_size, seed, a)));
            e <= epsilon_prime && s <= epsilon_prime
        })
        .count();
    ok as f64 / draws.max(1) as f64
}

/// Regenerates the selected codes and recomputes their averages from scratch.
pub fn verify_subset(
    ch: &StateDmc,
    family: &CodeFamily,
    states: &[Vec<usize>],
    selected: &[usize],
) -> Result<Vec<StateAverage>> {
    let l = selected.len() as f64;
    states
        .iter()
        .map(|s| {
            let src = letter_source(ch, family, s)?;
            let (mut error, mut secrecy) = (0.0, 0.0);
            for &k in selected {
                let ev = exact_induced_joint(&family.codebook(ch, k)?, &src, &Score::EmpiricalMi)?;
                error += ev.error_probability / l;
                secrecy += ev.secrecy_tv / l;
            }
            Ok(StateAverage { error, secrecy })
        })
        .collect()
}
