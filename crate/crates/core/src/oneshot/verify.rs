//! Averages exact per-codebook error and secrecy over random codebooks and
//! compares them with the closed-form bounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::probcore::Pmf;
use crate::report::{MeanAccumulator, Verdict};
use crate::seeds::{derived_rng, Domain};

use super::bounds::{best_delta, best_gamma, reliability_bound_rhs, secrecy_bound_rhs, OneShotParams};
use super::exact::{exact_induced_joint, LetterSource};
use super::{Codebook, CodebookShape, Score};

const DELTA_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub m1: usize,
    pub m2: usize,
    /// Chosen to minimize the secrecy bound when absent.
    pub gamma: Option<f64>,
    /// Chosen to minimize both bounds when absent.
    pub delta: Option<f64>,
    pub codebook_draws: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneShotReport {
    pub m1: usize,
    pub m2: usize,
    pub gamma: f64,
    pub delta: Option<f64>,
    pub codebook_draws: u64,
    /// No admissible `delta` exists, so both bounds are the trivial value 1.
    pub trivial_bound: bool,
    pub mean_fallback: f64,
    pub error: Verdict,
    pub secrecy: Verdict,
}

impl OneShotReport {
    pub fn pass(&self) -> bool {
        self.error.pass && self.secrecy.pass
    }
}

/// The default one-shot source: `X` uniform, `Y` is `X` through BSC(0.1) and
/// `Z` is `Y` through BSC(0.3).
pub fn default_oneshot_source() -> LetterSource {
    let mut joint = vec![0.0; 8];
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                let py = if x == y { 0.9 } else { 0.1 };
                let pz = if y == z { 0.7 } else { 0.3 };
                joint[(x * 2 + y) * 2 + z] = 0.5 * py * pz;
            }
        }
    }
    LetterSource::single(2, 2, 2, joint).expect("valid source")
}

/// The `(m1, m2)` grid `{2, 4} x {2, 4}`.
pub fn default_oneshot_grid() -> Vec<(usize, usize)> {
    vec![(2, 2), (2, 4), (4, 2), (4, 4)]
}

/// Draws `codebook_draws` codebooks from `qy` (draw `d` seeded from
/// `(seed, d)`), evaluates each exactly and checks the averages against the
/// reliability and key-secrecy bounds.
pub fn verify_oneshot_bounds(
    source: &LetterSource,
    qy: &Pmf,
    score: &Score,
    cfg: &VerifyConfig,
    seed: u64,
) -> Result<OneShotReport> {
    if source.len() != 1 {
        return Err(Error::Precondition(format!(
            "one-shot verification needs a single-letter source, got {} letters",
            source.len()
        )));
    }
    if cfg.codebook_draws < 2 {
        return Err(Error::Precondition("at least two codebook draws are needed".into()));
    }
    let shape = CodebookShape::one_shot(cfg.m1, cfg.m2)?;
    let p_xy = source.p_xy(0);
    let p_yz = source.p_yz(0);
    let (key, public) = (cfg.m1 as u64, cfg.m2 as u64);
    let gamma = cfg.gamma.unwrap_or_else(|| best_gamma(&p_yz, qy, public));
    let delta = cfg.delta.or_else(|| best_delta(key, public, qy.min_mass(), DELTA_GRID));
    let (error_bound, secrecy_bound) = match delta {
        Some(delta) => {
            let params = OneShotParams {
                key_count: key,
                public_count: public,
                gamma,
                delta,
            };
            (
                reliability_bound_rhs(&p_xy, &params, qy, score)?,
                secrecy_bound_rhs(&p_yz, &params, qy)?,
            )
        }
        None => (1.0, 1.0),
    };

    let per_draw: Vec<Result<(f64, f64, f64)>> = (0..cfg.codebook_draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = derived_rng(seed, Domain::Codebook, d);
            let cb = Codebook::generate(qy, shape, &mut rng)?;
            let ev = exact_induced_joint(&cb, source, score)?;
            Ok((ev.error_probability, ev.key_tv, ev.fallback_probability))
        })
        .collect();
    let (mut err, mut sec, mut fb) = (MeanAccumulator::new(), MeanAccumulator::new(), MeanAccumulator::new());
    for r in per_draw {
        let (e, s, f) = r?;
        err.push(e);
        sec.push(s);
        fb.push(f);
    }
    Ok(OneShotReport {
        m1: cfg.m1,
        m2: cfg.m2,
        gamma,
        delta,
        codebook_draws: cfg.codebook_draws,
        trivial_bound: delta.is_none(),
        mean_fallback: fb.mean(),
        error: Verdict::new(error_bound, err.mean(), err.std_error()),
        secrecy: Verdict::new(secrecy_bound, sec.mean(), sec.std_error()),
    })
}
