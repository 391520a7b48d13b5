//! Concentration bounds and Monte-Carlo harnesses that check them.
//!
//! Bounds are returned as computed, even when they exceed 1; use
//! [`clamp_probability`] for display.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit_interval, Error, Result};
use crate::report::{fmt_sig, MeanAccumulator, Verdict};
use crate::seeds::{derived_rng, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStyle {
    Lemma1Prob,
    Lemma1Exp,
    ChernoffLower,
    ChernoffUpper,
    Hypergeometric,
    Hoeffding,
}

impl BoundStyle {
    pub fn tag(self) -> &'static str {
        match self {
            BoundStyle::Lemma1Prob => "lemma1_prob",
            BoundStyle::Lemma1Exp => "lemma1_exp",
            BoundStyle::ChernoffLower => "chernoff_lower",
            BoundStyle::ChernoffUpper => "chernoff_upper",
            BoundStyle::Hypergeometric => "hypergeometric",
            BoundStyle::Hoeffding => "hoeffding",
        }
    }
}

/// One bound evaluation request.
///
/// `deviation` is `epsilon` for the reciprocal-sum styles, `mu` for Chernoff
/// and `lambda` for the hypergeometric and Hoeffding styles. For Hoeffding,
/// `p` is the width of the summands' range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuery {
    pub n: u64,
    pub p: f64,
    pub deviation: f64,
    pub style: BoundStyle,
}

impl BoundQuery {
    pub fn evaluate(&self) -> Result<f64> {
        match self.style {
            BoundStyle::Lemma1Prob => lemma1_prob_bound(self.n, self.p, self.deviation),
            BoundStyle::Lemma1Exp => lemma1_exp_bound(self.n, self.p, self.deviation),
            BoundStyle::ChernoffLower => Ok(chernoff_bounds(self.n, self.p, self.deviation)?.0),
            BoundStyle::ChernoffUpper => Ok(chernoff_bounds(self.n, self.p, self.deviation)?.1),
            BoundStyle::Hypergeometric => hypergeometric_tail(self.n, 0, self.n, self.deviation),
            BoundStyle::Hoeffding => hoeffding_bound(self.n, self.p, self.deviation),
        }
    }
}

pub fn clamp_probability(bound: f64) -> f64 {
    bound.min(1.0)
}

fn lemma1_check(n: u64, p: f64, eps: f64) -> Result<()> {
    check_open_unit_interval("p", p)?;
    if n == 0 {
        return Err(Error::Precondition("n must be positive".into()));
    }
    let lower = 2.0 / (n as f64 * p);
    if !(eps > lower && eps < 1.0) {
        return Err(Error::Precondition(format!("epsilon = {eps} outside ({lower}, 1)")));
    }
    Ok(())
}

/// `P(|1/(1+S) - 1/((n+1)p)| >= eps/((n+1)p)) <= 2 exp(-n p eps^2 / 32)` for
/// `S ~ Binomial(n, p)` and `2/(np) < eps < 1`.
pub fn lemma1_prob_bound(n: u64, p: f64, eps: f64) -> Result<f64> {
    lemma1_check(n, p, eps)?;
    Ok(2.0 * (-(n as f64) * p * eps * eps / 32.0).exp())
}

/// `E|1/(1+S) - 1/((n+1)p)| <= eps/((n+1)p) + (1 + 1/((n+1)p)) exp(-n p eps^2 / 32)`.
pub fn lemma1_exp_bound(n: u64, p: f64, eps: f64) -> Result<f64> {
    lemma1_check(n, p, eps)?;
    let np1 = (n as f64 + 1.0) * p;
    Ok(eps / np1 + (1.0 + 1.0 / np1) * (-(n as f64) * p * eps * eps / 32.0).exp())
}

/// Smallest expectation bound over `points` admissible epsilons, with its epsilon.
pub fn best_lemma1_exp_bound(n: u64, p: f64, points: usize) -> Result<(f64, f64)> {
    check_open_unit_interval("p", p)?;
    let lower = 2.0 / (n as f64 * p);
    if lower >= 1.0 {
        return Err(Error::Precondition(format!(
            "no admissible epsilon: 2/(np) = {lower} >= 1"
        )));
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 1..=points {
        let eps = lower + (1.0 - lower) * i as f64 / (points + 1) as f64;
        let b = lemma1_exp_bound(n, p, eps)?;
        if b < best.1 {
            best = (eps, b);
        }
    }
    Ok(best)
}

/// `(P(S <= (1-mu) np) bound, P(S >= (1+mu) np) bound) = (exp(-np mu^2/2), exp(-np mu^2/3))`.
pub fn chernoff_bounds(n: u64, p: f64, mu: f64) -> Result<(f64, f64)> {
    check_open_unit_interval("mu", mu)?;
    crate::error::check_unit_interval("p", p)?;
    let np = n as f64 * p;
    Ok(((-np * mu * mu / 2.0).exp(), (-np * mu * mu / 3.0).exp()))
}

/// Tail of `H/draws` around `successes/population` for `H` hypergeometric:
/// `P(|H/draws - beta| >= lambda/2) <= exp(-lambda^2 draws / 2)`.
pub fn hypergeometric_tail(population: u64, successes: u64, draws: u64, lambda: f64) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::Precondition(format!(
            "{successes} successes and {draws} draws from a population of {population}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            domain: "[0, inf)",
        });
    }
    Ok((-lambda * lambda * draws as f64 / 2.0).exp())
}

/// Two-sided Hoeffding bound `2 exp(-2 n t^2 / width^2)` for a mean of `n`
/// independent summands with range `width`.
pub fn hoeffding_bound(n: u64, width: f64, t: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::Domain {
            name: "width",
            value: width,
            domain: "(0, inf)",
        });
    }
    Ok(2.0 * (-2.0 * n as f64 * t * t / (width * width)).exp())
}

/// A bound next to the empirical quantity it controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub style: BoundStyle,
    pub n: u64,
    pub p: f64,
    pub deviation: f64,
    pub samples: u64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

fn binomial(n: u64, p: f64) -> Result<Binomial> {
    Binomial::new(n, p).map_err(|e| Error::Precondition(e.to_string()))
}

/// Monte-Carlo check of both reciprocal-sum bounds from `samples` binomial draws.
pub fn check_lemma1<R: Rng + ?Sized>(n: u64, p: f64, eps: f64, samples: u64, rng: &mut R) -> Result<[BoundCheck; 2]> {
    let prob_bound = lemma1_prob_bound(n, p, eps)?;
    let exp_bound = lemma1_exp_bound(n, p, eps)?;
    let dist = binomial(n, p)?;
    let np1 = (n as f64 + 1.0) * p;
    let mut event = MeanAccumulator::new();
    let mut gap = MeanAccumulator::new();
    for _ in 0..samples {
        let s = dist.sample(rng) as f64;
        let dev = (1.0 / (1.0 + s) - 1.0 / np1).abs();
        event.push(if dev >= eps / np1 { 1.0 } else { 0.0 });
        gap.push(dev);
    }
    let make = |style, bound, acc: &MeanAccumulator| BoundCheck {
        style,
        n,
        p,
        deviation: eps,
        samples,
        verdict: Verdict::new(bound, acc.mean(), acc.std_error()),
    };
    Ok([
        make(BoundStyle::Lemma1Prob, prob_bound, &event),
        make(BoundStyle::Lemma1Exp, exp_bound, &gap),
    ])
}

/// Monte-Carlo check of both Chernoff tails.
pub fn check_chernoff<R: Rng + ?Sized>(n: u64, p: f64, mu: f64, samples: u64, rng: &mut R) -> Result<[BoundCheck; 2]> {
    let (lower, upper) = chernoff_bounds(n, p, mu)?;
    let dist = binomial(n, p)?;
    let np = n as f64 * p;
    let mut lo = MeanAccumulator::new();
    let mut hi = MeanAccumulator::new();
    for _ in 0..samples {
        let s = dist.sample(rng) as f64;
        lo.push(if s <= (1.0 - mu) * np { 1.0 } else { 0.0 });
        hi.push(if s >= (1.0 + mu) * np { 1.0 } else { 0.0 });
    }
    let make = |style, bound, acc: &MeanAccumulator| BoundCheck {
        style,
        n,
        p,
        deviation: mu,
        samples,
        verdict: Verdict::new(bound, acc.mean(), acc.std_error()),
    };
    Ok([
        make(BoundStyle::ChernoffLower, lower, &lo),
        make(BoundStyle::ChernoffUpper, upper, &hi),
    ])
}

/// Monte-Carlo check of the hypergeometric tail with an exact sampler.
/// In the returned record `n` is the number of draws and `p` the success fraction.
pub fn check_hypergeometric<R: Rng + ?Sized>(
    population: u64,
    successes: u64,
    draws: u64,
    lambda: f64,
    samples: u64,
    rng: &mut R,
) -> Result<BoundCheck> {
    let bound = hypergeometric_tail(population, successes, draws, lambda)?;
    if draws == 0 {
        return Err(Error::Precondition("at least one draw is needed".into()));
    }
    let dist = Hypergeometric::new(population, successes, draws).map_err(|e| Error::Precondition(e.to_string()))?;
    let beta = successes as f64 / population as f64;
    let mut acc = MeanAccumulator::new();
    for _ in 0..samples {
        let h = dist.sample(rng) as f64;
        acc.push(if (h / draws as f64 - beta).abs() >= lambda / 2.0 {
            1.0
        } else {
            0.0
        });
    }
    Ok(BoundCheck {
        style: BoundStyle::Hypergeometric,
        n: draws,
        p: beta,
        deviation: lambda,
        samples,
        verdict: Verdict::new(bound, acc.mean(), acc.std_error()),
    })
}

/// Grid cell for [`run_lemma1_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Cell {
    pub n: u64,
    pub p: f64,
    pub eps: f64,
}

/// The default reciprocal-sum grid.
pub fn default_lemma1_grid() -> Vec<Lemma1Cell> {
    vec![
        Lemma1Cell {
            n: 1_000,
            p: 0.1,
            eps: 0.3,
        },
        Lemma1Cell {
            n: 10_000,
            p: 0.5,
            eps: 0.5,
        },
        Lemma1Cell {
            n: 1_000,
            p: 0.5,
            eps: 0.2,
        },
    ]
}

/// Runs [`check_lemma1`] over a grid in parallel; cell `i` uses its own derived stream.
pub fn run_lemma1_suite(grid: &[Lemma1Cell], samples: u64, seed: u64) -> Result<Vec<BoundCheck>> {
    let per_cell: Vec<Result<[BoundCheck; 2]>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = derived_rng(seed, Domain::Verification, i as u64);
            check_lemma1(c.n, c.p, c.eps, samples, &mut rng)
        })
        .collect();
    let mut out = Vec::with_capacity(2 * grid.len());
    for r in per_cell {
        out.extend(r?);
    }
    Ok(out)
}

/// Writes checks as CSV: `style,n,p,deviation,samples,bound,empirical,sigma,verdict`.
pub fn write_checks_csv<W: Write>(out: W, checks: &[BoundCheck]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "style",
        "n",
        "p",
        "deviation",
        "samples",
        "bound",
        "empirical",
        "sigma",
        "verdict",
    ])?;
    for c in checks {
        w.write_record([
            c.style.tag().to_string(),
            c.n.to_string(),
            fmt_sig(c.p),
            fmt_sig(c.deviation),
            c.samples.to_string(),
            fmt_sig(c.verdict.bound),
            fmt_sig(c.verdict.empirical),
            fmt_sig(c.verdict.sigma),
            if c.verdict.pass { "pass" } else { "fail" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
