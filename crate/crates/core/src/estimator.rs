//! Secret probe positions, the state-weight estimator, the halting rule and
//! the choice of code sizes.
//!
//! Alice sends `1` at each probe position, so Bob sees `P_1^{s_j}` there. The
//! default baseline is therefore `mu_0 = P_1^0(y_0)`, which makes each probe
//! statistic unbiased for the state. [`Baseline::ZeroInput`] uses the
//! `x = 0` output law `P_0(y_0)` instead; it is unbiased only on positions
//! with `s = 1`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::StateDmc;
use crate::concentration::chernoff_bounds;
use crate::error::{check_open_unit_interval, check_unit_interval, Error, Result};
use crate::rates::{i_s, mixture_mutual_information};
use crate::report::{MeanAccumulator, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// `mu_0 = P_1^0(y_0)`.
    #[default]
    CrossState,
    /// `mu_0 = P_0(y_0)`.
    ZeroInput,
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross-state" => Ok(Baseline::CrossState),
            "zero-input" => Ok(Baseline::ZeroInput),
            other => Err(Error::Parse(format!("unknown baseline '{other}'"))),
        }
    }
}

/// Probe symbol and the two reference probabilities of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeDesign {
    pub y0: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub baseline: Baseline,
}

impl ProbeDesign {
    /// Picks `y_0` maximizing `|P_1^1(y) - baseline(y)|`, smallest `y` on ties.
    pub fn for_channel(ch: &StateDmc, baseline: Baseline) -> Result<Self> {
        let one = ch.marginal_p(1, 1);
        let reference = match baseline {
            Baseline::CrossState => ch.marginal_p(1, 0),
            Baseline::ZeroInput => ch.marginal_p(0, 1),
        };
        let mut best = (0, 0.0);
        for y in 0..one.len() {
            let gap = (one.get(y) - reference.get(y)).abs();
            if gap > best.1 + 1e-12 {
                best = (y, gap);
            }
        }
        if best.1 == 0.0 {
            return Err(Error::DegenerateChannel(
                "probe output law does not depend on the state".into(),
            ));
        }
        Ok(Self {
            y0: best.0,
            mu0: reference.get(best.0),
            mu1: one.get(best.0),
            baseline,
        })
    }

    pub fn separation(&self) -> f64 {
        self.mu1 - self.mu0
    }

    /// `T = (1{y = y_0} - mu_0) / (mu_1 - mu_0)`.
    pub fn statistic(&self, y: usize) -> f64 {
        let hit = if y == self.y0 { 1.0 } else { 0.0 };
        (hit - self.mu0) / self.separation()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// Coding length.
    pub n: usize,
    /// Estimation budget; the protocol runs over `n + g` channel uses.
    pub g: usize,
    pub kappa: f64,
    pub mu: f64,
    pub probe: ProbeDesign,
}

impl EstimatorConfig {
    /// Uses the smallest admissible budget.
    pub fn new(ch: &StateDmc, n: usize, kappa: f64, mu: f64, baseline: Baseline) -> Result<Self> {
        let g = minimal_budget(n, kappa, mu)?;
        Self::with_budget(ch, n, g, kappa, mu, baseline)
    }

    pub fn with_budget(ch: &StateDmc, n: usize, g: usize, kappa: f64, mu: f64, baseline: Baseline) -> Result<Self> {
        check_open_unit_interval("kappa", kappa)?;
        check_open_unit_interval("mu", mu)?;
        let required = required_budget(n + g, kappa, mu);
        if g < required {
            return Err(Error::Precondition(format!(
                "budget g = {g} below ceil((1+mu) kappa (n+g)) = {required}"
            )));
        }
        Ok(Self {
            n,
            g,
            kappa,
            mu,
            probe: ProbeDesign::for_channel(ch, baseline)?,
        })
    }

    pub fn n_prime(&self) -> usize {
        self.n + self.g
    }
}

fn required_budget(n_prime: usize, kappa: f64, mu: f64) -> usize {
    ((1.0 + mu) * kappa * n_prime as f64).ceil() as usize
}

/// Smallest `g` with `g >= ceil((1+mu) kappa (n+g))`.
pub fn minimal_budget(n: usize, kappa: f64, mu: f64) -> Result<usize> {
    check_open_unit_interval("kappa", kappa)?;
    check_open_unit_interval("mu", mu)?;
    let rate = (1.0 + mu) * kappa;
    if rate >= 1.0 {
        return Err(Error::Precondition(format!(
            "(1+mu) kappa = {rate} >= 1 leaves no room for coding positions"
        )));
    }
    let mut g = required_budget(n, kappa, mu);
    while g < required_budget(n + g, kappa, mu) {
        g += 1;
    }
    Ok(g)
}

/// Each of the `n_prime` positions independently with probability `kappa`, ascending.
pub fn select_positions<R: Rng + ?Sized>(n_prime: usize, kappa: f64, rng: &mut R) -> Result<Vec<usize>> {
    check_unit_interval("kappa", kappa)?;
    Ok((0..n_prime).filter(|_| rng.random::<f64>() < kappa).collect())
}

/// The protocol halts when more positions were selected than budgeted.
pub fn halting_check(selected: usize, g: usize) -> bool {
    selected > g
}

/// `beta_hat = mean of T_i`, or 1 with no probes. Not clamped.
pub fn estimate_beta(probe_outputs: &[usize], probe: &ProbeDesign) -> f64 {
    if probe_outputs.is_empty() {
        return 1.0;
    }
    probe_outputs.iter().map(|&y| probe.statistic(y)).sum::<f64>() / probe_outputs.len() as f64
}

/// `E[beta_hat | J]` when the probed positions have states `probe_states`.
pub fn expected_estimate(ch: &StateDmc, probe_states: &[usize], probe: &ProbeDesign) -> f64 {
    if probe_states.is_empty() {
        return 1.0;
    }
    let mean_hit: f64 = probe_states
        .iter()
        .map(|&s| ch.marginal_p(1, s).get(probe.y0))
        .sum::<f64>()
        / probe_states.len() as f64;
    (mean_hit - probe.mu0) / probe.separation()
}

/// `P(|beta_hat - beta| > lambda | L = ell) <= 2 exp(-(mu1-mu0)^2 lambda^2 ell / 2) + 2 exp(-lambda^2 ell / 2)`.
pub fn deviation_bound(lambda: f64, ell: u64, mu0: f64, mu1: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            domain: "(0, inf)",
        });
    }
    if ell == 0 {
        return Err(Error::Precondition("ell must be at least 1".into()));
    }
    let l = ell as f64;
    let d = mu1 - mu0;
    Ok(2.0 * (-d * d * lambda * lambda * l / 2.0).exp() + 2.0 * (-lambda * lambda * l / 2.0).exp())
}

/// `2^(-mu^2 kappa n' / 3)`, the halting probability bound.
pub fn halting_bound(n_prime: usize, kappa: f64, mu: f64) -> f64 {
    (-(mu * mu) * kappa * n_prime as f64 / 3.0).exp2()
}

/// Code sizes as base-2 logarithms, with the inputs that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MSelection {
    pub log_m1: u32,
    pub log_m2: u32,
    pub log_m3: u32,
    pub zeta: f64,
    pub alpha: f64,
    /// The estimate as received, before clamping.
    pub beta_hat: f64,
    /// `beta_hat` clamped to `[0, 1]`.
    pub beta_used: f64,
    /// `I(X^; Y^)` of the mixture channel at `beta_used`.
    pub mutual_information: f64,
}

impl MSelection {
    pub fn m1(&self) -> u128 {
        1u128 << self.log_m1
    }

    pub fn m2(&self) -> u128 {
        1u128 << self.log_m2
    }

    pub fn m3(&self) -> u128 {
        1u128 << self.log_m3
    }
}

/// Right-hand sides of the three sizing constraints, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizingTargets {
    /// Lower limit on `log M1 + log M2 + log M3`.
    pub total: i64,
    /// Upper limit on `log M1 + log M3`.
    pub key_and_randomizer: i64,
    /// Lower limit on `log M3`.
    pub randomizer: i64,
}

/// Relative slack absorbing rounding noise before taking integer parts, so that
/// products which are integers in exact arithmetic do not round up by one.
const ROUNDING_SLACK: f64 = 1e-9;

fn ceil_bits(x: f64) -> i64 {
    (x - ROUNDING_SLACK * x.abs().max(1.0)).ceil() as i64
}

fn floor_bits(x: f64) -> i64 {
    (x + ROUNDING_SLACK * x.abs().max(1.0)).floor() as i64
}

fn check_sizing_inputs(zeta: f64, alpha: f64, n: usize, mu0_channel: f64) -> Result<()> {
    if !(zeta > 0.0) {
        return Err(Error::Domain {
            name: "zeta",
            value: zeta,
            domain: "(0, inf)",
        });
    }
    check_unit_interval("alpha", alpha)?;
    check_open_unit_interval("mu0_channel", mu0_channel)?;
    if n == 0 {
        return Err(Error::Precondition("n must be positive".into()));
    }
    Ok(())
}

/// Targets at estimate `beta_hat` (clamped here).
pub fn sizing_targets(
    ch: &StateDmc,
    beta_hat: f64,
    zeta: f64,
    alpha: f64,
    n: usize,
    mu0_channel: f64,
) -> Result<(SizingTargets, f64)> {
    check_sizing_inputs(zeta, alpha, n, mu0_channel)?;
    let b = beta_hat.clamp(0.0, 1.0);
    let nf = n as f64;
    let mi = mixture_mutual_information(ch, alpha, b)?;
    let leak = b * i_s(ch, 1)? + (1.0 - b) * i_s(ch, 0)?;
    Ok((
        SizingTargets {
            total: ceil_bits((1.0 + zeta) * nf * (1.0 / mu0_channel).log2()),
            key_and_randomizer: floor_bits((1.0 - zeta) * (mi - zeta * alpha) * nf),
            randomizer: ceil_bits((1.0 + zeta) * alpha * (leak + zeta) * nf),
        },
        mi,
    ))
}

/// Chooses `(M1, M2, M3)` from the estimate: `log M3` at its lower limit,
/// `log M1 + log M3` at its upper limit and `log M2` just large enough for
/// the total. Fails when `M1 < 1` would be needed.
pub fn choose_m(ch: &StateDmc, beta_hat: f64, zeta: f64, alpha: f64, n: usize, mu0_channel: f64) -> Result<MSelection> {
    let (t, mi) = sizing_targets(ch, beta_hat, zeta, alpha, n, mu0_channel)?;
    let log_m3 = t.randomizer.max(0);
    let log_m1 = t.key_and_randomizer - log_m3;
    if log_m1 < 0 {
        return Err(Error::InfeasibleSelection(format!(
            "key and randomizer budget {} bits is below the randomizer requirement {log_m3} bits",
            t.key_and_randomizer
        )));
    }
    let log_m2 = (t.total - t.key_and_randomizer).max(0);
    let to_u32 = |v: i64| u32::try_from(v).map_err(|_| Error::InfeasibleSelection(format!("{v} bits is out of range")));
    Ok(MSelection {
        log_m1: to_u32(log_m1)?,
        log_m2: to_u32(log_m2)?,
        log_m3: to_u32(log_m3)?,
        zeta,
        alpha,
        beta_hat,
        beta_used: beta_hat.clamp(0.0, 1.0),
        mutual_information: mi,
    })
}

/// Re-checks the sizing constraints for `sel` by direct substitution.
pub fn selection_satisfies(ch: &StateDmc, sel: &MSelection, n: usize, mu0_channel: f64) -> Result<bool> {
    let (t, _) = sizing_targets(ch, sel.beta_used, sel.zeta, sel.alpha, n, mu0_channel)?;
    let (m1, m2, m3) = (sel.log_m1 as i64, sel.log_m2 as i64, sel.log_m3 as i64);
    Ok(m1 + m2 + m3 >= t.total && m1 + m3 <= t.key_and_randomizer && m3 >= t.randomizer)
}

/// Which of the three membership inequalities hold for a state sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Membership {
    pub total: bool,
    pub key_and_randomizer: bool,
    pub randomizer: bool,
}

impl Membership {
    pub fn holds(&self) -> bool {
        self.total && self.key_and_randomizer && self.randomizer
    }
}

/// Membership conditions at the true fraction `beta = wt(s) / n`.
pub fn membership(
    ch: &StateDmc,
    s: &[usize],
    log_m: (u32, u32, u32),
    zeta: f64,
    alpha: f64,
    mu0_channel: f64,
) -> Result<Membership> {
    let n = s.len();
    check_sizing_inputs(zeta, alpha, n, mu0_channel)?;
    if let Some(&bad) = s.iter().find(|&&v| v > 1) {
        return Err(Error::SymbolOutOfRange { symbol: bad, size: 2 });
    }
    let nf = n as f64;
    let beta = s.iter().sum::<usize>() as f64 / nf;
    let mi = mixture_mutual_information(ch, alpha, beta)?;
    let leak = beta * i_s(ch, 1)? + (1.0 - beta) * i_s(ch, 0)?;
    let total = ceil_bits((1.0 + zeta) * (1.0 / mu0_channel).log2() * nf);
    let key_and_randomizer = floor_bits((1.0 - zeta) * mi * nf);
    let randomizer = ceil_bits((1.0 + zeta) * alpha * leak * nf);
    let (m1, m2, m3) = (log_m.0 as i64, log_m.1 as i64, log_m.2 as i64);
    Ok(Membership {
        total: m1 + m2 + m3 >= total,
        key_and_randomizer: m1 + m3 <= key_and_randomizer,
        randomizer: m3 >= randomizer,
    })
}

pub fn s_in_s_set(
    ch: &StateDmc,
    s: &[usize],
    log_m: (u32, u32, u32),
    zeta: f64,
    alpha: f64,
    mu0_channel: f64,
) -> Result<bool> {
    Ok(membership(ch, s, log_m, zeta, alpha, mu0_channel)?.holds())
}

/// Difference in bits between the randomizer requirement at the estimate and
/// at the true fraction, before rounding.
pub fn leakage_gap(ch: &StateDmc, beta_hat: f64, beta: f64, zeta: f64, alpha: f64, n: usize) -> Result<f64> {
    let diff = beta_hat.clamp(0.0, 1.0) - beta;
    Ok((1.0 + zeta) * alpha * diff * (i_s(ch, 1)? - i_s(ch, 0)?) * n as f64)
}

/// Monte-Carlo check of the conditional deviation bound: each trial picks `ell`
/// of the `states.len()` positions uniformly, probes them with `x = 1` and
/// tests `|beta_hat - beta| > lambda` with `beta` the weight fraction of `states`.
pub fn check_deviation<R: Rng + ?Sized>(
    ch: &StateDmc,
    states: &[usize],
    probe: &ProbeDesign,
    lambda: f64,
    ell: usize,
    trials: u64,
    rng: &mut R,
) -> Result<Verdict> {
    if ell > states.len() {
        return Err(Error::Precondition(format!(
            "{ell} probes from {} positions",
            states.len()
        )));
    }
    let bound = deviation_bound(lambda, ell as u64, probe.mu0, probe.mu1)?;
    let beta = states.iter().sum::<usize>() as f64 / states.len() as f64;
    let ones = vec![1; ell];
    let mut acc = MeanAccumulator::new();
    for _ in 0..trials {
        let picked: Vec<usize> = sample(rng, states.len(), ell).into_iter().map(|j| states[j]).collect();
        let (ys, _) = ch.sample(&ones, &picked, rng)?;
        let dev = (estimate_beta(&ys, probe) - beta).abs();
        acc.push(if dev > lambda { 1.0 } else { 0.0 });
    }
    Ok(Verdict::new(bound, acc.mean(), acc.std_error()))
}

/// Monte-Carlo check of the halting bound at the minimal budget for `n`.
pub fn check_halting<R: Rng + ?Sized>(n: usize, kappa: f64, mu: f64, trials: u64, rng: &mut R) -> Result<Verdict> {
    let g = minimal_budget(n, kappa, mu)?;
    let n_prime = n + g;
    let mut acc = MeanAccumulator::new();
    for _ in 0..trials {
        let l = select_positions(n_prime, kappa, rng)?.len();
        acc.push(if halting_check(l, g) { 1.0 } else { 0.0 });
    }
    Ok(Verdict::new(
        halting_bound(n_prime, kappa, mu),
        acc.mean(),
        acc.std_error(),
    ))
}

/// The Chernoff upper-tail value `exp(-mu^2 kappa n' / 3)` that the halting bound relaxes.
pub fn halting_chernoff(n_prime: usize, kappa: f64, mu: f64) -> Result<f64> {
    Ok(chernoff_bounds(n_prime as u64, kappa, mu)?.1)
}
