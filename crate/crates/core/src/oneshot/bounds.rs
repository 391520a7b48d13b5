//! Closed-form reliability and secrecy bounds for the one-shot code.
//!
//! `key_count` is the number of key indices the decoder searches at a fixed
//! public index and `public_count` the number of public indices the encoder
//! randomizes over, so the n-letter reading (key `(W1, W3)`, public `W2`) and
//! the one-shot reading (key `W1`, public `W2`) are both expressible.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probcore::{JointPmf, Pmf};

use super::Score;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneShotParams {
    pub key_count: u64,
    pub public_count: u64,
    pub gamma: f64,
    pub delta: f64,
}

/// Open interval `(2 / ((M1 M2 - 1) mu_q), 1)` of admissible `delta`, if non-empty.
pub fn delta_range(key_count: u64, public_count: u64, mu_q: f64) -> Option<(f64, f64)> {
    let total = key_count as f64 * public_count as f64;
    if total <= 1.0 || mu_q <= 0.0 {
        return None;
    }
    let lo = 2.0 / ((total - 1.0) * mu_q);
    (lo < 1.0).then_some((lo, 1.0))
}

/// `(2 + M1 M2) exp(-(M1 M2 - 1) mu_q delta^2 / 32)`.
pub fn tail_term(key_count: u64, public_count: u64, mu_q: f64, delta: f64) -> f64 {
    let total = key_count as f64 * public_count as f64;
    (2.0 + total) * (-(total - 1.0) * mu_q * delta * delta / 32.0).exp()
}

fn check_params(params: &OneShotParams, qy: &Pmf) -> Result<f64> {
    let mu_q = qy.min_mass();
    match delta_range(params.key_count, params.public_count, mu_q) {
        Some((lo, hi)) if params.delta > lo && params.delta < hi => {}
        range => {
            return Err(Error::Precondition(format!(
                "delta = {} outside the admissible range {range:?} (M1 = {}, M2 = {}, mu_Q = {mu_q})",
                params.delta, params.key_count, params.public_count
            )))
        }
    }
    if !(params.gamma > 0.0) {
        return Err(Error::Domain {
            name: "gamma",
            value: params.gamma,
            domain: "(0, inf)",
        });
    }
    Ok(mu_q)
}

/// `q(x, y) = sum_{y'} Q_Y(y') 1{nu(x, y') >= nu(x, y)}`.
pub fn q_function(score: &Score, qy: &Pmf, x: usize, y: usize) -> Result<f64> {
    let base = score.letter(x, y)?;
    let mut q = 0.0;
    for (yp, &mass) in qy.mass().iter().enumerate() {
        if score.letter(x, yp)? >= base {
            q += mass;
        }
    }
    Ok(q)
}

/// Upper bound on `P(W1 != W1_hat)` averaged over codebooks.
pub fn reliability_bound_rhs(p_xy: &JointPmf, params: &OneShotParams, qy: &Pmf, score: &Score) -> Result<f64> {
    let mu_q = check_params(params, qy)?;
    if p_xy.cols() != qy.len() {
        return Err(Error::AlphabetMismatch {
            left: p_xy.cols(),
            right: qy.len(),
        });
    }
    let m1 = params.key_count as f64;
    let mut first = 0.0;
    for x in 0..p_xy.rows() {
        for y in 0..p_xy.cols() {
            let mass = p_xy.get(x, y);
            if mass > 0.0 {
                first += mass * (m1 * q_function(score, qy, x, y)?).min(1.0);
            }
        }
    }
    Ok(first + tail_term(params.key_count, params.public_count, mu_q, params.delta) + params.delta)
}

/// `sum_{y,z} P_YZ 1{P_YZ >= gamma P_Z Q_Y}`.
pub fn heavy_mass(p_yz: &JointPmf, qy: &Pmf, gamma: f64) -> f64 {
    let pz = p_yz.col_marginal();
    let mut total = 0.0;
    for y in 0..p_yz.rows() {
        for z in 0..p_yz.cols() {
            let mass = p_yz.get(y, z);
            if mass > 0.0 && mass >= gamma * pz.get(z) * qy.get(y) {
                total += mass;
            }
        }
    }
    total
}

/// Upper bound on the key secrecy distance averaged over codebooks.
pub fn secrecy_bound_rhs(p_yz: &JointPmf, params: &OneShotParams, qy: &Pmf) -> Result<f64> {
    let mu_q = check_params(params, qy)?;
    if p_yz.rows() != qy.len() {
        return Err(Error::AlphabetMismatch {
            left: p_yz.rows(),
            right: qy.len(),
        });
    }
    Ok(heavy_mass(p_yz, qy, params.gamma)
        + 0.5 * (params.gamma / params.public_count as f64).sqrt()
        + 0.5 * params.delta
        + 0.5 * tail_term(params.key_count, params.public_count, mu_q, params.delta))
}

/// `delta` minimizing `delta + tail_term` on a grid of `points` admissible values.
/// The same value minimizes both bounds.
pub fn best_delta(key_count: u64, public_count: u64, mu_q: f64, points: usize) -> Option<f64> {
    let (lo, hi) = delta_range(key_count, public_count, mu_q)?;
    (1..=points)
        .map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64)
        .map(|d| (d, d + tail_term(key_count, public_count, mu_q, d)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(d, _)| d)
}

/// `gamma` minimizing `heavy_mass + sqrt(gamma / M2) / 2`. The optimum sits just
/// above one of the likelihood ratios `P_YZ / (P_Z Q_Y)`.
pub fn best_gamma(p_yz: &JointPmf, qy: &Pmf, public_count: u64) -> f64 {
    let pz = p_yz.col_marginal();
    let mut candidates = vec![f64::MIN_POSITIVE];
    for y in 0..p_yz.rows() {
        for z in 0..p_yz.cols() {
            let denom = pz.get(z) * qy.get(y);
            if p_yz.get(y, z) > 0.0 && denom > 0.0 {
                candidates.push(p_yz.get(y, z) / denom * (1.0 + 1e-9));
            }
        }
    }
    let objective = |g: f64| heavy_mass(p_yz, qy, g) + 0.5 * (g / public_count as f64).sqrt();
    candidates
        .into_iter()
        .map(|g| (g, objective(g)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(g, _)| g)
        .unwrap_or(1.0)
}
