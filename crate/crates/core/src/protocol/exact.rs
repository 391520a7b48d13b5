//! Exact protocol metrics at toy scale, by enumeration over probe layouts,
//! codebook indices and warden observations.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channel::StateDmc;
use crate::error::{check_unit_interval, Error, Result};
use crate::oneshot::exact::{exact_induced_joint, InducedJoint, LetterSource, SecrecyWitness};
use crate::oneshot::{Score, MAX_ENUMERATION};
use crate::probcore::Pmf;

use super::{Layout, Protocol};

/// Limit on `|Z|^{n'}` times the number of probe layouts.
const MAX_LAYOUT_WORK: u128 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactProtocolMetrics {
    pub halt_probability: f64,
    /// Conditional on not halting.
    pub error_probability: f64,
    pub fallback_probability: f64,
    /// `tv(P_{W1 W2 Z}, unif_{W1} x P_{W2 Z})` over the full warden observation.
    pub secrecy_tv: f64,
    /// `tv(P_{W1 W2 Z}, P_{W1 W2} x P_Z)`.
    pub independence_tv: f64,
    /// `tv(P_{W2}, unif)`.
    pub public_tv: f64,
    pub layouts: usize,
    #[serde(skip)]
    pub witness: SecrecyWitness,
    #[serde(skip)]
    pub m1: usize,
}

fn z_sequences(z_size: usize, len: usize, limit: u128) -> Result<usize> {
    let mut total: u128 = 1;
    for _ in 0..len {
        total = total.saturating_mul(z_size as u128);
    }
    if total > limit {
        return Err(Error::SizeGuard {
            what: "warden sequences",
            required: total,
            limit,
        });
    }
    Ok(total as usize)
}

fn digits(mut index: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

/// Every ascending subset of `0..n_prime` with at most `max_size` elements.
fn subsets(n_prime: usize, max_size: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, n_prime: usize, max_size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if cur.len() == max_size {
            return;
        }
        for i in start..n_prime {
            cur.push(i);
            extend(i + 1, n_prime, max_size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, n_prime, max_size, &mut Vec::new(), &mut out);
    out
}

fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    let mut log_c = 0.0;
    for i in 0..k {
        log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (log_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Probability that at most `g` of `n_prime` positions are probed.
fn continue_probability(n_prime: usize, g: usize, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 1.0;
    }
    (0..=g.min(n_prime))
        .map(|k| binomial_pmf(n_prime, k, kappa))
        .sum::<f64>()
        .min(1.0)
}

/// The warden's output law `P_Z` over `Z^{n'}`, averaged over probe layouts,
/// including halted runs where nothing is sent. `kappa = 0` means no probes.
pub fn induced_output_law(ch: &StateDmc, s: &[usize], n: usize, g: usize, kappa: f64, alpha: f64) -> Result<Vec<f64>> {
    check_unit_interval("alpha", alpha)?;
    check_unit_interval("kappa", kappa)?;
    if kappa == 1.0 {
        return Err(Error::Domain {
            name: "kappa",
            value: kappa,
            domain: "[0, 1)",
        });
    }
    let n_prime = s.len();
    if n_prime != n + g {
        return Err(Error::Shape(format!("{n_prime} states for n + g = {}", n + g)));
    }
    let zs = ch.z_size();
    let count = z_sequences(zs, n_prime, MAX_ENUMERATION)?;
    let laws: Vec<[Pmf; 3]> = (0..2)
        .map(|st| {
            let q0 = ch.marginal_q(0, st);
            let q1 = ch.marginal_q(1, st);
            Ok([q0.clone(), q1.clone(), q0.mix(&q1, alpha)?])
        })
        .collect::<Result<_>>()?;
    let halt = 1.0 - continue_probability(n_prime, g, kappa);
    let mut z = vec![0; n_prime];
    let mut law = Vec::with_capacity(count);
    let mut dp = vec![0.0; g + 1];
    for index in 0..count {
        digits(index, zs, &mut z);
        // dp[k]: weight of the prefixes with k probes so far
        dp.iter_mut().for_each(|v| *v = 0.0);
        dp[0] = 1.0;
        let mut idle = 1.0;
        for (i, (&zi, &si)) in z.iter().zip(s).enumerate() {
            let [q0, q1, qa] = &laws[si];
            idle *= q0.get(zi);
            for k in (0..=g.min(i)).rev() {
                let w = dp[k];
                if w == 0.0 {
                    continue;
                }
                let unprobed = if i - k < n { qa.get(zi) } else { q0.get(zi) };
                dp[k] = w * (1.0 - kappa) * unprobed;
                if k < g {
                    dp[k + 1] += w * kappa * q1.get(zi);
                }
            }
        }
        law.push(dp.iter().sum::<f64>() + halt * idle);
    }
    Ok(law)
}

/// `D(P_Z || prod_i Q_0^{s_i})` in bits, with `P_Z` from [`induced_output_law`].
pub fn covertness_kl(ch: &StateDmc, s: &[usize], n: usize, g: usize, kappa: f64, alpha: f64) -> Result<f64> {
    let law = induced_output_law(ch, s, n, g, kappa, alpha)?;
    let zs = ch.z_size();
    let q0: Vec<Pmf> = (0..2).map(|st| ch.marginal_q(0, st)).collect();
    let mut z = vec![0; s.len()];
    let mut d = 0.0;
    for (index, &p) in law.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        digits(index, zs, &mut z);
        let q: f64 = z.iter().zip(s).map(|(&zi, &si)| q0[si].get(zi)).product();
        if q == 0.0 {
            return Err(Error::InfiniteDivergence { index });
        }
        d += p * (p / q).log2();
    }
    Ok(d.max(0.0))
}

struct CodeAverage {
    /// `P_{W1 W2 Z_code}` averaged over the codebook index.
    mass: Vec<f64>,
    error: f64,
    fallback: f64,
}

/// Exact metrics of a fixed-size protocol on state sequence `s`.
pub fn exact_protocol_metrics(protocol: &Protocol<'_>, s: &[usize]) -> Result<ExactProtocolMetrics> {
    protocol.check_state_sequence(s)?;
    let shape = protocol
        .fixed_shape()?
        .ok_or_else(|| Error::Precondition("exact protocol metrics need fixed code sizes".into()))?;
    let ch = protocol.channel();
    let cfg = protocol.config();
    let (n, g, n_prime) = (cfg.n, protocol.estimator().g, protocol.n_prime());
    let zs = ch.z_size();
    let z_full = z_sequences(zs, n_prime, MAX_ENUMERATION)?;
    let layouts = subsets(n_prime, g);
    let work = layouts.len() as u128 * z_full as u128;
    if work > MAX_LAYOUT_WORK {
        return Err(Error::SizeGuard {
            what: "probe layouts times warden sequences",
            required: work,
            limit: MAX_LAYOUT_WORK,
        });
    }
    let pairs = shape.pairs();
    let cells = pairs as u128 * z_full as u128;
    if cells > MAX_ENUMERATION * 16 {
        return Err(Error::SizeGuard {
            what: "induced table cells",
            required: cells,
            limit: MAX_ENUMERATION * 16,
        });
    }
    let z_code = z_sequences(zs, n, MAX_ENUMERATION)?;
    let kappa = cfg.kappa;
    let go = continue_probability(n_prime, g, kappa);
    let alphas = vec![cfg.alpha; n];
    let u = cfg.codebooks as f64;

    let mut cache: BTreeMap<Vec<usize>, CodeAverage> = BTreeMap::new();
    let mut full = vec![0.0; pairs * z_full];
    let (mut error, mut fallback) = (0.0, 0.0);
    let mut z = vec![0; n_prime];
    for probes in layouts {
        let weight = kappa.powi(probes.len() as i32) * (1.0 - kappa).powi((n_prime - probes.len()) as i32) / go;
        let layout = Layout::new(probes, n, n_prime);
        let code_states: Vec<usize> = layout.code.iter().map(|&i| s[i]).collect();
        if !cache.contains_key(&code_states) {
            let source = LetterSource::from_channel(ch, &alphas, &code_states)?;
            let mut avg = CodeAverage {
                mass: vec![0.0; pairs * z_code],
                error: 0.0,
                fallback: 0.0,
            };
            for k in 0..cfg.codebooks {
                let cb = protocol.codebook(k, shape)?;
                let ev = exact_induced_joint(&cb, &source, &Score::EmpiricalMi)?;
                for (a, m) in avg.mass.iter_mut().zip(ev.induced.mass()) {
                    *a += m / u;
                }
                avg.error += ev.error_probability / u;
                avg.fallback += ev.fallback_probability / u;
            }
            cache.insert(code_states.clone(), avg);
        }
        let avg = &cache[&code_states];
        error += weight * avg.error;
        fallback += weight * avg.fallback;
        for zf in 0..z_full {
            digits(zf, zs, &mut z);
            let mut factor = weight;
            for &j in &layout.probes {
                factor *= ch.marginal_q(1, s[j]).get(z[j]);
            }
            for &i in &layout.idle {
                factor *= ch.marginal_q(0, s[i]).get(z[i]);
            }
            if factor == 0.0 {
                continue;
            }
            let zc = layout.code.iter().fold(0, |acc, &i| acc * zs + z[i]);
            for pair in 0..pairs {
                full[pair * z_full + zf] += factor * avg.mass[pair * z_code + zc];
            }
        }
    }
    let total: f64 = full.iter().sum();
    full.iter_mut().for_each(|m| *m /= total);
    let induced = InducedJoint::new(shape.m1, shape.m2, z_full, full)?;
    Ok(ExactProtocolMetrics {
        halt_probability: 1.0 - go,
        error_probability: error.clamp(0.0, 1.0),
        fallback_probability: fallback.clamp(0.0, 1.0),
        secrecy_tv: induced.secrecy_tv(),
        independence_tv: induced.independence_tv(),
        public_tv: induced.public_tv(),
        layouts: cache.len(),
        witness: induced.secrecy_witness(),
        m1: shape.m1,
    })
}
