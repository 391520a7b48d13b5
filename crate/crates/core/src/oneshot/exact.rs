//! Exact evaluation of a fixed codebook against a product source.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::channel::{StateDmc, BINARY};
use crate::error::{Error, Result};
use crate::probcore::{JointPmf, Pmf, NORMALIZATION_TOL};

use super::{Codebook, Score, MAX_ENUMERATION};

/// Independent but not necessarily identical letters `(X_i, Y_i, Z_i)`.
/// Each letter is a table indexed `(x * |Y| + y) * |Z| + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LetterSource {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    letters: Vec<Vec<f64>>,
}

impl LetterSource {
    pub fn new(x_size: usize, y_size: usize, z_size: usize, letters: Vec<Vec<f64>>) -> Result<Self> {
        if x_size == 0 || y_size == 0 || z_size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        for letter in &letters {
            if letter.len() != x_size * y_size * z_size {
                return Err(Error::Shape(format!(
                    "letter of size {} for alphabets {x_size}x{y_size}x{z_size}",
                    letter.len()
                )));
            }
            Pmf::new(letter.clone())?;
        }
        Ok(Self {
            x_size,
            y_size,
            z_size,
            letters,
        })
    }

    pub fn single(x_size: usize, y_size: usize, z_size: usize, joint: Vec<f64>) -> Result<Self> {
        Self::new(x_size, y_size, z_size, vec![joint])
    }

    /// `X_i ~ Bernoulli(alpha_i)` sent through the slice for state `s_i`.
    pub fn from_channel(ch: &StateDmc, alphas: &[f64], states: &[usize]) -> Result<Self> {
        if alphas.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} input weights and {} states",
                alphas.len(),
                states.len()
            )));
        }
        let letters = alphas
            .iter()
            .zip(states)
            .map(|(&a, &s)| {
                if s >= BINARY {
                    return Err(Error::SymbolOutOfRange {
                        symbol: s,
                        size: BINARY,
                    });
                }
                let px = Pmf::bernoulli(a)?;
                let mut letter = Vec::with_capacity(BINARY * ch.y_size() * ch.z_size());
                for x in 0..BINARY {
                    letter.extend(ch.joint_pq(x, s).mass().iter().map(|m| px.get(x) * m));
                }
                Ok(letter)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(BINARY, ch.y_size(), ch.z_size(), letters)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    fn at(&self, i: usize, x: usize, y: usize, z: usize) -> f64 {
        self.letters[i][(x * self.y_size + y) * self.z_size + z]
    }

    /// `P_{X_i Y_i}`.
    pub fn p_xy(&self, i: usize) -> JointPmf {
        let mass = (0..self.x_size)
            .flat_map(|x| (0..self.y_size).map(move |y| (x, y)))
            .map(|(x, y)| (0..self.z_size).map(|z| self.at(i, x, y, z)).sum())
            .collect();
        JointPmf::from_weights(self.x_size, self.y_size, mass).expect("letter is a pmf")
    }

    /// `P_{Y_i Z_i}`.
    pub fn p_yz(&self, i: usize) -> JointPmf {
        let mass = (0..self.y_size)
            .flat_map(|y| (0..self.z_size).map(move |z| (y, z)))
            .map(|(y, z)| (0..self.x_size).map(|x| self.at(i, x, y, z)).sum())
            .collect();
        JointPmf::from_weights(self.y_size, self.z_size, mass).expect("letter is a pmf")
    }

    /// Draws one realization `(x, y, z)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let n = self.len();
        let (mut xs, mut ys, mut zs) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let yz = self.y_size * self.z_size;
        for letter in &self.letters {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut cell = letter.len() - 1;
            for (c, &m) in letter.iter().enumerate() {
                acc += m;
                if u < acc {
                    cell = c;
                    break;
                }
            }
            xs.push(cell / yz);
            ys.push(cell % yz / self.z_size);
            zs.push(cell % self.z_size);
        }
        (xs, ys, zs)
    }
}

/// Index of `seq` read as base-`base` digits, first symbol most significant.
pub fn sequence_index(seq: &[usize], base: usize) -> usize {
    seq.iter().fold(0, |acc, &s| acc * base + s)
}

fn index_sequence(mut index: usize, base: usize, n: usize) -> Vec<usize> {
    let mut seq = vec![0; n];
    for slot in seq.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
    seq
}

fn checked_pow(base: usize, n: usize, what: &'static str, limit: u128) -> Result<usize> {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(base as u128);
    }
    if total > limit {
        return Err(Error::SizeGuard {
            what,
            required: total,
            limit,
        });
    }
    Ok(total as usize)
}

/// Exact table of `P_{W1 W2 Z}`, indexed `(w1 * m2 + w2) * z_count + z`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedJoint {
    m1: usize,
    m2: usize,
    z_count: usize,
    mass: Vec<f64>,
}

impl InducedJoint {
    pub fn new(m1: usize, m2: usize, z_count: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != m1 * m2 * z_count {
            return Err(Error::Shape(format!(
                "{} cells for a {m1}x{m2}x{z_count} table",
                mass.len()
            )));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { sum: total, tol: 1e-9 });
        }
        Ok(Self { m1, m2, z_count, mass })
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn z_count(&self) -> usize {
        self.z_count
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, w1: usize, w2: usize, z: usize) -> f64 {
        self.mass[(w1 * self.m2 + w2) * self.z_count + z]
    }

    fn p_w2z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m2 * self.z_count];
        for w1 in 0..self.m1 {
            for (cell, o) in out.iter_mut().enumerate() {
                *o += self.mass[w1 * self.m2 * self.z_count + cell];
            }
        }
        out
    }

    fn p_z(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.z_count];
        for (cell, m) in self.p_w2z().iter().enumerate() {
            out[cell % self.z_count] += m;
        }
        out
    }

    /// `tv(P_{W1 W2 Z}, unif_{W1} x P_{W2 Z})`.
    pub fn secrecy_tv(&self) -> f64 {
        let reference = self.p_w2z();
        let m1 = self.m1 as f64;
        let block = self.m2 * self.z_count;
        0.5 * self
            .mass
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - reference[i % block] / m1).abs())
            .sum::<f64>()
    }

    /// `tv(P_{W1 Z}, unif_{W1} x P_Z)`, the key-only distance.
    pub fn key_tv(&self) -> f64 {
        let pz = self.p_z();
        let m1 = self.m1 as f64;
        let mut total = 0.0;
        for w1 in 0..self.m1 {
            for (z, &q) in pz.iter().enumerate() {
                let p: f64 = (0..self.m2).map(|w2| self.get(w1, w2, z)).sum();
                total += (p - q / m1).abs();
            }
        }
        0.5 * total
    }

    /// `tv(P_{W1 W2 Z}, P_{W1 W2} x P_Z)`, distance from independence of the indices and `Z`.
    pub fn independence_tv(&self) -> f64 {
        let pz = self.p_z();
        let mut total = 0.0;
        for pair in 0..self.m1 * self.m2 {
            let row = &self.mass[pair * self.z_count..(pair + 1) * self.z_count];
            let p_pair: f64 = row.iter().sum();
            total += row.iter().zip(&pz).map(|(p, q)| (p - p_pair * q).abs()).sum::<f64>();
        }
        0.5 * total
    }

    /// `tv(P_{W2}, unif)`.
    pub fn public_tv(&self) -> f64 {
        let w2z = self.p_w2z();
        let m2 = self.m2 as f64;
        0.5 * (0..self.m2)
            .map(|w2| {
                let p: f64 = w2z[w2 * self.z_count..(w2 + 1) * self.z_count].iter().sum();
                (p - 1.0 / m2).abs()
            })
            .sum::<f64>()
    }

    /// The set where `P_{W1 W2 Z}` exceeds `unif x P_{W2 Z}`, for unbiased sampled estimates.
    pub fn secrecy_witness(&self) -> SecrecyWitness {
        let reference = self.p_w2z();
        let m1 = self.m1 as f64;
        let block = self.m2 * self.z_count;
        SecrecyWitness {
            m2: self.m2,
            z_count: self.z_count,
            in_set: self
                .mass
                .iter()
                .enumerate()
                .map(|(i, &p)| p > reference[i % block] / m1)
                .collect(),
        }
    }
}

/// Indicator of `A = {P_{W1 W2 Z} > unif x P_{W2 Z}}`. For `(W1, W2, Z)` drawn
/// from the protocol and an independent uniform `W1'`,
/// `1_A(W1, W2, Z) - 1_A(W1', W2, Z)` has mean `P(A) - Q(A)`, the secrecy distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyWitness {
    m2: usize,
    z_count: usize,
    in_set: Vec<bool>,
}

impl SecrecyWitness {
    pub fn contains(&self, w1: usize, w2: usize, z: usize) -> bool {
        self.in_set[(w1 * self.m2 + w2) * self.z_count + z]
    }

    pub fn score(&self, w1: usize, w2: usize, z: usize, w1_prime: usize) -> f64 {
        f64::from(u8::from(self.contains(w1, w2, z))) - f64::from(u8::from(self.contains(w1_prime, w2, z)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactEvaluation {
    pub error_probability: f64,
    /// Probability that no codebook entry equals `Y`.
    pub fallback_probability: f64,
    pub key_tv: f64,
    pub secrecy_tv: f64,
    pub independence_tv: f64,
    pub public_tv: f64,
    /// `P_{W1, W1_hat}`, `m1 x m1`.
    #[serde(skip)]
    pub key_pair: JointPmf,
    #[serde(skip)]
    pub induced: InducedJoint,
}

/// `phi(x, w2)` for every `x` in `X^n`, indexed `x_index * m2 + w2`.
pub fn decode_table(cb: &Codebook, x_size: usize, score: &Score) -> Result<Vec<usize>> {
    let n = cb.n();
    let count = checked_pow(x_size, n, "input sequences", MAX_ENUMERATION)?;
    let m2 = cb.shape().m2;
    let mut table = Vec::with_capacity(count * m2);
    for xi in 0..count {
        let x = index_sequence(xi, x_size, n);
        for w2 in 0..m2 {
            table.push(cb.decode(&x, w2, score)?);
        }
    }
    Ok(table)
}

struct Codeword {
    symbols: Vec<usize>,
    /// `(pair_index, count)` with positive counts.
    pairs: Vec<(usize, u32)>,
    total: u32,
}

fn codewords(cb: &Codebook) -> Vec<Codeword> {
    let shape = cb.shape();
    let mut map: BTreeMap<&[usize], BTreeMap<usize, u32>> = BTreeMap::new();
    for w1 in 0..shape.m1 {
        for w2 in 0..shape.m2 {
            for w3 in 0..shape.m3 {
                *map.entry(cb.entry(w1, w2, w3))
                    .or_default()
                    .entry(shape.pair_index(w1, w2))
                    .or_default() += 1;
            }
        }
    }
    map.into_iter()
        .map(|(symbols, pairs)| Codeword {
            symbols: symbols.to_vec(),
            total: pairs.values().sum(),
            pairs: pairs.into_iter().collect(),
        })
        .collect()
}

/// Exact error probability and secrecy quantities of `cb` on `source`, by
/// enumeration over the distinct codewords, `X^n` and `Z^n`.
pub fn exact_induced_joint(cb: &Codebook, source: &LetterSource, score: &Score) -> Result<ExactEvaluation> {
    let n = cb.n();
    if source.len() != n {
        return Err(Error::Shape(format!("source of length {} for n = {n}", source.len())));
    }
    if source.y_size() != cb.y_size() {
        return Err(Error::AlphabetMismatch {
            left: source.y_size(),
            right: cb.y_size(),
        });
    }
    let shape = cb.shape();
    let y_count = checked_pow(source.y_size(), n, "output sequences", u128::MAX)?;
    let work = y_count as u128 * shape.entries() as u128;
    if work > MAX_ENUMERATION {
        return Err(Error::SizeGuard {
            what: "|Y|^n * m1 * m2 * m3",
            required: work,
            limit: MAX_ENUMERATION,
        });
    }
    let (xs, zs) = (source.x_size(), source.z_size());
    let x_count = checked_pow(xs, n, "input sequences", MAX_ENUMERATION)?;
    let z_count = checked_pow(zs, n, "warden sequences", MAX_ENUMERATION)?;
    let (m1, m2) = (shape.m1, shape.m2);
    let table_size = (m1 * m2) as u128 * z_count as u128;
    if table_size > MAX_ENUMERATION * 16 {
        return Err(Error::SizeGuard {
            what: "induced table cells",
            required: table_size,
            limit: MAX_ENUMERATION * 16,
        });
    }

    let p_xy: Vec<JointPmf> = (0..n).map(|i| source.p_xy(i)).collect();
    let p_yz: Vec<JointPmf> = (0..n).map(|i| source.p_yz(i)).collect();
    let phi = decode_table(cb, xs, score)?;
    let words = codewords(cb);
    let pairs = (m1 * m2) as f64;
    let px_letters: Vec<Pmf> = p_xy.iter().map(|j| j.row_marginal()).collect();

    // Reliability: joint law of (W1, W1_hat).
    let mut key_pair = vec![0.0; m1 * m1];
    let mut px_covered = vec![0.0; x_count];
    let mut covered = 0.0;
    for word in &words {
        for (xi, slot) in px_covered.iter_mut().enumerate() {
            let x = index_sequence(xi, xs, n);
            let p: f64 = (0..n).map(|i| p_xy[i].get(x[i], word.symbols[i])).product();
            if p == 0.0 {
                continue;
            }
            *slot += p;
            covered += p;
            for &(pair, count) in &word.pairs {
                let (w1, w2) = (pair / m2, pair % m2);
                key_pair[w1 * m1 + phi[xi * m2 + w2]] += p * count as f64 / word.total as f64;
            }
        }
    }
    for (xi, covered_x) in px_covered.iter().enumerate() {
        let x = index_sequence(xi, xs, n);
        let px: f64 = (0..n).map(|i| px_letters[i].get(x[i])).product();
        let rest = (px - covered_x).max(0.0);
        if rest == 0.0 {
            continue;
        }
        for w1 in 0..m1 {
            for w2 in 0..m2 {
                key_pair[w1 * m1 + phi[xi * m2 + w2]] += rest / pairs;
            }
        }
    }
    let error_probability = (0..m1)
        .flat_map(|a| (0..m1).map(move |b| (a, b)))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| key_pair[a * m1 + b])
        .sum::<f64>()
        .clamp(0.0, 1.0);

    // Secrecy: P_{W1 W2 Z}.
    let pz_letters: Vec<Pmf> = p_yz.iter().map(|j| j.col_marginal()).collect();
    let mut induced = vec![0.0; m1 * m2 * z_count];
    for zi in 0..z_count {
        let z = index_sequence(zi, zs, n);
        let pz: f64 = (0..n).map(|i| pz_letters[i].get(z[i])).product();
        let mut with_match = 0.0;
        for word in &words {
            let p: f64 = (0..n).map(|i| p_yz[i].get(word.symbols[i], z[i])).product();
            if p == 0.0 {
                continue;
            }
            with_match += p;
            for &(pair, count) in &word.pairs {
                induced[pair * z_count + zi] += p * count as f64 / word.total as f64;
            }
        }
        let rest = (pz - with_match).max(0.0);
        for pair in 0..m1 * m2 {
            induced[pair * z_count + zi] += rest / pairs;
        }
    }
    renormalize(&mut key_pair);
    renormalize(&mut induced);
    let induced = InducedJoint::new(m1, m2, z_count, induced)?;
    Ok(ExactEvaluation {
        error_probability,
        fallback_probability: (1.0 - covered).max(0.0),
        key_tv: induced.key_tv(),
        secrecy_tv: induced.secrecy_tv(),
        independence_tv: induced.independence_tv(),
        public_tv: induced.public_tv(),
        key_pair: JointPmf::new(m1, m1, key_pair)?,
        induced,
    })
}

/// Absorbs rounding drift so the table sums to one.
fn renormalize(mass: &mut [f64]) {
    let total: f64 = mass.iter().sum();
    if total > 0.0 && (total - 1.0).abs() > NORMALIZATION_TOL / 2.0 {
        for m in mass.iter_mut() {
            *m /= total;
        }
    }
}

/// One sampled use of the code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampledUse {
    pub w1: usize,
    pub w2: usize,
    pub w1_hat: usize,
    pub z_index: usize,
    pub fallback: bool,
}

/// Samples the source, encodes at Bob and decodes at Alice.
pub fn sample_use<R: Rng + ?Sized>(
    cb: &Codebook,
    source: &LetterSource,
    score: &Score,
    rng: &mut R,
) -> Result<SampledUse> {
    let (x, y, z) = source.sample(rng);
    let enc = cb.likelihood_encode(&y, rng)?;
    let w1_hat = cb.decode(&x, enc.w2, score)?;
    Ok(SampledUse {
        w1: enc.w1,
        w2: enc.w2,
        w1_hat,
        z_index: sequence_index(&z, source.z_size()),
        fallback: enc.fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::example_fig2;
    use crate::oneshot::{gen_codebook, CodebookShape};
    use crate::probcore::CondPmf;
    use crate::report::MeanAccumulator;
    use crate::seeds::rng_from_seed;
    use approx::assert_abs_diff_eq;

    fn bsc_source(flip_y: f64, flip_z: f64) -> LetterSource {
        // X uniform, Y = X through BSC(flip_y), Z = Y through BSC(flip_z)
        let mut joint = vec![0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let py = if x == y { 1.0 - flip_y } else { flip_y };
                    let pz = if y == z { 1.0 - flip_z } else { flip_z };
                    joint[(x * 2 + y) * 2 + z] = 0.5 * py * pz;
                }
            }
        }
        LetterSource::single(2, 2, 2, joint).unwrap()
    }

    #[test]
    fn source_marginals() {
        let s = bsc_source(0.1, 0.3);
        assert_abs_diff_eq!(s.p_xy(0).get(0, 1), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(s.p_yz(0).get(1, 0), 0.15, epsilon = 1e-15);
        let ch = example_fig2();
        let src = LetterSource::from_channel(&ch, &[0.5, 0.0], &[1, 0]).unwrap();
        assert_abs_diff_eq!(src.p_xy(0).get(1, 1), 0.5 * 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(src.p_xy(1).row_marginal().get(0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_encoder_support() {
        // noiseless Y = X, every output appears exactly once: W is a function of Y
        let src = bsc_source(0.0, 0.5);
        let cb =
            crate::oneshot::Codebook::from_entries(CodebookShape::one_shot(2, 1).unwrap(), 2, vec![vec![0], vec![1]])
                .unwrap();
        let ev = exact_induced_joint(
            &cb,
            &src,
            &Score::information_density(&src.p_xy(0), &Pmf::uniform(2).unwrap()).unwrap(),
        )
        .unwrap();
        assert_eq!(ev.error_probability, 0.0);
        assert_eq!(ev.fallback_probability, 0.0);
        assert_abs_diff_eq!(ev.key_pair.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ev.key_pair.get(1, 1), 0.5, epsilon = 1e-15);
        // Z independent of Y: perfect secrecy
        assert_abs_diff_eq!(ev.secrecy_tv, 0.0, epsilon = 1e-15);
        let total: f64 = ev.induced.mass().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_key_is_trivially_secret() {
        let src = bsc_source(0.1, 0.1);
        let qy = Pmf::uniform(2).unwrap();
        let cb = gen_codebook(&qy, 1, 1, 1, 1, &mut rng_from_seed(1)).unwrap();
        let ev = exact_induced_joint(&cb, &src, &Score::EmpiricalMi).unwrap();
        assert_eq!(ev.key_tv, 0.0);
        assert_eq!(ev.secrecy_tv, 0.0);
        assert_eq!(ev.error_probability, 0.0);
    }

    #[test]
    fn fallback_error_is_one_minus_inverse_keys() {
        // codebook never matches Y = 1
        let src = LetterSource::single(2, 2, 2, vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0]).unwrap();
        let cb = crate::oneshot::Codebook::from_entries(CodebookShape::one_shot(4, 1).unwrap(), 2, vec![vec![0]; 4])
            .unwrap();
        let ev = exact_induced_joint(&cb, &src, &Score::EmpiricalMi).unwrap();
        assert_eq!(ev.fallback_probability, 1.0);
        assert_abs_diff_eq!(ev.error_probability, 0.75, epsilon = 1e-15);
    }

    /// Brute force over (x, y, z) and the encoder's conditional law.
    fn brute_force(cb: &crate::oneshot::Codebook, src: &LetterSource, score: &Score) -> (f64, Vec<f64>) {
        let n = cb.n();
        let (xs, ys, zs) = (src.x_size(), src.y_size(), src.z_size());
        let shape = cb.shape();
        let z_count = zs.pow(n as u32);
        let mut induced = vec![0.0; shape.pairs() * z_count];
        let mut err = 0.0;
        for xi in 0..xs.pow(n as u32) {
            let x = index_sequence(xi, xs, n);
            for yi in 0..ys.pow(n as u32) {
                let y = index_sequence(yi, ys, n);
                let enc = cb.encoder_distribution(&y).unwrap();
                for zi in 0..z_count {
                    let z = index_sequence(zi, zs, n);
                    let p: f64 = (0..n).map(|i| src.at(i, x[i], y[i], z[i])).product();
                    for (pair, &q) in enc.probs.iter().enumerate() {
                        let (w1, w2) = (pair / shape.m2, pair % shape.m2);
                        if cb.decode(&x, w2, score).unwrap() != w1 {
                            err += p * q;
                        }
                        induced[pair * z_count + zi] += p * q;
                    }
                }
            }
        }
        (err, induced)
    }

    #[test]
    fn matches_brute_force_on_example_letters() {
        let ch = example_fig2();
        let states = [0, 1, 1, 0];
        let src = LetterSource::from_channel(&ch, &[0.3; 4], &states).unwrap();
        let qy = ch.marginal_p(0, 0);
        for seed in 0..4 {
            let cb = gen_codebook(&qy, 4, 2, 2, 2, &mut rng_from_seed(seed)).unwrap();
            let ev = exact_induced_joint(&cb, &src, &Score::EmpiricalMi).unwrap();
            let (err, induced) = brute_force(&cb, &src, &Score::EmpiricalMi);
            assert_abs_diff_eq!(ev.error_probability, err, epsilon = 1e-12);
            for (a, b) in ev.induced.mass().iter().zip(&induced) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let src = bsc_source(0.15, 0.25);
        let src = LetterSource::new(2, 2, 2, vec![src.letters[0].clone(); 3]).unwrap();
        let qy = Pmf::uniform(2).unwrap();
        let cb = gen_codebook(&qy, 3, 2, 2, 2, &mut rng_from_seed(5)).unwrap();
        let ev = exact_induced_joint(&cb, &src, &Score::EmpiricalMi).unwrap();
        let witness = ev.induced.secrecy_witness();
        let mut rng = rng_from_seed(6);
        let (mut err, mut sec) = (MeanAccumulator::new(), MeanAccumulator::new());
        for _ in 0..100_000 {
            let u = sample_use(&cb, &src, &Score::EmpiricalMi, &mut rng).unwrap();
            err.push(f64::from(u8::from(u.w1 != u.w1_hat)));
            let w1p = rng.random_range(0..2);
            sec.push(witness.score(u.w1, u.w2, u.z_index, w1p));
        }
        assert!((err.mean() - ev.error_probability).abs() < 4.0 * err.std_error());
        assert!((sec.mean() - ev.secrecy_tv).abs() < 4.0 * sec.std_error());
    }

    #[test]
    fn enumeration_guard() {
        let qy = Pmf::uniform(2).unwrap();
        let cb = gen_codebook(&qy, 16, 4, 4, 2, &mut rng_from_seed(1)).unwrap();
        let src = LetterSource::from_channel(
            &StateDmc::independent(
                [&CondPmf::bsc(0.1).unwrap(), &CondPmf::bsc(0.1).unwrap()],
                [&CondPmf::bsc(0.3).unwrap(), &CondPmf::bsc(0.3).unwrap()],
            )
            .unwrap(),
            &[0.5; 16],
            &[0; 16],
        )
        .unwrap();
        assert!(matches!(
            exact_induced_joint(&cb, &src, &Score::EmpiricalMi),
            Err(Error::SizeGuard { .. })
        ));
    }
}
