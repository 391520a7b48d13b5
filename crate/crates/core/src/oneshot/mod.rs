//! Random codebook, likelihood encoder and universal decoder for the
//! auxiliary key-generation problem, with exact small-instance evaluation.
//!
//! Indices are 0-based throughout: `w1 < m1`, `w2 < m2`, `w3 < m3`. The
//! one-shot problem is the case `n = 1`, `m3 = 1`.

pub mod bounds;
pub mod exact;
pub mod verify;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{JointPmf, JointType, Pmf};

pub use bounds::{best_delta, best_gamma, delta_range, reliability_bound_rhs, secrecy_bound_rhs, OneShotParams};
pub use exact::{exact_induced_joint, ExactEvaluation, InducedJoint, LetterSource, SecrecyWitness};
pub use verify::{default_oneshot_grid, default_oneshot_source, verify_oneshot_bounds, OneShotReport, VerifyConfig};

/// Codebooks with more symbols than this are rejected.
pub const MAX_CODEBOOK_SYMBOLS: u128 = 1 << 24;

/// Limit on `|Y|^n * m1 * m2 * m3` for exact enumeration.
pub const MAX_ENUMERATION: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodebookShape {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
}

impl CodebookShape {
    pub fn new(n: usize, m1: usize, m2: usize, m3: usize) -> Result<Self> {
        if n == 0 || m1 == 0 || m2 == 0 || m3 == 0 {
            return Err(Error::Precondition(format!(
                "codebook dimensions must be positive (n={n}, m1={m1}, m2={m2}, m3={m3})"
            )));
        }
        let shape = Self { n, m1, m2, m3 };
        let symbols = shape.symbols();
        if symbols > MAX_CODEBOOK_SYMBOLS {
            return Err(Error::SizeGuard {
                what: "codebook symbols",
                required: symbols,
                limit: MAX_CODEBOOK_SYMBOLS,
            });
        }
        Ok(shape)
    }

    pub fn one_shot(m1: usize, m2: usize) -> Result<Self> {
        Self::new(1, m1, m2, 1)
    }

    /// `n * m1 * m2 * m3`, without overflow.
    pub fn symbols(&self) -> u128 {
        self.n as u128 * self.m1 as u128 * self.m2 as u128 * self.m3 as u128
    }

    pub fn entries(&self) -> usize {
        self.m1 * self.m2 * self.m3
    }

    /// Number of `(w1, w2)` pairs.
    pub fn pairs(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn entry_index(&self, w1: usize, w2: usize, w3: usize) -> usize {
        (w1 * self.m2 + w2) * self.m3 + w3
    }

    pub fn pair_index(&self, w1: usize, w2: usize) -> usize {
        w1 * self.m2 + w2
    }
}

/// Shared random codebook `{Y~_{w1 w2 w3}}`, each entry a length-`n` sequence over `Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    shape: CodebookShape,
    y_size: usize,
    symbols: Vec<usize>,
}

impl Codebook {
    /// Draws every symbol iid from `qy`.
    pub fn generate<R: Rng + ?Sized>(qy: &Pmf, shape: CodebookShape, rng: &mut R) -> Result<Self> {
        let total = shape.symbols() as usize;
        let cdf: Vec<f64> = qy
            .mass()
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last = qy.len() - 1;
        let symbols = (0..total)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * cdf[last];
                cdf.iter().position(|&c| u < c).unwrap_or(last)
            })
            .collect();
        Ok(Self {
            shape,
            y_size: qy.len(),
            symbols,
        })
    }

    /// Builds a codebook from explicit entries in `entry_index` order.
    pub fn from_entries(shape: CodebookShape, y_size: usize, entries: Vec<Vec<usize>>) -> Result<Self> {
        if entries.len() != shape.entries() {
            return Err(Error::Shape(format!(
                "{} entries for a codebook of {}",
                entries.len(),
                shape.entries()
            )));
        }
        let mut symbols = Vec::with_capacity(shape.symbols() as usize);
        for e in entries {
            if e.len() != shape.n {
                return Err(Error::Shape(format!(
                    "entry of length {} with n = {}",
                    e.len(),
                    shape.n
                )));
            }
            for &y in &e {
                if y >= y_size {
                    return Err(Error::SymbolOutOfRange {
                        symbol: y,
                        size: y_size,
                    });
                }
            }
            symbols.extend(e);
        }
        Ok(Self { shape, y_size, symbols })
    }

    pub fn shape(&self) -> CodebookShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.n
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn entry(&self, w1: usize, w2: usize, w3: usize) -> &[usize] {
        self.entry_at(self.shape.entry_index(w1, w2, w3))
    }

    fn entry_at(&self, index: usize) -> &[usize] {
        let n = self.shape.n;
        &self.symbols[index * n..(index + 1) * n]
    }

    /// Occurrences of each output symbol across the whole codebook.
    pub fn symbol_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.y_size];
        for &y in &self.symbols {
            counts[y] += 1;
        }
        counts
    }

    fn check_len(&self, seq: &[usize]) -> Result<()> {
        if seq.len() != self.shape.n {
            return Err(Error::Shape(format!(
                "sequence of length {} for a codebook with n = {}",
                seq.len(),
                self.shape.n
            )));
        }
        Ok(())
    }

    /// Number of `w3` entries equal to `y` at each `(w1, w2)`, in `pair_index` order.
    pub fn match_counts(&self, y: &[usize]) -> Result<Vec<u32>> {
        self.check_len(y)?;
        let mut counts = vec![0u32; self.shape.pairs()];
        for (index, count) in counts.iter_mut().enumerate() {
            for w3 in 0..self.shape.m3 {
                if self.entry_at(index * self.shape.m3 + w3) == y {
                    *count += 1;
                }
            }
        }
        Ok(counts)
    }

    /// Exact conditional law of `(W1, W2)` given `y`.
    pub fn encoder_distribution(&self, y: &[usize]) -> Result<EncoderDistribution> {
        let counts = self.match_counts(y)?;
        let total: u32 = counts.iter().sum();
        let pairs = self.shape.pairs();
        Ok(if total == 0 {
            EncoderDistribution {
                probs: vec![1.0 / pairs as f64; pairs],
                fallback: true,
            }
        } else {
            EncoderDistribution {
                probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
                fallback: false,
            }
        })
    }

    /// Likelihood encoder: a uniformly chosen matching entry, or a uniform pair if none match.
    pub fn likelihood_encode<R: Rng + ?Sized>(&self, y: &[usize], rng: &mut R) -> Result<Encoded> {
        self.check_len(y)?;
        let matches: Vec<usize> = (0..self.shape.entries()).filter(|&i| self.entry_at(i) == y).collect();
        let m3 = self.shape.m3;
        let m2 = self.shape.m2;
        Ok(if matches.is_empty() {
            let pair = rng.random_range(0..self.shape.pairs());
            Encoded {
                w1: pair / m2,
                w2: pair % m2,
                fallback: true,
            }
        } else {
            let pair = matches[rng.random_range(0..matches.len())] / m3;
            Encoded {
                w1: pair / m2,
                w2: pair % m2,
                fallback: false,
            }
        })
    }

    /// `argmax_{w1} max_{w3} score(x, Y~_{w1 w2 w3})`; ties go to the smallest `w1`.
    pub fn decode(&self, x: &[usize], w2: usize, score: &Score) -> Result<usize> {
        self.check_len(x)?;
        if w2 >= self.shape.m2 {
            return Err(Error::SymbolOutOfRange {
                symbol: w2,
                size: self.shape.m2,
            });
        }
        let x_size = x.iter().copied().max().unwrap_or(0) + 1;
        let mut best = (0, f64::NEG_INFINITY);
        for w1 in 0..self.shape.m1 {
            let mut inner = f64::NEG_INFINITY;
            for w3 in 0..self.shape.m3 {
                inner = inner.max(score.evaluate(x, self.entry(w1, w2, w3), x_size, self.y_size)?);
            }
            if inner > best.1 || w1 == 0 {
                best = (w1, inner);
            }
        }
        Ok(best.0)
    }

    /// Maximum empirical mutual information decoder.
    pub fn mmi_decode(&self, x: &[usize], w2: usize) -> Result<usize> {
        self.decode(x, w2, &Score::EmpiricalMi)
    }
}

/// Draws a codebook of shape `(n, m1, m2, m3)` with iid `qy` symbols.
pub fn gen_codebook<R: Rng + ?Sized>(
    qy: &Pmf,
    n: usize,
    m1: usize,
    m2: usize,
    m3: usize,
    rng: &mut R,
) -> Result<Codebook> {
    Codebook::generate(qy, CodebookShape::new(n, m1, m2, m3)?, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDistribution {
    /// Probability of each `(w1, w2)` in `pair_index` order.
    pub probs: Vec<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Encoded {
    pub w1: usize,
    pub w2: usize,
    pub fallback: bool,
}

/// Decoding metric `nu(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    /// Empirical mutual information of the joint type. Constant when `n = 1`.
    EmpiricalMi,
    /// Per-letter table summed over positions.
    Additive {
        x_size: usize,
        y_size: usize,
        table: Vec<f64>,
    },
}

impl Score {
    /// `log2 P_XY(x, y) / (P_X(x) Q_Y(y))`, the information density against `qy`.
    pub fn information_density(p_xy: &JointPmf, qy: &Pmf) -> Result<Self> {
        if p_xy.cols() != qy.len() {
            return Err(Error::AlphabetMismatch {
                left: p_xy.cols(),
                right: qy.len(),
            });
        }
        let px = p_xy.row_marginal();
        let mut table = Vec::with_capacity(p_xy.rows() * p_xy.cols());
        for x in 0..p_xy.rows() {
            for y in 0..p_xy.cols() {
                let joint = p_xy.get(x, y);
                table.push(if joint > 0.0 {
                    (joint / (px.get(x) * qy.get(y))).log2()
                } else {
                    f64::NEG_INFINITY
                });
            }
        }
        Ok(Score::Additive {
            x_size: p_xy.rows(),
            y_size: p_xy.cols(),
            table,
        })
    }

    pub fn evaluate(&self, x: &[usize], y: &[usize], x_size: usize, y_size: usize) -> Result<f64> {
        match self {
            Score::EmpiricalMi => {
                let y_size = y_size.max(y.iter().copied().max().unwrap_or(0) + 1);
                Ok(JointType::of(x, y, x_size, y_size)?.mutual_information())
            }
            Score::Additive {
                x_size: xs,
                y_size: ys,
                table,
            } => {
                let mut total = 0.0;
                for (&a, &b) in x.iter().zip(y) {
                    if a >= *xs {
                        return Err(Error::SymbolOutOfRange { symbol: a, size: *xs });
                    }
                    if b >= *ys {
                        return Err(Error::SymbolOutOfRange { symbol: b, size: *ys });
                    }
                    total += table[a * ys + b];
                }
                Ok(total)
            }
        }
    }

    /// Single-letter value `nu(x, y)`.
    pub fn letter(&self, x: usize, y: usize) -> Result<f64> {
        self.evaluate(&[x], &[y], x + 1, y + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    fn shape(n: usize, m1: usize, m2: usize, m3: usize) -> CodebookShape {
        CodebookShape::new(n, m1, m2, m3).unwrap()
    }

    #[test]
    fn point_mass_codebook_is_constant() {
        let qy = Pmf::point(3, 2).unwrap();
        let cb = gen_codebook(&qy, 4, 2, 3, 2, &mut rng_from_seed(1)).unwrap();
        assert_eq!(cb.symbol_counts(), vec![0, 0, 48]);
    }

    #[test]
    fn generation_is_seeded() {
        let qy = Pmf::new(vec![0.3, 0.7]).unwrap();
        let a = gen_codebook(&qy, 5, 4, 2, 2, &mut rng_from_seed(7)).unwrap();
        let b = gen_codebook(&qy, 5, 4, 2, 2, &mut rng_from_seed(7)).unwrap();
        let c = gen_codebook(&qy, 5, 4, 2, 2, &mut rng_from_seed(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn size_guard() {
        assert!(matches!(
            CodebookShape::new(1 << 10, 1 << 10, 1 << 5, 1),
            Err(Error::SizeGuard { .. })
        ));
        assert!(CodebookShape::new(1 << 10, 1 << 10, 1 << 4, 1).is_ok());
        assert!(matches!(CodebookShape::new(0, 1, 1, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn symbol_frequency_matches_generator() {
        let qy = Pmf::new(vec![0.2, 0.5, 0.3]).unwrap();
        let cb = gen_codebook(&qy, 100, 10, 10, 10, &mut rng_from_seed(11)).unwrap();
        let counts = cb.symbol_counts();
        let total = 100_000.0;
        for (y, &c) in counts.iter().enumerate() {
            let p = qy.get(y);
            let sd = (total * p * (1.0 - p)).sqrt();
            assert!((c as f64 - total * p).abs() < 4.0 * sd, "symbol {y}: {c}");
        }
    }

    #[test]
    fn encoder_unique_match() {
        let cb = Codebook::from_entries(
            shape(2, 2, 2, 1),
            2,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
        )
        .unwrap();
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let e = cb.likelihood_encode(&[1, 0], &mut rng).unwrap();
            assert_eq!((e.w1, e.w2, e.fallback), (1, 0, false));
        }
    }

    #[test]
    fn encoder_count_ratio() {
        // matches at (0,0,.) twice and (1,0,.) once
        let entries = vec![vec![1], vec![1], vec![0], vec![0], vec![1], vec![0], vec![0], vec![0]];
        let cb = Codebook::from_entries(shape(1, 2, 2, 2), 2, entries).unwrap();
        let dist = cb.encoder_distribution(&[1]).unwrap();
        assert_eq!(dist.probs, vec![2.0 / 3.0, 0.0, 1.0 / 3.0, 0.0]);
        let mut rng = rng_from_seed(3);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| cb.likelihood_encode(&[1], &mut rng).unwrap().w1 == 0)
            .count();
        let sd = (trials as f64 * 2.0 / 9.0).sqrt();
        assert!((hits as f64 - trials as f64 * 2.0 / 3.0).abs() < 4.0 * sd);
    }

    #[test]
    fn encoder_fallback_is_uniform() {
        let cb = Codebook::from_entries(shape(1, 2, 2, 1), 3, vec![vec![0]; 4]).unwrap();
        let dist = cb.encoder_distribution(&[2]).unwrap();
        assert!(dist.fallback);
        assert_eq!(dist.probs, vec![0.25; 4]);
        let mut rng = rng_from_seed(4);
        let trials = 40_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let e = cb.likelihood_encode(&[2], &mut rng).unwrap();
            assert!(e.fallback);
            counts[e.w1 * 2 + e.w2] += 1;
        }
        let sd = (trials as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 / 4.0).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn mmi_noiseless_recovers_key() {
        let n = 6;
        let (m1, m2) = (4, 2);
        let target = vec![0, 1, 1, 0, 1, 0];
        let mut entries = vec![vec![0; n]; m1 * m2];
        entries[shape(n, m1, m2, 1).entry_index(3, 1, 0)] = target.clone();
        let cb = Codebook::from_entries(shape(n, m1, m2, 1), 2, entries).unwrap();
        assert_eq!(cb.mmi_decode(&target, 1).unwrap(), 3);
    }

    #[test]
    fn mmi_ties_pick_smallest() {
        let cb = Codebook::from_entries(shape(3, 4, 2, 2), 2, vec![vec![1, 0, 1]; 16]).unwrap();
        assert_eq!(cb.mmi_decode(&[1, 0, 0], 1).unwrap(), 0);
    }

    #[test]
    fn additive_score_decoder() {
        let p_xy = JointPmf::new(2, 2, vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let qy = Pmf::uniform(2).unwrap();
        let score = Score::information_density(&p_xy, &qy).unwrap();
        assert!((score.letter(0, 0).unwrap() - 0.9f64.log2() - 1.0).abs() < 1e-12);
        let cb = Codebook::from_entries(shape(1, 2, 1, 1), 2, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(cb.decode(&[1], 0, &score).unwrap(), 1);
        assert_eq!(cb.decode(&[0], 0, &score).unwrap(), 0);
        assert_eq!(cb.mmi_decode(&[1], 0).unwrap(), 0);
    }

    #[test]
    fn length_and_index_errors() {
        let cb = Codebook::from_entries(shape(2, 1, 1, 1), 2, vec![vec![0, 1]]).unwrap();
        assert!(matches!(cb.mmi_decode(&[0], 0), Err(Error::Shape(_))));
        assert!(matches!(cb.mmi_decode(&[0, 1], 1), Err(Error::SymbolOutOfRange { .. })));
        assert!(cb.encoder_distribution(&[0, 1, 1]).is_err());
        assert!(Codebook::from_entries(shape(2, 1, 1, 1), 2, vec![vec![0, 2]]).is_err());
    }
}
