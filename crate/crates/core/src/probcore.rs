//! Finite-alphabet probability tables and the information measures built on them.
//!
//! Alphabets are the integer ranges `0..k`; a symbol is a `usize`. All
//! logarithms are base 2, so divergences, entropies and mutual informations
//! are in bits.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};

/// Tolerance on total mass accepted by the checked constructors.
pub const NORMALIZATION_TOL: f64 = 1e-12;

fn validate_masses(mass: &[f64]) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    for (index, &value) in mass.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidMass { index, value });
        }
    }
    let sum: f64 = mass.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            sum,
            tol: NORMALIZATION_TOL,
        });
    }
    Ok(())
}

fn renormalize(weights: Vec<f64>) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::EmptyAlphabet);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidMass { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::NotNormalized {
            sum,
            tol: NORMALIZATION_TOL,
        });
    }
    Ok(weights.into_iter().map(|w| w / sum).collect())
}

/// A probability mass function over the alphabet `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    mass: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;

    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Pmf::new(mass)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.mass
    }
}

impl Pmf {
    /// Builds a PMF, rejecting masses that are negative or do not sum to one.
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        validate_masses(&mass)?;
        Ok(Self { mass })
    }

    /// Builds a PMF by dividing non-negative weights by their sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        Ok(Self {
            mass: renormalize(weights)?,
        })
    }

    /// Bernoulli PMF on `{0, 1}` with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        check_unit_interval("p", p)?;
        Ok(Self { mass: vec![1.0 - p, p] })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(Self {
            mass: vec![1.0 / size as f64; size],
        })
    }

    pub fn point(size: usize, symbol: usize) -> Result<Self> {
        if symbol >= size {
            return Err(Error::SymbolOutOfRange { symbol, size });
        }
        let mut mass = vec![0.0; size];
        mass[symbol] = 1.0;
        Ok(Self { mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.mass[symbol]
    }

    /// Smallest mass on the alphabet.
    pub fn min_mass(&self) -> f64 {
        self.mass.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(1 - w) * self + w * other`.
    pub fn mix(&self, other: &Pmf, w: f64) -> Result<Pmf> {
        check_unit_interval("mixture weight", w)?;
        same_alphabet(self, other)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        Pmf::from_weights(mass)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Pmf) -> Result<f64> {
        same_alphabet(self, other)?;
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn same_alphabet(p: &Pmf, q: &Pmf) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// A joint PMF over `rows x cols`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    rows: usize,
    cols: usize,
    mass: Vec<f64>,
}

impl JointPmf {
    pub fn new(rows: usize, cols: usize, mass: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if mass.len() != rows * cols {
            return Err(Error::Shape(format!("{} masses for a {rows}x{cols} table", mass.len())));
        }
        validate_masses(&mass)?;
        Ok(Self { rows, cols, mass })
    }

    pub fn from_weights(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} weights for a {rows}x{cols} table",
                weights.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            mass: renormalize(weights)?,
        })
    }

    /// The independent joint `p x q`.
    pub fn product(p: &Pmf, q: &Pmf) -> Self {
        let mass = p.mass.iter().flat_map(|a| q.mass.iter().map(move |b| a * b)).collect();
        Self {
            rows: p.len(),
            cols: q.len(),
            mass,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.mass[row * self.cols + col]
    }

    pub fn row_marginal(&self) -> Pmf {
        let mass = self.mass.chunks(self.cols).map(|r| r.iter().sum()).collect();
        Pmf { mass }
    }

    pub fn col_marginal(&self) -> Pmf {
        let mut mass = vec![0.0; self.cols];
        for row in self.mass.chunks(self.cols) {
            for (m, v) in mass.iter_mut().zip(row) {
                *m += v;
            }
        }
        Pmf { mass }
    }

    /// Product of the two marginals of this joint.
    pub fn marginal_product(&self) -> JointPmf {
        JointPmf::product(&self.row_marginal(), &self.col_marginal())
    }

    /// Flattens the table into a PMF over `rows * cols` symbols.
    pub fn flatten(&self) -> Pmf {
        Pmf {
            mass: self.mass.clone(),
        }
    }

    pub fn max_abs_diff(&self, other: &JointPmf) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        self.flatten().max_abs_diff(&other.flatten())
    }
}

/// A conditional PMF: one output PMF per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondPmf {
    rows: Vec<Pmf>,
}

impl CondPmf {
    pub fn new(rows: Vec<Pmf>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyAlphabet)?.len();
        for r in &rows {
            if r.len() != first {
                return Err(Error::AlphabetMismatch {
                    left: first,
                    right: r.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Self::binary_asymmetric(p, p)
    }

    /// Binary channel flipping `0` with probability `p0` and `1` with probability `p1`.
    pub fn binary_asymmetric(p0: f64, p1: f64) -> Result<Self> {
        Self::new(vec![Pmf::bernoulli(p0)?, Pmf::bernoulli(1.0 - p1)?])
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, input: usize) -> &Pmf {
        &self.rows[input]
    }

    /// Joint PMF of `(input, output)` when the input follows `input`.
    pub fn joint(&self, input: &Pmf) -> Result<JointPmf> {
        if input.len() != self.inputs() {
            return Err(Error::AlphabetMismatch {
                left: input.len(),
                right: self.inputs(),
            });
        }
        let mass = input
            .mass
            .iter()
            .zip(&self.rows)
            .flat_map(|(px, row)| row.mass.iter().map(move |w| px * w))
            .collect();
        Ok(JointPmf {
            rows: self.inputs(),
            cols: self.outputs(),
            mass,
        })
    }

    /// Output PMF when the input follows `input`.
    pub fn output(&self, input: &Pmf) -> Result<Pmf> {
        Ok(self.joint(input)?.col_marginal())
    }
}

/// Counts of each symbol along a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqType {
    len: usize,
    counts: Vec<usize>,
}

impl SeqType {
    pub fn of(seq: &[usize], alphabet: usize) -> Result<Self> {
        let mut counts = vec![0; alphabet];
        for &a in seq {
            *counts.get_mut(a).ok_or(Error::SymbolOutOfRange {
                symbol: a,
                size: alphabet,
            })? += 1;
        }
        Ok(Self { len: seq.len(), counts })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `N(x|a)`.
    pub fn count(&self, symbol: usize) -> usize {
        self.counts[symbol]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Empirical PMF of the sequence.
    pub fn to_pmf(&self) -> Result<Pmf> {
        if self.len == 0 {
            return Err(Error::Shape("type of an empty sequence".into()));
        }
        Ok(Pmf {
            mass: self.counts.iter().map(|&c| c as f64 / self.len as f64).collect(),
        })
    }
}

/// Joint counts `N(x, y | a, b)` along a pair of sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointType {
    len: usize,
    rows: usize,
    cols: usize,
    counts: Vec<usize>,
}

impl JointType {
    pub fn of(x: &[usize], y: &[usize], rows: usize, cols: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!(
                "sequences of lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        let mut counts = vec![0; rows * cols];
        for (&a, &b) in x.iter().zip(y) {
            if a >= rows {
                return Err(Error::SymbolOutOfRange { symbol: a, size: rows });
            }
            if b >= cols {
                return Err(Error::SymbolOutOfRange { symbol: b, size: cols });
            }
            counts[a * cols + b] += 1;
        }
        Ok(Self {
            len: x.len(),
            rows,
            cols,
            counts,
        })
    }

    pub fn count(&self, a: usize, b: usize) -> usize {
        self.counts[a * self.cols + b]
    }

    pub fn to_joint(&self) -> Result<JointPmf> {
        if self.len == 0 {
            return Err(Error::Shape("type of empty sequences".into()));
        }
        let n = self.len as f64;
        Ok(JointPmf {
            rows: self.rows,
            cols: self.cols,
            mass: self.counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    /// Mutual information of the joint type, from integer counts.
    pub fn mutual_information(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        let n = self.len as f64;
        let mut row_counts = vec![0usize; self.rows];
        let mut col_counts = vec![0usize; self.cols];
        for a in 0..self.rows {
            for b in 0..self.cols {
                let c = self.count(a, b);
                row_counts[a] += c;
                col_counts[b] += c;
            }
        }
        let mut mi = 0.0;
        for a in 0..self.rows {
            for b in 0..self.cols {
                let c = self.count(a, b);
                if c > 0 {
                    let ratio = c as f64 * n / (row_counts[a] as f64 * col_counts[b] as f64);
                    mi += c as f64 / n * ratio.log2();
                }
            }
        }
        mi.max(0.0)
    }
}

/// Relative entropy `D(p || q)` in bits.
pub fn kl(p: &Pmf, q: &Pmf) -> Result<f64> {
    same_alphabet(p, q)?;
    let mut d = 0.0;
    for (index, (&pa, &qa)) in p.mass.iter().zip(&q.mass).enumerate() {
        if pa == 0.0 {
            continue;
        }
        if qa == 0.0 {
            return Err(Error::InfiniteDivergence { index });
        }
        d += pa * (pa / qa).log2();
    }
    Ok(d.max(0.0))
}

/// Chi-squared divergence `sum (p - q)^2 / q`.
pub fn chi2(p: &Pmf, q: &Pmf) -> Result<f64> {
    same_alphabet(p, q)?;
    let mut d = 0.0;
    for (index, (&pa, &qa)) in p.mass.iter().zip(&q.mass).enumerate() {
        if qa == 0.0 {
            return Err(Error::InfiniteDivergence { index });
        }
        d += (pa - qa) * (pa - qa) / qa;
    }
    Ok(d)
}

/// Total variation distance `1/2 sum |p - q|`.
pub fn tv(p: &Pmf, q: &Pmf) -> Result<f64> {
    same_alphabet(p, q)?;
    Ok(0.5 * p.mass.iter().zip(&q.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Relative entropy between two joint tables of identical shape.
pub fn kl_joint(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    if p.rows != q.rows || p.cols != q.cols {
        return Err(Error::Shape(format!("{}x{} vs {}x{}", p.rows, p.cols, q.rows, q.cols)));
    }
    kl(&p.flatten(), &q.flatten())
}

/// `I(X; Y)` of a joint table, in bits.
pub fn mutual_information(joint: &JointPmf) -> f64 {
    let px = joint.row_marginal();
    let py = joint.col_marginal();
    let mut mi = 0.0;
    for a in 0..joint.rows {
        for b in 0..joint.cols {
            let m = joint.get(a, b);
            if m > 0.0 {
                mi += m * (m / (px.mass[a] * py.mass[b])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Empirical mutual information `I(x ^ y)` of two sequences over alphabets
/// inferred from their largest symbols.
pub fn empirical_mi(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "sequences of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Shape("empirical mutual information of empty sequences".into()));
    }
    let rows = x.iter().copied().max().unwrap_or(0) + 1;
    let cols = y.iter().copied().max().unwrap_or(0) + 1;
    Ok(JointType::of(x, y, rows, cols)?.mutual_information())
}

/// Binary entropy `H_b(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_unit_interval("p", p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}
