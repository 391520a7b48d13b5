//! State-dependent memoryless channel `W_{YZ|XS}` with binary input and state.
//!
//! Each `(x, s)` pair owns an explicit joint slice over `Y x Z`, so correlated
//! legitimate/warden outputs are representable. Bob's marginal of a slice is
//! `P_x^s`, the warden's is `Q_x^s`, the slice itself is `(PQ)_x^s`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{CondPmf, JointPmf, Pmf};

/// Size of the input and state alphabets.
pub const BINARY: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct StateDmc {
    y_size: usize,
    z_size: usize,
    // indexed by 2 * x + s
    slices: [JointPmf; 4],
}

/// Entrywise comparison of the hypotheses the active-warden construction needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub tol: f64,
    /// `P_0^0 = P_0^1`.
    pub p0_state_invariant: bool,
    pub p0_deviation: f64,
    /// `P_1^1 != P_1^0`.
    pub p1_states_distinct: bool,
    pub p1_deviation: f64,
    /// `(PQ)_0^s = P_0^s x Q_0^s`, per state.
    pub zero_input_independent: [bool; 2],
    pub zero_input_deviation: [f64; 2],
    /// `(PQ)_1^s = P_1^s x Q_1^s`, per state.
    pub one_input_independent: [bool; 2],
    pub one_input_deviation: [f64; 2],
}

impl HypothesisReport {
    /// True when every hypothesis required for the active-warden rate holds.
    /// Independence at input 1 is not required.
    pub fn active_hypotheses_hold(&self) -> bool {
        self.p0_state_invariant && self.p1_states_distinct && self.zero_input_independent.iter().all(|&b| b)
    }

    pub fn all_hold(&self) -> bool {
        self.active_hypotheses_hold() && self.one_input_independent.iter().all(|&b| b)
    }

    /// Names of the failing hypotheses, for error reports.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.p0_state_invariant {
            out.push(format!("P_0^0 != P_0^1 (max deviation {:e})", self.p0_deviation));
        }
        if !self.p1_states_distinct {
            out.push(format!("P_1^1 == P_1^0 (max deviation {:e})", self.p1_deviation));
        }
        for s in 0..2 {
            if !self.zero_input_independent[s] {
                out.push(format!(
                    "(PQ)_0^{s} != P_0^{s} x Q_0^{s} (max deviation {:e})",
                    self.zero_input_deviation[s]
                ));
            }
        }
        out
    }
}

impl StateDmc {
    /// Builds a channel from its four `Y x Z` slices, ordered
    /// `[(x=0,s=0), (x=0,s=1), (x=1,s=0), (x=1,s=1)]`.
    pub fn new(slices: [JointPmf; 4]) -> Result<Self> {
        let y_size = slices[0].rows();
        let z_size = slices[0].cols();
        for sl in &slices {
            if sl.rows() != y_size || sl.cols() != z_size {
                return Err(Error::Shape(format!(
                    "slice of shape {}x{} in a {y_size}x{z_size} channel",
                    sl.rows(),
                    sl.cols()
                )));
            }
        }
        Ok(Self { y_size, z_size, slices })
    }

    /// Builds a channel whose outputs are conditionally independent given `(x, s)`.
    /// `bob[s]` and `warden[s]` are the per-state channels from `X`.
    pub fn independent(bob: [&CondPmf; 2], warden: [&CondPmf; 2]) -> Result<Self> {
        for s in 0..2 {
            if bob[s].inputs() != BINARY || warden[s].inputs() != BINARY {
                return Err(Error::Shape("channel inputs must be binary".into()));
            }
        }
        let slice = |x: usize, s: usize| JointPmf::product(bob[s].row(x), warden[s].row(x));
        Self::new([slice(0, 0), slice(0, 1), slice(1, 0), slice(1, 1)])
    }

    /// A channel that ignores the state: both states use the same slices.
    pub fn stateless(zero_input: JointPmf, one_input: JointPmf) -> Result<Self> {
        Self::new([zero_input.clone(), zero_input, one_input.clone(), one_input])
    }

    fn index(x: usize, s: usize) -> usize {
        assert!(x < BINARY && s < BINARY, "input and state must be binary");
        2 * x + s
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    /// `(PQ)_x^s`.
    pub fn joint_pq(&self, x: usize, s: usize) -> &JointPmf {
        &self.slices[Self::index(x, s)]
    }

    /// `P_x^s`, Bob's output given `(x, s)`.
    pub fn marginal_p(&self, x: usize, s: usize) -> Pmf {
        self.joint_pq(x, s).row_marginal()
    }

    /// `Q_x^s`, the warden's output given `(x, s)`.
    pub fn marginal_q(&self, x: usize, s: usize) -> Pmf {
        self.joint_pq(x, s).col_marginal()
    }

    /// Bob's channel `P_{Y|X}` at state `s`.
    pub fn bob_channel(&self, s: usize) -> CondPmf {
        CondPmf::new(vec![self.marginal_p(0, s), self.marginal_p(1, s)]).expect("slices share Y")
    }

    /// Bob's channel averaged over states, `(1 - beta) W_{Y|X,S=0} + beta W_{Y|X,S=1}`.
    pub fn bob_mixture(&self, beta: f64) -> Result<CondPmf> {
        let rows = (0..BINARY)
            .map(|x| self.marginal_p(x, 0).mix(&self.marginal_p(x, 1), beta))
            .collect::<Result<Vec<_>>>()?;
        CondPmf::new(rows)
    }

    /// Joint of `(Y, Z)` at state `s` when the input is Bernoulli(`alpha`).
    pub fn output_joint(&self, alpha: f64, s: usize) -> Result<JointPmf> {
        crate::error::check_unit_interval("alpha", alpha)?;
        let a = self.joint_pq(0, s).mass();
        let b = self.joint_pq(1, s).mass();
        let mass = a.iter().zip(b).map(|(u, v)| (1.0 - alpha) * u + alpha * v).collect();
        JointPmf::from_weights(self.y_size, self.z_size, mass)
    }

    pub fn validate_hypotheses(&self, tol: f64) -> Result<HypothesisReport> {
        if !(tol > 0.0) {
            return Err(Error::Domain {
                name: "tol",
                value: tol,
                domain: "(0, inf)",
            });
        }
        let p0_deviation = self.marginal_p(0, 0).max_abs_diff(&self.marginal_p(0, 1))?;
        let p1_deviation = self.marginal_p(1, 1).max_abs_diff(&self.marginal_p(1, 0))?;
        let independence = |x: usize, s: usize| -> Result<f64> {
            let sl = self.joint_pq(x, s);
            sl.max_abs_diff(&sl.marginal_product())
        };
        let zero_input_deviation = [independence(0, 0)?, independence(0, 1)?];
        let one_input_deviation = [independence(1, 0)?, independence(1, 1)?];
        Ok(HypothesisReport {
            tol,
            p0_state_invariant: p0_deviation <= tol,
            p0_deviation,
            p1_states_distinct: p1_deviation > tol,
            p1_deviation,
            zero_input_independent: zero_input_deviation.map(|d| d <= tol),
            zero_input_deviation,
            one_input_independent: one_input_deviation.map(|d| d <= tol),
            one_input_deviation,
        })
    }

    /// Draws `(y_i, z_i)` independently from the `(x_i, s_i)` slices.
    pub fn sample<R: Rng + ?Sized>(&self, xs: &[usize], ss: &[usize], rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
        if xs.len() != ss.len() {
            return Err(Error::Shape(format!("{} inputs and {} states", xs.len(), ss.len())));
        }
        for &v in xs.iter().chain(ss) {
            if v >= BINARY {
                return Err(Error::SymbolOutOfRange {
                    symbol: v,
                    size: BINARY,
                });
            }
        }
        let samplers = self.samplers();
        let mut ys = Vec::with_capacity(xs.len());
        let mut zs = Vec::with_capacity(xs.len());
        for (&x, &s) in xs.iter().zip(ss) {
            let cell = samplers[Self::index(x, s)].sample(rng);
            ys.push(cell / self.z_size);
            zs.push(cell % self.z_size);
        }
        Ok((ys, zs))
    }

    pub(crate) fn samplers(&self) -> Vec<WeightedIndex<f64>> {
        self.slices
            .iter()
            .map(|sl| WeightedIndex::new(sl.mass().iter().copied()).expect("slice has positive mass"))
            .collect()
    }

    /// Parses the channel spec file format.
    pub fn from_spec_str(text: &str) -> Result<Self> {
        let spec: ChannelSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.try_into()
    }

    pub fn to_spec_string(&self) -> String {
        toml::to_string(&ChannelSpec::from(self)).expect("channel spec serializes")
    }
}

/// On-disk channel description: four row-major `Y x Z` probability lists.
///
/// ```toml
/// y_size = 2
/// z_size = 2
/// x0_s0 = [0.54, 0.36, 0.06, 0.04]
/// x0_s1 = [0.63, 0.27, 0.07, 0.03]
/// x1_s0 = [0.04, 0.06, 0.36, 0.54]
/// x1_s1 = [0.06, 0.14, 0.24, 0.56]
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub y_size: usize,
    pub z_size: usize,
    pub x0_s0: Vec<f64>,
    pub x0_s1: Vec<f64>,
    pub x1_s0: Vec<f64>,
    pub x1_s1: Vec<f64>,
}

impl TryFrom<ChannelSpec> for StateDmc {
    type Error = Error;

    fn try_from(spec: ChannelSpec) -> Result<Self> {
        let (ny, nz) = (spec.y_size, spec.z_size);
        let slice = |name: &str, mass: Vec<f64>| {
            JointPmf::new(ny, nz, mass).map_err(|e| Error::Parse(format!("slice {name}: {e}")))
        };
        StateDmc::new([
            slice("x0_s0", spec.x0_s0)?,
            slice("x0_s1", spec.x0_s1)?,
            slice("x1_s0", spec.x1_s0)?,
            slice("x1_s1", spec.x1_s1)?,
        ])
    }
}

impl From<&StateDmc> for ChannelSpec {
    fn from(ch: &StateDmc) -> Self {
        Self {
            y_size: ch.y_size,
            z_size: ch.z_size,
            x0_s0: ch.slices[0].mass().to_vec(),
            x0_s1: ch.slices[1].mass().to_vec(),
            x1_s0: ch.slices[2].mass().to_vec(),
            x1_s1: ch.slices[3].mass().to_vec(),
        }
    }
}

/// The worked binary example: at `s = 0` Bob sees BSC(0.1) and the warden
/// BSC(0.4); at `s = 1` Bob sees a binary asymmetric channel flipping `0`
/// with probability 0.1 and `1` with probability 0.2, the warden BSC(0.3).
/// Outputs are independent given `(x, s)`.
pub fn example_fig2() -> StateDmc {
    let bob0 = CondPmf::bsc(0.1).unwrap();
    let bob1 = CondPmf::binary_asymmetric(0.1, 0.2).unwrap();
    let warden0 = CondPmf::bsc(0.4).unwrap();
    let warden1 = CondPmf::bsc(0.3).unwrap();
    StateDmc::independent([&bob0, &bob1], [&warden0, &warden1]).unwrap()
}
