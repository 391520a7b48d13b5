//! Closed-form covert throughput formulas.
//!
//! Rates are in bits per `sqrt(n * tau)`, where `tau` is the covertness
//! budget, never per channel use.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::StateDmc;
use crate::error::{check_open_unit_interval, check_unit_interval, Error, Result};
use crate::probcore::{chi2, kl, kl_joint, JointPmf};
use crate::report::fmt_sig;

/// Tolerance used when a formula's independence hypothesis is checked internally.
pub const HYPOTHESIS_TOL: f64 = 1e-9;

/// Chi-squared values at or below this are treated as zero (rounding noise from marginalization).
pub const DEGENERATE_CHI2: f64 = 1e-14;

/// Which state's warden chi-squared term each weight multiplies in the converse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// `beta` with `chi2(Q_1^1 || Q_0^1)`: the maximum over per-state input weights.
    #[default]
    Derived,
    /// `beta` with the state-0 term `chi2(Q_1^0 || Q_0^0)`.
    AsStated,
}

impl Pairing {
    pub fn tag(self) -> &'static str {
        match self {
            Pairing::Derived => "derived",
            Pairing::AsStated => "as-stated",
        }
    }
}

impl std::str::FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(Pairing::Derived),
            "as-stated" => Ok(Pairing::AsStated),
            other => Err(Error::Parse(format!("unknown pairing '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub beta: f64,
    pub achievable: f64,
    pub converse: f64,
}

/// Per-symbol covertness divergence next to its second-order approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovertnessCheck {
    /// `(1-beta) D(Q_alpha^0 || Q_0^0) + beta D(Q_alpha^1 || Q_0^1)` in bits.
    pub exact_per_symbol: f64,
    /// `alpha^2 chi2(beta) / (2 ln 2)`, the same quantity to second order, in bits.
    pub quadratic: f64,
}

impl CovertnessCheck {
    pub fn relative_error(&self) -> f64 {
        (self.exact_per_symbol - self.quadratic).abs() / self.exact_per_symbol
    }
}

/// `I^s = D(Q_1^s||Q_0^s) + D(P_1^s||P_0^s) - D((PQ)_1^s||(PQ)_0^s) + D((PQ)_1^s || P_1^s x Q_1^s)`.
pub fn i_s(ch: &StateDmc, s: usize) -> Result<f64> {
    let d_q = kl(&ch.marginal_q(1, s), &ch.marginal_q(0, s))?;
    let d_p = kl(&ch.marginal_p(1, s), &ch.marginal_p(0, s))?;
    let d_pq = kl_joint(ch.joint_pq(1, s), ch.joint_pq(0, s))?;
    let one = ch.joint_pq(1, s);
    let d_dep = kl_joint(one, &one.marginal_product())?;
    Ok(d_q + d_p - d_pq + d_dep)
}

/// `chi2(Q_1^s || Q_0^s)`.
pub fn warden_chi2(ch: &StateDmc, s: usize) -> Result<f64> {
    chi2(&ch.marginal_q(1, s), &ch.marginal_q(0, s))
}

/// `chi2(beta) = (1 - beta) chi2(Q_1^0||Q_0^0) + beta chi2(Q_1^1||Q_0^1)`.
pub fn mixed_chi2(ch: &StateDmc, beta: f64) -> Result<f64> {
    check_unit_interval("beta", beta)?;
    Ok((1.0 - beta) * warden_chi2(ch, 0)? + beta * warden_chi2(ch, 1)?)
}

/// Achievable covert key throughput `R(beta)` against an active warden whose
/// state sequence has weight fraction `beta`.
pub fn active_rate(ch: &StateDmc, beta: f64) -> Result<f64> {
    check_unit_interval("beta", beta)?;
    let p0 = ch.marginal_p(0, 0);
    let mixture = ch.marginal_p(1, 0).mix(&ch.marginal_p(1, 1), beta)?;
    let leak = (1.0 - beta) * i_s(ch, 0)? + beta * i_s(ch, 1)?;
    let denom = mixed_chi2(ch, beta)?;
    if denom <= DEGENERATE_CHI2 {
        return Err(Error::DegenerateChannel(format!(
            "warden chi-squared budget is zero at beta = {beta}"
        )));
    }
    Ok(2f64.sqrt() * (kl(&mixture, &p0)? - leak) / denom.sqrt())
}

/// Upper bound on the throughput when the legitimate parties know the states.
pub fn converse_rate(ch: &StateDmc, beta: f64, pairing: Pairing) -> Result<f64> {
    check_unit_interval("beta", beta)?;
    let p0 = ch.marginal_p(0, 0);
    let gain = |s: usize| -> Result<f64> { Ok(kl(&ch.marginal_p(1, s), &p0)? - i_s(ch, s)?) };
    let chi = [warden_chi2(ch, 0)?, warden_chi2(ch, 1)?];
    // (weight, numerator state, chi-squared state)
    let terms = match pairing {
        Pairing::Derived => [(beta, 1, 1), (1.0 - beta, 0, 0)],
        Pairing::AsStated => [(beta, 1, 0), (1.0 - beta, 0, 1)],
    };
    let mut total = 0.0;
    for (w, num_state, chi_state) in terms {
        if w == 0.0 {
            continue;
        }
        if chi[chi_state] <= DEGENERATE_CHI2 {
            return Err(Error::DegenerateChannel(format!(
                "chi2(Q_1^{chi_state} || Q_0^{chi_state}) is zero"
            )));
        }
        let g = gain(num_state)?;
        total += w * g * g / chi[chi_state];
    }
    Ok(2f64.sqrt() * total.sqrt())
}

fn passive_terms(ch: &StateDmc) -> Result<(f64, f64, f64)> {
    let zero = ch.joint_pq(0, 0);
    let dev = zero.max_abs_diff(&zero.marginal_product())?;
    if dev > HYPOTHESIS_TOL {
        return Err(Error::Precondition(format!(
            "(PQ)_0 is not P_0 x Q_0 (max deviation {dev:e})"
        )));
    }
    let chi = warden_chi2(ch, 0)?;
    if chi <= DEGENERATE_CHI2 {
        return Err(Error::DegenerateChannel("chi2(Q_1 || Q_0) is zero".into()));
    }
    let scale = (2.0 / chi).sqrt();
    let one = ch.joint_pq(1, 0);
    let d_pq = kl_joint(one, zero)?;
    let d_q = kl(&ch.marginal_q(1, 0), &ch.marginal_q(0, 0))?;
    let d_dep = kl_joint(one, &one.marginal_product())?;
    Ok((scale, d_pq - d_q, d_dep))
}

/// Lower and upper bounds on the covert secret key capacity with a passive
/// warden. The state is fixed to `s = 0`.
pub fn passive_bounds(ch: &StateDmc) -> Result<(f64, f64)> {
    let (scale, gap, dep) = passive_terms(ch)?;
    let upper = scale * gap;
    Ok((upper - scale * dep, upper))
}

/// Passive-warden capacity `sqrt(2 / chi2(Q_1||Q_0)) D(P_1||P_0)` when both
/// input slices factor. The state is fixed to `s = 0`.
pub fn passive_capacity_independent(ch: &StateDmc) -> Result<f64> {
    let one = ch.joint_pq(1, 0);
    let dev = one.max_abs_diff(&one.marginal_product())?;
    if dev > HYPOTHESIS_TOL {
        return Err(Error::Precondition(format!(
            "(PQ)_1 is not P_1 x Q_1 (max deviation {dev:e})"
        )));
    }
    let (scale, _, _) = passive_terms(ch)?;
    Ok(scale * kl(&ch.marginal_p(1, 0), &ch.marginal_p(0, 0))?)
}

/// Achievable and converse (with `pairing`) throughput at each grid point, in grid order.
pub fn rate_curve(ch: &StateDmc, grid: &[f64], pairing: Pairing) -> Result<Vec<RatePoint>> {
    grid.iter()
        .map(|&beta| {
            Ok(RatePoint {
                beta,
                achievable: active_rate(ch, beta)?,
                converse: converse_rate(ch, beta, pairing)?,
            })
        })
        .collect()
}

/// `points` evenly spaced values covering `[0, 1]`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

/// Writes a rate curve as CSV with columns `beta,achievable,converse,pairing`.
pub fn write_rate_csv<W: Write>(out: W, points: &[RatePoint], pairing: Pairing) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "achievable", "converse", "pairing"])?;
    for p in points {
        w.write_record([
            fmt_sig(p.beta),
            fmt_sig(p.achievable),
            fmt_sig(p.converse),
            pairing.tag().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Exact per-symbol covertness divergence at input weight `alpha` against its
/// quadratic approximation. KL is in bits, so the chi-squared term is divided by `ln 2`.
pub fn covertness_quadratic_check(ch: &StateDmc, alpha: f64, beta: f64) -> Result<CovertnessCheck> {
    check_open_unit_interval("alpha", alpha)?;
    check_unit_interval("beta", beta)?;
    let mut exact = 0.0;
    for (s, w) in [(0, 1.0 - beta), (1, beta)] {
        if w == 0.0 {
            continue;
        }
        let q0 = ch.marginal_q(0, s);
        let q_alpha = q0.mix(&ch.marginal_q(1, s), alpha)?;
        exact += w * kl(&q_alpha, &q0)?;
    }
    let quadratic = 0.5 * alpha * alpha * mixed_chi2(ch, beta)? / std::f64::consts::LN_2;
    Ok(CovertnessCheck {
        exact_per_symbol: exact,
        quadratic,
    })
}

/// `I(X; Y)` when `X ~ Bernoulli(alpha)` and `Y | X` is Bob's channel averaged
/// over a Bernoulli(`beta`) state.
pub fn mixture_mutual_information(ch: &StateDmc, alpha: f64, beta: f64) -> Result<f64> {
    let input = crate::probcore::Pmf::bernoulli(alpha)?;
    let joint: JointPmf = ch.bob_mixture(beta)?.joint(&input)?;
    Ok(crate::probcore::mutual_information(&joint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::example_fig2;
    use crate::probcore::{CondPmf, Pmf};
    use approx::assert_abs_diff_eq;

    pub(crate) fn correlated_channel() -> StateDmc {
        // s = 0 and s = 1 differ only in Bob's x = 1 row; outputs correlated at x = 1
        let zero = JointPmf::product(&Pmf::bernoulli(0.1).unwrap(), &Pmf::bernoulli(0.4).unwrap());
        let one0 = JointPmf::new(2, 2, vec![0.05, 0.05, 0.25, 0.65]).unwrap();
        let one1 = JointPmf::new(2, 2, vec![0.15, 0.05, 0.2, 0.6]).unwrap();
        StateDmc::new([zero.clone(), zero, one0, one1]).unwrap()
    }

    /// Independent re-evaluation of the closed forms straight from the slice tables.
    fn d(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (a / b).log2())
            .sum()
    }

    fn oracle_i_s(ch: &StateDmc, s: usize) -> f64 {
        let one = ch.joint_pq(1, s).mass().to_vec();
        let zero = ch.joint_pq(0, s).mass().to_vec();
        let (ny, nz) = (ch.y_size(), ch.z_size());
        let row = |m: &[f64]| {
            (0..ny)
                .map(|y| (0..nz).map(|z| m[y * nz + z]).sum())
                .collect::<Vec<f64>>()
        };
        let col = |m: &[f64]| {
            (0..nz)
                .map(|z| (0..ny).map(|y| m[y * nz + z]).sum())
                .collect::<Vec<f64>>()
        };
        let prod: Vec<f64> = (0..ny)
            .flat_map(|y| {
                let (r, c) = (row(&one), col(&one));
                (0..nz).map(move |z| r[y] * c[z])
            })
            .collect();
        d(&col(&one), &col(&zero)) + d(&row(&one), &row(&zero)) - d(&one, &zero) + d(&one, &prod)
    }

    #[test]
    fn i_s_vanishes_on_example() {
        let ch = example_fig2();
        assert_abs_diff_eq!(i_s(&ch, 0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(i_s(&ch, 1).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn i_s_vanishes_when_zero_input_factors() {
        // D((PQ)_1 || P_0 x Q_0) splits into the other three terms
        let ch = correlated_channel();
        for s in 0..2 {
            assert_abs_diff_eq!(i_s(&ch, s).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn i_s_matches_oracle_with_correlated_zero_input() {
        let zero = JointPmf::new(2, 2, vec![0.5, 0.1, 0.1, 0.3]).unwrap();
        let one = JointPmf::new(2, 2, vec![0.05, 0.05, 0.25, 0.65]).unwrap();
        let ch = StateDmc::stateless(zero, one).unwrap();
        let v = i_s(&ch, 0).unwrap();
        assert!(v.abs() > 1e-3);
        assert_abs_diff_eq!(v, oracle_i_s(&ch, 0), epsilon = 1e-12);
    }

    #[test]
    fn active_rate_endpoints_on_example() {
        let ch = example_fig2();
        assert_abs_diff_eq!(active_rate(&ch, 0.0).unwrap(), 8.784753853889491, epsilon = 1e-9);
        assert_abs_diff_eq!(active_rate(&ch, 1.0).unwrap(), 3.1853083555777206, epsilon = 1e-9);
    }

    #[test]
    fn active_rate_midpoint_matches_second_evaluation() {
        let ch = example_fig2();
        // mixture of Bern(0.9) and Bern(0.8) is Bern(0.85); chi2 terms 1/6 and 16/21
        let beta = 0.5;
        let mix = [0.15, 0.85];
        let num = d(&mix, &[0.9, 0.1]);
        let den: f64 = 0.5 * (0.04 / 0.4 + 0.04 / 0.6) + 0.5 * (0.16 / 0.3 + 0.16 / 0.7);
        let expected = 2f64.sqrt() * num / den.sqrt();
        assert_abs_diff_eq!(active_rate(&ch, beta).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn active_rate_errors() {
        let ch = example_fig2();
        assert!(matches!(active_rate(&ch, 1.5), Err(Error::Domain { .. })));
        let bob = CondPmf::bsc(0.1).unwrap();
        let blind = CondPmf::bsc(0.5).unwrap();
        let deaf = StateDmc::independent([&bob, &bob], [&blind, &blind]).unwrap();
        assert!(matches!(active_rate(&deaf, 0.3), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn converse_endpoints_coincide_with_achievable() {
        let ch = example_fig2();
        for beta in [0.0, 1.0] {
            let a = active_rate(&ch, beta).unwrap();
            let c = converse_rate(&ch, beta, Pairing::Derived).unwrap();
            assert_abs_diff_eq!(a, c, epsilon = 1e-9);
        }
        let mid = 0.5;
        assert!(converse_rate(&ch, mid, Pairing::Derived).unwrap() >= active_rate(&ch, mid).unwrap());
    }

    #[test]
    fn as_stated_pairing_swaps_chi2_terms() {
        let ch = example_fig2();
        let g0 = kl(&ch.marginal_p(1, 0), &ch.marginal_p(0, 0)).unwrap();
        let g1 = kl(&ch.marginal_p(1, 1), &ch.marginal_p(0, 0)).unwrap();
        let (c0, c1) = (warden_chi2(&ch, 0).unwrap(), warden_chi2(&ch, 1).unwrap());
        let beta = 0.3;
        let expected = (2.0 * (beta * g1 * g1 / c0 + (1.0 - beta) * g0 * g0 / c1)).sqrt();
        assert_abs_diff_eq!(
            converse_rate(&ch, beta, Pairing::AsStated).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn passive_bounds_collapse_under_independence() {
        let ch = example_fig2();
        let (lo, hi) = passive_bounds(&ch).unwrap();
        let cap = passive_capacity_independent(&ch).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-12);
        assert_abs_diff_eq!(cap, hi, epsilon = 1e-12);
        assert_abs_diff_eq!(cap, 8.784753853889491, epsilon = 1e-9);
    }

    #[test]
    fn passive_bounds_gap_on_correlated_channel() {
        let ch = correlated_channel();
        let (lo, hi) = passive_bounds(&ch).unwrap();
        assert!(lo < hi);
        assert!(matches!(passive_capacity_independent(&ch), Err(Error::Precondition(_))));
    }

    #[test]
    fn passive_errors() {
        let slice = JointPmf::product(&Pmf::bernoulli(0.1).unwrap(), &Pmf::bernoulli(0.4).unwrap());
        let one = JointPmf::product(&Pmf::bernoulli(0.9).unwrap(), &Pmf::bernoulli(0.4).unwrap());
        let ch = StateDmc::stateless(slice, one).unwrap();
        assert!(matches!(passive_bounds(&ch), Err(Error::DegenerateChannel(_))));

        let dependent = JointPmf::new(2, 2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let ch = StateDmc::stateless(dependent.clone(), dependent).unwrap();
        assert!(matches!(passive_bounds(&ch), Err(Error::Precondition(_))));
    }

    #[test]
    fn passive_capacity_zero_when_bob_is_blind() {
        let zero = JointPmf::product(&Pmf::bernoulli(0.3).unwrap(), &Pmf::bernoulli(0.4).unwrap());
        let one = JointPmf::product(&Pmf::bernoulli(0.3).unwrap(), &Pmf::bernoulli(0.7).unwrap());
        let ch = StateDmc::stateless(zero, one).unwrap();
        assert_eq!(passive_capacity_independent(&ch).unwrap(), 0.0);
    }

    #[test]
    fn curve_endpoints_and_order() {
        let ch = example_fig2();
        let pts = rate_curve(&ch, &[0.0, 1.0], Pairing::Derived).unwrap();
        for p in &pts {
            assert_abs_diff_eq!(p.achievable, p.converse, epsilon = 1e-9);
        }
        let single = rate_curve(&ch, &[0.25], Pairing::Derived).unwrap();
        assert_eq!(single[0].achievable, active_rate(&ch, 0.25).unwrap());
        assert_eq!(single[0].converse, converse_rate(&ch, 0.25, Pairing::Derived).unwrap());
        let grid = uniform_grid(101);
        let curve = rate_curve(&ch, &grid, Pairing::Derived).unwrap();
        assert!(curve.iter().zip(&grid).all(|(p, b)| p.beta == *b));
        assert!(curve.iter().all(|p| p.converse >= p.achievable - 1e-9));
    }

    #[test]
    fn active_rate_is_lipschitz_on_grid() {
        let ch = example_fig2();
        let h = 1e-3;
        let grid = uniform_grid(1001);
        let vals: Vec<f64> = grid.iter().map(|&b| active_rate(&ch, b).unwrap()).collect();
        let max_step = vals.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        // the curve spans about 5.6 over [0, 1]; slope stays within a small multiple of that
        assert!(max_step <= 20.0 * h, "max step {max_step}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let ch = example_fig2();
        let pts = rate_curve(&ch, &[0.0, 1.0], Pairing::AsStated).unwrap();
        let mut buf = Vec::new();
        write_rate_csv(&mut buf, &pts, Pairing::AsStated).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "beta,achievable,converse,pairing");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,8.78475385389,"));
        assert!(lines[2].ends_with(",as-stated"));
    }

    #[test]
    fn covertness_quadratic_agreement() {
        let ch = example_fig2();
        let tiny = covertness_quadratic_check(&ch, 1e-9, 0.5).unwrap();
        assert!(tiny.exact_per_symbol < 1e-15 && tiny.quadratic < 1e-15);
        let c = covertness_quadratic_check(&ch, 1e-3, 0.0).unwrap();
        assert!(c.relative_error() < 0.01, "{c:?}");
        let mut prev = f64::INFINITY;
        for alpha in [1e-2, 1e-3, 1e-4] {
            let e = covertness_quadratic_check(&ch, alpha, 0.5).unwrap().relative_error();
            assert!(e < prev);
            prev = e;
        }
        assert!(matches!(
            covertness_quadratic_check(&ch, 0.0, 0.5),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn mixture_mi_matches_bsc() {
        let ch = example_fig2();
        // beta = 0: Bob's channel is BSC(0.1); uniform input gives 1 - H_b(0.1)
        assert_abs_diff_eq!(
            mixture_mutual_information(&ch, 0.5, 0.0).unwrap(),
            0.5310044064107188,
            epsilon = 1e-12
        );
    }
}
