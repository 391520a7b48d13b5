//! Monte-Carlo and exact metrics over many protocol runs.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::StateDmc;
use crate::error::{Error, Result};
use crate::estimator::selection_satisfies;
use crate::rates::active_rate;
use crate::report::MeanAccumulator;

use super::exact::{covertness_kl, exact_protocol_metrics, ExactProtocolMetrics};
use super::{Protocol, ProtocolConfig, Sizing, TrialDetail, TrialOutcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub trials: u64,
    pub halted: u64,
    pub completed: u64,
    /// Halts on the probe budget; the rest are infeasible selections.
    pub halted_by_budget: u64,
    /// Key mismatch rate over completed runs.
    pub p_e: f64,
    pub p_e_sigma: f64,
    pub fallback_rate: f64,
    /// Sampled secrecy distance, using the exact witness set.
    pub secrecy_tv_mc: Option<f64>,
    pub secrecy_tv_mc_sigma: Option<f64>,
    pub exact: Option<ExactProtocolMetrics>,
    pub exact_note: Option<String>,
    /// `D(P_Z || prod Q_0^{s_i})` in bits.
    pub covertness_kl: Option<f64>,
    pub covertness_note: Option<String>,
    /// Sampled mean of the divergence given the probe layout, an upper bound on `covertness_kl`.
    pub covertness_layout_mean: f64,
    pub mean_key_bits: f64,
    /// `log M1 / sqrt(n D)` with `D` in nats; uses the layout bound when the exact value is missing.
    pub throughput: Option<f64>,
    /// As `throughput` with the common-randomness bits subtracted.
    pub net_throughput: Option<f64>,
    pub common_randomness_bits: f64,
    /// Estimated mode: fraction of completed runs whose sizes equal the oracle's.
    pub oracle_agreement: Option<f64>,
    pub invariant_failures: Vec<String>,
}

impl MetricsReport {
    pub fn invariants_ok(&self) -> bool {
        self.invariant_failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub outcomes: Vec<TrialOutcome>,
    pub report: MetricsReport,
}

/// Runs `trials` trials on state sequence `s` and aggregates their metrics.
pub fn simulate(ch: &StateDmc, s: &[usize], cfg: &ProtocolConfig, trials: u64) -> Result<Simulation> {
    let protocol = Protocol::new(ch, cfg.clone())?;
    protocol.check_state_sequence(s)?;
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is needed".into()));
    }
    let (exact, exact_note) = match cfg.sizing {
        Sizing::Selected => (None, Some("exact metrics need fixed code sizes".to_string())),
        Sizing::Fixed { .. } => match exact_protocol_metrics(&protocol, s) {
            Ok(m) => (Some(m), None),
            Err(e @ Error::SizeGuard { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        },
    };
    let g = protocol.estimator().g;
    let (covertness, covertness_note) = match covertness_kl(ch, s, cfg.n, g, cfg.kappa, cfg.alpha) {
        Ok(d) => (Some(d), None),
        Err(e @ Error::SizeGuard { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let details = (0..trials)
        .into_par_iter()
        .map(|t| protocol.trial_detail(s, t))
        .collect::<Result<Vec<TrialDetail>>>()?;

    let mut failures = Vec::new();
    let (mut halted, mut by_budget) = (0u64, 0u64);
    let mut errors = MeanAccumulator::new();
    let mut fallbacks = MeanAccumulator::new();
    let mut key_bits = MeanAccumulator::new();
    let mut layout_kl = MeanAccumulator::new();
    let mut agreement = MeanAccumulator::new();
    let mut secrecy = MeanAccumulator::new();
    let z_size = ch.z_size();
    for d in &details {
        let o = &d.outcome;
        layout_kl.push(d.layout_kl);
        if o.halted {
            halted += 1;
            if o.beta_hat.is_none() {
                by_budget += 1;
            }
            if o.w1.is_some() || o.w1_hat.is_some() || o.key_match.is_some() || o.key_bits.is_some() {
                failures.push(format!("trial {}: halted run carries key fields", o.trial));
            }
            continue;
        }
        let (Some(w1), Some(w2), Some(w1_hat), Some(bits), Some(fb)) =
            (o.w1, o.w2, o.w1_hat, o.key_bits, o.fallback_used)
        else {
            failures.push(format!("trial {}: completed run is missing key fields", o.trial));
            continue;
        };
        errors.push(f64::from(u8::from(w1 != w1_hat)));
        fallbacks.push(f64::from(u8::from(fb)));
        key_bits.push(f64::from(bits));
        if let Some(m) = o.matches_oracle {
            agreement.push(f64::from(u8::from(m)));
        }
        if cfg.sizing == Sizing::Selected {
            if let Some(sel) = &o.selection {
                if !selection_satisfies(ch, sel, cfg.n, protocol.mu0_channel())? {
                    failures.push(format!(
                        "trial {}: selected sizes violate the sizing constraints",
                        o.trial
                    ));
                }
            }
        }
        if let Some(ex) = &exact {
            let z = d.z.iter().fold(0, |acc, &v| acc * z_size + v);
            let hits = (0..ex.m1).filter(|&w| ex.witness.contains(w, w2, z)).count();
            let own = f64::from(u8::from(ex.witness.contains(w1, w2, z)));
            secrecy.push(own - hits as f64 / ex.m1 as f64);
        }
    }
    let completed = trials - halted;
    if halted + completed != details.len() as u64 {
        failures.push("trial accounting does not sum".into());
    }

    let common = protocol.common_randomness_bits()?;
    let mean_bits = if completed > 0 { key_bits.mean() } else { 0.0 };
    let divergence = covertness.unwrap_or(layout_kl.mean());
    let scale = (cfg.n as f64 * divergence * LN_2).sqrt();
    let (throughput, net_throughput) = if mean_bits == 0.0 {
        (Some(0.0), Some(0.0))
    } else if scale > 0.0 {
        (Some(mean_bits / scale), Some((mean_bits - common) / scale))
    } else {
        (None, None)
    };
    let p_e = if completed > 0 { errors.mean() } else { 0.0 };
    let report = MetricsReport {
        trials,
        halted,
        completed,
        halted_by_budget: by_budget,
        p_e,
        p_e_sigma: errors.std_error(),
        fallback_rate: if completed > 0 { fallbacks.mean() } else { 0.0 },
        secrecy_tv_mc: (secrecy.count() > 0).then(|| secrecy.mean()),
        secrecy_tv_mc_sigma: (secrecy.count() > 0).then(|| secrecy.std_error()),
        exact,
        exact_note,
        covertness_kl: covertness,
        covertness_note,
        covertness_layout_mean: layout_kl.mean(),
        mean_key_bits: mean_bits,
        throughput,
        net_throughput,
        common_randomness_bits: common,
        oracle_agreement: (agreement.count() > 0).then(|| agreement.mean()),
        invariant_failures: failures,
    };
    let mut report = report;
    check_ranges(&mut report);
    Ok(Simulation {
        outcomes: details.into_iter().map(|d| d.outcome).collect(),
        report,
    })
}

fn check_ranges(r: &mut MetricsReport) {
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    if !unit(r.p_e) {
        r.invariant_failures.push(format!("p_e = {} outside [0, 1]", r.p_e));
    }
    if let Some(ex) = &r.exact {
        if !(unit(ex.error_probability) && unit(ex.secrecy_tv) && unit(ex.public_tv)) {
            r.invariant_failures.push("exact metrics outside [0, 1]".into());
        }
    }
    if r.covertness_kl.is_some_and(|d| d < 0.0) {
        r.invariant_failures.push("negative covertness divergence".into());
    }
}

/// Metrics only; see [`simulate`].
pub fn evaluate(ch: &StateDmc, s: &[usize], cfg: &ProtocolConfig, trials: u64) -> Result<MetricsReport> {
    simulate(ch, s, cfg, trials).map(|sim| sim.report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputReport {
    /// `wt(s) / n'`.
    pub beta: f64,
    pub gross: f64,
    pub net: f64,
    pub active_rate: f64,
    /// `gross / active_rate`.
    pub ratio: f64,
    pub covertness_kl: f64,
    /// False when the layout bound stood in for the exact divergence.
    pub covertness_exact: bool,
    pub completed_fraction: f64,
}

/// Finite-length throughput next to the asymptotic rate at the state fraction of `s`.
pub fn throughput_report(ch: &StateDmc, s: &[usize], cfg: &ProtocolConfig, trials: u64) -> Result<ThroughputReport> {
    let r = evaluate(ch, s, cfg, trials)?;
    if 2 * r.completed <= r.trials {
        return Err(Error::Precondition(format!(
            "only {} of {} trials completed",
            r.completed, r.trials
        )));
    }
    let beta = s.iter().sum::<usize>() as f64 / s.len() as f64;
    let rate = active_rate(ch, beta)?;
    let (Some(gross), Some(net)) = (r.throughput, r.net_throughput) else {
        return Err(Error::DegenerateChannel("zero covertness divergence".into()));
    };
    Ok(ThroughputReport {
        beta,
        gross,
        net,
        active_rate: rate,
        ratio: gross / rate,
        covertness_kl: r.covertness_kl.unwrap_or(r.covertness_layout_mean),
        covertness_exact: r.covertness_kl.is_some(),
        completed_fraction: r.completed as f64 / r.trials as f64,
    })
}
