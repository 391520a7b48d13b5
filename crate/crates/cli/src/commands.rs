use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use covert_skg::channel::example_fig2;
use covert_skg::concentration::{default_lemma1_grid, run_lemma1_suite, write_checks_csv};
use covert_skg::estimator::{check_deviation, check_halting, ProbeDesign};
use covert_skg::oneshot::{
    default_oneshot_grid, default_oneshot_source, verify_oneshot_bounds, CodebookShape, Score, VerifyConfig,
};
use covert_skg::protocol::derandomize::{self as derand, CodeFamily, DerandomizeConfig};
use covert_skg::protocol::{simulate as run_simulation, MSource, MetricsReport, Protocol, StateGenerator};
use covert_skg::rates::{rate_curve, uniform_grid, Pairing, HYPOTHESIS_TOL};
use covert_skg::report::{fmt_sig, write_json_lines, Verdict};
use covert_skg::seeds::{derived_rng, Domain};
use covert_skg::StateDmc;

use crate::config::{load_channel, RunConfig};
use crate::failure::Failure;
use crate::{ModeArg, Opts, PairingArg};

const DEFAULT_GRID: usize = 101;
const DEFAULT_TRIALS: u64 = 1_000;
const LEMMA1_SAMPLES: u64 = 1_000_000;
const ESTIMATE_TRIALS: u64 = 5_000;
/// Largest `n` for which every state sequence is enumerated.
const MAX_ENUMERATED_N: usize = 12;

pub struct Context {
    cfg: RunConfig,
    channel: StateDmc,
    seed: Option<u64>,
    out: Option<PathBuf>,
    grid: Option<usize>,
    trials: Option<u64>,
    mode: Option<ModeArg>,
    pairing: Option<PairingArg>,
    bound_scale: f64,
}

impl Context {
    pub fn new(opts: &Opts, cfg: RunConfig) -> Result<Self, Failure> {
        let channel = match opts.channel.as_ref().or(cfg.channel.as_ref()) {
            Some(path) => load_channel(path)?,
            None => example_fig2(),
        };
        if !(opts.bound_scale.is_finite() && opts.bound_scale >= 0.0) {
            return Err(Failure::Parse(format!(
                "bound scale {} must be finite and non-negative",
                opts.bound_scale
            )));
        }
        Ok(Self {
            seed: opts.seed.or(cfg.seed),
            trials: opts.trials.or(cfg.trials),
            cfg,
            channel,
            out: opts.out.clone(),
            grid: opts.grid,
            mode: opts.mode,
            pairing: opts.pairing,
            bound_scale: opts.bound_scale,
        })
    }

    fn seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::Parse("a seed is required: pass --seed or set `seed` in the config".into()))
    }

    fn sink(&self, name: &str) -> Result<Box<dyn Write>, Failure> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Ok(Box::new(BufWriter::new(File::create(dir.join(name))?)))
            }
            None => Ok(Box::new(std::io::stdout().lock())),
        }
    }

    fn rescore(&self, v: Verdict) -> Verdict {
        Verdict::new(v.bound * self.bound_scale, v.empirical, v.sigma)
    }
}

fn verdict_outcome(failed: usize, total: usize, what: &str) -> Result<(), Failure> {
    if failed == 0 {
        eprintln!("{total} {what} checks passed");
        Ok(())
    } else {
        Err(Failure::Verdict(format!("{failed} of {total} {what} checks failed")))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

pub fn rates(ctx: &Context) -> Result<(), Failure> {
    let report = ctx.channel.validate_hypotheses(HYPOTHESIS_TOL)?;
    if !report.active_hypotheses_hold() {
        return Err(Failure::Precondition(format!(
            "channel hypotheses fail: {}",
            report.failures().join("; ")
        )));
    }
    let grid = uniform_grid(ctx.grid.unwrap_or(DEFAULT_GRID));
    if grid.len() < 2 {
        return Err(Failure::Precondition("the grid needs at least two points".into()));
    }
    let pairings = match ctx.pairing.unwrap_or(PairingArg::Derived) {
        PairingArg::Derived => vec![Pairing::Derived],
        PairingArg::AsStated => vec![Pairing::AsStated],
        PairingArg::Both => vec![Pairing::Derived, Pairing::AsStated],
    };
    let mut w = csv::Writer::from_writer(ctx.sink("rates.csv")?);
    w.write_record(["beta", "achievable", "converse", "pairing"])?;
    let mut below = Vec::new();
    for pairing in pairings {
        for p in rate_curve(&ctx.channel, &grid, pairing)? {
            w.write_record([
                fmt_sig(p.beta),
                fmt_sig(p.achievable),
                fmt_sig(p.converse),
                pairing.tag().into(),
            ])?;
            if pairing == Pairing::Derived && p.converse < p.achievable - 1e-12 {
                below.push(fmt_sig(p.beta));
            }
        }
    }
    w.flush()?;
    if below.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verdict(format!(
            "converse below achievable at beta {}",
            below.join(", ")
        )))
    }
}

const SUMMARY_HEADER: [&str; 22] = [
    "mode",
    "trials",
    "halted",
    "completed",
    "halted_by_budget",
    "p_e",
    "p_e_sigma",
    "fallback_rate",
    "secrecy_tv_mc",
    "secrecy_tv_mc_sigma",
    "exact_halt",
    "exact_error",
    "exact_secrecy",
    "exact_independence",
    "covertness_kl",
    "covertness_layout_mean",
    "mean_key_bits",
    "throughput",
    "net_throughput",
    "common_randomness_bits",
    "oracle_agreement",
    "invariant_failures",
];

fn summary_row(mode: MSource, r: &MetricsReport) -> Vec<String> {
    let ex = r.exact.as_ref();
    vec![
        match mode {
            MSource::Oracle => "oracle",
            MSource::Estimated => "estimated",
        }
        .into(),
        r.trials.to_string(),
        r.halted.to_string(),
        r.completed.to_string(),
        r.halted_by_budget.to_string(),
        fmt_sig(r.p_e),
        fmt_sig(r.p_e_sigma),
        fmt_sig(r.fallback_rate),
        opt(r.secrecy_tv_mc),
        opt(r.secrecy_tv_mc_sigma),
        opt(ex.map(|e| e.halt_probability)),
        opt(ex.map(|e| e.error_probability)),
        opt(ex.map(|e| e.secrecy_tv)),
        opt(ex.map(|e| e.independence_tv)),
        opt(r.covertness_kl),
        fmt_sig(r.covertness_layout_mean),
        fmt_sig(r.mean_key_bits),
        opt(r.throughput),
        opt(r.net_throughput),
        fmt_sig(r.common_randomness_bits),
        opt(r.oracle_agreement),
        r.invariant_failures.len().to_string(),
    ]
}

pub fn simulate(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    if ctx.out.is_none() {
        return Err(Failure::Parse("simulate writes several files and needs --out".into()));
    }
    let base = ctx
        .cfg
        .protocol
        .clone()
        .ok_or_else(|| Failure::Parse("simulate needs a [protocol] section in the config".into()))?;
    let states = ctx
        .cfg
        .states
        .clone()
        .ok_or_else(|| Failure::Parse("simulate needs a [states] section in the config".into()))?;
    let base = covert_skg::protocol::ProtocolConfig { seed, ..base };
    let modes = match ctx.mode {
        None => vec![base.mode],
        Some(ModeArg::Oracle) => vec![MSource::Oracle],
        Some(ModeArg::Estimated) => vec![MSource::Estimated],
        Some(ModeArg::Both) => vec![MSource::Oracle, MSource::Estimated],
    };
    for w in base.warnings() {
        eprintln!("warning: {w}");
    }
    let n_prime = Protocol::new(&ctx.channel, base.clone())?.n_prime();
    let s = states.generate(n_prime, seed)?;
    let trials = ctx.trials.unwrap_or(DEFAULT_TRIALS);

    let mut summary = csv::Writer::from_writer(ctx.sink("summary.csv")?);
    summary.write_record(SUMMARY_HEADER)?;
    let mut failures = Vec::new();
    for mode in modes {
        let cfg = covert_skg::protocol::ProtocolConfig { mode, ..base.clone() };
        let sim = run_simulation(&ctx.channel, &s, &cfg, trials)?;
        let tag = &summary_row(mode, &sim.report)[0];
        write_json_lines(ctx.sink(&format!("trials-{tag}.jsonl"))?, &sim.outcomes)?;
        summary.write_record(summary_row(mode, &sim.report))?;
        if let Some(note) = &sim.report.exact_note {
            eprintln!("{tag}: {note}");
        }
        failures.extend(sim.report.invariant_failures.iter().map(|f| format!("{tag}: {f}")));
    }
    summary.flush()?;
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("{f}");
        }
        Err(Failure::Verdict(format!(
            "{} invariant check(s) failed",
            failures.len()
        )))
    }
}

pub fn verify_lemma1(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    let grid = ctx.cfg.lemma1.cells.clone().unwrap_or_else(default_lemma1_grid);
    let samples = ctx.trials.unwrap_or(LEMMA1_SAMPLES);
    let mut checks = run_lemma1_suite(&grid, samples, seed)?;
    for c in &mut checks {
        c.verdict = ctx.rescore(c.verdict);
    }
    write_checks_csv(ctx.sink("lemma1.csv")?, &checks)?;
    let failed = checks.iter().filter(|c| !c.verdict.pass).count();
    verdict_outcome(failed, checks.len(), "reciprocal-sum")
}

pub fn verify_oneshot(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    let src = default_oneshot_source();
    let qy = src.p_xy(0).col_marginal();
    let score = Score::information_density(&src.p_xy(0), &qy)?;
    let grid = ctx.cfg.oneshot.grid.clone().unwrap_or_else(default_oneshot_grid);
    let draws = ctx.trials.unwrap_or(DEFAULT_TRIALS);
    let mut w = csv::Writer::from_writer(ctx.sink("oneshot.csv")?);
    w.write_record([
        "m1",
        "m2",
        "gamma",
        "delta",
        "draws",
        "trivial",
        "quantity",
        "bound",
        "empirical",
        "sigma",
        "verdict",
    ])?;
    let (mut total, mut failed) = (0, 0);
    for (m1, m2) in grid {
        let cfg = VerifyConfig {
            m1,
            m2,
            gamma: None,
            delta: None,
            codebook_draws: draws,
        };
        let r = verify_oneshot_bounds(&src, &qy, &score, &cfg, seed)?;
        for (quantity, v) in [("error", r.error), ("secrecy", r.secrecy)] {
            let v = ctx.rescore(v);
            total += 1;
            failed += usize::from(!v.pass);
            w.write_record([
                m1.to_string(),
                m2.to_string(),
                fmt_sig(r.gamma),
                opt(r.delta),
                draws.to_string(),
                r.trivial_bound.to_string(),
                quantity.into(),
                fmt_sig(v.bound),
                fmt_sig(v.empirical),
                fmt_sig(v.sigma),
                verdict_tag(v).into(),
            ])?;
        }
    }
    w.flush()?;
    verdict_outcome(failed, total, "one-shot")
}

fn verdict_tag(v: Verdict) -> &'static str {
    if v.pass {
        "pass"
    } else {
        "fail"
    }
}

pub fn estimate_beta(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    let sec = &ctx.cfg.estimate_beta;
    let trials = ctx.trials.unwrap_or(ESTIMATE_TRIALS);
    let probe = ProbeDesign::for_channel(&ctx.channel, sec.baseline)?;
    let states = StateGenerator::ConstantWeight { beta: sec.beta }.generate(sec.length, seed)?;
    let mut rng = derived_rng(seed, Domain::Verification, 0);
    let mut w = csv::Writer::from_writer(ctx.sink("estimate-beta.csv")?);
    w.write_record([
        "check",
        "lambda",
        "probes",
        "n",
        "kappa",
        "mu",
        "trials",
        "bound",
        "empirical",
        "sigma",
        "verdict",
    ])?;
    let (mut total, mut failed) = (0, 0);
    let mut record = |w: &mut csv::Writer<_>, fields: [String; 6], v: Verdict| -> Result<(), Failure> {
        let v = ctx.rescore(v);
        total += 1;
        failed += usize::from(!v.pass);
        let [check, lambda, probes, n, kappa, mu] = fields;
        w.write_record([
            check,
            lambda,
            probes,
            n,
            kappa,
            mu,
            trials.to_string(),
            fmt_sig(v.bound),
            fmt_sig(v.empirical),
            fmt_sig(v.sigma),
            verdict_tag(v).into(),
        ])?;
        Ok(())
    };
    for &lambda in &sec.lambdas {
        for &ell in &sec.probes {
            let v = check_deviation(&ctx.channel, &states, &probe, lambda, ell, trials, &mut rng)?;
            let fields = [
                "deviation".into(),
                fmt_sig(lambda),
                ell.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ];
            record(&mut w, fields, v)?;
        }
    }
    for &(n, kappa, mu) in &sec.halting {
        let v = check_halting(n, kappa, mu, trials, &mut rng)?;
        let fields = [
            "halting".into(),
            String::new(),
            String::new(),
            n.to_string(),
            fmt_sig(kappa),
            fmt_sig(mu),
        ];
        record(&mut w, fields, v)?;
    }
    w.flush()?;
    verdict_outcome(failed, total, "estimator")
}

fn all_sequences(n: usize) -> Result<Vec<Vec<usize>>, Failure> {
    if n > MAX_ENUMERATED_N {
        return Err(Failure::Guard(format!(
            "enumerating every state sequence of length {n} exceeds the limit {MAX_ENUMERATED_N}; list `states` explicitly"
        )));
    }
    Ok((0..1usize << n)
        .map(|m| (0..n).map(|i| (m >> i) & 1).collect())
        .collect())
}

pub fn derandomize(ctx: &Context) -> Result<(), Failure> {
    let seed = ctx.seed()?;
    let sec = ctx
        .cfg
        .derandomize
        .clone()
        .ok_or_else(|| Failure::Parse("derandomize needs a [derandomize] section in the config".into()))?;
    let family = CodeFamily {
        shape: CodebookShape::new(sec.n, sec.m1, sec.m2, sec.m3)?,
        alpha: sec.alpha,
        seed,
        size: sec.family,
    };
    let states = match sec.states {
        Some(s) => s,
        None => all_sequences(sec.n)?,
    };
    let cfg = DerandomizeConfig {
        subset_size: sec.subset_size,
        epsilon_prime: sec.epsilon_prime,
        max_attempts: sec.max_attempts,
        enforce_conditions: sec.enforce_conditions,
    };
    let outcome = derand::derandomize(&ctx.channel, &family, &states, &cfg, seed)?;
    let rechecked = derand::verify_subset(&ctx.channel, &family, &states, &outcome.selected)?;
    let target = sec.epsilon_prime * ctx.bound_scale;

    let mut w = csv::Writer::from_writer(ctx.sink("derandomize.csv")?);
    w.write_record(["state", "error", "secrecy", "epsilon_prime", "verdict"])?;
    let mut failed = 0;
    for (s, avg) in states.iter().zip(&rechecked) {
        let pass = avg.error <= target && avg.secrecy <= target;
        failed += usize::from(!pass);
        let label: String = s.iter().map(|v| char::from(b'0' + *v as u8)).collect();
        w.write_record([
            label,
            fmt_sig(avg.error),
            fmt_sig(avg.secrecy),
            fmt_sig(target),
            if pass { "pass" } else { "fail" }.into(),
        ])?;
    }
    w.flush()?;
    if let Some(dir) = &ctx.out {
        let mut f = BufWriter::new(File::create(dir.join("derandomize.json"))?);
        serde_json::to_writer_pretty(&mut f, &outcome).map_err(|e| Failure::Io(e.to_string()))?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    eprintln!(
        "selected {} codes in {} attempt(s); family epsilon {:.6}, conditions {}",
        outcome.selected.len(),
        outcome.attempts,
        outcome.conditions.epsilon,
        if outcome.conditions.hold() {
            "hold"
        } else {
            "do not hold"
        }
    );
    verdict_outcome(failed, states.len(), "per-state")
}
