//! Output formatting shared by the CSV and JSON-lines emitters.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Formats `x` with 12 significant digits, trailing zeros trimmed. Magnitudes
/// outside `[1e-5, 1e15)` use scientific notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes one JSON object per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut out: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Monte-Carlo verdict: empirical value against a bound with a 3-sigma allowance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub bound: f64,
    pub empirical: f64,
    pub sigma: f64,
    pub pass: bool,
}

impl Verdict {
    pub const SIGMAS: f64 = 3.0;

    pub fn new(bound: f64, empirical: f64, sigma: f64) -> Self {
        Self {
            bound,
            empirical,
            sigma,
            pass: empirical <= bound + Self::SIGMAS * sigma,
        }
    }
}

/// Running mean and standard error with compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    count: u64,
    sum: f64,
    sum_comp: f64,
    sum_sq: f64,
    sum_sq_comp: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        kahan_add(&mut self.sum, &mut self.sum_comp, x);
        kahan_add(&mut self.sum_sq, &mut self.sum_sq_comp, x * x);
    }

    pub fn merge(mut self, other: &MeanAccumulator) -> Self {
        self.count += other.count;
        kahan_add(&mut self.sum, &mut self.sum_comp, other.sum);
        kahan_add(&mut self.sum, &mut self.sum_comp, -other.sum_comp);
        kahan_add(&mut self.sum_sq, &mut self.sum_sq_comp, other.sum_sq);
        kahan_add(&mut self.sum_sq, &mut self.sum_sq_comp, -other.sum_sq_comp);
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.sum - self.sum_comp) / self.count as f64
    }

    /// Standard error of the mean (sample standard deviation over `sqrt(count)`).
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        let var = ((self.sum_sq - self.sum_sq_comp) / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}

fn kahan_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let y = x - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}
