//! Retrieval errors, ensemble summaries and interpolated capacities.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// `(f10, f01)`: target ones missed and spurious ones added.
pub fn component_errors(target: &[bool], output: &[bool]) -> Result<(usize, usize)> {
    if target.len() != output.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            got: output.len(),
        });
    }
    Ok(target
        .iter()
        .zip(output)
        .fold((0, 0), |(f10, f01), (&t, &o)| match (t, o) {
            (true, false) => (f10 + 1, f01),
            (false, true) => (f10, f01 + 1),
            _ => (f10, f01),
        }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialMetrics {
    pub f10: usize,
    pub f01: usize,
    /// `(f10 + f01) / k`.
    pub eps: f64,
    pub exact: bool,
    pub steps: usize,
}

impl TrialMetrics {
    pub fn new(f10: usize, f01: usize, k: f64, steps: usize) -> Self {
        TrialMetrics {
            f10,
            f01,
            eps: (f10 + f01) as f64 / k,
            exact: f10 == 0 && f01 == 0,
            steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellSummary {
    pub eps_mean: f64,
    pub p_corr: f64,
    pub f10_mean: f64,
    pub f01_mean: f64,
    pub lambda_out: f64,
    pub kappa_out: f64,
    pub iters_mean: f64,
    pub trials: usize,
}

pub fn summarize(trials: &[TrialMetrics], k: f64) -> Result<CellSummary> {
    if trials.is_empty() {
        return Err(invalid("cannot summarise an empty trial list"));
    }
    let n = trials.len() as f64;
    let mean = |f: fn(&TrialMetrics) -> f64| trials.iter().map(f).sum::<f64>() / n;
    let f10_mean = mean(|t| t.f10 as f64);
    let f01_mean = mean(|t| t.f01 as f64);
    Ok(CellSummary {
        eps_mean: mean(|t| t.eps),
        p_corr: mean(|t| if t.exact { 1.0 } else { 0.0 }),
        f10_mean,
        f01_mean,
        lambda_out: 1.0 - f10_mean / k,
        kappa_out: f01_mean / k,
        iters_mean: mean(|t| t.steps as f64),
        trials: trials.len(),
    })
}

/// A capacity criterion on one summary column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Criterion {
    /// Mean output noise at most the given level.
    Eps(f64),
    /// Fraction of exact retrievals at least the given level.
    PCorr(f64),
}

impl Criterion {
    pub fn holds(&self, value: f64) -> bool {
        match *self {
            Criterion::Eps(max) => value <= max,
            Criterion::PCorr(min) => value >= min,
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            Criterion::Eps(x) | Criterion::PCorr(x) => x,
        }
    }

    pub fn value(&self, s: &CellSummary) -> f64 {
        match self {
            Criterion::Eps(_) => s.eps_mean,
            Criterion::PCorr(_) => s.p_corr,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Eps(x) => write!(f, "eps:{x}"),
            Criterion::PCorr(x) => write!(f, "pcorr:{x}"),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    /// Parses `eps:<level>` or `pcorr:<level>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, level) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("criterion {s:?} is not of the form kind:level")))?;
        let x: f64 = level
            .trim()
            .parse()
            .map_err(|_| invalid(format!("criterion level {level:?} is not a number")))?;
        if !x.is_finite() {
            return Err(invalid(format!("criterion level {x} is not finite")));
        }
        match kind.trim().to_ascii_lowercase().as_str() {
            "eps" => Ok(Criterion::Eps(x)),
            "pcorr" | "p_corr" => Ok(Criterion::PCorr(x)),
            _ => Err(invalid(format!("unknown criterion kind {kind:?}"))),
        }
    }
}

/// Largest `M` at which the piecewise-linear interpolant of `samples`
/// satisfies `criterion`.
///
/// Uses the last satisfied-to-violated crossing. Returns the last grid `M`
/// if the final sample is satisfied and 0 if no sample is.
pub fn capacity(samples: &[(f64, f64)], criterion: Criterion) -> Result<f64> {
    if samples.len() < 2 {
        return Err(invalid(format!(
            "capacity needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if let Some(w) = samples
        .windows(2)
        .find(|w| w[0].0.is_nan() || w[0].0 >= w[1].0 || w[1].0.is_nan())
    {
        return Err(invalid(format!(
            "sample M values must be strictly increasing, found {} then {}",
            w[0].0, w[1].0
        )));
    }
    let (m_last, v_last) = samples[samples.len() - 1];
    if criterion.holds(v_last) {
        return Ok(m_last);
    }
    let theta = criterion.threshold();
    for w in samples.windows(2).rev() {
        let ((m0, v0), (m1, v1)) = (w[0], w[1]);
        if criterion.holds(v0) && !criterion.holds(v1) {
            return Ok(m0 + (theta - v0) / (v1 - v0) * (m1 - m0));
        }
    }
    Ok(0.0)
}
