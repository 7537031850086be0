//! Learning rules: counters plus query-noise estimates in, weights and
//! biases out.
//!
//! All four rules produce a [`WeightModel`] whose dendritic potential is
//! `x_j = bias_j + sum_i w_ij u_i` over the active query units. Weights and
//! biases are logs of ratios of linear counter combinations and are computed
//! as [`ExtendedReal`]s, so zero counters give exact infinities rather than
//! overflow. Natural logs are used throughout.
//!
//! Noise estimates are global: one miss probability `p10` and one add
//! probability `p01` shared by every synapse and both postsynaptic states.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::counters::{CounterView, SynapseCounts};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::extended::ExtendedReal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "B", alias = "bayes", alias = "b")]
    Bayes,
    #[serde(rename = "BCPNN", alias = "bcpnn")]
    Bcpnn,
    #[serde(rename = "BCPNN2", alias = "bcpnn2")]
    Bcpnn2,
    #[serde(rename = "BCPNN3", alias = "bcpnn3")]
    Bcpnn3,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::Bayes, Rule::Bcpnn, Rule::Bcpnn2, Rule::Bcpnn3];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Bayes => "B",
            Rule::Bcpnn => "BCPNN",
            Rule::Bcpnn2 => "BCPNN2",
            Rule::Bcpnn3 => "BCPNN3",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b" | "bayes" => Ok(Rule::Bayes),
            "bcpnn" => Ok(Rule::Bcpnn),
            "bcpnn2" => Ok(Rule::Bcpnn2),
            "bcpnn3" => Ok(Rule::Bcpnn3),
            _ => Err(invalid(format!("unknown rule {s:?}"))),
        }
    }
}

/// Global query-noise estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseEstimate {
    p01: f64,
    p10: f64,
}

impl NoiseEstimate {
    pub fn new(p01: f64, p10: f64) -> Result<Self> {
        for (name, p) in [("p01", p01), ("p10", p10)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(NoiseEstimate { p01, p10 })
    }

    pub const fn zero() -> Self {
        NoiseEstimate { p01: 0.0, p10: 0.0 }
    }

    /// From the fraction `lambda` of retained ones and the relative amount
    /// `kappa` of added ones, for mean activity `k` out of `n` units.
    pub fn from_lambda_kappa(lambda: f64, kappa: f64, n: usize, k: f64) -> Result<Self> {
        if !(k > 0.0 && k < n as f64) {
            return Err(invalid(format!("need 0 < k < n, got k = {k}, n = {n}")));
        }
        Self::new(kappa * k / (n as f64 - k), 1.0 - lambda)
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }
}

/// A stabilised view: every `M11` read returns `max(M11, eta eps_s^2 M)`
/// with `eps_s = 1/(1+M)`. Unit usages and the other joint counters are
/// derived from the raw `M11` and are unaffected.
#[derive(Clone, Copy, Debug)]
pub struct Stabilized<'a, V: CounterView> {
    inner: &'a V,
    eta: f64,
    floor: f64,
}

pub fn stabilize<V: CounterView>(counts: &V, eta: f64) -> Result<Stabilized<'_, V>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("stabilisation needs a positive eta, got {eta}")));
    }
    let m = counts.total();
    let eps = 1.0 / (1.0 + m);
    Ok(Stabilized {
        inner: counts,
        eta,
        floor: eta * eps * eps * m,
    })
}

impl<V: CounterView> Stabilized<'_, V> {
    /// The value substituted for small `M11`.
    pub fn floor(&self) -> f64 {
        self.floor
    }
}

impl<V: CounterView> CounterView for Stabilized<'_, V> {
    fn n_pre(&self) -> usize {
        self.inner.n_pre()
    }

    fn n_post(&self) -> usize {
        self.inner.n_post()
    }

    fn total(&self) -> f64 {
        self.inner.total()
    }

    fn pre_usage(&self, i: usize) -> f64 {
        self.inner.pre_usage(i)
    }

    fn post_usage(&self, j: usize) -> f64 {
        self.inner.post_usage(j)
    }

    fn synapse_row(&self, i: usize, out: &mut [SynapseCounts]) {
        self.inner.synapse_row(i, out);
        for c in out {
            c.m11 = c.m11.max(self.floor);
        }
    }

    fn stabilization(&self) -> Option<(f64, f64)> {
        Some((self.eta, 1.0 / (1.0 + self.inner.total())))
    }
}

/// Weights (row-major by presynaptic unit) and per-neuron bias.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightModel {
    rule: Rule,
    n_pre: usize,
    n_post: usize,
    weights: Vec<ExtendedReal>,
    bias: Vec<ExtendedReal>,
    estimate: NoiseEstimate,
    stabilization: Option<(f64, f64)>,
}

impl WeightModel {
    /// Assembles a model from explicit parts.
    pub fn from_parts(
        rule: Rule,
        n_pre: usize,
        weights: Vec<ExtendedReal>,
        bias: Vec<ExtendedReal>,
        estimate: NoiseEstimate,
    ) -> Result<Self> {
        let n_post = bias.len();
        if weights.len() != n_pre * n_post {
            return Err(Error::LengthMismatch {
                expected: n_pre * n_post,
                got: weights.len(),
            });
        }
        Ok(WeightModel {
            rule,
            n_pre,
            n_post,
            weights,
            bias,
            estimate,
            stabilization: None,
        })
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn estimate(&self) -> NoiseEstimate {
        self.estimate
    }

    /// `(eta, eps_s)` if built from a stabilised view.
    pub fn stabilization(&self) -> Option<(f64, f64)> {
        self.stabilization
    }

    pub fn weight(&self, i: usize, j: usize) -> ExtendedReal {
        self.weights[i * self.n_post + j]
    }

    /// Outgoing weights of presynaptic unit `i`.
    pub fn row(&self, i: usize) -> &[ExtendedReal] {
        &self.weights[i * self.n_post..(i + 1) * self.n_post]
    }

    pub fn weights(&self) -> &[ExtendedReal] {
        &self.weights
    }

    pub fn bias(&self) -> &[ExtendedReal] {
        &self.bias
    }

    /// Writes `i,j,fin,inf` rows for every weight.
    pub fn write_weights_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["i", "j", "fin", "inf"])?;
        for i in 0..self.n_pre {
            for (j, x) in self.row(i).iter().enumerate() {
                out.serialize((i, j, x.fin, x.inf))?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `j,fin,inf` rows for every bias.
    pub fn write_bias_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["j", "fin", "inf"])?;
        for (j, x) in self.bias.iter().enumerate() {
            out.serialize((j, x.fin, x.inf))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Rows per work item when building. Fixed so that bias sums are reduced in
/// the same order whatever the execution strategy.
const ROW_CHUNK: usize = 32;

struct Noise {
    p01: f64,
    q01: f64,
    p10: f64,
    q10: f64,
}

pub fn build<V: CounterView>(rule: Rule, counts: &V, est: NoiseEstimate, exec: Exec) -> WeightModel {
    let (n_pre, n_post) = (counts.n_pre(), counts.n_post());
    let m = counts.total();
    let noise = Noise {
        p01: est.p01,
        q01: 1.0 - est.p01,
        p10: est.p10,
        q10: 1.0 - est.p10,
    };
    let ln_m = ExtendedReal::ln(m);
    let ln_m1: Vec<ExtendedReal> = (0..n_post).map(|j| ExtendedReal::ln(counts.post_usage(j))).collect();
    let ln_m0: Vec<ExtendedReal> = (0..n_post)
        .map(|j| ExtendedReal::ln(m - counts.post_usage(j)))
        .collect();

    let chunks: Vec<usize> = (0..n_pre.div_ceil(ROW_CHUNK)).collect();
    let parts = exec.map(&chunks, |&c| {
        let rows = c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n_pre);
        let mut w = vec![ExtendedReal::ZERO; rows.len() * n_post];
        let mut partial = vec![ExtendedReal::ZERO; n_post];
        let mut syn = vec![SynapseCounts::default(); n_post];
        for (r, i) in rows.enumerate() {
            counts.synapse_row(i, &mut syn);
            let wr = &mut w[r * n_post..(r + 1) * n_post];
            let m1p = counts.pre_usage(i);
            let m0p = m - m1p;
            match rule {
                Rule::Bayes => bayes_row(&noise, &syn, wr, &mut partial),
                Rule::Bcpnn => {
                    let lq = ExtendedReal::ln(m1p * noise.q10 + m0p * noise.p01);
                    for ((o, s), l1) in wr.iter_mut().zip(&syn).zip(&ln_m1) {
                        *o = ExtendedReal::ln(s.m11 * noise.q10 + s.m01 * noise.p01) + ln_m - lq - *l1;
                    }
                }
                Rule::Bcpnn2 => {
                    let lq1 = ExtendedReal::ln(m1p * noise.q10 + m0p * noise.p01);
                    let lq0 = ExtendedReal::ln(m0p * noise.q01 + m1p * noise.p10);
                    for ((o, s), b) in wr.iter_mut().zip(&syn).zip(partial.iter_mut()) {
                        let a1 = ExtendedReal::ln(s.m11 * noise.q10 + s.m01 * noise.p01);
                        let a0 = ExtendedReal::ln(s.m01 * noise.q01 + s.m11 * noise.p10);
                        *o = a1 + lq0 - a0 - lq1;
                        *b += a0 - lq0;
                    }
                }
                Rule::Bcpnn3 => {
                    for (((o, s), l1), l0) in wr.iter_mut().zip(&syn).zip(&ln_m1).zip(&ln_m0) {
                        *o = ExtendedReal::ln(s.m11 * noise.q10 + s.m01 * noise.p01) + *l0
                            - ExtendedReal::ln(s.m10 * noise.q10 + s.m00 * noise.p01)
                            - *l1;
                    }
                }
            }
        }
        (w, partial)
    });

    let mut weights = Vec::with_capacity(n_pre * n_post);
    let mut bias = vec![ExtendedReal::ZERO; n_post];
    for (w, partial) in parts {
        weights.extend_from_slice(&w);
        for (b, p) in bias.iter_mut().zip(partial) {
            *b += p;
        }
    }

    let ln2 = ExtendedReal::finite(std::f64::consts::LN_2);
    let fan_in = n_pre as i32;
    for ((b, &l1), &l0) in bias.iter_mut().zip(&ln_m1).zip(&ln_m0) {
        *b += match rule {
            Rule::Bayes => (l0 - l1).scale(fan_in - 1),
            Rule::Bcpnn => ln2 + l1 - ln_m,
            Rule::Bcpnn2 => ln2 + (ln_m - l1).scale(fan_in - 1),
            Rule::Bcpnn3 => l1 - l0,
        };
    }

    WeightModel {
        rule,
        n_pre,
        n_post,
        weights,
        bias,
        estimate: est,
        stabilization: counts.stabilization(),
    }
}

fn bayes_row(noise: &Noise, syn: &[SynapseCounts], w: &mut [ExtendedReal], partial: &mut [ExtendedReal]) {
    for ((o, s), b) in w.iter_mut().zip(syn).zip(partial.iter_mut()) {
        // Expected counts of (query bit, postsynaptic state) pairs.
        let on_given_1 = ExtendedReal::ln(s.m11 * noise.q10 + s.m01 * noise.p01);
        let off_given_0 = ExtendedReal::ln(s.m00 * noise.q01 + s.m10 * noise.p10);
        let on_given_0 = ExtendedReal::ln(s.m10 * noise.q10 + s.m00 * noise.p01);
        let off_given_1 = ExtendedReal::ln(s.m01 * noise.q01 + s.m11 * noise.p10);
        *o = (on_given_1 + off_given_0) - (on_given_0 + off_given_1);
        *b += off_given_1 - off_given_0;
    }
}

pub fn build_bayes<V: CounterView>(counts: &V, est: NoiseEstimate) -> WeightModel {
    build(Rule::Bayes, counts, est, Exec::default())
}

pub fn build_bcpnn<V: CounterView>(counts: &V, est: NoiseEstimate) -> WeightModel {
    build(Rule::Bcpnn, counts, est, Exec::default())
}

pub fn build_bcpnn2<V: CounterView>(counts: &V, est: NoiseEstimate) -> WeightModel {
    build(Rule::Bcpnn2, counts, est, Exec::default())
}

pub fn build_bcpnn3<V: CounterView>(counts: &V, est: NoiseEstimate) -> WeightModel {
    build(Rule::Bcpnn3, counts, est, Exec::default())
}

/// A model with nonnegative weights and a global inhibitory term
/// `-shift * (number of active inputs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DaleModel {
    n_pre: usize,
    n_post: usize,
    weights: Vec<f64>,
    shift: f64,
    bias: Vec<ExtendedReal>,
}

impl DaleModel {
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn potentials(&self, query: &[bool]) -> Result<Vec<ExtendedReal>> {
        if query.len() != self.n_pre {
            return Err(Error::LengthMismatch {
                expected: self.n_pre,
                got: query.len(),
            });
        }
        let mut excite = vec![0.0; self.n_post];
        let mut active = 0usize;
        for (i, _) in query.iter().enumerate().filter(|(_, &b)| b) {
            active += 1;
            let row = &self.weights[i * self.n_post..(i + 1) * self.n_post];
            for (e, w) in excite.iter_mut().zip(row) {
                *e += w;
            }
        }
        let inhibit = self.shift * active as f64;
        Ok(self
            .bias
            .iter()
            .zip(excite)
            .map(|(&b, e)| b + ExtendedReal::finite(e - inhibit))
            .collect())
    }
}

/// Shifts every weight by `c = -min w` so that all become nonnegative.
pub fn dale_shift(model: &WeightModel) -> Result<DaleModel> {
    if let Some(w) = model.weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::UnsupportedModel(format!(
            "dale shift needs finite weights, found {w}"
        )));
    }
    let shift = -model.weights.iter().map(|w| w.fin).fold(f64::INFINITY, f64::min);
    Ok(DaleModel {
        n_pre: model.n_pre,
        n_post: model.n_post,
        weights: model.weights.iter().map(|w| w.fin + shift).collect(),
        shift,
        bias: model.bias.clone(),
    })
}

/// A model over plain reals, with every infinite unit replaced by `z_inf`.
///
/// Selections agree with the exact model as long as `z_inf` exceeds the
/// largest total of absolute finite contributions a potential can collect.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainModel {
    n_pre: usize,
    n_post: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl PlainModel {
    pub fn potentials(&self, query: &[bool]) -> Result<Vec<f64>> {
        if query.len() != self.n_pre {
            return Err(Error::LengthMismatch {
                expected: self.n_pre,
                got: query.len(),
            });
        }
        let mut x = self.bias.clone();
        for (i, _) in query.iter().enumerate().filter(|(_, &b)| b) {
            let row = &self.weights[i * self.n_post..(i + 1) * self.n_post];
            for (xj, w) in x.iter_mut().zip(row) {
                *xj += w;
            }
        }
        Ok(x)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

pub fn dirty_materialize(model: &WeightModel, z_inf: f64) -> Result<PlainModel> {
    if z_inf.is_nan() || z_inf <= 0.0 {
        return Err(invalid(format!("z_inf must be positive, got {z_inf}")));
    }
    Ok(PlainModel {
        n_pre: model.n_pre,
        n_post: model.n_post,
        weights: model.weights.iter().map(|w| w.materialize(z_inf)).collect(),
        bias: model.bias.iter().map(|b| b.materialize(z_inf)).collect(),
    })
}
