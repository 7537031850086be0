//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the counter store or the rule builders.

#![allow(dead_code)]

use rand::{Rng, RngCore};

/// Joint counts of presynaptic unit `i` (rows of `pre`) against
/// postsynaptic unit `j` (rows of `post`), recounted from the patterns.
#[derive(Clone, Copy, Debug)]
pub struct Counts {
    pub c11: f64,
    pub c01: f64,
    pub c10: f64,
    pub c00: f64,
}

pub fn recount(pre: &[Vec<bool>], post: &[Vec<bool>], i: usize, j: usize) -> Counts {
    let mut c = Counts {
        c11: 0.0,
        c01: 0.0,
        c10: 0.0,
        c00: 0.0,
    };
    for (a, b) in pre.iter().zip(post) {
        match (a[i], b[j]) {
            (true, true) => c.c11 += 1.0,
            (false, true) => c.c01 += 1.0,
            (true, false) => c.c10 += 1.0,
            (false, false) => c.c00 += 1.0,
        }
    }
    c
}

pub fn usage(pats: &[Vec<bool>], i: usize) -> f64 {
    pats.iter().filter(|p| p[i]).count() as f64
}

/// Conditional query-bit probabilities for one synapse under global noise.
pub struct Likelihoods {
    /// `pr[q_i = 1 | u_j = 1]`, `pr[q_i = 0 | u_j = 1]`.
    pub on1: f64,
    pub off1: f64,
    /// `pr[q_i = 1 | u_j = 0]`, `pr[q_i = 0 | u_j = 0]`.
    pub on0: f64,
    pub off0: f64,
    /// Marginals `pr[q_i = 1]`, `pr[q_i = 0]`.
    pub on: f64,
    pub off: f64,
}

pub fn likelihoods(c: Counts, m1_pre: f64, m: f64, p01: f64, p10: f64) -> Likelihoods {
    let m1 = c.c11 + c.c01;
    let m0 = c.c10 + c.c00;
    let m0_pre = m - m1_pre;
    Likelihoods {
        on1: (c.c11 * (1.0 - p10) + c.c01 * p01) / m1,
        off1: (c.c01 * (1.0 - p01) + c.c11 * p10) / m1,
        on0: (c.c10 * (1.0 - p10) + c.c00 * p01) / m0,
        off0: (c.c00 * (1.0 - p01) + c.c10 * p10) / m0,
        on: (m1_pre * (1.0 - p10) + m0_pre * p01) / m,
        off: (m0_pre * (1.0 - p01) + m1_pre * p10) / m,
    }
}

/// Which product form to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// Odds ratio over all inputs.
    Bayes,
    /// `2 pr[u=1] prod over active inputs of pr[q|u=1] / pr[q]`.
    Bcpnn,
    /// As above over all inputs.
    Bcpnn2,
    /// Odds ratio over active inputs only.
    Bcpnn3,
}

/// The quantity whose log is the potential of unit `j`, as
/// `(numerator, denominator)` of plain products. Also returns the Bayes
/// posterior `pr[u_j = 1 | query]` for [`Form::Bayes`].
pub fn product_form(
    form: Form,
    pre: &[Vec<bool>],
    post: &[Vec<bool>],
    query: &[bool],
    j: usize,
    p01: f64,
    p10: f64,
) -> (f64, f64) {
    let m = pre.len() as f64;
    let m1 = usage(post, j);
    let m0 = m - m1;
    let (mut num, mut den) = match form {
        Form::Bayes | Form::Bcpnn3 => (m1 / m, m0 / m),
        Form::Bcpnn | Form::Bcpnn2 => (2.0 * m1 / m, 1.0),
    };
    for (i, &q) in query.iter().enumerate() {
        let c = recount(pre, post, i, j);
        let l = likelihoods(c, usage(pre, i), m, p01, p10);
        match (form, q) {
            (Form::Bayes, true) => {
                num *= l.on1;
                den *= l.on0;
            }
            (Form::Bayes, false) => {
                num *= l.off1;
                den *= l.off0;
            }
            (Form::Bcpnn, true) | (Form::Bcpnn2, true) => {
                num *= l.on1;
                den *= l.on;
            }
            (Form::Bcpnn2, false) => {
                num *= l.off1;
                den *= l.off;
            }
            (Form::Bcpnn3, true) => {
                num *= l.on1;
                den *= l.on0;
            }
            (Form::Bcpnn, false) | (Form::Bcpnn3, false) => {}
        }
    }
    (num, den)
}

pub fn random_patterns<R: RngCore>(rng: &mut R, n: usize, m: usize) -> Vec<Vec<bool>> {
    let density = rng.random_range(0.15..0.6);
    (0..m)
        .map(|_| (0..n).map(|_| rng.random_bool(density)).collect())
        .collect()
}

pub fn random_bits<R: RngCore>(rng: &mut R, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(p)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
