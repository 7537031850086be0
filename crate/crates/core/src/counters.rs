//! Unit-usage and synapse-usage counters.
//!
//! Only `M`, `M1` and `M11` are materialised. The remaining synapse counters
//! follow from the identities
//!
//! ```text
//! M01(ij) = M1(j) - M11(ij)
//! M00(ij) = M0(i) - M01(ij)
//! M10(ij) = M0(j) - M00(ij)
//! ```
//!
//! In auto mode `M11` is symmetric and kept as an upper triangle.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::patterns::PatternSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Auto,
    Hetero,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Auto => "auto",
            Mode::Hetero => "hetero",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Mode::Auto),
            "hetero" => Ok(Mode::Hetero),
            _ => Err(invalid(format!("unknown mode {s:?}"))),
        }
    }
}

/// The four joint counters of one synapse, as reals so that stabilised
/// views can substitute fractional values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SynapseCounts {
    pub m11: f64,
    pub m01: f64,
    pub m10: f64,
    pub m00: f64,
}

/// Every counter visible to synapse `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DerivedCounters {
    pub m00: u32,
    pub m01: u32,
    pub m10: u32,
    pub m11: u32,
    pub m0_pre: u32,
    pub m0_post: u32,
}

/// Read access to counters as consumed by the learning rules.
pub trait CounterView: Sync {
    fn n_pre(&self) -> usize;
    fn n_post(&self) -> usize;
    /// Stored pattern count `M`.
    fn total(&self) -> f64;
    fn pre_usage(&self, i: usize) -> f64;
    fn post_usage(&self, j: usize) -> f64;
    /// Fills `out[j]` with the counters of synapse `(i, j)` for every `j`.
    fn synapse_row(&self, i: usize, out: &mut [SynapseCounts]);
    /// `(eta, eps_s)` when `M11` reads are floored.
    fn stabilization(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterStore {
    mode: Mode,
    m: u32,
    n_pre: usize,
    n_post: usize,
    usage_pre: Vec<u32>,
    /// Empty in auto mode, where pre and post usage coincide.
    usage_post: Vec<u32>,
    joint: Vec<u32>,
}

impl CounterStore {
    pub fn empty_auto(n: usize) -> Self {
        CounterStore {
            mode: Mode::Auto,
            m: 0,
            n_pre: n,
            n_post: n,
            usage_pre: vec![0; n],
            usage_post: Vec::new(),
            joint: vec![0; n * (n + 1) / 2],
        }
    }

    pub fn empty_hetero(n_in: usize, n_out: usize) -> Self {
        CounterStore {
            mode: Mode::Hetero,
            m: 0,
            n_pre: n_in,
            n_post: n_out,
            usage_pre: vec![0; n_in],
            usage_post: vec![0; n_out],
            joint: vec![0; n_in * n_out],
        }
    }

    /// Counts a whole pattern set. Hetero mode requires `content` with the
    /// same number of patterns; auto mode rejects it.
    pub fn store(patterns: &PatternSet, mode: Mode, content: Option<&PatternSet>) -> Result<Self> {
        match (mode, content) {
            (Mode::Auto, None) => {
                let mut s = Self::empty_auto(patterns.n());
                for p in patterns.iter() {
                    s.add_pattern(p)?;
                }
                Ok(s)
            }
            (Mode::Auto, Some(_)) => Err(invalid("auto mode takes no content patterns")),
            (Mode::Hetero, None) => Err(invalid("hetero mode needs content patterns")),
            (Mode::Hetero, Some(c)) => {
                if c.len() != patterns.len() {
                    return Err(invalid(format!(
                        "{} address patterns but {} content patterns",
                        patterns.len(),
                        c.len()
                    )));
                }
                let mut s = Self::empty_hetero(patterns.n(), c.n());
                for (u, v) in patterns.iter().zip(c.iter()) {
                    s.add_pair(u, v)?;
                }
                Ok(s)
            }
        }
    }

    /// Adds one auto-associative pattern.
    pub fn add_pattern(&mut self, u: &[bool]) -> Result<()> {
        if self.mode != Mode::Auto {
            return Err(Error::UnsupportedMode("add_pattern on a hetero store".into()));
        }
        if u.len() != self.n_pre {
            return Err(Error::LengthMismatch {
                expected: self.n_pre,
                got: u.len(),
            });
        }
        let active = active_units(u);
        for (a, &i) in active.iter().enumerate() {
            self.usage_pre[i] += 1;
            let row = tri_row_start(self.n_pre, i);
            for &j in &active[a..] {
                self.joint[row + (j - i)] += 1;
            }
        }
        self.m += 1;
        Ok(())
    }

    /// Adds one address/content association.
    pub fn add_pair(&mut self, u: &[bool], v: &[bool]) -> Result<()> {
        if self.mode != Mode::Hetero {
            return Err(Error::UnsupportedMode("add_pair on an auto store".into()));
        }
        for (x, n) in [(u, self.n_pre), (v, self.n_post)] {
            if x.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
        }
        let (ui, vj) = (active_units(u), active_units(v));
        for &i in &ui {
            self.usage_pre[i] += 1;
            let row = &mut self.joint[i * self.n_post..(i + 1) * self.n_post];
            for &j in &vj {
                row[j] += 1;
            }
        }
        for &j in &vj {
            self.usage_post[j] += 1;
        }
        self.m += 1;
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn patterns(&self) -> u32 {
        self.m
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    /// `M1(i)` of an input unit.
    pub fn usage_pre(&self, i: usize) -> u32 {
        self.usage_pre[i]
    }

    /// `M1(j)` of an output unit.
    pub fn usage_post(&self, j: usize) -> u32 {
        match self.mode {
            Mode::Auto => self.usage_pre[j],
            Mode::Hetero => self.usage_post[j],
        }
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_pre || j >= self.n_post {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                rows: self.n_pre,
                cols: self.n_post,
            });
        }
        Ok(())
    }

    /// `M11(ij)`.
    pub fn joint(&self, i: usize, j: usize) -> Result<u32> {
        self.check(i, j)?;
        Ok(self.joint_unchecked(i, j))
    }

    fn joint_unchecked(&self, i: usize, j: usize) -> u32 {
        match self.mode {
            Mode::Auto => {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                self.joint[tri_row_start(self.n_pre, a) + (b - a)]
            }
            Mode::Hetero => self.joint[i * self.n_post + j],
        }
    }

    pub fn derived_counters(&self, i: usize, j: usize) -> Result<DerivedCounters> {
        self.check(i, j)?;
        let m11 = self.joint_unchecked(i, j);
        let m0_pre = self.m - self.usage_pre(i);
        let m0_post = self.m - self.usage_post(j);
        let m01 = self.usage_post(j) - m11;
        let m00 = m0_pre - m01;
        let m10 = m0_post - m00;
        Ok(DerivedCounters {
            m00,
            m01,
            m10,
            m11,
            m0_pre,
            m0_post,
        })
    }

    /// Bits needed to hold `M` and the upper triangle of `M11` at
    /// `ceil(log2 M)` bits each: `(n(n+1)/2 + 1) * ceil(log2 M)`.
    pub fn memory_footprint(&self) -> Result<u64> {
        if self.mode != Mode::Auto {
            return Err(Error::UnsupportedMode("footprint is defined for auto stores".into()));
        }
        footprint_bits(self.n_pre, self.m as u64)
    }
}

pub fn footprint_bits(n: usize, m: u64) -> Result<u64> {
    if m < 2 {
        return Err(invalid(format!("footprint needs M >= 2, got {m}")));
    }
    let bits_per = 64 - u64::from((m - 1).leading_zeros());
    let n = n as u64;
    Ok((n * (n + 1) / 2 + 1) * bits_per)
}

impl CounterView for CounterStore {
    fn n_pre(&self) -> usize {
        self.n_pre
    }

    fn n_post(&self) -> usize {
        self.n_post
    }

    fn total(&self) -> f64 {
        f64::from(self.m)
    }

    fn pre_usage(&self, i: usize) -> f64 {
        f64::from(self.usage_pre[i])
    }

    fn post_usage(&self, j: usize) -> f64 {
        f64::from(self.usage_post(j))
    }

    fn synapse_row(&self, i: usize, out: &mut [SynapseCounts]) {
        debug_assert_eq!(out.len(), self.n_post);
        let m = self.m;
        let m0_pre = m - self.usage_pre[i];
        let fill = |out: &mut SynapseCounts, m11: u32, m1_post: u32| {
            let m01 = m1_post - m11;
            let m00 = m0_pre - m01;
            let m10 = (m - m1_post) - m00;
            *out = SynapseCounts {
                m11: f64::from(m11),
                m01: f64::from(m01),
                m10: f64::from(m10),
                m00: f64::from(m00),
            };
        };
        match self.mode {
            Mode::Auto => {
                let n = self.n_pre;
                for (j, o) in out.iter_mut().enumerate().take(i) {
                    fill(o, self.joint[tri_row_start(n, j) + (i - j)], self.usage_pre[j]);
                }
                let row = &self.joint[tri_row_start(n, i)..tri_row_start(n, i) + (n - i)];
                for ((o, &m11), &u) in out[i..].iter_mut().zip(row).zip(&self.usage_pre[i..]) {
                    fill(o, m11, u);
                }
            }
            Mode::Hetero => {
                let row = &self.joint[i * self.n_post..(i + 1) * self.n_post];
                for ((o, &m11), &u) in out.iter_mut().zip(row).zip(&self.usage_post) {
                    fill(o, m11, u);
                }
            }
        }
    }
}

fn tri_row_start(n: usize, i: usize) -> usize {
    i * (2 * n - i + 1) / 2
}

pub(crate) fn active_units(u: &[bool]) -> Vec<usize> {
    u.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
}
