//! Memory pattern ensembles and noisy queries.
//!
//! Two families are supported. *Willshaw* patterns have i.i.d. Bernoulli(k/n)
//! components, so `k` is only the mean activity. *Palm* patterns have exactly
//! `k` active units, drawn uniformly from all k-subsets.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::Seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Willshaw,
    Palm,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Willshaw => "willshaw",
            Family::Palm => "palm",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "willshaw" => Ok(Family::Willshaw),
            "palm" => Ok(Family::Palm),
            _ => Err(invalid(format!("unknown pattern family {s:?}"))),
        }
    }
}

/// `M` binary patterns of length `n`, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSet {
    n: usize,
    k: usize,
    family: Family,
    seed: Seed,
    bits: Vec<bool>,
}

impl PatternSet {
    /// Wraps explicit rows. `k` is recorded as metadata only.
    pub fn from_rows(rows: &[Vec<bool>], k: usize, family: Family, seed: Seed) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(invalid("pattern set needs at least one non-empty row"));
        }
        let mut bits = Vec::with_capacity(rows.len() * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            bits.extend_from_slice(r);
        }
        Ok(PatternSet {
            n,
            k,
            family,
            seed,
            bits,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of stored patterns.
    pub fn len(&self) -> usize {
        self.bits.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn pattern(&self, mu: usize) -> &[bool] {
        &self.bits[mu * self.n..(mu + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[bool]> + '_ {
        self.bits.chunks_exact(self.n)
    }

    /// Writes the set as a header line `n k M family seed` followed by one
    /// pattern per line of `0`/`1` characters.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {} {} {}", self.n, self.k, self.len(), self.family, self.seed)?;
        let mut line = String::with_capacity(self.n + 1);
        for p in self.iter() {
            line.clear();
            line.extend(p.iter().map(|&b| if b { '1' } else { '0' }));
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| invalid(format!("pattern file: {m}"));
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [n, k, m, family, seed] = fields.as_slice() else {
            return Err(bad(format!("header {header:?}")));
        };
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number {s:?}")));
        let (n, k, m) = (num(n)?, num(k)?, num(m)?);
        let family: Family = family.parse()?;
        let seed: Seed = seed.parse()?;
        let mut rows = Vec::with_capacity(m);
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let row = line
                .bytes()
                .map(|c| match c {
                    b'0' => Ok(false),
                    b'1' => Ok(true),
                    _ => Err(bad(format!("unexpected byte {c:#x}"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            rows.push(row);
        }
        if rows.len() != m {
            return Err(bad(format!("header says {m} patterns, found {}", rows.len())));
        }
        PatternSet::from_rows(&rows, k, family, seed)
    }
}

/// Draws `M` patterns. Deterministic in `seed`.
pub fn gen_patterns(n: usize, k: usize, m: usize, family: Family, seed: Seed) -> Result<PatternSet> {
    if n == 0 || k == 0 {
        return Err(invalid("n and k must be positive"));
    }
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    if m == 0 {
        return Err(invalid("need at least one pattern"));
    }
    let mut rng = seed.rng();
    let mut bits = vec![false; m * n];
    match family {
        Family::Willshaw => {
            let p = k as f64 / n as f64;
            for b in bits.iter_mut() {
                *b = rng.random_bool(p);
            }
        }
        Family::Palm => {
            let mut idx: Vec<usize> = (0..n).collect();
            for row in bits.chunks_exact_mut(n) {
                partial_shuffle(&mut rng, &mut idx, k);
                for &i in &idx[..k] {
                    row[i] = true;
                }
            }
        }
    }
    Ok(PatternSet {
        n,
        k,
        family,
        seed,
        bits,
    })
}

/// Moves a uniformly chosen `take`-subset of `v` into `v[..take]`.
fn partial_shuffle<R: Rng>(rng: &mut R, v: &mut [usize], take: usize) {
    let len = v.len();
    for i in 0..take {
        let j = rng.random_range(i..len);
        v.swap(i, j);
    }
}

/// Query noise: fraction `lambda` of correct ones retained, `kappa * k` false
/// ones added on average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuerySpec {
    lambda: f64,
    kappa: f64,
    n: usize,
    k: usize,
}

impl QuerySpec {
    /// `n` and `k` (mean activity) fix the conversion to component flip
    /// probabilities.
    pub fn new(lambda: f64, kappa: f64, n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(invalid(format!("need 0 < k < n, got k = {k}, n = {n}")));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(format!("lambda = {lambda} outside [0, 1]")));
        }
        let kappa_max = (n - k) as f64 / k as f64;
        if !(0.0..=kappa_max).contains(&kappa) {
            return Err(invalid(format!("kappa = {kappa} outside [0, {kappa_max}]")));
        }
        Ok(QuerySpec { lambda, kappa, n, k })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Miss probability `1 - lambda`.
    pub fn p10(&self) -> f64 {
        1.0 - self.lambda
    }

    /// Add probability `kappa k / (n - k)`.
    pub fn p01(&self) -> f64 {
        self.kappa * self.k as f64 / (self.n - self.k) as f64
    }

    /// `round(lambda k)`: correct ones kept in a Palm query.
    pub fn palm_kept(&self) -> usize {
        (self.lambda * self.k as f64).round() as usize
    }

    /// `round(kappa k)`: false ones added to a Palm query.
    pub fn palm_added(&self) -> usize {
        (self.kappa * self.k as f64).round() as usize
    }
}

/// Noisy version of `pattern`, deterministic in `seed`.
pub fn make_query(pattern: &[bool], spec: &QuerySpec, family: Family, seed: Seed) -> Result<Vec<bool>> {
    make_query_with(pattern, spec, family, &mut seed.rng())
}

/// Same as [`make_query`] but drawing from a caller-supplied stream.
pub fn make_query_with<R: Rng>(pattern: &[bool], spec: &QuerySpec, family: Family, rng: &mut R) -> Result<Vec<bool>> {
    if pattern.len() != spec.n {
        return Err(Error::LengthMismatch {
            expected: spec.n,
            got: pattern.len(),
        });
    }
    match family {
        Family::Willshaw => {
            let (p10, p01) = (spec.p10(), spec.p01());
            Ok(pattern
                .iter()
                .map(|&b| if b { !rng.random_bool(p10) } else { rng.random_bool(p01) })
                .collect())
        }
        Family::Palm => {
            let mut ones: Vec<usize> = Vec::new();
            let mut zeros: Vec<usize> = Vec::new();
            for (i, &b) in pattern.iter().enumerate() {
                if b {
                    ones.push(i)
                } else {
                    zeros.push(i)
                }
            }
            let (keep, add) = (spec.palm_kept(), spec.palm_added());
            if keep > ones.len() {
                return Err(invalid(format!(
                    "query keeps {keep} ones but pattern has {}",
                    ones.len()
                )));
            }
            if add > zeros.len() {
                return Err(invalid(format!(
                    "query adds {add} ones but pattern has {} zeros",
                    zeros.len()
                )));
            }
            let mut q = vec![false; pattern.len()];
            partial_shuffle(rng, &mut ones, keep);
            partial_shuffle(rng, &mut zeros, add);
            for &i in ones[..keep].iter().chain(&zeros[..add]) {
                q[i] = true;
            }
            Ok(q)
        }
    }
}
