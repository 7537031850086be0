//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream cipher keyed by
//! a [`Seed`]. A seed is four 64-bit words used verbatim as the 256-bit
//! ChaCha key, so the mapping from `(master, purpose, a, b)` to a key is
//! injective by construction. Within one key, independent sub-streams (one
//! per query trial, say) are selected through ChaCha's 64-bit stream id.
//!
//! Harness keys are laid out as `[master, purpose, M, network]`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error};

/// What a derived stream is used for. The discriminant is the second key word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Patterns = 1,
    Content = 2,
    Queries = 3,
    Calibration = 4,
}

/// A 256-bit ChaCha key.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Seed([u64; 4]);

impl Seed {
    pub const fn new(master: u64) -> Self {
        Seed([master, 0, 0, 0])
    }

    pub const fn from_words(words: [u64; 4]) -> Self {
        Seed(words)
    }

    /// Key for a harness stream identified by `(purpose, a, b)` under this
    /// seed's master word.
    pub const fn derive(self, purpose: Purpose, a: u64, b: u64) -> Self {
        Seed([self.0[0], purpose as u64, a, b])
    }

    pub fn master(self) -> u64 {
        self.0[0]
    }

    pub fn words(self) -> [u64; 4] {
        self.0
    }

    /// Stream 0 of this key.
    pub fn rng(self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes.chunks_exact_mut(8).zip(self.0) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(stream);
        rng
    }
}

impl From<u64> for Seed {
    fn from(master: u64) -> Self {
        Seed::new(master)
    }
}

/// A plain master seed prints as a single integer; derived keys print as
/// four colon-separated words.
impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        if b == 0 && c == 0 && d == 0 {
            write!(f, "{a}")
        } else {
            write!(f, "{a}:{b}:{c}:{d}")
        }
    }
}

impl FromStr for Seed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let parse = |p: &str| p.parse::<u64>().map_err(|_| invalid(format!("bad seed word {p:?}")));
        match parts.as_slice() {
            [a] => Ok(Seed::new(parse(a)?)),
            [a, b, c, d] => Ok(Seed([parse(a)?, parse(b)?, parse(c)?, parse(d)?])),
            _ => Err(invalid(format!("bad seed {s:?}"))),
        }
    }
}
