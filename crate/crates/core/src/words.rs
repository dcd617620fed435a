//! Admissible digit words: finite 0/1 strings with no two adjacent ones.
//!
//! These are exactly the digit strings the greedy golden-ratio expansion can
//! produce. The module provides lexicographic enumeration via a successor
//! function, Fibonacci counting of the words of each length, and a
//! Zeckendorf-style rank/unrank pair so a word can be addressed without
//! materializing the whole set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::GoldenScalar;

/// Longest word length `enumerate` accepts by default (about 5.7M words).
pub const DEFAULT_ENUM_CAP: usize = 32;

/// Largest index for which the Fibonacci sequence fits in u128.
const MAX_FIB_INDEX: usize = 184;

/// A word (j_1, ..., j_n), most significant digit first, with j_k * j_{k+1} = 0.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word {
    digits: Vec<u8>,
}

impl Word {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::InadmissibleWord("empty word".into()));
        }
        if digits.iter().any(|&d| d > 1) {
            return Err(Error::InadmissibleWord(format!(
                "{digits:?} has non-binary digits"
            )));
        }
        if digits.windows(2).any(|w| w[0] == 1 && w[1] == 1) {
            let s: String = digits.iter().map(|d| char::from(b'0' + d)).collect();
            return Err(Error::InadmissibleWord(s));
        }
        Ok(Word { digits })
    }

    /// The all-zero word of length n, the lexicographic minimum.
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "words have length at least 1");
        Word { digits: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    /// 0-based digit access: `digit(0)` is j_1.
    pub fn digit(&self, i: usize) -> u8 {
        self.digits[i]
    }

    pub fn last_digit(&self) -> u8 {
        *self.digits.last().unwrap()
    }

    /// The next word of the same length in lexicographic order, or `None` at
    /// the maximum.
    ///
    /// Scanning from the right, the first position whose digit can flip from
    /// 0 to 1 without touching a preceding 1 is raised, and everything after
    /// it is zeroed.
    pub fn successor(&self) -> Option<Word> {
        let n = self.digits.len();
        for k in (0..n).rev() {
            if self.digits[k] == 0 && (k == 0 || self.digits[k - 1] == 0) {
                let mut next = self.digits.clone();
                next[k] = 1;
                for d in next.iter_mut().skip(k + 1) {
                    *d = 0;
                }
                return Some(Word { digits: next });
            }
        }
        None
    }

    /// 0-based position in the lexicographic order of same-length words.
    ///
    /// Each 1 at (1-based) position k skips past every word that keeps the
    /// shared prefix and stays 0 there: fibonacci(n - k + 2) of them.
    pub fn rank(&self) -> u128 {
        let n = self.digits.len();
        self.digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 1)
            .map(|(i, _)| fibonacci(n - i + 1))
            .sum()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("bad digit {other:?} in word {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Word::new(digits)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse().map_err(|e: Error| e.to_string())
    }
}

/// Word counts of one length, split by final digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountTriple {
    /// Words ending in 0: fibonacci(n + 1).
    pub n0: u128,
    /// Words ending in 1: fibonacci(n).
    pub n1: u128,
    /// All words of length n: fibonacci(n + 2).
    pub total: u128,
}

/// Fibonacci numbers b_0 = 0, b_1 = 1, b_n = b_{n-1} + b_{n-2}.
pub fn fibonacci(n: usize) -> u128 {
    assert!(n <= MAX_FIB_INDEX, "fibonacci({n}) overflows u128");
    let (mut a, mut b) = (0u128, 1u128);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// The same Fibonacci number through the closed form
/// (beta^n - (-beta)^-n)/sqrt(5), evaluated exactly in Q(beta).
///
/// The result is a rational integer; the beta component cancels.
pub fn fibonacci_binet(n: usize) -> GoldenScalar {
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    let tail = GoldenScalar::pow_beta(-(n as i64)) * GoldenScalar::from_ints(sign, 0);
    (GoldenScalar::pow_beta(n as i64) - tail) * GoldenScalar::sqrt5().inverse().unwrap()
}

/// (N_0(n), N_1(n), N(n)) by the Fibonacci recursion.
pub fn counts(n: usize) -> CountTriple {
    assert!(n >= 1);
    CountTriple {
        n0: fibonacci(n + 1),
        n1: fibonacci(n),
        total: fibonacci(n + 2),
    }
}

/// The maximal word of length n: 1 at odd positions, 0 at even.
pub fn max_word(n: usize) -> Word {
    assert!(n >= 1);
    Word {
        digits: (0..n).map(|i| u8::from(i.is_multiple_of(2))).collect(),
    }
}

/// Every word of length n in increasing lexicographic order.
pub fn enumerate(n: usize) -> Result<Vec<Word>> {
    enumerate_with_cap(n, DEFAULT_ENUM_CAP)
}

/// Enumeration with an explicit memory-guard cap.
pub fn enumerate_with_cap(n: usize, cap: usize) -> Result<Vec<Word>> {
    if n == 0 || n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    let mut out = Vec::with_capacity(fibonacci(n + 2) as usize);
    let mut current = Some(Word::zeros(n));
    while let Some(w) = current {
        current = w.successor();
        out.push(w);
    }
    Ok(out)
}

/// Inverse of [`Word::rank`]: the word of length n at position r.
pub fn unrank(n: usize, r: u128) -> Result<Word> {
    assert!(n >= 1);
    let size = fibonacci(n + 2);
    if r >= size {
        return Err(Error::RankOutOfRange { n, rank: r, size });
    }
    let mut rest = r;
    let mut digits = vec![0u8; n];
    let mut prev = 0u8;
    for (i, digit) in digits.iter_mut().enumerate() {
        if prev == 1 {
            prev = 0;
            continue;
        }
        let with_zero = fibonacci(n - i + 1);
        if rest >= with_zero {
            *digit = 1;
            rest -= with_zero;
            prev = 1;
        }
    }
    debug_assert_eq!(rest, 0);
    Ok(Word { digits })
}
