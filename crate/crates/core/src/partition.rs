//! The interval partition of [0, 1) induced by length-n admissible words.
//!
//! A word J owns the interval of points whose first n digits equal J. Its
//! left endpoint is the base-beta fraction of J and its length is beta^-n or
//! beta^-(n+1) depending on the final digit. All endpoints live in Q(beta),
//! so abutment and tiling are checked by exact equality.

use crate::error::{Error, Result};
use crate::scalar::GoldenScalar;
use crate::words::{self, Word};

/// One partition interval: `[left, left + length)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalNJ {
    word: Word,
    left: GoldenScalar,
    length: GoldenScalar,
}

impl IntervalNJ {
    /// Builds the interval owned by `word`, computing the endpoint from the
    /// digit sum.
    pub fn for_word(word: Word) -> Self {
        let left = left_endpoint(&word);
        let n = word.len() as i64;
        let length = if word.last_digit() == 1 {
            GoldenScalar::pow_beta(-n - 1)
        } else {
            GoldenScalar::pow_beta(-n)
        };
        debug_assert!(left.sign() >= 0);
        debug_assert!((&left + &length - GoldenScalar::one()).sign() <= 0);
        IntervalNJ { word, left, length }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn left(&self) -> &GoldenScalar {
        &self.left
    }

    pub fn length(&self) -> &GoldenScalar {
        &self.length
    }

    pub fn right(&self) -> GoldenScalar {
        &self.left + &self.length
    }

    /// Exponent e with length = beta^-e (n for final digit 0, n + 1 for 1).
    pub fn length_exponent(&self) -> usize {
        self.word.len() + usize::from(self.word.last_digit() == 1)
    }

    /// Left-closed membership test.
    pub fn contains(&self, x: &GoldenScalar) -> bool {
        (x - &self.left).sign() >= 0 && (x - &self.right()).sign() < 0
    }
}

/// The base-beta fraction sum j_k * beta^-k of a word, term by term.
pub fn left_endpoint(word: &Word) -> GoldenScalar {
    let beta_inv = GoldenScalar::beta_inv();
    let mut power = GoldenScalar::one();
    let mut sum = GoldenScalar::zero();
    for &d in word.digits() {
        power = &power * &beta_inv;
        if d == 1 {
            sum = &sum + &power;
        }
    }
    sum
}

/// All level-n intervals in increasing endpoint order.
pub fn build_partition(n: usize) -> Result<Vec<IntervalNJ>> {
    build_partition_with_cap(n, words::DEFAULT_ENUM_CAP)
}

pub fn build_partition_with_cap(n: usize, cap: usize) -> Result<Vec<IntervalNJ>> {
    Ok(words::enumerate_with_cap(n, cap)?
        .into_iter()
        .map(IntervalNJ::for_word)
        .collect())
}

/// The unique word whose interval contains x, by binary search on ranks.
///
/// Works for any n the count arithmetic supports; nothing is materialized.
pub fn locate(x: &GoldenScalar, n: usize) -> Result<Word> {
    assert!(n >= 1);
    if x.sign() < 0 || (x - GoldenScalar::one()).sign() >= 0 {
        return Err(Error::OutOfDomain {
            value: x.to_string(),
            domain: "[0, 1)",
        });
    }
    let size = words::counts(n).total;
    let mut lo = 0u128;
    let mut hi = size - 1;
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        let w = words::unrank(n, mid)?;
        if (x - &left_endpoint(&w)).sign() >= 0 {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    words::unrank(n, lo)
}

/// Exact check of the endpoint identities behind the partition structure.
#[derive(Clone, Debug)]
pub struct EndpointIdentityReport {
    pub n: usize,
    /// Number of successor pairs checked, plus one for the maximal word.
    pub checked: usize,
    /// Words at which an identity failed; empty on a pass.
    pub violations: Vec<Word>,
}

impl EndpointIdentityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Walks the length-n words in order and verifies, with exact arithmetic:
/// the successor endpoint identity
/// `L(J') = L(J) + j_n beta^-(n+1) + (1 - j_n) beta^-n < 1`
/// for every non-maximal J, and that the maximal word's interval closes the
/// unit interval exactly.
pub fn verify_endpoint_identities(n: usize) -> Result<EndpointIdentityReport> {
    verify_endpoint_identities_with_cap(n, words::DEFAULT_ENUM_CAP)
}

pub fn verify_endpoint_identities_with_cap(n: usize, cap: usize) -> Result<EndpointIdentityReport> {
    if n == 0 || n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    let one = GoldenScalar::one();
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut word = Word::zeros(n);
    loop {
        let step = if word.last_digit() == 1 {
            GoldenScalar::pow_beta(-(n as i64) - 1)
        } else {
            GoldenScalar::pow_beta(-(n as i64))
        };
        let predicted = left_endpoint(&word) + step;
        checked += 1;
        match word.successor() {
            Some(next) => {
                if predicted != left_endpoint(&next) || (&predicted - &one).sign() >= 0 {
                    violations.push(word.clone());
                }
                word = next;
            }
            None => {
                // The maximal word: its right endpoint must be exactly 1.
                if word != words::max_word(n) || predicted != one {
                    violations.push(word);
                }
                break;
            }
        }
    }
    Ok(EndpointIdentityReport {
        n,
        checked,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn endpoints_from_digit_sums() {
        assert_eq!(left_endpoint(&w("000")), GoldenScalar::zero());
        // beta^-1 + beta^-3 = 3*beta - 4
        assert_eq!(left_endpoint(&w("101")), GoldenScalar::from_ints(-4, 3));
        assert!((left_endpoint(&w("101")).to_f64() - 0.8541).abs() < 1e-4);
        // Maximal word of even length: L = 1 - beta^-n.
        let l = left_endpoint(&w("10"));
        assert_eq!(l, GoldenScalar::from_ints(-1, 1));
        assert_eq!(l + GoldenScalar::pow_beta(-2), GoldenScalar::one());
    }

    #[test]
    fn level_one_partition() {
        let parts = build_partition(1).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].left(), &GoldenScalar::zero());
        assert_eq!(parts[0].right(), GoldenScalar::beta_inv());
        assert_eq!(parts[1].left(), &GoldenScalar::beta_inv());
        assert_eq!(parts[1].right(), GoldenScalar::one());
    }

    #[test]
    fn level_three_lengths_tile_the_interval() {
        let parts = build_partition(3).unwrap();
        let exponents: Vec<usize> = parts.iter().map(IntervalNJ::length_exponent).collect();
        assert_eq!(exponents, [3, 4, 3, 3, 4]);
        let total = parts
            .iter()
            .fold(GoldenScalar::zero(), |acc, p| acc + p.length());
        assert_eq!(total, GoldenScalar::one());
    }

    #[test]
    fn partitions_abut_exactly() {
        for n in 1..=10 {
            let parts = build_partition(n).unwrap();
            for pair in parts.windows(2) {
                assert_eq!(&pair[0].right(), pair[1].left(), "n = {n}");
            }
            assert_eq!(parts.last().unwrap().right(), GoldenScalar::one());
            let total = parts
                .iter()
                .fold(GoldenScalar::zero(), |acc, p| acc + p.length());
            assert_eq!(total, GoldenScalar::one());
        }
    }

    #[test]
    fn refinement_by_one_digit() {
        for n in 1..=8usize {
            for part in build_partition(n).unwrap() {
                let mut digits = part.word().digits().to_vec();
                digits.push(0);
                let child0 = IntervalNJ::for_word(Word::new(digits.clone()).unwrap());
                assert_eq!(child0.left(), part.left());
                if part.word().last_digit() == 1 {
                    // Only the 0 extension exists and it covers the parent.
                    assert_eq!(child0.right(), part.right());
                } else {
                    *digits.last_mut().unwrap() = 1;
                    let child1 = IntervalNJ::for_word(Word::new(digits).unwrap());
                    assert_eq!(child0.right(), *child1.left());
                    assert_eq!(child1.right(), part.right());
                }
            }
        }
    }

    #[test]
    fn short_intervals_are_the_words_ending_in_one() {
        for n in 1..=12 {
            let parts = build_partition(n).unwrap();
            let short = parts
                .iter()
                .filter(|p| p.length_exponent() == n + 1)
                .count();
            assert_eq!(short as u128, crate::words::counts(n).n1);
        }
    }

    #[test]
    fn locate_finds_the_owning_word() {
        assert_eq!(locate(&GoldenScalar::zero(), 5).unwrap(), w("00000"));
        assert_eq!(locate(&GoldenScalar::beta_inv(), 1).unwrap(), w("1"));
        assert_eq!(
            locate(&GoldenScalar::from_ratio(1, 2), 3).unwrap(),
            w("010")
        );
        assert!(locate(&GoldenScalar::one(), 3).is_err());
        assert!(locate(&GoldenScalar::from_ints(-1, 0), 3).is_err());
    }

    #[test]
    fn locate_agrees_with_membership() {
        for n in 1..=9 {
            for part in build_partition(n).unwrap() {
                assert_eq!(&locate(part.left(), n).unwrap(), part.word());
                let mid = part.left() + part.length() * GoldenScalar::from_ratio(1, 2);
                assert_eq!(&locate(&mid, n).unwrap(), part.word());
            }
        }
    }

    #[test]
    fn endpoint_identities_hold() {
        for n in [1, 2, 5, 10] {
            let report = verify_endpoint_identities(n).unwrap();
            assert!(report.passed(), "n = {n}: {:?}", report.violations);
        }
        let report = verify_endpoint_identities(15).unwrap();
        assert!(report.passed());
        assert_eq!(report.checked as u128, crate::words::fibonacci(17));
    }
}
