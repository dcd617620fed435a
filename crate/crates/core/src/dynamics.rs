//! The base-beta transformation x -> beta*x mod 1 and its digit streams.
//!
//! The exact path keeps every iterate inside Q(beta); the floor decision is a
//! single exact comparison of beta*x against 1, since beta*x < 2 on [0, 1).
//! The float path exists for Monte Carlo work only and polices itself: the
//! error of one step grows by a factor beta, and a produced pair of adjacent
//! ones is reported as precision exhaustion.

use crate::error::{Error, Result};
use crate::scalar::GoldenScalar;
use crate::words::Word;

/// Bit-size guard for exact iteration (numerators and denominators combined).
pub const DEFAULT_BIT_GUARD: u64 = 1_000_000;

/// Deepest digit the float fast path will extract by default.
pub const FLOAT_DEPTH_CAP: usize = 30;

fn check_unit_interval(x: &GoldenScalar) -> Result<()> {
    if x.sign() < 0 || (x - GoldenScalar::one()).sign() >= 0 {
        return Err(Error::OutOfDomain {
            value: x.to_string(),
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// One exact step: returns (digit, beta*x - digit).
fn step(x: &GoldenScalar) -> (u8, GoldenScalar) {
    let scaled = GoldenScalar::beta() * x;
    if (&scaled - GoldenScalar::one()).sign() >= 0 {
        (1, scaled - GoldenScalar::one())
    } else {
        (0, scaled)
    }
}

/// beta*x mod 1, exactly.
pub fn t_beta(x: &GoldenScalar) -> Result<GoldenScalar> {
    check_unit_interval(x)?;
    Ok(step(x).1)
}

/// Lazily extended exact digit stream of a point of [0, 1).
///
/// Iteration never ends (a terminating expansion continues with zeros); the
/// current remainder after the digits produced so far is always available.
#[derive(Clone, Debug)]
pub struct DigitStream {
    source: GoldenScalar,
    remainder: GoldenScalar,
    guard_bits: u64,
    last_digit: u8,
    depth: usize,
}

impl DigitStream {
    pub fn new(x: &GoldenScalar) -> Result<Self> {
        Self::with_guard(x, DEFAULT_BIT_GUARD)
    }

    pub fn with_guard(x: &GoldenScalar, guard_bits: u64) -> Result<Self> {
        check_unit_interval(x)?;
        Ok(DigitStream {
            source: x.clone(),
            remainder: x.clone(),
            guard_bits,
            last_digit: 0,
            depth: 0,
        })
    }

    /// The point the stream expands.
    pub fn source(&self) -> &GoldenScalar {
        &self.source
    }

    /// The scaled remainder after the digits consumed so far.
    pub fn remainder(&self) -> &GoldenScalar {
        &self.remainder
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

impl Iterator for DigitStream {
    type Item = Result<u8>;

    fn next(&mut self) -> Option<Result<u8>> {
        let bits = self.remainder.bit_size();
        if bits > self.guard_bits {
            return Some(Err(Error::BitSizeGuard {
                bits,
                guard: self.guard_bits,
            }));
        }
        let (digit, rest) = step(&self.remainder);
        debug_assert!(
            !(digit == 1 && self.last_digit == 1),
            "greedy expansion produced adjacent ones"
        );
        self.remainder = rest;
        self.last_digit = digit;
        self.depth += 1;
        Some(Ok(digit))
    }
}

/// The first n digits of the greedy expansion of x.
pub fn digits(x: &GoldenScalar, n: usize) -> Result<Word> {
    digits_with_guard(x, n, DEFAULT_BIT_GUARD)
}

pub fn digits_with_guard(x: &GoldenScalar, n: usize, guard_bits: u64) -> Result<Word> {
    assert!(n >= 1);
    let stream = DigitStream::with_guard(x, guard_bits)?;
    let collected: Result<Vec<u8>> = stream.take(n).collect();
    Word::new(collected?)
}

/// The n-th exact iterate of the transformation.
pub fn iterate(x: &GoldenScalar, n: usize) -> Result<GoldenScalar> {
    iterate_with_guard(x, n, DEFAULT_BIT_GUARD)
}

pub fn iterate_with_guard(x: &GoldenScalar, n: usize, guard_bits: u64) -> Result<GoldenScalar> {
    let mut stream = DigitStream::with_guard(x, guard_bits)?;
    for _ in 0..n {
        stream.next().transpose()?;
    }
    Ok(stream.remainder().clone())
}

/// The exact value of a finite digit word: sum of j_k * beta^-k.
///
/// Evaluated by Horner's rule from the last digit, a deliberately different
/// route from the per-term endpoint sum in the partition module.
pub fn decode(word: &Word) -> GoldenScalar {
    let beta_inv = GoldenScalar::beta_inv();
    let mut acc = GoldenScalar::zero();
    for &d in word.digits().iter().rev() {
        if d == 1 {
            acc = acc + GoldenScalar::one();
        }
        acc = acc * &beta_inv;
    }
    acc
}

/// Float counterpart of [`t_beta`]. Error grows by about a factor beta per
/// application.
pub fn t_beta_float(x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::OutOfDomain {
            value: x.to_string(),
            domain: "[0, 1)",
        });
    }
    let scaled = x * BETA_F64;
    Ok(if scaled >= 1.0 { scaled - 1.0 } else { scaled })
}

pub const BETA_F64: f64 = 1.618_033_988_749_895;

/// Float digit extraction, capped at [`FLOAT_DEPTH_CAP`] digits.
pub fn digits_float(x: f64, n: usize) -> Result<Word> {
    digits_float_capped(x, n, FLOAT_DEPTH_CAP)
}

pub fn digits_float_capped(x: f64, n: usize, cap: usize) -> Result<Word> {
    assert!(n >= 1);
    if n > cap {
        return Err(Error::PrecisionExhausted { depth: n });
    }
    let mut rest = x;
    let mut out = Vec::with_capacity(n);
    let mut last = 0u8;
    for depth in 0..n {
        if !(0.0..1.0).contains(&rest) {
            return Err(Error::OutOfDomain {
                value: rest.to_string(),
                domain: "[0, 1)",
            });
        }
        let scaled = rest * BETA_F64;
        let digit = u8::from(scaled >= 1.0);
        if digit == 1 && last == 1 {
            // Roundoff pushed the orbit outside the admissible language.
            return Err(Error::PrecisionExhausted { depth });
        }
        rest = scaled - f64::from(digit);
        out.push(digit);
        last = digit;
    }
    Word::new(out)
}

/// Float orbit endpoint with the same admissibility policing as
/// [`digits_float`]; used by the Monte Carlo driver.
pub fn iterate_float_checked(x: f64, n: usize) -> Result<f64> {
    if n == 0 {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::OutOfDomain {
                value: x.to_string(),
                domain: "[0, 1)",
            });
        }
        return Ok(x);
    }
    let mut rest = x;
    let mut last = 0u8;
    for depth in 0..n {
        if !(0.0..1.0).contains(&rest) {
            return Err(Error::OutOfDomain {
                value: rest.to_string(),
                domain: "[0, 1)",
            });
        }
        let scaled = rest * BETA_F64;
        let digit = u8::from(scaled >= 1.0);
        if digit == 1 && last == 1 {
            return Err(Error::PrecisionExhausted { depth });
        }
        rest = scaled - f64::from(digit);
        last = digit;
    }
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half() -> GoldenScalar {
        GoldenScalar::from_ratio(1, 2)
    }

    #[test]
    fn map_values() {
        assert_eq!(t_beta(&GoldenScalar::zero()).unwrap(), GoldenScalar::zero());
        // beta/2 < 1, so 1/2 keeps digit 0.
        let expected = GoldenScalar::new(
            num_rational::BigRational::from_integer(0.into()),
            num_rational::BigRational::new(1.into(), 2.into()),
        );
        assert_eq!(t_beta(&half()).unwrap(), expected);
        assert_eq!(
            t_beta(&GoldenScalar::beta_inv()).unwrap(),
            GoldenScalar::zero()
        );
        assert!(t_beta(&GoldenScalar::one()).is_err());
    }

    #[test]
    fn digits_of_one_half_have_period_three() {
        assert_eq!(digits(&half(), 6).unwrap().to_string(), "010010");
        assert_eq!(
            digits(&GoldenScalar::zero(), 9).unwrap().to_string(),
            "000000000"
        );
        // beta^-1 + beta^-4 terminates after four digits.
        let x = GoldenScalar::beta_inv() + GoldenScalar::pow_beta(-4);
        assert_eq!(digits(&x, 4).unwrap().to_string(), "1001");
        assert_eq!(iterate(&x, 4).unwrap(), GoldenScalar::zero());
    }

    #[test]
    fn orbit_of_one_half_is_periodic() {
        assert_eq!(iterate(&half(), 3).unwrap(), half());
        let x = GoldenScalar::from_ratio(3, 7);
        assert_eq!(iterate(&x, 0).unwrap(), x);
        assert_eq!(
            iterate(&GoldenScalar::beta_inv(), 1).unwrap(),
            GoldenScalar::zero()
        );
    }

    #[test]
    fn decode_inverts_short_words() {
        assert_eq!(decode(&"010".parse().unwrap()), GoldenScalar::pow_beta(-2));
        assert_eq!(
            decode(&"101".parse().unwrap()),
            GoldenScalar::from_ints(-4, 3)
        );
        assert_eq!(decode(&"00000".parse().unwrap()), GoldenScalar::zero());
    }

    #[test]
    fn decode_matches_left_endpoint() {
        for n in 1..=10 {
            for word in crate::words::enumerate(n).unwrap() {
                assert_eq!(decode(&word), partition::left_endpoint(&word));
            }
        }
    }

    #[test]
    fn telescoping_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let den = (rng.next_u64() % 9999 + 1) as i64;
            let num = (rng.next_u64() % den as u64) as i64;
            let x = GoldenScalar::from_ratio(num, den);
            for n in [1, 5, 13] {
                let w = digits(&x, n).unwrap();
                let rebuilt =
                    decode(&w) + GoldenScalar::pow_beta(-(n as i64)) * iterate(&x, n).unwrap();
                assert_eq!(rebuilt, x, "x = {num}/{den}, n = {n}");
            }
        }
    }

    #[test]
    fn digit_prefixes_are_stable() {
        let x = GoldenScalar::from_ratio(13, 29);
        let long = digits(&x, 20).unwrap();
        for n in 1..20 {
            let short = digits(&x, n).unwrap();
            assert_eq!(short.digits(), &long.digits()[..n]);
        }
    }

    #[test]
    fn digits_agree_with_locate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let den = (rng.next_u64() % 500 + 1) as i64;
            let num = (rng.next_u64() % den as u64) as i64;
            let x = GoldenScalar::from_ratio(num, den);
            for n in [1, 4, 9] {
                assert_eq!(digits(&x, n).unwrap(), partition::locate(&x, n).unwrap());
            }
        }
    }

    #[test]
    fn float_path_matches_exact_path_on_dyadics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let k = (rng.next_u64() % (1 << 20)) as i64;
            let x = GoldenScalar::from_ratio(k, 1 << 20);
            let xf = k as f64 / (1 << 20) as f64;
            let exact = digits(&x, 25).unwrap();
            let float = digits_float(xf, 25).unwrap();
            assert_eq!(exact, float, "x = {k}/2^20");
        }
    }

    #[test]
    fn float_depth_cap() {
        assert!(matches!(
            digits_float(0.9999999, 35),
            Err(Error::PrecisionExhausted { .. })
        ));
        assert!(digits_float(0.5, 30).is_ok());
    }

    #[test]
    fn bit_guard_trips() {
        let x = GoldenScalar::from_ratio(355, 1130);
        assert!(matches!(
            digits_with_guard(&x, 40, 16),
            Err(Error::BitSizeGuard { .. })
        ));
    }
}
