//! Exact arithmetic in the quadratic field Q(beta), beta = (1 + sqrt(5))/2.
//!
//! Every value is stored as `p + q*beta` with arbitrary-precision rational
//! coefficients. The defining relation beta^2 = beta + 1 closes the field
//! under multiplication, and beta^-1 = beta - 1 closes it under inversion, so
//! every power beta^k with k in Z is exactly representable. Sign decisions are
//! made purely with integer comparisons; floats appear only in reporting.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element `p + q*beta` of Q(beta).
///
/// The representation is unique (beta is irrational), so equality is
/// componentwise. Serialized form is a pair of `"numer/denom"` strings.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "(String, String)", try_from = "(String, String)")]
pub struct GoldenScalar {
    p: BigRational,
    q: BigRational,
}

impl GoldenScalar {
    pub fn new(p: BigRational, q: BigRational) -> Self {
        GoldenScalar { p, q }
    }

    /// `p + q*beta` from machine integers.
    pub fn from_ints(p: i64, q: i64) -> Self {
        GoldenScalar {
            p: BigRational::from_integer(p.into()),
            q: BigRational::from_integer(q.into()),
        }
    }

    /// The rational `num/den` as a field element. Panics if `den == 0`.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        GoldenScalar {
            p: BigRational::new(num.into(), den.into()),
            q: BigRational::zero(),
        }
    }

    pub fn from_rational(r: BigRational) -> Self {
        GoldenScalar {
            p: r,
            q: BigRational::zero(),
        }
    }

    pub fn zero() -> Self {
        Self::from_ints(0, 0)
    }

    pub fn one() -> Self {
        Self::from_ints(1, 0)
    }

    /// beta itself: (0, 1).
    pub fn beta() -> Self {
        Self::from_ints(0, 1)
    }

    /// beta^-1 = beta - 1: (-1, 1).
    pub fn beta_inv() -> Self {
        Self::from_ints(-1, 1)
    }

    /// sqrt(5) = 2*beta - 1: (-1, 2).
    pub fn sqrt5() -> Self {
        Self::from_ints(-1, 2)
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.p
    }

    pub fn beta_part(&self) -> &BigRational {
        &self.q
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    /// True when the value lies in Q (no beta component).
    pub fn is_rational(&self) -> bool {
        self.q.is_zero()
    }

    /// Exact sign of `p + q*beta` in {-1, 0, +1}.
    ///
    /// Writes the value as (A + B*sqrt(5))/2 with A = 2p + q, B = q and
    /// resolves the mixed-sign case by comparing A^2 against 5*B^2.
    pub fn sign(&self) -> i32 {
        let a = &self.p + &self.p + &self.q;
        let b = &self.q;
        let (sa, sb) = (rational_sign(&a), rational_sign(b));
        match (sa, sb) {
            (0, 0) => 0,
            (_, 0) => sa,
            (0, _) => sb,
            (1, 1) => 1,
            (-1, -1) => -1,
            _ => {
                // Opposite signs: the larger of |A| and |B|*sqrt(5) wins.
                let lhs = &a * &a;
                let rhs = b * b * BigRational::from_integer(5.into());
                match lhs.cmp(&rhs) {
                    Ordering::Greater => sa,
                    Ordering::Less => sb,
                    Ordering::Equal => 0,
                }
            }
        }
    }

    pub fn abs(&self) -> Self {
        if self.sign() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Field inverse via the conjugate (p + q) - q*beta over the rational
    /// norm p^2 + pq - q^2.
    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let norm = &self.p * &self.p + &self.p * &self.q - &self.q * &self.q;
        debug_assert!(!norm.is_zero(), "nonzero element with zero norm");
        Ok(GoldenScalar {
            p: (&self.p + &self.q) / &norm,
            q: -&self.q / norm,
        })
    }

    /// Exact beta^k for any integer k.
    pub fn pow_beta(k: i64) -> Self {
        let mut base = if k >= 0 {
            Self::beta()
        } else {
            Self::beta_inv()
        };
        let mut exp = k.unsigned_abs();
        let mut acc = Self::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            exp >>= 1;
        }
        acc
    }

    /// A rational approximation within 2^-bits of the exact value.
    ///
    /// sqrt(5) is approximated by an integer square root at a working
    /// precision padded with the magnitude of q, so the stated bound holds
    /// unconditionally.
    pub fn approx_rational(&self, bits: u32) -> BigRational {
        if self.q.is_zero() {
            return self.p.clone();
        }
        let q_mag = (self.q.numer().bits() + 2).saturating_sub(self.q.denom().bits());
        let m = bits as u64 + q_mag + 2;
        let root = (BigInt::from(5) << (2 * m)).sqrt();
        let sqrt5 = BigRational::new(root, BigInt::one() << m);
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        &self.p + &self.q * (BigRational::one() + sqrt5) * half
    }

    /// Float approximation for reporting. Never used for decisions.
    pub fn to_f64(&self) -> f64 {
        big_ratio_to_f64(&self.approx_rational(96))
    }

    /// Total bit size of the four stored integers; drives the growth guard in
    /// the dynamics module.
    pub fn bit_size(&self) -> u64 {
        self.p.numer().bits()
            + self.p.denom().bits()
            + self.q.numer().bits()
            + self.q.denom().bits()
    }

    fn to_pair_strings(&self) -> (String, String) {
        (
            format!("{}/{}", self.p.numer(), self.p.denom()),
            format!("{}/{}", self.q.numer(), self.q.denom()),
        )
    }

    /// Parses a plain rational like `"3/5"` or `"-2"` into a field element.
    pub fn parse_rational(s: &str) -> Result<Self> {
        let r = BigRational::from_str(s.trim())
            .map_err(|e| Error::Parse(format!("bad rational {s:?}: {e}")))?;
        Ok(Self::from_rational(r))
    }
}

fn rational_sign(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

/// Conversion that stays accurate for ratios whose parts overflow f64.
pub(crate) fn big_ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let negative = r.is_negative();
    let a = r.numer().abs();
    let b = r.denom().clone();
    let k = a.bits() as i64 - b.bits() as i64;
    let shift = 55 - k;
    let quotient = if shift >= 0 {
        (a << shift as u64) / b
    } else {
        a / (b << (-shift) as u64)
    };
    let magnitude = quotient.to_f64().unwrap_or(f64::INFINITY) * exp2(-shift);
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

fn exp2(e: i64) -> f64 {
    if (-1074..=1023).contains(&e) {
        f64::from_bits(if e >= -1022 {
            ((e + 1023) as u64) << 52
        } else {
            1u64 << (e + 1074) as u64
        })
    } else if e < 0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl fmt::Display for GoldenScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q.is_zero() {
            return write!(f, "{}", self.p);
        }
        if self.p.is_zero() {
            return write!(f, "{}b", self.q);
        }
        if self.q.is_negative() {
            write!(f, "{} - {}b", self.p, -&self.q)
        } else {
            write!(f, "{} + {}b", self.p, self.q)
        }
    }
}

// Debug delegates to Display; the derived form buries the value in Ratio
// internals.
impl fmt::Debug for GoldenScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl From<GoldenScalar> for (String, String) {
    fn from(g: GoldenScalar) -> Self {
        g.to_pair_strings()
    }
}

impl TryFrom<(String, String)> for GoldenScalar {
    type Error = String;

    fn try_from(v: (String, String)) -> std::result::Result<Self, String> {
        let p = BigRational::from_str(&v.0).map_err(|e| format!("bad p {:?}: {e}", v.0))?;
        let q = BigRational::from_str(&v.1).map_err(|e| format!("bad q {:?}: {e}", v.1))?;
        Ok(GoldenScalar::new(p, q))
    }
}

impl PartialOrd for GoldenScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GoldenScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self - other).sign() {
            1 => Ordering::Greater,
            -1 => Ordering::Less,
            _ => Ordering::Equal,
        }
    }
}

impl Neg for &GoldenScalar {
    type Output = GoldenScalar;
    fn neg(self) -> GoldenScalar {
        GoldenScalar {
            p: -&self.p,
            q: -&self.q,
        }
    }
}

impl Neg for GoldenScalar {
    type Output = GoldenScalar;
    fn neg(self) -> GoldenScalar {
        -&self
    }
}

impl Add for &GoldenScalar {
    type Output = GoldenScalar;
    fn add(self, rhs: Self) -> GoldenScalar {
        GoldenScalar {
            p: &self.p + &rhs.p,
            q: &self.q + &rhs.q,
        }
    }
}

impl Sub for &GoldenScalar {
    type Output = GoldenScalar;
    fn sub(self, rhs: Self) -> GoldenScalar {
        GoldenScalar {
            p: &self.p - &rhs.p,
            q: &self.q - &rhs.q,
        }
    }
}

impl Mul for &GoldenScalar {
    type Output = GoldenScalar;
    fn mul(self, rhs: Self) -> GoldenScalar {
        // (p1 + q1 b)(p2 + q2 b) with b^2 = b + 1.
        GoldenScalar {
            p: &self.p * &rhs.p + &self.q * &rhs.q,
            q: &self.p * &rhs.q + &self.q * &rhs.p + &self.q * &rhs.q,
        }
    }
}

impl Div for &GoldenScalar {
    type Output = GoldenScalar;
    #[allow(clippy::suspicious_arithmetic_impl)] // division is mul by inverse
    fn div(self, rhs: Self) -> GoldenScalar {
        self * &rhs.inverse().expect("division by zero in Q(beta)")
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for GoldenScalar {
            type Output = GoldenScalar;
            fn $method(self, rhs: GoldenScalar) -> GoldenScalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&GoldenScalar> for GoldenScalar {
            type Output = GoldenScalar;
            fn $method(self, rhs: &GoldenScalar) -> GoldenScalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<GoldenScalar> for &GoldenScalar {
            type Output = GoldenScalar;
            fn $method(self, rhs: GoldenScalar) -> GoldenScalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);
