//! Exact piecewise-polynomial density calculus on [0, 1).
//!
//! Densities and CDFs are piecewise polynomials with breakpoints and
//! coefficients in Q(beta). The module provides the invariant two-plateau
//! density, the n-step pushforward of a density under the base-beta map (as a
//! direct sum over length-n words and, separately, as an iterated one-step
//! transfer operator), CDF evaluation through the word sum, and L1 / total
//! variation distances.
//!
//! Distances are exact whenever the per-piece differences have degree at most
//! one, and more generally whenever no piece changes sign strictly inside its
//! interval. Where a sign change must be located for a piece of degree two or
//! three, the root is isolated by exact-sign bisection and the result is a
//! certified enclosure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition;
use crate::scalar::GoldenScalar;
use crate::words;

/// Highest polynomial degree accepted for density pieces.
pub const DEFAULT_MAX_DEGREE: usize = 3;

/// Largest n the direct word-sum pushforward will materialize.
pub const DIRECT_PUSHFORWARD_CAP: usize = 20;

/// Denominator exponent of the default root-isolation tolerance 10^-30.
const ROOT_TOLERANCE_EXP: u32 = 30;

// ---------------------------------------------------------------------------
// Polynomial helpers. Coefficients are in ascending degree; the empty vector
// is the zero polynomial. All polynomials live in the global x coordinate.
// ---------------------------------------------------------------------------

fn poly_trim(mut c: Vec<GoldenScalar>) -> Vec<GoldenScalar> {
    while c.last().is_some_and(GoldenScalar::is_zero) {
        c.pop();
    }
    c
}

fn poly_add_into(into: &mut Vec<GoldenScalar>, rhs: &[GoldenScalar]) {
    if into.len() < rhs.len() {
        into.resize(rhs.len(), GoldenScalar::zero());
    }
    for (a, b) in into.iter_mut().zip(rhs) {
        *a = &*a + b;
    }
}

fn poly_sub(a: &[GoldenScalar], b: &[GoldenScalar]) -> Vec<GoldenScalar> {
    let mut out = a.to_vec();
    if out.len() < b.len() {
        out.resize(b.len(), GoldenScalar::zero());
    }
    for (x, y) in out.iter_mut().zip(b) {
        *x = &*x - y;
    }
    poly_trim(out)
}

fn poly_neg(c: &[GoldenScalar]) -> Vec<GoldenScalar> {
    c.iter().map(|x| -x).collect()
}

fn poly_scale(c: &[GoldenScalar], s: &GoldenScalar) -> Vec<GoldenScalar> {
    c.iter().map(|x| x * s).collect()
}

fn poly_eval(c: &[GoldenScalar], x: &GoldenScalar) -> GoldenScalar {
    let mut acc = GoldenScalar::zero();
    for coeff in c.iter().rev() {
        acc = acc * x + coeff;
    }
    acc
}

/// c(shift + slope * x), expanded back to coefficients in x.
fn poly_compose_affine(
    c: &[GoldenScalar],
    shift: &GoldenScalar,
    slope: &GoldenScalar,
) -> Vec<GoldenScalar> {
    let mut out: Vec<GoldenScalar> = Vec::with_capacity(c.len());
    let mut power = vec![GoldenScalar::one()];
    for coeff in c {
        poly_add_into(&mut out, &poly_scale(&power, coeff));
        let mut next = vec![GoldenScalar::zero(); power.len() + 1];
        for (j, p) in power.iter().enumerate() {
            next[j] = &next[j] + &(p * shift);
            next[j + 1] = &next[j + 1] + &(p * slope);
        }
        power = next;
    }
    poly_trim(out)
}

fn poly_antiderivative(c: &[GoldenScalar]) -> Vec<GoldenScalar> {
    let mut out = Vec::with_capacity(c.len() + 1);
    out.push(GoldenScalar::zero());
    for (i, coeff) in c.iter().enumerate() {
        let divisor = GoldenScalar::from_ints(i as i64 + 1, 0).inverse().unwrap();
        out.push(coeff * divisor);
    }
    poly_trim(out)
}

fn poly_derivative(c: &[GoldenScalar]) -> Vec<GoldenScalar> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, coeff)| coeff * GoldenScalar::from_ints(i as i64, 0))
        .collect()
}

/// Remainder of num / den in Q(beta)[x]; used to evaluate a polynomial at a
/// root of `den` without leaving the field.
fn poly_rem(num: &[GoldenScalar], den: &[GoldenScalar]) -> Vec<GoldenScalar> {
    let den = poly_trim(den.to_vec());
    let mut rem = poly_trim(num.to_vec());
    let lead_inv = den.last().expect("nonzero divisor").inverse().unwrap();
    while rem.len() >= den.len() && !den.is_empty() {
        let factor = rem.last().unwrap() * &lead_inv;
        let offset = rem.len() - den.len();
        for (i, d) in den.iter().enumerate() {
            let updated = &rem[offset + i] - &(d * &factor);
            rem[offset + i] = updated;
        }
        rem = poly_trim(rem);
        if rem.len() <= offset {
            break;
        }
    }
    rem
}

/// Sign of u + v * sqrt(d) for d > 0, by the same squared-comparison case
/// analysis the scalar type uses for sqrt(5).
fn surd_sign(u: &GoldenScalar, v: &GoldenScalar, d: &GoldenScalar) -> i32 {
    let (su, sv) = (u.sign(), v.sign());
    if sv == 0 {
        return su;
    }
    if su == 0 {
        return sv;
    }
    if su == sv {
        return su;
    }
    let cmp = (u * u - v * v * d).sign();
    if cmp == 0 {
        0
    } else if cmp > 0 {
        su
    } else {
        sv
    }
}

// ---------------------------------------------------------------------------
// PiecewisePoly
// ---------------------------------------------------------------------------

/// A piecewise polynomial on [0, 1) with exact breakpoints and coefficients.
///
/// Pieces are left-closed. The stored form is canonical: pieces are trimmed
/// and adjacent pieces with identical coefficients are merged, so equality of
/// values coincides with structural equality.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RawPiecewise", try_from = "RawPiecewise")]
pub struct PiecewisePoly {
    breakpoints: Vec<GoldenScalar>,
    pieces: Vec<Vec<GoldenScalar>>,
}

/// Serialized mirror of [`PiecewisePoly`]; deserialization revalidates.
#[derive(Serialize, Deserialize)]
struct RawPiecewise {
    breakpoints: Vec<GoldenScalar>,
    pieces: Vec<Vec<GoldenScalar>>,
}

impl From<PiecewisePoly> for RawPiecewise {
    fn from(p: PiecewisePoly) -> Self {
        RawPiecewise {
            breakpoints: p.breakpoints,
            pieces: p.pieces,
        }
    }
}

impl TryFrom<RawPiecewise> for PiecewisePoly {
    type Error = String;

    fn try_from(raw: RawPiecewise) -> std::result::Result<Self, String> {
        PiecewisePoly::new(raw.breakpoints, raw.pieces).map_err(|e| e.to_string())
    }
}

impl PiecewisePoly {
    /// Validates breakpoint structure and the degree cap, then canonicalizes.
    pub fn new(breakpoints: Vec<GoldenScalar>, pieces: Vec<Vec<GoldenScalar>>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidPiecewise(
                "need at least two breakpoints".into(),
            ));
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidPiecewise(format!(
                "{} breakpoints require {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        if !breakpoints[0].is_zero() {
            return Err(Error::InvalidPiecewise("first breakpoint must be 0".into()));
        }
        if breakpoints.last().unwrap() != &GoldenScalar::one() {
            return Err(Error::InvalidPiecewise("last breakpoint must be 1".into()));
        }
        for pair in breakpoints.windows(2) {
            if (&pair[1] - &pair[0]).sign() <= 0 {
                return Err(Error::InvalidPiecewise(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        let pieces: Vec<_> = pieces.into_iter().map(poly_trim).collect();
        for piece in &pieces {
            if piece.len() > DEFAULT_MAX_DEGREE + 1 {
                return Err(Error::DegreeTooHigh {
                    degree: piece.len() - 1,
                    max: DEFAULT_MAX_DEGREE,
                });
            }
        }
        Ok(Self::from_parts_canonical(breakpoints, pieces))
    }

    /// Canonicalizing constructor for internally produced data; skips the
    /// user-input validation but keeps the merge step.
    fn from_parts_canonical(
        breakpoints: Vec<GoldenScalar>,
        pieces: Vec<Vec<GoldenScalar>>,
    ) -> Self {
        debug_assert_eq!(breakpoints.len(), pieces.len() + 1);
        let mut out_bps = vec![breakpoints[0].clone()];
        let mut out_pieces: Vec<Vec<GoldenScalar>> = Vec::new();
        for (bp, piece) in breakpoints[1..].iter().zip(pieces) {
            if out_pieces.last() == Some(&piece) {
                *out_bps.last_mut().unwrap() = bp.clone();
            } else {
                out_pieces.push(piece);
                out_bps.push(bp.clone());
            }
        }
        PiecewisePoly {
            breakpoints: out_bps,
            pieces: out_pieces,
        }
    }

    /// One polynomial piece covering all of [0, 1).
    pub fn from_single(coeffs: Vec<GoldenScalar>) -> Result<Self> {
        Self::new(
            vec![GoldenScalar::zero(), GoldenScalar::one()],
            vec![coeffs],
        )
    }

    /// The uniform density.
    pub fn uniform() -> Self {
        Self::from_single(vec![GoldenScalar::one()]).unwrap()
    }

    pub fn breakpoints(&self) -> &[GoldenScalar] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<GoldenScalar>] {
        &self.pieces
    }

    pub fn max_degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    fn piece_index(&self, x: &GoldenScalar) -> usize {
        let idx = self.breakpoints.partition_point(|bp| (bp - x).sign() <= 0);
        debug_assert!(idx >= 1);
        (idx - 1).min(self.pieces.len() - 1)
    }

    /// Value at x in [0, 1), left-closed pieces.
    pub fn eval(&self, x: &GoldenScalar) -> Result<GoldenScalar> {
        if x.sign() < 0 || (x - GoldenScalar::one()).sign() >= 0 {
            return Err(Error::OutOfDomain {
                value: x.to_string(),
                domain: "[0, 1)",
            });
        }
        Ok(poly_eval(&self.pieces[self.piece_index(x)], x))
    }

    /// Value at x in [0, 1]; x = 1 evaluates the last piece. CDFs need the
    /// closed right end.
    pub fn eval_closed(&self, x: &GoldenScalar) -> Result<GoldenScalar> {
        if x.sign() < 0 || (x - GoldenScalar::one()).sign() > 0 {
            return Err(Error::OutOfDomain {
                value: x.to_string(),
                domain: "[0, 1]",
            });
        }
        Ok(poly_eval(&self.pieces[self.piece_index(x)], x))
    }

    /// Exact integral over [0, 1).
    pub fn integral(&self) -> GoldenScalar {
        let mut total = GoldenScalar::zero();
        for (i, piece) in self.pieces.iter().enumerate() {
            let anti = poly_antiderivative(piece);
            total = total + poly_eval(&anti, &self.breakpoints[i + 1])
                - poly_eval(&anti, &self.breakpoints[i]);
        }
        total
    }

    /// Exact cumulative distribution function as a piecewise polynomial on
    /// [0, 1], with F(0) = 0.
    pub fn cdf(&self) -> PiecewisePoly {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut mass = GoldenScalar::zero();
        for (i, piece) in self.pieces.iter().enumerate() {
            let anti = poly_antiderivative(piece);
            let at_left = poly_eval(&anti, &self.breakpoints[i]);
            let mut adjusted = anti;
            let constant = &mass - &at_left;
            if adjusted.is_empty() {
                adjusted.push(constant.clone());
            } else {
                adjusted[0] = &adjusted[0] + &constant;
            }
            mass = poly_eval(&adjusted, &self.breakpoints[i + 1]);
            pieces.push(poly_trim(adjusted));
        }
        PiecewisePoly::from_parts_canonical(self.breakpoints.clone(), pieces)
    }

    /// Verifies the density contract: nonnegativity on all of [0, 1) and
    /// exact unit mass.
    ///
    /// Nonnegativity is decided exactly for every degree up to the cap:
    /// endpoints always, the vertex for quadratics, and for cubics the two
    /// critical points, whose positions and values are signed in the
    /// quadratic extension Q(beta)(sqrt(disc)).
    pub fn check_density(&self) -> Result<()> {
        for (i, piece) in self.pieces.iter().enumerate() {
            let lo = &self.breakpoints[i];
            let hi = &self.breakpoints[i + 1];
            if !piece_nonnegative(piece, lo, hi) {
                return Err(Error::NotADensity {
                    reason: format!("negative on piece {i} starting at {lo}"),
                });
            }
        }
        let total = self.integral();
        if total != GoldenScalar::one() {
            return Err(Error::NotADensity {
                reason: format!("total mass {total} differs from 1"),
            });
        }
        Ok(())
    }

    /// Float mirror for plotting and Monte Carlo work.
    pub fn to_float(&self) -> FloatPiecewise {
        FloatPiecewise {
            breakpoints: self.breakpoints.iter().map(GoldenScalar::to_f64).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(GoldenScalar::to_f64).collect())
                .collect(),
        }
    }
}

impl fmt::Debug for PiecewisePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PiecewisePoly[")?;
        for (i, piece) in self.pieces.iter().enumerate() {
            write!(
                f,
                "[{:?}, {:?}): {:?}; ",
                self.breakpoints[i],
                self.breakpoints[i + 1],
                piece
            )?;
        }
        write!(f, "]")
    }
}

/// Exact nonnegativity of one polynomial piece on its closed interval.
fn piece_nonnegative(piece: &[GoldenScalar], lo: &GoldenScalar, hi: &GoldenScalar) -> bool {
    if piece.is_empty() {
        return true;
    }
    if poly_eval(piece, lo).sign() < 0 || poly_eval(piece, hi).sign() < 0 {
        return false;
    }
    match piece.len() {
        0..=2 => true,
        3 => {
            // Quadratic: check the vertex when it lies inside.
            let vertex = -(&piece[1]
                * (GoldenScalar::from_ints(2, 0) * &piece[2])
                    .inverse()
                    .unwrap());
            if (&vertex - lo).sign() > 0 && (&vertex - hi).sign() < 0 {
                poly_eval(piece, &vertex).sign() >= 0
            } else {
                true
            }
        }
        _ => cubic_nonnegative_inside(piece, lo, hi),
    }
}

/// Interior minima of a cubic, evaluated exactly in the quadratic extension
/// generated by the discriminant of its derivative.
fn cubic_nonnegative_inside(piece: &[GoldenScalar], lo: &GoldenScalar, hi: &GoldenScalar) -> bool {
    let deriv = poly_derivative(piece);
    debug_assert_eq!(deriv.len(), 3);
    let (a0, a1, a2) = (&deriv[0], &deriv[1], &deriv[2]);
    let disc = a1 * a1 - GoldenScalar::from_ints(4, 0) * a2 * a0;
    if disc.sign() <= 0 {
        // No distinct real critical points: monotone, endpoints suffice.
        return true;
    }
    let two_a2 = GoldenScalar::from_ints(2, 0) * a2;
    let denom_sign = two_a2.sign();
    // Critical points r = (-a1 +- sqrt(disc)) / (2 a2); the value of the cubic
    // there reduces to a linear remainder mu + lambda * r.
    let rem = poly_rem(piece, &deriv);
    let mu = rem.first().cloned().unwrap_or_else(GoldenScalar::zero);
    let lambda = rem.get(1).cloned().unwrap_or_else(GoldenScalar::zero);
    for branch in [1i64, -1] {
        let branch_scalar = GoldenScalar::from_ints(branch, 0);
        // r - lo > 0 and r - hi < 0, both scaled by 2 a2.
        let above_lo = surd_sign(&(-a1 - &two_a2 * lo), &branch_scalar, &disc) * denom_sign > 0;
        let below_hi = surd_sign(&(-a1 - &two_a2 * hi), &branch_scalar, &disc) * denom_sign < 0;
        if above_lo && below_hi {
            // sign of mu + lambda r = sign of (2 a2 mu - lambda a1 + lambda s sqrt(disc)) / (2 a2)
            let u = &two_a2 * &mu - &lambda * a1;
            let v = &lambda * &branch_scalar;
            if surd_sign(&u, &v, &disc) * denom_sign < 0 {
                return false;
            }
        }
    }
    true
}

/// Float mirror of a piecewise polynomial.
#[derive(Clone, Debug)]
pub struct FloatPiecewise {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl FloatPiecewise {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self
            .breakpoints
            .partition_point(|&bp| bp <= x)
            .clamp(1, self.pieces.len())
            - 1;
        self.pieces[idx]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c)
    }
}

// ---------------------------------------------------------------------------
// The invariant density and pushforwards
// ---------------------------------------------------------------------------

/// The invariant density: (1 + beta)/sqrt(5) on [0, beta^-1), beta/sqrt(5)
/// on [beta^-1, 1).
pub fn f_beta() -> PiecewisePoly {
    let inv_sqrt5 = GoldenScalar::sqrt5().inverse().unwrap();
    let high = GoldenScalar::from_ints(1, 1) * &inv_sqrt5;
    let low = GoldenScalar::beta() * &inv_sqrt5;
    PiecewisePoly::from_parts_canonical(
        vec![
            GoldenScalar::zero(),
            GoldenScalar::beta_inv(),
            GoldenScalar::one(),
        ],
        vec![vec![high], vec![low]],
    )
}

/// Event-sweep accumulator: polynomial contributions are added over ranges of
/// a fixed breakpoint grid, then swept into pieces.
struct Accumulator {
    breakpoints: Vec<GoldenScalar>,
    deltas: Vec<Vec<GoldenScalar>>,
}

impl Accumulator {
    fn new(mut points: Vec<GoldenScalar>) -> Self {
        points.sort();
        points.dedup();
        let len = points.len();
        Accumulator {
            breakpoints: points,
            deltas: vec![Vec::new(); len],
        }
    }

    fn index(&self, x: &GoldenScalar) -> usize {
        self.breakpoints
            .binary_search(x)
            .expect("event position must be a registered breakpoint")
    }

    fn add(&mut self, from: &GoldenScalar, to: &GoldenScalar, poly: Vec<GoldenScalar>) {
        let i = self.index(from);
        let j = self.index(to);
        debug_assert!(i < j);
        poly_add_into(&mut self.deltas[j], &poly_neg(&poly));
        poly_add_into(&mut self.deltas[i], &poly);
    }

    fn finish(self) -> PiecewisePoly {
        let mut pieces = Vec::with_capacity(self.breakpoints.len() - 1);
        let mut current: Vec<GoldenScalar> = Vec::new();
        for delta in &self.deltas[..self.deltas.len() - 1] {
            poly_add_into(&mut current, delta);
            pieces.push(poly_trim(current.clone()));
        }
        PiecewisePoly::from_parts_canonical(self.breakpoints, pieces)
    }
}

/// x -> shift + slope * x with the inverse slope cached. Slope is positive in
/// every use here.
struct AffineMap {
    shift: GoldenScalar,
    slope: GoldenScalar,
    slope_inv: GoldenScalar,
}

impl AffineMap {
    fn new(shift: GoldenScalar, slope: GoldenScalar) -> Self {
        let slope_inv = slope.inverse().expect("affine slope must be nonzero");
        AffineMap {
            shift,
            slope,
            slope_inv,
        }
    }
}

/// Pullback positions of f's interior breakpoints under the affine map,
/// restricted to the open window (x_lo, x_hi).
fn pullback_cuts(
    f: &PiecewisePoly,
    map: &AffineMap,
    x_lo: &GoldenScalar,
    x_hi: &GoldenScalar,
) -> Vec<GoldenScalar> {
    let inner = &f.breakpoints[1..f.breakpoints.len() - 1];
    inner
        .iter()
        .map(|t| (t - &map.shift) * &map.slope_inv)
        .filter(|x| (x - x_lo).sign() > 0 && (x - x_hi).sign() < 0)
        .collect()
}

/// Adds scale * f(map(x)) over the window [x_lo, x_hi).
fn add_affine_pullback(
    acc: &mut Accumulator,
    f: &PiecewisePoly,
    map: &AffineMap,
    x_lo: &GoldenScalar,
    x_hi: &GoldenScalar,
    scale: &GoldenScalar,
) {
    let mut cuts = vec![x_lo.clone()];
    cuts.extend(pullback_cuts(f, map, x_lo, x_hi));
    cuts.push(x_hi.clone());
    for pair in cuts.windows(2) {
        let arg_left = &map.shift + &(&map.slope * &pair[0]);
        let piece = &f.pieces[f.piece_index(&arg_left)];
        let composed = poly_scale(&poly_compose_affine(piece, &map.shift, &map.slope), scale);
        acc.add(&pair[0], &pair[1], composed);
    }
}

/// The density of the n-th iterate as the explicit sum over length-n words:
/// every word contributes beta^-n * f(L_J + x beta^-n) on [0, beta^-1), and
/// the words ending in 0 contribute the same expression on [beta^-1, 1).
pub fn pushforward_direct(f: &PiecewisePoly, n: usize) -> Result<PiecewisePoly> {
    f.check_density()?;
    if n == 0 {
        return Ok(f.clone());
    }
    if n > DIRECT_PUSHFORWARD_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: DIRECT_PUSHFORWARD_CAP,
        });
    }
    let zero = GoldenScalar::zero();
    let one = GoldenScalar::one();
    let beta_inv = GoldenScalar::beta_inv();
    let slope = GoldenScalar::pow_beta(-(n as i64));
    let slope_inv = GoldenScalar::pow_beta(n as i64);
    let word_list = words::enumerate(n)?;
    let maps: Vec<AffineMap> = word_list
        .iter()
        .map(|w| AffineMap {
            shift: partition::left_endpoint(w),
            slope: slope.clone(),
            slope_inv: slope_inv.clone(),
        })
        .collect();

    let mut points = vec![zero.clone(), beta_inv.clone(), one.clone()];
    for (word, map) in word_list.iter().zip(&maps) {
        let hi = if word.last_digit() == 1 {
            &beta_inv
        } else {
            &one
        };
        points.extend(pullback_cuts(f, map, &zero, hi));
    }
    let mut acc = Accumulator::new(points);
    for (word, map) in word_list.iter().zip(&maps) {
        let hi = if word.last_digit() == 1 {
            &beta_inv
        } else {
            &one
        };
        add_affine_pullback(&mut acc, f, map, &zero, hi, &slope);
    }
    Ok(acc.finish())
}

/// One application of the transfer operator:
/// (Lf)(x) = beta^-1 f(x/beta) + beta^-1 f((x+1)/beta) [x < beta^-1].
pub fn transfer_step(f: &PiecewisePoly) -> Result<PiecewisePoly> {
    f.check_density()?;
    if f.max_degree() > DEFAULT_MAX_DEGREE {
        return Err(Error::DegreeTooHigh {
            degree: f.max_degree(),
            max: DEFAULT_MAX_DEGREE,
        });
    }
    let zero = GoldenScalar::zero();
    let one = GoldenScalar::one();
    let beta_inv = GoldenScalar::beta_inv();
    // Branch A covers x in [0, 1) through f(x/beta); branch B covers
    // x in [0, beta^-1) through f((x+1)/beta).
    let branch_a = AffineMap::new(zero.clone(), beta_inv.clone());
    let branch_b = AffineMap::new(beta_inv.clone(), beta_inv.clone());

    let mut points = vec![zero.clone(), beta_inv.clone(), one.clone()];
    points.extend(pullback_cuts(f, &branch_a, &zero, &one));
    points.extend(pullback_cuts(f, &branch_b, &zero, &beta_inv));
    let mut acc = Accumulator::new(points);
    add_affine_pullback(&mut acc, f, &branch_a, &zero, &one, &beta_inv);
    add_affine_pullback(&mut acc, f, &branch_b, &zero, &beta_inv, &beta_inv);
    Ok(acc.finish())
}

/// n-fold composition of [`transfer_step`].
pub fn transfer_iterate(f: &PiecewisePoly, n: usize) -> Result<PiecewisePoly> {
    let mut g = f.clone();
    for _ in 0..n {
        g = transfer_step(&g)?;
    }
    Ok(g)
}

/// One evaluated point of a pushed-forward CDF.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfValue {
    pub x: GoldenScalar,
    pub value: GoldenScalar,
}

/// Sorted word endpoints of one branch with prefix sums of their powers.
///
/// The endpoints are already sorted (lexicographic order of the words matches
/// endpoint order), so for a fixed shift o every CDF piece receives a
/// contiguous index range of words, and the range sum of F(L + o) expands
/// binomially over the prefix power sums: no per-word work at evaluation
/// time.
struct ShiftedSumTable {
    lefts: Vec<GoldenScalar>,
    /// prefix_powers[j][i] = sum of L^j over the first i endpoints.
    prefix_powers: Vec<Vec<GoldenScalar>>,
}

const BINOMIAL: [[i64; 5]; 5] = [
    [1, 0, 0, 0, 0],
    [1, 1, 0, 0, 0],
    [1, 2, 1, 0, 0],
    [1, 3, 3, 1, 0],
    [1, 4, 6, 4, 1],
];

impl ShiftedSumTable {
    fn new(lefts: Vec<GoldenScalar>, max_power: usize) -> Self {
        debug_assert!(max_power < BINOMIAL.len());
        let mut prefix_powers = Vec::with_capacity(max_power + 1);
        for j in 0..=max_power {
            let mut acc = GoldenScalar::zero();
            let mut row = Vec::with_capacity(lefts.len() + 1);
            row.push(acc.clone());
            for left in &lefts {
                let mut power = GoldenScalar::one();
                for _ in 0..j {
                    power = power * left;
                }
                acc = acc + power;
                row.push(acc.clone());
            }
            prefix_powers.push(row);
        }
        ShiftedSumTable {
            lefts,
            prefix_powers,
        }
    }

    /// Sum of cdf(L + offset) over every endpoint L in the table. All shifted
    /// arguments must lie in [0, 1), which holds for both branch windows.
    fn sum_shifted(&self, cdf: &PiecewisePoly, offset: &GoldenScalar) -> GoldenScalar {
        let max_power = self.prefix_powers.len() - 1;
        let mut offset_powers = vec![GoldenScalar::one()];
        for _ in 0..max_power {
            offset_powers.push(offset_powers.last().unwrap() * offset);
        }
        let mut total = GoldenScalar::zero();
        let mut lo = 0usize;
        for (p, piece) in cdf.pieces.iter().enumerate() {
            let bound = &cdf.breakpoints[p + 1] - offset;
            let hi = lo + self.lefts[lo..].partition_point(|l| (l - &bound).sign() < 0);
            if hi > lo {
                for (k, coeff) in piece.iter().enumerate() {
                    for (j, binom) in BINOMIAL[k].iter().enumerate().take(k + 1) {
                        let range_sum = &self.prefix_powers[j][hi] - &self.prefix_powers[j][lo];
                        total = total
                            + coeff
                                * GoldenScalar::from_ints(*binom, 0)
                                * range_sum
                                * &offset_powers[k - j];
                    }
                }
            }
            lo = hi;
        }
        debug_assert_eq!(lo, self.lefts.len(), "every endpoint must be covered");
        total
    }
}

/// Prepared state for evaluating F_n at many points. The word sum splits into
/// an x-independent part plus one shifted range sum per branch.
pub struct CdfEvaluator {
    n: usize,
    cdf: PiecewisePoly,
    all_words: ShiftedSumTable,
    words_ending_zero: ShiftedSumTable,
    base_sum: GoldenScalar,
    fixed_ending_one: GoldenScalar,
    scale: GoldenScalar,
    beta_inv: GoldenScalar,
}

impl CdfEvaluator {
    pub fn new(f: &PiecewisePoly, n: usize) -> Result<Self> {
        f.check_density()?;
        if n > DIRECT_PUSHFORWARD_CAP {
            return Err(Error::EnumerationCap {
                n,
                cap: DIRECT_PUSHFORWARD_CAP,
            });
        }
        let cdf = f.cdf();
        let max_power = cdf.max_degree();
        let scale = GoldenScalar::pow_beta(-(n as i64));
        let short = GoldenScalar::pow_beta(-(n as i64) - 1);
        let mut lefts_all = Vec::new();
        let mut lefts_ending_zero = Vec::new();
        let mut base_sum = GoldenScalar::zero();
        let mut fixed_ending_one = GoldenScalar::zero();
        if n == 0 {
            lefts_all.push(GoldenScalar::zero());
            lefts_ending_zero.push(GoldenScalar::zero());
        } else {
            for word in words::enumerate(n)? {
                let left = partition::left_endpoint(&word);
                base_sum = base_sum + cdf.eval_closed(&left)?;
                if word.last_digit() == 0 {
                    lefts_ending_zero.push(left.clone());
                } else {
                    fixed_ending_one = fixed_ending_one + cdf.eval_closed(&(&left + &short))?;
                }
                lefts_all.push(left);
            }
        }
        Ok(CdfEvaluator {
            n,
            cdf,
            all_words: ShiftedSumTable::new(lefts_all, max_power),
            words_ending_zero: ShiftedSumTable::new(lefts_ending_zero, max_power),
            base_sum,
            fixed_ending_one,
            scale,
            beta_inv: GoldenScalar::beta_inv(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// F_n(x) for x in [0, 1).
    pub fn eval(&self, x: &GoldenScalar) -> Result<CdfValue> {
        if x.sign() < 0 || (x - GoldenScalar::one()).sign() >= 0 {
            return Err(Error::OutOfDomain {
                value: x.to_string(),
                domain: "[0, 1)",
            });
        }
        let offset = x * &self.scale;
        let sum = if (x - &self.beta_inv).sign() < 0 {
            self.all_words.sum_shifted(&self.cdf, &offset)
        } else {
            self.words_ending_zero.sum_shifted(&self.cdf, &offset) + &self.fixed_ending_one
        };
        let value = sum - &self.base_sum;
        debug_assert!(value.sign() >= 0 && (&value - GoldenScalar::one()).sign() <= 0);
        Ok(CdfValue {
            x: x.clone(),
            value,
        })
    }
}

/// F_n(x) by the split word-sum formulas (one-shot convenience wrapper).
pub fn cdf_pushforward(f: &PiecewisePoly, n: usize, x: &GoldenScalar) -> Result<CdfValue> {
    CdfEvaluator::new(f, n)?.eval(x)
}

// ---------------------------------------------------------------------------
// L1 and total-variation distance
// ---------------------------------------------------------------------------

/// An L1 or TV distance: exact, or a certified enclosure when a sign change
/// of a degree >= 2 piece had to be isolated numerically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Norm {
    Exact(GoldenScalar),
    Bounds {
        lower: GoldenScalar,
        upper: GoldenScalar,
    },
}

impl Norm {
    pub fn is_exact(&self) -> bool {
        matches!(self, Norm::Exact(_))
    }

    pub fn exact(&self) -> Option<&GoldenScalar> {
        match self {
            Norm::Exact(v) => Some(v),
            Norm::Bounds { .. } => None,
        }
    }

    pub fn lower(&self) -> &GoldenScalar {
        match self {
            Norm::Exact(v) => v,
            Norm::Bounds { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> &GoldenScalar {
        match self {
            Norm::Exact(v) => v,
            Norm::Bounds { upper, .. } => upper,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Norm::Exact(v) => v.to_f64(),
            Norm::Bounds { lower, upper } => {
                ((lower + upper) * GoldenScalar::from_ratio(1, 2)).to_f64()
            }
        }
    }

    pub fn halved(&self) -> Norm {
        let half = GoldenScalar::from_ratio(1, 2);
        match self {
            Norm::Exact(v) => Norm::Exact(v * &half),
            Norm::Bounds { lower, upper } => Norm::Bounds {
                lower: lower * &half,
                upper: upper * &half,
            },
        }
    }
}

/// Running bounds on an integral of an absolute value.
struct AbsAccumulator {
    lower: GoldenScalar,
    upper: GoldenScalar,
    exact: bool,
}

impl AbsAccumulator {
    fn new() -> Self {
        AbsAccumulator {
            lower: GoldenScalar::zero(),
            upper: GoldenScalar::zero(),
            exact: true,
        }
    }

    fn add_exact(&mut self, v: GoldenScalar) {
        debug_assert!(v.sign() >= 0);
        self.lower = &self.lower + &v;
        self.upper = &self.upper + &v;
    }

    fn add_gap(&mut self, width: GoldenScalar, bound: &GoldenScalar) {
        self.upper = &self.upper + &(width * bound);
        self.exact = false;
    }

    fn into_norm(self) -> Norm {
        if self.exact {
            Norm::Exact(self.lower)
        } else {
            Norm::Bounds {
                lower: self.lower,
                upper: self.upper,
            }
        }
    }
}

fn root_tolerance() -> GoldenScalar {
    GoldenScalar::from_rational(num_rational::BigRational::new(
        1.into(),
        num_bigint::BigInt::from(10).pow(ROOT_TOLERANCE_EXP),
    ))
}

/// Narrows a sign change of `poly` on [lo, hi] (signs at the ends must
/// strictly differ) to an exact root or a bracket no wider than `tol`.
enum RootLocation {
    Exact(GoldenScalar),
    Bracket(GoldenScalar, GoldenScalar),
}

fn bisect_sign_change(
    poly: &[GoldenScalar],
    lo: &GoldenScalar,
    hi: &GoldenScalar,
    sign_lo: i32,
    tol: &GoldenScalar,
) -> RootLocation {
    let half = GoldenScalar::from_ratio(1, 2);
    let mut l = lo.clone();
    let mut u = hi.clone();
    while ((&u - &l) - tol).sign() > 0 {
        let mid = (&l + &u) * &half;
        match poly_eval(poly, &mid).sign() {
            0 => return RootLocation::Exact(mid),
            s if s == sign_lo => l = mid,
            _ => u = mid,
        }
    }
    RootLocation::Bracket(l, u)
}

/// integral of |h| over [lo, hi] where h is monotone there (no interior
/// critical point). `anti` is an antiderivative of h.
fn abs_integral_monotone(
    h: &[GoldenScalar],
    anti: &[GoldenScalar],
    lo: &GoldenScalar,
    hi: &GoldenScalar,
    bound: &GoldenScalar,
    tol: &GoldenScalar,
    acc: &mut AbsAccumulator,
) {
    let sign_lo = poly_eval(h, lo).sign();
    let sign_hi = poly_eval(h, hi).sign();
    let span = |a: &GoldenScalar, b: &GoldenScalar| (poly_eval(anti, b) - poly_eval(anti, a)).abs();
    if sign_lo * sign_hi >= 0 {
        // Monotone with no strict sign change: |integral| is the answer.
        acc.add_exact(span(lo, hi));
        return;
    }
    match bisect_sign_change(h, lo, hi, sign_lo, tol) {
        RootLocation::Exact(r) => {
            acc.add_exact(span(lo, &r));
            acc.add_exact(span(&r, hi));
        }
        RootLocation::Bracket(l, u) => {
            acc.add_exact(span(lo, &l));
            acc.add_exact(span(&u, hi));
            acc.add_gap(&u - &l, bound);
        }
    }
}

/// integral of |h| over [lo, hi] for deg(h) <= 3, splitting at critical
/// points so each sub-segment is monotone. Exact whenever every needed split
/// point lies in Q(beta); otherwise a certified enclosure.
fn abs_integral_piece(
    h: &[GoldenScalar],
    lo: &GoldenScalar,
    hi: &GoldenScalar,
    tol: &GoldenScalar,
    acc: &mut AbsAccumulator,
) {
    let h = poly_trim(h.to_vec());
    if h.is_empty() {
        return;
    }
    let anti = poly_antiderivative(&h);
    if h.len() == 1 {
        acc.add_exact(h[0].abs() * (hi - lo));
        return;
    }
    // Max |h| on [0, 1] is bounded by the coefficient-magnitude sum.
    let bound = h.iter().fold(GoldenScalar::zero(), |b, c| b + c.abs());

    // Split positions: exact critical points, or brackets around them.
    let mut exact_splits: Vec<GoldenScalar> = Vec::new();
    let mut bracket_splits: Vec<(GoldenScalar, GoldenScalar)> = Vec::new();
    let strictly_inside = |x: &GoldenScalar| (x - lo).sign() > 0 && (x - hi).sign() < 0;
    match h.len() {
        2 => {
            // Linear: the root itself is an exact split, making |.| exact.
            let root = -(&h[0] * h[1].inverse().unwrap());
            if strictly_inside(&root) {
                exact_splits.push(root);
            }
        }
        3 => {
            let vertex = -(&h[1] * (GoldenScalar::from_ints(2, 0) * &h[2]).inverse().unwrap());
            if strictly_inside(&vertex) {
                exact_splits.push(vertex);
            }
        }
        _ => {
            // Cubic: critical points are roots of the quadratic derivative.
            // Its own vertex is exact and splits it into monotone halves, on
            // which sign changes are bisected.
            let deriv = poly_derivative(&h);
            let dvertex = -(&deriv[1]
                * (GoldenScalar::from_ints(2, 0) * &deriv[2])
                    .inverse()
                    .unwrap());
            let mut d_nodes = vec![lo.clone()];
            if strictly_inside(&dvertex) {
                d_nodes.push(dvertex);
            }
            d_nodes.push(hi.clone());
            for pair in d_nodes.windows(2) {
                let s_lo = poly_eval(&deriv, &pair[0]).sign();
                let s_hi = poly_eval(&deriv, &pair[1]).sign();
                if s_lo * s_hi < 0 {
                    match bisect_sign_change(&deriv, &pair[0], &pair[1], s_lo, tol) {
                        RootLocation::Exact(r) => exact_splits.push(r),
                        RootLocation::Bracket(l, u) => bracket_splits.push((l, u)),
                    }
                }
            }
        }
    }

    // Assemble the monotone segments in order.
    enum Sep {
        Point(GoldenScalar),
        Gap(GoldenScalar, GoldenScalar),
    }
    let mut seps: Vec<Sep> = exact_splits.into_iter().map(Sep::Point).collect();
    seps.extend(bracket_splits.into_iter().map(|(l, u)| Sep::Gap(l, u)));
    seps.sort_by(|a, b| {
        let key = |s: &Sep| match s {
            Sep::Point(p) => p.clone(),
            Sep::Gap(l, _) => l.clone(),
        };
        key(a).cmp(&key(b))
    });

    let mut cursor = lo.clone();
    for sep in &seps {
        match sep {
            Sep::Point(p) => {
                abs_integral_monotone(&h, &anti, &cursor, p, &bound, tol, acc);
                cursor = p.clone();
            }
            Sep::Gap(l, u) => {
                abs_integral_monotone(&h, &anti, &cursor, l, &bound, tol, acc);
                acc.add_gap(u - l, &bound);
                cursor = u.clone();
            }
        }
    }
    abs_integral_monotone(&h, &anti, &cursor, hi, &bound, tol, acc);
}

/// Merged breakpoint grid of two piecewise polynomials.
fn merged_breakpoints(f: &PiecewisePoly, g: &PiecewisePoly) -> Vec<GoldenScalar> {
    let mut all: Vec<GoldenScalar> = f
        .breakpoints
        .iter()
        .chain(g.breakpoints.iter())
        .cloned()
        .collect();
    all.sort();
    all.dedup();
    all
}

/// Exact-or-certified L1 distance between two piecewise polynomials.
pub fn l1_distance(f: &PiecewisePoly, g: &PiecewisePoly) -> Norm {
    let grid = merged_breakpoints(f, g);
    let tol = root_tolerance();
    let mut acc = AbsAccumulator::new();
    for pair in grid.windows(2) {
        let diff = poly_sub(
            &f.pieces[f.piece_index(&pair[0])],
            &g.pieces[g.piece_index(&pair[0])],
        );
        abs_integral_piece(&diff, &pair[0], &pair[1], &tol, &mut acc);
    }
    acc.into_norm()
}

/// Total variation distance between the laws of two densities: half the L1
/// distance of the densities.
pub fn tv_distance(f: &PiecewisePoly, g: &PiecewisePoly) -> Result<Norm> {
    f.check_density()?;
    g.check_density()?;
    Ok(l1_distance(f, g).halved())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gs(p: i64, q: i64) -> GoldenScalar {
        GoldenScalar::from_ints(p, q)
    }

    fn inv_sqrt5() -> GoldenScalar {
        GoldenScalar::sqrt5().inverse().unwrap()
    }

    fn linear_2x() -> PiecewisePoly {
        PiecewisePoly::from_single(vec![gs(0, 0), gs(2, 0)]).unwrap()
    }

    fn quadratic_3x2() -> PiecewisePoly {
        PiecewisePoly::from_single(vec![gs(0, 0), gs(0, 0), gs(3, 0)]).unwrap()
    }

    #[test]
    fn invariant_density_plateaus() {
        let f = f_beta();
        let high = f.eval(&GoldenScalar::zero()).unwrap();
        let low = f.eval(&GoldenScalar::beta_inv()).unwrap();
        assert_eq!(high, gs(1, 1) * inv_sqrt5());
        assert_eq!(low, GoldenScalar::beta() * inv_sqrt5());
        assert!((high.to_f64() - 1.170820).abs() < 1e-6);
        assert!((low.to_f64() - 0.723607).abs() < 1e-6);
        assert_eq!(f.integral(), GoldenScalar::one());
        f.check_density().unwrap();
    }

    #[test]
    fn pushforward_of_uniform_one_step() {
        let pushed = pushforward_direct(&PiecewisePoly::uniform(), 1).unwrap();
        // Two words contribute on the left plateau, one on the right.
        let left = pushed.eval(&GoldenScalar::zero()).unwrap();
        let right = pushed.eval(&GoldenScalar::beta_inv()).unwrap();
        assert_eq!(left, gs(2, 0) * GoldenScalar::beta_inv());
        assert_eq!(right, GoldenScalar::beta_inv());
        assert!((left.to_f64() - 1.236).abs() < 1e-3);
        assert!((right.to_f64() - 0.618).abs() < 1e-3);
        assert_eq!(pushed.integral(), GoldenScalar::one());
    }

    #[test]
    fn pushforward_of_uniform_counts_words() {
        // At step n the plateaus are N(n) beta^-n and N_0(n) beta^-n.
        let pushed = pushforward_direct(&PiecewisePoly::uniform(), 4).unwrap();
        let scale = GoldenScalar::pow_beta(-4);
        assert_eq!(
            pushed.eval(&GoldenScalar::zero()).unwrap(),
            gs(8, 0) * &scale
        );
        assert_eq!(
            pushed.eval(&GoldenScalar::beta_inv()).unwrap(),
            gs(5, 0) * &scale
        );
    }

    #[test]
    fn invariant_density_is_fixed() {
        let f = f_beta();
        assert_eq!(pushforward_direct(&f, 1).unwrap(), f);
        assert_eq!(pushforward_direct(&f, 7).unwrap(), f);
        assert_eq!(transfer_step(&f).unwrap(), f);
    }

    #[test]
    fn operator_matches_direct_sum() {
        assert_eq!(
            transfer_step(&PiecewisePoly::uniform()).unwrap(),
            pushforward_direct(&PiecewisePoly::uniform(), 1).unwrap()
        );
        let f = linear_2x();
        assert_eq!(
            transfer_iterate(&f, 3).unwrap(),
            pushforward_direct(&f, 3).unwrap()
        );
    }

    #[test]
    fn mass_is_conserved() {
        for f in [
            PiecewisePoly::uniform(),
            linear_2x(),
            quadratic_3x2(),
            f_beta(),
        ] {
            for n in [1, 2, 5, 9, 15] {
                let pushed = pushforward_direct(&f, n).unwrap();
                assert_eq!(pushed.integral(), GoldenScalar::one(), "n = {n}");
                pushed.check_density().unwrap();
            }
        }
    }

    #[test]
    fn cdf_pushforward_of_uniform() {
        // F_1(beta^-1) for the uniform start: integral of the n = 1 density
        // over [0, beta^-1) = 2 beta^-2.
        let v = cdf_pushforward(&PiecewisePoly::uniform(), 1, &GoldenScalar::beta_inv()).unwrap();
        assert_eq!(v.value, GoldenScalar::pow_beta(-2) * gs(2, 0));
    }

    #[test]
    fn cdf_matches_integrated_density() {
        for f in [PiecewisePoly::uniform(), linear_2x(), f_beta()] {
            for n in [1, 3, 6] {
                let pushed = pushforward_direct(&f, n).unwrap();
                let pushed_cdf = pushed.cdf();
                let eval = CdfEvaluator::new(&f, n).unwrap();
                for k in 0..100 {
                    let x = GoldenScalar::from_ratio(k, 100);
                    assert_eq!(
                        eval.eval(&x).unwrap().value,
                        pushed_cdf.eval_closed(&x).unwrap(),
                        "n = {n}, x = {k}/100"
                    );
                }
            }
        }
    }

    #[test]
    fn cdf_reaches_one() {
        let f = f_beta();
        let cdf = f.cdf();
        assert_eq!(
            cdf.eval_closed(&GoldenScalar::one()).unwrap(),
            GoldenScalar::one()
        );
        assert_eq!(
            cdf.eval_closed(&GoldenScalar::zero()).unwrap(),
            GoldenScalar::zero()
        );
    }

    #[test]
    fn l1_of_identical_densities_is_zero() {
        let d = l1_distance(&f_beta(), &f_beta());
        assert_eq!(d, Norm::Exact(GoldenScalar::zero()));
    }

    #[test]
    fn l1_uniform_to_invariant() {
        // Piecewise-constant difference: beta^-1 (2 - beta)/sqrt5 on the left
        // plateau plus beta^-2 (beta... ) on the right collapses to
        // 2 beta^-3 / sqrt5.
        let d = l1_distance(&PiecewisePoly::uniform(), &f_beta());
        let expected = gs(2, 0) * GoldenScalar::pow_beta(-3) * inv_sqrt5();
        assert_eq!(d, Norm::Exact(expected));
        assert!((d.to_f64() - 0.2111).abs() < 1e-4);
    }

    #[test]
    fn tv_after_one_uniform_step() {
        let pushed = pushforward_direct(&PiecewisePoly::uniform(), 1).unwrap();
        let d = tv_distance(&pushed, &f_beta()).unwrap();
        let expected = GoldenScalar::pow_beta(-5) * inv_sqrt5();
        assert_eq!(d, Norm::Exact(expected));
        assert!((d.to_f64() - 0.040325).abs() < 1e-6);
        let l1 = l1_distance(&pushed, &f_beta());
        assert!((l1.to_f64() - 0.08065).abs() < 1e-5);
    }

    #[test]
    fn quadratic_l1_is_certified() {
        // integral of |3x^2 - 1| = 4/(3 sqrt 3); the root 1/sqrt(3) is outside
        // Q(beta), so the result must be an enclosure around the true value.
        let d = l1_distance(&quadratic_3x2(), &PiecewisePoly::uniform());
        let truth = 4.0 / (3.0 * 3.0_f64.sqrt());
        match &d {
            Norm::Bounds { lower, upper } => {
                assert!(lower.to_f64() <= truth && truth <= upper.to_f64());
                assert!(((upper - lower).to_f64()) < 1e-25);
            }
            Norm::Exact(_) => panic!("expected certified bounds"),
        }
    }

    #[test]
    fn cubic_density_checks() {
        // 4x^3 is a density.
        PiecewisePoly::from_single(vec![gs(0, 0), gs(0, 0), gs(0, 0), gs(4, 0)])
            .unwrap()
            .check_density()
            .unwrap();
        // (48/11)(x - 1/4)(x - 1/2)(x + 2) has unit mass and positive
        // endpoints but dips negative on (1/4, 1/2); only the interior
        // critical point betrays it.
        let dip = PiecewisePoly::from_single(vec![
            GoldenScalar::from_ratio(12, 11),
            gs(-6, 0),
            GoldenScalar::from_ratio(60, 11),
            GoldenScalar::from_ratio(48, 11),
        ])
        .unwrap();
        assert_eq!(dip.integral(), GoldenScalar::one());
        assert!(dip.eval(&GoldenScalar::zero()).unwrap().sign() > 0);
        assert!(dip.eval_closed(&GoldenScalar::one()).unwrap().sign() > 0);
        match dip.check_density() {
            Err(Error::NotADensity { reason }) => {
                assert!(reason.contains("negative"), "{reason}");
            }
            other => panic!("expected negativity failure, got {other:?}"),
        }
    }

    #[test]
    fn degree_cap_is_enforced() {
        let quartic =
            PiecewisePoly::from_single(vec![gs(0, 0), gs(0, 0), gs(0, 0), gs(0, 0), gs(5, 0)]);
        assert!(matches!(quartic, Err(Error::DegreeTooHigh { .. })));
    }

    #[test]
    fn direct_cap_is_enforced() {
        assert!(matches!(
            pushforward_direct(&PiecewisePoly::uniform(), DIRECT_PUSHFORWARD_CAP + 1),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn rejects_non_densities() {
        let negative = PiecewisePoly::from_single(vec![gs(-1, 0)]).unwrap();
        assert!(transfer_step(&negative).is_err());
        let wrong_mass = PiecewisePoly::from_single(vec![gs(2, 0)]).unwrap();
        assert!(pushforward_direct(&wrong_mass, 1).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = pushforward_direct(&linear_2x(), 2).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: PiecewisePoly = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
        // Deserialization re-validates.
        let bad = r#"{"breakpoints":[["0/1","0/1"],["1/2","0/1"]],"pieces":[["1/1","0/1"]]}"#;
        assert!(serde_json::from_str::<PiecewisePoly>(bad).is_err());
    }

    #[test]
    fn float_mirror_tracks_exact_values() {
        let f = pushforward_direct(&linear_2x(), 3).unwrap();
        let mirror = f.to_float();
        for k in 0..50 {
            let x = GoldenScalar::from_ratio(k, 50);
            let exact = f.eval(&x).unwrap().to_f64();
            assert!((mirror.eval(k as f64 / 50.0) - exact).abs() < 1e-9);
        }
    }
}
