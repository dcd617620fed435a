//! Runnable studies: exact invariance families, convergence-rate tables, and
//! seeded Monte Carlo cross-checks of the pushed-forward CDF.
//!
//! Everything here is deterministic: randomness comes only from explicitly
//! seeded ChaCha streams, and sample generation is sharded with per-shard
//! derived streams so results are byte-identical for a fixed seed regardless
//! of worker count.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{
    self, f_beta, pushforward_direct, transfer_step, CdfEvaluator, Norm, PiecewisePoly,
};
use crate::dynamics::{self, FLOAT_DEPTH_CAP};
use crate::error::{Error, Result};
use crate::partition;
use crate::scalar::GoldenScalar;
use crate::words::{self, Word};

/// Number of Monte Carlo shards; fixed so the sample stream does not depend
/// on the worker count.
const MC_SHARDS: usize = 64;

/// Asymptotic 1% critical coefficient for the Kolmogorov-Smirnov statistic.
const KS_COEFF_1PCT: f64 = 1.63;

// ---------------------------------------------------------------------------
// Exact invariance (piecewise-constant starting densities)
// ---------------------------------------------------------------------------

/// A piecewise-constant density specified by one constant per length-m word.
///
/// The two exact constraints under which the m-th pushforward equals the
/// invariant density are
/// `sum over all words of C_J = beta^m (1 + beta)/sqrt(5)` and
/// `sum over words ending in 0 of C_J = beta^(m+1)/sqrt(5)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceSpec {
    pub m: usize,
    pub constants: BTreeMap<Word, GoldenScalar>,
}

impl InvarianceSpec {
    /// Required sum of all constants: beta^m (1 + beta)/sqrt(5).
    pub fn target_total(m: usize) -> GoldenScalar {
        GoldenScalar::pow_beta(m as i64)
            * GoldenScalar::from_ints(1, 1)
            * GoldenScalar::sqrt5().inverse().unwrap()
    }

    /// Required sum over words ending in 0: beta^(m+1)/sqrt(5).
    pub fn target_zero_sum(m: usize) -> GoldenScalar {
        GoldenScalar::pow_beta(m as i64 + 1) * GoldenScalar::sqrt5().inverse().unwrap()
    }

    /// The invariant density itself written as level-m constants.
    pub fn from_f_beta(m: usize) -> Result<Self> {
        let reference = f_beta();
        let mut constants = BTreeMap::new();
        for interval in partition::build_partition(m)? {
            let value = reference.eval(interval.left())?;
            constants.insert(interval.word().clone(), value);
        }
        Ok(InvarianceSpec { m, constants })
    }

    /// A seeded member of the solved constraint family: the two class sums
    /// are split across their words by random positive rational weights, so
    /// both constraints hold exactly and every constant is nonnegative.
    pub fn solved_family(m: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let class_sums = [
            Self::target_zero_sum(m),
            Self::target_total(m) - Self::target_zero_sum(m),
        ];
        let mut constants = BTreeMap::new();
        for (digit, class_sum) in class_sums.iter().enumerate() {
            let members: Vec<Word> = words::enumerate(m)?
                .into_iter()
                .filter(|w| usize::from(w.last_digit()) == digit)
                .collect();
            let weights: Vec<i64> = members
                .iter()
                .map(|_| (rng.next_u64() % 997) as i64 + 1)
                .collect();
            let total: i64 = weights.iter().sum();
            for (word, w) in members.into_iter().zip(weights) {
                let share = GoldenScalar::from_ratio(w, total);
                constants.insert(word, class_sum * share);
            }
        }
        Ok(InvarianceSpec { m, constants })
    }

    /// The induced piecewise-constant density on the level-m partition.
    pub fn to_density(&self) -> Result<PiecewisePoly> {
        let parts = partition::build_partition(self.m)?;
        let mut breakpoints = vec![GoldenScalar::zero()];
        let mut pieces = Vec::with_capacity(parts.len());
        for interval in &parts {
            let c = self
                .constants
                .get(interval.word())
                .ok_or_else(|| Error::MissingConstant(interval.word().to_string()))?;
            pieces.push(vec![c.clone()]);
            breakpoints.push(interval.right());
        }
        PiecewisePoly::new(breakpoints, pieces)
    }
}

/// Outcome of an exact invariance check, with exact residuals.
#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub m: usize,
    /// (sum of all constants) minus the target.
    pub total_residual: GoldenScalar,
    /// (sum over words ending in 0) minus the target.
    pub zero_sum_residual: GoldenScalar,
    pub negative_words: Vec<Word>,
    pub constraints_ok: bool,
    /// Whether the m-step pushforward equals the invariant density exactly
    /// (checked only when the constraints hold).
    pub pushforward_matches: Option<bool>,
    /// Whether one further transfer step leaves it fixed.
    pub stable_under_transfer: Option<bool>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.constraints_ok
            && self.pushforward_matches == Some(true)
            && self.stable_under_transfer == Some(true)
    }
}

/// Verifies the constraint sums exactly, then (if they hold) pushes the
/// induced density m steps and compares against the invariant density with
/// exact coefficient equality.
pub fn invariance_check(spec: &InvarianceSpec) -> Result<InvarianceReport> {
    let word_list = words::enumerate(spec.m)?;
    let mut total = GoldenScalar::zero();
    let mut zero_sum = GoldenScalar::zero();
    let mut negative_words = Vec::new();
    for word in &word_list {
        let c = spec
            .constants
            .get(word)
            .ok_or_else(|| Error::MissingConstant(word.to_string()))?;
        if c.sign() < 0 {
            negative_words.push(word.clone());
        }
        if word.last_digit() == 0 {
            zero_sum = zero_sum + c;
        }
        total = total + c;
    }
    let total_residual = total - InvarianceSpec::target_total(spec.m);
    let zero_sum_residual = zero_sum - InvarianceSpec::target_zero_sum(spec.m);
    let constraints_ok =
        total_residual.is_zero() && zero_sum_residual.is_zero() && negative_words.is_empty();

    let (pushforward_matches, stable_under_transfer) = if constraints_ok {
        let reference = f_beta();
        let pushed = pushforward_direct(&spec.to_density()?, spec.m)?;
        let matches = pushed == reference;
        let stable = transfer_step(&pushed)? == reference;
        (Some(matches), Some(stable))
    } else {
        (None, None)
    };

    Ok(InvarianceReport {
        m: spec.m,
        total_residual,
        zero_sum_residual,
        negative_words,
        constraints_ok,
        pushforward_matches,
        stable_under_transfer,
    })
}

// ---------------------------------------------------------------------------
// Convergence-rate study
// ---------------------------------------------------------------------------

/// One row of a convergence table.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Total variation distance to the invariant law at step n.
    pub norm: Norm,
    pub d_tv: f64,
    pub exact: bool,
}

/// Distances to the invariant law for n = 1..n_max via the operator path,
/// with a fitted log-linear rate against the proven exponent.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln d_TV against n over the nonzero rows.
    pub fitted_rate: Option<f64>,
    /// The proven rate exponent: -(2/3) ln beta.
    pub bound_rate: f64,
    /// Smallest constant C with d_TV(n) <= C beta^(-2n/3) on the first three
    /// rows.
    pub decay_constant: f64,
    /// Caller-supplied bound on the sup-norm of the starting density's
    /// derivative; recorded for the report header.
    pub lip_bound: f64,
    pub passed: bool,
}

pub fn convergence_study(
    f: &PiecewisePoly,
    n_max: usize,
    lip_bound: f64,
) -> Result<ConvergenceReport> {
    f.check_density()?;
    let reference = f_beta();
    let mut rows = Vec::with_capacity(n_max);
    let mut g = f.clone();
    for n in 1..=n_max {
        g = transfer_step(&g)?;
        let norm = density::tv_distance(&g, &reference)?;
        rows.push(ConvergenceRow {
            n,
            d_tv: norm.to_f64(),
            exact: norm.is_exact(),
            norm,
        });
    }

    let beta = dynamics::BETA_F64;
    let bound_rate = -(2.0 / 3.0) * beta.ln();

    // Calibrate the constant on the first three rows, then demand the bound
    // everywhere.
    let decay_constant = rows
        .iter()
        .take(3)
        .map(|r| r.norm.upper().to_f64() * beta.powf(2.0 * r.n as f64 / 3.0))
        .fold(0.0_f64, f64::max);
    let bound_ok = rows.iter().all(|r| {
        r.norm.upper().to_f64()
            <= decay_constant * beta.powf(-2.0 * r.n as f64 / 3.0) * (1.0 + 1e-9)
    });

    let fit_points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.norm.upper().sign() > 0)
        .map(|r| (r.n as f64, r.d_tv.ln()))
        .collect();
    let fitted_rate = least_squares_slope(&fit_points);
    let rate_ok = fitted_rate.is_none_or(|slope| slope <= bound_rate + 1e-3);

    Ok(ConvergenceReport {
        rows,
        fitted_rate,
        bound_rate,
        decay_constant,
        lip_bound,
        passed: bound_ok && rate_ok,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

// ---------------------------------------------------------------------------
// Monte Carlo cross-check
// ---------------------------------------------------------------------------

/// Result of one seeded Monte Carlo run against the exact pushed-forward CDF.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub ks_statistic: f64,
    /// Asymptotic 1% critical value 1.63/sqrt(samples).
    pub threshold_1pct: f64,
}

impl MonteCarloReport {
    pub fn passed(&self) -> bool {
        self.ks_statistic < self.threshold_1pct
    }
}

/// Draws samples from f by inverse-CDF, pushes them through the float orbit n
/// times, and compares the empirical CDF against the exact F_n on a
/// 1000-point grid.
pub fn monte_carlo(
    f: &PiecewisePoly,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    monte_carlo_with_jobs(f, n, samples, seed, 1)
}

/// Same study with the fixed shard list spread over `jobs` workers. The
/// report is identical for every job count.
pub fn monte_carlo_with_jobs(
    f: &PiecewisePoly,
    n: usize,
    samples: usize,
    seed: u64,
    jobs: usize,
) -> Result<MonteCarloReport> {
    f.check_density()?;
    if n > FLOAT_DEPTH_CAP {
        return Err(Error::PrecisionExhausted { depth: n });
    }
    assert!(samples > 0);
    let jobs = jobs.max(1);
    let float_cdf = f.cdf().to_float();

    let shard_count = |shard: usize| samples / MC_SHARDS + usize::from(shard < samples % MC_SHARDS);
    let run_shard = |shard: usize| -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard as u64 + 1);
        let mut out = Vec::with_capacity(shard_count(shard));
        for _ in 0..shard_count(shard) {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let x = invert_cdf_float(&float_cdf, u);
            out.push(dynamics::iterate_float_checked(x, n)?);
        }
        Ok(out)
    };

    let mut shard_results: Vec<Result<Vec<f64>>> = Vec::with_capacity(MC_SHARDS);
    if jobs == 1 {
        shard_results.extend((0..MC_SHARDS).map(run_shard));
    } else {
        let mut slots: Vec<Option<Result<Vec<f64>>>> = (0..MC_SHARDS).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (worker, chunk) in slots.chunks_mut(MC_SHARDS.div_ceil(jobs)).enumerate() {
                let base = worker * MC_SHARDS.div_ceil(jobs);
                scope.spawn(move || {
                    for (offset, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run_shard(base + offset));
                    }
                });
            }
        });
        shard_results.extend(slots.into_iter().map(|s| s.expect("worker filled slot")));
    }

    let mut finals = Vec::with_capacity(samples);
    for result in shard_results {
        finals.extend(result?);
    }
    finals.sort_unstable_by(f64::total_cmp);

    // Exact reference CDF on the grid.
    let evaluator = CdfEvaluator::new(f, n)?;
    let count = finals.len() as f64;
    let mut ks: f64 = 0.0;
    for i in 0..1000 {
        let x = GoldenScalar::from_ratio(i, 1000);
        let exact = evaluator.eval(&x)?.value.to_f64();
        let xf = i as f64 / 1000.0;
        let empirical = finals.partition_point(|&v| v <= xf) as f64 / count;
        ks = ks.max((empirical - exact).abs());
    }

    Ok(MonteCarloReport {
        n,
        samples,
        seed,
        ks_statistic: ks,
        threshold_1pct: KS_COEFF_1PCT / count.sqrt(),
    })
}

/// Inverse of a monotone float CDF by bisection.
fn invert_cdf_float(cdf: &crate::density::FloatPiecewise, u: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf.eval(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Keep strictly inside [0, 1).
    lo.min(1.0 - f64::EPSILON)
}

// ---------------------------------------------------------------------------
// Seeded random densities for property runs
// ---------------------------------------------------------------------------

/// A seeded continuous piecewise-linear density. Interior breakpoints are
/// drawn from small rationals optionally shifted by beta^-1, node values are
/// positive rationals, and the result is normalized exactly.
pub fn random_pl_density(seed: u64, interior_points: usize) -> PiecewisePoly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut breakpoints = vec![GoldenScalar::zero()];
    let mut interior: Vec<GoldenScalar> = Vec::new();
    while interior.len() < interior_points {
        let use_golden_shift = rng.next_u64() % 2 == 1;
        let r = GoldenScalar::from_ratio((rng.next_u64() % 399) as i64 - 199, 1000);
        let candidate = if use_golden_shift {
            GoldenScalar::beta_inv() + r
        } else {
            GoldenScalar::from_ratio(1, 2) + r
        };
        if candidate.sign() > 0
            && (&candidate - GoldenScalar::one()).sign() < 0
            && !interior.contains(&candidate)
        {
            interior.push(candidate);
        }
    }
    interior.sort();
    breakpoints.extend(interior);
    breakpoints.push(GoldenScalar::one());

    let values: Vec<GoldenScalar> = (0..breakpoints.len())
        .map(|_| GoldenScalar::from_ratio((rng.next_u64() % 1900) as i64 + 100, 1000))
        .collect();
    let mut pieces = Vec::with_capacity(values.len() - 1);
    for i in 0..values.len() - 1 {
        let dx = (&breakpoints[i + 1] - &breakpoints[i]).inverse().unwrap();
        let slope = (&values[i + 1] - &values[i]) * dx;
        pieces.push(vec![&values[i] - &(&slope * &breakpoints[i]), slope]);
    }
    let unnormalized = PiecewisePoly::new(breakpoints, pieces).expect("generator invariant");
    let mass_inv = unnormalized.integral().inverse().expect("positive mass");
    let scaled = unnormalized
        .pieces()
        .iter()
        .map(|p| p.iter().map(|c| c * &mass_inv).collect())
        .collect();
    PiecewisePoly::new(unnormalized.breakpoints().to_vec(), scaled).expect("normalized density")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_constants_pass_at_every_level() {
        for m in 1..=4 {
            let spec = InvarianceSpec::from_f_beta(m).unwrap();
            let report = invariance_check(&spec).unwrap();
            assert!(report.passed(), "m = {m}: {report:?}");
        }
    }

    #[test]
    fn structured_family_level_two() {
        // C_00 = 1, C_01 = (1+beta)/sqrt5, C_10 = beta^3/sqrt5 - 1.
        let inv_sqrt5 = GoldenScalar::sqrt5().inverse().unwrap();
        let mut constants = BTreeMap::new();
        constants.insert("00".parse().unwrap(), GoldenScalar::one());
        constants.insert(
            "01".parse().unwrap(),
            GoldenScalar::from_ints(1, 1) * &inv_sqrt5,
        );
        constants.insert(
            "10".parse().unwrap(),
            GoldenScalar::pow_beta(3) * &inv_sqrt5 - GoldenScalar::one(),
        );
        let report = invariance_check(&InvarianceSpec { m: 2, constants }).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn solved_family_members_pass() {
        for m in 1..=6 {
            for seed in [1, 2] {
                let spec = InvarianceSpec::solved_family(m, seed).unwrap();
                let report = invariance_check(&spec).unwrap();
                assert!(report.passed(), "m = {m}, seed = {seed}");
            }
        }
    }

    #[test]
    fn perturbed_constants_fail_exactly() {
        let mut spec = InvarianceSpec::from_f_beta(2).unwrap();
        let word: Word = "00".parse().unwrap();
        let bump = GoldenScalar::from_ratio(1, 1_000_000);
        let perturbed = spec.constants.get(&word).unwrap() + &bump;
        spec.constants.insert(word, perturbed);
        let report = invariance_check(&spec).unwrap();
        assert!(!report.passed());
        assert_eq!(report.total_residual, bump);
        assert!(report.pushforward_matches.is_none());
    }

    #[test]
    fn uniform_start_decays_at_the_closed_form_rate() {
        let report = convergence_study(&PiecewisePoly::uniform(), 8, 0.0).unwrap();
        assert!(report.passed);
        let inv_sqrt5 = GoldenScalar::sqrt5().inverse().unwrap();
        for row in &report.rows {
            let expected = GoldenScalar::pow_beta(-2 * row.n as i64 - 3) * &inv_sqrt5;
            assert_eq!(row.norm, Norm::Exact(expected), "n = {}", row.n);
        }
        // Actual decay is beta^-2n, far steeper than the bound rate.
        let fitted = report.fitted_rate.unwrap();
        assert!((fitted + 2.0 * dynamics::BETA_F64.ln()).abs() < 1e-6);
        assert!(fitted < report.bound_rate);
    }

    #[test]
    fn invariant_start_stays_at_zero() {
        let report = convergence_study(&f_beta(), 6, 0.0).unwrap();
        assert!(report.passed);
        assert!(report.fitted_rate.is_none());
        for row in &report.rows {
            assert_eq!(row.norm, Norm::Exact(GoldenScalar::zero()));
        }
    }

    #[test]
    fn linear_start_converges_monotonically() {
        let f =
            PiecewisePoly::from_single(vec![GoldenScalar::zero(), GoldenScalar::from_ints(2, 0)])
                .unwrap();
        let report = convergence_study(&f, 10, 2.0).unwrap();
        assert!(report.passed, "{report:?}");
        for pair in report.rows.windows(2) {
            assert!(pair[1].d_tv < pair[0].d_tv);
        }
    }

    #[test]
    fn seeded_piecewise_linear_starts_stay_in_the_envelope() {
        for seed in [17, 18] {
            let f = random_pl_density(seed, 3);
            let report = convergence_study(&f, 8, 0.0).unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn monte_carlo_is_reproducible_and_calibrated() {
        let f = PiecewisePoly::uniform();
        let a = monte_carlo(&f, 0, 20_000, 7).unwrap();
        let b = monte_carlo(&f, 0, 20_000, 7).unwrap();
        assert_eq!(a.ks_statistic, b.ks_statistic);
        assert!(a.passed(), "ks = {}", a.ks_statistic);
        let threaded = monte_carlo_with_jobs(&f, 0, 20_000, 7, 4).unwrap();
        assert_eq!(a.ks_statistic, threaded.ks_statistic);
        let other_seed = monte_carlo(&f, 0, 20_000, 8).unwrap();
        assert_ne!(a.ks_statistic, other_seed.ks_statistic);
    }

    #[test]
    fn monte_carlo_after_iteration() {
        let report = monte_carlo(&PiecewisePoly::uniform(), 4, 20_000, 3).unwrap();
        assert!(report.passed(), "ks = {}", report.ks_statistic);
        assert!(monte_carlo(&PiecewisePoly::uniform(), FLOAT_DEPTH_CAP + 1, 10, 1).is_err());
    }

    #[test]
    fn random_densities_are_valid_and_seeded() {
        for seed in 0..6 {
            let f = random_pl_density(seed, 3);
            f.check_density().unwrap();
            assert_eq!(f, random_pl_density(seed, 3));
        }
        assert_ne!(random_pl_density(1, 3), random_pl_density(2, 3));
    }
}
