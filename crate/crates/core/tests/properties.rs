//! Cross-module invariants driven by randomized inputs.

use golden_beta::density::{self, PiecewisePoly};
use golden_beta::dynamics;
use golden_beta::experiments::random_pl_density;
use golden_beta::partition;
use golden_beta::scalar::GoldenScalar;
use golden_beta::words::{self, Word};
use proptest::prelude::*;

fn arb_scalar() -> impl Strategy<Value = GoldenScalar> {
    (-1000i64..=1000, 1i64..=1000, -1000i64..=1000, 1i64..=1000).prop_map(|(pn, pd, qn, qd)| {
        GoldenScalar::new(
            num_rational::BigRational::new(pn.into(), pd.into()),
            num_rational::BigRational::new(qn.into(), qd.into()),
        )
    })
}

fn arb_unit_rational() -> impl Strategy<Value = GoldenScalar> {
    (0i64..10_000, 1i64..=10_000).prop_map(|(num, den)| GoldenScalar::from_ratio(num % den, den))
}

fn arb_word(max_len: usize) -> impl Strategy<Value = Word> {
    (1..=max_len).prop_flat_map(|n| {
        let size = words::counts(n).total;
        (Just(n), 0..size).prop_map(|(n, r)| words::unrank(n, r).unwrap())
    })
}

proptest! {
    #[test]
    fn scalar_field_axioms(a in arb_scalar(), b in arb_scalar(), c in arb_scalar()) {
        prop_assert_eq!((&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&a * &(&b + &c), &a * &b + &a * &c);
        if !a.is_zero() {
            prop_assert_eq!(&a * &a.inverse().unwrap(), GoldenScalar::one());
        }
    }

    #[test]
    fn scalar_serde_round_trip(a in arb_scalar()) {
        let json = serde_json::to_string(&a).unwrap();
        let back: GoldenScalar = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(a, back);
    }

    #[test]
    fn rank_round_trip(word in arb_word(16)) {
        let n = word.len();
        prop_assert_eq!(words::unrank(n, word.rank()).unwrap(), word);
    }

    #[test]
    fn successor_increases_and_stays_admissible(word in arb_word(14)) {
        if let Some(next) = word.successor() {
            prop_assert!(next > word);
            prop_assert_eq!(next.len(), word.len());
            // No word fits strictly between: ranks are adjacent.
            prop_assert_eq!(next.rank(), word.rank() + 1);
        } else {
            prop_assert_eq!(&word, &words::max_word(word.len()));
        }
    }

    #[test]
    fn digits_locate_and_telescope(x in arb_unit_rational(), n in 1usize..=15) {
        let w = dynamics::digits(&x, n).unwrap();
        prop_assert_eq!(&w, &partition::locate(&x, n).unwrap());
        let rebuilt = dynamics::decode(&w)
            + GoldenScalar::pow_beta(-(n as i64)) * dynamics::iterate(&x, n).unwrap();
        prop_assert_eq!(rebuilt, x);
    }

    #[test]
    fn interval_owns_exactly_its_points(word in arb_word(10)) {
        let interval = partition::IntervalNJ::for_word(word.clone());
        prop_assert!(interval.contains(interval.left()));
        let found = partition::locate(interval.left(), word.len()).unwrap();
        prop_assert_eq!(found, word);
    }

    #[test]
    fn l1_is_a_symmetric_nonnegative_form(seed_f in 0u64..500, seed_g in 0u64..500) {
        let f = random_pl_density(seed_f, 2);
        let g = random_pl_density(seed_g + 1000, 2);
        let d_fg = density::l1_distance(&f, &g);
        let d_gf = density::l1_distance(&g, &f);
        prop_assert_eq!(&d_fg, &d_gf);
        prop_assert!(d_fg.lower().sign() >= 0);
        if seed_f == seed_g {
            // Distinct seed spaces, so no accidental equality expected here;
            // self-distance is the real zero case.
            let self_distance = density::l1_distance(&f, &f);
            prop_assert_eq!(self_distance.exact().unwrap(), &GoldenScalar::zero());
        }
    }

    #[test]
    fn transfer_conserves_mass_and_density(seed in 0u64..500) {
        let f = random_pl_density(seed, 3);
        let pushed = density::transfer_step(&f).unwrap();
        prop_assert_eq!(pushed.integral(), GoldenScalar::one());
        pushed.check_density().unwrap();
    }

    #[test]
    fn piecewise_serde_round_trip(seed in 0u64..500) {
        let f = random_pl_density(seed, 3);
        let json = serde_json::to_string(&f).unwrap();
        let back: PiecewisePoly = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(f, back);
    }
}
