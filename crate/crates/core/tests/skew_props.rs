use direntropy_core::entropy::PartitionSpec;
use direntropy_core::measures::MeasureModel;
use direntropy_core::skewprod::{cocycle_exponent, exponent_set, fiber_entropy_estimate, phase_ladder};
use direntropy_core::{DirectionSpec, Rational, ShapeSet, Site, SystemSpec};
use proptest::prelude::*;

fn golden() -> DirectionSpec {
    DirectionSpec::golden(1000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn composition_law(t in 0i64..100_000, i in 0i64..500, j in 0i64..500) {
        let d = golden();
        let t = Rational::new(t, 100_000);
        let whole = cocycle_exponent(&d, t, (i + j) as u64).unwrap().vec;
        let first = cocycle_exponent(&d, t, i as u64).unwrap().vec;
        let second = cocycle_exponent(&d, d.rotate(t, i).unwrap(), j as u64).unwrap().vec;
        prop_assert_eq!(whole, first + second);
    }

    #[test]
    fn exponent_sets_have_one_site_per_column(t in 0i64..1000, n in 1u64..1000) {
        let e = exponent_set(&golden(), Rational::new(t, 1000), n).unwrap();
        prop_assert_eq!(e.len(), n as usize);
        prop_assert!(e.iter().enumerate().all(|(k, s)| s.m == k as i64));
    }

    #[test]
    fn ladder_in_unit_interval(seed in any::<u32>()) {
        for t in phase_ladder(16, seed as u64) {
            prop_assert!(t >= Rational::from_integer(0) && t < Rational::from_integer(1));
            prop_assert!(*t.denom() <= 1_000_000);
        }
    }
}

#[test]
fn phase_spread_within_fit_uncertainty() {
    let d = golden();
    let pair = PartitionSpec::zero_coordinate().thicken(2, &[0, 1]).unwrap();
    let fs = SystemSpec::full_shift(2).unwrap();
    let rep = fiber_entropy_estimate(&MeasureModel::bernoulli(&[0.3, 0.7]).unwrap(), &fs, &pair, &d, 128, 8, 3).unwrap();
    assert!(rep.phase_spread <= 1e-9);
    let td = SystemSpec::three_dot();
    let rep = fiber_entropy_estimate(&MeasureModel::haar(td.clone()).unwrap(), &td, &pair, &d, 128, 8, 3).unwrap();
    let worst_se = rep.per_phase.iter().map(|p| p.estimate.slope_se).fold(0.0, f64::max);
    assert!(rep.phase_spread <= 4.0 * worst_se, "{} vs {}", rep.phase_spread, worst_se);
}

#[test]
fn fiber_join_uses_one_site_per_column() {
    // for a one-site partition on a uniform full shift the fiber join is N bits
    let d = golden();
    let fs = SystemSpec::full_shift(2).unwrap();
    let rep = fiber_entropy_estimate(&MeasureModel::uniform(2), &fs, &PartitionSpec::zero_coordinate(), &d, 64, 4, 9).unwrap();
    for p in &rep.per_phase {
        assert!(p.estimate.curve.points.iter().all(|&(n, h)| h == n as f64));
    }
    let e = exponent_set(&d, Rational::new(1, 3), 5).unwrap();
    assert_eq!(e, ShapeSet::from(vec![Site::new(0, 0), Site::new(1, 0), Site::new(2, 1), Site::new(3, 2), Site::new(4, 2)]));
}
