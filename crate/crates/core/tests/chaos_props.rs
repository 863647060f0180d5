use direntropy_core::chaos::{asymptotic_test, chaos_averages, entropy_tuple_certify, lambda_n_product, VerdictKind};
use direntropy_core::measures::{sample_config_stream, MeasureModel};
use direntropy_core::{ConfigWindow, DirectionSpec, PatternWindow, Rational, Rect, SystemSpec, TupleObservation};
use proptest::prelude::*;

fn golden() -> DirectionSpec {
    DirectionSpec::golden(1000).unwrap()
}

fn rect() -> Rect {
    Rect::new(-30, 70, -30, 60)
}

fn sample(seed: u64, stream: u64) -> ConfigWindow {
    sample_config_stream(&MeasureModel::uniform(2), &SystemSpec::full_shift(2).unwrap(), rect(), seed, stream).unwrap()
}

/// `x` with the sites of sup-radius `<= d` replaced by bits of `flips`.
fn perturbed(x: &ConfigWindow, d: i64, flips: u64) -> ConfigWindow {
    let mut y = x.clone();
    for (k, s) in Rect::centered(d).sites().enumerate() {
        y.set(s, x.get(s).unwrap() ^ (flips >> (k % 64) & 1) as u8).unwrap();
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn averages_symmetric_under_permutation(seed in any::<u32>(), n in 1u64..40) {
        let (a, b, c) = (sample(seed as u64, 0), sample(seed as u64, 1), perturbed(&sample(seed as u64, 0), 2, 0b1011));
        let d = golden();
        let one = Rational::from_integer(1);
        let base = chaos_averages(&TupleObservation::new(vec![a.clone(), b.clone(), c.clone()], 4).unwrap(), &d, one, n).unwrap();
        for perm in [vec![b.clone(), a.clone(), c.clone()], vec![c.clone(), b.clone(), a.clone()], vec![a.clone(), c.clone(), b.clone()]] {
            let other = chaos_averages(&TupleObservation::new(perm, 4).unwrap(), &d, one, n).unwrap();
            prop_assert_eq!(&base, &other);
        }
        prop_assert!(base.sep <= base.prox);
        prop_assert!(base.floor <= base.sep && base.prox <= 1.0);
    }

    #[test]
    fn pairs_collapse(seed in any::<u32>(), flips in any::<u64>(), n in 1u64..40, k in 0usize..3) {
        let b = [Rational::new(1, 2), Rational::from_integer(1), Rational::from_integer(3)][k];
        let x = sample(seed as u64, 0);
        for y in [sample(seed as u64, 1), perturbed(&x, 1, flips)] {
            let a = chaos_averages(&TupleObservation::new(vec![x.clone(), y], 4).unwrap(), &golden(), b, n).unwrap();
            prop_assert_eq!(a.prox, a.sep);
        }
    }

    #[test]
    fn finite_differences_are_asymptotic(seed in any::<u32>(), flips in 1u64.., d in 0i64..4, e in 1u32..5) {
        let eps = (-(e as f64)).exp2();
        let x = sample(seed as u64, 0);
        let t = TupleObservation::new(vec![x.clone(), perturbed(&x, d, flips)], 6).unwrap();
        let k = d + e as i64 + 1;
        for b in [1, 3] {
            let rep = asymptotic_test(&t, &golden(), Rational::from_integer(b), k, eps, false).unwrap();
            prop_assert!(rep.asymptotic && rep.width > 0);
            let rev = asymptotic_test(&t, &golden(), Rational::from_integer(b), k, eps, true).unwrap();
            prop_assert!(rev.asymptotic);
        }
    }

    #[test]
    fn asymptotic_verdict_monotone_in_b(seed in any::<u32>(), flips in any::<u64>(), d in 0i64..4, k in 0i64..12, independent in any::<bool>()) {
        let x = sample(seed as u64, 0);
        let y = if independent { sample(seed as u64, 1) } else { perturbed(&x, d, flips) };
        let t = TupleObservation::new(vec![x, y], 4).unwrap();
        let v: Vec<bool> = [1, 3]
            .iter()
            .map(|&b| asymptotic_test(&t, &golden(), Rational::from_integer(b), k, 0.25, false).unwrap().asymptotic)
            .collect();
        // the wider strip sees every near site of the narrower one
        prop_assert!(!v[1] || v[0]);
        // past the reach of the changed box the width no longer matters
        if independent || k > d + 4 {
            prop_assert_eq!(v[0], v[1]);
        }
    }

    #[test]
    fn certified_tuples_lie_off_diagonal(a in proptest::collection::vec(0u8..2, 3), b in proptest::collection::vec(0u8..2, 3), haar in any::<bool>()) {
        let (m, spec) = if haar {
            (MeasureModel::haar(SystemSpec::three_dot()).unwrap(), SystemSpec::three_dot())
        } else {
            (MeasureModel::uniform(2), SystemSpec::full_shift(2).unwrap())
        };
        let shape = [((0, 0), 0), ((1, 0), 0), ((0, 1), 0)];
        let cyl = |v: &[u8]| {
            let pairs: Vec<((i64, i64), u8)> = shape.iter().zip(v).map(|(&(s, _), &x)| (s, x)).collect();
            PatternWindow::from_pairs(&pairs).unwrap()
        };
        let (u1, u2) = (cyl(&a), cyl(&b));
        let v = entropy_tuple_certify(&m, &spec, &[u1.clone(), u2.clone()], &golden(), Rational::from_integer(1), 16, 1e-3, true).unwrap();
        if u1 == u2 {
            prop_assert_eq!(v.kind, VerdictKind::Rejected);
            prop_assert!(v.evidence.diagonal);
        }
        if v.kind == VerdictKind::EntropyTupleCertified {
            prop_assert!(u1 != u2);
            prop_assert!(lambda_n_product(&m, &[u1, u2], true).unwrap() > 0.0);
        }
    }
}

#[test]
fn independent_pairs_separate() {
    for seed in 0..10 {
        let t = TupleObservation::new(vec![sample(seed, 0), sample(seed, 1)], 4).unwrap();
        assert!(!asymptotic_test(&t, &golden(), Rational::from_integer(1), 5, 0.25, false).unwrap().asymptotic);
    }
}

#[test]
fn invalid_three_dot_cylinder_is_rejected() {
    let td = SystemSpec::three_dot();
    let haar = MeasureModel::haar(td.clone()).unwrap();
    let bad = PatternWindow::from_pairs(&[((0, 0), 1), ((1, 0), 0), ((0, 1), 0)]).unwrap();
    let good = PatternWindow::from_pairs(&[((0, 0), 0), ((1, 0), 0), ((0, 1), 0)]).unwrap();
    let v = entropy_tuple_certify(&haar, &td, &[bad, good], &golden(), Rational::from_integer(1), 16, 1e-3, true).unwrap();
    assert_eq!(v.kind, VerdictKind::Rejected);
    assert_eq!(v.evidence.lambda, Some(0.0));
}
