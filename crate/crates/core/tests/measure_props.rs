use std::collections::BTreeSet;

use direntropy_core::algebraic::projection_count;
use direntropy_core::entropy::pattern_digits;
use direntropy_core::measures::{pattern_prob, sample_config, sample_config_stream, MeasureModel};
use direntropy_core::systems::validate;
use direntropy_core::{PatternWindow, Rect, ShapeSet, Site, SystemSpec};
use proptest::prelude::*;

/// All valid configurations on the 4×4 box, by exhaustive enumeration.
fn valid_box_configs(spec: &SystemSpec) -> (ShapeSet, Vec<Vec<u8>>) {
    let shape = ShapeSet::rect(&Rect::new(0, 3, 0, 3));
    let valid = (0u64..1 << 16)
        .map(|idx| pattern_digits(idx, 2, 16))
        .filter(|v| validate(spec, &PatternWindow::new(shape.clone(), v.clone()).unwrap()))
        .collect();
    (shape, valid)
}

fn mask_shape(mask: u32) -> ShapeSet {
    (0..16).filter(|k| mask >> k & 1 == 1).map(|k| Site::new(k / 4, k % 4)).collect()
}

fn total_prob(m: &MeasureModel, shape: &ShapeSet, q: u32) -> f64 {
    (0..(q as u64).pow(shape.len() as u32))
        .map(|idx| pattern_prob(m, &PatternWindow::new(shape.clone(), pattern_digits(idx, q, shape.len())).unwrap()).unwrap())
        .sum()
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

#[test]
fn projection_counts_match_brute_force_sample() {
    for spec in [SystemSpec::three_dot(), SystemSpec::algebraic(2, &[((0, 0), 1), ((1, 0), 1), ((1, 1), 1)]).unwrap()] {
        let (bx, valid) = valid_box_configs(&spec);
        for mask in (1u32..1 << 16).step_by(37) {
            let shape = mask_shape(mask);
            let seen: BTreeSet<Vec<u8>> =
                valid.iter().map(|v| shape.iter().map(|s| v[bx.index_of(*s).unwrap()]).collect()).collect();
            let cert = projection_count(&spec, &shape).unwrap();
            assert_eq!(cert.pattern_count(), Some(seen.len() as u128), "mask {mask:#06x}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bernoulli_sums_to_one(p in simplex(3), mask in 1u32..1 << 10) {
        let shape = mask_shape(mask);
        let m = MeasureModel::bernoulli(&p).unwrap();
        prop_assert!((total_prob(&m, &shape, 3) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn row_markov_sums_to_one(r0 in simplex(2), r1 in simplex(2), w in 1i64..5, h in 1i64..4) {
        let m = MeasureModel::row_markov(vec![r0, r1]).unwrap();
        let shape = ShapeSet::rect(&Rect::new(0, w - 1, 0, h - 1));
        prop_assert!((total_prob(&m, &shape, 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn haar_sums_to_one(mask in 1u32..1 << 12) {
        let m = MeasureModel::haar(SystemSpec::three_dot()).unwrap();
        prop_assert!((total_prob(&m, &mask_shape(mask), 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_sums_to_one(mask in 1u32..1 << 8, seed in 0u64..1000) {
        let fs = SystemSpec::full_shift(2).unwrap();
        let samples = (0..4).map(|k| sample_config(&MeasureModel::uniform(2), &fs, Rect::new(0, 7, 0, 7), seed + k).unwrap()).collect();
        let m = MeasureModel::empirical(samples).unwrap();
        prop_assert!((total_prob(&m, &mask_shape(mask), 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn translation_invariance(values in proptest::collection::vec(0u8..2, 6), v in (-30i64..30, -30i64..30), p in simplex(2), r in simplex(2)) {
        let shape = ShapeSet::rect(&Rect::new(0, 2, 0, 1));
        let pat = PatternWindow::new(shape, values).unwrap();
        let moved = pat.translate(Site::from(v));
        for m in [
            MeasureModel::bernoulli(&p).unwrap(),
            MeasureModel::row_markov(vec![p.clone(), r.clone()]).unwrap(),
            MeasureModel::haar(SystemSpec::three_dot()).unwrap(),
        ] {
            prop_assert!((pattern_prob(&m, &pat).unwrap() - pattern_prob(&m, &moved).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn empirical_translation_within_sampling_error() {
    let fs = SystemSpec::full_shift(2).unwrap();
    let samples = (0..40).map(|k| sample_config(&MeasureModel::uniform(2), &fs, Rect::new(0, 39, 0, 39), k).unwrap()).collect();
    let m = MeasureModel::empirical(samples).unwrap();
    let pat = PatternWindow::from_pairs(&[((0, 0), 1), ((1, 0), 0), ((0, 1), 1)]).unwrap();
    let a = pattern_prob(&m, &pat).unwrap();
    let b = pattern_prob(&m, &pat.translate(Site::new(5, -3))).unwrap();
    // relative frequencies over all placements: the translate has the same placements
    assert!((a - b).abs() < 1e-12);
    // about 60k overlapping placements
    assert!((a - 0.125).abs() < 0.01);
}

#[test]
fn sampler_matches_pattern_prob() {
    let count = 100_000u64;
    let rect = Rect::new(0, 1, 0, 1);
    let panel: Vec<(MeasureModel, SystemSpec)> = vec![
        (MeasureModel::bernoulli(&[0.3, 0.7]).unwrap(), SystemSpec::full_shift(2).unwrap()),
        (MeasureModel::row_markov(vec![vec![0.9, 0.1], vec![0.4, 0.6]]).unwrap(), SystemSpec::full_shift(2).unwrap()),
        (MeasureModel::haar(SystemSpec::three_dot()).unwrap(), SystemSpec::three_dot()),
    ];
    let patterns = [
        PatternWindow::from_pairs(&[((0, 0), 0), ((1, 0), 0)]).unwrap(),
        PatternWindow::from_pairs(&[((0, 0), 1), ((0, 1), 1), ((1, 1), 0)]).unwrap(),
        PatternWindow::from_pairs(&[((0, 0), 1), ((1, 0), 1), ((0, 1), 0), ((1, 1), 1)]).unwrap(),
    ];
    for (m, spec) in &panel {
        let mut hits = [0u64; 3];
        for k in 0..count {
            let x = sample_config_stream(m, spec, rect, 11, k).unwrap();
            for (h, p) in hits.iter_mut().zip(&patterns) {
                *h += p.shape().iter().zip(p.values()).all(|(&s, &v)| x.get(s) == Some(v)) as u64;
            }
        }
        for (h, p) in hits.iter().zip(&patterns) {
            let expected = pattern_prob(m, p).unwrap();
            let se = (expected * (1.0 - expected) / count as f64).sqrt();
            let freq = *h as f64 / count as f64;
            assert!((freq - expected).abs() <= 4.0 * se.max(1e-9), "{m:?} {p:?}: {freq} vs {expected}");
        }
    }
}
