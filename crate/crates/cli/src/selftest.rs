//! Desk-scale invariant suite behind the `selftest` subcommand.

use std::collections::BTreeSet;

use direntropy_core::algebraic::projection_count;
use direntropy_core::chaos::chaos_averages;
use direntropy_core::entropy::{pattern_digits, shape_entropy, shape_entropy_with_method, PartitionSpec};
use direntropy_core::lattice::format_rational;
use direntropy_core::measures::{pattern_prob, sample_config_stream, MeasureModel};
use direntropy_core::skewprod::{compare_fiber_directional, exponent_set, phase_ladder, sandwich_check};
use direntropy_core::systems::{distance_at, validate};
use direntropy_core::{Error, PatternWindow, Rational, Rect, ShapeSet, Site, StripParams, SystemSpec, TupleObservation};
use serde::Serialize;

use crate::commands::{Outcome, Unit};
use crate::config::Resolved;
use crate::output::Emitter;
use crate::{CliError, Command};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

type Checks = Result<Vec<Check>, Error>;

fn strip_counts(r: &Resolved) -> Checks {
    let mut out = Vec::new();
    for &b in &r.config.b_ladder {
        let base = (b * 2).floor().to_integer();
        let n = r.config.n_max;
        let mut bad = None;
        for m in 0..n as i64 {
            let (lo, hi) = r.direction.strip_column(b, m)?;
            let count = hi - lo + 1;
            if count != base && count != base + 1 {
                bad = Some((m, count));
                break;
            }
        }
        let strip = r.direction.strip(&StripParams::new(b, n)?)?;
        let sorted = strip.sites().windows(2).all(|w| w[0] < w[1]);
        let detail = match bad {
            Some((m, c)) => format!("column {m} holds {c} sites"),
            None => format!("{} sites over {n} columns", strip.len()),
        };
        out.push(check(&format!("strip columns b={}", format_rational(&b)), bad.is_none() && sorted, detail));
    }
    Ok(out)
}

fn exponents_and_sandwich(r: &Resolved) -> Checks {
    let n = r.config.n_max;
    let phases = phase_ladder(16, r.config.seed);
    let strip = r.direction.strip(&StripParams::new(Rational::from_integer(1), n)?)?;
    let mut inside = true;
    let mut sandwich = true;
    for &t in &phases {
        inside &= exponent_set(&r.direction, t, n)?.is_subset(&strip);
        sandwich &= sandwich_check(&r.direction, t, n)?;
    }
    Ok(vec![
        check("exponents inside strip", inside, format!("{} phases, N = {n}", phases.len())),
        check("sandwich inclusions", sandwich, format!("{} phases, N = {n}", phases.len())),
    ])
}

/// Rank counts against exhaustive projection of valid 3×3 box patterns.
fn rank_oracle(r: &Resolved) -> Checks {
    let mut systems = vec![SystemSpec::three_dot()];
    if matches!(r.config.system, SystemSpec::AlgebraicSubshift { .. }) && r.config.system.alphabet_size().pow(9) <= 1 << 16 {
        systems.push(r.config.system.clone());
    }
    let mut out = Vec::new();
    for spec in systems {
        let q = spec.alphabet_size();
        let bx = ShapeSet::rect(&Rect::new(0, 2, 0, 2));
        let valid: Vec<Vec<u8>> = (0..(q as u64).pow(9))
            .map(|i| pattern_digits(i, q, 9))
            .filter(|v| PatternWindow::new(bx.clone(), v.clone()).is_ok_and(|p| validate(&spec, &p)))
            .collect();
        let mut mismatch = None;
        for mask in 1u32..1 << 9 {
            let shape: ShapeSet = (0..9).filter(|k| mask >> k & 1 == 1).map(|k| Site::new(k / 3, k % 3)).collect();
            let seen: BTreeSet<Vec<u8>> = valid.iter().map(|v| shape.iter().map(|s| v[bx.index_of(*s).unwrap()]).collect()).collect();
            if projection_count(&spec, &shape)?.pattern_count() != Some(seen.len() as u128) {
                mismatch = Some(mask);
                break;
            }
        }
        let detail = match mismatch {
            Some(m) => format!("shape mask {m:#05x} disagrees"),
            None => "511 shapes in the 3x3 box".into(),
        };
        out.push(check(&format!("rank oracle q={q}"), mismatch.is_none(), detail));
    }
    Ok(out)
}

fn exact_identities(r: &Resolved) -> Checks {
    let fs = SystemSpec::full_shift(2)?;
    let u = MeasureModel::uniform(2);
    let z = PartitionSpec::zero_coordinate();
    let n = r.config.n_max.min(64);
    let mut out = Vec::new();
    for &b in &r.config.b_ladder {
        let strip = r.direction.strip(&StripParams::new(b, n)?)?;
        let h = shape_entropy(&u, &fs, &strip, &z)?;
        out.push(check(
            &format!("uniform strip entropy b={}", format_rational(&b)),
            h == strip.len() as f64,
            format!("H = {h} over {} sites", strip.len()),
        ));
    }
    let pm = MeasureModel::point_mass(2, 1)?;
    let strip = r.direction.strip(&StripParams::new(Rational::from_integer(1), n)?)?;
    let h = shape_entropy(&pm, &fs, &strip, &z)?;
    out.push(check("point mass entropy", h == 0.0, format!("H = {h}")));
    let cmp = compare_fiber_directional(&u, &fs, &z, &r.direction, 32.min(r.direction.horizon()), 4, r.config.seed)?;
    out.push(check("fiber equals directional (uniform)", cmp.within_tolerance, format!("difference {}", cmp.difference)));
    Ok(out)
}

/// Normalization, translation invariance and monotonicity of the configured measure.
fn measure_checks(r: &Resolved) -> Checks {
    let m = &r.measure;
    let q = r.config.system.alphabet_size();
    let shape = ShapeSet::from_pairs(&[(0, 0), (1, 0), (0, 1)]);
    let shift = Site::new(3, -2);
    let mut total = 0.0;
    let mut drift: f64 = 0.0;
    for i in 0..(q as u64).pow(3) {
        let p = PatternWindow::new(shape.clone(), pattern_digits(i, q, 3))?;
        let a = pattern_prob(m, &p)?;
        drift = drift.max((a - pattern_prob(m, &p.translate(shift))?).abs());
        total += a;
    }
    let mut out = vec![
        check("measure normalized", (total - 1.0).abs() < 1e-9, format!("total {total}")),
        check("measure translation invariant", drift < 1e-9, format!("largest change {drift}")),
    ];
    let z = &r.config.partition;
    let one = Rational::from_integer(1);
    let mut prev: Option<f64> = None;
    let mut monotone = true;
    let mut reached = 0;
    for n in 1..=8u64.min(r.config.n_max) {
        let strip = r.direction.strip(&StripParams::new(one, n)?)?;
        match shape_entropy_with_method(m, &r.config.system, &strip, z) {
            Ok((h, _)) => {
                monotone &= prev.is_none_or(|p| h >= p - 1e-9);
                prev = Some(h);
                reached = n;
            }
            Err(Error::UnsupportedExact(_)) => break,
            Err(e) => return Err(e),
        }
    }
    out.push(check("strip entropy monotone", monotone, format!("exact up to N = {reached}")));
    Ok(out)
}

fn sampling_checks(r: &Resolved) -> Checks {
    let rect = Rect::centered(12);
    let (m, spec, seed) = (&r.measure, &r.config.system, r.config.seed);
    let x = sample_config_stream(m, spec, rect, seed, 0)?;
    let again = sample_config_stream(m, spec, rect, seed, 0)?;
    let mut out = vec![
        check("sampler reproducible", x == again, "same seed and stream"),
        check("samples lie in the system", validate(spec, &x.as_pattern()), format!("{} sites", rect.area())),
    ];
    // finite differences within radius d fade with the distance of the centre
    let fs = SystemSpec::full_shift(2)?;
    let a = sample_config_stream(&MeasureModel::uniform(2), &fs, rect, seed, 1)?;
    let mut b = a.clone();
    let d = 2;
    for s in Rect::centered(d).sites() {
        b.set(s, 1 - a.get(s).unwrap())?;
    }
    let radius = 4;
    let mut held = true;
    for v in Rect::centered(12 - radius as i64).sites() {
        let bound = (-((v.sup_norm() - d - 1) as f64)).exp2().clamp((-(radius as f64 + 1.0)).exp2(), 1.0);
        held &= distance_at(&a, &b, v, radius)? <= bound;
    }
    out.push(check("finite-difference distance bound", held, format!("changes within radius {d}")));
    let c = sample_config_stream(&MeasureModel::uniform(2), &fs, Rect::new(-8, 40, -8, 40), seed, 2)?;
    let e = sample_config_stream(&MeasureModel::uniform(2), &fs, Rect::new(-8, 40, -8, 40), seed, 3)?;
    let f = sample_config_stream(&MeasureModel::uniform(2), &fs, Rect::new(-8, 40, -8, 40), seed, 4)?;
    let avg = |t: Vec<_>| chaos_averages(&TupleObservation::new(t, radius).unwrap(), &r.direction, Rational::from_integer(1), 24);
    let first = avg(vec![c.clone(), e.clone(), f.clone()])?;
    let second = avg(vec![f, c, e])?;
    out.push(check("chaos averages symmetric", first == second && first.sep <= first.prox, format!("prox {}", first.prox)));
    Ok(out)
}

/// Runs every check; a failing check makes the status an invariant violation.
pub fn suite(r: &Resolved) -> Result<Vec<Check>, CliError> {
    let groups: [fn(&Resolved) -> Checks; 6] = [strip_counts, exponents_and_sandwich, rank_oracle, exact_identities, measure_checks, sampling_checks];
    let mut out = Vec::new();
    for g in groups {
        out.extend(g(r)?);
    }
    Ok(out)
}

pub fn run(r: &Resolved, unit: Unit) -> Result<Outcome, CliError> {
    let mut out = Emitter::new(Command::Selftest.name(), &r.config, r.config.output.format, unit.label, &["name", "passed", "detail"]);
    let checks = suite(r)?;
    for c in &checks {
        out.row(vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]);
        out.record("check", c)?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let status = if failed.is_empty() { Ok(()) } else { Err(CliError::Invariant(format!("failed checks: {}", failed.join(", ")))) };
    Ok((out, status))
}
