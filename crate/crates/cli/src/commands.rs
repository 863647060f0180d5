//! Subcommand bodies. Each returns the filled emitter and the run status.

use direntropy_core::chaos::{asymptotic_test, chaos_ladder, density_probe, entropy_tuple_certify, finite_difference_pair};
use direntropy_core::entropy::{directional_entropy_rate, EntropyEstimate};
use direntropy_core::lattice::format_rational;
use direntropy_core::measures::sample_config_stream;
use direntropy_core::skewprod::{compare_fiber_directional, phase_ladder, sandwich_check};
use direntropy_core::{ConfigWindow, PatternWindow, Rational, Rect, ShapeSet, StripParams, TupleObservation, TupleVerdict};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{read_lines, to_window, PairKind, Resolved};
use crate::output::{num, Emitter};
use crate::{selftest, CliError, Command};

pub type Outcome = (Emitter, Result<(), CliError>);

/// Entropy unit and the factor converting bits into it.
#[derive(Clone, Copy, Debug)]
pub struct Unit {
    pub label: &'static str,
    pub factor: f64,
}

impl Unit {
    pub fn new(nats: bool) -> Self {
        if nats {
            Unit { label: "nats/col", factor: std::f64::consts::LN_2 }
        } else {
            Unit { label: "bits/col", factor: 1.0 }
        }
    }
}

pub fn dispatch(cmd: Command, r: &Resolved, nats: bool) -> Result<Outcome, CliError> {
    let unit = Unit::new(nats);
    match cmd {
        Command::Strip => strip(r, unit),
        Command::Entropy => entropy(r, unit),
        Command::SkewCheck => skew_check(r, unit),
        Command::Chaos => chaos(r, unit),
        Command::Tuples => tuples(r, unit),
        Command::Selftest => selftest::run(r, unit),
    }
}

fn emitter(cmd: Command, r: &Resolved, unit: Unit, columns: &'static [&'static str]) -> Emitter {
    Emitter::new(cmd.name(), &r.config, r.config.output.format, unit.label, columns)
}

fn strip(r: &Resolved, unit: Unit) -> Result<Outcome, CliError> {
    let mut out = emitter(Command::Strip, r, unit, &["b", "N", "m", "n"]);
    let n = r.config.strip.n.unwrap_or(r.config.n_max);
    for &b in &r.config.b_ladder {
        let sites = r.direction.strip(&StripParams::new(b, n)?)?;
        let bs = format_rational(&b);
        for s in sites.iter() {
            out.row(vec![bs.clone(), n.to_string(), s.m.to_string(), s.n.to_string()]);
        }
        out.record("strip", json!({ "b": bs, "N": n, "size": sites.len(), "sites": sites }))?;
    }
    Ok((out, Ok(())))
}

fn estimate_json(e: &EntropyEstimate, unit: Unit) -> serde_json::Value {
    json!({
        "b": format_rational(&e.curve.b),
        "rate": e.rate * unit.factor,
        "slope_se": e.slope_se * unit.factor,
        "fit_window": e.fit_window,
        "method": e.curve.method,
        "unit": unit.label,
        "curve": e.curve.points.iter().map(|&(n, h)| json!({ "N": n, "H": h * unit.factor })).collect::<Vec<_>>(),
    })
}

fn entropy(r: &Resolved, unit: Unit) -> Result<Outcome, CliError> {
    let cols = &["b", "N", "H", "rate", "slope_se", "fit_lo", "fit_hi", "method", "unit"];
    let mut out = emitter(Command::Entropy, r, unit, cols);
    let c = &r.config;
    for &b in &c.b_ladder {
        let e = directional_entropy_rate(&r.measure, &c.system, &c.partition, &r.direction, b, c.n_max)?;
        let method = serde_json::to_value(e.curve.method).map_err(|e| CliError::Io(e.to_string()))?;
        let method = method.as_str().unwrap_or_default().to_string();
        for &(n, h) in &e.curve.points {
            out.row(vec![
                format_rational(&b),
                n.to_string(),
                num(h * unit.factor),
                num(e.rate * unit.factor),
                num(e.slope_se * unit.factor),
                e.fit_window.0.to_string(),
                e.fit_window.1.to_string(),
                method.clone(),
                unit.label.into(),
            ]);
        }
        let mut rec = estimate_json(&e, unit);
        rec["N_max"] = json!(c.n_max);
        out.record("entropy", rec)?;
    }
    Ok((out, Ok(())))
}

fn skew_check(r: &Resolved, unit: Unit) -> Result<Outcome, CliError> {
    let mut out = emitter(Command::SkewCheck, r, unit, &["t", "N_max", "rate", "slope_se", "unit"]);
    let c = &r.config;
    let phases = phase_ladder(c.skew.sandwich_phases, c.seed);
    let holds = phases.par_iter().map(|&t| sandwich_check(&r.direction, t, c.n_max)).collect::<Result<Vec<_>, _>>()?;
    let mut failed = Vec::new();
    for (t, ok) in phases.iter().zip(holds) {
        out.record("sandwich", json!({ "t": format_rational(t), "N": c.n_max, "holds": ok }))?;
        if !ok {
            failed.push(format_rational(t));
        }
    }
    let cmp = compare_fiber_directional(&r.measure, &c.system, &c.partition, &r.direction, c.n_max, c.skew.phases, c.seed)?;
    for p in &cmp.fiber.per_phase {
        let (t, rate, se) = (format_rational(&p.t), p.estimate.rate * unit.factor, p.estimate.slope_se * unit.factor);
        out.row(vec![t.clone(), c.n_max.to_string(), num(rate), num(se), unit.label.into()]);
        let mut rec = estimate_json(&p.estimate, unit);
        rec["t"] = json!(t);
        rec["N_max"] = json!(c.n_max);
        out.record("phase", rec)?;
    }
    out.record(
        "comparison",
        json!({
            "N_max": c.n_max,
            "phases": c.skew.phases,
            "directional": estimate_json(&cmp.directional, unit),
            "fiber_mean_rate": cmp.fiber.mean_rate * unit.factor,
            "fiber_phase_spread": cmp.fiber.phase_spread * unit.factor,
            "fiber_mean_slope_se": cmp.fiber.mean_slope_se * unit.factor,
            "difference": cmp.difference * unit.factor,
            "tolerance": cmp.tolerance * unit.factor,
            "within_tolerance": cmp.within_tolerance,
            "unit": unit.label,
        }),
    )?;
    let status = if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("sandwich inclusion fails at t = {}", failed.join(", "))))
    };
    Ok((out, status))
}

/// One observed tuple of the chaos panel.
struct Observed {
    index: usize,
    pair: &'static str,
    tuple: TupleObservation,
    /// Horizon of the asymptotic test.
    k: Option<i64>,
}

/// Window holding every ladder strip and the asymptotic test columns.
fn chaos_rect(r: &Resolved, m_hi: i64) -> Result<Rect, CliError> {
    let c = &r.config.chaos;
    let rad = c.radius as i64;
    let (mut lo, mut hi) = (-c.diff_radius, c.diff_radius);
    for &b in &r.config.b_ladder {
        for m in [0, m_hi] {
            let (a, z) = r.direction.strip_column(b, m)?;
            lo = lo.min(a);
            hi = hi.max(z);
        }
    }
    Ok(Rect::new(-(rad + c.diff_radius), m_hi + rad, lo - rad, hi + rad))
}

/// Columns checked by each asymptotic test beyond its horizon.
const VERIFY_WIDTH: i64 = 32;

fn sampled_tuples(r: &Resolved) -> Result<(Vec<Observed>, Vec<serde_json::Value>), CliError> {
    let c = &r.config.chaos;
    let cfg = &r.config;
    let max_n = c.n_ladder.iter().copied().max().unwrap_or(1) as i64;
    let window = ShapeSet::rect(&Rect::centered(c.diff_radius));
    let need = (1.0 / c.eps).log2().ceil().max(0.0) as i64;
    let mut notes = Vec::new();
    // the support bound depends only on the window and the bottom row
    let probe_rect = chaos_rect(r, max_n)?;
    let zeros = ConfigWindow::zeros(probe_rect);
    let support = match finite_difference_pair(&r.measure, &cfg.system, &zeros, &zeros, &window) {
        Ok((_, bound)) => Some(bound),
        Err(e) => {
            notes.push(json!({ "pair": "finite-difference", "skipped": e.to_string() }));
            None
        }
    };
    let k = support.map(|s| c.horizon.max(s + need + 1));
    let m_hi = max_n.max(k.unwrap_or(0) + VERIFY_WIDTH).min(r.direction.horizon() as i64);
    let rect = chaos_rect(r, m_hi)?;
    let per_trial = (0..c.trials)
        .into_par_iter()
        .map(|t| {
            let mut found = Vec::new();
            for &kind in &c.pairs {
                let (name, tuple) = match kind {
                    PairKind::Independent => {
                        let x = sample_config_stream(&r.measure, &cfg.system, rect, cfg.seed, 4 * t)?;
                        let y = sample_config_stream(&r.measure, &cfg.system, rect, cfg.seed, 4 * t + 1)?;
                        ("independent", vec![x, y])
                    }
                    PairKind::FiniteDifference => {
                        if support.is_none() {
                            continue;
                        }
                        let x1 = sample_config_stream(&r.measure, &cfg.system, rect, cfg.seed, 4 * t + 2)?;
                        let x2 = sample_config_stream(&r.measure, &cfg.system, rect, cfg.seed, 4 * t + 3)?;
                        let (y, _) = finite_difference_pair(&r.measure, &cfg.system, &x1, &x2, &window)?;
                        ("finite-difference", vec![x1, y])
                    }
                };
                found.push((name, TupleObservation::new(tuple, c.radius)?));
            }
            Ok(found)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = Vec::new();
    for (t, found) in per_trial.into_iter().enumerate() {
        for (pair, tuple) in found {
            out.push(Observed { index: t, pair, tuple, k: if pair == "independent" { Some(c.horizon) } else { k } });
        }
    }
    Ok((out, notes))
}

fn supplied_tuples(r: &Resolved, path: &std::path::Path) -> Result<Vec<Observed>, CliError> {
    let lines: Vec<Vec<PatternWindow>> = read_lines(&r.input_path(path))?;
    lines
        .iter()
        .enumerate()
        .map(|(i, ws)| {
            let configs = ws.iter().map(to_window).collect::<Result<Vec<_>, _>>()?;
            let tuple = TupleObservation::new(configs, r.config.chaos.radius).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Observed { index: i, pair: "supplied", tuple, k: Some(r.config.chaos.horizon) })
        })
        .collect()
}

fn chaos(r: &Resolved, unit: Unit) -> Result<Outcome, CliError> {
    let cols = &["tuple", "pair", "b", "N", "prox", "sep", "floor", "near_floor"];
    let mut out = emitter(Command::Chaos, r, unit, cols);
    let c = &r.config.chaos;
    let (observed, notes) = match &c.tuples_file {
        Some(p) => (supplied_tuples(r, p)?, Vec::new()),
        None => sampled_tuples(r)?,
    };
    for n in notes {
        out.record("note", n)?;
    }
    let max_n = c.n_ladder.iter().copied().max();
    let mut min_sep: Vec<Option<f64>> = vec![None; r.config.b_ladder.len()];
    for o in &observed {
        for (bi, &b) in r.config.b_ladder.iter().enumerate() {
            let ladder = chaos_ladder(&o.tuple, &r.direction, b, &c.n_ladder)?;
            for a in &ladder {
                let near = a.prox_near_floor(c.floor_tol);
                out.row(vec![
                    o.index.to_string(),
                    o.pair.into(),
                    format_rational(&b),
                    a.n.to_string(),
                    num(a.prox),
                    num(a.sep),
                    num(a.floor),
                    near.to_string(),
                ]);
                let mut rec = serde_json::to_value(a).map_err(|e| CliError::Io(e.to_string()))?;
                rec["tuple"] = json!(o.index);
                rec["pair"] = json!(o.pair);
                rec["near_floor"] = json!(near);
                out.record("average", rec)?;
                if o.pair == "independent" && Some(a.n) == max_n {
                    let m = &mut min_sep[bi];
                    *m = Some(m.map_or(a.sep, |v| v.min(a.sep)));
                }
            }
            if let Some(k) = o.k {
                let rep = asymptotic_test(&o.tuple, &r.direction, b, k, c.eps, false)?;
                let mut rec = serde_json::to_value(&rep).map_err(|e| CliError::Io(e.to_string()))?;
                rec["tuple"] = json!(o.index);
                rec["pair"] = json!(o.pair);
                out.record("asymptotic", rec)?;
            }
        }
    }
    for (b, m) in r.config.b_ladder.iter().zip(min_sep) {
        if let Some(sep) = m {
            out.record("separation", json!({ "b": format_rational(b), "N": max_n, "min_sep": sep, "trials": c.trials }))?;
        }
    }
    Ok((out, Ok(())))
}

/// A verdict with its entropy evidence in the requested unit.
fn verdict_json(v: &TupleVerdict, unit: Unit) -> Result<serde_json::Value, CliError> {
    let mut rec = serde_json::to_value(v).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(rate) = v.evidence.rate {
        rec["evidence"]["rate"] = json!(rate * unit.factor);
    }
    if let Some(se) = v.evidence.rate_se {
        rec["evidence"]["rate_se"] = json!(se * unit.factor);
    }
    Ok(rec)
}

fn tuples(r: &Resolved, unit: Unit) -> Result<Outcome, CliError> {
    let cols = &["index", "status", "attempts", "lambda", "rate", "support_bound", "asym_b1", "asym_b3"];
    let mut out = emitter(Command::Tuples, r, unit, cols);
    let c = &r.config;
    let t = &c.tuples;
    let declared = c.declarations.trivial_pinsker;
    for (i, cyl) in t.cylinders.iter().enumerate() {
        let v = entropy_tuple_certify(&r.measure, &c.system, cyl, &r.direction, t.b, t.n_max, t.tol, declared)?;
        let mut rec = json!({ "verdict": verdict_json(&v, unit)? });
        rec["index"] = json!(i);
        rec["cylinders"] = json!(cyl);
        rec["unit"] = json!(unit.label);
        out.record("certify", rec)?;
    }
    if t.budget > 0 {
        let rep = density_probe(&r.measure, &c.system, &r.direction, t.budget, c.seed, &r.probe_config())?;
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        for o in &rep.neighborhoods {
            let ev = o.certify.as_ref().map(|v| &v.evidence);
            let asym = |b: i64| {
                o.asymptotic
                    .iter()
                    .find(|a| a.b == Rational::from_integer(b) && !a.reverse)
                    .map(|a| a.asymptotic.to_string())
                    .unwrap_or_default()
            };
            let status = serde_json::to_value(o.status).map_err(|e| CliError::Io(e.to_string()))?;
            out.row(vec![
                o.index.to_string(),
                status.as_str().unwrap_or_default().into(),
                o.attempts.to_string(),
                opt(ev.and_then(|e| e.lambda)),
                opt(ev.and_then(|e| e.rate).map(|x| x * unit.factor)),
                o.support_bound.map(|c| c.to_string()).unwrap_or_default(),
                asym(1),
                asym(3),
            ]);
            let mut rec = serde_json::to_value(o).map_err(|e| CliError::Io(e.to_string()))?;
            if let Some(v) = &o.certify {
                rec["certify"] = verdict_json(v, unit)?;
            }
            rec["unit"] = json!(unit.label);
            out.record("neighborhood", rec)?;
        }
        out.record(
            "probe",
            json!({
                "budget": t.budget,
                "certified": rep.certified,
                "found": rep.found,
                "inconclusive": rep.inconclusive,
                "fraction": rep.fraction,
                "probe": r.probe_config(),
            }),
        )?;
    }
    Ok((out, Ok(())))
}
