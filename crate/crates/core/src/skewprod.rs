//! The rotation-cocycle skew product `(t, x) ↦ (t + β mod 1, T^{(1, ⌊β+t⌋)} x)`.
//!
//! The base rotation is never iterated in floating point: only the exact
//! exponent sequence `(i, ⌊iβ + t⌋)` enters the fiber entropy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{directional_entropy_rate, rate_over, EntropyEstimate, PartitionSpec};
use crate::error::{Error, Result};
use crate::lattice::{check_phase, rational_str, DirectionSpec, Rational, ShapeSet, Site, StripParams};
use crate::measures::MeasureModel;
use crate::systems::SystemSpec;

/// Phase ladder multiplier: the plastic-number constant to ten digits.
const GAMMA_NUM: u128 = 7_548_776_662;
const GAMMA_DEN: u128 = 10_000_000_000;
/// Ladder phases are truncated to this denominator.
const PHASE_DEN: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocycleExponent {
    pub i: u64,
    #[serde(with = "rational_str")]
    pub t: Rational,
    pub vec: Site,
}

/// The composed cocycle `φ(i, t)` as the lattice vector `(i, ⌊iβ + t⌋)`.
pub fn cocycle_exponent(dir: &DirectionSpec, t: Rational, i: u64) -> Result<CocycleExponent> {
    let ii = i as i64;
    let n = dir.floor_affine(t, ii)?;
    if i > 0 {
        // one split of the composition law, checked on every call
        let j = ii / 2;
        let left = dir.floor_affine(t, j)?;
        let right = dir.floor_affine(dir.rotate(t, j)?, ii - j)?;
        if left + right != n {
            return Err(Error::InvariantViolation(format!("cocycle law fails at i = {i}")));
        }
    }
    Ok(CocycleExponent { i, t, vec: Site::new(ii, n) })
}

/// `{(i, ⌊iβ + t⌋) : 0 <= i < N}`.
pub fn exponent_set(dir: &DirectionSpec, t: Rational, n: u64) -> Result<ShapeSet> {
    check_phase(t)?;
    (0..n as i64).map(|i| dir.floor_affine(t, i).map(|k| Site::new(i, k))).collect::<Result<Vec<_>>>().map(ShapeSet::from)
}

/// `t_k = frac((seed + k) γ)` truncated to denominator `10^6`.
pub fn phase_ladder(count: usize, seed: u64) -> Vec<Rational> {
    (0..count as u128)
        .map(|k| {
            let x = ((seed as u128 + k) * GAMMA_NUM) % GAMMA_DEN;
            let num = x * PHASE_DEN / GAMMA_DEN;
            Rational::new(num as i64, PHASE_DEN as i64)
        })
        .collect()
}

/// Both exact inclusions `E₀ ⊆ Λ_N(1) ⊆ E±` for phase `t`, where `E₀` is
/// the exponent set and `E±` its vertical ±1 thickening.
pub fn sandwich_check(dir: &DirectionSpec, t: Rational, n: u64) -> Result<bool> {
    let strip = dir.strip(&StripParams::new(Rational::from_integer(1), n)?)?;
    let e0 = exponent_set(dir, t, n)?;
    if !e0.is_subset(&strip) {
        return Ok(false);
    }
    let thick = e0.minkowski(&ShapeSet::from_pairs(&[(0, -1), (0, 0), (0, 1)]));
    Ok(strip.is_subset(&thick))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRate {
    #[serde(with = "rational_str")]
    pub t: Rational,
    pub estimate: EntropyEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberEntropyReport {
    pub per_phase: Vec<PhaseRate>,
    /// Bits per column.
    pub mean_rate: f64,
    pub phase_spread: f64,
    /// Mean of the per-phase slope standard errors.
    pub mean_slope_se: f64,
}

/// Entropy rate of `part` joined over the exponent sets of each ladder phase.
pub fn fiber_entropy_estimate(
    m: &MeasureModel,
    spec: &SystemSpec,
    part: &PartitionSpec,
    dir: &DirectionSpec,
    n_max: u64,
    phase_count: usize,
    seed: u64,
) -> Result<FiberEntropyReport> {
    if phase_count == 0 {
        return Err(Error::InvalidArgument("phase_count must be at least 1".into()));
    }
    if n_max > dir.horizon() {
        return Err(Error::HorizonExceeded { index: n_max as i64, horizon: dir.horizon() });
    }
    let phases = phase_ladder(phase_count, seed);
    let per_phase = phases
        .par_iter()
        .map(|&t| {
            let estimate = rate_over(m, spec, part, Rational::from_integer(1), n_max, |n| exponent_set(dir, t, n))?;
            Ok(PhaseRate { t, estimate })
        })
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = per_phase.iter().map(|p| p.estimate.rate).collect();
    let k = rates.len() as f64;
    let mean_rate = rates.iter().sum::<f64>() / k;
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_slope_se = per_phase.iter().map(|p| p.estimate.slope_se).sum::<f64>() / k;
    Ok(FiberEntropyReport { per_phase, mean_rate, phase_spread: max - min, mean_slope_se })
}

/// Finite-scale comparison of the fiber side with the directional side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberComparison {
    /// `α` at `b = 1`.
    pub directional: EntropyEstimate,
    /// `α ∨ T^{-(0,1)} α` over the exponent sets.
    pub fiber: FiberEntropyReport,
    pub difference: f64,
    /// `2 (slope_se_directional + mean_slope_se_fiber)`.
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// Compares the directional rate of `α` at `b = 1` with the fiber rate of
/// the vertical pair `α ∨ T^{-(0,1)} α`. For `m >= 1` the strip column
/// `Λ(1) ∩ {m} × Z` is `{⌊mβ⌋, ⌊mβ⌋ + 1}`, which is what the pair reads
/// along the exponent sets.
pub fn compare_fiber_directional(
    m: &MeasureModel,
    spec: &SystemSpec,
    part: &PartitionSpec,
    dir: &DirectionSpec,
    n_max: u64,
    phase_count: usize,
    seed: u64,
) -> Result<FiberComparison> {
    let directional = directional_entropy_rate(m, spec, part, dir, Rational::from_integer(1), n_max)?;
    let pair = part.thicken(spec.alphabet_size(), &[0, 1])?;
    let fiber = fiber_entropy_estimate(m, spec, &pair, dir, n_max, phase_count, seed)?;
    let difference = (fiber.mean_rate - directional.rate).abs();
    let tolerance = 2.0 * (directional.slope_se + fiber.mean_slope_se);
    Ok(FiberComparison { within_tolerance: difference <= tolerance, directional, fiber, difference, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    fn golden() -> DirectionSpec {
        DirectionSpec::golden(1000).unwrap()
    }

    #[test]
    fn exponent_examples() {
        let d = golden();
        assert_eq!(cocycle_exponent(&d, r(0, 1), 0).unwrap().vec, Site::new(0, 0));
        assert_eq!(cocycle_exponent(&d, r(0, 1), 4).unwrap().vec, Site::new(4, 2));
        assert_eq!(cocycle_exponent(&d, r(1, 2), 2).unwrap().vec, Site::new(2, 1));
        assert!(matches!(cocycle_exponent(&d, r(0, 1), 1001), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn sandwich_examples() {
        let d = golden();
        for (t, n) in [(r(0, 1), 1), (r(0, 1), 64), (r(3, 7), 64)] {
            assert!(sandwich_check(&d, t, n).unwrap());
        }
    }

    #[test]
    fn phase_ladder_values() {
        let l = phase_ladder(3, 0);
        assert_eq!(l[0], r(0, 1));
        assert_eq!(l[1], r(754_877, 1_000_000));
        // 2 * 0.7548776662 = 1.5097553324
        assert_eq!(l[2], r(509_755, 1_000_000));
        assert!(l.iter().all(|t| *t >= r(0, 1) && *t < r(1, 1)));
    }

    #[test]
    fn fiber_examples() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let z = PartitionSpec::zero_coordinate();
        let rep = fiber_entropy_estimate(&MeasureModel::uniform(2), &fs, &z, &golden(), 64, 8, 1).unwrap();
        assert!(rep.per_phase.iter().all(|p| p.estimate.rate == 1.0));
        assert_eq!(rep.mean_rate, 1.0);
        let pm = MeasureModel::point_mass(2, 0).unwrap();
        assert_eq!(fiber_entropy_estimate(&pm, &fs, &z, &golden(), 32, 2, 1).unwrap().mean_rate, 0.0);
    }
}
