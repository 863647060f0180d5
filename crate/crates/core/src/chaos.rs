//! Strip-averaged pair distances, finite-horizon asymptotic tuples and
//! entropy-tuple certificates along a direction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::Propagator;
use crate::entropy::{directional_entropy_rate_with, Method, PartitionSpec, RatePath, ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::gf::solve;
use crate::lattice::{rational_str, DirectionSpec, Rational, Rect, ShapeSet, Site, StripParams};
use crate::measures::{haar_system, pattern_prob, sample_config_stream, MeasureModel};
use crate::systems::{distance_exponent, validate, ConfigWindow, PatternWindow, SystemSpec};

/// `n >= 2` configurations on one rectangle, compared at metric radius `radius`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleObservation {
    configs: Vec<ConfigWindow>,
    radius: u32,
}

impl TupleObservation {
    pub fn new(configs: Vec<ConfigWindow>, radius: u32) -> Result<Self> {
        if configs.len() < 2 {
            return Err(Error::InvalidArgument("a tuple needs at least two configurations".into()));
        }
        let rect = *configs[0].rect();
        if configs.iter().any(|c| *c.rect() != rect) {
            return Err(Error::InvalidArgument("tuple windows must share one rectangle".into()));
        }
        Ok(TupleObservation { configs, radius })
    }

    pub fn configs(&self) -> &[ConfigWindow] {
        &self.configs
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn rect(&self) -> Rect {
        *self.configs[0].rect()
    }

    /// `(min, max)` distance exponent over all pairs at `center`.
    fn exponent_range(&self, center: Site) -> Result<(u32, u32)> {
        let mut lo = u32::MAX;
        let mut hi = 0;
        for i in 0..self.configs.len() {
            for j in i + 1..self.configs.len() {
                let e = distance_exponent(&self.configs[i], &self.configs[j], center, self.radius)?;
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        Ok((lo, hi))
    }

    fn check_covers(&self, sites: &ShapeSet) -> Result<()> {
        let Some(need) = sites.bounding_rect() else { return Ok(()) };
        let need = need.expand(self.radius as i64);
        let rect = self.rect();
        if rect.contains_rect(&need) {
            return Ok(());
        }
        let corner = if rect.contains(Site::new(need.m_min, need.n_min)) {
            Site::new(need.m_max, need.n_max)
        } else {
            Site::new(need.m_min, need.n_min)
        };
        Err(Error::OutOfWindow { m: corner.m, n: corner.n })
    }
}

/// Strip averages of the largest (`prox`) and smallest (`sep`) pairwise
/// distance over `Λ_N(b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosAverages {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(with = "rational_str")]
    pub b: Rational,
    pub prox: f64,
    pub sep: f64,
    /// `2^{-(R+1)}`, the distance of agreeing boxes.
    pub floor: f64,
    pub strip_size: usize,
}

impl ChaosAverages {
    /// `prox` lies within `tol` of the truncation floor.
    pub fn prox_near_floor(&self, tol: f64) -> bool {
        self.prox < self.floor + tol
    }
}

pub fn chaos_averages(t: &TupleObservation, dir: &DirectionSpec, b: Rational, n: u64) -> Result<ChaosAverages> {
    let strip = dir.strip(&StripParams::new(b, n)?)?;
    t.check_covers(&strip)?;
    let ranges = strip.sites().par_iter().map(|&s| t.exponent_range(s)).collect::<Result<Vec<_>>>()?;
    let (mut prox, mut sep) = (0.0, 0.0);
    for (lo, hi) in ranges {
        prox += (-(lo as f64)).exp2();
        sep += (-(hi as f64)).exp2();
    }
    let k = strip.len().max(1) as f64;
    Ok(ChaosAverages {
        n,
        b,
        prox: prox / k,
        sep: sep / k,
        floor: (-(t.radius as f64 + 1.0)).exp2(),
        strip_size: strip.len(),
    })
}

/// [`chaos_averages`] at each `N` of `ladder`.
pub fn chaos_ladder(t: &TupleObservation, dir: &DirectionSpec, b: Rational, ladder: &[u64]) -> Result<Vec<ChaosAverages>> {
    ladder.iter().map(|&n| chaos_averages(t, dir, b, n)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub asymptotic: bool,
    /// Horizon `K`.
    pub k: i64,
    /// Columns `K..=K+width` (or `-K..=-K-width` reversed) were checked.
    pub width: i64,
    pub max_distance: f64,
    #[serde(with = "rational_str")]
    pub b: Rational,
    pub reverse: bool,
}

/// All pairwise distances stay below `eps` at every strip site from column
/// `K` on, as far as the window allows. With `reverse` the columns run
/// `-K, -K-1, ...`, which tests the inverse action.
pub fn asymptotic_test(t: &TupleObservation, dir: &DirectionSpec, b: Rational, k: i64, eps: f64, reverse: bool) -> Result<AsymptoticReport> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    if k < 0 {
        return Err(Error::InvalidArgument("horizon K must be non-negative".into()));
    }
    StripParams::new(b, 1)?;
    let rect = t.rect();
    let r = t.radius as i64;
    let mut columns = Vec::new();
    for step in 0.. {
        let m = if reverse { -k - step } else { k + step };
        if m.unsigned_abs() > dir.horizon() {
            break;
        }
        let (lo, hi) = dir.strip_column(b, m)?;
        let need = Rect::new(m - r, m + r, lo - r, hi + r);
        if !rect.contains_rect(&need) {
            break;
        }
        columns.push((m, lo, hi));
    }
    if columns.is_empty() {
        let (lo, _) = dir.strip_column(b, if reverse { -k } else { k })?;
        let m = if reverse { -k } else { k };
        return Err(Error::OutOfWindow { m, n: lo });
    }
    let sites: Vec<Site> = columns.iter().flat_map(|&(m, lo, hi)| (lo..=hi).map(move |n| Site::new(m, n))).collect();
    let smallest = sites.par_iter().map(|&s| t.exponent_range(s).map(|r| r.0)).collect::<Result<Vec<_>>>()?;
    let e = smallest.into_iter().min().unwrap();
    let max_distance = (-(e as f64)).exp2();
    Ok(AsymptoticReport { asymptotic: max_distance < eps, k, width: columns.len() as i64 - 1, max_distance, b, reverse })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Asymptotic,
    MeanLyCandidate,
    EntropyTupleCertified,
    Rejected,
    Inconclusive,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub diagonal: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trivial_pinsker: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    /// Bits per column.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<Method>,
    #[serde(rename = "N_max", skip_serializing_if = "Option::is_none", default)]
    pub n_max: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub asymptotic: Vec<AsymptoticReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub averages: Vec<ChaosAverages>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleVerdict {
    pub kind: VerdictKind,
    pub evidence: Evidence,
}

impl TupleVerdict {
    fn new(kind: VerdictKind, evidence: Evidence) -> Self {
        TupleVerdict { kind, evidence }
    }

    /// `asymptotic` when every report passes, `inconclusive` otherwise.
    pub fn from_asymptotic(reports: Vec<AsymptoticReport>) -> Self {
        let kind = if !reports.is_empty() && reports.iter().all(|r| r.asymptotic) {
            VerdictKind::Asymptotic
        } else {
            VerdictKind::Inconclusive
        };
        TupleVerdict::new(kind, Evidence { asymptotic: reports, ..Evidence::default() })
    }
}

/// Finite proxy for mean Li-Yorke behavior: on the ladder, `prox` comes
/// within `tol` of the floor at some `N` and `sep` reaches `eta` at some `N`.
pub fn mean_li_yorke_scan(t: &TupleObservation, dir: &DirectionSpec, b: Rational, ladder: &[u64], tol: f64, eta: f64) -> Result<TupleVerdict> {
    let averages = chaos_ladder(t, dir, b, ladder)?;
    let near = averages.iter().any(|a| a.prox_near_floor(tol));
    let apart = averages.iter().any(|a| a.sep >= eta);
    let kind = if near && apart { VerdictKind::MeanLyCandidate } else { VerdictKind::Inconclusive };
    Ok(TupleVerdict::new(kind, Evidence { averages, ..Evidence::default() }))
}

/// `∏ μ(A_i)`. This equals the relatively independent self-joining over the
/// directional Pinsker algebra only when that algebra is trivial, which the
/// caller must declare.
pub fn lambda_n_product(m: &MeasureModel, cylinders: &[PatternWindow], trivial_pinsker: bool) -> Result<f64> {
    if !trivial_pinsker {
        return Err(Error::DeclarationMissing);
    }
    cylinders.iter().try_fold(1.0, |acc, c| Ok(acc * pattern_prob(m, c)?))
}

/// The partition `{U_1, …, U_n, (∪U_i)^c}` on the union window: each cell
/// misses the closure of every `U_j` except at most one.
pub fn admissible_partition(q: u32, cylinders: &[PatternWindow]) -> Result<PartitionSpec> {
    let window = cylinders.iter().fold(ShapeSet::empty(), |acc, c| acc.union(c.shape()));
    let total = (q as u64).checked_pow(window.len() as u32).filter(|&t| t <= ENUMERATION_CAP).ok_or_else(|| {
        Error::UnsupportedShape(format!("union window of {} sites is too large to tabulate", window.len()))
    })?;
    let n = cylinders.len() as u32;
    let mut labels = vec![n; total as usize];
    for (idx, label) in labels.iter_mut().enumerate() {
        let values = crate::entropy::pattern_digits(idx as u64, q, window.len());
        for (i, c) in cylinders.iter().enumerate() {
            if c.shape().iter().zip(c.values()).all(|(&s, &x)| values[window.index_of(s).unwrap()] == x) {
                *label = i as u32;
                break;
            }
        }
    }
    Ok(PartitionSpec::table(window, labels))
}

/// True when the cylinders share no configuration.
fn cylinders_disjoint(a: &PatternWindow, b: &PatternWindow) -> bool {
    a.shape().iter().zip(a.values()).any(|(&s, &x)| b.get(s).is_some_and(|y| y != x))
}

/// Support prong `λ_n(∏U_i) > 0` and entropy prong: the admissible
/// partition `{U_1, …, U_n, (∪U_i)^c}` has directional rate at least `tol`.
#[allow(clippy::too_many_arguments)]
pub fn entropy_tuple_certify(
    m: &MeasureModel,
    spec: &SystemSpec,
    cylinders: &[PatternWindow],
    dir: &DirectionSpec,
    b: Rational,
    n_max: u64,
    tol: f64,
    trivial_pinsker: bool,
) -> Result<TupleVerdict> {
    if cylinders.len() < 2 {
        return Err(Error::InvalidArgument("a tuple needs at least two cylinders".into()));
    }
    let q = spec.alphabet_size();
    if cylinders.iter().any(|c| c.values().iter().any(|&v| v as u32 >= q)) {
        return Err(Error::InvalidArgument("cylinder symbol outside the alphabet".into()));
    }
    let lambda = lambda_n_product(m, cylinders, trivial_pinsker)?;
    let mut ev = Evidence { trivial_pinsker: Some(true), lambda: Some(lambda), ..Evidence::default() };
    for i in 0..cylinders.len() {
        for j in i + 1..cylinders.len() {
            if cylinders[i] == cylinders[j] {
                ev.diagonal = true;
                ev.note = Some(format!("cylinders {i} and {j} coincide"));
                return Ok(TupleVerdict::new(VerdictKind::Rejected, ev));
            }
        }
    }
    let exact = !matches!(m, MeasureModel::Empirical { .. });
    if lambda == 0.0 {
        let kind = if exact { VerdictKind::Rejected } else { VerdictKind::Inconclusive };
        ev.note = Some("product of cylinder probabilities vanishes".into());
        return Ok(TupleVerdict::new(kind, ev));
    }
    for i in 0..cylinders.len() {
        for j in i + 1..cylinders.len() {
            if !cylinders_disjoint(&cylinders[i], &cylinders[j]) {
                ev.note = Some(format!("neighborhoods {i} and {j} overlap; refine them"));
                return Ok(TupleVerdict::new(VerdictKind::Inconclusive, ev));
            }
        }
    }
    let part = match admissible_partition(q, cylinders) {
        Ok(p) => p,
        Err(Error::UnsupportedShape(why)) => {
            ev.note = Some(why);
            return Ok(TupleVerdict::new(VerdictKind::Inconclusive, ev));
        }
        Err(e) => return Err(e),
    };
    let est = directional_entropy_rate_with(m, spec, &part, dir, b, n_max, RatePath::PreferBound)?;
    ev.rate = Some(est.rate);
    ev.rate_se = Some(est.slope_se);
    ev.method = Some(est.curve.method);
    ev.n_max = Some(n_max);
    let kind = if est.rate >= tol {
        VerdictKind::EntropyTupleCertified
    } else {
        ev.note = Some("admissible partition rate below tolerance".into());
        VerdictKind::Inconclusive
    };
    Ok(TupleVerdict::new(kind, ev))
}

/// Parameters of [`density_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Neighborhoods are cylinders on the centered box of this radius.
    pub nbhd_radius: i64,
    /// Metric radius `R`.
    pub radius: u32,
    pub eps: f64,
    /// Columns checked beyond the horizon.
    pub verify_width: i64,
    #[serde(rename = "N_max")]
    pub n_max: u64,
    pub tol: f64,
    /// Pairs drawn per neighborhood before giving up on certification.
    pub attempts: u32,
    pub trivial_pinsker: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { nbhd_radius: 1, radius: 4, eps: 0.125, verify_width: 48, n_max: 32, tol: 1e-3, attempts: 8, trivial_pinsker: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeStatus {
    /// Certified neighborhood holding a verified asymptotic pair.
    Found,
    /// Certified, but no verified asymptotic pair.
    Inconclusive,
    /// No sampled pair was certified.
    NotCertified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodOutcome {
    pub index: u64,
    pub status: ProbeStatus,
    pub attempts: u32,
    pub certify: Option<TupleVerdict>,
    /// Perturbations vanish on columns `>= support_bound`.
    pub support_bound: Option<i64>,
    pub asymptotic: Vec<AsymptoticReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub neighborhoods: Vec<NeighborhoodOutcome>,
    pub certified: usize,
    pub found: usize,
    pub inconclusive: usize,
    /// `found / certified`, absent when nothing was certified.
    pub fraction: Option<f64>,
}

/// Samples entropy-pair neighborhoods and, in each, builds a pair that
/// differs from the first sample only on columns below a fixed bound while
/// staying in both cylinders and in the system. The pair is then tested for
/// asymptoticity at `b = 1` and `b = 3`.
pub fn density_probe(
    m: &MeasureModel,
    spec: &SystemSpec,
    dir: &DirectionSpec,
    budget: u64,
    seed: u64,
    cfg: &ProbeConfig,
) -> Result<DensityReport> {
    if !cfg.trivial_pinsker {
        return Err(Error::DeclarationMissing);
    }
    if cfg.eps.is_nan() || cfg.eps <= (-(cfg.radius as f64 + 1.0)).exp2() {
        return Err(Error::InvalidArgument("eps must exceed the truncation floor".into()));
    }
    if cfg.nbhd_radius < 0 || cfg.verify_width < 0 || cfg.attempts == 0 {
        return Err(Error::InvalidArgument("negative radius or width, or zero attempts".into()));
    }
    let plan = Plan::new(m, spec, dir, cfg)?;
    let neighborhoods = (0..budget)
        .into_par_iter()
        .map(|k| plan.neighborhood(m, spec, dir, seed, k, cfg))
        .collect::<Result<Vec<_>>>()?;
    let certified = neighborhoods.iter().filter(|o| o.status != ProbeStatus::NotCertified).count();
    let found = neighborhoods.iter().filter(|o| o.status == ProbeStatus::Found).count();
    let inconclusive = neighborhoods.iter().filter(|o| o.status == ProbeStatus::Inconclusive).count();
    let fraction = (certified > 0).then(|| found as f64 / certified as f64);
    Ok(DensityReport { neighborhoods, certified, found, inconclusive, fraction })
}

/// Finite-difference construction: either any change is allowed (full
/// shifts) or changes are propagated upward from the base rows.
enum Perturber {
    Free,
    Linear(Propagator),
}

impl Perturber {
    fn new(m: &MeasureModel, spec: &SystemSpec) -> Result<Self> {
        match spec {
            SystemSpec::FullShift { .. } => Ok(Perturber::Free),
            _ => match haar_system(m, spec).map(|s| Propagator::new(&s)) {
                Some(Ok(p)) if !p.is_flipped() => Ok(Perturber::Linear(p)),
                Some(Ok(_)) => Err(Error::UnsupportedExact("downward propagation has no finite-difference construction".into())),
                Some(Err(e)) => Err(e),
                None => Err(Error::UnsupportedExact("no linear structure for finite differences".into())),
            },
        }
    }

    /// First column from which the constructed changes vanish.
    fn support_bound(&self, window: &ShapeSet, base_row: i64) -> Result<i64> {
        let last = window.iter().map(|s| s.m).max().unwrap_or(0);
        match self {
            Perturber::Free => Ok(last + 1),
            Perturber::Linear(p) => {
                let (layout, _) = p.site_vectors(window.sites(), Some(base_row))?;
                Ok(layout.sites.iter().map(|s| s.m).max().unwrap_or(last).max(last) + 1)
            }
        }
    }

    fn apply(&self, spec: &SystemSpec, x1: &ConfigWindow, x2: &ConfigWindow, window: &ShapeSet, c: i64) -> Result<ConfigWindow> {
        let rect = *x1.rect();
        let y = match self {
            Perturber::Free => {
                let mut y = x1.clone();
                for &s in window.iter() {
                    y.set(s, x2.try_get(s)?)?;
                }
                y
            }
            Perturber::Linear(p) => {
                let f = p.field();
                let (layout, vectors) = p.site_vectors(window.sites(), Some(rect.n_min))?;
                let rhs = window.iter().map(|&s| Ok(f.sub(x2.try_get(s)?, x1.try_get(s)?))).collect::<Result<Vec<u8>>>()?;
                let z = solve(f, &vectors, &rhs, layout.sites.len())
                    .ok_or_else(|| Error::InvariantViolation("window difference is not reachable from the base rows".into()))?;
                let base: BTreeMap<Site, u8> = layout.sites.iter().copied().zip(z).collect();
                let delta = p.fill(rect, |s| base.get(&s).copied().unwrap_or(0))?;
                ConfigWindow::from_fn(rect, |s| f.add(x1.get(s).unwrap(), delta.get(s).unwrap()))
            }
        };
        if window.iter().any(|&s| y.get(s) != x2.get(s)) {
            return Err(Error::InvariantViolation("finite difference misses the target pattern".into()));
        }
        if rect.sites().any(|s| s.m >= c && y.get(s) != x1.get(s)) {
            return Err(Error::InvariantViolation("finite difference reaches past its support bound".into()));
        }
        if !validate(spec, &y.as_pattern()) {
            return Err(Error::InvariantViolation("finite difference leaves the system".into()));
        }
        Ok(y)
    }
}

/// A configuration in the system that agrees with `x2` on `window` and with
/// `x1` on every column `>= c`, together with `c`. Both inputs must be
/// valid configurations on the same rectangle, lying above its bottom row.
pub fn finite_difference_pair(
    m: &MeasureModel,
    spec: &SystemSpec,
    x1: &ConfigWindow,
    x2: &ConfigWindow,
    window: &ShapeSet,
) -> Result<(ConfigWindow, i64)> {
    if x1.rect() != x2.rect() {
        return Err(Error::InvalidArgument("configurations must share one rectangle".into()));
    }
    let p = Perturber::new(m, spec)?;
    let c = p.support_bound(window, x1.rect().n_min)?;
    let y = p.apply(spec, x1, x2, window, c)?;
    Ok((y, c))
}

struct Plan {
    window: ShapeSet,
    rect: Rect,
    /// Perturbations vanish on columns `>= c`.
    c: i64,
    k: i64,
    perturber: std::result::Result<Perturber, String>,
}

const PROBE_B: [i64; 2] = [1, 3];

impl Plan {
    fn new(m: &MeasureModel, spec: &SystemSpec, dir: &DirectionSpec, cfg: &ProbeConfig) -> Result<Plan> {
        let rho = cfg.nbhd_radius;
        let window = ShapeSet::rect(&Rect::centered(rho));
        let n_lo = -rho;
        let perturber = Perturber::new(m, spec).map_err(|e| e.to_string());
        let c = match &perturber {
            Ok(p) => p.support_bound(&window, n_lo)?,
            Err(_) => rho + 1,
        };
        // a site at column m >= c sees no change within sup-radius m - c
        let need = (1.0 / cfg.eps).log2().ceil() as i64;
        let k = c + need + 1;
        let last = k + cfg.verify_width;
        let b_max = Rational::from_integer(*PROBE_B.iter().max().unwrap());
        let r = cfg.radius as i64;
        let top = dir.strip_column(b_max, last)?.1 + r;
        let bottom = dir.strip_column(b_max, k)?.0 - r;
        let rect = Rect::new(-rho.max(r), last + r, n_lo.min(bottom), top.max(rho));
        Ok(Plan { window, rect, c, k, perturber })
    }

    fn neighborhood(&self, m: &MeasureModel, spec: &SystemSpec, dir: &DirectionSpec, seed: u64, index: u64, cfg: &ProbeConfig) -> Result<NeighborhoodOutcome> {
        let mut last = None;
        for a in 0..cfg.attempts {
            let stream = 2 * (index * cfg.attempts as u64 + a as u64);
            let x1 = sample_config_stream(m, spec, self.rect, seed, stream)?;
            let x2 = sample_config_stream(m, spec, self.rect, seed, stream + 1)?;
            let u1 = x1.restrict(&self.window)?;
            let u2 = x2.restrict(&self.window)?;
            if u1 == u2 {
                continue;
            }
            let verdict = entropy_tuple_certify(m, spec, &[u1, u2], dir, Rational::from_integer(1), cfg.n_max, cfg.tol, true)?;
            if verdict.kind != VerdictKind::EntropyTupleCertified {
                last = Some(verdict);
                continue;
            }
            let mut out = NeighborhoodOutcome {
                index,
                status: ProbeStatus::Inconclusive,
                attempts: a + 1,
                certify: Some(verdict),
                support_bound: Some(self.c),
                asymptotic: Vec::new(),
                note: None,
            };
            let perturbed = match &self.perturber {
                Ok(p) => p.apply(spec, &x1, &x2, &self.window, self.c).map_err(|e| e.to_string()),
                Err(why) => Err(why.clone()),
            };
            let y2 = match perturbed {
                Ok(y) => y,
                Err(why) => {
                    out.note = Some(why);
                    return Ok(out);
                }
            };
            let t = TupleObservation::new(vec![x1, y2], cfg.radius)?;
            for b in PROBE_B {
                out.asymptotic.push(asymptotic_test(&t, dir, Rational::from_integer(b), self.k, cfg.eps, false)?);
            }
            if out.asymptotic.iter().all(|r| r.asymptotic) {
                out.status = ProbeStatus::Found;
            } else {
                out.note = Some("perturbed pair failed the asymptotic test".into());
            }
            return Ok(out);
        }
        Ok(NeighborhoodOutcome {
            index,
            status: ProbeStatus::NotCertified,
            attempts: cfg.attempts,
            certify: last,
            support_bound: None,
            asymptotic: Vec::new(),
            note: Some("no sampled pair was certified".into()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::sample_config;

    fn golden() -> DirectionSpec {
        DirectionSpec::golden(1000).unwrap()
    }

    fn one() -> Rational {
        Rational::from_integer(1)
    }

    fn pair(x: ConfigWindow, y: ConfigWindow, r: u32) -> TupleObservation {
        TupleObservation::new(vec![x, y], r).unwrap()
    }

    #[test]
    fn identical_tuple_sits_on_floor() {
        let rect = Rect::new(-6, 40, -6, 40);
        let x = sample_config(&MeasureModel::uniform(2), &SystemSpec::full_shift(2).unwrap(), rect, 3).unwrap();
        let t = pair(x.clone(), x, 4);
        let a = chaos_averages(&t, &golden(), one(), 32).unwrap();
        assert_eq!(a.prox, 1.0 / 32.0);
        assert_eq!(a.sep, a.prox);
        assert!(a.prox_near_floor(1e-12));
        assert!(asymptotic_test(&t, &golden(), one(), 0, 0.25, false).unwrap().asymptotic);
    }

    #[test]
    fn finite_difference_is_asymptotic() {
        let rect = Rect::new(-8, 60, -8, 60);
        let fs = SystemSpec::full_shift(2).unwrap();
        let x = sample_config(&MeasureModel::uniform(2), &fs, rect, 5).unwrap();
        let mut y = x.clone();
        for s in [Site::new(0, 0), Site::new(1, -1), Site::new(-1, 1)] {
            y.set(s, 1 - x.get(s).unwrap()).unwrap();
        }
        let t = pair(x, y, 4);
        // differences within sup-radius 1, eps = 1/4 needs distance exponent > 2
        let rep = asymptotic_test(&t, &golden(), one(), 1 + 2 + 1, 0.25, false).unwrap();
        assert!(rep.asymptotic && rep.width > 0);
        assert!(!asymptotic_test(&t, &golden(), one(), 0, 0.25, false).unwrap().asymptotic);
    }

    #[test]
    fn independent_pair_is_not_asymptotic() {
        let rect = Rect::new(-8, 60, -8, 60);
        let fs = SystemSpec::full_shift(2).unwrap();
        for seed in 0..5 {
            let x = sample_config(&MeasureModel::uniform(2), &fs, rect, seed).unwrap();
            let y = sample_config(&MeasureModel::uniform(2), &fs, rect, seed + 100).unwrap();
            let t = pair(x, y, 4);
            assert!(!asymptotic_test(&t, &golden(), one(), 10, 0.25, false).unwrap().asymptotic);
            assert!(!asymptotic_test(&t, &golden(), one(), 2, 0.25, true).unwrap().asymptotic);
        }
    }

    #[test]
    fn window_too_small() {
        let rect = Rect::new(0, 10, 0, 10);
        let x = ConfigWindow::zeros(rect);
        let t = pair(x.clone(), x, 4);
        assert!(matches!(chaos_averages(&t, &golden(), one(), 8), Err(Error::OutOfWindow { .. })));
        assert!(matches!(asymptotic_test(&t, &golden(), one(), 20, 0.25, false), Err(Error::OutOfWindow { .. })));
    }

    #[test]
    fn lambda_examples() {
        let b = MeasureModel::uniform(2);
        let a0 = PatternWindow::from_pairs(&[((0, 0), 0)]).unwrap();
        let a1 = PatternWindow::from_pairs(&[((0, 0), 1)]).unwrap();
        assert_eq!(lambda_n_product(&b, &[a0.clone(), a1.clone()], true).unwrap(), 0.25);
        assert_eq!(lambda_n_product(&b, &[a0.clone(), a1], false), Err(Error::DeclarationMissing));
        let m = MeasureModel::bernoulli(&[0.3, 0.7]).unwrap();
        let p = pattern_prob(&m, &a0).unwrap();
        assert!((lambda_n_product(&m, &[a0.clone(), a0.clone(), a0], true).unwrap() - p.powi(3)).abs() < 1e-15);
        let haar = MeasureModel::haar(SystemSpec::three_dot()).unwrap();
        let l1 = PatternWindow::from_pairs(&[((0, 0), 1), ((1, 0), 0), ((0, 1), 1)]).unwrap();
        let l2 = PatternWindow::from_pairs(&[((0, 0), 0), ((1, 0), 0), ((0, 1), 0)]).unwrap();
        assert_eq!(lambda_n_product(&haar, &[l1, l2], true).unwrap(), 1.0 / 16.0);
    }

    #[test]
    fn certify_examples() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let u = MeasureModel::uniform(2);
        let a0 = PatternWindow::from_pairs(&[((0, 0), 0)]).unwrap();
        let a1 = PatternWindow::from_pairs(&[((0, 0), 1)]).unwrap();
        let v = entropy_tuple_certify(&u, &fs, &[a0.clone(), a1.clone()], &golden(), one(), 32, 1e-3, true).unwrap();
        assert_eq!(v.kind, VerdictKind::EntropyTupleCertified);
        assert_eq!(v.evidence.lambda, Some(0.25));
        let d = entropy_tuple_certify(&u, &fs, &[a0.clone(), a0.clone()], &golden(), one(), 32, 1e-3, true).unwrap();
        assert_eq!(d.kind, VerdictKind::Rejected);
        assert!(d.evidence.diagonal);
        let pm = MeasureModel::point_mass(2, 0).unwrap();
        let z = entropy_tuple_certify(&pm, &fs, &[a0.clone(), a1.clone()], &golden(), one(), 32, 1e-3, true).unwrap();
        assert_eq!(z.kind, VerdictKind::Rejected);
        assert_eq!(z.evidence.lambda, Some(0.0));
        assert_eq!(
            entropy_tuple_certify(&u, &fs, &[a0, a1], &golden(), one(), 32, 1e-3, false),
            Err(Error::DeclarationMissing)
        );
    }

    #[test]
    fn admissible_cells_refine_complements() {
        let a = PatternWindow::from_pairs(&[((0, 0), 0), ((1, 0), 1)]).unwrap();
        let b = PatternWindow::from_pairs(&[((0, 0), 1)]).unwrap();
        let part = admissible_partition(2, &[a.clone(), b.clone()]).unwrap();
        let crate::entropy::Labeling::Table { labels } = &part.labeling else { panic!() };
        for (idx, &l) in labels.iter().enumerate() {
            let v = crate::entropy::pattern_digits(idx as u64, 2, part.window.len());
            let p = PatternWindow::new(part.window.clone(), v).unwrap();
            let in_a = a.shape().iter().all(|&s| p.get(s) == a.get(s));
            let in_b = b.shape().iter().all(|&s| p.get(s) == b.get(s));
            assert_eq!(l, if in_a { 0 } else if in_b { 1 } else { 2 });
        }
    }

    #[test]
    fn probe_examples() {
        let cfg = ProbeConfig { trivial_pinsker: true, ..ProbeConfig::default() };
        let fs = SystemSpec::full_shift(2).unwrap();
        let u = MeasureModel::uniform(2);
        let empty = density_probe(&u, &fs, &golden(), 0, 7, &cfg).unwrap();
        assert!(empty.neighborhoods.is_empty() && empty.fraction.is_none());
        let rep = density_probe(&u, &fs, &golden(), 6, 7, &cfg).unwrap();
        assert_eq!(rep.fraction, Some(1.0));
        let td = SystemSpec::three_dot();
        let haar = MeasureModel::haar(td.clone()).unwrap();
        let rep = density_probe(&haar, &td, &golden(), 6, 7, &cfg).unwrap();
        assert_eq!(rep.found, 6, "{:?}", rep.neighborhoods.iter().map(|o| &o.note).collect::<Vec<_>>());
        let x1 = sample_config(&haar, &td, Rect::new(-2, 30, -2, 20), 1).unwrap();
        let x2 = sample_config(&haar, &td, Rect::new(-2, 30, -2, 20), 2).unwrap();
        let w = ShapeSet::rect(&Rect::centered(1));
        let (y, c) = finite_difference_pair(&haar, &td, &x1, &x2, &w).unwrap();
        // (1, 1) sits three rows above the base row and reads base columns 1..=4
        assert_eq!(c, 5);
        assert_eq!(y.restrict(&w).unwrap(), x2.restrict(&w).unwrap());
        let off = ProbeConfig::default();
        assert_eq!(density_probe(&u, &fs, &golden(), 1, 7, &off).unwrap_err(), Error::DeclarationMissing);
    }
}
