//! Block entropy of joined partitions, directional entropy rates and the
//! finite-scale directional Pinsker proxy. All values are in bits.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebraic::Propagator;
use crate::error::{Error, Result};
use crate::gf::{EchelonBasis, Field};
use crate::lattice::{rational_str, DirectionSpec, Rational, ShapeSet, Site, StripParams};
use crate::measures::{haar_marginal_for, haar_system, pattern_prob, row_runs, MeasureModel};
use crate::systems::{ConfigWindow, PatternWindow, SystemSpec};

/// Largest number of patterns the cylinder-sum path enumerates.
pub const ENUMERATION_CAP: u64 = 1 << 22;

/// How cells are read off the pattern on the window. Patterns are indexed
/// by `Σ x(w_k) q^k` over the window sites in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Labeling {
    /// One cell per pattern.
    Cylinders,
    /// Cells are the joint values of GF(q) functionals of the pattern.
    Linear { functionals: Vec<Vec<u8>> },
    /// Explicit cell label per pattern index.
    Table { labels: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub window: ShapeSet,
    pub labeling: Labeling,
}

impl PartitionSpec {
    /// The partition by the symbol at the origin.
    pub fn zero_coordinate() -> Self {
        PartitionSpec::cylinders(ShapeSet::single(Site::ORIGIN))
    }

    pub fn cylinders(window: ShapeSet) -> Self {
        PartitionSpec { window, labeling: Labeling::Cylinders }
    }

    pub fn linear(window: ShapeSet, functionals: Vec<Vec<u8>>) -> Self {
        PartitionSpec { window, labeling: Labeling::Linear { functionals } }
    }

    pub fn table(window: ShapeSet, labels: Vec<u32>) -> Self {
        PartitionSpec { window, labeling: Labeling::Table { labels } }
    }

    /// `{A, A^c}` with `A = {x : pred(x|window)}`.
    pub fn two_cell(window: ShapeSet, q: u32, pred: impl Fn(&[u8]) -> bool) -> Self {
        let len = window.len();
        let total = (q as usize).pow(len as u32);
        let labels = (0..total)
            .map(|idx| {
                let values = pattern_digits(idx as u64, q, len);
                (!pred(&values)) as u32
            })
            .collect();
        PartitionSpec::table(window, labels)
    }

    /// The trivial partition `{X}`.
    pub fn whole_space() -> Self {
        PartitionSpec::table(ShapeSet::empty(), vec![0])
    }

    pub fn check(&self, q: u32) -> Result<()> {
        let len = self.window.len();
        match &self.labeling {
            Labeling::Cylinders => Ok(()),
            Labeling::Linear { functionals } => {
                if functionals.iter().any(|f| f.len() != len || f.iter().any(|&c| c as u32 >= q)) {
                    return Err(Error::InvalidPartition("functional length or coefficient out of range".into()));
                }
                Ok(())
            }
            Labeling::Table { labels } => {
                let expected = (q as u64).checked_pow(len as u32);
                if expected != Some(labels.len() as u64) {
                    return Err(Error::InvalidPartition(format!(
                        "table has {} labels, expected q^{} for q = {q}",
                        labels.len(),
                        len
                    )));
                }
                Ok(())
            }
        }
    }

    /// True when the partition has a single cell.
    pub fn is_trivial(&self) -> bool {
        match &self.labeling {
            Labeling::Cylinders => self.window.is_empty(),
            Labeling::Linear { functionals } => functionals.iter().all(|f| f.iter().all(|&c| c == 0)),
            Labeling::Table { labels } => labels.iter().all(|&l| l == labels[0]),
        }
    }

    /// Number of distinct cell labels, for `q` symbols.
    pub fn cell_count(&self, q: u32) -> u64 {
        match &self.labeling {
            Labeling::Cylinders => (q as u64).saturating_pow(self.window.len() as u32),
            Labeling::Linear { .. } => {
                let mut seen = std::collections::BTreeSet::new();
                let total = (q as u64).saturating_pow(self.window.len() as u32);
                for idx in 0..total.min(ENUMERATION_CAP) {
                    seen.insert(self.label(q, &pattern_digits(idx, q, self.window.len())));
                }
                seen.len() as u64
            }
            Labeling::Table { labels } => labels.iter().collect::<std::collections::BTreeSet<_>>().len() as u64,
        }
    }

    /// Cell label of a window pattern (values in window order).
    pub fn label(&self, q: u32, values: &[u8]) -> u64 {
        match &self.labeling {
            Labeling::Cylinders | Labeling::Table { .. } => {
                let idx = values.iter().rev().fold(0u64, |acc, &v| acc * q as u64 + v as u64);
                match &self.labeling {
                    Labeling::Table { labels } => labels[idx as usize] as u64,
                    _ => idx,
                }
            }
            Labeling::Linear { functionals } => functionals.iter().rev().fold(0u64, |acc, f| {
                let v = f.iter().zip(values).map(|(&c, &x)| c as u32 * x as u32).sum::<u32>() % q;
                acc * q as u64 + v as u64
            }),
        }
    }

    /// The join with its vertical translates `T^{-(0,j)}` for `j` in `offsets`.
    pub fn thicken(&self, q: u32, offsets: &[i64]) -> Result<PartitionSpec> {
        self.check(q)?;
        let wide: ShapeSet = offsets
            .iter()
            .flat_map(|&j| self.window.translate(Site::new(0, j)).sites().to_vec())
            .collect();
        let positions: Vec<Vec<usize>> = offsets
            .iter()
            .map(|&j| self.window.iter().map(|&w| wide.index_of(w + Site::new(0, j)).unwrap()).collect())
            .collect();
        match &self.labeling {
            Labeling::Cylinders => Ok(PartitionSpec::cylinders(wide)),
            Labeling::Linear { functionals } => {
                let mut out = Vec::new();
                for pos in &positions {
                    for f in functionals {
                        let mut g = vec![0u8; wide.len()];
                        for (k, &c) in f.iter().enumerate() {
                            g[pos[k]] = c;
                        }
                        out.push(g);
                    }
                }
                Ok(PartitionSpec::linear(wide, out))
            }
            Labeling::Table { labels } => {
                let total = (q as u64).checked_pow(wide.len() as u32).filter(|&t| t <= ENUMERATION_CAP).ok_or_else(|| {
                    Error::InvalidPartition("thickened table partition too large".into())
                })?;
                let own = densify(labels.clone());
                let cells = self.cell_count(q).max(1);
                let joined = (0..total)
                    .map(|idx| {
                        let values = pattern_digits(idx, q, wide.len());
                        positions.iter().rev().fold(0u64, |acc, pos| {
                            let sub = pos.iter().rev().fold(0usize, |a, &p| a * q as usize + values[p] as usize);
                            acc * cells + own[sub] as u64
                        })
                    })
                    .collect::<Vec<u64>>();
                Ok(PartitionSpec::table(wide, densify(joined)))
            }
        }
    }
}

fn densify<T: Ord + Copy>(labels: Vec<T>) -> Vec<u32> {
    let mut map = BTreeMap::new();
    for &l in &labels {
        let next = map.len() as u32;
        map.entry(l).or_insert(next);
    }
    labels.iter().map(|l| map[l]).collect()
}

/// Base-q digits of a pattern index, least significant first.
pub fn pattern_digits(mut idx: u64, q: u32, len: usize) -> Vec<u8> {
    (0..len)
        .map(|_| {
            let d = (idx % q as u64) as u8;
            idx /= q as u64;
            d
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactProduct,
    ExactRank,
    CylinderSum,
    /// Block-independence lower bound; the value under-reports.
    LowerBound,
    Plugin,
    PluginMm,
}

impl Method {
    pub fn is_exact(self) -> bool {
        matches!(self, Method::ExactProduct | Method::ExactRank | Method::CylinderSum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    None,
    MillerMadow,
}

fn shannon_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Entropy of the partition `⋁_{s ∈ shape} T^{-s} α` under `m`, in bits.
pub fn shape_entropy(m: &MeasureModel, spec: &SystemSpec, shape: &ShapeSet, part: &PartitionSpec) -> Result<f64> {
    shape_entropy_with_method(m, spec, shape, part).map(|(h, _)| h)
}

/// [`shape_entropy`] together with the path that produced the value.
pub fn shape_entropy_with_method(
    m: &MeasureModel,
    spec: &SystemSpec,
    shape: &ShapeSet,
    part: &PartitionSpec,
) -> Result<(f64, Method)> {
    let q = spec.alphabet_size();
    part.check(q)?;
    m.check_support(spec)?;
    if shape.is_empty() || part.is_trivial() || m.is_point_mass().is_some() {
        return Ok((0.0, Method::ExactProduct));
    }
    if let MeasureModel::Empirical { samples } = m {
        let (h, _) = shape_entropy_empirical(samples, q, shape, part, Correction::MillerMadow, true)?;
        return Ok((h, Method::PluginMm));
    }
    let eff = shape.minkowski(&part.window);
    let full_shift = matches!(spec, SystemSpec::FullShift { .. });
    match (m, &part.labeling) {
        (MeasureModel::Bernoulli { p }, Labeling::Cylinders) if full_shift => {
            return Ok((eff.len() as f64 * shannon_bits(p), Method::ExactProduct));
        }
        (MeasureModel::RowMarkov { transition, stationary }, Labeling::Cylinders) if full_shift => {
            let runs = row_runs(&eff)?;
            let h0 = shannon_bits(stationary);
            let h1: f64 = stationary.iter().zip(transition).map(|(pi, row)| pi * shannon_bits(row)).sum();
            let h = runs.iter().map(|&(_, lo, hi)| h0 + (hi - lo) as f64 * h1).sum();
            return Ok((h, Method::ExactProduct));
        }
        _ => {}
    }
    if let Some(rank) = linear_rank(m, spec, shape, part) {
        return Ok((rank? as f64 * (q as f64).log2(), Method::ExactRank));
    }
    cylinder_sum(m, spec, shape, &eff, part).map(|h| (h, Method::CylinderSum))
}

/// Dimension of the joined linear observable under a Haar-type measure.
fn linear_rank(m: &MeasureModel, spec: &SystemSpec, shape: &ShapeSet, part: &PartitionSpec) -> Option<Result<usize>> {
    let functionals: Vec<Vec<u8>> = match &part.labeling {
        Labeling::Cylinders => (0..part.window.len())
            .map(|k| {
                let mut e = vec![0u8; part.window.len()];
                e[k] = 1;
                e
            })
            .collect(),
        Labeling::Linear { functionals } => functionals.clone(),
        Labeling::Table { .. } => return None,
    };
    let eff = shape.minkowski(&part.window);
    let q = spec.alphabet_size();
    let observe = |eff_vecs: &dyn Fn(usize) -> Vec<u8>, len: usize, field: Field| -> usize {
        let mut basis = EchelonBasis::new(field, len);
        let mut acc = vec![0u8; len];
        for &s in shape.iter() {
            for f in &functionals {
                acc.iter_mut().for_each(|x| *x = 0);
                for (k, &c) in f.iter().enumerate() {
                    if c != 0 {
                        let idx = eff.index_of(s + part.window.sites()[k]).unwrap();
                        field.axpy(&mut acc, c, &eff_vecs(idx));
                    }
                }
                basis.insert(&acc);
                if basis.rank() == len {
                    return len;
                }
            }
        }
        basis.rank()
    };
    if let Some(sys) = haar_system(m, spec) {
        if let Ok(prop) = Propagator::new(&sys) {
            let run = || {
                let (layout, vectors) = prop.site_vectors(eff.sites(), None)?;
                Ok(observe(&|i| vectors[i].clone(), layout.sites.len(), prop.field()))
            };
            return Some(run());
        }
    }
    let marginal = match haar_marginal_for(m, spec, &eff)? {
        Ok(mg) => mg,
        Err(e) => return Some(Err(e)),
    };
    let field = Field::new(q).ok()?;
    // observables applied to the support's basis: rank of the image
    let basis = marginal.basis();
    let dim = basis.len();
    let columns: Vec<Vec<u8>> = (0..eff.len()).map(|i| basis.iter().map(|b| b[i]).collect()).collect();
    Some(Ok(observe(&|i| columns[i].clone(), dim, field)))
}

fn cylinder_sum(m: &MeasureModel, spec: &SystemSpec, shape: &ShapeSet, eff: &ShapeSet, part: &PartitionSpec) -> Result<f64> {
    let q = spec.alphabet_size();
    let positions: Vec<Vec<usize>> = shape
        .iter()
        .map(|&s| part.window.iter().map(|&w| eff.index_of(s + w).unwrap()).collect())
        .collect();
    let key_of = |values: &[u8]| -> Vec<u64> {
        positions
            .iter()
            .map(|pos| {
                let sub: Vec<u8> = pos.iter().map(|&p| values[p]).collect();
                part.label(q, &sub)
            })
            .collect()
    };
    let mut dist: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    if let Some(marginal) = haar_marginal_for(m, spec, eff) {
        let marginal = marginal?;
        let count = (q as u64).checked_pow(marginal.free_dim() as u32).filter(|&c| c <= ENUMERATION_CAP);
        let Some(count) = count else {
            return Err(Error::UnsupportedExact(format!("support of {}^{} patterns exceeds the cap", q, marginal.free_dim())));
        };
        let w = 1.0 / count as f64;
        marginal.for_each_pattern(|v| *dist.entry(key_of(v)).or_insert(0.0) += w);
    } else {
        if !matches!(spec, SystemSpec::FullShift { .. }) {
            return Err(Error::UnsupportedExact("no exact marginal for this measure on this system".into()));
        }
        let total = (q as u64).checked_pow(eff.len() as u32).filter(|&c| c <= ENUMERATION_CAP).ok_or_else(|| {
            Error::UnsupportedExact(format!("{} sites exceed the enumeration cap", eff.len()))
        })?;
        for idx in 0..total {
            let values = pattern_digits(idx, q, eff.len());
            let p = pattern_prob(m, &PatternWindow::new(eff.clone(), values.clone())?)?;
            if p > 0.0 {
                *dist.entry(key_of(&values)).or_insert(0.0) += p;
            }
        }
    }
    let probs: Vec<f64> = dist.into_values().collect();
    Ok(shannon_bits(&probs))
}

/// Lower bound from independent window translates. Greedily picks sites
/// of `shape` whose windows are pairwise disjoint and, for Haar-type
/// measures, whose marginal ranks add up; such blocks are independent, so
/// the join carries at least `k · H(α)` bits.
pub fn block_lower_bound(m: &MeasureModel, spec: &SystemSpec, shape: &ShapeSet, part: &PartitionSpec) -> Result<f64> {
    let bernoulli = matches!((m, spec), (MeasureModel::Bernoulli { .. }, SystemSpec::FullShift { .. }));
    let prop = haar_system(m, spec).and_then(|sys| Propagator::new(&sys).ok());
    if !bernoulli && prop.is_none() {
        return Err(Error::UnsupportedExact("block lower bound needs a Bernoulli full shift or a Haar measure".into()));
    }
    let h_alpha = shape_entropy(m, spec, &ShapeSet::single(Site::ORIGIN), part)?;
    if shape.is_empty() || h_alpha == 0.0 {
        return Ok(0.0);
    }
    let mut used = std::collections::BTreeSet::new();
    let mut blocks = 0usize;
    let ranked = match &prop {
        Some(p) if !bernoulli => {
            let eff = shape.minkowski(&part.window);
            let (layout, vectors) = p.site_vectors(eff.sites(), None)?;
            Some((eff, layout.sites.len(), vectors, p.field()))
        }
        _ => None,
    };
    let mut basis = ranked.as_ref().map(|(_, len, _, f)| EchelonBasis::new(*f, *len));
    for &s in shape.iter() {
        let cells: Vec<Site> = part.window.iter().map(|&w| s + w).collect();
        if cells.iter().any(|c| used.contains(c)) {
            continue;
        }
        if let (Some((eff, len, vectors, field)), Some(b)) = (&ranked, basis.as_mut()) {
            let block: Vec<&Vec<u8>> = cells.iter().map(|c| &vectors[eff.index_of(*c).unwrap()]).collect();
            let own = crate::gf::rank(*field, *len, block.iter().map(|v| v.as_slice()));
            let mut trial = b.clone();
            for v in &block {
                trial.insert(v);
            }
            if trial.rank() != b.rank() + own {
                continue;
            }
            *b = trial;
        }
        used.extend(cells);
        blocks += 1;
    }
    Ok(blocks as f64 * h_alpha)
}

/// Plug-in entropy of the joined partition from sample windows, with a
/// leave-one-sample-out jackknife standard error.
///
/// With `translates` every placement of the joined window inside each
/// sample is an observation; otherwise each sample contributes the one
/// placement at the shape's own coordinates.
pub fn shape_entropy_empirical(
    samples: &[ConfigWindow],
    q: u32,
    shape: &ShapeSet,
    part: &PartitionSpec,
    correction: Correction,
    translates: bool,
) -> Result<(f64, f64)> {
    part.check(q)?;
    if shape.is_empty() || part.is_trivial() {
        return Ok((0.0, 0.0));
    }
    let eff = shape.minkowski(&part.window);
    let bb = eff.bounding_rect().unwrap();
    let positions: Vec<Vec<Site>> =
        shape.iter().map(|&s| part.window.iter().map(|&w| s + w).collect()).collect();
    let observe = |w: &ConfigWindow, t: Site| -> Vec<u64> {
        positions
            .iter()
            .map(|pos| {
                let sub: Vec<u8> = pos.iter().map(|&p| w.get(p + t).unwrap()).collect();
                part.label(q, &sub)
            })
            .collect()
    };
    let per_sample: Vec<Vec<Vec<u64>>> = samples
        .par_iter()
        .map(|w| {
            let r = w.rect();
            if translates {
                let mut obs = Vec::new();
                for dm in (r.m_min - bb.m_min)..=(r.m_max - bb.m_max) {
                    for dn in (r.n_min - bb.n_min)..=(r.n_max - bb.n_max) {
                        obs.push(observe(w, Site::new(dm, dn)));
                    }
                }
                obs
            } else if r.contains_rect(&bb) {
                vec![observe(w, Site::ORIGIN)]
            } else {
                Vec::new()
            }
        })
        .collect();
    let groups: Vec<&Vec<Vec<u64>>> = per_sample.iter().filter(|g| !g.is_empty()).collect();
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    if n_total < 2 {
        return Err(Error::InsufficientData(format!("{n_total} observations of the joined window")));
    }
    let mut counts: HashMap<&[u64], u64> = HashMap::new();
    for g in &groups {
        for key in g.iter() {
            *counts.entry(key.as_slice()).or_insert(0) += 1;
        }
    }
    let mut sorted: Vec<u64> = counts.values().copied().collect();
    sorted.sort_unstable();
    let clogc = |c: u64| if c == 0 { 0.0 } else { c as f64 * (c as f64).ln() };
    let s_total: f64 = sorted.iter().map(|&c| clogc(c)).sum();
    let k_total = sorted.len();
    let estimate = |n: usize, s: f64, k: usize| -> f64 {
        let n = n as f64;
        let h = (n.ln() - s / n) / std::f64::consts::LN_2;
        match correction {
            Correction::None => h,
            Correction::MillerMadow => h + (k as f64 - 1.0) / (2.0 * n * std::f64::consts::LN_2),
        }
    };
    let h = estimate(n_total, s_total, k_total);
    if groups.len() < 2 {
        return Ok((h.max(0.0), 0.0));
    }
    let thetas: Vec<f64> = groups
        .par_iter()
        .map(|g| {
            let mut own: BTreeMap<&[u64], u64> = BTreeMap::new();
            for key in g.iter() {
                *own.entry(key.as_slice()).or_insert(0) += 1;
            }
            let mut s = s_total;
            let mut k = k_total;
            for (key, c_i) in own {
                let c = counts[key];
                s -= clogc(c) - clogc(c - c_i);
                if c == c_i {
                    k -= 1;
                }
            }
            estimate(n_total - g.len(), s, k)
        })
        .collect();
    let g = thetas.len() as f64;
    let mean = thetas.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>();
    Ok((h.max(0.0), var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    /// `(N, H_N)` with `H_N` in bits.
    pub points: Vec<(u64, f64)>,
    #[serde(with = "rational_str")]
    pub b: Rational,
    pub partition: PartitionSpec,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Bits per column.
    pub rate: f64,
    pub fit_window: (u64, u64),
    pub slope_se: f64,
    pub curve: EntropyCurve,
}

/// Column counts at which `H_N` is evaluated: a doubling ladder below
/// `N_max / 2`, then every `N` in the fit window `[N_max / 2, N_max]`.
pub fn n_ladder(n_max: u64) -> Vec<u64> {
    let lo = (n_max / 2).max(1);
    let mut out = Vec::new();
    let mut n = 1;
    while n < lo {
        out.push(n);
        n *= 2;
    }
    out.extend(lo..=n_max);
    out
}

/// Least-squares slope of the points with `N` in `[N_max / 2, N_max]`.
/// Returns `(slope, (N_lo, N_hi), standard error)`.
pub fn fit_rate(points: &[(u64, f64)], n_max: u64) -> (f64, (u64, u64), f64) {
    let lo = (n_max / 2).max(1);
    let fit: Vec<(f64, f64)> = points.iter().filter(|p| p.0 >= lo && p.0 <= n_max).map(|&(n, h)| (n as f64, h)).collect();
    let window = (fit.first().map_or(lo, |p| p.0 as u64), fit.last().map_or(n_max, |p| p.0 as u64));
    if fit.len() < 2 {
        let rate = fit.first().map_or(0.0, |&(n, h)| h / n);
        return (rate.max(0.0), window, 0.0);
    }
    let k = fit.len() as f64;
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / k;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let se = if fit.len() > 2 {
        let ssr: f64 = fit.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    // exact curves that are affine on the window give rounding-level residue
    let se = if se < 1e-12 { 0.0 } else { se };
    (slope.max(0.0), window, se)
}

/// Which curve [`rate_over`] computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatePath {
    /// Exact when the largest shape admits it, block lower bound otherwise.
    Auto,
    /// Block lower bound when available, otherwise as `Auto`.
    PreferBound,
}

/// Entropy rate of `part` over the shapes `shape_at(N)` on the ladder up to
/// `n_max`, with one method for the whole curve.
pub fn rate_over<F>(m: &MeasureModel, spec: &SystemSpec, part: &PartitionSpec, b: Rational, n_max: u64, shape_at: F) -> Result<EntropyEstimate>
where
    F: Fn(u64) -> Result<ShapeSet> + Sync,
{
    rate_over_with(m, spec, part, b, n_max, RatePath::Auto, shape_at)
}

pub fn rate_over_with<F>(
    m: &MeasureModel,
    spec: &SystemSpec,
    part: &PartitionSpec,
    b: Rational,
    n_max: u64,
    path: RatePath,
    shape_at: F,
) -> Result<EntropyEstimate>
where
    F: Fn(u64) -> Result<ShapeSet> + Sync,
{
    if n_max == 0 {
        return Err(Error::InvalidArgument("N_max must be positive".into()));
    }
    let ladder = n_ladder(n_max);
    let top = shape_at(n_max)?;
    let trivial = top.is_empty() || part.is_trivial() || m.is_point_mass().is_some();
    let method = if path == RatePath::PreferBound && !trivial && block_lower_bound(m, spec, &top, part).is_ok() {
        Method::LowerBound
    } else {
        match shape_entropy_with_method(m, spec, &top, part) {
            Ok((_, method)) => method,
            Err(Error::UnsupportedExact(why)) => {
                block_lower_bound(m, spec, &top, part).map_err(|_| Error::UnsupportedExact(why))?;
                Method::LowerBound
            }
            Err(e) => return Err(e),
        }
    };
    let points = ladder
        .par_iter()
        .map(|&n| {
            let shape = shape_at(n)?;
            let h = if method == Method::LowerBound {
                block_lower_bound(m, spec, &shape, part)?
            } else {
                shape_entropy(m, spec, &shape, part)?
            };
            Ok((n, h))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rate, fit_window, slope_se) = fit_rate(&points, n_max);
    Ok(EntropyEstimate { rate, fit_window, slope_se, curve: EntropyCurve { points, b, partition: part.clone(), method } })
}

/// Tail slope of `H(⋁_{s ∈ Λ_N(b)} T^{-s} α)` against `N`.
pub fn directional_entropy_rate(
    m: &MeasureModel,
    spec: &SystemSpec,
    part: &PartitionSpec,
    dir: &DirectionSpec,
    b: Rational,
    n_max: u64,
) -> Result<EntropyEstimate> {
    directional_entropy_rate_with(m, spec, part, dir, b, n_max, RatePath::Auto)
}

pub fn directional_entropy_rate_with(
    m: &MeasureModel,
    spec: &SystemSpec,
    part: &PartitionSpec,
    dir: &DirectionSpec,
    b: Rational,
    n_max: u64,
    path: RatePath,
) -> Result<EntropyEstimate> {
    StripParams::new(b, n_max)?;
    if n_max > dir.horizon() {
        return Err(Error::HorizonExceeded { index: n_max as i64, horizon: dir.horizon() });
    }
    rate_over_with(m, spec, part, b, n_max, path, |n| dir.strip(&StripParams::new(b, n)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Zero,
    Positive,
}

/// Finite-scale proxy for membership of `A` in the directional Pinsker
/// algebra: `Zero` when the rate of `{A, A^c}` at this `b` is below `tol`.
/// One-sided and scale-dependent; it does not decide the σ-algebra.
pub fn pinsker_membership_proxy(
    m: &MeasureModel,
    spec: &SystemSpec,
    set_a: &PartitionSpec,
    dir: &DirectionSpec,
    b: Rational,
    n_max: u64,
    tol: f64,
) -> Result<(Classification, EntropyEstimate)> {
    if set_a.cell_count(spec.alphabet_size()) > 2 {
        return Err(Error::InvalidPartition("expected a partition with at most two cells".into()));
    }
    let est = directional_entropy_rate(m, spec, set_a, dir, b, n_max)?;
    let class = if est.rate < tol {
        if est.curve.method == Method::LowerBound {
            return Err(Error::UnsupportedExact("a lower bound cannot certify a zero rate".into()));
        }
        Classification::Zero
    } else {
        Classification::Positive
    };
    Ok((class, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Rect;
    use crate::measures::sample_config_stream;

    fn r(a: i64, b: i64) -> Rational {
        Rational::new(a, b)
    }

    fn golden() -> DirectionSpec {
        DirectionSpec::golden(1000).unwrap()
    }

    #[test]
    fn shape_entropy_examples() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let b = MeasureModel::uniform(2);
        let z = PartitionSpec::zero_coordinate();
        let shape: ShapeSet = (0..11).map(|i| Site::new(i, 0)).collect();
        assert_eq!(shape_entropy(&b, &fs, &shape, &z).unwrap(), 11.0);
        let td = SystemSpec::three_dot();
        let haar = MeasureModel::haar(td.clone()).unwrap();
        let sq = ShapeSet::rect(&Rect::new(0, 1, 0, 1));
        assert_eq!(shape_entropy(&haar, &td, &sq, &z).unwrap(), 3.0);
        assert_eq!(shape_entropy(&haar, &td, &ShapeSet::empty(), &z).unwrap(), 0.0);
    }

    #[test]
    fn paths_agree() {
        // the rank path and the cylinder sum agree on the three-dot system
        let td = SystemSpec::three_dot();
        let haar = MeasureModel::haar(td.clone()).unwrap();
        let w = ShapeSet::from_pairs(&[(0, 0), (1, 0)]);
        let lin = PartitionSpec::linear(w.clone(), vec![vec![1, 1]]);
        let tab = PartitionSpec::two_cell(w, 2, |v| (v[0] + v[1]) % 2 == 0);
        let shape = golden().strip(&StripParams::new(r(1, 1), 6).unwrap()).unwrap();
        let a = shape_entropy_with_method(&haar, &td, &shape, &lin).unwrap();
        let b = shape_entropy_with_method(&haar, &td, &shape, &tab).unwrap();
        assert_eq!(a.1, Method::ExactRank);
        assert_eq!(b.1, Method::CylinderSum);
        assert!((a.0 - b.0).abs() < 1e-9);
        // Bernoulli: product path against cylinder sum
        let fs = SystemSpec::full_shift(2).unwrap();
        let m = MeasureModel::bernoulli(&[0.3, 0.7]).unwrap();
        let z = PartitionSpec::zero_coordinate();
        let z_tab = PartitionSpec::table(ShapeSet::single(Site::ORIGIN), vec![0, 1]);
        let shape = ShapeSet::rect(&Rect::new(0, 2, 0, 2));
        let a = shape_entropy(&m, &fs, &shape, &z).unwrap();
        let b = shape_entropy(&m, &fs, &shape, &z_tab).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn row_markov_chain_formula_matches_enumeration() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let m = MeasureModel::row_markov(vec![vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        let shape = ShapeSet::from_pairs(&[(0, 0), (1, 0), (2, 0), (1, 1), (2, 1)]);
        let exact = shape_entropy(&m, &fs, &shape, &PartitionSpec::zero_coordinate()).unwrap();
        let tab = PartitionSpec::table(ShapeSet::single(Site::ORIGIN), vec![0, 1]);
        let enumerated = shape_entropy(&m, &fs, &shape, &tab).unwrap();
        assert!((exact - enumerated).abs() < 1e-9);
    }

    #[test]
    fn directional_rate_examples() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let z = PartitionSpec::zero_coordinate();
        let est = directional_entropy_rate(&MeasureModel::uniform(2), &fs, &z, &golden(), r(1, 1), 64).unwrap();
        // one count of 3 at m = 0, two sites in every other column
        assert_eq!(est.rate, 2.0);
        assert_eq!(est.slope_se, 0.0);
        let pm = MeasureModel::point_mass(2, 0).unwrap();
        assert_eq!(directional_entropy_rate(&pm, &fs, &z, &golden(), r(3, 1), 32).unwrap().rate, 0.0);
        let td = SystemSpec::three_dot();
        let haar = MeasureModel::haar(td.clone()).unwrap();
        let est = directional_entropy_rate(&haar, &td, &z, &golden(), r(1, 1), 64).unwrap();
        assert!(est.rate > 0.5);
        assert_eq!(est.curve.method, Method::ExactRank);
    }

    #[test]
    fn ladder_shape() {
        assert_eq!(n_ladder(5), vec![1, 2, 3, 4, 5]);
        let l = n_ladder(64);
        assert_eq!(*l.last().unwrap(), 64);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(l.iter().filter(|&&n| n >= 32).count(), 33);
        assert_eq!(&l[..5], &[1, 2, 4, 8, 16]);
    }

    #[test]
    fn empirical_estimates() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let m = MeasureModel::uniform(2);
        let rect = Rect::new(0, 1, 0, 1);
        let samples: Vec<ConfigWindow> = (0..2000).map(|i| sample_config_stream(&m, &fs, rect, 5, i).unwrap()).collect();
        let (h, se) = shape_entropy_empirical(&samples, 2, &ShapeSet::rect(&rect), &PartitionSpec::zero_coordinate(), Correction::MillerMadow, false).unwrap();
        assert!((h - 4.0).abs() < 4.0 * se + 1e-9, "{h} +- {se}");
        let same = vec![ConfigWindow::zeros(rect); 10];
        let (h, se) = shape_entropy_empirical(&same, 2, &ShapeSet::rect(&rect), &PartitionSpec::zero_coordinate(), Correction::None, false).unwrap();
        assert_eq!((h, se), (0.0, 0.0));
        let one = vec![ConfigWindow::zeros(Rect::new(0, 0, 0, 0))];
        assert!(matches!(
            shape_entropy_empirical(&one, 2, &ShapeSet::single(Site::ORIGIN), &PartitionSpec::zero_coordinate(), Correction::None, false),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn pinsker_examples() {
        let fs = SystemSpec::full_shift(2).unwrap();
        let m = MeasureModel::uniform(2);
        let d = golden();
        let (c, _) = pinsker_membership_proxy(&m, &fs, &PartitionSpec::whole_space(), &d, r(1, 1), 16, 0.01).unwrap();
        assert_eq!(c, Classification::Zero);
        let a = PartitionSpec::two_cell(ShapeSet::single(Site::ORIGIN), 2, |v| v[0] == 0);
        let (c, _) = pinsker_membership_proxy(&m, &fs, &a, &d, r(1, 1), 16, 0.01).unwrap();
        assert_eq!(c, Classification::Positive);
    }

    #[test]
    fn lower_bounds_hold() {
        let d = golden();
        let td = SystemSpec::three_dot();
        let haar = MeasureModel::haar(td.clone()).unwrap();
        let w = ShapeSet::rect(&Rect::new(0, 1, 0, 1));
        let part = PartitionSpec::two_cell(w, 2, |v| v.iter().sum::<u8>() == 0);
        for n in [2, 4, 6] {
            let shape = d.strip(&StripParams::new(r(1, 1), n).unwrap()).unwrap();
            let exact = shape_entropy(&haar, &td, &shape, &part).unwrap();
            let bound = block_lower_bound(&haar, &td, &shape, &part).unwrap();
            assert!(bound > 0.0 && bound <= exact + 1e-9, "{bound} {exact}");
        }
        let fs = SystemSpec::full_shift(2).unwrap();
        let m = MeasureModel::bernoulli(&[0.2, 0.8]).unwrap();
        let shape = d.strip(&StripParams::new(r(1, 1), 5).unwrap()).unwrap();
        let exact = shape_entropy(&m, &fs, &shape, &part).unwrap();
        let bound = block_lower_bound(&m, &fs, &shape, &part).unwrap();
        assert!(bound > 0.0 && bound <= exact + 1e-9);
    }

    #[test]
    fn thickening() {
        let z = PartitionSpec::zero_coordinate();
        let t = z.thicken(2, &[0, 1]).unwrap();
        assert_eq!(t.window, ShapeSet::from_pairs(&[(0, 0), (0, 1)]));
        let lin = PartitionSpec::linear(ShapeSet::from_pairs(&[(0, 0), (1, 0)]), vec![vec![1, 1]]);
        let t = lin.thicken(2, &[0, 1]).unwrap();
        assert_eq!(t.labeling, Labeling::Linear { functionals: vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]] });
        let tab = PartitionSpec::two_cell(ShapeSet::single(Site::ORIGIN), 2, |v| v[0] == 0);
        assert_eq!(tab.thicken(2, &[0, 1]).unwrap().cell_count(2), 4);
    }
}
