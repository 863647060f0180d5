//! Finitely presented Z²-shift systems and finite windows on their
//! configurations.
//!
//! Site `(m, n)`: `m` is the horizontal coordinate, `n` the vertical one.
//! `(T^v x)(s) = x(s + v)`. For second-order CA systems a configuration is a
//! space-time diagram: row `n` is the CA state at time `n`, so the vertical
//! generator is one step of the reversible update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{is_prime, Field};
use crate::lattice::{Rect, ShapeSet, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintTerm {
    pub site: Site,
    pub coeff: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SystemSpec {
    FullShift {
        alphabet_size: u32,
    },
    /// `{x : Σ coeff · x(s + t) = 0 mod q for every t}`.
    AlgebraicSubshift {
        alphabet_size: u32,
        constraint: Vec<ConstraintTerm>,
    },
    /// Space-time diagrams of `x_{t+1}(i) = f(x_t(i-r..=i+r)) - x_{t-1}(i) mod q`.
    /// `rule[k]` is `f` at the neighbourhood whose base-q digits (left to
    /// right, least significant first) are `k`.
    SecondOrderCA {
        alphabet_size: u32,
        radius: u32,
        rule: Vec<u8>,
    },
}

impl SystemSpec {
    pub fn full_shift(q: u32) -> Result<Self> {
        let s = SystemSpec::FullShift { alphabet_size: q };
        s.check()?;
        Ok(s)
    }

    /// Ledrappier's three-dot system over GF(2).
    pub fn three_dot() -> Self {
        SystemSpec::AlgebraicSubshift {
            alphabet_size: 2,
            constraint: vec![
                ConstraintTerm { site: Site::new(0, 0), coeff: 1 },
                ConstraintTerm { site: Site::new(1, 0), coeff: 1 },
                ConstraintTerm { site: Site::new(0, 1), coeff: 1 },
            ],
        }
    }

    pub fn algebraic(q: u32, terms: &[((i64, i64), u8)]) -> Result<Self> {
        let s = SystemSpec::AlgebraicSubshift {
            alphabet_size: q,
            constraint: terms.iter().map(|&(s, c)| ConstraintTerm { site: Site::from(s), coeff: c }).collect(),
        };
        s.check()?;
        Ok(s)
    }

    /// Second-order CA with a linear local rule `f = Σ coeffs[k] x(i + k - r)`.
    pub fn linear_ca(q: u32, coeffs: &[u8]) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::InvalidSystem("linear CA needs an odd number of coefficients".into()));
        }
        let width = coeffs.len() as u32;
        let size = (q as usize).pow(width);
        let mut rule = vec![0u8; size];
        for (k, slot) in rule.iter_mut().enumerate() {
            let mut rest = k;
            let mut acc = 0u32;
            for &c in coeffs {
                acc += c as u32 * (rest % q as usize) as u32;
                rest /= q as usize;
            }
            *slot = (acc % q) as u8;
        }
        let s = SystemSpec::SecondOrderCA { alphabet_size: q, radius: width / 2, rule };
        s.check()?;
        Ok(s)
    }

    pub fn alphabet_size(&self) -> u32 {
        match self {
            SystemSpec::FullShift { alphabet_size }
            | SystemSpec::AlgebraicSubshift { alphabet_size, .. }
            | SystemSpec::SecondOrderCA { alphabet_size, .. } => *alphabet_size,
        }
    }

    pub fn check(&self) -> Result<()> {
        let q = self.alphabet_size();
        if !(2..=255).contains(&q) {
            return Err(Error::InvalidSystem(format!("alphabet size {q} outside 2..=255")));
        }
        match self {
            SystemSpec::FullShift { .. } => Ok(()),
            SystemSpec::AlgebraicSubshift { constraint, .. } => {
                if !is_prime(q) {
                    return Err(Error::InvalidSystem(format!("algebraic subshift needs prime q, got {q}")));
                }
                if constraint.is_empty() {
                    return Err(Error::InvalidSystem("empty constraint".into()));
                }
                let mut sites: Vec<Site> = constraint.iter().map(|t| t.site).collect();
                sites.sort();
                sites.dedup();
                if sites.len() != constraint.len() {
                    return Err(Error::InvalidSystem("duplicate constraint site".into()));
                }
                if constraint.iter().any(|t| (t.coeff as u32).is_multiple_of(q)) {
                    return Err(Error::InvalidSystem("constraint coefficients must be nonzero mod q".into()));
                }
                Ok(())
            }
            SystemSpec::SecondOrderCA { radius, rule, .. } => {
                let expected = (q as usize).checked_pow(2 * radius + 1);
                if expected != Some(rule.len()) {
                    return Err(Error::InvalidSystem(format!(
                        "rule table has {} entries, expected q^(2r+1)",
                        rule.len()
                    )));
                }
                if rule.iter().any(|&v| v as u32 >= q) {
                    return Err(Error::InvalidSystem("rule output outside alphabet".into()));
                }
                Ok(())
            }
        }
    }

    pub fn field(&self) -> Result<Field> {
        Field::new(self.alphabet_size())
    }
}

/// Values on a finite shape; `values[k]` belongs to `shape.sites()[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PatternRepr", into = "PatternRepr")]
pub struct PatternWindow {
    shape: ShapeSet,
    values: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternRepr {
    shape: Vec<Site>,
    values: Vec<u8>,
}

impl TryFrom<PatternRepr> for PatternWindow {
    type Error = Error;
    fn try_from(r: PatternRepr) -> Result<Self> {
        if r.shape.len() != r.values.len() {
            return Err(Error::InvalidArgument("shape and values differ in length".into()));
        }
        let mut pairs: Vec<(Site, u8)> = r.shape.into_iter().zip(r.values).collect();
        pairs.sort_by_key(|p| p.0);
        let n = pairs.len();
        pairs.dedup_by_key(|p| p.0);
        if pairs.len() != n {
            return Err(Error::InvalidArgument("duplicate site in pattern".into()));
        }
        Ok(PatternWindow { shape: pairs.iter().map(|p| p.0).collect(), values: pairs.iter().map(|p| p.1).collect() })
    }
}

impl From<PatternWindow> for PatternRepr {
    fn from(p: PatternWindow) -> Self {
        PatternRepr { shape: p.shape.into(), values: p.values }
    }
}

impl PatternWindow {
    pub fn new(shape: ShapeSet, values: Vec<u8>) -> Result<Self> {
        if shape.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "pattern has {} values for {} sites",
                values.len(),
                shape.len()
            )));
        }
        Ok(PatternWindow { shape, values })
    }

    pub fn from_pairs(pairs: &[((i64, i64), u8)]) -> Result<Self> {
        PatternRepr { shape: pairs.iter().map(|p| Site::from(p.0)).collect(), values: pairs.iter().map(|p| p.1).collect() }
            .try_into()
    }

    pub fn shape(&self) -> &ShapeSet {
        &self.shape
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, s: Site) -> Option<u8> {
        self.shape.index_of(s).map(|i| self.values[i])
    }

    pub fn translate(&self, v: Site) -> PatternWindow {
        PatternWindow { shape: self.shape.translate(v), values: self.values.clone() }
    }

    /// True when the two cylinders share no configuration.
    pub fn disjoint_from(&self, other: &PatternWindow) -> bool {
        self.shape.iter().zip(&self.values).any(|(s, v)| other.get(*s).is_some_and(|w| w != *v))
    }
}

/// A rectangular window of a configuration, stored column-major: index
/// order is the lexicographic site order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigWindow {
    rect: Rect,
    values: Vec<u8>,
}

impl ConfigWindow {
    pub fn new(rect: Rect, values: Vec<u8>) -> Result<Self> {
        if rect.is_empty() {
            return Err(Error::InvalidArgument("empty rectangle".into()));
        }
        if values.len() != rect.area() {
            return Err(Error::InvalidArgument(format!("{} values for a {} site rectangle", values.len(), rect.area())));
        }
        Ok(ConfigWindow { rect, values })
    }

    pub fn zeros(rect: Rect) -> Self {
        ConfigWindow { rect, values: vec![0; rect.area()] }
    }

    pub fn from_fn(rect: Rect, f: impl Fn(Site) -> u8) -> Self {
        ConfigWindow { rect, values: rect.sites().map(f).collect() }
    }

    pub fn rect(&self) -> &Rect {
        &self.rect
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    fn index(&self, s: Site) -> Option<usize> {
        if self.rect.contains(s) {
            Some(((s.m - self.rect.m_min) * self.rect.height() + (s.n - self.rect.n_min)) as usize)
        } else {
            None
        }
    }

    #[inline]
    pub fn get(&self, s: Site) -> Option<u8> {
        self.index(s).map(|i| self.values[i])
    }

    pub fn try_get(&self, s: Site) -> Result<u8> {
        self.get(s).ok_or(Error::OutOfWindow { m: s.m, n: s.n })
    }

    pub fn set(&mut self, s: Site, v: u8) -> Result<()> {
        let i = self.index(s).ok_or(Error::OutOfWindow { m: s.m, n: s.n })?;
        self.values[i] = v;
        Ok(())
    }

    pub fn restrict(&self, shape: &ShapeSet) -> Result<PatternWindow> {
        let values = shape.iter().map(|&s| self.try_get(s)).collect::<Result<Vec<_>>>()?;
        Ok(PatternWindow { shape: shape.clone(), values })
    }

    /// Sub-window on `rect`.
    pub fn crop(&self, rect: Rect) -> Result<ConfigWindow> {
        if !self.rect.contains_rect(&rect) {
            return Err(Error::OutOfWindow { m: rect.m_min, n: rect.n_min });
        }
        Ok(ConfigWindow::from_fn(rect, |s| self.get(s).unwrap()))
    }

    pub fn as_pattern(&self) -> PatternWindow {
        PatternWindow { shape: ShapeSet::rect(&self.rect), values: self.values.clone() }
    }

    /// The window of `T^v x`: same values, rectangle shifted by `-v`.
    pub fn shifted(&self, v: Site) -> ConfigWindow {
        ConfigWindow { rect: self.rect.translate(-v), values: self.values.clone() }
    }
}

/// `s ↦ x(s + v)` restricted to `window`.
///
/// Shift systems read the stored values directly. For second-order CA
/// systems, rows missing above or below the stored window are produced by
/// running the reversible update forwards or backwards.
pub fn act(spec: &SystemSpec, x: &ConfigWindow, v: Site, window: &ShapeSet) -> Result<PatternWindow> {
    let Some(need) = window.bounding_rect().map(|r| r.translate(v)) else {
        return Ok(PatternWindow { shape: ShapeSet::empty(), values: Vec::new() });
    };
    let extended;
    let src = match spec {
        SystemSpec::SecondOrderCA { .. } if !x.rect.contains_rect(&need) => {
            extended = ca_extend(spec, x, need.n_min, need.n_max)?;
            &extended
        }
        _ => x,
    };
    let values = window.iter().map(|&s| src.try_get(s + v)).collect::<Result<Vec<_>>>()?;
    Ok(PatternWindow { shape: window.clone(), values })
}

fn ca_rule_eval(q: u32, radius: u32, rule: &[u8], row: impl Fn(i64) -> Option<u8>, i: i64) -> Option<u8> {
    let mut idx = 0usize;
    let mut scale = 1usize;
    for k in -(radius as i64)..=radius as i64 {
        idx += row(i + k)? as usize * scale;
        scale *= q as usize;
    }
    Some(rule[idx])
}

/// Extends a CA space-time window vertically to cover rows
/// `n_lo..=n_hi`. The light cone shrinks by `radius` columns per step; the
/// result keeps only columns that are fully determined.
pub fn ca_extend(spec: &SystemSpec, x: &ConfigWindow, n_lo: i64, n_hi: i64) -> Result<ConfigWindow> {
    let SystemSpec::SecondOrderCA { alphabet_size: q, radius, rule } = spec else {
        return Err(Error::InvalidArgument("ca_extend needs a SecondOrderCA system".into()));
    };
    let (q, r) = (*q, *radius as i64);
    if x.rect.height() < 2 {
        return Err(Error::OutOfWindow { m: x.rect.m_min, n: x.rect.n_min + 1 });
    }
    let up = (n_hi - x.rect.n_max).max(0);
    let down = (x.rect.n_min - n_lo).max(0);
    let shrink = r * up.max(down);
    let rect = Rect::new(x.rect.m_min + shrink, x.rect.m_max - shrink, x.rect.n_min - down, x.rect.n_max + up);
    if rect.width() <= 0 {
        return Err(Error::OutOfWindow { m: x.rect.m_min, n: n_hi });
    }
    // rows keyed by time, each row spans the original column range
    let base_cols = x.rect.m_min..=x.rect.m_max;
    let width = x.rect.width() as usize;
    let mut rows: std::collections::BTreeMap<i64, Vec<Option<u8>>> = std::collections::BTreeMap::new();
    for n in x.rect.n_min..=x.rect.n_max {
        rows.insert(n, base_cols.clone().map(|m| x.get(Site::new(m, n))).collect());
    }
    let m0 = x.rect.m_min;
    let step = |center: &Vec<Option<u8>>, other: &Vec<Option<u8>>| -> Vec<Option<u8>> {
        (0..width)
            .map(|k| {
                let i = m0 + k as i64;
                let f = ca_rule_eval(q, r as u32, rule, |j| {
                    let jj = j - m0;
                    if jj < 0 || jj >= width as i64 {
                        None
                    } else {
                        center[jj as usize]
                    }
                }, i)?;
                let o = other[k]?;
                Some(((f as u32 + q - o as u32) % q) as u8)
            })
            .collect()
    };
    for n in x.rect.n_max + 1..=rect.n_max {
        let next = step(&rows[&(n - 1)], &rows[&(n - 2)]);
        rows.insert(n, next);
    }
    for n in (rect.n_min..x.rect.n_min).rev() {
        let prev = step(&rows[&(n + 1)], &rows[&(n + 2)]);
        rows.insert(n, prev);
    }
    let mut out = ConfigWindow::zeros(rect);
    for s in rect.sites() {
        let v = rows[&s.n][(s.m - m0) as usize].ok_or(Error::OutOfWindow { m: s.m, n: s.n })?;
        out.set(s, v)?;
    }
    Ok(out)
}

/// Runs the CA from two seed rows (times 0 and 1) for `steps` further rows.
pub fn ca_evolve(spec: &SystemSpec, row0: &[u8], row1: &[u8], m_min: i64, steps: u64) -> Result<ConfigWindow> {
    if row0.len() != row1.len() || row0.is_empty() {
        return Err(Error::InvalidArgument("seed rows must be nonempty and equally long".into()));
    }
    let rect = Rect::with_size(Site::new(m_min, 0), row0.len() as i64, 2);
    let seed = ConfigWindow::from_fn(rect, |s| if s.n == 0 { row0[(s.m - m_min) as usize] } else { row1[(s.m - m_min) as usize] });
    if steps == 0 {
        return Ok(seed);
    }
    ca_extend(spec, &seed, 0, 1 + steps as i64)
}

/// Membership test on every constraint translate that fits inside the
/// pattern's shape. Full shifts accept everything.
pub fn validate(spec: &SystemSpec, p: &PatternWindow) -> bool {
    match spec {
        SystemSpec::FullShift { .. } => true,
        SystemSpec::AlgebraicSubshift { alphabet_size, constraint } => {
            let q = *alphabet_size;
            let anchor = constraint[0].site;
            p.shape().iter().all(|&s| {
                let t = s - anchor;
                let mut sum = 0u32;
                for term in constraint {
                    match p.get(term.site + t) {
                        Some(v) => sum += term.coeff as u32 * v as u32,
                        None => return true,
                    }
                }
                sum.is_multiple_of(q)
            })
        }
        SystemSpec::SecondOrderCA { alphabet_size, radius, rule } => {
            let q = *alphabet_size;
            p.shape().iter().all(|&s| {
                // s is the "next" cell (i, n+1)
                let (i, n) = (s.m, s.n - 1);
                let Some(prev) = p.get(Site::new(i, n - 1)) else { return true };
                let Some(f) = ca_rule_eval(q, *radius, rule, |j| p.get(Site::new(j, n)), i) else { return true };
                let next = p.get(s).unwrap();
                (next as u32 + prev as u32) % q == f as u32 % q
            })
        }
    }
}

/// Exponent `e` with `d(T^c x, T^c y) = 2^{-e}` at truncation radius `r`:
/// `e` is the sup-norm radius of the nearest disagreement around `c`, or
/// `r + 1` when the boxes agree.
pub fn distance_exponent(x: &ConfigWindow, y: &ConfigWindow, center: Site, r: u32) -> Result<u32> {
    let r = r as i64;
    let bx = Rect::centered(r).translate(center);
    for w in [x, y] {
        if !w.rect.contains_rect(&bx) {
            let corner = if w.rect.contains(Site::new(bx.m_min, bx.n_min)) { Site::new(bx.m_max, bx.n_max) } else { Site::new(bx.m_min, bx.n_min) };
            return Err(Error::OutOfWindow { m: corner.m, n: corner.n });
        }
    }
    let differs = |s: Site| x.get(s) != y.get(s);
    if differs(center) {
        return Ok(0);
    }
    for k in 1..=r {
        let ring = (-k..=k).flat_map(|j| {
            [Site::new(-k, j), Site::new(k, j), Site::new(j, -k), Site::new(j, k)]
        });
        if ring.map(|o| center + o).any(differs) {
            return Ok(k as u32);
        }
    }
    Ok(r as u32 + 1)
}

/// `d(T^c x, T^c y)` in `[2^{-(r+1)}, 1]`.
pub fn distance_at(x: &ConfigWindow, y: &ConfigWindow, center: Site, r: u32) -> Result<f64> {
    distance_exponent(x, y, center, r).map(|e| (-(e as f64)).exp2())
}

/// Distance between two configurations, read around the origin.
pub fn config_distance(x: &ConfigWindow, y: &ConfigWindow, r: u32) -> Result<f64> {
    distance_at(x, y, Site::ORIGIN, r)
}
