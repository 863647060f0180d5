//! Exact lattice geometry for a direction `v = (1, beta)`.
//!
//! `beta` is carried as a reduced fraction whose denominator exceeds the
//! declared horizon, so `i * beta` is never an integer for `0 < |i| <= horizon`
//! and every floor value below is unambiguous. All comparisons are done on
//! `i128` numerators; nothing here touches floating point.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Parse `"p/q"`, `"p"` or a decimal like `"0.5"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad rational {s:?}")))?;
        let q: i64 = q.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad rational {s:?}")))?;
        if q == 0 {
            return Err(Error::InvalidArgument(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let num: i64 = digits.parse().map_err(|_| Error::InvalidArgument(format!("bad rational {s:?}")))?;
        let den = 10i64
            .checked_pow(frac.len() as u32)
            .ok_or_else(|| Error::InvalidArgument(format!("too many decimals in {s:?}")))?;
        let r = Rational::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    let p: i64 = s.parse().map_err(|_| Error::InvalidArgument(format!("bad rational {s:?}")))?;
    Ok(Rational::from_integer(p))
}

pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod rational_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    impl Repr {
        fn parse<E: serde::de::Error>(self) -> std::result::Result<Rational, E> {
            match self {
                Repr::Int(i) => Ok(Rational::from_integer(i)),
                Repr::Text(t) => parse_rational(&t).map_err(E::custom),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        Repr::deserialize(d)?.parse()
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
            let texts: Vec<String> = v.iter().map(format_rational).collect();
            texts.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(Repr::parse).collect()
        }
    }
}

#[inline]
fn floor_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    Integer::div_floor(&a, &b)
}

#[inline]
fn ceil_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    -Integer::div_floor(&-a, &b)
}

/// A lattice point `(m, n)`; `m` is the column (first coordinate).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(i64, i64)", into = "(i64, i64)")]
pub struct Site {
    pub m: i64,
    pub n: i64,
}

impl Site {
    pub const ORIGIN: Site = Site { m: 0, n: 0 };

    pub const fn new(m: i64, n: i64) -> Self {
        Site { m, n }
    }

    pub fn sup_norm(self) -> i64 {
        self.m.abs().max(self.n.abs())
    }
}

impl From<(i64, i64)> for Site {
    fn from((m, n): (i64, i64)) -> Self {
        Site { m, n }
    }
}

impl From<Site> for (i64, i64) {
    fn from(s: Site) -> Self {
        (s.m, s.n)
    }
}

impl std::ops::Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.m + o.m, self.n + o.n)
    }
}

impl std::ops::Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.m - o.m, self.n - o.n)
    }
}

impl std::ops::Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site::new(-self.m, -self.n)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.m, self.n)
    }
}

/// Inclusive axis-aligned integer rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub m_min: i64,
    pub m_max: i64,
    pub n_min: i64,
    pub n_max: i64,
}

impl Rect {
    pub fn new(m_min: i64, m_max: i64, n_min: i64, n_max: i64) -> Self {
        Rect { m_min, m_max, n_min, n_max }
    }

    /// Rectangle with `width` columns and `height` rows starting at `origin`.
    pub fn with_size(origin: Site, width: i64, height: i64) -> Self {
        Rect::new(origin.m, origin.m + width - 1, origin.n, origin.n + height - 1)
    }

    pub fn centered(radius: i64) -> Self {
        Rect::new(-radius, radius, -radius, radius)
    }

    pub fn width(&self) -> i64 {
        (self.m_max - self.m_min + 1).max(0)
    }

    pub fn height(&self) -> i64 {
        (self.n_max - self.n_min + 1).max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn area(&self) -> usize {
        (self.width() * self.height()) as usize
    }

    pub fn contains(&self, s: Site) -> bool {
        s.m >= self.m_min && s.m <= self.m_max && s.n >= self.n_min && s.n <= self.n_max
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.is_empty()
            || (o.m_min >= self.m_min && o.m_max <= self.m_max && o.n_min >= self.n_min && o.n_max <= self.n_max)
    }

    pub fn translate(&self, v: Site) -> Rect {
        Rect::new(self.m_min + v.m, self.m_max + v.m, self.n_min + v.n, self.n_max + v.n)
    }

    pub fn expand(&self, r: i64) -> Rect {
        Rect::new(self.m_min - r, self.m_max + r, self.n_min - r, self.n_max + r)
    }

    /// Sites in lexicographic (m, then n) order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (self.m_min..=self.m_max).flat_map(move |m| (self.n_min..=self.n_max).map(move |n| Site::new(m, n)))
    }
}

/// Finite, duplicate-free set of sites kept in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Site>", into = "Vec<Site>")]
pub struct ShapeSet {
    sites: Vec<Site>,
}

impl From<Vec<Site>> for ShapeSet {
    fn from(mut sites: Vec<Site>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        ShapeSet { sites }
    }
}

impl From<ShapeSet> for Vec<Site> {
    fn from(s: ShapeSet) -> Self {
        s.sites
    }
}

impl FromIterator<Site> for ShapeSet {
    fn from_iter<I: IntoIterator<Item = Site>>(iter: I) -> Self {
        ShapeSet::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl ShapeSet {
    pub fn empty() -> Self {
        ShapeSet::default()
    }

    pub fn single(s: Site) -> Self {
        ShapeSet { sites: vec![s] }
    }

    pub fn from_pairs(pairs: &[(i64, i64)]) -> Self {
        pairs.iter().map(|&p| Site::from(p)).collect()
    }

    pub fn rect(r: &Rect) -> Self {
        ShapeSet { sites: r.sites().collect() }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn contains(&self, s: Site) -> bool {
        self.sites.binary_search(&s).is_ok()
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        self.sites.binary_search(&s).ok()
    }

    pub fn is_subset(&self, other: &ShapeSet) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }

    pub fn union(&self, other: &ShapeSet) -> ShapeSet {
        self.sites.iter().chain(other.sites.iter()).copied().collect()
    }

    pub fn translate(&self, v: Site) -> ShapeSet {
        // translation preserves lexicographic order
        ShapeSet { sites: self.sites.iter().map(|&s| s + v).collect() }
    }

    /// Minkowski sum `self ⊕ other`.
    pub fn minkowski(&self, other: &ShapeSet) -> ShapeSet {
        if other.len() == 1 {
            return self.translate(other.sites[0]);
        }
        let set: BTreeSet<Site> = self.sites.iter().flat_map(|&a| other.sites.iter().map(move |&b| a + b)).collect();
        ShapeSet { sites: set.into_iter().collect() }
    }

    pub fn bounding_rect(&self) -> Option<Rect> {
        let first = self.sites.first()?;
        let mut r = Rect::new(first.m, first.m, first.n, first.n);
        for s in &self.sites {
            r.m_min = r.m_min.min(s.m);
            r.m_max = r.m_max.max(s.m);
            r.n_min = r.n_min.min(s.n);
            r.n_max = r.n_max.max(s.n);
        }
        Some(r)
    }
}

impl<'a> IntoIterator for &'a ShapeSet {
    type Item = &'a Site;
    type IntoIter = std::slice::Iter<'a, Site>;
    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

/// Exact rational stand-in for an irrational slope `beta` in `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DirectionRepr", into = "DirectionRepr")]
pub struct DirectionSpec {
    beta_num: u64,
    beta_den: u64,
    horizon: u64,
    label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionRepr {
    beta_num: u64,
    beta_den: u64,
    horizon: u64,
    #[serde(default)]
    label: String,
}

impl TryFrom<DirectionRepr> for DirectionSpec {
    type Error = Error;
    fn try_from(r: DirectionRepr) -> Result<Self> {
        DirectionSpec::new(r.beta_num, r.beta_den, r.horizon, &r.label)
    }
}

impl From<DirectionSpec> for DirectionRepr {
    fn from(d: DirectionSpec) -> Self {
        DirectionRepr { beta_num: d.beta_num, beta_den: d.beta_den, horizon: d.horizon, label: d.label }
    }
}

/// Golden-ratio conjugate `(sqrt(5) - 1) / 2`.
pub const GOLDEN_CONJUGATE: f64 = 0.618_033_988_749_894_9;

impl DirectionSpec {
    pub fn new(beta_num: u64, beta_den: u64, horizon: u64, label: &str) -> Result<Self> {
        if beta_den == 0 || beta_num == 0 || beta_num >= beta_den {
            return Err(Error::InvalidDirection(format!("beta = {beta_num}/{beta_den} must lie strictly in (0, 1)")));
        }
        if beta_num.gcd(&beta_den) != 1 {
            return Err(Error::InvalidDirection(format!("beta = {beta_num}/{beta_den} is not reduced")));
        }
        if horizon == 0 {
            return Err(Error::InvalidDirection("horizon must be positive".into()));
        }
        if beta_den <= horizon {
            return Err(Error::InvalidDirection(format!(
                "denominator {beta_den} must exceed horizon {horizon}"
            )));
        }
        if beta_den > (1u64 << 40) {
            return Err(Error::InvalidDirection(format!("denominator {beta_den} too large")));
        }
        Ok(DirectionSpec { beta_num, beta_den, horizon, label: label.to_string() })
    }

    /// The Fibonacci convergent 987/1597 of the golden-ratio conjugate.
    pub fn golden(horizon: u64) -> Result<Self> {
        DirectionSpec::new(987, 1597, horizon, "golden")?.with_reference(GOLDEN_CONJUGATE)
    }

    /// Smallest Fibonacci convergent `F_k / F_{k+1}` whose floor sequence
    /// agrees with the golden-ratio conjugate up to `horizon`.
    pub fn fibonacci_convergent(horizon: u64) -> Result<Self> {
        let (mut a, mut b) = (1u64, 2u64);
        loop {
            if b > horizon {
                if let Ok(d) = DirectionSpec::new(a, b, horizon, "golden").and_then(|d| d.with_reference(GOLDEN_CONJUGATE)) {
                    return Ok(d);
                }
            }
            let next = a + b;
            a = b;
            b = next;
            if b > (1u64 << 40) {
                return Err(Error::InvalidDirection(format!("no convergent for horizon {horizon}")));
            }
        }
    }

    /// Checks that `floor(i * beta)` equals `floor(i * reference)` with a
    /// strict margin for every `|i| <= horizon`.
    pub fn with_reference(self, reference: f64) -> Result<Self> {
        let beta = self.beta_f64();
        let err = (beta - reference).abs();
        let q = self.beta_den as i128;
        let p = self.beta_num as i128;
        for i in 1..=self.horizon as i128 {
            let r = (i * p).rem_euclid(q);
            let dist = r.min(q - r) as f64 / q as f64;
            if dist <= i as f64 * err + 1e-12 {
                return Err(Error::InvalidDirection(format!(
                    "{}/{} does not resolve the reference slope at i = {i}",
                    self.beta_num, self.beta_den
                )));
            }
        }
        Ok(self)
    }

    pub fn beta_num(&self) -> u64 {
        self.beta_num
    }

    pub fn beta_den(&self) -> u64 {
        self.beta_den
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn beta(&self) -> Rational {
        Rational::new(self.beta_num as i64, self.beta_den as i64)
    }

    pub fn beta_f64(&self) -> f64 {
        self.beta_num as f64 / self.beta_den as f64
    }

    fn check_index(&self, i: i64) -> Result<()> {
        if i.unsigned_abs() > self.horizon {
            Err(Error::HorizonExceeded { index: i, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    /// `floor(i * beta + t)` in exact arithmetic.
    pub fn floor_affine(&self, t: Rational, i: i64) -> Result<i64> {
        check_phase(t)?;
        self.check_index(i)?;
        let q = self.beta_den as i128;
        let td = *t.denom() as i128;
        let num = i as i128 * self.beta_num as i128 * td + *t.numer() as i128 * q;
        Ok(floor_div(num, q * td) as i64)
    }

    /// `frac(t + i * beta)`, the rotated phase.
    pub fn rotate(&self, t: Rational, i: i64) -> Result<Rational> {
        check_phase(t)?;
        self.check_index(i)?;
        let q = self.beta_den as i128;
        let td = *t.denom() as i128;
        let den = q * td;
        let num = (i as i128 * self.beta_num as i128 * td + *t.numer() as i128 * q).rem_euclid(den);
        let g = num.gcd(&den);
        let (num, den) = (num / g, den / g);
        let num = i64::try_from(num).map_err(|_| Error::InvalidArgument("phase overflow".into()))?;
        let den = i64::try_from(den).map_err(|_| Error::InvalidArgument("phase overflow".into()))?;
        Ok(Rational::new(num, den))
    }

    /// Inclusive range of `n` with `beta*m - b <= n <= beta*m + b`.
    pub fn strip_column(&self, b: Rational, m: i64) -> Result<(i64, i64)> {
        self.check_index(m)?;
        Ok(self.column_unchecked(b, m))
    }

    fn column_unchecked(&self, b: Rational, m: i64) -> (i64, i64) {
        let q = self.beta_den as i128;
        let bd = *b.denom() as i128;
        let bn = *b.numer() as i128;
        let center = m as i128 * self.beta_num as i128 * bd;
        let den = q * bd;
        let lo = ceil_div(center - bn * q, den);
        let hi = floor_div(center + bn * q, den);
        (lo as i64, hi as i64)
    }

    /// `Λ_N(b)`: sites with `0 <= m < N` inside the strip of half-width `b`.
    pub fn strip(&self, p: &StripParams) -> Result<ShapeSet> {
        p.validate()?;
        if p.n > self.horizon {
            return Err(Error::HorizonExceeded { index: p.n as i64, horizon: self.horizon });
        }
        let mut sites = Vec::new();
        for m in 0..p.n as i64 {
            let (lo, hi) = self.column_unchecked(p.b, m);
            sites.extend((lo..=hi).map(|n| Site::new(m, n)));
        }
        // columns are emitted in increasing m, rows increasing: already lexicographic
        Ok(ShapeSet { sites })
    }

    /// Exact membership in the unbounded strip `Λ(b)`.
    pub fn strip_contains(&self, b: Rational, site: Site) -> Result<bool> {
        if b <= Rational::from_integer(0) {
            return Err(Error::InvalidArgument("strip half-width must be positive".into()));
        }
        self.check_index(site.m)?;
        let (lo, hi) = self.column_unchecked(b, site.m);
        Ok(site.n >= lo && site.n <= hi)
    }

    /// Vertical translates `{(0, k)}` whose `Λ(b2)`-copies cover `Λ_N(b1)`.
    ///
    /// Greedy set cover over candidates `|k| <= ceil(b1) + 1`, followed by an
    /// exhaustive membership check of every covered site.
    pub fn cover_translates(&self, b1: Rational, b2: Rational, n: u64) -> Result<ShapeSet> {
        let half = Rational::new(1, 2);
        if b2 < half {
            return Err(Error::CoverInfeasible(format!(
                "b2 = {} < 1/2: vertical translates leave gaps",
                format_rational(&b2)
            )));
        }
        let target = self.strip(&StripParams::new(b1, n)?)?;
        let reach = b1.ceil().to_integer() + 1;
        let candidates: Vec<i64> = {
            let mut c: Vec<i64> = (-reach..=reach).collect();
            c.sort_by_key(|k| (k.abs(), *k));
            c
        };
        let covers = |k: i64, s: Site| -> bool {
            let (lo, hi) = self.column_unchecked(b2, s.m);
            s.n - k >= lo && s.n - k <= hi
        };
        let mut uncovered: Vec<Site> = target.sites().to_vec();
        let mut chosen = Vec::new();
        while !uncovered.is_empty() {
            let best = candidates
                .iter()
                .filter(|k| !chosen.contains(*k))
                .map(|&k| (k, uncovered.iter().filter(|&&s| covers(k, s)).count()))
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| (b.0.abs(), b.0).cmp(&(a.0.abs(), a.0))));
            match best {
                Some((k, c)) if c > 0 => {
                    chosen.push(k);
                    uncovered.retain(|&s| !covers(k, s));
                }
                _ => {
                    return Err(Error::CoverInfeasible(format!("{} sites left uncovered", uncovered.len())));
                }
            }
        }
        let cover: ShapeSet = chosen.iter().map(|&k| Site::new(0, k)).collect();
        // postcondition: exhaustive membership check
        for &s in target.sites() {
            let ok = cover.iter().any(|c| self.strip_contains(b2, s - *c).unwrap_or(false));
            if !ok {
                return Err(Error::CoverInfeasible(format!("site {s} not covered")));
            }
        }
        Ok(cover)
    }

    /// Lattice points of `B + [0, t]·v` for a rational box `B`.
    pub fn tube(&self, bx: &RationalBox, t: Rational) -> Result<ShapeSet> {
        bx.validate()?;
        let zero = Rational::from_integer(0);
        if t < zero {
            return Err(Error::InvalidArgument("tube length must be nonnegative".into()));
        }
        let beta = self.beta();
        let m_lo = bx.m_lo.ceil().to_integer();
        let m_hi = (bx.m_hi + t).floor().to_integer();
        let mut sites = Vec::new();
        for m in m_lo..=m_hi {
            self.check_index(m)?;
            let mr = Rational::from_integer(m);
            // p ranges over [max(0, m - m_hi), min(t, m - m_lo)]
            let p_lo = std::cmp::max(zero, mr - bx.m_hi);
            let p_hi = std::cmp::min(t, mr - bx.m_lo);
            if p_lo > p_hi {
                continue;
            }
            let n_lo = (bx.n_lo + beta * p_lo).ceil().to_integer();
            let n_hi = (bx.n_hi + beta * p_hi).floor().to_integer();
            sites.extend((n_lo..=n_hi).map(|n| Site::new(m, n)));
        }
        Ok(ShapeSet::from(sites))
    }

    /// Strip parameters `(b, N)` with `tube(bx, t) ⊆ Λ_N(b)`, derived from the
    /// box geometry alone: `|n - beta m|` is invariant along `v`, so `b` is its
    /// maximum over the box corners.
    pub fn tube_bounds(&self, bx: &RationalBox, t: Rational) -> Result<StripParams> {
        bx.validate()?;
        if bx.m_lo < Rational::from_integer(0) {
            return Err(Error::InvalidArgument("box must lie in columns m >= 0".into()));
        }
        let beta = self.beta();
        let corners = [(bx.m_lo, bx.n_lo), (bx.m_lo, bx.n_hi), (bx.m_hi, bx.n_lo), (bx.m_hi, bx.n_hi)];
        let mut b = Rational::new(1, 2);
        for (x, y) in corners {
            let d = abs_rational(y - beta * x);
            if d > b {
                b = d;
            }
        }
        let n = (bx.m_hi + t).floor().to_integer() + 1;
        StripParams::new(b, n.max(1) as u64)
    }
}

pub fn check_phase(t: Rational) -> Result<()> {
    if t < Rational::from_integer(0) || t >= Rational::from_integer(1) {
        Err(Error::InvalidPhase(format_rational(&t)))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripParams {
    #[serde(with = "rational_str")]
    pub b: Rational,
    #[serde(rename = "N")]
    pub n: u64,
}

impl StripParams {
    pub fn new(b: Rational, n: u64) -> Result<Self> {
        let p = StripParams { b, n };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.b <= Rational::from_integer(0) {
            return Err(Error::InvalidArgument("strip half-width b must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("strip length N must be at least 1".into()));
        }
        Ok(())
    }
}

/// Closed rational box `[m_lo, m_hi] × [n_lo, n_hi]` in the plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalBox {
    pub m_lo: Rational,
    pub m_hi: Rational,
    pub n_lo: Rational,
    pub n_hi: Rational,
}

impl RationalBox {
    fn validate(&self) -> Result<()> {
        if self.m_lo > self.m_hi || self.n_lo > self.n_hi {
            return Err(Error::InvalidArgument("empty box".into()));
        }
        Ok(())
    }
}

fn abs_rational(r: Rational) -> Rational {
    if r < Rational::from_integer(0) {
        -r
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q)
    }

    fn golden() -> DirectionSpec {
        DirectionSpec::golden(1024).unwrap()
    }

    // Independent oracle: floor via decimal long division on u128.
    fn floor_oracle(p: u64, q: u64, tn: i64, td: i64, i: i64) -> i64 {
        let mut best = i64::MIN;
        for k in -2000..2000i64 {
            // k <= i p/q + tn/td  <=>  k q td <= i p td + tn q
            if (k as i128) * (q as i128) * (td as i128) <= (i as i128) * (p as i128) * (td as i128) + (tn as i128) * (q as i128) {
                best = k;
            }
        }
        best
    }

    #[test]
    fn floor_affine_examples() {
        let d = golden();
        assert_eq!(d.floor_affine(r(0, 1), 0).unwrap(), 0);
        assert_eq!(d.floor_affine(r(0, 1), 4).unwrap(), 2);
        assert_eq!(floor_oracle(987, 1597, 0, 1, 4), 2);
        assert_eq!(d.floor_affine(r(1, 2), 1).unwrap(), 1);
        assert_eq!(floor_oracle(987, 1597, 1, 2, 1), 1);
    }

    #[test]
    fn floor_affine_matches_oracle_on_panel() {
        let d = golden();
        for &(tn, td) in &[(0, 1), (1, 2), (3, 7), (999_999, 1_000_000)] {
            for i in [-1024, -77, -1, 0, 1, 5, 100, 1023, 1024] {
                assert_eq!(d.floor_affine(r(tn, td), i).unwrap(), floor_oracle(987, 1597, tn, td, i), "i={i} t={tn}/{td}");
            }
        }
    }

    #[test]
    fn floor_affine_errors() {
        let d = golden();
        assert!(matches!(d.floor_affine(r(0, 1), 1025), Err(Error::HorizonExceeded { .. })));
        assert!(matches!(d.floor_affine(r(1, 1), 0), Err(Error::InvalidPhase(_))));
        assert!(matches!(d.floor_affine(r(-1, 3), 0), Err(Error::InvalidPhase(_))));
    }

    #[test]
    fn direction_validation() {
        assert!(DirectionSpec::new(2, 4, 1, "").is_err());
        assert!(DirectionSpec::new(3, 2, 1, "").is_err());
        assert!(DirectionSpec::new(987, 1597, 1597, "").is_err());
        assert!(DirectionSpec::new(987, 1597, 1596, "").is_ok());
        // floor(2/3) = 0 but floor(2 * 0.618) = 1
        assert!(DirectionSpec::new(1, 3, 2, "").unwrap().with_reference(GOLDEN_CONJUGATE).is_err());
        let f = DirectionSpec::fibonacci_convergent(100).unwrap();
        assert!(f.beta_den() > 100);
    }

    #[test]
    fn strip_examples() {
        let d = golden();
        let s = d.strip(&StripParams::new(r(1, 1), 1).unwrap()).unwrap();
        assert_eq!(s, ShapeSet::from_pairs(&[(0, -1), (0, 0), (0, 1)]));
        let s = d.strip(&StripParams::new(r(1, 1), 5).unwrap()).unwrap();
        // per-column oracle: n in [m beta - 1, m beta + 1]
        let mut count = 0;
        for m in 0..5i64 {
            for n in -10..10i64 {
                let x = m as f64 * 987.0 / 1597.0;
                if n as f64 >= x - 1.0 && n as f64 <= x + 1.0 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 11);
        assert_eq!(s.len(), 11);
        let s = d.strip(&StripParams::new(r(2, 5), 1).unwrap()).unwrap();
        assert_eq!(s, ShapeSet::from_pairs(&[(0, 0)]));
        assert!(d.strip(&StripParams::new(r(1, 1), 2000).unwrap()).is_err());
    }

    #[test]
    fn strip_contains_examples() {
        let d = golden();
        assert!(d.strip_contains(r(1, 1), Site::new(2, 1)).unwrap());
        assert!(!d.strip_contains(r(1, 1), Site::new(2, 3)).unwrap());
        assert!(d.strip_contains(r(1, 3), Site::ORIGIN).unwrap());
        assert!(d.strip_contains(r(1, 1), Site::new(-3, -2)).unwrap());
        assert!(d.strip_contains(r(1, 1), Site::new(5000, 0)).is_err());
    }

    #[test]
    fn cover_examples() {
        let d = golden();
        let c = d.cover_translates(r(1, 1), r(1, 1), 10).unwrap();
        assert_eq!(c, ShapeSet::single(Site::ORIGIN));
        let c = d.cover_translates(r(3, 1), r(1, 1), 10).unwrap();
        assert!(c.iter().all(|s| s.m == 0 && s.n.abs() <= 3));
        // exhaustive re-check
        let target = d.strip(&StripParams::new(r(3, 1), 10).unwrap()).unwrap();
        for s in &target {
            assert!(c.iter().any(|k| d.strip_contains(r(1, 1), *s - *k).unwrap()));
        }
        assert!(matches!(d.cover_translates(r(2, 1), r(1, 4), 5), Err(Error::CoverInfeasible(_))));
    }

    #[test]
    fn tube_inside_bounding_strip() {
        let d = golden();
        let bx = RationalBox { m_lo: r(0, 1), m_hi: r(3, 2), n_lo: r(-1, 2), n_hi: r(2, 1) };
        for t in [r(0, 1), r(5, 2), r(40, 1)] {
            let tube = d.tube(&bx, t).unwrap();
            let p = d.tube_bounds(&bx, t).unwrap();
            let strip = d.strip(&p).unwrap();
            assert!(!tube.is_empty());
            assert!(tube.is_subset(&strip), "t = {t}");
        }
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("2/5").unwrap(), r(2, 5));
        assert_eq!(parse_rational("3").unwrap(), r(3, 1));
        assert_eq!(parse_rational("0.5").unwrap(), r(1, 2));
        assert_eq!(parse_rational("-1.25").unwrap(), r(-5, 4));
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn shape_set_json_is_lexicographic_pairs() {
        let s = ShapeSet::from_pairs(&[(1, 0), (0, 1), (0, -1), (1, 0)]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[[0,-1],[0,1],[1,0]]");
        let back: ShapeSet = serde_json::from_str("[[1,0],[0,0]]").unwrap();
        assert_eq!(back.sites(), &[Site::new(0, 0), Site::new(1, 0)]);
    }
}
