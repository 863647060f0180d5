//! Haar marginals of algebraic subshifts.
//!
//! Two routes compute the image of `X` on a finite shape:
//!
//! * the box route solves the constraint system on the shape's bounding box
//!   and projects the solution space onto the shape;
//! * the propagation route applies when the constraint has a unique site on
//!   its top (or bottom) row. Every value is then a linear function of a few
//!   consecutive base rows, and Haar measure restricted to those rows is
//!   iid uniform, so the marginal is the image of a linear map.
//!
//! Both give a subspace of `GF(q)^shape` carrying the uniform distribution.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gf::{self, EchelonBasis, Field};
use crate::lattice::{Rect, ShapeSet, Site};
use crate::systems::{ConfigWindow, SystemSpec};

/// Box-route problems larger than this many variables are refused.
pub const BOX_ROUTE_MAX_VARS: usize = 1024;

fn constraint_of(spec: &SystemSpec) -> Result<(Field, Vec<(Site, u8)>)> {
    match spec {
        SystemSpec::AlgebraicSubshift { alphabet_size, constraint } => {
            spec.check()?;
            let field = Field::new(*alphabet_size)?;
            let q = *alphabet_size as u8;
            Ok((field, constraint.iter().map(|t| (t.site, t.coeff % q)).collect()))
        }
        _ => Err(Error::InvalidSystem("expected an AlgebraicSubshift".into())),
    }
}

/// Outcome of the projection count on one shape.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct RankCertificate {
    pub shape: ShapeSet,
    /// Dimension of the projection of the solution space onto the shape.
    pub free_dim: usize,
    /// `|shape|` minus the rank of the constraint translates inside the shape.
    pub raw_free_dim: usize,
    /// Constraint translates inside the bounding box.
    pub constraint_rows: usize,
    pub q: u32,
}

impl RankCertificate {
    /// `q^free_dim`, when it fits.
    pub fn pattern_count(&self) -> Option<u128> {
        (self.q as u128).checked_pow(self.free_dim as u32)
    }
}

/// The Haar marginal on `shape`: the uniform distribution on a subspace.
#[derive(Clone, Debug)]
pub struct Marginal {
    shape: ShapeSet,
    field: Field,
    basis: EchelonBasis,
}

impl Marginal {
    fn from_generators<'a>(shape: ShapeSet, field: Field, gens: impl IntoIterator<Item = &'a [u8]>) -> Self {
        let mut basis = EchelonBasis::new(field, shape.len());
        for g in gens {
            if basis.rank() == shape.len() {
                break;
            }
            basis.insert(g);
        }
        Marginal { shape, field, basis }
    }

    /// Uniform marginal of the full shift.
    pub fn full(shape: ShapeSet, field: Field) -> Self {
        let len = shape.len();
        let gens: Vec<Vec<u8>> = (0..len)
            .map(|i| {
                let mut e = vec![0u8; len];
                e[i] = 1;
                e
            })
            .collect();
        Marginal::from_generators(shape, field, gens.iter().map(|v| v.as_slice()))
    }

    pub fn shape(&self) -> &ShapeSet {
        &self.shape
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn free_dim(&self) -> usize {
        self.basis.rank()
    }

    /// Whether the pattern (values in shape order) has positive probability.
    pub fn contains(&self, values: &[u8]) -> bool {
        values.len() == self.shape.len() && self.basis.contains(values)
    }

    pub fn basis(&self) -> Vec<Vec<u8>> {
        self.basis.vectors()
    }

    /// Dimension of the image of the marginal's support under a linear map.
    pub fn image_rank(&self, map: impl Fn(&[u8]) -> Vec<u8>, out_len: usize) -> usize {
        let images: Vec<Vec<u8>> = self.basis().iter().map(|b| map(b)).collect();
        gf::rank(self.field, out_len, images.iter().map(|v| v.as_slice()))
    }

    /// Visits every pattern in the support; `q^free_dim` calls.
    pub fn for_each_pattern(&self, visit: impl FnMut(&[u8])) {
        gf::for_each_in_span(self.field, self.shape.len(), &self.basis(), visit)
    }
}

/// Box route: constraints on the bounding box, projected onto the shape.
pub fn box_marginal(spec: &SystemSpec, shape: &ShapeSet) -> Result<(Marginal, RankCertificate)> {
    let (field, terms) = constraint_of(spec)?;
    let Some(bx) = shape.bounding_rect() else {
        let m = Marginal::from_generators(ShapeSet::empty(), field, std::iter::empty());
        let cert = RankCertificate { shape: shape.clone(), free_dim: 0, raw_free_dim: 0, constraint_rows: 0, q: field.q() };
        return Ok((m, cert));
    };
    if bx.area() > BOX_ROUTE_MAX_VARS {
        return Err(Error::UnsupportedExact(format!("bounding box of {} sites exceeds the box-route limit", bx.area())));
    }
    let box_sites = ShapeSet::rect(&bx);
    let nvars = box_sites.len();
    let anchor = terms[0].0;
    let mut rows = Vec::new();
    let mut in_shape = Vec::new();
    for &s in box_sites.iter() {
        let t = s - anchor;
        let idx: Option<Vec<usize>> = terms.iter().map(|(k, _)| box_sites.index_of(*k + t)).collect();
        let Some(idx) = idx else { continue };
        let mut row = vec![0u8; nvars];
        for (i, (_, c)) in idx.iter().zip(&terms) {
            row[*i] = *c;
        }
        if terms.iter().all(|(k, _)| shape.contains(*k + t)) {
            let mut r = vec![0u8; shape.len()];
            for (k, c) in &terms {
                r[shape.index_of(*k + t).unwrap()] = *c;
            }
            in_shape.push(r);
        }
        rows.push(row);
    }
    let null = gf::nullspace(field, &rows, nvars);
    let picks: Vec<usize> = shape.iter().map(|s| box_sites.index_of(*s).unwrap()).collect();
    let projected: Vec<Vec<u8>> = null.iter().map(|v| picks.iter().map(|&i| v[i]).collect()).collect();
    let marginal = Marginal::from_generators(shape.clone(), field, projected.iter().map(|v| v.as_slice()));
    let raw_rank = gf::rank(field, shape.len(), in_shape.iter().map(|v| v.as_slice()));
    let cert = RankCertificate {
        shape: shape.clone(),
        free_dim: marginal.free_dim(),
        raw_free_dim: shape.len() - raw_rank,
        constraint_rows: rows.len(),
        q: field.q(),
    };
    Ok((marginal, cert))
}

/// Rank certificate for `shape` by the box route; shapes beyond the box limit
/// fall back to the propagation route (with `raw_free_dim` still computed).
pub fn projection_count(spec: &SystemSpec, shape: &ShapeSet) -> Result<RankCertificate> {
    match box_marginal(spec, shape) {
        Ok((_, cert)) => Ok(cert),
        Err(Error::UnsupportedExact(_)) => {
            let (field, terms) = constraint_of(spec)?;
            let m = Propagator::new(spec)?.marginal(shape)?;
            let anchor = terms[0].0;
            let mut basis = EchelonBasis::new(field, shape.len());
            let mut rows = 0;
            for &s in shape.iter() {
                let t = s - anchor;
                if terms.iter().all(|(k, _)| shape.contains(*k + t)) {
                    let mut r = vec![0u8; shape.len()];
                    for (k, c) in &terms {
                        r[shape.index_of(*k + t).unwrap()] = *c;
                    }
                    basis.insert(&r);
                    rows += 1;
                }
            }
            Ok(RankCertificate {
                shape: shape.clone(),
                free_dim: m.free_dim(),
                raw_free_dim: shape.len() - basis.rank(),
                constraint_rows: rows,
                q: field.q(),
            })
        }
        Err(e) => Err(e),
    }
}

/// Marginal by whichever route applies: propagation when available, box
/// route otherwise.
pub fn haar_marginal(spec: &SystemSpec, shape: &ShapeSet) -> Result<Marginal> {
    match Propagator::new(spec) {
        Ok(p) => p.marginal(shape),
        Err(_) => box_marginal(spec, shape).map(|(m, _)| m),
    }
}

/// Base-row coordinates of a propagation run.
#[derive(Clone, Debug)]
pub struct BaseLayout {
    /// Base sites in vector-index order (original coordinates).
    pub sites: Vec<Site>,
}

/// Upward (or, mirrored, downward) propagation of a constraint with a unique
/// extreme-row site.
#[derive(Clone, Debug)]
pub struct Propagator {
    field: Field,
    flip: bool,
    /// `(dm, dn, w)`: the pivot value is `Σ w · x(pivot + (dm, dn))`, `dn < 0`.
    deps: Vec<(i64, i64, u8)>,
    depth: i64,
}

type Rows<T> = Vec<(i64, Vec<T>)>;

impl Propagator {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let (field, terms) = constraint_of(spec)?;
        for flip in [false, true] {
            let oriented: Vec<(Site, u8)> =
                terms.iter().map(|&(s, c)| (if flip { Site::new(s.m, -s.n) } else { s }, c)).collect();
            let top = oriented.iter().map(|t| t.0.n).max().unwrap();
            let bottom = oriented.iter().map(|t| t.0.n).min().unwrap();
            let tops: Vec<&(Site, u8)> = oriented.iter().filter(|t| t.0.n == top).collect();
            if tops.len() != 1 || top == bottom {
                continue;
            }
            let (p, cp) = *tops[0];
            let w = field.neg(field.inv(cp));
            let deps = oriented
                .iter()
                .filter(|t| t.0 != p)
                .map(|&(k, c)| (k.m - p.m, k.n - p.n, field.mul(w, c)))
                .collect();
            return Ok(Propagator { field, flip, deps, depth: top - bottom });
        }
        Err(Error::UnsupportedExact("constraint has no unique top or bottom site".into()))
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// True when propagation runs downward.
    pub fn is_flipped(&self) -> bool {
        self.flip
    }

    /// Number of consecutive base rows.
    pub fn depth(&self) -> i64 {
        self.depth
    }

    fn orient(&self, s: Site) -> Site {
        if self.flip {
            Site::new(s.m, -s.n)
        } else {
            s
        }
    }

    /// Column interval per oriented row `base..=top` needed to evaluate `want`.
    fn intervals(&self, base: i64, want: &BTreeMap<i64, (i64, i64)>) -> Vec<Option<(i64, i64)>> {
        let top = *want.keys().next_back().unwrap();
        let mut iv: Vec<Option<(i64, i64)>> = vec![None; (top - base + 1) as usize];
        for (&n, &r) in want {
            iv[(n - base) as usize] = Some(r);
        }
        for n in (base + self.depth..=top).rev() {
            let Some((lo, hi)) = iv[(n - base) as usize] else { continue };
            for &(dm, dn, _) in &self.deps {
                let slot = &mut iv[(n + dn - base) as usize];
                *slot = Some(match *slot {
                    Some((a, b)) => (a.min(lo + dm), b.max(hi + dm)),
                    None => (lo + dm, hi + dm),
                });
            }
        }
        iv
    }

    fn run<T: Clone + Default>(
        &self,
        base: i64,
        iv: &[Option<(i64, i64)>],
        mut init: impl FnMut(Site) -> T,
        combine: impl Fn(&[(u8, &T)]) -> T,
    ) -> Rows<T> {
        let mut rows: Rows<T> = Vec::with_capacity(iv.len());
        for (r, slot) in iv.iter().enumerate() {
            let n = base + r as i64;
            let Some((lo, hi)) = *slot else {
                rows.push((0, Vec::new()));
                continue;
            };
            let row: Vec<T> = if (r as i64) < self.depth {
                (lo..=hi).map(|m| init(self.orient(Site::new(m, n)))).collect()
            } else {
                (lo..=hi)
                    .map(|m| {
                        let args: Vec<(u8, &T)> = self
                            .deps
                            .iter()
                            .map(|&(dm, dn, w)| {
                                let (plo, prow) = &rows[(r as i64 + dn) as usize];
                                (w, &prow[(m + dm - plo) as usize])
                            })
                            .collect();
                        combine(&args)
                    })
                    .collect()
            };
            rows.push((lo, row));
        }
        rows
    }

    fn want(&self, sites: impl Iterator<Item = Site>) -> BTreeMap<i64, (i64, i64)> {
        let mut want: BTreeMap<i64, (i64, i64)> = BTreeMap::new();
        for s in sites {
            let o = self.orient(s);
            want.entry(o.n).and_modify(|(a, b)| {
                *a = (*a).min(o.m);
                *b = (*b).max(o.m);
            })
            .or_insert((o.m, o.m));
        }
        want
    }

    /// Linear forms of the requested sites in terms of base-row values.
    /// The base rows start at the lowest (oriented) requested row, or at
    /// `base_row` when given and lower.
    pub fn site_vectors(&self, sites: &[Site], base_row: Option<i64>) -> Result<(BaseLayout, Vec<Vec<u8>>)> {
        if sites.is_empty() {
            return Ok((BaseLayout { sites: Vec::new() }, Vec::new()));
        }
        let want = self.want(sites.iter().copied());
        let mut base = *want.keys().next().unwrap();
        if let Some(b) = base_row {
            let b = if self.flip { -b } else { b };
            if b > base {
                return Err(Error::InvalidArgument("requested site lies below the base row".into()));
            }
            base = b;
        }
        let iv = self.intervals(base, &want);
        let mut layout = Vec::new();
        for (r, slot) in iv.iter().enumerate().take(self.depth as usize) {
            if let Some((lo, hi)) = *slot {
                layout.extend((lo..=hi).map(|m| self.orient(Site::new(m, base + r as i64))));
            }
        }
        let len = layout.len();
        let field = self.field;
        let mut counter = 0usize;
        let rows = self.run(
            base,
            &iv,
            |_| {
                let mut e = vec![0u8; len];
                e[counter] = 1;
                counter += 1;
                e
            },
            |args| {
                let mut v = vec![0u8; len];
                for (w, x) in args {
                    field.axpy(&mut v, *w, x);
                }
                v
            },
        );
        let vectors = sites
            .iter()
            .map(|&s| {
                let o = self.orient(s);
                let (lo, row) = &rows[(o.n - base) as usize];
                row[(o.m - lo) as usize].clone()
            })
            .collect();
        Ok((BaseLayout { sites: layout }, vectors))
    }

    /// Haar marginal on `shape` as the image of the base-row map.
    pub fn marginal(&self, shape: &ShapeSet) -> Result<Marginal> {
        let (layout, vectors) = self.site_vectors(shape.sites(), None)?;
        // generators are the columns of the site-by-base matrix
        let gens: Vec<Vec<u8>> = (0..layout.sites.len()).map(|j| vectors.iter().map(|v| v[j]).collect()).collect();
        Ok(Marginal::from_generators(shape.clone(), self.field, gens.iter().map(|v| v.as_slice())))
    }

    /// Fills `rect` from base-row values supplied in layout order (rows
    /// ascending, then columns ascending, in oriented coordinates).
    pub fn fill(&self, rect: Rect, base_value: impl FnMut(Site) -> u8) -> Result<ConfigWindow> {
        if rect.is_empty() {
            return Err(Error::InvalidArgument("empty rectangle".into()));
        }
        let want = self.want(rect.sites());
        let base = *want.keys().next().unwrap();
        let iv = self.intervals(base, &want);
        let field = self.field;
        let rows = self.run(base, &iv, base_value, |args| {
            args.iter().fold(0u8, |acc, (w, x)| field.add(acc, field.mul(*w, **x)))
        });
        Ok(ConfigWindow::from_fn(rect, |s| {
            let o = self.orient(s);
            let (lo, row) = &rows[(o.n - base) as usize];
            row[(o.m - lo) as usize]
        }))
    }

    /// Base sites `fill` reads for `rect`, in the order it reads them.
    pub fn fill_layout(&self, rect: Rect) -> Vec<Site> {
        let want = self.want(rect.sites());
        let base = *want.keys().next().unwrap();
        let iv = self.intervals(base, &want);
        let mut out = Vec::new();
        for (r, slot) in iv.iter().enumerate().take(self.depth as usize) {
            if let Some((lo, hi)) = *slot {
                out.extend((lo..=hi).map(|m| self.orient(Site::new(m, base + r as i64))));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::validate;

    fn l_shape() -> ShapeSet {
        ShapeSet::from_pairs(&[(0, 0), (1, 0), (0, 1)])
    }

    #[test]
    fn projection_examples() {
        let td = SystemSpec::three_dot();
        assert_eq!(projection_count(&td, &l_shape()).unwrap().free_dim, 2);
        let sq = ShapeSet::rect(&Rect::new(0, 1, 0, 1));
        let c = projection_count(&td, &sq).unwrap();
        assert_eq!((c.free_dim, c.raw_free_dim, c.constraint_rows), (3, 3, 1));
        assert_eq!(projection_count(&td, &ShapeSet::single(Site::ORIGIN)).unwrap().free_dim, 1);
    }

    #[test]
    fn projection_can_be_smaller_than_local_count() {
        // no constraint translate fits, but (0,1) = (0,0) + (1,0) and (1,1) = (1,0) + (2,0) link it
        let td = SystemSpec::three_dot();
        let shape = ShapeSet::from_pairs(&[(0, 1), (1, 0), (1, 1), (2, 0)]);
        let c = projection_count(&td, &shape).unwrap();
        let p = Propagator::new(&td).unwrap().marginal(&shape).unwrap();
        assert_eq!(c.free_dim, p.free_dim());
        assert!(c.free_dim <= c.raw_free_dim);
    }

    #[test]
    fn routes_agree_on_rectangles() {
        let td = SystemSpec::three_dot();
        let prop = Propagator::new(&td).unwrap();
        for w in 1..6 {
            for h in 1..6 {
                let shape = ShapeSet::rect(&Rect::new(0, w - 1, 0, h - 1));
                let (m, _) = box_marginal(&td, &shape).unwrap();
                assert_eq!(m.free_dim(), prop.marginal(&shape).unwrap().free_dim(), "{w}x{h}");
                // a w x h box of the three-dot system has w + h - 1 free values
                assert_eq!(m.free_dim() as i64, w + h - 1);
            }
        }
    }

    #[test]
    fn flipped_constraint_uses_bottom_pivot() {
        // x(0,0) + x(0,1) + x(1,1) = 0 over GF(3) with weights: unique bottom site
        let spec = SystemSpec::algebraic(3, &[((0, 0), 1), ((0, 1), 2), ((1, 1), 1)]).unwrap();
        let p = Propagator::new(&spec).unwrap();
        let rect = Rect::new(0, 5, 0, 4);
        let mut k = 0u32;
        let w = p
            .fill(rect, |_| {
                k = (k * 7 + 3) % 11;
                (k % 3) as u8
            })
            .unwrap();
        assert!(validate(&spec, &w.as_pattern()));
        let shape = ShapeSet::rect(&Rect::new(0, 2, 0, 2));
        let (bm, _) = box_marginal(&spec, &shape).unwrap();
        assert_eq!(bm.free_dim(), p.marginal(&shape).unwrap().free_dim());
    }

    #[test]
    fn fill_is_valid() {
        let td = SystemSpec::three_dot();
        let p = Propagator::new(&td).unwrap();
        let rect = Rect::new(-3, 12, -2, 6);
        let layout = p.fill_layout(rect);
        let w = p.fill(rect, |s| ((s.m * 5 + 1) % 3 == 0) as u8).unwrap();
        assert!(validate(&td, &w.as_pattern()));
        assert_eq!(layout.len() as i64, rect.width() + rect.height() - 1);
    }

    #[test]
    fn marginal_membership() {
        let td = SystemSpec::three_dot();
        let m = haar_marginal(&td, &l_shape()).unwrap();
        // shape order (0,0), (0,1), (1,0)
        assert!(m.contains(&[1, 1, 0]));
        assert!(!m.contains(&[1, 0, 0]));
        let mut count = 0;
        m.for_each_pattern(|_| count += 1);
        assert_eq!(count, 4);
    }
}
