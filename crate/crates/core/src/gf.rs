//! Linear algebra over the prime field GF(q).
//!
//! Vectors are dense `u8` slices with entries in `0..q`. Characteristic two
//! gets a bit-packed basis.

use crate::error::{Error, Result};

pub fn is_prime(q: u32) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| !q.is_multiple_of(d))
}

/// A prime field with `q <= 251`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Field {
    q: u8,
}

impl Field {
    pub fn new(q: u32) -> Result<Self> {
        if !is_prime(q) || q > 251 {
            return Err(Error::InvalidSystem(format!("GF({q}) needs a prime q <= 251")));
        }
        Ok(Field { q: q as u8 })
    }

    pub fn q(self) -> u32 {
        self.q as u32
    }

    #[inline]
    pub fn add(self, a: u8, b: u8) -> u8 {
        ((a as u16 + b as u16) % self.q as u16) as u8
    }

    #[inline]
    pub fn sub(self, a: u8, b: u8) -> u8 {
        ((a as u16 + self.q as u16 - b as u16) % self.q as u16) as u8
    }

    #[inline]
    pub fn mul(self, a: u8, b: u8) -> u8 {
        ((a as u16 * b as u16) % self.q as u16) as u8
    }

    #[inline]
    pub fn neg(self, a: u8) -> u8 {
        self.sub(0, a)
    }

    pub fn inv(self, a: u8) -> u8 {
        assert!(!a.is_multiple_of(self.q), "zero has no inverse");
        // Fermat: a^(q-2)
        let mut result = 1u8;
        let mut base = a % self.q;
        let mut e = self.q as u32 - 2;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(result, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        result
    }

    /// `dst += c * src`
    pub fn axpy(self, dst: &mut [u8], c: u8, src: &[u8]) {
        if c == 0 {
            return;
        }
        if self.q == 2 {
            for (d, s) in dst.iter_mut().zip(src) {
                *d ^= *s;
            }
            return;
        }
        for (d, s) in dst.iter_mut().zip(src) {
            *d = ((*d as u16 + c as u16 * *s as u16) % self.q as u16) as u8;
        }
    }

    pub fn scale(self, v: &mut [u8], c: u8) {
        for x in v {
            *x = self.mul(*x, c);
        }
    }
}

fn pack(v: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; v.len().div_ceil(64)];
    for (i, &x) in v.iter().enumerate() {
        if x & 1 == 1 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

#[derive(Clone, Debug)]
enum Rows {
    Packed(Vec<(usize, Vec<u64>)>),
    Dense(Vec<(usize, Vec<u8>)>),
}

/// Incrementally built row-echelon basis of a subspace of GF(q)^len.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    field: Field,
    len: usize,
    rows: Rows,
}

impl EchelonBasis {
    pub fn new(field: Field, len: usize) -> Self {
        let rows = if field.q() == 2 { Rows::Packed(Vec::new()) } else { Rows::Dense(Vec::new()) };
        EchelonBasis { field, len, rows }
    }

    pub fn rank(&self) -> usize {
        match &self.rows {
            Rows::Packed(r) => r.len(),
            Rows::Dense(r) => r.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.len
    }

    /// Inserts `v`, returning true when it was independent of the basis.
    pub fn insert(&mut self, v: &[u8]) -> bool {
        assert_eq!(v.len(), self.len);
        let field = self.field;
        match &mut self.rows {
            Rows::Packed(rows) => {
                let mut w = pack(v);
                for (pivot, row) in rows.iter() {
                    if (w[pivot / 64] >> (pivot % 64)) & 1 == 1 {
                        for (a, b) in w.iter_mut().zip(row) {
                            *a ^= *b;
                        }
                    }
                }
                let pivot = w.iter().enumerate().find(|(_, x)| **x != 0).map(|(i, x)| i * 64 + x.trailing_zeros() as usize);
                match pivot {
                    Some(p) => {
                        rows.push((p, w));
                        true
                    }
                    None => false,
                }
            }
            Rows::Dense(rows) => {
                let mut w = v.to_vec();
                for (pivot, row) in rows.iter() {
                    let c = w[*pivot];
                    if c != 0 {
                        field.axpy(&mut w, field.neg(c), row);
                    }
                }
                match w.iter().position(|&x| x != 0) {
                    Some(p) => {
                        let inv = field.inv(w[p]);
                        field.scale(&mut w, inv);
                        rows.push((p, w));
                        true
                    }
                    None => false,
                }
            }
        }
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        !self.clone().insert(v)
    }

    /// The basis vectors in insertion order, unpacked.
    pub fn vectors(&self) -> Vec<Vec<u8>> {
        match &self.rows {
            Rows::Packed(rows) => rows
                .iter()
                .map(|(_, w)| (0..self.len).map(|i| ((w[i / 64] >> (i % 64)) & 1) as u8).collect())
                .collect(),
            Rows::Dense(rows) => rows.iter().map(|(_, w)| w.clone()).collect(),
        }
    }
}

/// Rank of a list of vectors.
pub fn rank<'a, I>(field: Field, len: usize, vectors: I) -> usize
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut b = EchelonBasis::new(field, len);
    for v in vectors {
        b.insert(v);
        if b.rank() == len {
            break;
        }
    }
    b.rank()
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(field: Field, rows: &mut Vec<Vec<u8>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else { continue };
        rows.swap(r, p);
        let inv = field.inv(rows[r][c]);
        field.scale(&mut rows[r], inv);
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[c] != 0 {
                let f = field.neg(row[c]);
                field.axpy(row, f, &pivot_row);
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

/// Basis of `{x : A x = 0}` for the matrix with the given rows.
pub fn nullspace(field: Field, rows: &[Vec<u8>], ncols: usize) -> Vec<Vec<u8>> {
    let mut a = rows.to_vec();
    let pivots = rref(field, &mut a, ncols);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|&c| !is_pivot[c]) {
        let mut v = vec![0u8; ncols];
        v[free] = 1;
        for (row, &p) in a.iter().zip(&pivots) {
            v[p] = field.neg(row[free]);
        }
        basis.push(v);
    }
    basis
}

/// Some solution of `A x = rhs`, or `None` when inconsistent.
pub fn solve(field: Field, rows: &[Vec<u8>], rhs: &[u8], ncols: usize) -> Option<Vec<u8>> {
    let mut aug: Vec<Vec<u8>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let mut v = r.clone();
            v.push(b);
            v
        })
        .collect();
    let pivots = rref(field, &mut aug, ncols + 1);
    if pivots.last() == Some(&ncols) {
        return None;
    }
    let mut x = vec![0u8; ncols];
    for (row, &p) in aug.iter().zip(&pivots) {
        x[p] = row[ncols];
    }
    Some(x)
}

/// Visits every vector of `span(basis)` exactly once when `basis` is
/// independent; `q^k` visits for `k` basis vectors.
pub fn for_each_in_span(field: Field, len: usize, basis: &[Vec<u8>], mut visit: impl FnMut(&[u8])) {
    let q = field.q() as u8;
    let mut digits = vec![0u8; basis.len()];
    let mut v = vec![0u8; len];
    loop {
        visit(&v);
        // odometer: each digit step adds its basis vector, wrap included (q·b = 0)
        let mut j = 0;
        loop {
            if j == basis.len() {
                return;
            }
            field.axpy(&mut v, 1, &basis[j]);
            digits[j] += 1;
            if digits[j] == q {
                digits[j] = 0;
                j += 1;
            } else {
                break;
            }
        }
    }
}
