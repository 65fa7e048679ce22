//! GF(2^m) arithmetic and the belief-vector operators used by non-binary BP.
//!
//! Field elements are represented by their integer image in `[0, q)`, where
//! bit `i` is the coefficient of `x^i`. Addition is XOR; multiplication goes
//! through log/antilog tables built once when the field is constructed.

use std::fmt;

use crate::error::{Error, Result};

/// Integer representation of a field element, `0 <= value < q`.
pub type FieldElem = u16;

/// Largest supported extension degree.
pub const MAX_M: u32 = 16;

/// Default reduction polynomial for each `m` in `1..=8`.
///
/// `m = 8` uses the AES polynomial `x^8 + x^4 + x^3 + x + 1`. It is
/// irreducible but not primitive, so the log tables use generator `x + 1`.
const DEFAULT_POLYS: [u32; 8] = [0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11B];

/// Carry-less product of `a` and `b` reduced modulo `poly` (degree `m`).
fn clmul_mod(a: u32, b: u32, poly: u32, m: u32) -> u32 {
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    let top = 1u32 << m;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= poly;
        }
    }
    acc
}

/// A binary extension field GF(2^m) with precomputed log/antilog tables.
#[derive(Clone)]
pub struct GaloisField {
    m: u32,
    q: usize,
    poly: u32,
    generator: FieldElem,
    log: Vec<u16>,
    // antilog is doubled in length so `exp[log a + log b]` needs no reduction
    exp: Vec<FieldElem>,
}

impl fmt::Debug for GaloisField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaloisField")
            .field("m", &self.m)
            .field("poly", &format_args!("{:#x}", self.poly))
            .field("generator", &self.generator)
            .finish()
    }
}

impl PartialEq for GaloisField {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.poly == other.poly
    }
}

impl Eq for GaloisField {}

impl GaloisField {
    /// Field GF(2^m) with the default polynomial for `m` (1 to 8).
    pub fn new(m: u32) -> Result<Self> {
        if !(1..=8).contains(&m) {
            return Err(Error::Domain(format!(
                "no default polynomial for m = {m}; supply one with GaloisField::with_polynomial"
            )));
        }
        Self::with_polynomial(m, DEFAULT_POLYS[(m - 1) as usize])
    }

    /// Field GF(2^m) reduced by `poly`, whose bit `m` must be set.
    ///
    /// Fails if `poly` is reducible; that is detected as the absence of an
    /// element of multiplicative order `q - 1`.
    pub fn with_polynomial(m: u32, poly: u32) -> Result<Self> {
        if m == 0 || m > MAX_M {
            return Err(Error::Domain(format!("m must be in 1..={MAX_M}, got {m}")));
        }
        if poly >> m != 1 {
            return Err(Error::Domain(format!(
                "polynomial {poly:#x} does not have degree {m}"
            )));
        }
        let q = 1usize << m;
        let order = q - 1;
        let mut exp = vec![0 as FieldElem; 2 * order.max(1)];
        let mut log = vec![0u16; q];
        let mut found = None;
        'candidates: for g in 1..q as u32 {
            let mut x = 1u32;
            for i in 0..order {
                if i > 0 && x == 1 {
                    continue 'candidates;
                }
                exp[i] = x as FieldElem;
                x = clmul_mod(x, g, poly, m);
            }
            if x == 1 {
                found = Some(g as FieldElem);
                break;
            }
        }
        let generator = found.ok_or_else(|| {
            Error::Domain(format!("polynomial {poly:#x} is reducible over GF(2)"))
        })?;
        for i in 0..order {
            exp[i + order] = exp[i];
            log[exp[i] as usize] = i as u16;
        }
        Ok(Self {
            m,
            q,
            poly,
            generator,
            log,
            exp,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn polynomial(&self) -> u32 {
        self.poly
    }

    /// Element used as the base of the log tables.
    pub fn generator(&self) -> FieldElem {
        self.generator
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        debug_assert!((a as usize) < self.q && (b as usize) < self.q);
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    /// Multiplicative inverse; zero has none.
    pub fn inv(&self, a: FieldElem) -> Result<FieldElem> {
        if a == 0 {
            return Err(Error::Domain("zero has no multiplicative inverse".into()));
        }
        let order = self.q - 1;
        let l = self.log[a as usize] as usize;
        Ok(self.exp[(order - l) % order])
    }

    pub fn div(&self, a: FieldElem, b: FieldElem) -> Result<FieldElem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Carry-less reference multiplication, bypassing the tables.
    pub fn mul_slow(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        clmul_mod(a as u32, b as u32, self.poly, self.m) as FieldElem
    }

    /// Index permutation of the `×g` operator: `perm[h] = h ⊗ g`.
    pub fn times_permutation(&self, g: FieldElem) -> Result<Vec<FieldElem>> {
        if g == 0 {
            return Err(Error::Domain("×g operator requires g ≠ 0".into()));
        }
        Ok((0..self.q as FieldElem).map(|h| self.mul(h, g)).collect())
    }
}

/// Length-`q` vector of nonnegative reals indexed by field elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVec(pub Vec<f64>);

impl BeliefVec {
    pub fn uniform(q: usize) -> Self {
        BeliefVec(vec![1.0 / q as f64; q])
    }

    /// Unit mass on element `g`.
    pub fn delta(q: usize, g: FieldElem) -> Self {
        let mut v = vec![0.0; q];
        v[g as usize] = 1.0;
        BeliefVec(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    /// Whether this is a probability vector to within `tol`.
    pub fn is_probability(&self, tol: f64) -> bool {
        self.0.iter().all(|&x| x >= 0.0) && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// Scale to unit sum. Returns `false` (and leaves `self` unchanged) if
    /// the mass is zero or not finite.
    pub fn normalize(&mut self) -> bool {
        normalize_in_place(&mut self.0)
    }

    /// `b^{+g}`: entry `h` of the result is entry `h ⊕ g` of `self`.
    pub fn plus_g(&self, g: FieldElem) -> Self {
        let mut out = vec![0.0; self.len()];
        plus_g_into(&self.0, g, &mut out);
        BeliefVec(out)
    }

    /// `b^{×g}`: entry `h` of the result is entry `h ⊗ g` of `self`.
    pub fn times_g(&self, field: &GaloisField, g: FieldElem) -> Result<Self> {
        if g == 0 {
            return Err(Error::Domain("×g operator requires g ≠ 0".into()));
        }
        let mut out = vec![0.0; self.len()];
        times_g_into(field, &self.0, g, &mut out);
        Ok(BeliefVec(out))
    }
}

pub(crate) fn normalize_in_place(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return false;
    }
    let inv = 1.0 / s;
    v.iter_mut().for_each(|x| *x *= inv);
    true
}

pub(crate) fn plus_g_into(src: &[f64], g: FieldElem, dst: &mut [f64]) {
    for (h, d) in dst.iter_mut().enumerate() {
        *d = src[h ^ g as usize];
    }
}

pub(crate) fn times_g_into(field: &GaloisField, src: &[f64], g: FieldElem, dst: &mut [f64]) {
    debug_assert!(g != 0);
    for (h, d) in dst.iter_mut().enumerate() {
        *d = src[field.mul(h as FieldElem, g) as usize];
    }
}

/// Direct O(q²) F_q-convolution `[a ⊙ b]_g = Σ_h a_h b_{g−h}`.
pub fn fq_convolve(a: &BeliefVec, b: &BeliefVec) -> Result<BeliefVec> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "convolution length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let q = a.len();
    let mut out = vec![0.0; q];
    for (g, o) in out.iter_mut().enumerate() {
        // subtraction is XOR in characteristic two
        *o = (0..q).map(|h| a.0[h] * b.0[g ^ h]).sum();
    }
    Ok(BeliefVec(out))
}

/// In-place unnormalized Walsh–Hadamard butterfly. Length must be a power of two.
pub fn fwht_in_place(v: &mut [f64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// Walsh–Hadamard transform; the inverse carries the `1/q` scaling.
pub fn fwht(v: &[f64], inverse: bool) -> Result<Vec<f64>> {
    if !v.len().is_power_of_two() {
        return Err(Error::Domain(format!(
            "FWHT length {} is not a power of two",
            v.len()
        )));
    }
    let mut out = v.to_vec();
    fwht_in_place(&mut out);
    if inverse {
        let s = 1.0 / v.len() as f64;
        out.iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

/// Convolution of every vector in `vs` via one forward transform each, a
/// pointwise product, and one inverse transform.
pub fn fq_convolve_fast(vs: &[BeliefVec]) -> Result<BeliefVec> {
    let first = vs
        .first()
        .ok_or_else(|| Error::Domain("convolution of an empty list".into()))?;
    let q = first.len();
    if vs.iter().any(|v| v.len() != q) {
        return Err(Error::Domain("convolution inputs differ in length".into()));
    }
    if vs.len() == 1 {
        return Ok(first.clone());
    }
    let mut acc = fwht(&first.0, false)?;
    let mut buf = vec![0.0; q];
    for v in &vs[1..] {
        buf.copy_from_slice(&v.0);
        fwht_in_place(&mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a *= b);
    }
    Ok(BeliefVec(fwht(&acc, true)?))
}
