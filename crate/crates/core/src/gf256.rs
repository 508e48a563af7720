//! Arithmetic over GF(2^8) with the primitive polynomial
//! x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//!
//! Multiplication goes through log/antilog tables built at compile time.
//! Addition is XOR. The generator 0x02 has order 255.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign};

use crate::error::{Error, Result};

/// Reduction polynomial, including the x^8 term.
pub const POLY: u16 = 0x11D;

const fn build_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    // Doubled so that exp[log a + log b] never needs a modulo.
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    (exp, log)
}

const TABLES: ([u8; 512], [u8; 256]) = build_tables();
static EXP: [u8; 512] = TABLES.0;
static LOG: [u8; 256] = TABLES.1;

/// An element of GF(2^8).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse. Zero has none.
    pub fn inv(self) -> Result<Gf256> {
        if self.0 == 0 {
            return Err(Error::Domain("inverse of zero in GF(256)".into()));
        }
        Ok(Gf256(EXP[255 - LOG[self.0 as usize] as usize]))
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    #[inline]
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        Gf256(mul(self.0, rhs.0))
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        self.0 = mul(self.0, rhs.0);
    }
}

#[inline]
pub fn add(a: u8, b: u8) -> u8 {
    a ^ b
}

#[inline]
pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    EXP[LOG[a as usize] as usize + LOG[b as usize] as usize]
}

pub fn inv(a: u8) -> Result<u8> {
    Gf256(a).inv().map(Gf256::value)
}

/// `target[i] += scale * source[i]`.
///
/// Returns the number of field multiply-adds performed: `len` when `scale`
/// is nonzero, zero otherwise.
pub fn row_axpy(target: &mut [u8], source: &[u8], scale: u8) -> Result<u64> {
    if target.len() != source.len() {
        return Err(Error::Domain(format!(
            "row_axpy length mismatch: {} vs {}",
            target.len(),
            source.len()
        )));
    }
    Ok(axpy_unchecked(target, source, scale))
}

/// Same as [`row_axpy`] for callers that have already matched lengths.
#[inline]
pub(crate) fn axpy_unchecked(target: &mut [u8], source: &[u8], scale: u8) -> u64 {
    debug_assert_eq!(target.len(), source.len());
    match scale {
        0 => 0,
        1 => {
            for (t, s) in target.iter_mut().zip(source) {
                *t ^= *s;
            }
            source.len() as u64
        }
        _ => {
            let ls = LOG[scale as usize] as usize;
            for (t, &s) in target.iter_mut().zip(source) {
                if s != 0 {
                    *t ^= EXP[ls + LOG[s as usize] as usize];
                }
            }
            source.len() as u64
        }
    }
}

/// `row[i] *= scale` in place.
#[inline]
pub(crate) fn scale_in_place(row: &mut [u8], scale: u8) {
    match scale {
        1 => {}
        0 => row.fill(0),
        _ => {
            let ls = LOG[scale as usize] as usize;
            for v in row.iter_mut() {
                if *v != 0 {
                    *v = EXP[ls + LOG[*v as usize] as usize];
                }
            }
        }
    }
}

/// A coefficient row over a contiguous packet span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldVector(Vec<u8>);

impl FieldVector {
    pub fn new(elements: Vec<u8>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Domain("field vector must be nonempty".into()));
        }
        Ok(FieldVector(elements))
    }

    pub fn zeros(len: usize) -> Self {
        FieldVector(vec![0; len.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|&&v| v != 0).count()
    }

    /// `self += scale * source`, returning the multiply-add count.
    pub fn axpy(&mut self, source: &FieldVector, scale: Gf256) -> Result<u64> {
        row_axpy(&mut self.0, &source.0, scale.0)
    }
}
