//! Exact signed rationals for window speeds and particle positions.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `numer / denom` in lowest terms with `denom > 0`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct Ratio {
    numer: i64,
    denom: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn new(numer: i64, denom: i64) -> Result<Ratio> {
        if denom == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        let g = gcd(numer, denom).max(1);
        let s = denom.signum();
        Ok(Ratio {
            numer: s * numer / g,
            denom: s * denom / g,
        })
    }

    pub const fn integer(n: i64) -> Ratio {
        Ratio { numer: n, denom: 1 }
    }

    pub fn numer(self) -> i64 {
        self.numer
    }

    pub fn denom(self) -> i64 {
        self.denom
    }

    pub fn to_f64(self) -> f64 {
        self.numer as f64 / self.denom as f64
    }

    /// Best rational approximation with denominator at most `max_denom`
    /// (continued fraction convergents and semiconvergents).
    pub fn approximate(x: f64, max_denom: i64) -> Result<Ratio> {
        if !x.is_finite() || max_denom < 1 {
            return Err(Error::Domain(format!("cannot approximate {x}")));
        }
        let sign = if x < 0.0 { -1 } else { 1 };
        let x = x.abs();
        let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
        let mut r = x;
        loop {
            let a = r.floor();
            if a > i64::MAX as f64 / 4.0 {
                break;
            }
            let a = a as i64;
            let q2 = q0 + a * q1;
            if q2 > max_denom {
                // semiconvergent
                let k = (max_denom - q0) / q1;
                let (ps, qs) = (p0 + k * p1, q0 + k * q1);
                let cand = Ratio::new(ps, qs)?;
                let best = Ratio::new(p1, q1)?;
                let pick = if (cand.to_f64() - x).abs() < (best.to_f64() - x).abs() {
                    cand
                } else {
                    best
                };
                return Ratio::new(sign * pick.numer, pick.denom);
            }
            let p2 = p0 + a * p1;
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let frac = r - a as f64;
            if frac < 1e-12 {
                break;
            }
            r = 1.0 / frac;
        }
        Ratio::new(sign * p1, q1)
    }

    pub fn floor(self) -> i64 {
        self.numer.div_euclid(self.denom)
    }

    pub fn ceil(self) -> i64 {
        -((-self.numer).div_euclid(self.denom))
    }

    /// `ceil(self * t)` without overflow for realistic horizons.
    pub fn ceil_mul(self, t: u64) -> i64 {
        let n = self.numer as i128 * t as i128;
        let d = self.denom as i128;
        (-((-n).div_euclid(d))) as i64
    }

    pub fn mul_int(self, t: i64) -> Ratio {
        Ratio::new(self.numer * t, self.denom).expect("nonzero denom")
    }

    pub fn sub(self, other: Ratio) -> Ratio {
        Ratio::new(
            self.numer * other.denom - other.numer * self.denom,
            self.denom * other.denom,
        )
        .expect("nonzero denom")
    }

    pub fn add(self, other: Ratio) -> Ratio {
        Ratio::new(
            self.numer * other.denom + other.numer * self.denom,
            self.denom * other.denom,
        )
        .expect("nonzero denom")
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.numer as i128 * other.denom as i128).cmp(&(other.numer as i128 * self.denom as i128))
    }
}

impl fmt::Debug for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom == 1 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/{}", self.numer, self.denom)
        }
    }
}

impl TryFrom<(i64, i64)> for Ratio {
    type Error = Error;
    fn try_from((n, d): (i64, i64)) -> Result<Ratio> {
        Ratio::new(n, d)
    }
}

impl From<Ratio> for (i64, i64) {
    fn from(r: Ratio) -> (i64, i64) {
        (r.numer, r.denom)
    }
}
