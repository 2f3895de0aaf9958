//! Exact rational arithmetic for phase coefficients.
//!
//! Every finite `f64` is a dyadic rational, so real coefficients are stored
//! exactly as `mant / 2^s`; user-specified rationals keep their own
//! denominator. Fractional parts of `theta * M` for integer `M` are then
//! computed exactly in integer arithmetic and only the final value in
//! `[0, 1)` is rounded to `f64`.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Largest power-of-two denominator kept when converting an `f64`.
const MAX_SHIFT: u32 = 126;

/// A reduced fraction `num / den` with `den > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frac {
    num: i128,
    den: i128,
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i128
}

pub fn lcm(a: i128, b: i128) -> Option<i128> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd(a, b)).checked_mul(b).map(i128::abs)
}

/// `a * b mod m` for `a, b < m <= i128::MAX`.
fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    if let Some(p) = a.checked_mul(b) {
        return p % m;
    }
    let (mut acc, mut base, mut e) = (0u128, a, b);
    while e > 0 {
        if e & 1 == 1 {
            acc = (acc + base) % m;
        }
        base = (base + base) % m;
        e >>= 1;
    }
    acc
}

/// `e(x) = exp(2 pi i x)`.
#[inline]
pub fn e(x: f64) -> Complex64 {
    Complex64::cis(std::f64::consts::TAU * x)
}

impl Frac {
    pub const ZERO: Frac = Frac { num: 0, den: 1 };
    pub const ONE: Frac = Frac { num: 1, den: 1 };

    /// Builds `num / den`, reduced. Returns `None` for a zero denominator.
    pub fn new(num: i128, den: i128) -> Option<Frac> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        Some(Frac { num: n, den: d })
    }

    pub fn integer(n: i128) -> Frac {
        Frac { num: n, den: 1 }
    }

    /// Exact dyadic value of `x`. Values needing more than 126 fractional
    /// bits are rounded to 126 bits.
    pub fn from_f64(x: f64) -> Frac {
        assert!(x.is_finite(), "non-finite coefficient {x}");
        if x == 0.0 {
            return Frac::ZERO;
        }
        let bits = x.to_bits();
        let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac_bits = (bits & ((1u64 << 52) - 1)) as i128;
        let (mut mant, mut exp) = if biased == 0 {
            (frac_bits, -1074)
        } else {
            (frac_bits | (1i128 << 52), biased - 1075)
        };
        while mant & 1 == 0 && exp < 0 {
            mant >>= 1;
            exp += 1;
        }
        if exp >= 0 {
            let v = mant
                .checked_shl(exp as u32)
                .filter(|v| v >> exp == mant)
                .expect("coefficient magnitude exceeds i128");
            return Frac::integer(sign * v);
        }
        let mut shift = (-exp) as u32;
        if shift > MAX_SHIFT {
            let drop = shift - MAX_SHIFT;
            mant = if drop >= 127 { 0 } else { (mant + (1i128 << (drop - 1))) >> drop };
            shift = MAX_SHIFT;
        }
        Frac::new(sign * mant, 1i128 << shift).expect("nonzero denominator")
    }

    pub fn num(&self) -> i128 {
        self.num
    }

    pub fn den(&self) -> i128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_dyadic(&self) -> bool {
        (self.den as u128).is_power_of_two()
    }

    pub fn to_f64(&self) -> f64 {
        if self.num.unsigned_abs() < (1u128 << 100) && self.den < (1i128 << 100) {
            self.num as f64 / self.den as f64
        } else {
            // split to keep both parts representable
            let q = self.num.div_euclid(self.den);
            q as f64 + self.num.rem_euclid(self.den) as f64 / self.den as f64
        }
    }

    /// Representative of `self` modulo 1 in `[0, 1)`.
    pub fn fract(&self) -> Frac {
        Frac { num: self.num.rem_euclid(self.den), den: self.den }
    }

    pub fn neg(&self) -> Frac {
        Frac { num: -self.num, den: self.den }
    }

    pub fn checked_add(&self, other: &Frac) -> Option<Frac> {
        let den = lcm(self.den, other.den)?;
        let a = self.num.checked_mul(den / self.den)?;
        let b = other.num.checked_mul(den / other.den)?;
        Frac::new(a.checked_add(b)?, den)
    }

    pub fn checked_sub(&self, other: &Frac) -> Option<Frac> {
        self.checked_add(&other.neg())
    }

    pub fn checked_mul_int(&self, k: i128) -> Option<Frac> {
        Frac::new(self.num.checked_mul(k)?, self.den)
    }

    pub fn checked_mul(&self, other: &Frac) -> Option<Frac> {
        let g1 = gcd(self.num, other.den).max(1);
        let g2 = gcd(other.num, self.den).max(1);
        let num = (self.num / g1).checked_mul(other.num / g2)?;
        let den = (self.den / g2).checked_mul(other.den / g1)?;
        Frac::new(num, den)
    }

    /// Sum modulo 1: both operands are reduced first, so the result stays
    /// in `[0, 1)` and intermediate numerators stay small.
    pub fn add_mod1(&self, other: &Frac) -> Option<Frac> {
        self.fract().checked_add(&other.fract()).map(|f| f.fract())
    }

    /// Fractional part of `self * m`, computed exactly and rounded once.
    #[inline]
    pub fn frac_mul(&self, m: i128) -> f64 {
        let d = self.den as u128;
        if d == 1 {
            return 0.0;
        }
        let n = self.num.rem_euclid(self.den) as u128;
        let mm = m.rem_euclid(self.den) as u128;
        let r = if d.is_power_of_two() {
            n.wrapping_mul(mm) & (d - 1)
        } else {
            mulmod(n, mm, d)
        };
        let v = r as f64 / d as f64;
        if v >= 1.0 {
            0.0
        } else {
            v
        }
    }

    /// Numerator of `self * m` over the fixed modulus `modulus`, valid when
    /// `den` divides `modulus`. Used for exact Gauss-sum phase tables.
    pub fn scaled_residue(&self, m: i128, modulus: i128) -> Option<i128> {
        if modulus % self.den != 0 {
            return None;
        }
        let scale = modulus / self.den;
        let n = self.num.rem_euclid(self.den);
        let mm = m.rem_euclid(self.den);
        let r = mulmod(n as u128, mm as u128, self.den as u128) as i128;
        Some(r * scale)
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self.to_f64().total_cmp(&other.to_f64()),
        }
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl From<f64> for Frac {
    fn from(x: f64) -> Self {
        Frac::from_f64(x)
    }
}

/// Sum of fractional parts, reduced to `[0, 1)`.
#[inline]
pub fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_integer(x: f64) -> f64 {
    let r = wrap01(x);
    r.min(1.0 - r)
}
