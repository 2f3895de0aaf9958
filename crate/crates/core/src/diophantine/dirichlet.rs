//! Dirichlet approximation by continued fractions, major/minor
//! classification, and the dyadic separation trichotomy.

use serde::{Deserialize, Serialize};

use crate::arith::{gcd, Frac};
use crate::error::{LabError, Result};

/// `theta ~ a/q` with `gamma = theta - a/q` the nearest representative
/// modulo 1. A fraction `0/1` is stored as `1/1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirichletApprox {
    pub a: i64,
    pub q: i64,
    pub gamma: Frac,
}

impl DirichletApprox {
    pub fn gamma_f64(&self) -> f64 {
        self.gamma.to_f64()
    }

    /// `a/q` as an exact fraction.
    pub fn fraction(&self) -> Frac {
        Frac::new(self.a as i128, self.q as i128).expect("positive denominator")
    }
}

/// Scale parameter `N`; real values are kept as exact dyadics.
fn scale_frac(n: f64) -> Result<Frac> {
    if !n.is_finite() || n < 1.0 {
        return Err(LabError::InvalidSpec(format!("approximation scale {n} must be at least 1")));
    }
    Ok(Frac::from_f64(n))
}

/// `(q theta mod 1)` as a numerator over `den`, folded to the nearest integer.
fn residue_distance(theta: &Frac, q: i128) -> Option<i128> {
    let den = theta.den();
    let r = theta.num().rem_euclid(den).checked_mul(q)?.rem_euclid(den);
    Some(r.min(den - r))
}

/// `dist / den <= 1 / n`, i.e. `dist * n <= den`, exact when possible.
fn within(dist: i128, den: i128, n: &Frac) -> bool {
    match (dist.checked_mul(n.num()), den.checked_mul(n.den())) {
        (Some(lhs), Some(rhs)) => lhs <= rhs,
        _ => (dist as f64) * n.to_f64() <= den as f64,
    }
}

/// Continued-fraction convergent denominators of `theta` in `[0, 1)`.
fn convergent_denominators(theta: &Frac) -> Vec<i128> {
    let (mut num, mut den) = (theta.num().rem_euclid(theta.den()), theta.den());
    let mut out = vec![1i128];
    let (mut k_prev, mut k) = (0i128, 1i128);
    // skip the integer part: a_0 = 0
    while num != 0 {
        let (n2, d2) = (den, num);
        let a = n2 / d2;
        num = n2 - a * d2;
        den = d2;
        let Some(next) = a.checked_mul(k).and_then(|v| v.checked_add(k_prev)) else {
            break;
        };
        k_prev = k;
        k = next;
        out.push(k);
    }
    out
}

/// Smallest `q` with `1 <= q <= N` and `|theta - a/q| <= 1/(qN)` for some
/// `a`, with `gcd(a, q) = 1` and `1 <= a <= q`.
pub fn dirichlet_approx(theta: Frac, n: f64) -> Result<DirichletApprox> {
    let th = theta.fract();
    if th.is_zero() {
        return Err(LabError::InvalidSpec(format!("coefficient {theta} must lie in (0, 1)")));
    }
    let nf = scale_frac(n)?;
    let den = th.den();
    for q in convergent_denominators(&th) {
        if (q as f64) > n {
            break;
        }
        let Some(dist) = residue_distance(&th, q) else {
            break;
        };
        if within(dist, den, &nf) {
            return Ok(approx_with_denominator(&th, q));
        }
    }
    // Dirichlet's theorem guarantees a convergent; reached only when the
    // exact arithmetic overflows.
    fallback_search(&th, n)
}

fn approx_with_denominator(th: &Frac, q: i128) -> DirichletApprox {
    let den = th.den();
    let prod = th.num() * q;
    let a_true = (2 * prod + den).div_euclid(2 * den);
    let gamma = th
        .checked_sub(&Frac::new(a_true, q).expect("positive denominator"))
        .expect("small operands");
    let g = gcd(a_true, q).max(1);
    let (mut a, mut qq) = (a_true / g, q / g);
    if a == 0 {
        a = 1;
        qq = 1;
    }
    DirichletApprox { a: a as i64, q: qq as i64, gamma }
}

fn fallback_search(th: &Frac, n: f64) -> Result<DirichletApprox> {
    let x = th.to_f64();
    let qmax = n.floor() as i64;
    for q in 1..=qmax {
        let v = x * q as f64;
        if (v - v.round()).abs() <= 1.0 / n {
            return Ok(approx_with_denominator(th, q as i128));
        }
    }
    Err(LabError::Overflow("dirichlet approximation"))
}

/// Brute-force reference: smallest valid `q`, searching every `(a, q)`.
pub fn dirichlet_exhaustive(theta: Frac, n: f64) -> Option<(i64, i64)> {
    let th = theta.fract();
    let nf = Frac::from_f64(n);
    let qmax = n.floor() as i64;
    for q in 1..=qmax {
        for a in 0..=q {
            let diff = th.checked_sub(&Frac::new(a as i128, q as i128)?)?;
            let dist = diff.num().abs();
            // |diff| <= 1/(qN)  <=>  |num| * q * N <= den
            let lhs = dist.checked_mul(q as i128)?.checked_mul(nf.num())?;
            if lhs <= diff.den().checked_mul(nf.den())? {
                let g = gcd(a as i128, q as i128).max(1) as i64;
                let (a, q) = (a / g, q / g);
                return Some(if a == 0 { (1, 1) } else { (a, q) });
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexClass {
    Major,
    Minor,
}

/// `N = 2^((s - eps) j)`, the scale used at level `s`.
pub fn level_scale(level: u32, eps: f64, j: u32) -> f64 {
    ((level as f64 - eps) * j as f64).exp2()
}

/// Approximates every coefficient at the level-`s` scale; minor iff some
/// denominator exceeds `2^(eps j)`.
pub fn classify_index(j: u32, level: u32, thetas: &[Frac], eps: f64) -> Result<(IndexClass, Vec<DirichletApprox>)> {
    let n = level_scale(level, eps, j);
    let approxs = thetas.iter().map(|t| dirichlet_approx(*t, n)).collect::<Result<Vec<_>>>()?;
    let threshold = (eps * j as f64).exp2();
    let class = if approxs.iter().any(|a| a.q as f64 > threshold) { IndexClass::Minor } else { IndexClass::Major };
    Ok((class, approxs))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SeparationVerdict {
    SameFraction,
    FirstDominates,
    SecondDominates,
    Violated { q: i64, q_prime: i64 },
    Skipped { reason: String },
}

impl SeparationVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, SeparationVerdict::SameFraction | SeparationVerdict::FirstDominates | SeparationVerdict::SecondDominates)
    }
}

/// Checks that exactly one of `a/q = a'/q'`, `q >= 2q'`, `q' >= 2q` holds
/// for the approximations at scales `N` and `N'`.
pub fn dyadic_separation_check(theta: Frac, first: (f64, f64), second: (f64, f64)) -> Result<SeparationVerdict> {
    let (n1, e1) = first;
    let (n2, e2) = second;
    if n1 <= 16.0 || n2 <= 16.0 {
        return Ok(SeparationVerdict::Skipped { reason: "scales must exceed 16".into() });
    }
    if !(e1 < 0.5 && e2 < 0.5) {
        return Ok(SeparationVerdict::Skipped { reason: "exponents must be below 1/2".into() });
    }
    let a = dirichlet_approx(theta, n1)?;
    let b = dirichlet_approx(theta, n2)?;
    if a.q as f64 > n1.powf(e1) || b.q as f64 > n2.powf(e2) {
        return Ok(SeparationVerdict::Skipped { reason: "denominator above the small-denominator threshold".into() });
    }
    Ok(separation_verdict(&a, &b))
}

/// The trichotomy for two given approximations, without hypotheses.
pub fn separation_verdict(a: &DirichletApprox, b: &DirichletApprox) -> SeparationVerdict {
    let same = a.fraction() == b.fraction();
    let first_dom = a.q >= 2 * b.q;
    let second_dom = b.q >= 2 * a.q;
    match (same, first_dom, second_dom) {
        (true, false, false) => SeparationVerdict::SameFraction,
        (false, true, false) => SeparationVerdict::FirstDominates,
        (false, false, true) => SeparationVerdict::SecondDominates,
        _ => SeparationVerdict::Violated { q: a.q, q_prime: b.q },
    }
}
