//! Multi-indices, integer polynomial maps, real phase polynomials, the
//! generic polynomial and the descent map, degree padding, pure-term
//! splitting and shift expansion.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::{wrap01, Frac};
use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> MultiIndex {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|alpha| = alpha_1 + ... + alpha_k`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `x^alpha`, overflow-checked.
    pub fn monomial(&self, x: &[i64]) -> Result<i128> {
        if x.len() != self.0.len() {
            return Err(LabError::DimensionMismatch { expected: self.0.len(), got: x.len() });
        }
        let mut acc: i128 = 1;
        for (&xi, &a) in x.iter().zip(&self.0) {
            for _ in 0..a {
                acc = acc.checked_mul(xi as i128).ok_or(LabError::Overflow("monomial"))?;
            }
        }
        Ok(acc)
    }

    pub fn monomial_f64(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.0).map(|(xi, &a)| xi.powi(a as i32)).product()
    }

    /// Concatenation `(self, other)` as an index on the product space.
    pub fn join(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All `alpha` with `1 <= |alpha| <= d` in graded lexicographic order:
/// by degree, then lexicographically descending in the exponents, so
/// `(x1, x2, x1^2, x1 x2, x2^2)` for two variables and degree two.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
}

fn compositions(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == dim {
        prefix.push(total);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(dim, total - first, prefix, out);
        prefix.pop();
    }
}

impl IndexSet {
    pub fn new(dim: usize, degree: u32) -> IndexSet {
        assert!(dim >= 1, "index set over zero variables");
        let mut indices = Vec::new();
        for total in 1..=degree {
            compositions(dim, total, &mut Vec::new(), &mut indices);
        }
        IndexSet { dim, degree, indices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// The cardinality `D`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dim() != self.dim || alpha.order() == 0 || alpha.order() > self.degree {
            return None;
        }
        self.indices.iter().position(|a| a == alpha)
    }
}

/// `C(k + d, d) - 1`.
pub fn index_set_size(dim: usize, degree: u32) -> usize {
    let (n, r) = (dim as u128 + degree as u128, degree as u128);
    let mut c: u128 = 1;
    for i in 0..r {
        c = c * (n - i) / (i + 1);
    }
    (c - 1) as usize
}

/// `m -> (m^alpha)_{alpha in Ind(d)}`.
pub fn generic_eval(set: &IndexSet, m: &[i64]) -> Result<Vec<i128>> {
    set.indices.iter().map(|a| a.monomial(m)).collect()
}

/// Integer polynomial map `Z^k1 -> Z^k2` without constant term, stored
/// densely over `Ind(d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntPolyMap {
    set: IndexSet,
    out_dim: usize,
    /// `coeffs[l][i]` is the coefficient of `x^alpha_i` in component `l`.
    coeffs: Vec<Vec<i64>>,
}

impl IntPolyMap {
    /// Builds from `(alpha, l, beta)` terms; repeated terms add up and
    /// order-zero terms are dropped.
    pub fn from_terms(in_dim: usize, out_dim: usize, terms: &[(MultiIndex, usize, i64)]) -> Result<IntPolyMap> {
        if out_dim == 0 {
            return Err(LabError::Empty("polynomial output dimension"));
        }
        let degree = terms.iter().map(|(a, _, _)| a.order()).max().unwrap_or(1).max(1);
        let set = IndexSet::new(in_dim, degree);
        let mut coeffs = vec![vec![0i64; set.len()]; out_dim];
        for (alpha, l, beta) in terms {
            if alpha.dim() != in_dim {
                return Err(LabError::DimensionMismatch { expected: in_dim, got: alpha.dim() });
            }
            if *l >= out_dim {
                return Err(LabError::InvalidSpec(format!("component {l} out of range for {out_dim} outputs")));
            }
            if alpha.order() == 0 {
                continue;
            }
            let i = set.position(alpha).expect("index within degree");
            coeffs[*l][i] = coeffs[*l][i].checked_add(*beta).ok_or(LabError::Overflow("polynomial coefficient"))?;
        }
        Ok(IntPolyMap { set, out_dim, coeffs })
    }

    /// One-variable, one-component `sum c_i m^(i+1)`.
    pub fn univariate(coeffs: &[i64]) -> IntPolyMap {
        let terms: Vec<(MultiIndex, usize, i64)> =
            coeffs.iter().enumerate().map(|(i, &c)| (MultiIndex(vec![i as u32 + 1]), 0, c)).collect();
        IntPolyMap::from_terms(1, 1, &terms).expect("valid univariate polynomial")
    }

    pub fn in_dim(&self) -> usize {
        self.set.dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn degree(&self) -> u32 {
        self.set.degree
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.set
    }

    pub fn coefficient(&self, l: usize, alpha: &MultiIndex) -> i64 {
        self.set.position(alpha).map_or(0, |i| self.coeffs[l][i])
    }

    pub fn terms(&self) -> Vec<(MultiIndex, usize, i64)> {
        let mut out = Vec::new();
        for (l, row) in self.coeffs.iter().enumerate() {
            for (i, &c) in row.iter().enumerate() {
                if c != 0 {
                    out.push((self.set.indices[i].clone(), l, c));
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|r| r.iter().all(|&c| c == 0))
    }

    /// Exact value with 128-bit checked intermediates.
    pub fn eval(&self, m: &[i64]) -> Result<Vec<i128>> {
        let mono = generic_eval(&self.set, m)?;
        self.coeffs
            .iter()
            .map(|row| {
                row.iter().zip(&mono).try_fold(0i128, |acc, (&c, &x)| {
                    if c == 0 {
                        return Ok(acc);
                    }
                    (c as i128)
                        .checked_mul(x)
                        .and_then(|t| acc.checked_add(t))
                        .ok_or(LabError::Overflow("polynomial evaluation"))
                })
            })
            .collect()
    }

    /// Value narrowed to lattice coordinates.
    pub fn eval_point(&self, m: &[i64]) -> Result<Vec<i64>> {
        self.eval(m)?
            .into_iter()
            .map(|v| i64::try_from(v).map_err(|_| LabError::Overflow("polynomial value exceeds i64")))
            .collect()
    }

    pub fn pad_degree(&self, degree: u32) -> Result<IntPolyMap> {
        if degree < self.set.degree {
            return Err(LabError::DegreeTooSmall { requested: degree, current: self.set.degree });
        }
        let set = IndexSet::new(self.set.dim, degree);
        let mut coeffs = vec![vec![0i64; set.len()]; self.out_dim];
        for (l, row) in self.coeffs.iter().enumerate() {
            // graded order makes the old set a prefix of the new one
            coeffs[l][..row.len()].copy_from_slice(row);
        }
        Ok(IntPolyMap { set, out_dim: self.out_dim, coeffs })
    }

    pub fn descent_map(&self) -> DescentMap {
        DescentMap { set: self.set.clone(), out_dim: self.out_dim, coeffs: self.coeffs.clone() }
    }
}

/// Linear map `R^k2 -> R^D`, `[L eta]_alpha = sum_l beta_{l,alpha} eta_l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentMap {
    set: IndexSet,
    out_dim: usize,
    coeffs: Vec<Vec<i64>>,
}

impl DescentMap {
    pub fn index_set(&self) -> &IndexSet {
        &self.set
    }

    /// `(D, k2)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.set.len(), self.out_dim)
    }

    pub fn entry(&self, alpha_pos: usize, l: usize) -> i64 {
        self.coeffs[l][alpha_pos]
    }

    pub fn apply(&self, eta: &[f64]) -> Vec<f64> {
        (0..self.set.len()).map(|i| (0..self.out_dim).map(|l| self.coeffs[l][i] as f64 * eta[l]).sum()).collect()
    }

    pub fn apply_exact(&self, eta: &[i128]) -> Result<Vec<i128>> {
        (0..self.set.len())
            .map(|i| {
                (0..self.out_dim).try_fold(0i128, |acc, l| {
                    (self.coeffs[l][i] as i128)
                        .checked_mul(eta[l])
                        .and_then(|t| acc.checked_add(t))
                        .ok_or(LabError::Overflow("descent map"))
                })
            })
            .collect()
    }
}

/// `Builds P` for `descent_map(P, d)`: pad then read off the coefficient matrix.
pub fn descent_map(p: &IntPolyMap, degree: u32) -> Result<DescentMap> {
    Ok(p.pad_degree(degree)?.descent_map())
}

/// Real phase `Q(x) = sum theta_alpha x^alpha` indexed by `Ind(d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientVector {
    set: IndexSet,
    theta: Vec<Frac>,
}

impl CoefficientVector {
    pub fn zero(dim: usize, degree: u32) -> CoefficientVector {
        let set = IndexSet::new(dim, degree);
        let n = set.len();
        CoefficientVector { set, theta: vec![Frac::ZERO; n] }
    }

    pub fn from_terms(dim: usize, terms: &[(MultiIndex, Frac)]) -> Result<CoefficientVector> {
        let degree = terms.iter().map(|(a, _)| a.order()).max().unwrap_or(1).max(1);
        let mut v = CoefficientVector::zero(dim, degree);
        for (alpha, th) in terms {
            if alpha.order() == 0 {
                continue;
            }
            let i = v.set.position(alpha).ok_or_else(|| LabError::InvalidSpec(format!("index {alpha} invalid")))?;
            v.theta[i] = v.theta[i].add_mod1(th).ok_or(LabError::Overflow("coefficient sum"))?;
        }
        Ok(v)
    }

    /// One variable, `sum theta_i x^(i+1)`.
    pub fn univariate(theta: &[f64]) -> CoefficientVector {
        let terms: Vec<(MultiIndex, Frac)> =
            theta.iter().enumerate().map(|(i, &t)| (MultiIndex(vec![i as u32 + 1]), Frac::from_f64(t))).collect();
        CoefficientVector::from_terms(1, &terms).expect("valid coefficients")
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.set
    }

    pub fn values(&self) -> &[Frac] {
        &self.theta
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.theta.iter().map(Frac::to_f64).collect()
    }

    pub fn pad_degree(&self, degree: u32) -> Result<CoefficientVector> {
        if degree < self.set.degree {
            return Err(LabError::DegreeTooSmall { requested: degree, current: self.set.degree });
        }
        let set = IndexSet::new(self.set.dim, degree);
        let mut theta = vec![Frac::ZERO; set.len()];
        theta[..self.theta.len()].copy_from_slice(&self.theta);
        Ok(CoefficientVector { set, theta })
    }

    /// `Q(x) mod 1`, exact per term.
    pub fn eval_mod1(&self, x: &[i64]) -> Result<f64> {
        let mut acc = 0.0;
        for (alpha, th) in self.set.indices.iter().zip(&self.theta) {
            if th.is_zero() {
                continue;
            }
            acc += th.frac_mul(alpha.monomial(x)?);
        }
        Ok(wrap01(acc))
    }
}

/// One term `theta * n^alpha * m^beta`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTerm {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    pub theta: Frac,
}

impl PhaseTerm {
    pub fn degree(&self) -> u32 {
        self.alpha.order() + self.beta.order()
    }
}

/// Phase polynomial `Q(n, m) = sum theta_{alpha,beta} n^alpha m^beta` with
/// coefficients kept exactly and reduced modulo 1. Terms are sorted by
/// `(alpha, beta)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearPhase {
    dim: usize,
    degree: u32,
    terms: Vec<PhaseTerm>,
    shifts: Vec<(u32, Vec<i64>)>,
}

impl BilinearPhase {
    pub fn zero(dim: usize) -> BilinearPhase {
        BilinearPhase { dim, degree: 0, terms: Vec::new(), shifts: Vec::new() }
    }

    /// Collects terms, merging repeats and dropping zero coefficients.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = PhaseTerm>) -> Result<BilinearPhase> {
        let mut map: BTreeMap<(MultiIndex, MultiIndex), Frac> = BTreeMap::new();
        for t in terms {
            if t.alpha.dim() != dim || t.beta.dim() != dim {
                return Err(LabError::DimensionMismatch { expected: dim, got: t.alpha.dim().max(t.beta.dim()) });
            }
            let slot = map.entry((t.alpha, t.beta)).or_insert(Frac::ZERO);
            *slot = slot.add_mod1(&t.theta).ok_or(LabError::Overflow("phase coefficient"))?;
        }
        let terms: Vec<PhaseTerm> = map
            .into_iter()
            .filter(|(_, th)| !th.is_zero())
            .map(|((alpha, beta), theta)| PhaseTerm { alpha, beta, theta })
            .collect();
        let degree = terms.iter().map(PhaseTerm::degree).max().unwrap_or(0);
        Ok(BilinearPhase { dim, degree, terms, shifts: Vec::new() })
    }

    /// `theta * n * m` on the line.
    pub fn bilinear_1d(theta: Frac) -> BilinearPhase {
        let one = MultiIndex(vec![1]);
        BilinearPhase::from_terms(1, [PhaseTerm { alpha: one.clone(), beta: one, theta }]).expect("one-dimensional")
    }

    /// Line phase from `(a, b, theta)` meaning `theta n^a m^b`.
    pub fn from_exponents_1d(terms: &[(u32, u32, Frac)]) -> BilinearPhase {
        BilinearPhase::from_terms(
            1,
            terms.iter().map(|&(a, b, theta)| PhaseTerm { alpha: MultiIndex(vec![a]), beta: MultiIndex(vec![b]), theta }),
        )
        .expect("one-dimensional")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[PhaseTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn shift_history(&self) -> &[(u32, Vec<i64>)] {
        &self.shifts
    }

    pub fn coefficient(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Frac {
        self.terms.iter().find(|t| &t.alpha == alpha && &t.beta == beta).map_or(Frac::ZERO, |t| t.theta)
    }

    /// Terms of total degree exactly `s`.
    pub fn level(&self, s: u32) -> impl Iterator<Item = &PhaseTerm> {
        self.terms.iter().filter(move |t| t.degree() == s)
    }

    /// Terms of total degree at most `s`.
    pub fn truncate(&self, s: u32) -> BilinearPhase {
        let mut out = BilinearPhase::from_terms(self.dim, self.terms.iter().filter(|t| t.degree() <= s).cloned())
            .expect("subset of valid terms");
        out.shifts = self.shifts.clone();
        out
    }

    /// Declares a larger degree; evaluation is unchanged.
    pub fn pad_degree(&self, degree: u32) -> Result<BilinearPhase> {
        if degree < self.degree {
            return Err(LabError::DegreeTooSmall { requested: degree, current: self.degree });
        }
        let mut out = self.clone();
        out.degree = degree;
        Ok(out)
    }

    /// `Q(n, m) mod 1` with each term reduced exactly.
    pub fn eval_mod1(&self, n: &[i64], m: &[i64]) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            let v = t.alpha.monomial(n)?.checked_mul(t.beta.monomial(m)?).ok_or(LabError::Overflow("phase monomial"))?;
            acc += t.theta.frac_mul(v);
        }
        Ok(wrap01(acc))
    }

    /// Fails if some monomial could overflow for `|n_i| <= n_max`,
    /// `|m_i| <= m_max`; afterwards `eval_in_range` is safe.
    pub fn check_range(&self, n_max: i64, m_max: i64) -> Result<()> {
        let (nb, mb) = ((n_max.unsigned_abs() as f64).max(1.0), (m_max.unsigned_abs() as f64).max(1.0));
        for t in &self.terms {
            let bound = nb.powi(t.alpha.order() as i32) * mb.powi(t.beta.order() as i32);
            if bound >= 1.6e38 {
                return Err(LabError::Overflow("phase monomial range"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval_in_range(&self, n: &[i64], m: &[i64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v: i128 = 1;
            for (x, &a) in n.iter().zip(&t.alpha.0) {
                for _ in 0..a {
                    v *= *x as i128;
                }
            }
            for (x, &b) in m.iter().zip(&t.beta.0) {
                for _ in 0..b {
                    v *= *x as i128;
                }
            }
            acc += t.theta.frac_mul(v);
        }
        acc
    }

    /// Plain floating evaluation `sum theta n^alpha m^beta` without modular
    /// reduction; used as an independent reference on small boxes.
    pub fn eval_naive(&self, n: &[f64], m: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.theta.to_f64() * t.alpha.monomial_f64(n) * t.beta.monomial_f64(m)).sum()
    }

    pub fn scale_int(&self, k: i128) -> Result<BilinearPhase> {
        BilinearPhase::from_terms(
            self.dim,
            self.terms
                .iter()
                .map(|t| {
                    let theta = t.theta.checked_mul_int(k).ok_or(LabError::Overflow("phase scaling"))?.fract();
                    Ok(PhaseTerm { alpha: t.alpha.clone(), beta: t.beta.clone(), theta })
                })
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn add(&self, other: &BilinearPhase) -> Result<BilinearPhase> {
        if self.dim != other.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut out = BilinearPhase::from_terms(self.dim, self.terms.iter().chain(&other.terms).cloned())?;
        out.degree = out.degree.max(self.degree).max(other.degree);
        out.shifts = self.shifts.clone();
        Ok(out)
    }

    pub fn neg(&self) -> BilinearPhase {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.theta = t.theta.neg().fract();
        }
        out
    }

    /// `Q(m, n)`: exponents of the two variables swapped.
    pub fn transpose(&self) -> BilinearPhase {
        let mut out = BilinearPhase::from_terms(
            self.dim,
            self.terms.iter().map(|t| PhaseTerm { alpha: t.beta.clone(), beta: t.alpha.clone(), theta: t.theta }),
        )
        .expect("same dimension");
        out.degree = self.degree;
        out
    }

    /// `Q(c n, c m)`.
    pub fn dilate(&self, c: i64) -> Result<BilinearPhase> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f = (c as i128).checked_pow(t.degree()).ok_or(LabError::Overflow("dilation"))?;
                let theta = t.theta.checked_mul_int(f).ok_or(LabError::Overflow("dilation"))?.fract();
                Ok(PhaseTerm { alpha: t.alpha.clone(), beta: t.beta.clone(), theta })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = BilinearPhase::from_terms(self.dim, terms)?;
        out.degree = self.degree;
        Ok(out)
    }

    /// `Q(n + z, m + z)` expanded binomially; records `(level, z)`.
    pub fn shift(&self, level: u32, z: &[i64]) -> Result<BilinearPhase> {
        if z.len() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: z.len() });
        }
        let mut out_terms = Vec::new();
        for t in &self.terms {
            let na = expand_shift(&t.alpha, z)?;
            let mb = expand_shift(&t.beta, z)?;
            for (ga, ca) in &na {
                for (gb, cb) in &mb {
                    let c = ca.checked_mul(*cb).ok_or(LabError::Overflow("shift expansion"))?;
                    let theta = t.theta.checked_mul_int(c).ok_or(LabError::Overflow("shift expansion"))?.fract();
                    out_terms.push(PhaseTerm { alpha: ga.clone(), beta: gb.clone(), theta });
                }
            }
        }
        let mut out = BilinearPhase::from_terms(self.dim, out_terms)?;
        out.degree = self.degree;
        out.shifts = self.shifts.clone();
        out.shifts.push((level, z.to_vec()));
        Ok(out)
    }

    /// `Q(n, n - m)` as a polynomial in `(n, m)`.
    pub fn substitute_difference(&self) -> Result<BilinearPhase> {
        let mut out_terms = Vec::new();
        for t in &self.terms {
            // (n - m)^beta = prod_i sum_g C(b_i, g) n_i^(b_i - g) (-m_i)^g
            for (gamma, c) in expand_difference(&t.beta)? {
                let alpha = MultiIndex(t.alpha.0.iter().zip(&t.beta.0).zip(&gamma.0).map(|((a, b), g)| a + b - g).collect());
                let theta = t.theta.checked_mul_int(c).ok_or(LabError::Overflow("difference substitution"))?.fract();
                out_terms.push(PhaseTerm { alpha, beta: gamma, theta });
            }
        }
        let mut out = BilinearPhase::from_terms(self.dim, out_terms)?;
        out.degree = self.degree;
        Ok(out)
    }

    /// `xi . P(n, m)` as a phase, where `P` acts on the concatenated
    /// variables `(n, m)` of dimension `2 * dim`.
    pub fn from_poly_pairing(dim: usize, p: &IntPolyMap, xi: &[Frac]) -> Result<BilinearPhase> {
        if p.in_dim() != 2 * dim {
            return Err(LabError::DimensionMismatch { expected: 2 * dim, got: p.in_dim() });
        }
        if xi.len() != p.out_dim() {
            return Err(LabError::DimensionMismatch { expected: p.out_dim(), got: xi.len() });
        }
        let mut terms = Vec::new();
        for (alpha, l, beta) in p.terms() {
            let theta = xi[l].checked_mul_int(beta as i128).ok_or(LabError::Overflow("pairing"))?.fract();
            terms.push(PhaseTerm {
                alpha: MultiIndex(alpha.0[..dim].to_vec()),
                beta: MultiIndex(alpha.0[dim..].to_vec()),
                theta,
            });
        }
        BilinearPhase::from_terms(dim, terms)
    }
}

fn binomial(n: u32, k: u32) -> i128 {
    let mut c: i128 = 1;
    for i in 0..k as i128 {
        c = c * (n as i128 - i) / (i + 1);
    }
    c
}

/// `(x + z)^alpha = sum_gamma c_gamma x^gamma`.
fn expand_shift(alpha: &MultiIndex, z: &[i64]) -> Result<Vec<(MultiIndex, i128)>> {
    let mut acc: Vec<(Vec<u32>, i128)> = vec![(Vec::new(), 1)];
    for (i, &a) in alpha.0.iter().enumerate() {
        let mut next = Vec::new();
        for (prefix, c) in &acc {
            for g in 0..=a {
                let zp = (z[i] as i128).checked_pow(a - g).ok_or(LabError::Overflow("shift power"))?;
                let coef = c
                    .checked_mul(binomial(a, g))
                    .and_then(|v| v.checked_mul(zp))
                    .ok_or(LabError::Overflow("shift expansion"))?;
                if coef == 0 {
                    continue;
                }
                let mut p = prefix.clone();
                p.push(g);
                next.push((p, coef));
            }
        }
        acc = next;
    }
    Ok(acc.into_iter().map(|(p, c)| (MultiIndex(p), c)).collect())
}

/// `(n - m)^beta = sum_gamma c_gamma n^(beta - gamma) m^gamma`.
fn expand_difference(beta: &MultiIndex) -> Result<Vec<(MultiIndex, i128)>> {
    let mut acc: Vec<(Vec<u32>, i128)> = vec![(Vec::new(), 1)];
    for &b in &beta.0 {
        let mut next = Vec::new();
        for (prefix, c) in &acc {
            for g in 0..=b {
                let sign = if g % 2 == 0 { 1 } else { -1 };
                let coef = c.checked_mul(sign * binomial(b, g)).ok_or(LabError::Overflow("difference expansion"))?;
                let mut p = prefix.clone();
                p.push(g);
                next.push((p, coef));
            }
        }
        acc = next;
    }
    Ok(acc.into_iter().map(|(p, c)| (MultiIndex(p), c)).collect())
}

/// `Q = core + pure_n + pure_m`; the constant term, if any, goes with
/// `pure_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedPhase {
    pub core: BilinearPhase,
    pub pure_n: BilinearPhase,
    pub pure_m: BilinearPhase,
}

pub fn normalize_bilinear(q: &BilinearPhase) -> NormalizedPhase {
    let split = |keep: &dyn Fn(&PhaseTerm) -> bool| {
        let mut p = BilinearPhase::from_terms(q.dim, q.terms.iter().filter(|t| keep(t)).cloned())
            .expect("subset of valid terms");
        p.degree = q.degree;
        p.shifts = q.shifts.clone();
        p
    };
    NormalizedPhase {
        core: split(&|t| !t.alpha.is_zero() && !t.beta.is_zero()),
        pure_n: split(&|t| t.beta.is_zero()),
        pure_m: split(&|t| t.alpha.is_zero() && !t.beta.is_zero()),
    }
}

pub fn shift_phase(q: &BilinearPhase, level: u32, z: &[i64]) -> Result<BilinearPhase> {
    q.shift(level, z)
}

/// Coefficient in config JSON: a real, or an exact `[num, den]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefSpec {
    Real(f64),
    Ratio([i64; 2]),
}

impl CoefSpec {
    pub fn to_frac(&self) -> Result<Frac> {
        match self {
            CoefSpec::Real(x) if x.is_finite() => Ok(Frac::from_f64(*x).fract()),
            CoefSpec::Real(x) => Err(LabError::NonFinite { value: *x, location: "phase coefficient".into() }),
            CoefSpec::Ratio([n, d]) => Frac::new(*n as i128, *d as i128)
                .map(|f| f.fract())
                .ok_or_else(|| LabError::InvalidSpec("zero denominator".into())),
        }
    }

    pub fn from_frac(f: &Frac) -> CoefSpec {
        if f.is_dyadic() && f.den() <= (1i128 << 53) {
            CoefSpec::Real(f.to_f64())
        } else {
            CoefSpec::Ratio([f.num() as i64, f.den() as i64])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntTermSpec {
    pub alpha: Vec<u32>,
    #[serde(default)]
    pub l: usize,
    pub beta: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTermSpec {
    pub alpha: Vec<u32>,
    #[serde(default)]
    pub beta_idx: Vec<u32>,
    pub theta: CoefSpec,
}

/// `{"P": [{alpha, l, beta}], "Q": [{alpha, beta_idx, theta}]}`.
///
/// For a one-variable phase `Q(m)` only `alpha` is given; for a phase in
/// `(n, m)` `alpha` is the exponent of `n` and `beta_idx` that of `m`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolySpec {
    #[serde(rename = "P", default)]
    pub p: Vec<IntTermSpec>,
    #[serde(rename = "Q", default)]
    pub q: Vec<PhaseTermSpec>,
}

impl PolySpec {
    pub fn int_map(&self, in_dim: usize) -> Result<IntPolyMap> {
        let out_dim = self.p.iter().map(|t| t.l + 1).max().unwrap_or(1);
        let terms: Vec<_> = self.p.iter().map(|t| (MultiIndex(t.alpha.clone()), t.l, t.beta)).collect();
        IntPolyMap::from_terms(in_dim, out_dim, &terms)
    }

    pub fn coefficient_vector(&self, dim: usize) -> Result<CoefficientVector> {
        let mut terms = Vec::new();
        for t in &self.q {
            if !t.beta_idx.is_empty() {
                return Err(LabError::InvalidSpec("one-variable phase given with beta_idx".into()));
            }
            terms.push((MultiIndex(t.alpha.clone()), t.theta.to_frac()?));
        }
        CoefficientVector::from_terms(dim, &terms)
    }

    pub fn bilinear(&self, dim: usize) -> Result<BilinearPhase> {
        let mut terms = Vec::new();
        for t in &self.q {
            let beta = if t.beta_idx.is_empty() { vec![0; dim] } else { t.beta_idx.clone() };
            terms.push(PhaseTerm { alpha: MultiIndex(t.alpha.clone()), beta: MultiIndex(beta), theta: t.theta.to_frac()? });
        }
        BilinearPhase::from_terms(dim, terms)
    }

    pub fn from_parts(p: Option<&IntPolyMap>, q: Option<&BilinearPhase>) -> PolySpec {
        PolySpec {
            p: p.map_or_else(Vec::new, |p| {
                p.terms().into_iter().map(|(a, l, beta)| IntTermSpec { alpha: a.0, l, beta }).collect()
            }),
            q: q.map_or_else(Vec::new, |q| {
                q.terms()
                    .iter()
                    .map(|t| PhaseTermSpec {
                        alpha: t.alpha.0.clone(),
                        beta_idx: t.beta.0.clone(),
                        theta: CoefSpec::from_frac(&t.theta),
                    })
                    .collect()
            }),
        }
    }
}
