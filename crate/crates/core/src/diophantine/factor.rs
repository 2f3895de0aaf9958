//! Factorization of a leaf operator into a Gauss-sum operator on residues
//! and a dilated singular operator on the quotient box, with the exact
//! residual and the error-kernel budgets.

use std::collections::HashSet;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{shifted_phase, Leaf};
use crate::arith::{e, lcm, Frac};
use crate::error::{LabError, Result};
use crate::kernels::{LatticeKernel, PieceSum, WeightTable};
use crate::lattice::{lp_norm_slice, Ball, BoxRegion, LatticeFunction, LatticePoint};
use crate::normlab::{spectral_norm, DenseMatrix, LinearOperator, SpectralOptions};
use crate::operators::{LatticeOperator, OscillatoryOperator};
use crate::polyalg::{BilinearPhase, MultiIndex, PhaseTerm};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `f -> Q^-k sum_l e(A(r, l)) f(l)` on `(Z/QZ)^k`, with `A` stored as
/// integer numerators over `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussOperator {
    modulus: i64,
    dim: usize,
    numerators: Vec<i64>,
    size: usize,
}

impl GaussOperator {
    /// From `A(r, l) = numer(r, l) / Q`; `r`, `l` run over `[0, Q)^k`.
    pub fn from_numerators(modulus: i64, dim: usize, mut numer: impl FnMut(&[i64], &[i64]) -> i128) -> Result<GaussOperator> {
        if modulus < 1 {
            return Err(LabError::InvalidSpec(format!("modulus {modulus} must be positive")));
        }
        let residues = BoxRegion::residues(dim, modulus);
        let size = residues.len();
        size.checked_mul(size).filter(|n| *n <= 1 << 26).ok_or(LabError::BudgetExceeded {
            rows: size,
            cols: size,
            budget: 1 << 26,
        })?;
        let pts: Vec<LatticePoint> = residues.points().collect();
        let mut numerators = Vec::with_capacity(size * size);
        for r in &pts {
            for l in &pts {
                numerators.push(numer(r, l).rem_euclid(modulus as i128) as i64);
            }
        }
        Ok(GaussOperator { modulus, dim, numerators, size })
    }

    /// `A(r, l) = a r l / q` on the line.
    pub fn bilinear(q: i64, a: i64) -> Result<GaussOperator> {
        GaussOperator::from_numerators(q, 1, |r, l| a as i128 * r[0] as i128 * l[0] as i128)
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn residues(&self) -> BoxRegion {
        BoxRegion::residues(self.dim, self.modulus)
    }

    fn index(&self, r: &[i64]) -> usize {
        r.iter().fold(0usize, |acc, &x| acc * self.modulus as usize + x.rem_euclid(self.modulus) as usize)
    }

    /// `A(r, l)` as a numerator over `Q`.
    pub fn numerator(&self, r: &[i64], l: &[i64]) -> i64 {
        self.numerators[self.index(r) * self.size + self.index(l)]
    }

    fn root(&self, t: i64) -> Complex64 {
        e(t as f64 / self.modulus as f64)
    }

    fn scale(&self) -> f64 {
        (self.modulus as f64).powi(-(self.dim as i32))
    }

    /// `Sf` on the residue box; `f` is read modulo `Q`.
    pub fn apply(&self, f: &LatticeFunction) -> Result<LatticeFunction> {
        if f.dim() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: f.dim() });
        }
        let region = self.residues();
        let pts: Vec<LatticePoint> = region.points().collect();
        let vals = self.apply_at(f, &pts)?;
        LatticeFunction::from_values(region, vals)
    }

    pub fn matrix(&self) -> DenseMatrix {
        let pts: Vec<LatticePoint> = self.residues().points().collect();
        DenseMatrix::from_fn(self.size, self.size, |i, j| self.root(self.numerator(&pts[i], &pts[j])) * self.scale())
    }
}

impl LatticeOperator for GaussOperator {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let mut folded = vec![ZERO; self.size];
        for (p, v) in f.support() {
            folded[self.index(&p)] += v;
        }
        let ls: Vec<LatticePoint> = self.residues().points().collect();
        Ok(sites
            .iter()
            .map(|r| {
                let mut acc = ZERO;
                for (l, v) in ls.iter().zip(&folded) {
                    if *v != ZERO {
                        acc += self.root(self.numerator(r, l)) * v;
                    }
                }
                acc * self.scale()
            })
            .collect())
    }

    fn entry(&self, r: &[i64], l: &[i64]) -> Result<Complex64> {
        Ok(self.root(self.numerator(r, l)) * self.scale())
    }
}

/// `Q^k K(Q x)` for `x != 0`.
#[derive(Clone)]
pub struct DilatedKernel {
    inner: Arc<dyn LatticeKernel>,
    factor: i64,
}

impl DilatedKernel {
    pub fn new(inner: Arc<dyn LatticeKernel>, factor: i64) -> DilatedKernel {
        DilatedKernel { inner, factor }
    }
}

impl LatticeKernel for DilatedKernel {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn weight(&self, x: &[i64]) -> f64 {
        if x.iter().all(|&v| v == 0) {
            return 0.0;
        }
        let y: Vec<i64> = x.iter().map(|v| v * self.factor).collect();
        (self.factor as f64).powi(x.len() as i32) * self.inner.weight(&y)
    }

    fn reach(&self) -> Option<f64> {
        self.inner.reach().map(|r| r / self.factor as f64)
    }
}

/// `f -> sum_{m in box, m != n} e(B(n, m)) Q^k K(Q(n - m)) f(m)` on the
/// quotient box.
#[derive(Clone, Debug)]
pub struct TNaturalOperator {
    osc: OscillatoryOperator,
    domain: Vec<LatticePoint>,
    members: HashSet<LatticePoint>,
}

impl TNaturalOperator {
    pub fn new(phase: BilinearPhase, kernel: Arc<dyn LatticeKernel>, modulus: i64, domain: Vec<LatticePoint>) -> Result<TNaturalOperator> {
        if domain.is_empty() {
            return Err(LabError::Empty("quotient box"));
        }
        let osc = OscillatoryOperator::new(phase, Arc::new(DilatedKernel::new(kernel, modulus)))?;
        let members = domain.iter().cloned().collect();
        Ok(TNaturalOperator { osc, domain, members })
    }

    pub fn domain(&self) -> &[LatticePoint] {
        &self.domain
    }

    pub fn phase(&self) -> &BilinearPhase {
        self.osc.phase()
    }

    /// Output on the bounding box of the domain, zero off the domain.
    pub fn apply(&self, f: &LatticeFunction) -> Result<LatticeFunction> {
        let vals = self.apply_at(f, &self.domain)?;
        let mut out = LatticeFunction::zeros(BoxRegion::bounding(&self.domain)?);
        for (p, v) in self.domain.iter().zip(vals) {
            out.set(p, v);
        }
        Ok(out)
    }
}

impl LatticeOperator for TNaturalOperator {
    fn input_dim(&self) -> usize {
        self.osc.dim()
    }

    fn output_dim(&self) -> usize {
        self.osc.dim()
    }

    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let restricted = LatticeFunction::from_points(
            &self.domain.iter().map(|m| (m.clone(), f.get(m))).collect::<Vec<_>>(),
        )?;
        let vals = self.osc.apply_at(&restricted, sites)?;
        Ok(sites.iter().zip(vals).map(|(s, v)| if self.members.contains(s) { v } else { ZERO }).collect())
    }

    fn entry(&self, n: &[i64], m: &[i64]) -> Result<Complex64> {
        if !(self.members.contains(n) && self.members.contains(m)) {
            return Ok(ZERO);
        }
        self.osc.entry(n, m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationOptions {
    /// Largest admissible lcm of the denominators.
    pub modulus_budget: i64,
    /// Radius standing in for an infinite `rho_2`.
    pub box_cap: f64,
}

impl Default for FactorizationOptions {
    fn default() -> Self {
        FactorizationOptions { modulus_budget: 512, box_cap: 1024.0 }
    }
}

/// Everything needed to compare a leaf operator with its factorization.
#[derive(Clone, Debug)]
pub struct FactorizationData {
    pub dim: usize,
    pub modulus: i64,
    pub js: Vec<u32>,
    pub shifts: Vec<(u32, LatticePoint)>,
    pub rho2: Option<f64>,
    /// `min(rho_2, box_cap)`.
    pub radius: f64,
    pub gauss: GaussOperator,
    /// `B(n, m)` on the quotient box.
    pub b_phase: BilinearPhase,
    /// Points `nbar` with `|nbar| <= (radius + sqrt k) / Q`.
    pub quotient_box: Vec<LatticePoint>,
    /// Phase of the leaf operator: level parts shifted by their `z_s`.
    pub sharp_phase: BilinearPhase,
}

impl FactorizationData {
    /// `nbar Q + r` for every `nbar` in the quotient box and residue `r`.
    pub fn full_domain(&self) -> Vec<LatticePoint> {
        let residues: Vec<LatticePoint> = self.gauss.residues().points().collect();
        let mut out = Vec::with_capacity(self.quotient_box.len() * residues.len());
        for nb in &self.quotient_box {
            for r in &residues {
                out.push(nb.iter().zip(r).map(|(a, b)| a * self.modulus + b).collect());
            }
        }
        out
    }

    /// The operator `T^natural` carrying the kernel `kernel`.
    pub fn tnatural(&self, kernel: Arc<dyn LatticeKernel>) -> Result<TNaturalOperator> {
        TNaturalOperator::new(self.b_phase.clone(), kernel, self.modulus, self.quotient_box.clone())
    }

    /// The leaf operator `sum_{j in leaf} T_j` with the shifted phase.
    pub fn sharp(&self, kernel: Arc<dyn LatticeKernel>) -> Result<OscillatoryOperator> {
        OscillatoryOperator::new(self.sharp_phase.clone(), kernel)
    }
}

/// Collects the leaf's fractions into `A`, `B` and the quotient box.
pub fn build_factorization(leaf: &Leaf, shifts: &[(u32, LatticePoint)], opts: &FactorizationOptions) -> Result<FactorizationData> {
    let dim = leaf.shifts.first().and_then(|z| z.first()).map_or(1, |z| z.len());
    let mut modulus: i128 = 1;
    for c in &leaf.collections {
        for en in &c.entries {
            modulus = lcm(modulus, en.approx.q as i128).ok_or(LabError::Overflow("modulus"))?;
            if modulus > opts.modulus_budget as i128 {
                return Err(LabError::BudgetExceeded { rows: modulus as usize, cols: 1, budget: opts.modulus_budget as usize });
            }
        }
    }
    let modulus = modulus as i64;
    let shift_of = |level: u32| -> LatticePoint {
        shifts.iter().find(|(l, _)| *l == level).map_or_else(|| vec![0; dim], |(_, z)| z.clone())
    };

    // A(r, l) = sum a/q (r + z_s)^alpha (l + z_s)^beta, numerators over Q
    let mut a_terms: Vec<(Frac, Vec<u32>, Vec<u32>, LatticePoint)> = Vec::new();
    let mut gamma_terms: Vec<(u32, PhaseTerm)> = Vec::new();
    let mut theta_terms: Vec<PhaseTerm> = Vec::new();
    for c in &leaf.collections {
        let z = shift_of(c.level);
        for en in &c.entries {
            a_terms.push((en.approx.fraction(), en.alpha.clone(), en.beta.clone(), z.clone()));
            gamma_terms.push((
                c.level,
                PhaseTerm {
                    alpha: MultiIndex(en.alpha.clone()),
                    beta: MultiIndex(en.beta.clone()),
                    theta: en.approx.gamma,
                },
            ));
            theta_terms.push(PhaseTerm {
                alpha: MultiIndex(en.alpha.clone()),
                beta: MultiIndex(en.beta.clone()),
                theta: en.theta,
            });
        }
    }
    let pow = |x: &[i64], e: &[u32], z: &[i64]| -> i128 {
        x.iter().zip(e).zip(z).map(|((v, p), s)| ((v + s) as i128).pow(*p)).product()
    };
    let gauss = GaussOperator::from_numerators(modulus, dim, |r, l| {
        let mut acc: i128 = 0;
        for (frac, alpha, beta, z) in &a_terms {
            let mono = pow(r, alpha, z).rem_euclid(modulus as i128) * pow(l, beta, z).rem_euclid(modulus as i128);
            acc += frac.scaled_residue(mono, modulus as i128).expect("denominator divides the modulus");
        }
        acc
    })?;

    // B(nbar, mbar) = sum gamma (nbar Q + z_s)^alpha (mbar Q + z_s)^beta
    let mut gamma_poly = BilinearPhase::zero(dim);
    let mut sharp_src = BilinearPhase::zero(dim);
    for c in &leaf.collections {
        let g = BilinearPhase::from_terms(dim, gamma_terms.iter().filter(|(l, _)| *l == c.level).map(|(_, t)| t.clone()))?;
        let z = shift_of(c.level);
        gamma_poly = gamma_poly.add(&g.shift(c.level, &z)?)?;
        sharp_src = sharp_src.add(&BilinearPhase::from_terms(dim, theta_terms.iter().filter(|t| t.degree() == c.level).cloned())?)?;
    }
    let b_phase = gamma_poly.dilate(modulus)?;
    let sharp_phase = shifted_phase(&sharp_src, shifts)?;

    let rho2 = leaf.final_radius();
    let radius = rho2.unwrap_or(f64::INFINITY).min(opts.box_cap);
    let qr = (radius + (dim as f64).sqrt()) / modulus as f64;
    let quotient_box = Ball::new(dim, qr).points();
    Ok(FactorizationData {
        dim,
        modulus,
        js: leaf.js.clone(),
        shifts: (0..leaf.collections.len()).map(|i| (leaf.collections[i].level, shift_of(leaf.collections[i].level))).collect(),
        rho2,
        radius,
        gauss,
        b_phase,
        quotient_box,
        sharp_phase,
    })
}

/// `(S x T^natural) f` evaluated by residue splitting `f(mbar Q + l)`.
pub fn product_apply(fd: &FactorizationData, tnat: &TNaturalOperator, f: &LatticeFunction) -> Result<Vec<Complex64>> {
    let residues: Vec<LatticePoint> = fd.gauss.residues().points().collect();
    let q = fd.modulus;
    let lift = |nb: &[i64], r: &[i64]| -> LatticePoint { nb.iter().zip(r).map(|(a, b)| a * q + b).collect() };
    // h_l = T^natural applied to mbar -> f(mbar Q + l)
    let h: Vec<Vec<Complex64>> = residues
        .iter()
        .map(|l| {
            let g = LatticeFunction::from_points(
                &fd.quotient_box.iter().map(|mb| (mb.clone(), f.get(&lift(mb, l)))).collect::<Vec<_>>(),
            )?;
            tnat.apply_at(&g, &fd.quotient_box)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(fd.quotient_box.len() * residues.len());
    for (bi, _) in fd.quotient_box.iter().enumerate() {
        for r in &residues {
            let mut acc = ZERO;
            for (li, l) in residues.iter().enumerate() {
                acc += fd.gauss.entry(r, l)? * h[li][bi];
            }
            out.push(acc);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub js: Vec<u32>,
    pub min_j: u32,
    pub modulus: i64,
    pub points: usize,
    /// `sup_f ||(T# - S x T^natural) f||_2 / ||f||_2`.
    pub residual_operator: f64,
    /// Largest ratio over the random test functions.
    pub residual_tests: f64,
    pub budget_g: f64,
    pub budget_h: f64,
    pub harness_constant: f64,
    pub within_budget: bool,
}

impl ResidualReport {
    pub fn combined_budget(&self) -> f64 {
        self.budget_g + self.budget_h
    }
}

/// Exact residual of the factorization on the full domain `B_2^*`. Both
/// operators carry the leaf's kernel pieces, so the residual isolates the
/// phase rounding and the kernel replacement `K(n - m)` by `K(Q(nbar - mbar))`.
pub fn factorization_residual(
    fd: &FactorizationData,
    kernel: &PieceSum,
    eps_prime: f64,
    tests: usize,
    seed: u64,
) -> Result<ResidualReport> {
    let kernel: Arc<dyn LatticeKernel> = Arc::new(kernel.clone());
    let domain = fd.full_domain();
    let nd = domain.len();
    if nd * nd > crate::operators::DEFAULT_MATRIX_BUDGET {
        return Err(LabError::BudgetExceeded { rows: nd, cols: nd, budget: crate::operators::DEFAULT_MATRIX_BUDGET });
    }
    let q = fd.modulus;
    let nmax = domain.iter().flat_map(|p| p.iter()).map(|v| v.abs()).max().unwrap_or(0);
    fd.sharp_phase.check_range(nmax, nmax)?;
    let qb = fd.quotient_box.iter().flat_map(|p| p.iter()).map(|v| v.abs()).max().unwrap_or(0);
    fd.b_phase.check_range(qb, qb)?;
    let mut radius = 2 * nmax;
    if let Some(r) = kernel.reach() {
        radius = radius.min(r.ceil() as i64);
    }
    let table = WeightTable::build(kernel.as_ref(), radius);
    let dilated = DilatedKernel::new(kernel.clone(), q);
    let split = |p: &[i64]| -> (LatticePoint, LatticePoint) {
        (p.iter().map(|v| v.div_euclid(q)).collect(), p.iter().map(|v| v.rem_euclid(q)).collect())
    };
    let rows: Vec<Vec<Complex64>> = domain
        .par_iter()
        .map(|n| {
            let (nb, r) = split(n);
            let mut row = Vec::with_capacity(nd);
            let mut d = vec![0i64; n.len()];
            for m in &domain {
                for a in 0..n.len() {
                    d[a] = n[a] - m[a];
                }
                let w = table.get(&d);
                let sharp = if w == 0.0 { ZERO } else { e(fd.sharp_phase.eval_in_range(n, m)) * w };
                let (mb, l) = split(m);
                let db: Vec<i64> = nb.iter().zip(&mb).map(|(a, b)| a - b).collect();
                let wn = dilated.weight(&db);
                let prod = if wn == 0.0 {
                    ZERO
                } else {
                    let s = fd.gauss.entry(&r, &l).expect("residue entry");
                    s * e(fd.b_phase.eval_in_range(&nb, &mb)) * wn
                };
                row.push(sharp - prod);
            }
            row
        })
        .collect();
    let data: Vec<Complex64> = rows.into_iter().flatten().collect();
    let diff = DenseMatrix::from_row_major(nd, nd, data)?;
    let residual_operator = spectral_norm(&diff, &SpectralOptions::default()).value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual_tests: f64 = 0.0;
    for _ in 0..tests {
        let x: Vec<Complex64> = (0..nd).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let y = diff.apply(&x);
        residual_tests = residual_tests.max(lp_norm_slice(&y, 2.0) / lp_norm_slice(&x, 2.0));
    }
    let k = fd.dim as u32;
    let (mut budget_g, mut budget_h) = (0.0, 0.0);
    for &j in &fd.js {
        let (g, h) = error_kernel_norms(j.max(1), eps_prime, q, k);
        budget_g += g;
        budget_h += h;
    }
    let harness_constant = 10.0;
    Ok(ResidualReport {
        js: fd.js.clone(),
        min_j: fd.js.iter().copied().min().unwrap_or(0),
        modulus: q,
        points: nd,
        residual_operator,
        residual_tests,
        budget_g,
        budget_h,
        harness_constant,
        within_budget: residual_operator <= harness_constant * (budget_g + budget_h),
    })
}

/// `(||G_j||_1, ||H_j||_1)`: sums over `2^(j-1) <= |n| <= 2^(j+1)` of
/// `2^(-j(1 - eps')) / (1 + |n|)^k` and `Q / (1 + |n|)^(k+1)`.
pub fn error_kernel_norms(j: u32, eps_prime: f64, modulus: i64, k: u32) -> (f64, f64) {
    let lo = (j as f64 - 1.0).exp2();
    let hi = (j as f64 + 1.0).exp2();
    let r = hi.floor() as i64;
    let amp = (-(j as f64) * (1.0 - eps_prime)).exp2();
    let (mut g, mut h) = (0.0, 0.0);
    let mut visit = |norm: f64| {
        if norm >= lo && norm <= hi {
            let b = 1.0 + norm;
            g += amp / b.powi(k as i32);
            h += modulus as f64 / b.powi(k as i32 + 1);
        }
    };
    match k {
        1 => {
            for n in 1..=r {
                visit(n as f64);
                visit(n as f64);
            }
        }
        _ => {
            for p in BoxRegion::centered(k as usize, r).points() {
                visit(p.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt());
            }
        }
    }
    (g, h)
}

/// Shifted-ball diagnostic at `p = 2`: `||T||` on `B_tau` against the
/// largest `||T_z||` on `B_rho` over the given shifts. Returns
/// `(lhs, sup_rhs, lhs / sup_rhs)`.
pub fn shifted_ball_ratio(
    phase: &BilinearPhase,
    kernel: Arc<dyn LatticeKernel>,
    rho: i64,
    tau: i64,
    shifts: &[LatticePoint],
) -> Result<(f64, f64, f64)> {
    let dim = phase.dim();
    let norm_on = |ph: &BilinearPhase, radius: i64| -> Result<f64> {
        let op = OscillatoryOperator::new(ph.clone(), kernel.clone())?;
        let pts = Ball::new(dim, radius as f64).points();
        let m = crate::operators::materialize(&op, &pts, &pts, crate::operators::DEFAULT_MATRIX_BUDGET)?;
        Ok(spectral_norm(&m.matrix, &SpectralOptions::default()).value)
    };
    let lhs = norm_on(phase, tau)?;
    let mut sup: f64 = 0.0;
    for z in shifts {
        sup = sup.max(norm_on(&phase.shift(0, z)?, rho)?);
    }
    Ok((lhs, sup, if sup > 0.0 { lhs / sup } else { f64::INFINITY }))
}
