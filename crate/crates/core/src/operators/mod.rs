//! The discrete operators applied to finitely supported functions, their
//! matrix realizations, and the modulation-conjugation identity.

pub mod fft;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{e, wrap01, Frac};
use crate::diophantine::{GaussOperator, TNaturalOperator};
use crate::error::{LabError, Result};
use crate::kernels::{dyadic_decompose, KernelSpec, LatticeKernel, WeightTable};
use crate::lattice::{collect_sparse, Ball, BoxRegion, LatticeFunction, LatticePoint};
use crate::normlab::{DenseMatrix, LinearOperator};
use crate::polyalg::{normalize_bilinear, BilinearPhase, CoefficientVector, IntPolyMap, MultiIndex, PolySpec};

pub use fft::fft_convolve;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A linear operator between lattice function spaces.
pub trait LatticeOperator: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Image of `f` evaluated at `sites`.
    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>>;
    /// Weight carried from input site `m` to output site `n`.
    fn entry(&self, n: &[i64], m: &[i64]) -> Result<Complex64>;
}

/// Convolution strategy for translation-invariant operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMethod {
    #[default]
    Auto,
    Direct,
    Fft,
}

const AUTO_FFT_WORK: usize = 1 << 22;

fn dims_match(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(LabError::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn max_abs_coord<'a>(points: impl Iterator<Item = &'a LatticePoint>) -> i64 {
    points.flat_map(|p| p.iter()).map(|v| v.abs()).max().unwrap_or(0)
}

fn diff(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Aggregated `v -> sum_{P(m) = v} K(m) e(Q(m))` over `m` in `m_range`,
/// `m != 0`, sorted by `v`.
pub fn pushforward(
    p: &IntPolyMap,
    kernel: &dyn LatticeKernel,
    phase: Option<&CoefficientVector>,
    m_range: &Ball,
) -> Result<Vec<(LatticePoint, Complex64)>> {
    dims_match(p.in_dim(), kernel.dim())?;
    dims_match(p.in_dim(), m_range.dim())?;
    if let Some(q) = phase {
        dims_match(p.in_dim(), q.index_set().dim())?;
    }
    let mut acc: BTreeMap<LatticePoint, Complex64> = BTreeMap::new();
    for m in m_range.points() {
        if m.iter().all(|&v| v == 0) {
            continue;
        }
        let w = kernel.weight(&m);
        if w == 0.0 {
            continue;
        }
        let z = match phase {
            Some(q) => e(q.eval_mod1(&m)?) * w,
            None => Complex64::new(w, 0.0),
        };
        *acc.entry(p.eval_point(&m)?).or_insert(ZERO) += z;
    }
    Ok(acc.into_iter().collect())
}

/// `sum_v taps(v) f(n - v)` over the exact output support.
pub fn convolve_taps(f: &LatticeFunction, taps: &[(LatticePoint, Complex64)], method: ConvMethod) -> LatticeFunction {
    if taps.is_empty() {
        return LatticeFunction::zeros(f.region().clone());
    }
    let pts: Vec<LatticePoint> = taps.iter().map(|(v, _)| v.clone()).collect();
    let tap_box = BoxRegion::bounding(&pts).expect("nonempty taps");
    let nnz = f.values().iter().filter(|v| **v != ZERO).count();
    let use_fft = match method {
        ConvMethod::Direct => false,
        ConvMethod::Fft => true,
        ConvMethod::Auto => nnz.saturating_mul(taps.len()) > AUTO_FFT_WORK,
    };
    if use_fft {
        let mut kernel = LatticeFunction::zeros(tap_box);
        for (v, w) in taps {
            kernel.add_at(v, *w);
        }
        return fft_convolve(f, &kernel);
    }
    let out_region = f.region().sum(&tap_box);
    let dim = out_region.dim();
    let mut stride = vec![1usize; dim];
    for a in (0..dim.saturating_sub(1)).rev() {
        stride[a] = stride[a + 1] * out_region.extent(a + 1);
    }
    let offsets: Vec<(usize, Complex64)> = taps
        .iter()
        .map(|(v, w)| ((0..dim).map(|a| (v[a] - tap_box.lo()[a]) as usize * stride[a]).sum(), *w))
        .collect();
    let mut out = LatticeFunction::zeros(out_region);
    let region = f.region().clone();
    let vals = out.values_mut();
    for (idx, val) in f.values().iter().enumerate() {
        if *val == ZERO {
            continue;
        }
        let x = region.point_at(idx);
        let base: usize = (0..dim).map(|a| (x[a] - region.lo()[a]) as usize * stride[a]).sum();
        for (off, w) in &offsets {
            vals[base + off] += val * w;
        }
    }
    out
}

/// `T_P` and its twisted form `T_{P,Q}`:
/// `f -> sum_{m != 0} f(n - P(m)) K(m) e(Q(m))`.
#[derive(Clone, Debug)]
pub struct RadonOperator {
    p: IntPolyMap,
    phase: Option<CoefficientVector>,
    taps: Vec<(LatticePoint, Complex64)>,
    lookup: HashMap<LatticePoint, Complex64>,
    method: ConvMethod,
}

impl RadonOperator {
    pub fn new(
        p: IntPolyMap,
        phase: Option<CoefficientVector>,
        kernel: &dyn LatticeKernel,
        m_range: &Ball,
    ) -> Result<RadonOperator> {
        let taps = pushforward(&p, kernel, phase.as_ref(), m_range)?;
        Ok(RadonOperator::from_taps(p, phase, taps))
    }

    fn from_taps(p: IntPolyMap, phase: Option<CoefficientVector>, taps: Vec<(LatticePoint, Complex64)>) -> RadonOperator {
        let lookup = taps.iter().cloned().collect();
        RadonOperator { p, phase, taps, lookup, method: ConvMethod::Auto }
    }

    pub fn with_method(mut self, method: ConvMethod) -> RadonOperator {
        self.method = method;
        self
    }

    pub fn poly(&self) -> &IntPolyMap {
        &self.p
    }

    pub fn phase(&self) -> Option<&CoefficientVector> {
        self.phase.as_ref()
    }

    /// The pushed-forward kernel.
    pub fn taps(&self) -> &[(LatticePoint, Complex64)] {
        &self.taps
    }

    pub fn apply(&self, f: &LatticeFunction) -> Result<LatticeFunction> {
        dims_match(self.p.out_dim(), f.dim())?;
        Ok(convolve_taps(f, &self.taps, self.method))
    }
}

impl LatticeOperator for RadonOperator {
    fn input_dim(&self) -> usize {
        self.p.out_dim()
    }

    fn output_dim(&self) -> usize {
        self.p.out_dim()
    }

    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let full = self.apply(f)?;
        Ok(sites.iter().map(|s| full.get(s)).collect())
    }

    fn entry(&self, n: &[i64], m: &[i64]) -> Result<Complex64> {
        Ok(self.lookup.get(&diff(n, m)).copied().unwrap_or(ZERO))
    }
}

pub fn apply_tp(f: &LatticeFunction, p: &IntPolyMap, kernel: &dyn LatticeKernel, m_range: &Ball) -> Result<LatticeFunction> {
    RadonOperator::new(p.clone(), None, kernel, m_range)?.apply(f)
}

pub fn apply_tpq(
    f: &LatticeFunction,
    p: &IntPolyMap,
    phase: &CoefficientVector,
    kernel: &dyn LatticeKernel,
    m_range: &Ball,
) -> Result<LatticeFunction> {
    RadonOperator::new(p.clone(), Some(phase.clone()), kernel, m_range)?.apply(f)
}

/// `R_{P,Q}`: `f -> sum_m f(n - m, n' - P(n, m)) K(m) e(Q(n, m))` on
/// `Z^k x Z^l`, optionally with the second block periodic.
#[derive(Clone, Debug)]
pub struct QuasiRadonOperator {
    k: usize,
    p: IntPolyMap,
    phase: BilinearPhase,
    weights: Vec<(LatticePoint, f64)>,
    period: Option<i64>,
}

impl QuasiRadonOperator {
    /// `p` acts on the concatenated `(n, m)` of dimension `2k`.
    pub fn new(p: IntPolyMap, phase: BilinearPhase, kernel: &dyn LatticeKernel, m_range: &Ball) -> Result<QuasiRadonOperator> {
        let k = kernel.dim();
        dims_match(2 * k, p.in_dim())?;
        dims_match(k, phase.dim())?;
        dims_match(k, m_range.dim())?;
        let weights = m_range
            .points()
            .into_iter()
            .filter(|m| m.iter().any(|&v| v != 0))
            .map(|m| {
                let w = kernel.weight(&m);
                (m, w)
            })
            .filter(|(_, w)| *w != 0.0)
            .collect();
        Ok(QuasiRadonOperator { k, p, phase, weights, period: None })
    }

    /// Reduces the second block modulo `n`.
    pub fn periodic(mut self, n: i64) -> Result<QuasiRadonOperator> {
        if n < 1 {
            return Err(LabError::InvalidSpec(format!("period {n} must be at least 1")));
        }
        self.period = Some(n);
        Ok(self)
    }

    pub fn first_dim(&self) -> usize {
        self.k
    }

    pub fn second_dim(&self) -> usize {
        self.p.out_dim()
    }

    pub fn phase(&self) -> &BilinearPhase {
        &self.phase
    }

    pub fn poly(&self) -> &IntPolyMap {
        &self.p
    }

    pub fn kernel_weights(&self) -> &[(LatticePoint, f64)] {
        &self.weights
    }

    fn reduce(&self, mut v: i64) -> i64 {
        if let Some(n) = self.period {
            v = v.rem_euclid(n);
        }
        v
    }

    pub fn apply(&self, f: &LatticeFunction) -> Result<LatticeFunction> {
        let (k, l) = (self.k, self.second_dim());
        dims_match(k + l, f.dim())?;
        let support: Vec<(LatticePoint, Complex64)> = f.support().collect();
        let mut acc: BTreeMap<LatticePoint, Complex64> = BTreeMap::new();
        let mut nm = vec![0i64; 2 * k];
        for (m, w) in &self.weights {
            for (pt, v) in &support {
                let n: Vec<i64> = (0..k).map(|i| pt[i] + m[i]).collect();
                nm[..k].copy_from_slice(&n);
                nm[k..].copy_from_slice(m);
                let pv = self.p.eval_point(&nm)?;
                let ph = self.phase.eval_mod1(&n, m)?;
                let mut out = n.clone();
                for i in 0..l {
                    let shifted = pt[k + i].checked_add(pv[i]).ok_or(LabError::Overflow("second variable"))?;
                    out.push(self.reduce(shifted));
                }
                *acc.entry(out).or_insert(ZERO) += v * e(ph) * *w;
            }
        }
        if acc.is_empty() {
            return Ok(LatticeFunction::zeros(f.region().clone()));
        }
        Ok(collect_sparse(acc, k + l))
    }
}

impl LatticeOperator for QuasiRadonOperator {
    fn input_dim(&self) -> usize {
        self.k + self.second_dim()
    }

    fn output_dim(&self) -> usize {
        self.input_dim()
    }

    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let full = self.apply(f)?;
        Ok(sites.iter().map(|s| full.get(s)).collect())
    }

    fn entry(&self, n: &[i64], x: &[i64]) -> Result<Complex64> {
        let k = self.k;
        let m = diff(&n[..k], &x[..k]);
        let Some((_, w)) = self.weights.iter().find(|(mm, _)| *mm == m) else {
            return Ok(ZERO);
        };
        let mut nm = n[..k].to_vec();
        nm.extend_from_slice(&m);
        let pv = self.p.eval_point(&nm)?;
        for i in 0..self.second_dim() {
            if self.reduce(x[k + i] + pv[i]) != self.reduce(n[k + i]) {
                return Ok(ZERO);
            }
        }
        Ok(e(self.phase.eval_mod1(&n[..k], &m)?) * *w)
    }
}

pub fn apply_rpq(
    f: &LatticeFunction,
    p: &IntPolyMap,
    phase: &BilinearPhase,
    kernel: &dyn LatticeKernel,
    m_range: &Ball,
) -> Result<LatticeFunction> {
    QuasiRadonOperator::new(p.clone(), phase.clone(), kernel, m_range)?.apply(f)
}

/// `K(-x)`.
#[derive(Clone)]
pub struct Reflected(pub Arc<dyn LatticeKernel>);

impl LatticeKernel for Reflected {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn weight(&self, m: &[i64]) -> f64 {
        let r: Vec<i64> = m.iter().map(|v| -v).collect();
        self.0.weight(&r)
    }

    fn reach(&self) -> Option<f64> {
        self.0.reach()
    }
}

/// `f -> sum_m e(Q(n, m)) K(n - m) f(m)`; with a dyadic piece as kernel
/// this is the single-scale operator `T_j`.
#[derive(Clone)]
pub struct OscillatoryOperator {
    phase: BilinearPhase,
    kernel: Arc<dyn LatticeKernel>,
    method: ConvMethod,
}

impl std::fmt::Debug for OscillatoryOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OscillatoryOperator").field("phase", &self.phase).field("method", &self.method).finish()
    }
}

impl OscillatoryOperator {
    pub fn new(phase: BilinearPhase, kernel: Arc<dyn LatticeKernel>) -> Result<OscillatoryOperator> {
        dims_match(kernel.dim(), phase.dim())?;
        Ok(OscillatoryOperator { phase, kernel, method: ConvMethod::Auto })
    }

    pub fn with_method(mut self, method: ConvMethod) -> OscillatoryOperator {
        self.method = method;
        self
    }

    pub fn phase(&self) -> &BilinearPhase {
        &self.phase
    }

    pub fn kernel(&self) -> &Arc<dyn LatticeKernel> {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.phase.dim()
    }

    /// `T*`, again oscillatory: phase `-Q(m, n)` and kernel `K(-x)`.
    pub fn adjoint(&self) -> OscillatoryOperator {
        OscillatoryOperator {
            phase: self.phase.transpose().neg(),
            kernel: Arc::new(Reflected(self.kernel.clone())),
            method: self.method,
        }
    }

    /// `theta` when the phase is `theta n m + pure terms` on the line.
    fn fast_theta(&self) -> Option<Frac> {
        if self.dim() != 1 {
            return None;
        }
        let core = normalize_bilinear(&self.phase).core;
        match core.terms() {
            [t] if t.alpha.0 == [1] && t.beta.0 == [1] => Some(t.theta),
            [] => Some(Frac::ZERO),
            _ => None,
        }
    }

    fn direct(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let support: Vec<(LatticePoint, Complex64)> = f.support().collect();
        if support.is_empty() || sites.is_empty() {
            return Ok(vec![ZERO; sites.len()]);
        }
        let n_max = max_abs_coord(sites.iter());
        let m_max = max_abs_coord(support.iter().map(|(m, _)| m));
        self.phase.check_range(n_max, m_max)?;
        let mut radius = n_max + m_max;
        if let Some(r) = self.kernel.reach() {
            radius = radius.min(r.ceil() as i64);
        }
        let table = WeightTable::build(self.kernel.as_ref(), radius);
        let out = sites
            .par_iter()
            .map(|n| {
                let mut acc = ZERO;
                let mut d = vec![0i64; n.len()];
                for (m, v) in &support {
                    for a in 0..n.len() {
                        d[a] = n[a] - m[a];
                    }
                    let w = table.get(&d);
                    if w == 0.0 {
                        continue;
                    }
                    acc += e(self.phase.eval_in_range(n, m)) * (v * w);
                }
                acc
            })
            .collect();
        Ok(out)
    }

    /// Line case with phase `theta n m + p(n) + q(m)`, using
    /// `nm = (n^2 + m^2 - (n - m)^2) / 2` to reduce to a convolution.
    fn fast(&self, theta: Frac, f: &LatticeFunction, out: &BoxRegion) -> Result<LatticeFunction> {
        let half = Frac::new(theta.num(), theta.den().checked_mul(2).ok_or(LabError::Overflow("half phase"))?)
            .expect("nonzero denominator");
        let parts = normalize_bilinear(&self.phase);
        let (flo, fhi) = (f.region().lo()[0], f.region().hi()[0]);
        let (olo, ohi) = (out.lo()[0], out.hi()[0]);
        let bound = flo.abs().max(fhi.abs()).max(olo.abs()).max(ohi.abs());
        parts.pure_n.check_range(bound, bound)?;
        parts.pure_m.check_range(bound, bound)?;
        let sq = |x: i64| (x as i128) * (x as i128);
        let g = f.map(|p, v| {
            if v == ZERO {
                return ZERO;
            }
            v * e(wrap01(parts.pure_m.eval_in_range(&[0], p) + half.frac_mul(sq(p[0]))))
        });
        let mut lo = olo - fhi;
        let mut hi = ohi - flo;
        if let Some(r) = self.kernel.reach() {
            let r = r.ceil() as i64;
            lo = lo.max(-r);
            hi = hi.min(r);
        }
        if lo > hi {
            return Ok(LatticeFunction::zeros(out.clone()));
        }
        let taps_region = BoxRegion::new(vec![lo], vec![hi])?;
        let neg_half = half.neg();
        let taps = LatticeFunction::from_fn(taps_region, |x| {
            let w = self.kernel.weight(x);
            if w == 0.0 {
                ZERO
            } else {
                e(neg_half.frac_mul(sq(x[0]))) * w
            }
        });
        let conv = fft_convolve(&g, &taps);
        Ok(LatticeFunction::from_fn(out.clone(), |n| {
            let c = conv.get(n);
            if c == ZERO {
                return ZERO;
            }
            c * e(wrap01(parts.pure_n.eval_in_range(n, &[0]) + half.frac_mul(sq(n[0]))))
        }))
    }

    /// `Tf` on the sites of `out`.
    pub fn apply_box(&self, f: &LatticeFunction, out: &BoxRegion) -> Result<LatticeFunction> {
        dims_match(self.dim(), f.dim())?;
        dims_match(self.dim(), out.dim())?;
        if let Some(theta) = self.fast_theta() {
            let nnz = f.values().iter().filter(|v| **v != ZERO).count();
            let go = match self.method {
                ConvMethod::Direct => false,
                ConvMethod::Fft => true,
                ConvMethod::Auto => nnz.saturating_mul(out.len()) > AUTO_FFT_WORK,
            };
            if go {
                return self.fast(theta, f, out);
            }
        }
        let sites: Vec<LatticePoint> = out.points().collect();
        let vals = self.direct(f, &sites)?;
        LatticeFunction::from_values(out.clone(), vals)
    }
}

impl LatticeOperator for OscillatoryOperator {
    fn input_dim(&self) -> usize {
        self.dim()
    }

    fn output_dim(&self) -> usize {
        self.dim()
    }

    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        dims_match(self.dim(), f.dim())?;
        self.direct(f, sites)
    }

    fn entry(&self, n: &[i64], m: &[i64]) -> Result<Complex64> {
        let w = self.kernel.weight(&diff(n, m));
        if w == 0.0 {
            return Ok(ZERO);
        }
        Ok(e(self.phase.eval_mod1(n, m)?) * w)
    }
}

pub fn apply_osct(
    f: &LatticeFunction,
    phase: &BilinearPhase,
    kernel: Arc<dyn LatticeKernel>,
    out: &BoxRegion,
) -> Result<LatticeFunction> {
    OscillatoryOperator::new(phase.clone(), kernel)?.apply_box(f, out)
}

/// `OscT` restricted to one box in both variables, matrix-free.
pub struct OscillatoryOnBox {
    forward: OscillatoryOperator,
    backward: OscillatoryOperator,
    region: BoxRegion,
}

impl OscillatoryOnBox {
    pub fn new(op: &OscillatoryOperator, region: BoxRegion) -> Result<OscillatoryOnBox> {
        dims_match(op.dim(), region.dim())?;
        let bound = region.lo().iter().chain(region.hi()).map(|v| v.abs()).max().unwrap_or(0);
        op.phase.check_range(bound, bound)?;
        Ok(OscillatoryOnBox { forward: op.clone(), backward: op.adjoint(), region })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    fn run(&self, op: &OscillatoryOperator, x: &[Complex64]) -> Vec<Complex64> {
        let f = LatticeFunction::from_values(self.region.clone(), x.to_vec()).expect("vector matches box");
        op.apply_box(&f, &self.region).expect("phase range checked at construction").values().to_vec()
    }
}

impl LinearOperator for OscillatoryOnBox {
    fn rows(&self) -> usize {
        self.region.len()
    }

    fn cols(&self) -> usize {
        self.region.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.run(&self.forward, x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.run(&self.backward, y)
    }
}

/// Bounded weight `phi(n, m)` on real arguments.
pub type WeightFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Sampled evidence for `|phi| <= 1` and `|grad phi| <= 1/r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightCertificate {
    pub samples: usize,
    pub max_abs: f64,
    /// `sup |grad phi| * r` over samples.
    pub max_scaled_gradient: f64,
    /// `max |m| / r` over the summation set.
    pub containment: f64,
    pub warnings: Vec<String>,
}

impl WeightCertificate {
    pub fn ok(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// `f -> sum_{m in Omega} e(P(n, m)) phi(n, m) f(m)` for `n` in `Omega`.
#[derive(Clone)]
pub struct ExpSumOperator {
    phase: BilinearPhase,
    weight: WeightFn,
    omega: Vec<LatticePoint>,
    scale: f64,
}

impl std::fmt::Debug for ExpSumOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpSumOperator")
            .field("phase", &self.phase)
            .field("omega", &self.omega.len())
            .field("scale", &self.scale)
            .finish()
    }
}

impl ExpSumOperator {
    pub fn new(phase: BilinearPhase, weight: WeightFn, omega: Vec<LatticePoint>, scale: f64) -> Result<ExpSumOperator> {
        if omega.is_empty() {
            return Err(LabError::Empty("summation set"));
        }
        for p in &omega {
            dims_match(phase.dim(), p.len())?;
        }
        if !(scale > 0.0) {
            return Err(LabError::InvalidSpec(format!("scale {scale} must be positive")));
        }
        Ok(ExpSumOperator { phase, weight, omega, scale })
    }

    /// `phi = 1`.
    pub fn unit_weight() -> WeightFn {
        Arc::new(|_: &[f64], _: &[f64]| 1.0)
    }

    pub fn omega(&self) -> &[LatticePoint] {
        &self.omega
    }

    pub fn phase(&self) -> &BilinearPhase {
        &self.phase
    }

    fn weight_at(&self, n: &[i64], m: &[i64]) -> f64 {
        let nf: Vec<f64> = n.iter().map(|&v| v as f64).collect();
        let mf: Vec<f64> = m.iter().map(|&v| v as f64).collect();
        (self.weight)(&nf, &mf)
    }

    /// Output over the bounding box of `Omega`, zero off `Omega`.
    pub fn apply(&self, f: &LatticeFunction) -> Result<LatticeFunction> {
        dims_match(self.phase.dim(), f.dim())?;
        let vals = self.apply_at(f, &self.omega)?;
        let region = BoxRegion::bounding(&self.omega)?;
        let mut out = LatticeFunction::zeros(region);
        for (p, v) in self.omega.iter().zip(vals) {
            out.set(p, v);
        }
        Ok(out)
    }

    pub fn certificate(&self, samples: usize, seed: u64) -> WeightCertificate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.phase.dim();
        let h = 1e-4 * self.scale.max(1.0);
        let mut max_abs: f64 = 0.0;
        let mut max_grad: f64 = 0.0;
        for _ in 0..samples {
            let pick = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let p = &self.omega[rng.gen_range(0..self.omega.len())];
                p.iter().map(|&v| v as f64 + rng.gen_range(-0.5..0.5)).collect()
            };
            let n = pick(&mut rng);
            let m = pick(&mut rng);
            max_abs = max_abs.max((self.weight)(&n, &m).abs());
            let mut g2 = 0.0;
            for a in 0..2 * k {
                let (mut np, mut mp, mut nm, mut mm) = (n.clone(), m.clone(), n.clone(), m.clone());
                if a < k {
                    np[a] += h;
                    nm[a] -= h;
                } else {
                    mp[a - k] += h;
                    mm[a - k] -= h;
                }
                let d = ((self.weight)(&np, &mp) - (self.weight)(&nm, &mm)) / (2.0 * h);
                g2 += d * d;
            }
            max_grad = max_grad.max(g2.sqrt() * self.scale);
        }
        let containment = self
            .omega
            .iter()
            .map(|p| p.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            / self.scale;
        let mut warnings = Vec::new();
        if max_abs > 1.0 + 1e-12 {
            warnings.push(format!("weight exceeds 1 in modulus: {max_abs}"));
        }
        if max_grad > 1.0 + 1e-6 {
            warnings.push(format!("weight gradient exceeds 1/r: |grad| r = {max_grad}"));
        }
        WeightCertificate { samples, max_abs, max_scaled_gradient: max_grad, containment, warnings }
    }
}

impl LatticeOperator for ExpSumOperator {
    fn input_dim(&self) -> usize {
        self.phase.dim()
    }

    fn output_dim(&self) -> usize {
        self.phase.dim()
    }

    fn apply_at(&self, f: &LatticeFunction, sites: &[LatticePoint]) -> Result<Vec<Complex64>> {
        let inputs: Vec<(LatticePoint, Complex64)> =
            self.omega.iter().map(|m| (m.clone(), f.get(m))).filter(|(_, v)| *v != ZERO).collect();
        sites
            .par_iter()
            .map(|n| {
                if !self.omega.contains(n) {
                    return Ok(ZERO);
                }
                let mut acc = ZERO;
                for (m, v) in &inputs {
                    acc += e(self.phase.eval_mod1(n, m)?) * self.weight_at(n, m) * v;
                }
                Ok(acc)
            })
            .collect()
    }

    fn entry(&self, n: &[i64], m: &[i64]) -> Result<Complex64> {
        if !(self.omega.iter().any(|p| p == n) && self.omega.iter().any(|p| p == m)) {
            return Ok(ZERO);
        }
        Ok(e(self.phase.eval_mod1(n, m)?) * self.weight_at(n, m))
    }
}

pub fn apply_expsum(
    f: &LatticeFunction,
    phase: &BilinearPhase,
    weight: WeightFn,
    omega: &[LatticePoint],
    scale: f64,
) -> Result<(LatticeFunction, WeightCertificate)> {
    let op = ExpSumOperator::new(phase.clone(), weight, omega.to_vec(), scale)?;
    let cert = op.certificate(256, 0xce47);
    Ok((op.apply(f)?, cert))
}

/// Explicit matrix of an operator between two finite site lists.
#[derive(Clone, Debug)]
pub struct MatrixRealization {
    pub domain: Vec<LatticePoint>,
    pub codomain: Vec<LatticePoint>,
    pub matrix: DenseMatrix,
}

impl MatrixRealization {
    /// `M f` for `f` supported on the domain, as values on the codomain.
    pub fn apply(&self, f: &LatticeFunction) -> Vec<Complex64> {
        let x: Vec<Complex64> = self.domain.iter().map(|m| f.get(m)).collect();
        crate::normlab::LinearOperator::apply(&self.matrix, &x)
    }
}

pub const DEFAULT_MATRIX_BUDGET: usize = 4096 * 4096;

/// Fills entry `(n, m)` with the weight carried from `m` to `n`; columns in
/// parallel.
pub fn materialize(
    op: &dyn LatticeOperator,
    domain: &[LatticePoint],
    codomain: &[LatticePoint],
    budget: usize,
) -> Result<MatrixRealization> {
    let (rows, cols) = (codomain.len(), domain.len());
    if rows.saturating_mul(cols) > budget {
        return Err(LabError::BudgetExceeded { rows, cols, budget });
    }
    let columns: Vec<Vec<Complex64>> = domain
        .par_iter()
        .map(|m| codomain.iter().map(|n| op.entry(n, m)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixRealization {
        domain: domain.to_vec(),
        codomain: codomain.to_vec(),
        matrix: DenseMatrix::from_columns(rows, &columns),
    })
}

pub fn materialize_boxes(op: &dyn LatticeOperator, in_box: &BoxRegion, out_box: &BoxRegion, budget: usize) -> Result<MatrixRealization> {
    let domain: Vec<LatticePoint> = in_box.points().collect();
    let codomain: Vec<LatticePoint> = out_box.points().collect();
    materialize(op, &domain, &codomain, budget)
}

/// Returns `(T~ f, e(theta.n) T(e(-theta.) f))` where `T~` carries the
/// kernel `K(m) e(theta . P(m))` and `T` the kernel `K(m)`.
pub fn modulation_conjugation_check(
    p: &IntPolyMap,
    theta: &[Frac],
    kernel: &dyn LatticeKernel,
    m_range: &Ball,
    f: &LatticeFunction,
) -> Result<(LatticeFunction, LatticeFunction)> {
    dims_match(p.out_dim(), theta.len())?;
    let character = |x: &[i64]| -> f64 { wrap01(theta.iter().zip(x).map(|(t, &v)| t.frac_mul(v as i128)).sum()) };
    let plain = pushforward(p, kernel, None, m_range)?;
    let twisted: Vec<(LatticePoint, Complex64)> = plain.iter().map(|(v, w)| (v.clone(), w * e(character(v)))).collect();
    let lhs = convolve_taps(f, &twisted, ConvMethod::Direct);
    let g = f.map(|x, v| v * e(-character(x)));
    let rhs = convolve_taps(&g, &plain, ConvMethod::Direct).map(|n, v| v * e(character(n)));
    Ok((lhs, rhs))
}

/// Operator selection with the fields each variant needs.
#[derive(Clone)]
pub enum OperatorSpec {
    TP(RadonOperator),
    TPQ(RadonOperator),
    RP(QuasiRadonOperator),
    RPQ(QuasiRadonOperator),
    OscT(OscillatoryOperator),
    OscTj(OscillatoryOperator),
    ExpSum(ExpSumOperator),
    GaussS(GaussOperator),
    TNatural(TNaturalOperator),
}

impl OperatorSpec {
    pub fn variant(&self) -> &'static str {
        match self {
            OperatorSpec::TP(_) => "TP",
            OperatorSpec::TPQ(_) => "TPQ",
            OperatorSpec::RP(_) => "RP",
            OperatorSpec::RPQ(_) => "RPQ",
            OperatorSpec::OscT(_) => "OscT",
            OperatorSpec::OscTj(_) => "OscTj",
            OperatorSpec::ExpSum(_) => "ExpSum",
            OperatorSpec::GaussS(_) => "GaussS",
            OperatorSpec::TNatural(_) => "TNatural",
        }
    }

    pub fn operator(&self) -> &dyn LatticeOperator {
        match self {
            OperatorSpec::TP(o) | OperatorSpec::TPQ(o) => o,
            OperatorSpec::RP(o) | OperatorSpec::RPQ(o) => o,
            OperatorSpec::OscT(o) | OperatorSpec::OscTj(o) => o,
            OperatorSpec::ExpSum(o) => o,
            OperatorSpec::GaussS(o) => o,
            OperatorSpec::TNatural(o) => o,
        }
    }
}

/// JSON description of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub variant: String,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub poly: Option<PolySpec>,
    /// Dimension of the kernel variable.
    #[serde(default = "one")]
    pub dim: usize,
    /// Radius of the kernel summation ball.
    #[serde(default)]
    pub m_radius: Option<f64>,
    /// Scale index for `OscTj`.
    #[serde(default)]
    pub j: Option<u32>,
    /// Radius of `Omega` for `ExpSum`.
    #[serde(default)]
    pub omega_radius: Option<f64>,
}

fn one() -> usize {
    1
}

impl OperatorConfig {
    fn need<T: Clone>(&self, v: &Option<T>, what: &str) -> Result<T> {
        v.clone().ok_or_else(|| LabError::InvalidSpec(format!("operator {} requires '{what}'", self.variant)))
    }

    /// Builds the operator; `GaussS` and `TNatural` come from a
    /// factorization and are rejected here.
    pub fn build(&self) -> Result<OperatorSpec> {
        let k = self.dim;
        let kernel = || -> Result<Arc<dyn LatticeKernel>> {
            let spec = self.need(&self.kernel, "kernel")?;
            Ok(Arc::new(spec.build()?))
        };
        let poly = self.poly.clone().unwrap_or_default();
        let ball = || -> Result<Ball> { Ok(Ball::new(k, self.need(&self.m_radius, "m_radius")?)) };
        match self.variant.as_str() {
            "TP" | "TPQ" => {
                if poly.p.is_empty() {
                    return Err(LabError::InvalidSpec(format!("operator {} requires poly.P", self.variant)));
                }
                let p = poly.int_map(k)?;
                let phase = if self.variant == "TPQ" {
                    if poly.q.is_empty() {
                        return Err(LabError::InvalidSpec("operator TPQ requires poly.Q".into()));
                    }
                    Some(poly.coefficient_vector(k)?)
                } else {
                    None
                };
                let op = RadonOperator::new(p, phase, kernel()?.as_ref(), &ball()?)?;
                Ok(if self.variant == "TP" { OperatorSpec::TP(op) } else { OperatorSpec::TPQ(op) })
            }
            "RP" | "RPQ" => {
                let p = poly.int_map(2 * k)?;
                let phase = if self.variant == "RPQ" { poly.bilinear(k)? } else { BilinearPhase::zero(k) };
                let op = QuasiRadonOperator::new(p, phase, kernel()?.as_ref(), &ball()?)?;
                Ok(if self.variant == "RP" { OperatorSpec::RP(op) } else { OperatorSpec::RPQ(op) })
            }
            "OscT" => Ok(OperatorSpec::OscT(OscillatoryOperator::new(poly.bilinear(k)?, kernel()?)?)),
            "OscTj" => {
                let j = self.need(&self.j, "j")?;
                let spec = self.need(&self.kernel, "kernel")?;
                let piece = dyadic_decompose(&spec.build()?, j);
                Ok(OperatorSpec::OscTj(OscillatoryOperator::new(poly.bilinear(k)?, Arc::new(piece))?))
            }
            "ExpSum" => {
                let r = self.need(&self.omega_radius, "omega_radius")?;
                let omega = Ball::new(k, r).points();
                Ok(OperatorSpec::ExpSum(ExpSumOperator::new(poly.bilinear(k)?, ExpSumOperator::unit_weight(), omega, r.max(1.0))?))
            }
            "GaussS" | "TNatural" => Err(LabError::InvalidSpec(format!(
                "operator {} is built from a factorization, not a standalone config",
                self.variant
            ))),
            other => Err(LabError::InvalidSpec(format!("unknown operator variant '{other}'"))),
        }
    }
}

/// `m -> (m)` on `Z^k`, the identity polynomial.
pub fn identity_poly(k: usize) -> IntPolyMap {
    let terms: Vec<(MultiIndex, usize, i64)> = (0..k)
        .map(|i| {
            let mut a = vec![0u32; k];
            a[i] = 1;
            (MultiIndex(a), i, 1)
        })
        .collect();
    IntPolyMap::from_terms(k, k, &terms).expect("identity map")
}
