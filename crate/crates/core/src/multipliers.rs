//! Fourier multipliers of the Radon-type operators, the universal and
//! quasi-universal multipliers, descent and shift identities, and the
//! fiberwise route for the quasi-translation invariant operator.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{e, wrap01, Frac};
use crate::error::{LabError, Result};
use crate::kernels::{FiniteKernel, KernelSpec, LatticeKernel};
use crate::lattice::{Ball, BoxRegion, LatticeFunction, LatticePoint};
use crate::operators::{OscillatoryOperator, QuasiRadonOperator, RadonOperator};
use crate::polyalg::{descent_map, generic_eval, BilinearPhase, CoefficientVector, IndexSet, IntPolyMap, PolySpec};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    /// `sum K(m) e(-xi . P(m))`
    M,
    /// `sum K(m) e(-(xi . P(m) - Q(m)))`
    MTwist,
    /// `sum K(m) e(-xi . P0(m))` over `Ind(d)`
    Universal,
    /// `sum K(m) e(-xi . P0(m)) e(Q(m))`
    QuasiUniversal,
}

struct Term {
    weight: f64,
    /// Integer vector paired with `xi`.
    coords: Vec<i128>,
    /// `Q(m) mod 1`, zero when untwisted.
    twist: f64,
}

/// Truncated multiplier ready for evaluation. The lattice sum runs over
/// `0 < |m| <= truncation`.
pub struct Multiplier {
    kind: MultiplierKind,
    spectral_dim: usize,
    terms: Vec<Term>,
}

fn nonzero_ball(dim: usize, truncation: i64) -> Result<Vec<LatticePoint>> {
    if truncation < 1 {
        return Err(LabError::InvalidSpec(format!("kernel truncation {truncation} must be at least 1")));
    }
    Ok(Ball::new(dim, truncation as f64).points().into_iter().filter(|m| m.iter().any(|&v| v != 0)).collect())
}

fn kernel_terms(
    kernel: &dyn LatticeKernel,
    truncation: i64,
    mut coords: impl FnMut(&[i64]) -> Result<Vec<i128>>,
    mut twist: impl FnMut(&[i64]) -> Result<f64>,
) -> Result<Vec<Term>> {
    let mut out = Vec::new();
    for m in nonzero_ball(kernel.dim(), truncation)? {
        let weight = kernel.weight(&m);
        if weight == 0.0 {
            continue;
        }
        out.push(Term { weight, coords: coords(&m)?, twist: twist(&m)? });
    }
    Ok(out)
}

fn check_in_dim(kernel: &dyn LatticeKernel, got: usize) -> Result<()> {
    if kernel.dim() != got {
        return Err(LabError::DimensionMismatch { expected: kernel.dim(), got });
    }
    Ok(())
}

impl Multiplier {
    pub fn plain(p: &IntPolyMap, kernel: &dyn LatticeKernel, truncation: i64) -> Result<Multiplier> {
        check_in_dim(kernel, p.in_dim())?;
        let terms = kernel_terms(kernel, truncation, |m| p.eval(m), |_| Ok(0.0))?;
        Ok(Multiplier { kind: MultiplierKind::M, spectral_dim: p.out_dim(), terms })
    }

    pub fn twisted(p: &IntPolyMap, q: &CoefficientVector, kernel: &dyn LatticeKernel, truncation: i64) -> Result<Multiplier> {
        check_in_dim(kernel, p.in_dim())?;
        check_in_dim(kernel, q.index_set().dim())?;
        let terms = kernel_terms(kernel, truncation, |m| p.eval(m), |m| q.eval_mod1(m))?;
        Ok(Multiplier { kind: MultiplierKind::MTwist, spectral_dim: p.out_dim(), terms })
    }

    pub fn universal(degree: u32, kernel: &dyn LatticeKernel, truncation: i64) -> Result<Multiplier> {
        let set = IndexSet::new(kernel.dim(), degree);
        let terms = kernel_terms(kernel, truncation, |m| generic_eval(&set, m), |_| Ok(0.0))?;
        Ok(Multiplier { kind: MultiplierKind::Universal, spectral_dim: set.len(), terms })
    }

    /// Twist `Q = theta . P0` with `theta` padded to `degree`.
    pub fn quasi_universal(
        degree: u32,
        q: &CoefficientVector,
        kernel: &dyn LatticeKernel,
        truncation: i64,
    ) -> Result<Multiplier> {
        check_in_dim(kernel, q.index_set().dim())?;
        let q = q.pad_degree(degree)?;
        let set = q.index_set().clone();
        let terms = kernel_terms(kernel, truncation, |m| generic_eval(&set, m), |m| q.eval_mod1(m))?;
        Ok(Multiplier { kind: MultiplierKind::QuasiUniversal, spectral_dim: set.len(), terms })
    }

    pub fn kind(&self) -> MultiplierKind {
        self.kind
    }

    pub fn spectral_dim(&self) -> usize {
        self.spectral_dim
    }

    /// Number of lattice points with nonzero weight.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value at `xi`; each coordinate is taken as its exact binary value.
    pub fn eval(&self, xi: &[f64]) -> Result<Complex64> {
        if let Some(&value) = xi.iter().find(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { value, location: "multiplier frequency".into() });
        }
        let exact: Vec<Frac> = xi.iter().map(|&v| Frac::from_f64(v)).collect();
        self.eval_exact(&exact)
    }

    /// Value at a rational `xi`. Every phase `xi . v(m)` is reduced modulo 1
    /// in exact arithmetic before rounding.
    pub fn eval_exact(&self, xi: &[Frac]) -> Result<Complex64> {
        if xi.len() != self.spectral_dim {
            return Err(LabError::DimensionMismatch { expected: self.spectral_dim, got: xi.len() });
        }
        let xi: Vec<Frac> = xi.iter().map(Frac::fract).collect();
        let mut acc = ZERO;
        for t in &self.terms {
            let mut ph = t.twist;
            for (x, &c) in xi.iter().zip(&t.coords) {
                if c != 0 {
                    ph -= x.frac_mul(c);
                }
            }
            acc += e(wrap01(ph)) * t.weight;
        }
        Ok(acc)
    }

    pub fn sample(&self, xi: &[f64]) -> Result<MultiplierSample> {
        let v = self.eval(xi)?;
        Ok(MultiplierSample { xi: xi.to_vec(), re: v.re, im: v.im })
    }
}

/// JSON form of a multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    pub kind: MultiplierKind,
    pub kernel: KernelSpec,
    pub truncation: i64,
    /// Degree of the generic polynomial for the universal kinds; defaults
    /// to the larger of the degrees of `P` and `Q`.
    #[serde(default)]
    pub degree: Option<u32>,
    #[serde(flatten)]
    pub poly: PolySpec,
}

impl MultiplierSpec {
    pub fn build(&self) -> Result<Multiplier> {
        let kernel = self.kernel.build()?;
        let k1 = kernel.dim();
        let degree = |own: u32| -> u32 {
            let dp = if self.poly.p.is_empty() { 1 } else { self.poly.int_map(k1).map_or(1, |p| p.degree()) };
            self.degree.unwrap_or(own.max(dp))
        };
        match self.kind {
            MultiplierKind::M => Multiplier::plain(&self.poly.int_map(k1)?, &kernel, self.truncation),
            MultiplierKind::MTwist => Multiplier::twisted(
                &self.poly.int_map(k1)?,
                &self.poly.coefficient_vector(k1)?,
                &kernel,
                self.truncation,
            ),
            MultiplierKind::Universal => Multiplier::universal(degree(1), &kernel, self.truncation),
            MultiplierKind::QuasiUniversal => {
                let q = self.poly.coefficient_vector(k1)?;
                let d = degree(q.index_set().degree());
                Multiplier::quasi_universal(d, &q, &kernel, self.truncation)
            }
        }
    }
}

/// One row of a multiplier sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSample {
    pub xi: Vec<f64>,
    pub re: f64,
    pub im: f64,
}

pub fn eval_multiplier(spec: &MultiplierSpec, xi: &[f64]) -> Result<Complex64> {
    spec.build()?.eval(xi)
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Frac> {
    (0..dim).map(|_| Frac::from_f64(rng.gen::<f64>())).collect()
}

/// Maximum deviations in the descent identities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub samples: usize,
    /// `max |mu(L xi) - m(xi)|`
    pub plain: f64,
    /// `max |mu~(L xi) - m~(xi)|`, when a twist was given.
    pub twisted: Option<f64>,
}

/// `L xi` exactly.
fn descend(l: &crate::polyalg::DescentMap, xi: &[Frac]) -> Result<Vec<Frac>> {
    let (d, k2) = l.shape();
    (0..d)
        .map(|a| {
            (0..k2).try_fold(Frac::ZERO, |acc, i| {
                xi[i]
                    .checked_mul_int(l.entry(a, i) as i128)
                    .and_then(|t| acc.checked_add(&t))
                    .map(|s| s.fract())
                    .ok_or(LabError::Overflow("descent image"))
            })
        })
        .collect()
}

/// Compares the multipliers of `P` (and `(P, Q)`) with the universal ones
/// composed with the descent map, both padded to the common degree.
pub fn descent_identity_check(
    p: &IntPolyMap,
    q: Option<&CoefficientVector>,
    kernel: &dyn LatticeKernel,
    truncation: i64,
    samples: usize,
    seed: u64,
) -> Result<DescentReport> {
    let degree = p.degree().max(q.map_or(1, |q| q.index_set().degree()));
    let l = descent_map(p, degree)?;
    let m = Multiplier::plain(p, kernel, truncation)?;
    let mu = Multiplier::universal(degree, kernel, truncation)?;
    let twist = match q {
        Some(q) => Some((Multiplier::twisted(p, q, kernel, truncation)?, Multiplier::quasi_universal(degree, q, kernel, truncation)?)),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut plain, mut twisted) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let xi = random_point(&mut rng, p.out_dim());
        let lxi = descend(&l, &xi)?;
        plain = plain.max((mu.eval_exact(&lxi)? - m.eval_exact(&xi)?).norm());
        if let Some((mt, mut_)) = &twist {
            twisted = twisted.max((mut_.eval_exact(&lxi)? - mt.eval_exact(&xi)?).norm());
        }
    }
    Ok(DescentReport { samples, plain, twisted: twist.map(|_| twisted) })
}

/// `max |mu~(xi) - mu(xi - theta)|` over random `xi`, with `theta` the
/// coefficient vector of the twist.
pub fn quasi_shift_check(
    theta: &CoefficientVector,
    kernel: &dyn LatticeKernel,
    truncation: i64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let degree = theta.index_set().degree();
    let mu = Multiplier::universal(degree, kernel, truncation)?;
    let tilde = Multiplier::quasi_universal(degree, theta, kernel, truncation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let xi = random_point(&mut rng, mu.spectral_dim());
        let shifted: Vec<Frac> = xi
            .iter()
            .zip(theta.values())
            .map(|(x, t)| x.checked_sub(t).map(|v| v.fract()).ok_or(LabError::Overflow("shifted frequency")))
            .collect::<Result<_>>()?;
        worst = worst.max((tilde.eval_exact(&xi)? - mu.eval_exact(&shifted)?).norm());
    }
    Ok(worst)
}

/// Largest entry budget for the circulant check.
pub const CIRCULANT_BUDGET: usize = 1 << 24;

/// Materializes `T_P` on the torus `(Z/NZ)^k2` and measures
/// `max_v max_x |(C e_v)(x) - m(v/N) e_v(x)|` with `e_v(x) = e(v.x/N)`.
pub fn circulant_eigen_check(p: &IntPolyMap, kernel: &dyn LatticeKernel, truncation: i64, n: i64) -> Result<f64> {
    if n < 1 {
        return Err(LabError::InvalidSpec(format!("torus size {n} must be at least 1")));
    }
    let k2 = p.out_dim();
    let torus = BoxRegion::residues(k2, n);
    let size = torus.len();
    if size.saturating_mul(size) > CIRCULANT_BUDGET {
        return Err(LabError::BudgetExceeded { rows: size, cols: size, budget: CIRCULANT_BUDGET });
    }
    let op = RadonOperator::new(p.clone(), None, kernel, &Ball::new(kernel.dim(), truncation as f64))?;
    // first column: the kernel pushed forward and wrapped onto the torus
    let mut column = vec![ZERO; size];
    for (pt, w) in op.taps() {
        let wrapped: Vec<i64> = pt.iter().map(|v| v.rem_euclid(n)).collect();
        column[torus.index_of(&wrapped).expect("wrapped point on torus")] += *w;
    }
    let sub = |x: &[i64], y: &[i64]| -> Vec<i64> { x.iter().zip(y).map(|(a, b)| (a - b).rem_euclid(n)).collect() };
    let points: Vec<LatticePoint> = torus.points().collect();
    let mut matrix = vec![ZERO; size * size];
    for (r, x) in points.iter().enumerate() {
        for (c, y) in points.iter().enumerate() {
            matrix[r * size + c] = column[torus.index_of(&sub(x, y)).expect("on torus")];
        }
    }
    let mult = Multiplier::plain(p, kernel, truncation)?;
    let dot = |v: &[i64], x: &[i64]| -> f64 {
        let s: i128 = v.iter().zip(x).map(|(a, b)| *a as i128 * *b as i128).sum();
        s.rem_euclid(n as i128) as f64 / n as f64
    };
    let errs: Vec<f64> = points
        .par_iter()
        .map(|v| -> Result<f64> {
            let xi: Vec<Frac> = v.iter().map(|&c| Frac::new(c as i128, n as i128).expect("nonzero")).collect();
            let lambda = mult.eval_exact(&xi)?;
            let ev: Vec<Complex64> = points.iter().map(|x| e(dot(v, x))).collect();
            let mut worst = 0.0f64;
            for r in 0..size {
                let row = &matrix[r * size..(r + 1) * size];
                let cv: Complex64 = row.iter().zip(&ev).map(|(a, b)| a * b).sum();
                worst = worst.max((cv - lambda * ev[r]).norm());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Both sides of the fiberwise route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlancherelReport {
    pub period: i64,
    pub direct_norm: f64,
    pub fiber_norm: f64,
    /// Largest pointwise gap between the direct output and the reassembled one.
    pub max_pointwise: f64,
}

impl PlancherelReport {
    pub fn relative_error(&self) -> f64 {
        let scale = self.direct_norm.max(self.fiber_norm);
        if scale == 0.0 {
            0.0
        } else {
            (self.direct_norm - self.fiber_norm).abs() / scale
        }
    }
}

/// Computes `R_{P,Q} f` on `Z^k x (Z/NZ)^l` directly and through the
/// discrete transform in the second block: for each `v` the fiber is the
/// oscillatory operator with phase `Q(n, n - m) - (v/N) . P(n, n - m)` and
/// kernel `K(n - m)`.
pub fn periodic_plancherel_route(op: &QuasiRadonOperator, f: &LatticeFunction, period: i64) -> Result<PlancherelReport> {
    if period < 1 {
        return Err(LabError::InvalidSpec(format!("period {period} must be at least 1")));
    }
    let (k, l) = (op.first_dim(), op.second_dim());
    if f.dim() != k + l {
        return Err(LabError::DimensionMismatch { expected: k + l, got: f.dim() });
    }
    let direct = op.clone().periodic(period)?.apply(f)?;
    let torus = BoxRegion::residues(l, period);
    let first = BoxRegion::new(f.region().lo()[..k].to_vec(), f.region().hi()[..k].to_vec())?;

    let weights: HashMap<LatticePoint, f64> = op.kernel_weights().iter().cloned().collect();
    let reach = op.kernel_weights().iter().map(|(m, _)| m.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let span = reach.ceil() as i64;
    let out_box = BoxRegion::new(
        first.lo().iter().map(|v| v - span).collect(),
        first.hi().iter().map(|v| v + span).collect(),
    )?;
    let table = Arc::new(weights);
    let kernel: Arc<dyn LatticeKernel> = {
        let table = table.clone();
        Arc::new(FiniteKernel::new(k, reach.max(1.0), move |m| table.get(m).copied().unwrap_or(0.0)))
    };
    let q_diff = op.phase().substitute_difference()?;
    let freqs: Vec<LatticePoint> = torus.points().collect();
    let dot = |v: &[i64], x: &[i64]| -> f64 {
        let s: i128 = v.iter().zip(x).map(|(a, b)| *a as i128 * b.rem_euclid(period) as i128).sum();
        s.rem_euclid(period as i128) as f64 / period as f64
    };

    // transform of f in the second block, one function on the first block per frequency
    let fibers: Vec<LatticeFunction> = freqs
        .par_iter()
        .map(|v| -> Result<LatticeFunction> {
            let xi: Vec<Frac> = v.iter().map(|&c| Frac::new(c as i128, period as i128).expect("nonzero")).collect();
            let pairing = BilinearPhase::from_poly_pairing(k, op.poly(), &xi)?.substitute_difference()?;
            let phase = q_diff.add(&pairing.neg())?;
            let fv = LatticeFunction::from_fn(first.clone(), |n| {
                let mut acc = ZERO;
                for y in torus.points() {
                    let mut pt = n.to_vec();
                    pt.extend_from_slice(&y);
                    let val = f.get(&pt);
                    if val != ZERO {
                        acc += val * e(-dot(v, &y));
                    }
                }
                acc
            });
            OscillatoryOperator::new(phase, kernel.clone())?.apply_box(&fv, &out_box)
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / torus.len() as f64;
    let mut fiber_sq = 0.0;
    for g in &fibers {
        fiber_sq += g.values().iter().map(|z| z.norm_sqr()).sum::<f64>() * scale;
    }
    let mut max_pointwise = 0.0f64;
    let mut covered = 0.0;
    for n in out_box.points() {
        for y in torus.points() {
            let mut acc = ZERO;
            for (v, g) in freqs.iter().zip(&fibers) {
                acc += g.get(&n) * e(dot(v, &y));
            }
            acc *= scale;
            let mut pt = n.clone();
            pt.extend_from_slice(&y);
            let d = direct.get(&pt);
            covered += d.norm_sqr();
            max_pointwise = max_pointwise.max((acc - d).norm());
        }
    }
    let direct_sq: f64 = direct.values().iter().map(|z| z.norm_sqr()).sum();
    if (direct_sq - covered).abs() > 1e-9 * direct_sq.max(1.0) {
        return Err(LabError::InvalidSpec("direct output leaves the reassembly box".into()));
    }
    Ok(PlancherelReport { period, direct_norm: direct_sq.sqrt(), fiber_norm: fiber_sq.sqrt(), max_pointwise })
}

#[cfg(test)]
mod tests;
