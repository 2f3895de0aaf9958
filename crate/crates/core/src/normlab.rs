//! Operator norms of finite matrices: exact `l^1`, `l^2`, `l^inf`, lower
//! bounds for `l^p` by a dual power method, and interpolation upper bounds.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::lp_norm_slice;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> DenseMatrix {
        let cols = rows.first().map_or(0, Vec::len);
        DenseMatrix::from_fn(rows.len(), cols, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<DenseMatrix> {
        if data.len() != rows * cols {
            return Err(LabError::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds from columns.
    pub fn from_columns(rows: usize, columns: &[Vec<Complex64>]) -> DenseMatrix {
        DenseMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn conj_transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, Complex64) -> Complex64) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| f(i, j, self.get(i, j)))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (idx, v) in self.data.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                let value = if v.re.is_finite() { v.im } else { v.re };
                return Err(LabError::NonFinite {
                    value,
                    location: format!("matrix entry ({}, {})", idx / self.cols, idx % self.cols),
                });
            }
        }
        Ok(())
    }

    /// Maximum absolute column sum.
    pub fn max_col_sum(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Little-endian `(re, im)` pairs, row-major.
    pub fn to_dense_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 16);
        for v in &self.data {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_dense_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Result<DenseMatrix> {
        DenseMatrix::from_row_major(rows, cols, crate::lattice::decode_complex_le(bytes)?)
    }
}

/// Anything that can apply itself and its adjoint to vectors.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let cols = self.cols;
        let run = |i: usize| self.data[i * cols..(i + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum();
        if self.rows * self.cols >= 1 << 16 {
            (0..self.rows).into_par_iter().map(run).collect()
        } else {
            (0..self.rows).map(run).collect()
        }
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * yi;
            }
        }
        out
    }
}

/// Adjoint view of an operator.
pub struct Adjoint<'a>(pub &'a dyn LinearOperator);

impl LinearOperator for Adjoint<'_> {
    fn rows(&self) -> usize {
        self.0.cols()
    }

    fn cols(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.0.apply_adjoint(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.0.apply(y)
    }
}

/// Exponent for exact norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExactP {
    One,
    Two,
    Infinity,
}

impl ExactP {
    pub fn from_f64(p: f64) -> Option<ExactP> {
        if p == 1.0 {
            Some(ExactP::One)
        } else if p == 2.0 {
            Some(ExactP::Two)
        } else if p.is_infinite() && p > 0.0 {
            Some(ExactP::Infinity)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    /// Lanczos on `M* M` with full reorthogonalization and restarts.
    Lanczos,
    /// Plain power iteration on `M* M`.
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub method: SpectralMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { method: SpectralMethod::Lanczos, tolerance: 1e-10, max_iterations: 10_000, krylov_dim: 60, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [Complex64], s: f64) {
    for v in a {
        *v *= s;
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let nv = norm2(&v);
    scale(&mut v, 1.0 / nv);
    v
}

/// Number of eigenvalues of the symmetric tridiagonal `(a, b)` below `x`.
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..a.len() {
        let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] };
        q = a[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = f64::EPSILON * (a[i].abs() + x.abs() + 1e-300);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by bisection.
fn tridiag_max_eig(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < n { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(a, b, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Eigenvector of the tridiagonal for eigenvalue `lambda` by inverse iteration.
fn tridiag_eigvec(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    let n = a.len();
    let shift = lambda + 1e-14 * lambda.abs().max(1e-300);
    let mut y = vec![1.0; n];
    for _ in 0..4 {
        // Thomas algorithm on (T - shift I) x = y with partial safeguarding
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut diag = a[0] - shift;
        if diag == 0.0 {
            diag = 1e-300;
        }
        c[0] = if n > 1 { b[0] / diag } else { 0.0 };
        d[0] = y[0] / diag;
        for i in 1..n {
            let mut m = a[i] - shift - b[i - 1] * c[i - 1];
            if m == 0.0 {
                m = 1e-300;
            }
            c[i] = if i + 1 < n { b[i] / m } else { 0.0 };
            d[i] = (y[i] - b[i - 1] * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(nx.is_finite() && nx > 0.0) {
            break;
        }
        y = x.into_iter().map(|v| v / nx).collect();
    }
    y
}

fn lanczos_spectral(op: &dyn LinearOperator, opts: &SpectralOptions) -> SpectralResult {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return SpectralResult { value: 0.0, iterations: 0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = random_unit(&mut rng, n);
    let kmax = opts.krylov_dim.max(2).min(n);
    let mut iterations = 0;
    let mut best = 0.0f64;
    while iterations < opts.max_iterations {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut prev_theta = -1.0;
        let mut stable = 0;
        let mut exhausted = false;
        for k in 0..kmax {
            iterations += 1;
            let v = &basis[k];
            let mut w = op.apply_adjoint(&op.apply(v));
            let a = dot(v, &w).re;
            alpha.push(a);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let theta = tridiag_max_eig(&alpha, &beta);
            best = best.max(theta);
            let bnorm = norm2(&w);
            if (theta - prev_theta).abs() <= opts.tolerance * 1e-3 * theta.abs() {
                stable += 1;
            } else {
                stable = 0;
            }
            prev_theta = theta;
            if bnorm <= 1e-14 * theta.abs().max(1e-300) || k + 1 == n {
                exhausted = true;
                break;
            }
            if stable >= 3 {
                let y = tridiag_eigvec(&alpha, &beta, theta);
                let resid = bnorm * y.last().unwrap().abs();
                if resid <= opts.tolerance * theta.abs() {
                    return SpectralResult { value: best.sqrt(), iterations, converged: true };
                }
            }
            if k + 1 < kmax {
                beta.push(bnorm);
                scale(&mut w, 1.0 / bnorm);
                basis.push(w);
            }
        }
        if exhausted {
            return SpectralResult { value: best.sqrt(), iterations, converged: true };
        }
        // restart from the Ritz vector
        let theta = tridiag_max_eig(&alpha, &beta);
        let y = tridiag_eigvec(&alpha, &beta, theta);
        let mut ritz = vec![ZERO; n];
        for (q, &c) in basis.iter().zip(&y) {
            for (r, qi) in ritz.iter_mut().zip(q) {
                *r += qi * c;
            }
        }
        let nr = norm2(&ritz);
        if !(nr > 0.0) {
            break;
        }
        scale(&mut ritz, 1.0 / nr);
        start = ritz;
    }
    SpectralResult { value: best.sqrt(), iterations, converged: false }
}

fn power_spectral(op: &dyn LinearOperator, opts: &SpectralOptions) -> SpectralResult {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return SpectralResult { value: 0.0, iterations: 0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = random_unit(&mut rng, n);
    let mut prev = 0.0;
    for it in 1..=opts.max_iterations {
        let mut w = op.apply_adjoint(&op.apply(&x));
        let rayleigh = dot(&x, &w).re;
        let nw = norm2(&w);
        if nw == 0.0 {
            return SpectralResult { value: 0.0, iterations: it, converged: true };
        }
        scale(&mut w, 1.0 / nw);
        x = w;
        if (rayleigh - prev).abs() <= opts.tolerance * rayleigh.abs() {
            return SpectralResult { value: rayleigh.max(0.0).sqrt(), iterations: it, converged: true };
        }
        prev = rayleigh;
    }
    SpectralResult { value: prev.max(0.0).sqrt(), iterations: opts.max_iterations, converged: false }
}

/// Largest singular value.
pub fn spectral_norm(op: &dyn LinearOperator, opts: &SpectralOptions) -> SpectralResult {
    match opts.method {
        SpectralMethod::Lanczos => lanczos_spectral(op, opts),
        SpectralMethod::Power => power_spectral(op, opts),
    }
}

/// Exact norm for `p` in `{1, 2, inf}`.
pub fn norm_exact(m: &DenseMatrix, p: ExactP) -> Result<f64> {
    m.check_finite()?;
    Ok(match p {
        ExactP::One => m.max_col_sum(),
        ExactP::Infinity => m.max_row_sum(),
        ExactP::Two => spectral_norm(m, &SpectralOptions::default()).value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: String,
    pub iterations: usize,
    #[serde(skip)]
    pub witness: Option<Vec<Complex64>>,
}

impl NormEstimate {
    pub const CSV_HEADER: &'static str = "operator,p,lower,upper,method,iters";

    pub fn csv_row(&self, operator_id: &str) -> String {
        format!("{operator_id},{},{:.15e},{:.15e},{},{}", fmt_p(self.p), self.lower, self.upper, self.method, self.iterations)
    }
}

pub fn fmt_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// Conjugate exponent.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `x -> |x|^(p-1) sgn(x) / ||x||_p^(p-1)`, the unit dual vector.
fn dual_vector(x: &[Complex64], p: f64) -> Vec<Complex64> {
    let nx = lp_norm_slice(x, p);
    if nx == 0.0 {
        return vec![ZERO; x.len()];
    }
    x.iter()
        .map(|v| {
            let a = v.norm();
            if a == 0.0 {
                ZERO
            } else {
                (v / a) * (a / nx).powf(p - 1.0)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerOptions {
    pub max_iterations: usize,
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions { max_iterations: 100, random_starts: 8, seed: 0x1b0d }
    }
}

/// Certified lower bound `max ||M x||_p / ||x||_p` over the iterates of the
/// dual power method, started from the all-ones vector and random vectors.
pub fn norm_p_lower(m: &dyn LinearOperator, p: f64, opts: &LowerOptions) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(LabError::InvalidExponent(p));
    }
    let n = m.cols();
    if n == 0 {
        return Err(LabError::Empty("matrix"));
    }
    let q = dual_exponent(p);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![Complex64::new(1.0, 0.0); n]];
    for _ in 0..opts.random_starts {
        starts.push(random_unit(&mut rng, n));
    }
    let mut best = 0.0f64;
    let mut witness = None;
    let mut iterations = 0;
    for start in starts {
        let ns = lp_norm_slice(&start, p);
        let mut x: Vec<Complex64> = start.iter().map(|v| v / ns).collect();
        let mut prev = 0.0;
        for _ in 0..opts.max_iterations {
            iterations += 1;
            let y = m.apply(&x);
            let ratio = lp_norm_slice(&y, p) / lp_norm_slice(&x, p);
            if ratio > best {
                best = ratio;
                witness = Some(x.clone());
            }
            let z = m.apply_adjoint(&dual_vector(&y, p));
            let zq = lp_norm_slice(&z, q);
            if zq == 0.0 || ratio <= prev * (1.0 + 1e-15) {
                break;
            }
            prev = ratio;
            x = dual_vector(&z, q);
        }
    }
    Ok(NormEstimate {
        p,
        lower: best,
        upper: f64::INFINITY,
        method: "dual_power".into(),
        iterations,
        witness,
    })
}

/// Endpoint norms for interpolation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub one: f64,
    pub two: f64,
    pub inf: f64,
}

impl Endpoints {
    /// The `l^2` value is inflated by the solver tolerance so that it can
    /// serve as an upper bound.
    pub fn of(m: &DenseMatrix) -> Result<Endpoints> {
        m.check_finite()?;
        let opts = SpectralOptions::default();
        let two = spectral_norm(m, &opts).value * (1.0 + 1e2 * opts.tolerance);
        Ok(Endpoints { one: m.max_col_sum(), two, inf: m.max_row_sum() })
    }

    /// Minimum of the applicable Riesz–Thorin bounds, with the pair used.
    pub fn interpolate(&self, p: f64) -> (f64, &'static str) {
        let s = 1.0 / p;
        let mut best = (self.one.powf(s) * self.inf.powf(1.0 - s), "interp(1,inf)");
        if p <= 2.0 {
            let t = 2.0 * (1.0 - s);
            let b = self.one.powf(1.0 - t) * self.two.powf(t);
            if b < best.0 {
                best = (b, "interp(1,2)");
            }
        }
        if p >= 2.0 {
            let t = 1.0 - 2.0 * s;
            let b = self.two.powf(1.0 - t) * self.inf.powf(t);
            if b < best.0 {
                best = (b, "interp(2,inf)");
            }
        }
        best
    }
}

pub fn norm_p_upper(m: &DenseMatrix, p: f64) -> Result<NormEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(LabError::InvalidExponent(p));
    }
    let (upper, method) = Endpoints::of(m)?.interpolate(p);
    Ok(NormEstimate { p, lower: 0.0, upper, method: method.into(), iterations: 0, witness: None })
}

/// `(lower, upper)` for any `p >= 1`; exact endpoints give `lower = upper`.
pub fn norm_bracket(m: &DenseMatrix, p: f64, opts: &LowerOptions) -> Result<NormEstimate> {
    if let Some(e) = ExactP::from_f64(p) {
        let v = norm_exact(m, e)?;
        let method = match e {
            ExactP::One => "max_col_sum",
            ExactP::Two => "lanczos",
            ExactP::Infinity => "max_row_sum",
        };
        return Ok(NormEstimate { p, lower: v, upper: v, method: method.into(), iterations: 0, witness: None });
    }
    let lo = norm_p_lower(m, p, opts)?;
    let up = norm_p_upper(m, p)?;
    Ok(NormEstimate {
        p,
        lower: lo.lower,
        upper: up.upper.max(lo.lower),
        method: format!("dual_power/{}", up.method),
        iterations: lo.iterations,
        witness: lo.witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, cl: usize, complex: bool) -> DenseMatrix {
        DenseMatrix::from_fn(r, cl, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), if complex { rng.gen_range(-1.0..1.0) } else { 0.0 })
        })
    }

    fn svd_oracle(m: &DenseMatrix) -> f64 {
        let a = DMatrix::from_fn(m.rows(), m.cols(), |i, j| {
            nalgebra::Complex::new(m.get(i, j).re, m.get(i, j).im)
        });
        a.singular_values().iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn exact_examples() {
        let id = DenseMatrix::identity(5);
        for p in [ExactP::One, ExactP::Two, ExactP::Infinity] {
            assert_relative_eq!(norm_exact(&id, p).unwrap(), 1.0, epsilon = 1e-14);
        }
        let m = DenseMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(norm_exact(&m, ExactP::One).unwrap(), 2.0);
        assert_eq!(norm_exact(&m, ExactP::Infinity).unwrap(), 2.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((norm_exact(&m, ExactP::Two).unwrap() - golden).abs() < 1e-12);
        let d = DenseMatrix::from_real_rows(&[vec![3.0, 0.0], vec![0.0, -4.0]]);
        assert!((norm_exact(&d, ExactP::Two).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonfinite() {
        let m = DenseMatrix::from_real_rows(&[vec![1.0, f64::NAN]]);
        assert!(matches!(norm_exact(&m, ExactP::One), Err(LabError::NonFinite { .. })));
    }

    #[test]
    fn spectral_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, cl) in [(50, 50), (30, 70), (120, 40)] {
            let m = random_matrix(&mut rng, r, cl, true);
            let oracle = svd_oracle(&m);
            let lz = spectral_norm(&m, &SpectralOptions::default());
            assert!(lz.converged);
            assert!((lz.value - oracle).abs() <= 1e-10 * oracle, "{} vs {oracle}", lz.value);
            let pw = spectral_norm(&m, &SpectralOptions { method: SpectralMethod::Power, ..Default::default() });
            assert!((pw.value - oracle).abs() <= 1e-6 * oracle);
        }
    }

    #[test]
    fn lower_examples() {
        let id = DenseMatrix::identity(6);
        let est = norm_p_lower(&id, 3.0, &LowerOptions::default()).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(&mut rng, 50, 50, false);
        let est = norm_p_lower(&m, 2.0, &LowerOptions { max_iterations: 2000, ..Default::default() }).unwrap();
        let oracle = svd_oracle(&m);
        assert!((est.lower - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", est.lower);
    }

    #[test]
    fn rank_one_is_holder_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [1.5, 3.0, 4.5] {
            let u: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = DenseMatrix::from_fn(20, 15, |i, j| c(u[i] * v[j]));
            let uc: Vec<Complex64> = u.iter().map(|&x| c(x)).collect();
            let vc: Vec<Complex64> = v.iter().map(|&x| c(x)).collect();
            let exact = lp_norm_slice(&uc, p) * lp_norm_slice(&vc, dual_exponent(p));
            let est = norm_p_lower(&m, p, &LowerOptions::default()).unwrap();
            assert!((est.lower - exact).abs() <= 1e-6 * exact, "p {p}: {} vs {exact}", est.lower);
            let up = norm_p_upper(&m, p).unwrap();
            assert!(up.upper >= est.lower);
        }
    }

    #[test]
    fn upper_examples() {
        assert!((norm_p_upper(&DenseMatrix::identity(4), 1.7).unwrap().upper - 1.0).abs() < 1e-8);
        let m = DenseMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let (b, _) = Endpoints { one: 2.0, two: (1.0 + 5f64.sqrt()) / 2.0, inf: 2.0 }.interpolate(2.0);
        assert!(b >= (1.0 + 5f64.sqrt()) / 2.0 - 1e-15);
        assert!(norm_p_upper(&m, 1.5).unwrap().upper <= 2.0 + 1e-12);
    }

    #[test]
    fn sandwich_and_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..40 {
            let r = rng.gen_range(2..12);
            let cl = rng.gen_range(2..12);
            let m = DenseMatrix::from_fn(r, cl, |_, _| c(rng.gen_range(0.0..1.0)));
            let p = [1.25, 1.5, 3.0, 5.0][trial % 4];
            let est = norm_bracket(&m, p, &LowerOptions::default()).unwrap();
            assert!(est.lower <= est.upper, "{est:?}");
            let adj = m.conj_transpose();
            let d = norm_p_lower(&adj, dual_exponent(p), &LowerOptions::default()).unwrap();
            assert!((d.lower - est.lower).abs() <= 1e-6 * est.lower, "{} vs {}", d.lower, est.lower);
        }
    }

    #[test]
    fn phase_invariance_of_endpoint_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 9, 13, false);
        let twisted = m.map(|_, _, v| v * Complex64::cis(rng.gen_range(0.0..std::f64::consts::TAU)));
        assert!((norm_exact(&m, ExactP::One).unwrap() - norm_exact(&twisted, ExactP::One).unwrap()).abs() < 1e-13);
        assert!((norm_exact(&m, ExactP::Infinity).unwrap() - norm_exact(&twisted, ExactP::Infinity).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn dense_bytes_round_trip() {
        let m = DenseMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64, -(j as f64)));
        assert_eq!(DenseMatrix::from_dense_bytes(3, 2, &m.to_dense_bytes()).unwrap(), m);
    }
}
