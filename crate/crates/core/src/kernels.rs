//! Calderón–Zygmund kernels, their numerical verification, and the smooth
//! dyadic decomposition `K = sum_j K_j`.

use std::collections::BTreeSet;
use std::f64::consts::{LN_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{LabError, Result};

/// Closed-form kernel rule supplied from code.
pub type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum KernelFamily {
    /// `scale * t_1 / |t|^(k+1)`; `1/t` in one dimension.
    OddPower { scale: f64 },
    /// `Omega(phi) / |t|^2` in the plane with
    /// `Omega(phi) = sum_{n>=1} cos_n cos(n phi) + sin_n sin(n phi)`.
    RieszLike { cos: Vec<f64>, sin: Vec<f64> },
    Custom { name: String, rule: KernelFn },
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::OddPower { scale } => f.debug_struct("OddPower").field("scale", scale).finish(),
            KernelFamily::RieszLike { cos, sin } => {
                f.debug_struct("RieszLike").field("cos", cos).field("sin", sin).finish()
            }
            KernelFamily::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// A kernel on `R^k \ {0}` together with its claimed constant `A` and an
/// optional truncation radius applied to lattice weights.
#[derive(Clone, Debug)]
pub struct CZKernel {
    dim: usize,
    family: KernelFamily,
    constant: f64,
    support_radius: Option<f64>,
}

impl CZKernel {
    pub fn new(dim: usize, family: KernelFamily, constant: f64) -> Result<CZKernel> {
        if !(1..=2).contains(&dim) {
            return Err(LabError::InvalidSpec(format!("kernel dimension {dim} unsupported (1 or 2)")));
        }
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(LabError::InvalidSpec(format!("kernel constant A = {constant} must be positive")));
        }
        if let KernelFamily::RieszLike { .. } = family {
            if dim != 2 {
                return Err(LabError::InvalidSpec("riesz_like kernels are planar".into()));
            }
        }
        Ok(CZKernel { dim, family, constant, support_radius: None })
    }

    /// `1/t` on the line with `A = 1`.
    pub fn hilbert() -> CZKernel {
        CZKernel { dim: 1, family: KernelFamily::OddPower { scale: 1.0 }, constant: 1.0, support_radius: None }
    }

    pub fn odd_power(dim: usize, scale: f64, constant: f64) -> Result<CZKernel> {
        CZKernel::new(dim, KernelFamily::OddPower { scale }, constant)
    }

    pub fn riesz_like(cos: Vec<f64>, sin: Vec<f64>, constant: f64) -> Result<CZKernel> {
        CZKernel::new(2, KernelFamily::RieszLike { cos, sin }, constant)
    }

    pub fn custom(dim: usize, name: &str, constant: f64, rule: KernelFn) -> Result<CZKernel> {
        CZKernel::new(dim, KernelFamily::Custom { name: name.to_string(), rule }, constant)
    }

    /// Sets the truncation radius; `None` or infinity removes it.
    pub fn with_support_radius(mut self, radius: Option<f64>) -> CZKernel {
        self.support_radius = radius.filter(|r| r.is_finite());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// True when `K(-t) = -K(t)` holds by construction.
    pub fn is_odd(&self) -> bool {
        match &self.family {
            KernelFamily::OddPower { .. } => true,
            KernelFamily::RieszLike { cos, sin } => {
                cos.iter().step_by(2).all(|c| *c == 0.0) && sin.iter().step_by(2).all(|s| *s == 0.0)
            }
            KernelFamily::Custom { .. } => false,
        }
    }

    /// Closed-form value, ignoring any truncation.
    pub fn evaluate(&self, t: &[f64]) -> Result<f64> {
        if t.len() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: t.len() });
        }
        if t.iter().all(|v| *v == 0.0) {
            return Err(LabError::KernelAtOrigin);
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::OddPower { scale } => {
                if self.dim == 1 {
                    scale / t[0]
                } else {
                    let r2: f64 = t.iter().map(|v| v * v).sum();
                    scale * t[0] / (r2 * r2.sqrt())
                }
            }
            KernelFamily::RieszLike { cos, sin } => {
                let r2 = t[0] * t[0] + t[1] * t[1];
                let phi = t[1].atan2(t[0]);
                let mut omega = 0.0;
                for (i, c) in cos.iter().enumerate() {
                    omega += c * ((i + 1) as f64 * phi).cos();
                }
                for (i, s) in sin.iter().enumerate() {
                    omega += s * ((i + 1) as f64 * phi).sin();
                }
                omega / r2
            }
            KernelFamily::Custom { rule, .. } => rule(t),
        }
    }

    /// Lattice weight: `K(m)` for `0 < |m| <= support_radius`, else 0.
    pub fn lattice_weight(&self, m: &[i64]) -> f64 {
        let t: Vec<f64> = m.iter().map(|&v| v as f64).collect();
        let r2: f64 = t.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return 0.0;
        }
        if let Some(rad) = self.support_radius {
            if r2.sqrt() > rad {
                return 0.0;
            }
        }
        self.eval_unchecked(&t)
    }

    pub fn to_spec(&self) -> Result<KernelSpec> {
        let (family, params) = match &self.family {
            KernelFamily::OddPower { scale } => ("odd_power", serde_json::json!({ "scale": scale })),
            KernelFamily::RieszLike { cos, sin } => ("riesz_like", serde_json::json!({ "cos": cos, "sin": sin })),
            KernelFamily::Custom { name, .. } => {
                return Err(LabError::InvalidSpec(format!("custom kernel '{name}' has no JSON form")))
            }
        };
        Ok(KernelSpec {
            family: family.to_string(),
            dim: self.dim,
            params,
            constant: self.constant,
            support_radius: self.support_radius,
        })
    }
}

/// JSON form `{family, dim, params, A, support_radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: String,
    pub dim: usize,
    #[serde(default)]
    pub params: Value,
    #[serde(rename = "A")]
    pub constant: f64,
    #[serde(default)]
    pub support_radius: Option<f64>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<CZKernel> {
        let floats = |key: &str| -> Result<Vec<f64>> {
            match self.params.get(key) {
                None => Ok(Vec::new()),
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| LabError::InvalidSpec(format!("kernel params.{key}: {e}"))),
            }
        };
        let family = match self.family.as_str() {
            "odd_power" => {
                let scale = self.params.get("scale").and_then(Value::as_f64).unwrap_or(1.0);
                KernelFamily::OddPower { scale }
            }
            "riesz_like" => KernelFamily::RieszLike { cos: floats("cos")?, sin: floats("sin")? },
            other => return Err(LabError::InvalidSpec(format!("unknown kernel family '{other}'"))),
        };
        Ok(CZKernel::new(self.dim, family, self.constant)?.with_support_radius(self.support_radius))
    }
}

/// Smooth step: 0 for `u <= 0`, 1 for `u >= 1`.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let g = |s: f64| (-1.0 / s).exp();
    let a = g(u);
    a / (a + g(1.0 - u))
}

/// Radial cutoff: 1 on `|x| <= 1/2`, 0 on `|x| >= 1`.
pub fn cutoff(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        smooth_step(2.0 * (1.0 - r))
    }
}

const BUMP_LO: f64 = 0.75;
const BUMP_HI: f64 = 1.5;

fn raw_bump(r: f64) -> f64 {
    if r <= BUMP_LO || r >= BUMP_HI {
        0.0
    } else {
        (-1.0 / ((r - BUMP_LO) * (BUMP_HI - r))).exp()
    }
}

/// `int raw_bump(|x|) dx` over `R^dim`.
fn bump_mass(dim: usize) -> f64 {
    let n = 1 << 14;
    let h = (BUMP_HI - BUMP_LO) / n as f64;
    let radial: f64 = (0..n)
        .map(|i| {
            let r = BUMP_LO + (i as f64 + 0.5) * h;
            raw_bump(r) * r.powi(dim as i32 - 1)
        })
        .sum::<f64>()
        * h;
    let sphere = if dim == 1 { 2.0 } else { TAU };
    radial * sphere
}

/// Mean-one radial bump supported in `3/4 <= |x| <= 3/2`.
#[derive(Clone, Copy, Debug)]
pub struct Bump {
    dim: usize,
    norm: f64,
}

impl Bump {
    pub fn new(dim: usize) -> Bump {
        Bump { dim, norm: bump_mass(dim) }
    }

    pub fn eval(&self, r: f64) -> f64 {
        raw_bump(r) / self.norm
    }

    /// Rescaled bump at scale `2^j`, still of unit mass.
    pub fn eval_scaled(&self, j: u32, r: f64) -> f64 {
        let s = (j as f64).exp2();
        self.eval(r / s) / s.powi(self.dim as i32)
    }
}

/// Unit directions used by the radial-angular quadrature, in antipodal
/// pairs `(w, -w)`.
fn antipodal_directions(dim: usize, angular: usize) -> Vec<[f64; 2]> {
    if dim == 1 {
        return vec![[1.0, 0.0]];
    }
    let half = angular / 2;
    (0..half)
        .map(|i| {
            let phi = PI * (i as f64 + 0.5) / half as f64;
            [phi.cos(), phi.sin()]
        })
        .collect()
}

/// Midpoint rule in `log2 r` over `lo <= r <= hi` for `int g(x) dx`, with
/// antipodal contributions summed before weighting.
fn radial_quadrature(dim: usize, lo: f64, hi: f64, radial: usize, angular: usize, g: impl Fn(&[f64]) -> f64) -> f64 {
    let (ulo, uhi) = (lo.log2(), hi.log2());
    let du = (uhi - ulo) / radial as f64;
    let dirs = antipodal_directions(dim, angular);
    let dphi = if dim == 1 { 1.0 } else { TAU / angular as f64 };
    let mut total = 0.0;
    let mut plus = vec![0.0; dim];
    let mut minus = vec![0.0; dim];
    for i in 0..radial {
        let r = (ulo + (i as f64 + 0.5) * du).exp2();
        let jac = r.powi(dim as i32) * LN_2 * du * dphi;
        let mut ring = 0.0;
        for w in &dirs {
            for a in 0..dim {
                plus[a] = r * w[a];
                minus[a] = -plus[a];
            }
            ring += g(&plus) + g(&minus);
        }
        total += ring * jac;
    }
    total
}

/// Quadrature resolution for annulus integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub radial: usize,
    pub angular: usize,
}

impl Quadrature {
    pub fn default_for(dim: usize) -> Quadrature {
        if dim == 1 {
            Quadrature { radial: 1 << 14, angular: 1 }
        } else {
            Quadrature { radial: 1 << 10, angular: 1 << 7 }
        }
    }
}

/// One piece `K_j`, supported in `2^(j-1) <= |x| <= 2^(j+1)` with zero mean.
#[derive(Clone, Debug)]
pub struct DyadicPiece {
    j: u32,
    parent: CZKernel,
    correction: f64,
    bump: Bump,
}

impl DyadicPiece {
    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn parent(&self) -> &CZKernel {
        &self.parent
    }

    /// The mean-correction coefficient `c_j`.
    pub fn correction(&self) -> f64 {
        self.correction
    }

    pub fn inner_radius(&self) -> f64 {
        (self.j as f64 - 1.0).exp2()
    }

    pub fn outer_radius(&self) -> f64 {
        (self.j as f64 + 1.0).exp2()
    }

    /// Part before mean correction, `K(x) * (psi(x/2^(j+1)) - psi(x/2^j))`.
    fn cut_part(&self, x: &[f64], r: f64) -> f64 {
        let s = (self.j as f64).exp2();
        let window = cutoff(r / (2.0 * s)) - cutoff(r / s);
        if window == 0.0 {
            0.0
        } else {
            self.parent.eval_unchecked(x) * window
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < self.inner_radius() || r > self.outer_radius() {
            return 0.0;
        }
        let mut v = self.cut_part(x, r);
        if self.correction != 0.0 {
            v -= self.correction * self.bump.eval_scaled(self.j, r);
        }
        v
    }

    /// Quadrature estimate of `int K_j`.
    pub fn mean(&self, quad: Quadrature) -> f64 {
        radial_quadrature(self.parent.dim, self.inner_radius(), self.outer_radius(), quad.radial, quad.angular, |x| {
            self.eval(x)
        })
    }
}

/// Builds `K_j` with its mean-correction coefficient.
pub fn dyadic_decompose(kernel: &CZKernel, j: u32) -> DyadicPiece {
    dyadic_decompose_with(kernel, j, Quadrature::default_for(kernel.dim))
}

pub fn dyadic_decompose_with(kernel: &CZKernel, j: u32, quad: Quadrature) -> DyadicPiece {
    let mut piece = DyadicPiece { j, parent: kernel.clone(), correction: 0.0, bump: Bump::new(kernel.dim) };
    if !kernel.is_odd() {
        let (lo, hi) = (piece.inner_radius(), piece.outer_radius());
        let p = piece.clone();
        piece.correction = radial_quadrature(kernel.dim, lo, hi, quad.radial, quad.angular, |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            p.cut_part(x, r)
        });
    }
    piece
}

/// Parameters of `cz_verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzGrid {
    pub min_log2: f64,
    pub max_log2: f64,
    pub radial_points: usize,
    pub angular_points: usize,
    pub quadrature: Option<Quadrature>,
}

impl Default for CzGrid {
    fn default() -> Self {
        CzGrid { min_log2: -4.0, max_log2: 16.0, radial_points: 321, angular_points: 64, quadrature: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzReport {
    /// `sup |K(t)| |t|^k` over the grid.
    pub size_ratio: f64,
    /// `sup |d_i K(t)| |t|^(k+1)` over the grid and coordinates.
    pub derivative_ratio: f64,
    /// `sup |int_{eps<=|t|<=R} K|` over the supplied ranges.
    pub cancellation: f64,
    pub constant: f64,
    pub passed: bool,
    pub failure: Option<String>,
}

impl CzReport {
    pub fn max_ratio(&self) -> f64 {
        self.size_ratio.max(self.derivative_ratio)
    }
}

/// Checks the size, smoothness and cancellation conditions on a log grid.
pub fn cz_verify(kernel: &CZKernel, grid: &CzGrid, ranges: &[(f64, f64)]) -> CzReport {
    let k = kernel.dim as i32;
    let dirs: Vec<[f64; 2]> = if kernel.dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..grid.angular_points)
            .map(|i| {
                let phi = TAU * (i as f64 + 0.5) / grid.angular_points as f64;
                [phi.cos(), phi.sin()]
            })
            .collect()
    };
    let mut size_ratio: f64 = 0.0;
    let mut derivative_ratio: f64 = 0.0;
    let mut failure = None;
    let steps = grid.radial_points.max(2) - 1;
    'outer: for i in 0..=steps {
        let r = (grid.min_log2 + (grid.max_log2 - grid.min_log2) * i as f64 / steps as f64).exp2();
        for w in &dirs {
            let t: Vec<f64> = (0..kernel.dim).map(|a| r * w[a]).collect();
            let v = kernel.eval_unchecked(&t);
            if !v.is_finite() {
                failure = Some(format!("non-finite kernel value {v} at {t:?}"));
                break 'outer;
            }
            size_ratio = size_ratio.max(v.abs() * r.powi(k));
            let h = r * 1e-5;
            for a in 0..kernel.dim {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[a] += h;
                tm[a] -= h;
                let d = (kernel.eval_unchecked(&tp) - kernel.eval_unchecked(&tm)) / (2.0 * h);
                if !d.is_finite() {
                    failure = Some(format!("non-finite derivative at {t:?}"));
                    break 'outer;
                }
                derivative_ratio = derivative_ratio.max(d.abs() * r.powi(k + 1));
            }
        }
    }
    let quad = grid.quadrature.unwrap_or_else(|| Quadrature::default_for(kernel.dim));
    let mut cancellation: f64 = 0.0;
    if failure.is_none() {
        for &(eps, big_r) in ranges {
            let integral = radial_quadrature(kernel.dim, eps, big_r, quad.radial, quad.angular, |x| {
                kernel.eval_unchecked(x)
            });
            if !integral.is_finite() {
                failure = Some(format!("non-finite cancellation integral on [{eps}, {big_r}]"));
                break;
            }
            cancellation = cancellation.max(integral.abs());
        }
    }
    let budget = 1.05 * kernel.constant;
    if failure.is_none() {
        if size_ratio.max(derivative_ratio) > budget {
            failure = Some(format!(
                "differential ratio {} exceeds 1.05 A = {budget}",
                size_ratio.max(derivative_ratio)
            ));
        } else if cancellation > budget {
            failure = Some(format!("cancellation {cancellation} exceeds 1.05 A = {budget}"));
        }
    }
    CzReport {
        size_ratio,
        derivative_ratio,
        cancellation,
        constant: kernel.constant,
        passed: failure.is_none(),
        failure,
    }
}

/// Measured uniform bounds of the pieces: `sup |K_j(x)| |x|^k` and the
/// same for first differences, over `j` in `js`.
pub fn piece_uniform_bounds(kernel: &CZKernel, js: &[u32], samples_per_piece: usize) -> (f64, f64) {
    let k = kernel.dim as i32;
    let mut size: f64 = 0.0;
    let mut diff: f64 = 0.0;
    for &j in js {
        let piece = dyadic_decompose(kernel, j);
        let (lo, hi) = (piece.inner_radius(), piece.outer_radius());
        let angular = if kernel.dim == 1 { 2 } else { 32 };
        for i in 0..samples_per_piece {
            let r = lo + (hi - lo) * (i as f64 + 0.5) / samples_per_piece as f64;
            for a in 0..angular {
                let t: Vec<f64> = if kernel.dim == 1 {
                    vec![if a == 0 { r } else { -r }]
                } else {
                    let phi = TAU * (a as f64 + 0.5) / angular as f64;
                    vec![r * phi.cos(), r * phi.sin()]
                };
                size = size.max(piece.eval(&t).abs() * r.powi(k));
                let h = r * 1e-5;
                for ax in 0..kernel.dim {
                    let mut tp = t.clone();
                    let mut tm = t.clone();
                    tp[ax] += h;
                    tm[ax] -= h;
                    let d = (piece.eval(&tp) - piece.eval(&tm)) / (2.0 * h);
                    diff = diff.max(d.abs() * r.powi(k + 1));
                }
            }
        }
    }
    (size, diff)
}

/// A kernel evaluated only at lattice points.
pub trait LatticeKernel: Send + Sync {
    fn dim(&self) -> usize;
    /// Weight at `m`; zero at the origin.
    fn weight(&self, m: &[i64]) -> f64;
    /// Euclidean radius outside which the weight vanishes, if any.
    fn reach(&self) -> Option<f64>;
}

impl LatticeKernel for CZKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weight(&self, m: &[i64]) -> f64 {
        self.lattice_weight(m)
    }

    fn reach(&self) -> Option<f64> {
        self.support_radius
    }
}

impl LatticeKernel for DyadicPiece {
    fn dim(&self) -> usize {
        self.parent.dim
    }

    fn weight(&self, m: &[i64]) -> f64 {
        if m.iter().all(|v| *v == 0) {
            return 0.0;
        }
        let t: Vec<f64> = m.iter().map(|&v| v as f64).collect();
        self.eval(&t)
    }

    fn reach(&self) -> Option<f64> {
        Some(self.outer_radius())
    }
}

/// `sum_{j in set} K_j`, the kernel of a grouped operator.
#[derive(Clone, Debug)]
pub struct PieceSum {
    pieces: Vec<DyadicPiece>,
    dim: usize,
}

impl PieceSum {
    pub fn new(kernel: &CZKernel, js: &BTreeSet<u32>) -> PieceSum {
        PieceSum { pieces: js.iter().map(|&j| dyadic_decompose(kernel, j)).collect(), dim: kernel.dim }
    }

    pub fn from_pieces(pieces: Vec<DyadicPiece>) -> Result<PieceSum> {
        let dim = pieces.first().ok_or(LabError::Empty("piece list"))?.parent.dim;
        Ok(PieceSum { pieces, dim })
    }

    pub fn pieces(&self) -> &[DyadicPiece] {
        &self.pieces
    }

    pub fn js(&self) -> Vec<u32> {
        self.pieces.iter().map(|p| p.j).collect()
    }
}

impl LatticeKernel for PieceSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weight(&self, m: &[i64]) -> f64 {
        self.pieces.iter().map(|p| p.weight(m)).sum()
    }

    fn reach(&self) -> Option<f64> {
        self.pieces.iter().map(|p| p.outer_radius()).fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }
}

/// Lattice weights of a kernel tabulated on the sup-norm box `[-R, R]^k`.
#[derive(Clone, Debug)]
pub struct WeightTable {
    dim: usize,
    radius: i64,
    values: Vec<f64>,
}

impl WeightTable {
    pub fn build(kernel: &dyn LatticeKernel, radius: i64) -> WeightTable {
        let dim = kernel.dim();
        let side = (2 * radius + 1) as usize;
        let len = side.pow(dim as u32);
        let mut values = Vec::with_capacity(len);
        let mut m = vec![0i64; dim];
        for idx in 0..len {
            let mut rest = idx;
            for a in (0..dim).rev() {
                m[a] = (rest % side) as i64 - radius;
                rest /= side;
            }
            values.push(kernel.weight(&m));
        }
        WeightTable { dim, radius, values }
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    #[inline]
    pub fn get(&self, m: &[i64]) -> f64 {
        let side = 2 * self.radius + 1;
        let mut idx = 0i64;
        for &v in m {
            if v.abs() > self.radius {
                return 0.0;
            }
            idx = idx * side + v + self.radius;
        }
        self.values[idx as usize]
    }
}

impl LatticeKernel for WeightTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weight(&self, m: &[i64]) -> f64 {
        self.get(m)
    }

    fn reach(&self) -> Option<f64> {
        Some(self.radius as f64 * (self.dim as f64).sqrt())
    }
}

/// Explicit finite kernel from a weight rule, e.g. `K = +-1` on `{+-1}`.
#[derive(Clone)]
pub struct FiniteKernel {
    dim: usize,
    reach: f64,
    rule: Arc<dyn Fn(&[i64]) -> f64 + Send + Sync>,
}

impl FiniteKernel {
    pub fn new(dim: usize, reach: f64, rule: impl Fn(&[i64]) -> f64 + Send + Sync + 'static) -> FiniteKernel {
        FiniteKernel { dim, reach, rule: Arc::new(rule) }
    }

    /// `1/m` restricted to `0 < |m| <= radius` on the line.
    pub fn truncated_hilbert(radius: i64) -> FiniteKernel {
        FiniteKernel::new(1, radius as f64, move |m| {
            if m[0] == 0 || m[0].abs() > radius {
                0.0
            } else {
                1.0 / m[0] as f64
            }
        })
    }
}

impl fmt::Debug for FiniteKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteKernel").field("dim", &self.dim).field("reach", &self.reach).finish()
    }
}

impl LatticeKernel for FiniteKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weight(&self, m: &[i64]) -> f64 {
        if m.iter().all(|v| *v == 0) {
            0.0
        } else {
            (self.rule)(m)
        }
    }

    fn reach(&self) -> Option<f64> {
        Some(self.reach)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn riesz_cos2() -> CZKernel {
        CZKernel::riesz_like(vec![0.0, 1.0], vec![], 4.0).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let k = CZKernel::hilbert();
        assert_eq!(k.evaluate(&[2.0]).unwrap(), 0.5);
        assert_eq!(k.evaluate(&[-2.0]).unwrap(), -0.5);
        assert_eq!(k.evaluate(&[0.0]), Err(LabError::KernelAtOrigin));
        assert!((riesz_cos2().evaluate(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spec_round_trip() {
        let spec: KernelSpec = serde_json::from_str(
            r#"{"family":"riesz_like","dim":2,"params":{"cos":[0,1]},"A":4,"support_radius":32}"#,
        )
        .unwrap();
        let k = spec.build().unwrap();
        assert_eq!(k.support_radius(), Some(32.0));
        assert_eq!(k.to_spec().unwrap().build().unwrap().lattice_weight(&[3, 1]), k.lattice_weight(&[3, 1]));
        assert_eq!(k.lattice_weight(&[40, 0]), 0.0);
    }

    #[test]
    fn verify_hilbert() {
        let rep = cz_verify(&CZKernel::hilbert(), &CzGrid::default(), &[(0.1, 10.0), (1.0, 1000.0)]);
        assert!(rep.passed, "{rep:?}");
        assert!((rep.size_ratio - 1.0).abs() < 1e-12);
        assert!((rep.derivative_ratio - 1.0).abs() < 1e-6);
        assert_eq!(rep.cancellation, 0.0);
    }

    #[test]
    fn verify_rejects_small_constant() {
        let k = CZKernel::odd_power(1, 1.0, 0.5).unwrap();
        let rep = cz_verify(&k, &CzGrid::default(), &[(1.0, 2.0)]);
        assert!(!rep.passed);
        assert!(rep.failure.unwrap().contains("differential"));
    }

    #[test]
    fn verify_riesz_cancellation() {
        let rep = cz_verify(&riesz_cos2(), &CzGrid::default(), &[(0.0625, 1.0), (0.5, 4096.0), (3.0, 65536.0)]);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.cancellation < 1e-6);
    }

    #[test]
    fn verify_reports_nonfinite() {
        let k = CZKernel::custom(1, "blowup", 1.0, Arc::new(|t: &[f64]| if t[0] > 100.0 { f64::NAN } else { 1.0 / t[0] }))
            .unwrap();
        let rep = cz_verify(&k, &CzGrid::default(), &[]);
        assert!(!rep.passed);
        assert!(rep.failure.unwrap().contains("non-finite"));
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        let mut prev = 1.0;
        for i in 0..100 {
            let v = cutoff(0.5 + 0.005 * i as f64);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn bump_has_unit_mass() {
        for dim in [1, 2] {
            let b = Bump::new(dim);
            let q = Quadrature::default_for(dim);
            for j in [0, 3, 9] {
                let s = (j as f64).exp2();
                let m = radial_quadrature(dim, 0.5 * s, 2.0 * s, q.radial, q.angular, |x| {
                    b.eval_scaled(j, x.iter().map(|v| v * v).sum::<f64>().sqrt())
                });
                assert!((m - 1.0).abs() < 1e-9, "dim {dim} j {j}: {m}");
            }
        }
    }

    #[test]
    fn piece_outside_annulus_vanishes() {
        let k = CZKernel::hilbert();
        for j in 0..12 {
            let p = dyadic_decompose(&k, j);
            let s = (j as f64).exp2();
            assert_eq!(p.eval(&[4.0 * s]), 0.0);
            assert_eq!(p.eval(&[0.49 * s]), 0.0);
            assert_eq!(p.eval(&[-2.01 * s]), 0.0);
            assert_eq!(p.correction(), 0.0);
            assert_eq!(p.mean(Quadrature::default_for(1)), 0.0);
        }
    }

    #[test]
    fn non_odd_pieces_have_zero_mean() {
        let k = CZKernel::custom(1, "skewed", 2.0, Arc::new(|t: &[f64]| {
            if t[0] > 0.0 { 1.0 / t[0] } else { 0.5 / t[0] }
        }))
        .unwrap();
        for j in [0, 2, 7] {
            let p = dyadic_decompose(&k, j);
            assert!(p.correction().abs() > 0.1);
            assert!(p.mean(Quadrature::default_for(1)).abs() < 1e-9);
        }
        let r = riesz_cos2();
        let p = dyadic_decompose(&r, 3);
        assert!(p.mean(Quadrature::default_for(2)).abs() < 1e-9);
    }

    #[test]
    fn telescoping_sum_reconstructs_kernel() {
        let k = CZKernel::hilbert();
        let pieces: Vec<DyadicPiece> = (0..=20).map(|j| dyadic_decompose(&k, j)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u: f64 = rng.gen_range(1.0..18.0);
            let x = if rng.gen_bool(0.5) { u.exp2() } else { -u.exp2() };
            let direct: f64 = 1.0 / x;
            let sum: f64 = pieces.iter().map(|p| p.eval(&[x])).sum();
            assert!((sum - direct).abs() <= 1e-10, "x = {x}");
        }
    }

    #[test]
    fn pieces_obey_uniform_bounds() {
        let (size, diff) = piece_uniform_bounds(&CZKernel::hilbert(), &(0..14).collect::<Vec<_>>(), 200);
        assert!(size <= 10.0 && diff <= 10.0, "{size} {diff}");
        let (size, diff) = piece_uniform_bounds(&riesz_cos2(), &[0, 3, 6], 60);
        assert!(size <= 40.0 && diff <= 40.0, "{size} {diff}");
    }

    #[test]
    fn weight_table_matches_kernel() {
        let k = riesz_cos2().with_support_radius(Some(5.0));
        let t = WeightTable::build(&k, 6);
        for x in -6..=6 {
            for y in -6..=6 {
                assert_eq!(t.get(&[x, y]), k.lattice_weight(&[x, y]));
            }
        }
        assert_eq!(t.get(&[7, 0]), 0.0);
    }
}
