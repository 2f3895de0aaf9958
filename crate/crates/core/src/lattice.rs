//! Lattice points, truncation regions, finitely supported functions on
//! `Z^k`, and their `l^p` norms.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub type LatticePoint = Vec<i64>;

/// Norm used for `|n|` on the lattice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Euclidean,
    Sup,
}

impl NormKind {
    pub fn norm(&self, x: &[i64]) -> f64 {
        match self {
            NormKind::Euclidean => x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt(),
            NormKind::Sup => x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64,
        }
    }
}

pub fn euclidean_norm(x: &[i64]) -> f64 {
    NormKind::Euclidean.norm(x)
}

/// Rectangular region `lo_i <= n_i <= hi_i`, stored row-major (last
/// coordinate fastest).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxRegion {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<BoxRegion> {
        if lo.len() != hi.len() {
            return Err(LabError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.is_empty() {
            return Err(LabError::Empty("box dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(LabError::InvalidSpec(format!("box with lo {lo:?} above hi {hi:?}")));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// The sup-norm box `[-r, r]^dim`.
    pub fn centered(dim: usize, radius: i64) -> BoxRegion {
        BoxRegion { lo: vec![-radius; dim], hi: vec![radius; dim] }
    }

    /// `[0, q)^dim`, the residue box.
    pub fn residues(dim: usize, q: i64) -> BoxRegion {
        BoxRegion { lo: vec![0; dim], hi: vec![q - 1; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim() && p.iter().enumerate().all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }

    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        for (axis, &v) in p.iter().enumerate() {
            idx = idx * self.extent(axis) + (v - self.lo[axis]) as usize;
        }
        Some(idx)
    }

    pub fn point_at(&self, mut idx: usize) -> LatticePoint {
        let mut p = vec![0i64; self.dim()];
        for axis in (0..self.dim()).rev() {
            let ext = self.extent(axis);
            p[axis] = self.lo[axis] + (idx % ext) as i64;
            idx /= ext;
        }
        p
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point_at(i))
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoxRegion) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| *a.min(b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| *a.max(b)).collect(),
        }
    }

    /// Minkowski sum with another box.
    pub fn sum(&self, other: &BoxRegion) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a + b).collect(),
        }
    }

    /// Product box `self x other` with `self`'s coordinates first.
    pub fn product(&self, other: &BoxRegion) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().chain(&other.lo).copied().collect(),
            hi: self.hi.iter().chain(&other.hi).copied().collect(),
        }
    }

    pub fn bounding(points: &[LatticePoint]) -> Result<BoxRegion> {
        let first = points.first().ok_or(LabError::Empty("point list"))?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            if p.len() != lo.len() {
                return Err(LabError::DimensionMismatch { expected: lo.len(), got: p.len() });
            }
            for i in 0..p.len() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Ok(BoxRegion { lo, hi })
    }
}

/// Ball of lattice points `{n : |n - center| <= radius}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: LatticePoint,
    pub radius: f64,
    #[serde(default)]
    pub norm: NormKind,
}

impl Ball {
    pub fn new(dim: usize, radius: f64) -> Ball {
        Ball { center: vec![0; dim], radius, norm: NormKind::Euclidean }
    }

    pub fn with_norm(mut self, norm: NormKind) -> Ball {
        self.norm = norm;
        self
    }

    pub fn centered_at(mut self, center: LatticePoint) -> Ball {
        self.center = center;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        let d: Vec<i64> = p.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.norm.norm(&d) <= self.radius
    }

    pub fn bounding_box(&self) -> BoxRegion {
        let r = self.radius.max(0.0).floor() as i64;
        BoxRegion {
            lo: self.center.iter().map(|c| c - r).collect(),
            hi: self.center.iter().map(|c| c + r).collect(),
        }
    }

    /// Members in row-major order of the bounding box.
    pub fn points(&self) -> Vec<LatticePoint> {
        self.bounding_box().points().filter(|p| self.contains(p)).collect()
    }
}

/// Finitely supported complex function on `Z^k`, stored densely over a box.
/// Points outside the box evaluate to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFunction {
    region: BoxRegion,
    values: Vec<Complex64>,
}

impl LatticeFunction {
    pub fn zeros(region: BoxRegion) -> LatticeFunction {
        let n = region.len();
        LatticeFunction { region, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_values(region: BoxRegion, values: Vec<Complex64>) -> Result<LatticeFunction> {
        if values.len() != region.len() {
            return Err(LabError::DimensionMismatch { expected: region.len(), got: values.len() });
        }
        Ok(LatticeFunction { region, values })
    }

    pub fn from_fn(region: BoxRegion, mut f: impl FnMut(&[i64]) -> Complex64) -> LatticeFunction {
        let values = region.points().map(|p| f(&p)).collect();
        LatticeFunction { region, values }
    }

    /// Unit mass at `p`.
    pub fn delta(p: &[i64]) -> LatticeFunction {
        let region = BoxRegion { lo: p.to_vec(), hi: p.to_vec() };
        LatticeFunction { region, values: vec![Complex64::new(1.0, 0.0)] }
    }

    /// Dense function over the bounding box of an explicit point list.
    /// Repeated points accumulate.
    pub fn from_points(entries: &[(LatticePoint, Complex64)]) -> Result<LatticeFunction> {
        let pts: Vec<LatticePoint> = entries.iter().map(|(p, _)| p.clone()).collect();
        let region = BoxRegion::bounding(&pts)?;
        let mut f = LatticeFunction::zeros(region);
        for (p, v) in entries {
            f.add_at(p, *v);
        }
        Ok(f)
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, p: &[i64]) -> Complex64 {
        self.region.index_of(p).map_or(Complex64::new(0.0, 0.0), |i| self.values[i])
    }

    /// Panics if `p` lies outside the storage box.
    pub fn set(&mut self, p: &[i64], v: Complex64) {
        let i = self.region.index_of(p).expect("point outside storage box");
        self.values[i] = v;
    }

    pub fn add_at(&mut self, p: &[i64], v: Complex64) {
        let i = self.region.index_of(p).expect("point outside storage box");
        self.values[i] += v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, Complex64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (self.region.point_at(i), *v))
    }

    /// Nonzero entries only.
    pub fn support(&self) -> impl Iterator<Item = (LatticePoint, Complex64)> + '_ {
        self.iter().filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
    }

    /// Same function stored over `region` (values outside are dropped).
    pub fn restrict(&self, region: &BoxRegion) -> LatticeFunction {
        LatticeFunction::from_fn(region.clone(), |p| self.get(p))
    }

    pub fn map(&self, mut g: impl FnMut(&[i64], Complex64) -> Complex64) -> LatticeFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| g(&self.region.point_at(i), *v))
            .collect();
        LatticeFunction { region: self.region.clone(), values }
    }

    /// `a * self + b * other` over the union box.
    pub fn lin_comb(&self, a: Complex64, other: &LatticeFunction, b: Complex64) -> LatticeFunction {
        let region = self.region.union(&other.region);
        LatticeFunction::from_fn(region, |p| a * self.get(p) + b * other.get(p))
    }

    pub fn max_abs_diff(&self, other: &LatticeFunction) -> f64 {
        let region = self.region.union(&other.region);
        region.points().map(|p| (self.get(&p) - other.get(&p)).norm()).fold(0.0, f64::max)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    /// Dense little-endian layout: `(re, im)` pairs of `f64`, row-major over
    /// the storage box.
    pub fn to_dense_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_dense_bytes(region: BoxRegion, bytes: &[u8]) -> Result<LatticeFunction> {
        let values = decode_complex_le(bytes)?;
        LatticeFunction::from_values(region, values)
    }

    pub fn to_json(&self) -> LatticeFunctionJson {
        LatticeFunctionJson {
            dim: self.dim(),
            lo: self.region.lo.clone(),
            hi: self.region.hi.clone(),
            points: self.support().map(|(p, v)| (p, [v.re, v.im])).collect(),
        }
    }

    pub fn from_json(json: &LatticeFunctionJson) -> Result<LatticeFunction> {
        let region = BoxRegion::new(json.lo.clone(), json.hi.clone())?;
        if region.dim() != json.dim {
            return Err(LabError::DimensionMismatch { expected: json.dim, got: region.dim() });
        }
        let mut f = LatticeFunction::zeros(region);
        for (p, [re, im]) in &json.points {
            if !f.region.contains(p) {
                return Err(LabError::InvalidSpec(format!("point {p:?} outside declared box")));
            }
            f.add_at(p, Complex64::new(*re, *im));
        }
        Ok(f)
    }
}

pub(crate) fn decode_complex_le(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(LabError::InvalidSpec(format!("dense layout length {} is not a multiple of 16", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

/// JSON form: `{dim, lo, hi, points: [[[coords...], [re, im]], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeFunctionJson {
    pub dim: usize,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub points: Vec<(LatticePoint, [f64; 2])>,
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(LabError::InvalidExponent(p));
    }
    Ok(())
}

/// `(sum |f|^p)^(1/p)`, or `sup |f|` for `p = inf`.
pub fn lp_norm(f: &LatticeFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm_slice(&f.values, p))
}

pub fn lp_norm_slice(values: &[Complex64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 1.0 {
        values.iter().map(|v| v.norm()).sum()
    } else if p == 2.0 {
        values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    } else {
        values.iter().map(|v| v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `n = nbar * Q + r` with `0 <= r_i < Q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResiduePair {
    pub r: LatticePoint,
    pub nbar: LatticePoint,
    pub modulus: i64,
}

impl ResiduePair {
    pub fn reconstruct(&self) -> LatticePoint {
        self.nbar.iter().zip(&self.r).map(|(nb, r)| nb * self.modulus + r).collect()
    }
}

/// Splits `n` into residue and quotient using floor division.
pub fn residue_split(n: &[i64], modulus: i64) -> ResiduePair {
    assert!(modulus >= 1, "modulus must be positive");
    ResiduePair {
        r: n.iter().map(|v| v.rem_euclid(modulus)).collect(),
        nbar: n.iter().map(|v| v.div_euclid(modulus)).collect(),
        modulus,
    }
}

/// Returns `(||f||_{l^p}, ||F||_{L^p})` where `F` is the step extension of
/// `f`, constant on the unit cube `n + (-1/2, 1/2]^k`.
pub fn step_embed_norm_check(f: &LatticeFunction, p: f64) -> Result<(f64, f64)> {
    check_exponent(p)?;
    let discrete = lp_norm(f, p)?;
    // integrate |F|^p cube by cube; each cube has side lengths 1
    let cube_volume: f64 = (0..f.dim()).map(|_| 0.5 - (-0.5)).product();
    let continuous = if p.is_infinite() {
        // essential sup over cubes of positive measure
        f.values.iter().filter(|_| cube_volume > 0.0).map(|v| v.norm()).fold(0.0, f64::max)
    } else if p == 1.0 {
        f.values.iter().map(|v| v.norm() * cube_volume).sum()
    } else if p == 2.0 {
        f.values.iter().map(|v| v.norm_sqr() * cube_volume).sum::<f64>().sqrt()
    } else {
        f.values.iter().map(|v| v.norm().powf(p) * cube_volume).sum::<f64>().powf(1.0 / p)
    };
    Ok((discrete, continuous))
}

/// Sparse accumulator used when an output support is not known in advance.
pub(crate) fn collect_sparse(acc: BTreeMap<LatticePoint, Complex64>, dim: usize) -> LatticeFunction {
    if acc.is_empty() {
        return LatticeFunction::zeros(BoxRegion::centered(dim, 0));
    }
    let entries: Vec<(LatticePoint, Complex64)> = acc.into_iter().collect();
    LatticeFunction::from_points(&entries).expect("nonempty accumulator")
}
