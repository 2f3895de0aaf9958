//! The inductive major/minor schedule: level-by-level Dirichlet
//! classification of the scales `j`, grouping by fraction collections,
//! radii and sampled shifts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dirichlet::{classify_index, DirichletApprox, IndexClass};
use crate::arith::Frac;
use crate::error::{LabError, Result};
use crate::kernels::{dyadic_decompose, CZKernel, LatticeKernel, PieceSum};
use crate::lattice::{BoxRegion, LatticeFunction, LatticePoint};
use crate::operators::{ConvMethod, OscillatoryOperator};
use crate::polyalg::{BilinearPhase, PhaseTerm};

const ONE: num_complex::Complex64 = num_complex::Complex64 { re: 1.0, im: 0.0 };

/// How the radius `rho_s` is chosen from the approximations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusRule {
    /// `min(rho_{s+1}, inf (q |gamma|)^(-1/(s - eps)))`.
    #[default]
    Printed,
    /// `min(rho_{s+1}, inf |gamma|^(-1/(s - eps)))`.
    Footnote,
}

/// `eps_s = 0.2 / 4^(s - 2)` for `s = 2..=degree`.
pub fn default_eps(degree: u32) -> Vec<f64> {
    (2..=degree.max(2)).map(|s| 0.2 / 4f64.powi(s as i32 - 2)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub j_min: u32,
    pub j_max: u32,
    /// `eps[s - 2]` is used at level `s`.
    pub eps: Vec<f64>,
    #[serde(default = "default_shift_samples")]
    pub shift_samples: usize,
    /// Radius standing in for an infinite `rho` when sampling shifts.
    #[serde(default = "default_shift_cap")]
    pub shift_cap: f64,
    #[serde(default)]
    pub radius_rule: RadiusRule,
    #[serde(default)]
    pub seed: u64,
}

fn default_shift_samples() -> usize {
    8
}

fn default_shift_cap() -> f64 {
    1024.0
}

impl ScheduleConfig {
    pub fn new(j_min: u32, j_max: u32, degree: u32) -> ScheduleConfig {
        ScheduleConfig {
            j_min,
            j_max,
            eps: default_eps(degree),
            shift_samples: default_shift_samples(),
            shift_cap: default_shift_cap(),
            radius_rule: RadiusRule::Printed,
            seed: 0,
        }
    }

    fn eps_at(&self, level: u32) -> Result<f64> {
        self.eps
            .get(level as usize - 2)
            .copied()
            .ok_or_else(|| LabError::InvalidSpec(format!("no eps given for level {level}")))
    }
}

/// One coefficient of a level together with its approximation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientApprox {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub theta: Frac,
    pub approx: DirichletApprox,
}

/// The fractions of one level shared by a group of major scales.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCollection {
    pub level: u32,
    pub entries: Vec<CoefficientApprox>,
    /// Sum of the denominators.
    pub q_sum: i64,
}

impl LevelCollection {
    fn key(&self) -> Vec<(i64, i64)> {
        self.entries.iter().map(|e| (e.approx.a, e.approx.q)).collect()
    }
}

/// A group of major scales at one level and what hangs below it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub collection: LevelCollection,
    /// `None` is infinite.
    pub radius: Option<f64>,
    /// Sampled shifts `z_s`, the first always zero.
    pub shifts: Vec<LatticePoint>,
    pub js: Vec<u32>,
    pub child: Option<Box<LevelNode>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelNode {
    pub level: u32,
    pub minor_js: Vec<u32>,
    pub branches: Vec<Branch>,
}

/// A path through every level: the scales whose operators factor through
/// one fixed set of collections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub js: Vec<u32>,
    /// Levels `d` down to `2`.
    pub collections: Vec<LevelCollection>,
    pub radii: Vec<Option<f64>>,
    pub shifts: Vec<Vec<LatticePoint>>,
    pub eps: Vec<f64>,
}

impl Leaf {
    /// `rho_2`; `None` is infinite.
    pub fn final_radius(&self) -> Option<f64> {
        self.radii.last().copied().flatten()
    }

    pub fn min_j(&self) -> u32 {
        self.js.iter().copied().min().unwrap_or(0)
    }

    /// The first sampled shift at each level (zero).
    pub fn zero_shifts(&self) -> Vec<(u32, LatticePoint)> {
        self.collections.iter().zip(&self.shifts).map(|(c, z)| (c.level, z[0].clone())).collect()
    }

    /// `q <= 2^(eps_s j)` and `q |gamma| <= 2^(-(s - eps_s) j)` for every
    /// scale, level and coefficient.
    pub fn constraints_hold(&self) -> bool {
        self.js.iter().all(|&j| {
            self.collections.iter().all(|c| {
                let eps = self.eps[c.level as usize - 2];
                c.entries.iter().all(|e| {
                    let q = e.approx.q as f64;
                    let slack = 1.0 + 1e-12;
                    q <= (eps * j as f64).exp2() * slack
                        && q * e.approx.gamma_f64().abs() <= (-(c.level as f64 - eps) * j as f64).exp2() * slack
                })
            })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorBucket {
    pub level: u32,
    pub js: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub dim: usize,
    pub degree: u32,
    pub j_min: u32,
    pub j_max: u32,
    pub eps: Vec<f64>,
    pub radius_rule: RadiusRule,
    pub root: LevelNode,
}

/// Terms of `q` of total degree exactly `level`.
pub fn level_part(q: &BilinearPhase, level: u32) -> BilinearPhase {
    BilinearPhase::from_terms(q.dim(), q.level(level).cloned()).expect("subset of valid terms")
}

/// `sum_s Q_s(n + z_s, m + z_s)` over levels `2..=d`, `Q_s` the level-`s`
/// part; terms of degree below two are dropped.
pub fn shifted_phase(q: &BilinearPhase, shifts: &[(u32, LatticePoint)]) -> Result<BilinearPhase> {
    let mut out = BilinearPhase::zero(q.dim());
    for s in 2..=q.degree() {
        let part = level_part(q, s);
        let shifted = match shifts.iter().find(|(l, _)| *l == s) {
            Some((_, z)) => part.shift(s, z)?,
            None => part,
        };
        out = out.add(&shifted)?;
    }
    Ok(out)
}

fn sample_shifts(dim: usize, radius: Option<f64>, cfg: &ScheduleConfig, rng: &mut ChaCha8Rng) -> Vec<LatticePoint> {
    let r = radius.unwrap_or(f64::INFINITY).min(cfg.shift_cap).max(0.0);
    let ri = r.floor() as i64;
    let mut out = vec![vec![0i64; dim]];
    if ri == 0 {
        return out;
    }
    let mut tries = 0;
    while out.len() < cfg.shift_samples + 1 && tries < 1000 * (cfg.shift_samples + 1) {
        tries += 1;
        let z: Vec<i64> = (0..dim).map(|_| rng.gen_range(-ri..=ri)).collect();
        if (z.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>()).sqrt() <= r {
            out.push(z);
        }
    }
    out
}

struct Builder<'a> {
    q: &'a BilinearPhase,
    cfg: &'a ScheduleConfig,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn node(&mut self, level: u32, js: Vec<u32>, rho_above: Option<f64>) -> Result<LevelNode> {
        let eps = self.cfg.eps_at(level)?;
        let terms: Vec<PhaseTerm> = self.q.level(level).cloned().collect();
        let thetas: Vec<Frac> = terms.iter().map(|t| t.theta).collect();
        let mut minor_js = Vec::new();
        let mut groups: BTreeMap<Vec<(i64, i64)>, (LevelCollection, Vec<u32>)> = BTreeMap::new();
        for j in js {
            let (class, approxs) = if thetas.is_empty() {
                (IndexClass::Major, Vec::new())
            } else {
                classify_index(j, level, &thetas, eps)?
            };
            if class == IndexClass::Minor {
                minor_js.push(j);
                continue;
            }
            let collection = LevelCollection {
                level,
                q_sum: approxs.iter().map(|a| a.q).sum(),
                entries: terms
                    .iter()
                    .zip(approxs)
                    .map(|(t, approx)| CoefficientApprox {
                        alpha: t.alpha.0.clone(),
                        beta: t.beta.0.clone(),
                        theta: t.theta,
                        approx,
                    })
                    .collect(),
            };
            groups.entry(collection.key()).or_insert_with(|| (collection, Vec::new())).1.push(j);
        }
        let mut branches = Vec::new();
        for (_, (collection, gjs)) in groups {
            let radius = self.radius(&collection, eps, rho_above);
            let shifts = sample_shifts(self.q.dim(), rho_above, self.cfg, &mut self.rng);
            let child = if level > 2 { Some(Box::new(self.node(level - 1, gjs.clone(), radius)?)) } else { None };
            branches.push(Branch { collection, radius, shifts, js: gjs, child });
        }
        Ok(LevelNode { level, minor_js, branches })
    }

    fn radius(&self, c: &LevelCollection, eps: f64, rho_above: Option<f64>) -> Option<f64> {
        let expo = -1.0 / (c.level as f64 - eps);
        let mut rho = rho_above.unwrap_or(f64::INFINITY);
        for e in &c.entries {
            let g = e.approx.gamma_f64().abs();
            let base = match self.cfg.radius_rule {
                RadiusRule::Printed => e.approx.q as f64 * g,
                RadiusRule::Footnote => g,
            };
            if base > 0.0 {
                rho = rho.min(base.powf(expo));
            }
        }
        rho.is_finite().then_some(rho)
    }
}

/// Splits `j_min..=j_max` level by level from the degree of `q` down to 2.
pub fn build_schedule(q: &BilinearPhase, cfg: &ScheduleConfig) -> Result<Schedule> {
    if cfg.j_min > cfg.j_max {
        return Err(LabError::Empty("scale range"));
    }
    let degree = q.terms().iter().map(|t| t.degree()).max().unwrap_or(0);
    if degree < 2 {
        return Err(LabError::InvalidSpec("phase needs a term of degree at least 2".into()));
    }
    for s in 2..=degree {
        cfg.eps_at(s)?;
    }
    let mut b = Builder { q, cfg, rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
    let root = b.node(degree, (cfg.j_min..=cfg.j_max).collect(), None)?;
    Ok(Schedule {
        dim: q.dim(),
        degree,
        j_min: cfg.j_min,
        j_max: cfg.j_max,
        eps: cfg.eps.clone(),
        radius_rule: cfg.radius_rule,
        root,
    })
}

impl Schedule {
    pub fn leaves(&self) -> Vec<Leaf> {
        fn walk(node: &LevelNode, path: &mut Vec<(LevelCollection, Option<f64>, Vec<LatticePoint>)>, eps: &[f64], out: &mut Vec<Leaf>) {
            for b in &node.branches {
                path.push((b.collection.clone(), b.radius, b.shifts.clone()));
                match &b.child {
                    Some(child) => walk(child, path, eps, out),
                    None => out.push(Leaf {
                        js: b.js.clone(),
                        collections: path.iter().map(|p| p.0.clone()).collect(),
                        radii: path.iter().map(|p| p.1).collect(),
                        shifts: path.iter().map(|p| p.2.clone()).collect(),
                        eps: eps.to_vec(),
                    }),
                }
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &self.eps, &mut out);
        out
    }

    pub fn minor_buckets(&self) -> Vec<MinorBucket> {
        fn walk(node: &LevelNode, out: &mut Vec<MinorBucket>) {
            if !node.minor_js.is_empty() {
                out.push(MinorBucket { level: node.level, js: node.minor_js.clone() });
            }
            for b in &node.branches {
                if let Some(c) = &b.child {
                    walk(c, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Every scale lands in exactly one leaf or minor bucket.
    pub fn is_partition(&self) -> bool {
        let mut all: Vec<u32> = self.leaves().into_iter().flat_map(|l| l.js).collect();
        all.extend(self.minor_buckets().into_iter().flat_map(|m| m.js));
        all.sort_unstable();
        all == (self.j_min..=self.j_max).collect::<Vec<_>>()
    }

    /// Radii never increase going down a path, and stay positive.
    pub fn radii_monotone(&self) -> bool {
        self.leaves().iter().all(|l| {
            let vals: Vec<f64> = l.radii.iter().map(|r| r.unwrap_or(f64::INFINITY)).collect();
            vals.iter().all(|v| *v > 0.0) && vals.windows(2).all(|w| w[1] <= w[0])
        })
    }

    /// Largest pointwise gap between `sum_j T_j f` and the same sum
    /// regrouped by leaves and minor buckets.
    pub fn reconstruction_error(
        &self,
        q: &BilinearPhase,
        kernel: &CZKernel,
        f: &LatticeFunction,
        out: &BoxRegion,
    ) -> Result<f64> {
        if !self.is_partition() {
            return Err(LabError::InvalidSpec("schedule scales do not form a partition".into()));
        }
        let apply = |k: Arc<dyn LatticeKernel>| -> Result<LatticeFunction> {
            OscillatoryOperator::new(q.clone(), k)?.with_method(ConvMethod::Direct).apply_box(f, out)
        };
        let mut single = LatticeFunction::zeros(out.clone());
        for j in self.j_min..=self.j_max {
            let t = apply(Arc::new(dyadic_decompose(kernel, j)))?;
            single = single.lin_comb(ONE, &t, ONE);
        }
        let mut grouped = LatticeFunction::zeros(out.clone());
        let groups = self.leaves().into_iter().map(|l| l.js).chain(self.minor_buckets().into_iter().map(|m| m.js));
        for js in groups {
            let set: BTreeSet<u32> = js.into_iter().collect();
            let t = apply(Arc::new(PieceSum::new(kernel, &set)))?;
            grouped = grouped.lin_comb(ONE, &t, ONE);
        }
        Ok(single.max_abs_diff(&grouped))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LabError::InvalidSpec(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regrouping_reproduces_scale_sum() {
        let q = BilinearPhase::from_exponents_1d(&[(1, 1, Frac::from_f64(std::f64::consts::FRAC_1_PI)), (2, 1, Frac::new(1, 2).unwrap())]);
        let s = build_schedule(&q, &ScheduleConfig::new(1, 5, 3)).unwrap();
        let mut seed = 1u64;
        let f = LatticeFunction::from_fn(BoxRegion::centered(1, 20), |_| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            num_complex::Complex64::new((seed >> 33) as f64 / 2f64.powi(31) - 1.0, 0.5)
        });
        let err = s.reconstruction_error(&q, &CZKernel::hilbert(), &f, &BoxRegion::centered(1, 24)).unwrap();
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn half_phase_single_large_leaf() {
        let q = BilinearPhase::bilinear_1d(Frac::new(1, 2).unwrap());
        let cfg = ScheduleConfig::new(0, 20, 2);
        let s = build_schedule(&q, &cfg).unwrap();
        assert!(s.is_partition());
        let leaves = s.leaves();
        let big = leaves.iter().find(|l| l.js.contains(&20)).unwrap();
        assert_eq!(big.collections[0].entries[0].approx.q, 2);
        assert_eq!(big.js, (5..=20).collect::<Vec<_>>());
        assert!(big.final_radius().is_none());
        assert!(leaves.iter().all(Leaf::constraints_hold));
    }

    #[test]
    fn golden_phase_mostly_minor() {
        let q = BilinearPhase::bilinear_1d(Frac::from_f64((5f64.sqrt() - 1.0) / 2.0));
        let s = build_schedule(&q, &ScheduleConfig::new(4, 16, 2)).unwrap();
        assert!(s.is_partition());
        let minors: Vec<u32> = s.minor_buckets().into_iter().flat_map(|m| m.js).collect();
        assert!(minors.contains(&12));
    }

    #[test]
    fn cubic_partition_and_radii() {
        let q = BilinearPhase::from_exponents_1d(&[
            (1, 1, Frac::from_f64(std::f64::consts::FRAC_1_PI)),
            (2, 1, Frac::new(1, 3).unwrap()),
            (1, 2, Frac::from_f64(std::f64::consts::FRAC_1_SQRT_2)),
        ]);
        let s = build_schedule(&q, &ScheduleConfig::new(0, 16, 3)).unwrap();
        assert!(s.is_partition());
        assert!(s.radii_monotone());
        assert!(s.leaves().iter().all(Leaf::constraints_hold));
        let json = s.to_json().unwrap();
        let back: Schedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn empty_range_rejected() {
        let q = BilinearPhase::bilinear_1d(Frac::new(1, 2).unwrap());
        assert!(build_schedule(&q, &ScheduleConfig::new(5, 4, 2)).is_err());
    }

    #[test]
    fn shifted_phase_keeps_top_degree() {
        let q = BilinearPhase::from_exponents_1d(&[(1, 1, Frac::new(1, 3).unwrap()), (2, 1, Frac::new(1, 5).unwrap())]);
        let p = shifted_phase(&q, &[(3, vec![2]), (2, vec![-1])]).unwrap();
        for n in -3..4 {
            for m in -3..4 {
                let want = (1.0 / 3.0) * ((n - 1) * (m - 1)) as f64 + 0.2 * ((n + 2) * (n + 2) * (m + 2)) as f64;
                let got = p.eval_mod1(&[n], &[m]).unwrap();
                assert!(crate::arith::dist_to_integer(got - want) < 1e-12);
            }
        }
    }
}
