//! Exact identities between operators, multipliers and their universal
//! forms, checked on random instances.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use radon_core::arith::Frac;
use radon_core::kernels::CZKernel;
use radon_core::lattice::{step_embed_norm_check, Ball, BoxRegion, LatticeFunction};
use radon_core::multipliers::{
    circulant_eigen_check, descent_identity_check, periodic_plancherel_route, quasi_shift_check, Multiplier,
};
use radon_core::operators::{modulation_conjugation_check, QuasiRadonOperator};
use radon_core::polyalg::{BilinearPhase, CoefficientVector, IntPolyMap, MultiIndex, PhaseTerm};

use super::draw_real;
use crate::config::{list_or, ExperimentConfig};
use crate::error::{CliError, Provenance};
use crate::report::{num, Check, Report, Table};

pub const DESCENT_TOLERANCE: f64 = 1e-10;
pub const SHIFT_TOLERANCE: f64 = 1e-12;
pub const MODULATION_TOLERANCE: f64 = 1e-12;
pub const CIRCULANT_TOLERANCE: f64 = 1e-10;
pub const PLANCHEREL_TOLERANCE: f64 = 1e-10;
const XI_PER_DRAW: usize = 4;
const MODULATION_DRAWS: usize = 20;
const STEP_DRAWS: usize = 20;
const PLANCHEREL_PERIOD: i64 = 16;

/// `P: Z -> Z^out_dim` with coefficients in `-range..=range` up to
/// `degree`; the leading coefficient of the first coordinate is non-zero.
fn random_poly(rng: &mut ChaCha8Rng, out_dim: usize, degree: u32, range: i64) -> IntPolyMap {
    let mut terms = Vec::new();
    for l in 0..out_dim {
        for a in 1..=degree {
            let mut c = rng.gen_range(-range..=range);
            if l == 0 && a == degree && c == 0 {
                c = 1;
            }
            if c != 0 {
                terms.push((MultiIndex(vec![a]), l, c));
            }
        }
    }
    IntPolyMap::from_terms(1, out_dim, &terms).expect("valid terms")
}

fn random_theta(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig, degree: u32) -> CoefficientVector {
    let terms: Vec<(MultiIndex, Frac)> =
        (1..=degree).map(|a| (MultiIndex(vec![a]), draw_real(rng, cfg.sampling.as_ref()))).collect();
    CoefficientVector::from_terms(1, &terms).expect("line coefficients")
}

fn random_fn(rng: &mut ChaCha8Rng, region: BoxRegion) -> LatticeFunction {
    LatticeFunction::from_fn(region, |_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

fn label(p: &IntPolyMap) -> String {
    p.terms().iter().map(|(a, l, c)| format!("{c}m^{}[{l}]", a.0[0])).collect::<Vec<_>>().join("+")
}

/// Descent and quasi-shift over `sampling.count` draws (default 100) with
/// kernel truncation `truncation` (default 32); circulant check on the
/// tori `moduli` (default 8, 16, 32, 64); Plancherel route over 10 draws
/// with period `period` (default 16).
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let count = cfg.count(100)?;
    let truncation = cfg.truncation.unwrap_or(32);
    let degree = cfg.sampling.as_ref().and_then(|s| s.degree).unwrap_or(3);
    let range = cfg.sampling.as_ref().and_then(|s| s.int_range).unwrap_or(3);
    if !(1..=4).contains(&degree) || range < 1 {
        return Err(CliError::config("polyalg", "degree must lie in 1..=4 and int_range be positive"));
    }
    let tori = list_or(&cfg.moduli, &[8, 16, 32, 64], "moduli")?;
    if let Some(n) = tori.iter().find(|n| !(1..=64).contains(*n)) {
        return Err(CliError::config("multipliers", format!("torus size {n} outside 1..=64")));
    }
    let period = cfg.period.unwrap_or(PLANCHEREL_PERIOD);
    let kernel = cfg.kernel()?;
    if kernel.dim() != 1 {
        return Err(CliError::config("kernels", "identities run with a kernel on the line"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampling_seed());
    let mut table = Table::new("identities.csv", &["identity", "instance", "parameters", "max_abs_error"]);

    let (mut descent, mut shift) = (0.0f64, 0.0f64);
    for i in 0..count {
        let out_dim = if i % 4 == 3 { 2 } else { 1 };
        let p = { let d = rng.gen_range(1..=degree); random_poly(&mut rng, out_dim, d, range) };
        let theta = { let d = rng.gen_range(1..=degree); random_theta(&mut rng, cfg, d) };
        let seed = rng.gen();
        let rep = descent_identity_check(&p, Some(&theta), &kernel, truncation, XI_PER_DRAW, seed).within("multipliers")?;
        let err = rep.plain.max(rep.twisted.unwrap_or(0.0));
        descent = descent.max(err);
        table.push(vec!["descent".into(), i.to_string(), label(&p), num(err)]);
        let s = quasi_shift_check(&theta, &kernel, truncation, XI_PER_DRAW, seed).within("multipliers")?;
        shift = shift.max(s);
        table.push(vec!["quasi_shift".into(), i.to_string(), format!("{:?}", theta.as_f64()), num(s)]);
    }

    let mut modulation = 0.0f64;
    for i in 0..MODULATION_DRAWS {
        let out_dim = 1 + i % 2;
        let p = { let d = rng.gen_range(1..=degree); random_poly(&mut rng, out_dim, d, range) };
        let theta: Vec<Frac> = (0..out_dim).map(|_| draw_real(&mut rng, cfg.sampling.as_ref())).collect();
        let f = random_fn(&mut rng, BoxRegion::centered(out_dim, 6));
        let (lhs, rhs) = modulation_conjugation_check(&p, &theta, &kernel, &Ball::new(1, 8.0), &f).within("operators")?;
        let err = lhs.max_abs_diff(&rhs);
        modulation = modulation.max(err);
        table.push(vec!["modulation_conjugation".into(), i.to_string(), label(&p), num(err)]);
    }

    let mut step_exact = true;
    for i in 0..STEP_DRAWS {
        let f = random_fn(&mut rng, BoxRegion::centered(1 + i % 2, 5));
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let (discrete, continuous) = step_embed_norm_check(&f, p).within("lattice")?;
            step_exact &= discrete == continuous;
            table.push(vec!["step_embedding".into(), i.to_string(), format!("p={p}"), num((discrete - continuous).abs())]);
        }
    }

    let mut circulant = 0.0f64;
    for &n in &tori {
        let p = { let d = rng.gen_range(1..=degree); random_poly(&mut rng, 1, d, range) };
        let err = circulant_eigen_check(&p, &kernel, truncation, n).within("multipliers")?;
        circulant = circulant.max(err);
        table.push(vec!["circulant".into(), n.to_string(), label(&p), num(err)]);
    }

    let mut plancherel = 0.0f64;
    for i in 0..10 {
        let (op, params) = random_quasi(&mut rng, cfg, &kernel, range)?;
        let f = random_fn(&mut rng, BoxRegion::new(vec![-4, 0], vec![4, period - 1]).within("lattice")?);
        let rep = periodic_plancherel_route(&op, &f, period).within("multipliers")?;
        let err = rep.relative_error();
        plancherel = plancherel.max(err);
        table.push(vec!["plancherel".into(), i.to_string(), params, num(err)]);
    }

    let mut tables = vec![table];
    if let Some(spec) = &cfg.multiplier {
        tables.push(multiplier_sweep(spec.build().within("multipliers")?, &mut rng, count)?);
    }
    let checks = vec![
        Check::at_most("descent_identity", descent, DESCENT_TOLERANCE),
        Check::at_most("quasi_shift", shift, SHIFT_TOLERANCE),
        Check::at_most("modulation_conjugation", modulation, MODULATION_TOLERANCE),
        Check::flag("step_embedding_exact", step_exact, ""),
        Check::at_most("circulant_eigenvalues", circulant, CIRCULANT_TOLERANCE),
        Check::at_most("plancherel_relative_error", plancherel, PLANCHEREL_TOLERANCE),
    ];
    let summary = json!({
        "draws": count,
        "truncation": truncation,
        "descent": descent,
        "quasi_shift": shift,
        "modulation": modulation,
        "circulant": circulant,
        "plancherel": plancherel,
    });
    Ok(Report { tables, documents: Vec::new(), checks, summary })
}

/// `R_{P,Q}` with `P(n, m) = c1 n m + c2 m^2 + c3 m` and a random phase
/// with terms `n m`, `n m^2`, `n^2 m`, kernel truncated at radius 4.
fn random_quasi(
    rng: &mut ChaCha8Rng,
    cfg: &ExperimentConfig,
    kernel: &CZKernel,
    range: i64,
) -> Result<(QuasiRadonOperator, String), CliError> {
    let cs: Vec<i64> = (0..3).map(|_| rng.gen_range(-range..=range)).collect();
    let p = IntPolyMap::from_terms(
        2,
        1,
        &[(MultiIndex(vec![1, 1]), 0, cs[0]), (MultiIndex(vec![0, 2]), 0, cs[1]), (MultiIndex(vec![0, 1]), 0, cs[2])],
    )
    .within("polyalg")?;
    let terms: Vec<PhaseTerm> = [(1, 1), (1, 2), (2, 1)]
        .into_iter()
        .map(|(a, b)| PhaseTerm { alpha: MultiIndex(vec![a]), beta: MultiIndex(vec![b]), theta: draw_real(rng, cfg.sampling.as_ref()) })
        .collect();
    let params = format!("P={cs:?} Q=[{}]", terms.iter().map(|t| t.theta.to_string()).collect::<Vec<_>>().join(";"));
    let q = BilinearPhase::from_terms(1, terms).within("polyalg")?;
    let op = QuasiRadonOperator::new(p, q, kernel, &Ball::new(1, 4.0)).within("operators")?;
    Ok((op, params))
}

fn multiplier_sweep(m: Multiplier, rng: &mut ChaCha8Rng, count: usize) -> Result<Table, CliError> {
    let dim = m.spectral_dim();
    let mut header: Vec<String> = (0..dim).map(|i| format!("xi{i}")).collect();
    header.extend(["re".to_string(), "im".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("multiplier_sweep.csv", &header);
    for _ in 0..count {
        let xi: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let s = m.sample(&xi).within("multipliers")?;
        let mut row: Vec<String> = s.xi.iter().map(|v| num(*v)).collect();
        row.extend([num(s.re), num(s.im)]);
        table.push(row);
    }
    Ok(table)
}
