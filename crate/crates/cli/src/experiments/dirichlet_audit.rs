//! Audit of the rational approximation routine against exhaustive search,
//! and of the dyadic separation trichotomy on near-rational inputs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use radon_core::arith::{gcd, Frac};
use radon_core::diophantine::{dirichlet_approx, dirichlet_exhaustive, dyadic_separation_check, SeparationVerdict};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Provenance};
use crate::report::{Check, Report, Table};

const MAX_DRAWS_PER_INSTANCE: usize = 1000;
const BASE_MAX_DENOMINATOR: i64 = 4096;

/// Which postcondition an approximation broke, if any.
fn audit_one(theta: Frac, n: u32) -> Result<Option<&'static str>, CliError> {
    let approx = dirichlet_approx(theta, n as f64).within("diophantine")?;
    let (a, q) = (approx.a as i128, approx.q as i128);
    if q < 1 || q > n as i128 {
        return Ok(Some("denominator_range"));
    }
    if gcd(a, q) != 1 {
        return Ok(Some("coprime"));
    }
    // gamma is the signed distance mod 1: theta - a/q - gamma is an integer
    let rest = Frac::new(a, q)
        .and_then(|f| theta.checked_sub(&f))
        .and_then(|d| d.checked_sub(&approx.gamma))
        .ok_or_else(|| CliError::config("diophantine", "overflow in audit"))?;
    if !rest.fract().is_zero() {
        return Ok(Some("gamma_consistent"));
    }
    // |gamma| <= 1/(qN), cross-multiplied
    let g = approx.gamma;
    if g.num().abs() * q * n as i128 > g.den() {
        return Ok(Some("error_bound"));
    }
    match dirichlet_exhaustive(theta, n as f64) {
        Some((ea, eq)) if ea == approx.a && eq == approx.q => Ok(None),
        _ => Ok(Some("minimal_denominator")),
    }
}

/// Near-rational `a0/q0 + delta` with `q0` log-uniform in `[1, 4096]` and
/// `|delta|` log-uniform in `[1e-15, 1e-2]`.
fn draw_theta(rng: &mut ChaCha8Rng) -> Frac {
    let q0 = (rng.gen_range(0.0..(BASE_MAX_DENOMINATOR as f64).log2()).exp2().floor() as i64).max(1);
    let mut a0 = rng.gen_range(0..q0);
    while gcd(a0 as i128, q0 as i128) != 1 {
        a0 = rng.gen_range(0..q0);
    }
    let delta = 10f64.powf(rng.gen_range(-15.0..-2.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Frac::new(a0 as i128, q0 as i128)
        .and_then(|b| b.checked_add(&Frac::from_f64(delta)))
        .map(|t| t.fract())
        .expect("small fractions")
}

/// `theta = i / audit_denominator` (default 1009) for every `i` and
/// `N = 1..=audit_max_n` (default 100); `sampling.count` (default 10^4)
/// admissible separation instances.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let denom = cfg.audit_denominator.unwrap_or(1009);
    let max_n = cfg.audit_max_n.unwrap_or(100);
    if !(2..=100_000).contains(&denom) || !(1..=10_000).contains(&max_n) {
        return Err(CliError::config("diophantine", "audit_denominator must lie in 2..=100000 and audit_max_n in 1..=10000"));
    }
    let failures: Vec<(i64, u32, &'static str)> = (1..denom)
        .into_par_iter()
        .map(|i| -> Result<Vec<_>, CliError> {
            let theta = Frac::new(i as i128, denom as i128).expect("positive denominator");
            let mut out = Vec::new();
            for n in 1..=max_n {
                if let Some(what) = audit_one(theta, n)? {
                    out.push((i, n, what));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let audited = (denom - 1) as usize * max_n as usize;

    let count = cfg.count(10_000)?;
    let seed = cfg.sampling_seed();
    let verdicts: Vec<(SeparationVerdict, usize)> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<(SeparationVerdict, usize), CliError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            for attempt in 1..=MAX_DRAWS_PER_INSTANCE {
                let theta = draw_theta(&mut rng);
                let scale = |rng: &mut ChaCha8Rng| (rng.gen_range(4.1f64..24.0).exp2(), rng.gen_range(0.1f64..0.5));
                let (first, second) = (scale(&mut rng), scale(&mut rng));
                let v = dyadic_separation_check(theta, first, second).within("diophantine")?;
                if !matches!(v, SeparationVerdict::Skipped { .. }) {
                    return Ok((v, attempt));
                }
            }
            Ok((SeparationVerdict::Skipped { reason: "no admissible draw".into() }, MAX_DRAWS_PER_INSTANCE))
        })
        .collect::<Result<_, _>>()?;

    let mut audit = Table::new("dirichlet_audit.csv", &["i", "n", "failed_postcondition"]);
    for (i, n, what) in &failures {
        audit.push(vec![i.to_string(), n.to_string(), what.to_string()]);
    }
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for (v, _) in &verdicts {
        let key = match v {
            SeparationVerdict::SameFraction => "same_fraction",
            SeparationVerdict::FirstDominates => "first_dominates",
            SeparationVerdict::SecondDominates => "second_dominates",
            SeparationVerdict::Violated { .. } => "violated",
            SeparationVerdict::Skipped { .. } => "inadmissible",
        };
        *tally.entry(key.to_string()).or_default() += 1;
    }
    let mut sep = Table::new("dirichlet_separation.csv", &["verdict", "count"]);
    for (k, c) in &tally {
        sep.push(vec![k.clone(), c.to_string()]);
    }
    let holding = verdicts.iter().filter(|(v, _)| v.holds()).count();
    let draws: usize = verdicts.iter().map(|(_, a)| a).sum();
    let checks = vec![
        Check::at_most("postcondition_failures", failures.len() as f64, 0.0).with_detail(format!("{audited} instances")),
        Check::at_least("separation_holds_fraction", holding as f64 / count as f64, 1.0)
            .with_detail(format!("{holding} of {count} admissible instances")),
    ];
    let summary = json!({
        "audited": audited,
        "failures": failures.len(),
        "separation_instances": count,
        "separation_draws": draws,
        "verdicts": tally,
    });
    Ok(Report { tables: vec![audit, sep], documents: Vec::new(), checks, summary })
}
