//! Norms of the bilinear Gauss-sum operators against the modulus.

use rayon::prelude::*;
use serde_json::json;

use radon_core::arith::gcd;
use radon_core::diophantine::GaussOperator;
use radon_core::normlab::{norm_exact, ExactP};

use super::{fit_line, is_prime};
use crate::config::{list_or, ExperimentConfig};
use crate::error::{CliError, Provenance};
use crate::report::{num, Check, Report, Table};

pub const NORM_TOLERANCE: f64 = 1e-10;
pub const SLOPE_TOLERANCE: f64 = 0.02;

/// Moduli default to the primes up to 211; `a` in `A(r, l) = a r l / q`
/// defaults to 1.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let primes: Vec<i64> = (2..=211).filter(|&n| is_prime(n)).collect();
    let moduli = list_or(&cfg.moduli, &primes, "moduli")?;
    if let Some(&bad) = moduli.iter().find(|&&q| !(1..=4096).contains(&q)) {
        return Err(CliError::config("diophantine", format!("modulus {bad} outside 1..=4096")));
    }
    let a = cfg.gauss_a.unwrap_or(1);
    let rows: Vec<(i64, f64)> = moduli
        .par_iter()
        .map(|&q| -> Result<(i64, f64), CliError> {
            let g = GaussOperator::bilinear(q, a).within("diophantine")?;
            Ok((q, norm_exact(&g.matrix(), ExactP::Two).within("normlab")?))
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new("gauss_decay.csv", &["q", "a", "coprime", "norm", "predicted", "abs_error"]);
    let mut worst = 0.0f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(q, n) in &rows {
        let coprime = gcd(a as i128, q as i128) == 1;
        let predicted = (q as f64).powf(-0.5);
        let err = (n - predicted).abs();
        if coprime {
            worst = worst.max(err);
            xs.push((q as f64).ln());
            ys.push(n.ln());
        }
        table.push(vec![q.to_string(), a.to_string(), coprime.to_string(), num(n), num(predicted), num(err)]);
    }
    let mut checks = vec![Check::at_most("norm_equals_inverse_sqrt_q", worst, NORM_TOLERANCE)];
    let fit = fit_line(&xs, &ys);
    let summary = match fit {
        Some(f) => {
            checks.push(Check::at_most("slope_deviation", (f.slope + 0.5).abs(), SLOPE_TOLERANCE));
            checks.push(Check::at_least("measured_delta", -f.slope, 0.4));
            json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared, "delta": -f.slope, "max_abs_error": worst })
        }
        None => {
            checks.push(Check::flag("slope_fit", false, "fewer than two coprime moduli"));
            json!({ "max_abs_error": worst })
        }
    };
    Ok(Report { tables: vec![table], documents: Vec::new(), checks, summary })
}
