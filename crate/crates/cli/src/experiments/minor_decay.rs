//! Single-scale norms `||T_j||_2` over minor scales and the fitted decay.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use radon_core::arith::Frac;
use radon_core::diophantine::{classify_index, IndexClass};
use radon_core::kernels::dyadic_decompose;
use radon_core::lattice::BoxRegion;
use radon_core::normlab::{spectral_norm, SpectralOptions};
use radon_core::operators::{ConvMethod, OscillatoryOnBox, OscillatoryOperator};
use radon_core::polyalg::BilinearPhase;

use super::fit_line;
use crate::config::{list_or, ExperimentConfig};
use crate::error::{CliError, Provenance};
use crate::report::{num, Check, Report, Table};

pub const MIN_R_SQUARED: f64 = 0.9;
/// Relative residual at which the norm solver stops; the fit needs far
/// less than this.
pub const SOLVER_TOLERANCE: f64 = 1e-4;

/// Box radius used for scale `j`, a multiple of the kernel's reach.
pub fn box_radius(j: u32) -> i64 {
    4 << j
}

/// Phase `theta n m` with `theta` from the config (default the golden
/// ratio conjugate), scales `j_range` (default `[4, 12]`), level-2
/// exponent `eps[0]` (default 0.2).
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let theta = list_or(&cfg.theta, &[golden], "theta")?[0];
    let eps = list_or(&cfg.eps, &[0.2], "eps")?[0];
    let (j_lo, j_hi) = cfg.j_range([4, 12])?;
    if j_hi > 14 {
        return Err(CliError::config("operators", format!("scale {j_hi} exceeds the desk budget of 14")));
    }
    let theta = Frac::from_f64(theta);
    let phase = BilinearPhase::bilinear_1d(theta);
    let kernel = cfg.kernel()?;
    if kernel.dim() != 1 {
        return Err(CliError::config("kernels", "minor-decay runs on the line"));
    }

    let rows: Vec<(u32, IndexClass, i64, f64, bool, usize)> = (j_lo..=j_hi)
        .into_par_iter()
        .map(|j| -> Result<_, CliError> {
            let (class, approxs) = classify_index(j, 2, &[theta], eps).within("diophantine")?;
            let op = OscillatoryOperator::new(phase.clone(), Arc::new(dyadic_decompose(&kernel, j)))
                .within("operators")?
                .with_method(ConvMethod::Fft);
            let boxed = OscillatoryOnBox::new(&op, BoxRegion::centered(1, box_radius(j))).within("operators")?;
            let res = spectral_norm(&boxed, &SpectralOptions { tolerance: SOLVER_TOLERANCE, krylov_dim: 120, ..SpectralOptions::default() });
            Ok((j, class, approxs[0].q, res.value, res.converged, res.iterations))
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new("minor_decay.csv", &["j", "class", "q", "box_radius", "norm", "log2_norm", "converged", "iterations"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(j, class, q, norm, converged, iterations) in &rows {
        let minor = class == IndexClass::Minor;
        if minor {
            xs.push(j as f64);
            ys.push(norm.log2());
        }
        table.push(vec![
            j.to_string(),
            if minor { "minor" } else { "major" }.into(),
            q.to_string(),
            box_radius(j).to_string(),
            num(norm),
            num(norm.log2()),
            converged.to_string(),
            iterations.to_string(),
        ]);
    }
    let mut checks = vec![Check::flag("solver_converged", rows.iter().all(|r| r.4), "")];
    let summary = match fit_line(&xs, &ys) {
        Some(f) => {
            let delta = -f.slope;
            checks.push(Check::at_least("fitted_delta_positive", delta, f64::MIN_POSITIVE));
            checks.push(Check::at_least("fit_r_squared", f.r_squared, MIN_R_SQUARED));
            json!({ "theta": theta.to_f64(), "minor_scales": xs.len(), "delta": delta, "log2_c": f.intercept, "r_squared": f.r_squared })
        }
        None => {
            checks.push(Check::flag("fit_available", false, "fewer than two minor scales"));
            json!({ "theta": theta.to_f64(), "minor_scales": xs.len() })
        }
    };
    Ok(Report { tables: vec![table], documents: Vec::new(), checks, summary })
}
