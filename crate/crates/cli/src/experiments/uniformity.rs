//! Norms of randomly drawn operators on growing boxes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use radon_core::arith::Frac;
use radon_core::kernels::CZKernel;
use radon_core::lattice::{Ball, BoxRegion};
use radon_core::normlab::{norm_bracket, LowerOptions};
use radon_core::operators::{materialize_boxes, LatticeOperator, OscillatoryOperator, RadonOperator, DEFAULT_MATRIX_BUDGET};
use radon_core::polyalg::{BilinearPhase, CoefficientVector, IntPolyMap, MultiIndex, PhaseTerm};

use super::draw_real;
use crate::config::{list_or, ExperimentConfig};
use crate::error::{CliError, Provenance};
use crate::report::{num, Check, Report, Table};

pub const PLATEAU_FACTOR: f64 = 1.25;

struct Draw {
    label: String,
    build: Box<dyn Fn(i64) -> Result<Box<dyn LatticeOperator>, CliError> + Send + Sync>,
}

fn draw_tpq(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig, kernel: &CZKernel, degree: u32, range: i64) -> Draw {
    let ints: Vec<i64> = (0..degree).map(|_| rng.gen_range(-range..=range)).collect();
    let reals: Vec<Frac> = (0..degree).map(|_| draw_real(rng, cfg.sampling.as_ref())).collect();
    let label = format!(
        "P=[{}] Q=[{}]",
        ints.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
        reals.iter().map(|t| t.to_f64().to_string()).collect::<Vec<_>>().join(";")
    );
    let p = IntPolyMap::univariate(&ints);
    let terms: Vec<(MultiIndex, Frac)> =
        reals.iter().enumerate().map(|(i, t)| (MultiIndex(vec![i as u32 + 1]), *t)).collect();
    let q = CoefficientVector::from_terms(1, &terms).expect("line coefficients");
    let kernel = kernel.clone();
    Draw {
        label,
        build: Box::new(move |radius| {
            let op = RadonOperator::new(p.clone(), Some(q.clone()), &kernel, &Ball::new(1, radius as f64)).within("operators")?;
            Ok(Box::new(op) as Box<dyn LatticeOperator>)
        }),
    }
}

fn draw_osct(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig, kernel: &CZKernel, degree: u32) -> Draw {
    let mut terms = Vec::new();
    for a in 1..degree {
        for b in 1..=degree - a {
            let theta = draw_real(rng, cfg.sampling.as_ref());
            terms.push(PhaseTerm { alpha: MultiIndex(vec![a]), beta: MultiIndex(vec![b]), theta });
        }
    }
    let label = format!(
        "Q=[{}]",
        terms.iter().map(|t| format!("{}n^{}m^{}", t.theta.to_f64(), t.alpha.0[0], t.beta.0[0])).collect::<Vec<_>>().join(";")
    );
    let phase = BilinearPhase::from_terms(1, terms).expect("line phase");
    let kernel = Arc::new(kernel.clone());
    Draw {
        label,
        build: Box::new(move |_| {
            let op = OscillatoryOperator::new(phase.clone(), kernel.clone()).within("operators")?;
            Ok(Box::new(op) as Box<dyn LatticeOperator>)
        }),
    }
}

/// Draws `sampling.count` (default 50) operators of degree at most
/// `sampling.degree` (default 3) and brackets their norms on the boxes
/// `radii` (default 64, 128, 256) for each `p_values` entry (default
/// 1.5, 2, 3). The kernel sum is truncated at the box radius.
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut radii = list_or(&cfg.radii, &[64, 128, 256], "radii")?;
    radii.sort_unstable();
    if radii[0] < 1 || *radii.last().expect("non-empty") > 512 {
        return Err(CliError::config("operators", "radii must lie in 1..=512"));
    }
    let ps = list_or(&cfg.p_values, &[1.5, 2.0, 3.0], "p_values")?;
    if let Some(p) = ps.iter().find(|p| !(**p >= 1.0)) {
        return Err(CliError::config("normlab", format!("exponent {p} below 1")));
    }
    let count = cfg.count(50)?;
    let degree = cfg.sampling.as_ref().and_then(|s| s.degree).unwrap_or(3);
    let range = cfg.sampling.as_ref().and_then(|s| s.int_range).unwrap_or(3);
    if !(1..=4).contains(&degree) {
        return Err(CliError::config("polyalg", format!("degree {degree} outside 1..=4")));
    }
    let variant = cfg.variant.clone().unwrap_or_else(|| "TPQ".into());
    let kernel = cfg.kernel()?;
    if kernel.dim() != 1 {
        return Err(CliError::config("kernels", "uniformity runs on the line"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampling_seed());
    let draws: Vec<Draw> = (0..count)
        .map(|_| match variant.as_str() {
            "TPQ" => Ok(draw_tpq(&mut rng, cfg, &kernel, degree, range)),
            "OscT" => Ok(draw_osct(&mut rng, cfg, &kernel, degree.max(2))),
            other => Err(CliError::config("operators", format!("uniformity supports TPQ and OscT, not {other}"))),
        })
        .collect::<Result<_, _>>()?;
    let lower = LowerOptions {
        max_iterations: cfg.lower_iterations.unwrap_or(25),
        random_starts: cfg.lower_starts.unwrap_or(2),
        seed: cfg.seed(),
    };

    // (draw, radius, p, lower, upper, method)
    type Row = (usize, i64, f64, f64, f64, String);
    let rows: Vec<Vec<Row>> = draws
        .par_iter()
        .enumerate()
        .map(|(i, d)| -> Result<Vec<Row>, CliError> {
            let mut out = Vec::new();
            for &r in &radii {
                let op = (d.build)(r)?;
                let bx = BoxRegion::centered(1, r);
                let m = materialize_boxes(op.as_ref(), &bx, &bx, DEFAULT_MATRIX_BUDGET).within("operators")?;
                for &p in &ps {
                    let est = norm_bracket(&m.matrix, p, &lower).within("normlab")?;
                    out.push((i, r, p, est.lower, est.upper, est.method));
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<Row> = rows.into_iter().flatten().collect();

    let mut table = Table::new("uniformity.csv", &["draw", "coefficients", "radius", "p", "lower", "upper", "method"]);
    for (i, r, p, lo, up, method) in &rows {
        table.push(vec![i.to_string(), draws[*i].label.clone(), r.to_string(), num(*p), num(*lo), num(*up), method.clone()]);
    }
    let mut plateau = Table::new("uniformity_plateau.csv", &["p", "radius", "max_lower", "max_upper"]);
    let mut checks = Vec::new();
    let mut ratios = Vec::new();
    for &p in &ps {
        let max_at = |r: i64| -> (f64, f64) {
            rows.iter()
                .filter(|row| row.1 == r && row.2 == p)
                .fold((0.0f64, 0.0f64), |acc, row| (acc.0.max(row.3), acc.1.max(row.4)))
        };
        for &r in &radii {
            let (lo, up) = max_at(r);
            plateau.push(vec![num(p), r.to_string(), num(lo), num(up)]);
        }
        if radii.len() >= 2 {
            let (a, b) = (radii[radii.len() - 2], radii[radii.len() - 1]);
            let (lo_a, up_a) = max_at(a);
            let (lo_b, up_b) = max_at(b);
            let (rl, ru) = (lo_b / lo_a, up_b / up_a);
            checks.push(Check::at_most(&format!("plateau_lower_p{p}"), rl, PLATEAU_FACTOR).with_detail(format!("radius {b} vs {a}")));
            checks.push(Check::at_most(&format!("plateau_upper_p{p}"), ru, PLATEAU_FACTOR).with_detail(format!("radius {b} vs {a}")));
            ratios.push(json!({ "p": p, "lower_ratio": rl, "upper_ratio": ru }));
        }
    }
    let summary = json!({ "variant": variant, "draws": count, "radii": radii, "plateau": ratios });
    Ok(Report { tables: vec![table, plateau], documents: Vec::new(), checks, summary })
}
