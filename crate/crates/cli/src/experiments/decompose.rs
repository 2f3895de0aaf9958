//! Builds the major/minor schedule for random phases and checks that the
//! regrouped operators reproduce the scale sum.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use radon_core::diophantine::{build_schedule, default_eps, ScheduleConfig};
use radon_core::lattice::{BoxRegion, LatticeFunction};
use radon_core::polyalg::{BilinearPhase, MultiIndex, PhaseTerm};

use super::draw_real;
use crate::config::{list_or, ExperimentConfig};
use crate::error::{CliError, Provenance};
use crate::report::{num, Check, Report, Table};

pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-12;
pub const BOX_RADIUS: i64 = 256;

/// Random phase of degree exactly `degree` on the line.
fn draw_phase(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig, degree: u32) -> BilinearPhase {
    let mut terms = Vec::new();
    for a in 1..degree {
        for b in 1..=degree - a {
            if a + b == degree || rng.gen_bool(0.6) {
                let theta = draw_real(rng, cfg.sampling.as_ref());
                terms.push(PhaseTerm { alpha: MultiIndex(vec![a]), beta: MultiIndex(vec![b]), theta });
            }
        }
    }
    BilinearPhase::from_terms(1, terms).expect("line phase")
}

/// `sampling.count` phases (default 5) with degrees drawn from
/// `2..=sampling.degree` (default 4), scales `j_range` (default `[0, 8]`),
/// level exponents `eps` (default `0.2 / 4^(s-2)`).
pub fn run(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let count = cfg.count(5)?;
    let max_degree = cfg.sampling.as_ref().and_then(|s| s.degree).unwrap_or(4);
    if !(2..=4).contains(&max_degree) {
        return Err(CliError::config("polyalg", format!("degree {max_degree} outside 2..=4")));
    }
    let (j_lo, j_hi) = cfg.j_range([0, 8])?;
    if j_hi > 9 {
        return Err(CliError::config("kernels", format!("scale {j_hi} too large for the reconstruction box")));
    }
    let radius = list_or(&cfg.radii, &[BOX_RADIUS], "radii")?[0];
    if !(1..=512).contains(&radius) {
        return Err(CliError::config("lattice", format!("box radius {radius} outside 1..=512")));
    }
    let kernel = cfg.kernel()?;
    if kernel.dim() != 1 {
        return Err(CliError::config("kernels", "decompose runs on the line"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampling_seed());
    let phases: Vec<(u32, BilinearPhase, u64)> = (0..count)
        .map(|_| {
            let d = rng.gen_range(2..=max_degree);
            (d, draw_phase(&mut rng, cfg, d), rng.gen())
        })
        .collect();
    let region = BoxRegion::centered(1, radius);

    struct Row {
        degree: u32,
        leaves: usize,
        buckets: usize,
        partition: bool,
        monotone: bool,
        constraints: bool,
        error: f64,
        json: serde_json::Value,
        assignment: Vec<(u32, String)>,
    }
    let rows: Vec<Row> = phases
        .par_iter()
        .map(|(d, q, seed)| -> Result<Row, CliError> {
            let eps = list_or(&cfg.eps, &default_eps(*d), "eps")?;
            let sc = ScheduleConfig { eps, seed: *seed, ..ScheduleConfig::new(j_lo, j_hi, *d) };
            let schedule = build_schedule(q, &sc).within("diophantine")?;
            let mut frng = ChaCha8Rng::seed_from_u64(*seed);
            let f = LatticeFunction::from_fn(region.clone(), |_| {
                Complex64::new(frng.gen::<f64>() - 0.5, frng.gen::<f64>() - 0.5)
            });
            let error = schedule.reconstruction_error(q, &kernel, &f, &region).within("diophantine")?;
            let leaves = schedule.leaves();
            let buckets = schedule.minor_buckets();
            let mut assignment = Vec::new();
            for (i, l) in leaves.iter().enumerate() {
                assignment.extend(l.js.iter().map(|&j| (j, format!("leaf{i}"))));
            }
            for b in &buckets {
                assignment.extend(b.js.iter().map(|&j| (j, format!("minor@level{}", b.level))));
            }
            assignment.sort();
            let json = serde_json::to_value(&schedule).map_err(|e| CliError::config("diophantine", e.to_string()))?;
            Ok(Row {
                degree: *d,
                leaves: leaves.len(),
                buckets: buckets.len(),
                partition: schedule.is_partition(),
                monotone: schedule.radii_monotone(),
                constraints: leaves.iter().all(|l| l.constraints_hold()),
                error,
                json: json!({ "phase": PhaseDoc::from(q), "schedule": json }),
                assignment,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new(
        "decompose.csv",
        &["phase", "degree", "leaves", "minor_buckets", "partition", "radii_monotone", "constraints_hold", "reconstruction_error"],
    );
    let mut groups = Table::new("decompose_groups.csv", &["phase", "j", "group"]);
    let mut documents = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            r.degree.to_string(),
            r.leaves.to_string(),
            r.buckets.to_string(),
            r.partition.to_string(),
            r.monotone.to_string(),
            r.constraints.to_string(),
            num(r.error),
        ]);
        for (j, g) in &r.assignment {
            groups.push(vec![i.to_string(), j.to_string(), g.clone()]);
        }
        documents.push((format!("schedule_{i}.json"), r.json.clone()));
    }
    let worst = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("reconstruction_error", worst, RECONSTRUCTION_TOLERANCE),
        Check::flag("schedules_partition_scales", rows.iter().all(|r| r.partition), ""),
        Check::flag("radii_monotone", rows.iter().all(|r| r.monotone), ""),
        Check::flag("leaf_constraints_hold", rows.iter().all(|r| r.constraints), ""),
    ];
    let summary = json!({ "phases": count, "box_radius": radius, "j_range": [j_lo, j_hi], "max_error": worst });
    Ok(Report { tables: vec![table, groups], documents, checks, summary })
}

/// Plain listing of phase terms for the schedule documents.
#[derive(serde::Serialize)]
struct PhaseDoc {
    terms: Vec<(u32, u32, String)>,
}

impl From<&BilinearPhase> for PhaseDoc {
    fn from(q: &BilinearPhase) -> Self {
        PhaseDoc { terms: q.terms().iter().map(|t| (t.alpha.0[0], t.beta.0[0], t.theta.to_string())).collect() }
    }
}
