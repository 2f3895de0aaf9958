//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (outside the test harness capture) and then asserts its verdict.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radon_core::arith::Frac;
use radon_core::diophantine::{GaussOperator, TNaturalOperator};
use radon_core::kernels::{dyadic_decompose, CZKernel, FiniteKernel};
use radon_core::lattice::{Ball, BoxRegion, LatticeFunction, LatticePoint};
use radon_core::normlab::{
    dual_exponent, norm_bracket, norm_p_lower, spectral_norm, DenseMatrix, LowerOptions, SpectralMethod, SpectralOptions,
};
use radon_core::operators::{ConvMethod, ExpSumOperator, OscillatoryOperator, QuasiRadonOperator, RadonOperator, WeightFn};
use radon_core::polyalg::{BilinearPhase, CoefficientVector, IntPolyMap, MultiIndex, PhaseTerm};
use radon_lab::config::ExperimentKind;
use radon_lab::report::Report;
use radon_lab::{evaluate, execute, RunRequest};

const ORACLE_TOLERANCE: f64 = 1e-12;
const ORACLE_INSTANCES: usize = 20;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const AUDIT_BUDGET: Duration = Duration::from_secs(60);

/// Serializes the criteria so that wall-clock budgets are measured on an
/// otherwise idle machine.
fn serial() -> MutexGuard<'static, ()> {
    static GATE: Mutex<()> = Mutex::new(());
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, what: &str, passed: bool, detail: impl AsRef<str>) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "\n{tag} criterion {n:>2} {what}: {}", detail.as_ref());
}

fn run_default(kind: ExperimentKind) -> (Report, Duration) {
    let start = Instant::now();
    let (_, report) = evaluate(kind, "", None).unwrap_or_else(|e| panic!("{kind} failed to run: {e}"));
    (report, start.elapsed())
}

fn cached(cell: &'static OnceLock<(Report, Duration)>, kind: ExperimentKind) -> &'static (Report, Duration) {
    cell.get_or_init(|| run_default(kind))
}

fn identities() -> &'static (Report, Duration) {
    static CELL: OnceLock<(Report, Duration)> = OnceLock::new();
    cached(&CELL, ExperimentKind::Identities)
}

fn dirichlet() -> &'static (Report, Duration) {
    static CELL: OnceLock<(Report, Duration)> = OnceLock::new();
    cached(&CELL, ExperimentKind::DirichletAudit)
}

fn factorize() -> &'static (Report, Duration) {
    static CELL: OnceLock<(Report, Duration)> = OnceLock::new();
    cached(&CELL, ExperimentKind::Factorize)
}

/// All named checks must be present and passing.
fn checks_pass(report: &Report, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in names {
        match report.check(name) {
            Some(c) => {
                ok &= c.passed;
                parts.push(format!("{name}={:.3e}/{:.3e}", c.value, c.threshold));
            }
            None => {
                ok = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    (ok, parts.join(" "))
}

// ---------------------------------------------------------------------------
// Naive-loop references

fn cis_turns(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * t)
}

/// `e(sum theta_i v_i)` with each product reduced modulo 1 in integers.
fn exact_phase(terms: &[(Frac, i128)]) -> Complex64 {
    let t: f64 = terms.iter().map(|(th, v)| (th.num() * v).rem_euclid(th.den()) as f64 / th.den() as f64).sum();
    cis_turns(t.fract())
}

fn ipow(x: i64, a: u32) -> i128 {
    (x as i128).pow(a)
}

/// Phase terms as `(a, b, theta)` for `theta n^a m^b` on the line.
type Terms = Vec<(u32, u32, Frac)>;

fn phase_value(terms: &Terms, n: i64, m: i64) -> Complex64 {
    let parts: Vec<(Frac, i128)> = terms.iter().map(|&(a, b, th)| (th, ipow(n, a) * ipow(m, b))).collect();
    exact_phase(&parts)
}

fn to_phase(terms: &Terms) -> BilinearPhase {
    BilinearPhase::from_terms(
        1,
        terms.iter().map(|&(a, b, theta)| PhaseTerm { alpha: MultiIndex(vec![a]), beta: MultiIndex(vec![b]), theta }),
    )
    .expect("line phase")
}

fn random_theta(rng: &mut ChaCha8Rng) -> Frac {
    if rng.gen_bool(0.5) {
        Frac::from_f64(rng.gen::<f64>())
    } else {
        let q = rng.gen_range(1..=1000);
        Frac::new(rng.gen_range(0..q), q).expect("positive denominator")
    }
}

/// Random phase with mixed terms `n^a m^b`, `a, b >= 1`, `a + b <= 3`,
/// and optionally pure terms in one variable.
fn random_terms(rng: &mut ChaCha8Rng, pure: bool) -> Terms {
    let mut terms = vec![(1, 1, random_theta(rng))];
    for (a, b) in [(1, 2), (2, 1)] {
        if rng.gen_bool(0.5) {
            terms.push((a, b, random_theta(rng)));
        }
    }
    if pure {
        for (a, b) in [(1, 0), (2, 0), (0, 1), (0, 2)] {
            if rng.gen_bool(0.5) {
                terms.push((a, b, random_theta(rng)));
            }
        }
    }
    terms
}

fn random_fn(rng: &mut ChaCha8Rng, region: BoxRegion) -> LatticeFunction {
    LatticeFunction::from_fn(region, |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// Kernel on the line with independent random weights on `1 <= |m| <= reach`.
fn table_kernel(rng: &mut ChaCha8Rng, reach: i64) -> (FiniteKernel, Arc<Vec<f64>>) {
    let w: Arc<Vec<f64>> = Arc::new((-reach..=reach).map(|m| if m == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect());
    let table = w.clone();
    let kernel = FiniteKernel::new(1, reach as f64, move |m| {
        if m[0].abs() > reach {
            0.0
        } else {
            table[(m[0] + reach) as usize]
        }
    });
    (kernel, w)
}

fn table_weight(w: &[f64], x: i64) -> f64 {
    let reach = (w.len() as i64 - 1) / 2;
    if x == 0 || x.abs() > reach {
        0.0
    } else {
        w[(x + reach) as usize]
    }
}

type Sparse = BTreeMap<LatticePoint, Complex64>;

fn max_gap(got: &LatticeFunction, want: &Sparse) -> f64 {
    let mut gap = want.iter().map(|(p, v)| (got.get(p) - v).norm()).fold(0.0, f64::max);
    for (p, v) in got.support() {
        if !want.contains_key(&p) {
            gap = gap.max(v.norm());
        }
    }
    gap
}

/// Coefficients `c[l][a - 1]` of `P_l(m) = sum_a c m^a`.
fn random_poly(rng: &mut ChaCha8Rng, out_dim: usize) -> Vec<Vec<i64>> {
    let degree = rng.gen_range(1..=3);
    (0..out_dim)
        .map(|_| {
            let mut c: Vec<i64> = (0..degree).map(|_| rng.gen_range(-3..=3)).collect();
            if c.iter().all(|&v| v == 0) {
                c[0] = 1;
            }
            c
        })
        .collect()
}

fn poly_map(c: &[Vec<i64>]) -> IntPolyMap {
    let terms: Vec<(MultiIndex, usize, i64)> = c
        .iter()
        .enumerate()
        .flat_map(|(l, cs)| cs.iter().enumerate().map(move |(a, &v)| (MultiIndex(vec![a as u32 + 1]), l, v)))
        .filter(|t| t.2 != 0)
        .collect();
    IntPolyMap::from_terms(1, c.len(), &terms).expect("valid polynomial")
}

fn poly_eval(c: &[i64], m: i64) -> i64 {
    c.iter().enumerate().map(|(a, &v)| v * m.pow(a as u32 + 1)).sum()
}

fn radon_case(rng: &mut ChaCha8Rng, twisted: bool) -> f64 {
    let out_dim = rng.gen_range(1..=2);
    let c = random_poly(rng, out_dim);
    let reach = rng.gen_range(1..=8);
    let (kernel, w) = table_kernel(rng, reach);
    let thetas: Vec<Frac> = (0..3).map(|_| random_theta(rng)).collect();
    let q = twisted.then(|| {
        let terms: Vec<(MultiIndex, Frac)> = thetas.iter().enumerate().map(|(a, t)| (MultiIndex(vec![a as u32 + 1]), *t)).collect();
        CoefficientVector::from_terms(1, &terms).expect("line coefficients")
    });
    let op = RadonOperator::new(poly_map(&c), q, &kernel, &Ball::new(1, reach as f64)).expect("operator");
    let f = { let r = rng.gen_range(1..=8); random_fn(rng, BoxRegion::centered(out_dim, r)) };
    let got = op.apply(&f).expect("apply");

    let mut want = Sparse::new();
    for (x, v) in f.iter() {
        for m in -reach..=reach {
            let k = table_weight(&w, m);
            if k == 0.0 {
                continue;
            }
            let mut tw = Complex64::new(k, 0.0);
            if twisted {
                let parts: Vec<(Frac, i128)> = thetas.iter().enumerate().map(|(a, t)| (*t, ipow(m, a as u32 + 1))).collect();
                tw *= exact_phase(&parts);
            }
            let n: LatticePoint = x.iter().zip(&c).map(|(xi, cl)| xi + poly_eval(cl, m)).collect();
            *want.entry(n).or_default() += v * tw;
        }
    }
    max_gap(&got, &want)
}

fn quasi_radon_case(rng: &mut ChaCha8Rng) -> f64 {
    // P(n, m) = sum c_ab n^a m^b over 1 <= a + b <= 2
    let shape = [(1, 0), (0, 1), (1, 1), (2, 0), (0, 2)];
    let mut coeffs: Vec<((u32, u32), i64)> = shape.iter().map(|&ab| (ab, rng.gen_range(-2..=2))).collect();
    if coeffs.iter().all(|(_, c)| *c == 0) {
        coeffs[2].1 = 1;
    }
    let terms: Vec<(MultiIndex, usize, i64)> =
        coeffs.iter().filter(|(_, c)| *c != 0).map(|&((a, b), c)| (MultiIndex(vec![a, b]), 0, c)).collect();
    let p = IntPolyMap::from_terms(2, 1, &terms).expect("valid polynomial");
    let q = random_terms(rng, false);
    let reach = rng.gen_range(1..=6);
    let (kernel, w) = table_kernel(rng, reach);
    let op = QuasiRadonOperator::new(p, to_phase(&q), &kernel, &Ball::new(1, reach as f64)).expect("operator");
    let (r1, r2) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
    let f = random_fn(rng, BoxRegion::new(vec![-r1, -r2], vec![r1, r2]).expect("box"));
    let got = op.apply(&f).expect("apply");

    let mut want = Sparse::new();
    for (x, v) in f.iter() {
        for m in -reach..=reach {
            let k = table_weight(&w, m);
            if k == 0.0 {
                continue;
            }
            let n = x[0] + m;
            let shift: i64 = coeffs.iter().map(|&((a, b), c)| c * n.pow(a) * m.pow(b)).sum();
            *want.entry(vec![n, x[1] + shift]).or_default() += v * k * phase_value(&q, n, m);
        }
    }
    max_gap(&got, &want)
}

fn oscillatory_reference(q: &Terms, weight: impl Fn(i64) -> f64, f: &LatticeFunction, out: &BoxRegion) -> Sparse {
    out.points()
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, v) in f.iter() {
                let k = weight(n[0] - m[0]);
                if k != 0.0 {
                    acc += phase_value(q, n[0], m[0]) * k * v;
                }
            }
            (n, acc)
        })
        .collect()
}

fn oscillatory_case(rng: &mut ChaCha8Rng, method: ConvMethod, bilinear_only: bool) -> f64 {
    let q = if bilinear_only { vec![(1, 1, random_theta(rng))] } else { random_terms(rng, true) };
    let reach = rng.gen_range(1..=16);
    let (kernel, w) = table_kernel(rng, reach);
    let op = OscillatoryOperator::new(to_phase(&q), Arc::new(kernel)).expect("operator").with_method(method);
    let f = { let r = rng.gen_range(1..=8); random_fn(rng, BoxRegion::centered(1, r)) };
    let out = BoxRegion::centered(1, rng.gen_range(1..=8));
    let got = op.apply_box(&f, &out).expect("apply");
    max_gap(&got, &oscillatory_reference(&q, |x| table_weight(&w, x), &f, &out))
}

fn cutoff(r: f64) -> f64 {
    let g = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let u = 2.0 * (1.0 - r);
        g(u) / (g(u) + g(1.0 - u))
    }
}

fn scale_piece_case(rng: &mut ChaCha8Rng) -> f64 {
    let j = rng.gen_range(1..=3u32);
    let q = random_terms(rng, true);
    let piece = dyadic_decompose(&CZKernel::hilbert(), j);
    let op = OscillatoryOperator::new(to_phase(&q), Arc::new(piece)).expect("operator");
    let f = { let r = rng.gen_range(1..=8); random_fn(rng, BoxRegion::centered(1, r)) };
    let out = BoxRegion::centered(1, rng.gen_range(1..=8));
    let got = op.apply_box(&f, &out).expect("apply");
    let s = (j as f64).exp2();
    let weight = |x: i64| {
        if x == 0 {
            return 0.0;
        }
        let r = (x as f64).abs();
        (cutoff(r / (2.0 * s)) - cutoff(r / s)) / x as f64
    };
    max_gap(&got, &oscillatory_reference(&q, weight, &f, &out))
}

fn exp_sum_case(rng: &mut ChaCha8Rng) -> f64 {
    let q = random_terms(rng, true);
    let r = rng.gen_range(1..=6);
    let mut omega: Vec<LatticePoint> = (-r..=r).filter(|_| rng.gen_bool(0.7)).map(|x| vec![x]).collect();
    if omega.is_empty() {
        omega.push(vec![0]);
    }
    let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let phi = move |n: f64, m: f64| 0.9 * (a * n + b * m).cos();
    let weight: WeightFn = if rng.gen_bool(0.2) { ExpSumOperator::unit_weight() } else { Arc::new(move |n: &[f64], m: &[f64]| phi(n[0], m[0])) };
    let probe = weight.clone();
    let op = ExpSumOperator::new(to_phase(&q), weight, omega.clone(), r as f64).expect("operator");
    let f = random_fn(rng, BoxRegion::centered(1, r + 2));
    let got = op.apply(&f).expect("apply");
    let want: Sparse = omega
        .iter()
        .map(|n| {
            let acc: Complex64 = omega
                .iter()
                .map(|m| phase_value(&q, n[0], m[0]) * probe(&[n[0] as f64], &[m[0] as f64]) * f.get(m))
                .sum();
            (n.clone(), acc)
        })
        .collect();
    max_gap(&got, &want)
}

fn gauss_case(rng: &mut ChaCha8Rng) -> f64 {
    let q = rng.gen_range(1..=40i64);
    let a = rng.gen_range(0..q.max(2));
    let op = GaussOperator::bilinear(q, a).expect("operator");
    let f = random_fn(rng, BoxRegion::new(vec![-q], vec![2 * q]).expect("box"));
    let got = op.apply(&f).expect("apply");
    let want: Sparse = (0..q)
        .map(|r| {
            let acc: Complex64 =
                f.iter().map(|(x, v)| cis_turns((a as i128 * r as i128 * x[0] as i128).rem_euclid(q as i128) as f64 / q as f64) * v).sum();
            (vec![r], acc / q as f64)
        })
        .collect();
    max_gap(&got, &want)
}

fn t_natural_case(rng: &mut ChaCha8Rng) -> f64 {
    let modulus = rng.gen_range(1..=6i64);
    let q = random_terms(rng, true);
    let r = rng.gen_range(1..=6);
    let mut domain: Vec<LatticePoint> = (-r..=r).filter(|_| rng.gen_bool(0.8)).map(|x| vec![x]).collect();
    if domain.is_empty() {
        domain.push(vec![0]);
    }
    let op = TNaturalOperator::new(to_phase(&q), Arc::new(CZKernel::hilbert()), modulus, domain.clone()).expect("operator");
    let f = random_fn(rng, BoxRegion::centered(1, 8));
    let got = op.apply(&f).expect("apply");
    let want: Sparse = domain
        .iter()
        .map(|n| {
            let acc: Complex64 = domain
                .iter()
                .filter(|m| m[0] != n[0])
                .map(|m| {
                    let k = modulus as f64 / (modulus * (n[0] - m[0])) as f64;
                    phase_value(&q, n[0], m[0]) * k * f.get(m)
                })
                .sum();
            (n.clone(), acc)
        })
        .collect();
    max_gap(&got, &want)
}

#[test]
fn criterion_01_operators_match_naive_loops() {
    let _gate = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    type Case = fn(&mut ChaCha8Rng) -> f64;
    let cases: [(&str, Case); 10] = [
        ("radon", |r| radon_case(r, false)),
        ("twisted_radon", |r| radon_case(r, true)),
        ("quasi_radon", quasi_radon_case),
        ("oscillatory_direct", |r| oscillatory_case(r, ConvMethod::Direct, false)),
        ("oscillatory_fft", |r| oscillatory_case(r, ConvMethod::Fft, false)),
        ("oscillatory_fft_bilinear", |r| oscillatory_case(r, ConvMethod::Fft, true)),
        ("scale_piece", scale_piece_case),
        ("exponential_sum", exp_sum_case),
        ("gauss_sum", gauss_case),
        ("quotient_operator", t_natural_case),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, case) in cases {
        let err = (0..ORACLE_INSTANCES).map(|_| case(&mut rng)).fold(0.0, f64::max);
        worst = worst.max(err);
        parts.push(format!("{name}={err:.1e}"));
    }
    let elapsed = start.elapsed();
    let passed = worst <= ORACLE_TOLERANCE && elapsed <= ORACLE_BUDGET;
    verdict(1, "oracle equivalence", passed, format!("max_err={worst:.2e} time={elapsed:.2?} [{}]", parts.join(" ")));
    assert!(passed);
}

#[test]
fn criterion_02_identity_suite() {
    let _gate = serial();
    let (report, _) = identities();
    let (mut passed, detail) = checks_pass(
        report,
        &["descent_identity", "quasi_shift", "modulation_conjugation", "step_embedding_exact", "circulant_eigenvalues"],
    );
    let draws = report.summary["draws"].as_u64().unwrap_or(0);
    passed &= draws >= 100;
    verdict(2, "identity suite", passed, format!("{detail} draws={draws}"));
    assert!(passed);
}

#[test]
fn criterion_03_plancherel_route() {
    let _gate = serial();
    let (report, _) = identities();
    let (passed, detail) = checks_pass(report, &["plancherel_relative_error"]);
    verdict(3, "periodic Plancherel route", passed, detail);
    assert!(passed);
}

#[test]
fn criterion_04_rational_approximation_audit() {
    let _gate = serial();
    let (report, elapsed) = dirichlet();
    let (ok, detail) = checks_pass(report, &["postcondition_failures"]);
    let audited = report.summary["audited"].as_u64().unwrap_or(0);
    let passed = ok && audited == 1008 * 100 && *elapsed <= AUDIT_BUDGET;
    verdict(4, "rational approximation audit", passed, format!("{detail} audited={audited} time={elapsed:.2?}"));
    assert!(passed);
}

#[test]
fn criterion_05_dyadic_separation() {
    let _gate = serial();
    let (report, _) = dirichlet();
    let (ok, detail) = checks_pass(report, &["separation_holds_fraction"]);
    let instances = report.summary["separation_instances"].as_u64().unwrap_or(0);
    let passed = ok && instances >= 10_000;
    verdict(5, "dyadic separation", passed, format!("{detail} instances={instances} {}", report.summary["verdicts"]));
    assert!(passed);
}

#[test]
fn criterion_06_decomposition_reconstruction() {
    let _gate = serial();
    let (report, _) = run_default(ExperimentKind::Decompose);
    let (mut passed, detail) = checks_pass(
        &report,
        &["reconstruction_error", "schedules_partition_scales", "radii_monotone", "leaf_constraints_hold"],
    );
    let phases = report.summary["phases"].as_u64().unwrap_or(0);
    let radius = report.summary["box_radius"].as_i64().unwrap_or(0);
    passed &= phases >= 5 && radius == 256;
    verdict(6, "decomposition reconstruction", passed, format!("{detail} phases={phases} box={radius}"));
    assert!(passed);
}

#[test]
fn criterion_07_gauss_sum_law() {
    let _gate = serial();
    let (report, _) = run_default(ExperimentKind::GaussDecay);
    let (passed, detail) = checks_pass(&report, &["norm_equals_inverse_sqrt_q", "slope_deviation", "measured_delta"]);
    verdict(7, "Gauss sum law", passed, detail);
    assert!(passed);
}

#[test]
fn criterion_08_minor_scale_decay() {
    let _gate = serial();
    let (report, _) = run_default(ExperimentKind::MinorDecay);
    let (passed, detail) = checks_pass(&report, &["solver_converged", "fitted_delta_positive", "fit_r_squared"]);
    verdict(8, "minor scale decay", passed, detail);
    assert!(passed);
}

#[test]
fn criterion_09_error_kernel_budgets() {
    let _gate = serial();
    let (report, _) = factorize();
    let (passed, detail) = checks_pass(report, &["g_norm_over_calibrated_bound", "h_norm_over_calibrated_bound"]);
    verdict(9, "error kernel budgets", passed, detail);
    assert!(passed);
}

#[test]
fn criterion_10_factorization_residual() {
    let _gate = serial();
    let (report, _) = factorize();
    let (passed, detail) =
        checks_pass(report, &["exact_modulus", "exact_residual_decreasing", "perturbed_residual_over_budget"]);
    verdict(10, "factorization residual", passed, format!("{detail} {}", report.summary["exact_residuals"]));
    assert!(passed);
}

#[test]
fn criterion_11_uniformity_plateau() {
    let _gate = serial();
    let dir = tempfile::tempdir().expect("temp dir");
    let outcome = execute(&RunRequest {
        kind: ExperimentKind::Uniformity,
        config_text: String::new(),
        out: Some(dir.path().to_path_buf()),
        seed: None,
        threads: None,
    })
    .expect("uniformity runs");
    let report = &outcome.report;
    let names: Vec<String> = [1.5, 2.0, 3.0]
        .iter()
        .flat_map(|p| [format!("plateau_lower_p{p}"), format!("plateau_upper_p{p}")])
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let (mut passed, detail) = checks_pass(report, &refs);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).expect("manifest")).expect("manifest json");
    let shipped = manifest["outputs"].as_array().is_some_and(|o| o.iter().any(|e| e["file"] == "uniformity.csv"));
    let rows = report.table("uniformity.csv").map_or(0, |t| t.rows.len());
    passed &= shipped && rows == 50 * 3 * 3;
    verdict(11, "uniformity plateau", passed, format!("{detail} rows={rows} shipped={shipped}"));
    assert!(passed);
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

#[test]
fn criterion_12_norm_engine() {
    let _gate = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0012);
    let lower = LowerOptions::default();

    let mut sandwich_violations = 0;
    for _ in 0..1000 {
        let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let m = DenseMatrix::from_fn(r, c, |_, _| random_complex(&mut rng));
        let p = rng.gen_range(1.05..6.0);
        let est = norm_bracket(&m, p, &lower).expect("bracket");
        if !(est.lower <= est.upper) {
            sandwich_violations += 1;
        }
    }

    let power = SpectralOptions { method: SpectralMethod::Power, tolerance: 1e-15, max_iterations: 200_000, ..Default::default() };
    let mut closed_form_gap = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(1..=12), rng.gen_range(1..=12));
        let u: Vec<Complex64> = (0..r).map(|_| random_complex(&mut rng)).collect();
        let v: Vec<Complex64> = (0..c).map(|_| random_complex(&mut rng)).collect();
        let m = DenseMatrix::from_fn(r, c, |i, j| u[i] * v[j].conj());
        let norm = |x: &[Complex64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let got = spectral_norm(&m, &power).value;
        closed_form_gap = closed_form_gap.max((got - norm(&u) * norm(&v)).abs());

        let n = rng.gen_range(1..=12);
        let d: Vec<Complex64> = (0..n).map(|_| random_complex(&mut rng)).collect();
        let m = DenseMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { Complex64::new(0.0, 0.0) });
        let got = spectral_norm(&m, &power).value;
        let want = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        closed_form_gap = closed_form_gap.max((got - want).abs());
    }

    let mut duality_gap = 0.0f64;
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(2..=10), rng.gen_range(2..=10));
        let m = DenseMatrix::from_fn(r, c, |_, _| Complex64::new(rng.gen_range(0.0..1.0), 0.0));
        let p = rng.gen_range(1.1..5.0);
        let primal = norm_p_lower(&m, p, &lower).expect("primal").lower;
        let dual = norm_p_lower(&m.conj_transpose(), dual_exponent(p), &lower).expect("dual").lower;
        duality_gap = duality_gap.max((primal - dual).abs() / primal);
    }

    let passed = sandwich_violations == 0 && closed_form_gap <= 1e-8 && duality_gap <= 1e-6;
    verdict(
        12,
        "norm engine",
        passed,
        format!("sandwich_violations={sandwich_violations}/1000 closed_form_gap={closed_form_gap:.2e} duality_gap={duality_gap:.2e}"),
    );
    assert!(passed);
}
