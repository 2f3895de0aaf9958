use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::arith::{e, Frac};
use crate::kernels::{CZKernel, FiniteKernel};
use crate::lattice::{BoxRegion, LatticeFunction};
use crate::polyalg::{BilinearPhase, CoefficientVector, IntPolyMap, MultiIndex};

fn sign_kernel() -> FiniteKernel {
    FiniteKernel::new(1, 1.0, |m| if m[0] == 1 { 1.0 } else if m[0] == -1 { -1.0 } else { 0.0 })
}

fn int_pow(m: i64, k: u32) -> f64 {
    (m as f64).powi(k as i32)
}

#[test]
fn odd_kernel_vanishes_at_origin() {
    let p = IntPolyMap::univariate(&[0, 1]);
    let m = Multiplier::plain(&p, &CZKernel::hilbert(), 32).unwrap();
    assert!(m.eval(&[0.0]).unwrap().norm() < 1e-15);
}

#[test]
fn universal_two_term_by_hand() {
    let mu = Multiplier::universal(2, &sign_kernel(), 4).unwrap();
    assert_eq!(mu.spectral_dim(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
        let want = e(-a - b) - e(a - b);
        assert!((mu.eval(&[a, b]).unwrap() - want).norm() < 1e-14);
    }
}

#[test]
fn twisted_matches_naive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = IntPolyMap::from_terms(
        1,
        2,
        &[(MultiIndex(vec![1]), 0, 2), (MultiIndex(vec![2]), 1, -1), (MultiIndex(vec![3]), 1, 1)],
    )
    .unwrap();
    let theta = [0.37, 0.011, 0.0023];
    let q = CoefficientVector::univariate(&theta);
    let mt = Multiplier::twisted(&p, &q, &CZKernel::hilbert(), 12).unwrap();
    for _ in 0..50 {
        let xi: Vec<f64> = (0..2).map(|_| rng.gen()).collect();
        let mut naive = Complex64::new(0.0, 0.0);
        for m in -12i64..=12 {
            if m == 0 {
                continue;
            }
            let pm = [2.0 * m as f64, -int_pow(m, 2) + int_pow(m, 3)];
            let qm: f64 = theta.iter().enumerate().map(|(i, t)| t * int_pow(m, i as u32 + 1)).sum();
            naive += e(-(xi[0] * pm[0] + xi[1] * pm[1] - qm)) / m as f64;
        }
        assert!((mt.eval(&xi).unwrap() - naive).norm() < 1e-12);
    }
}

#[test]
fn periodic_and_conjugate_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = IntPolyMap::univariate(&[1, 0, 2]);
    let m = Multiplier::plain(&p, &CZKernel::hilbert(), 32).unwrap();
    for _ in 0..30 {
        // dyadic with headroom so that x + 1 is exact in binary
        let x = rng.gen_range(0..1u32 << 30) as f64 / (1u64 << 30) as f64;
        let a = m.eval(&[x]).unwrap();
        assert!((a - m.eval(&[x + 1.0]).unwrap()).norm() < 1e-12);
        assert!((m.eval(&[-x]).unwrap() - a.conj()).norm() < 1e-12);
    }
}

#[test]
fn descent_identity_examples() {
    let k = CZKernel::hilbert();
    let r = descent_identity_check(&IntPolyMap::univariate(&[1]), None, &k, 32, 100, 4).unwrap();
    assert_eq!(r.plain, 0.0);
    let r = descent_identity_check(&IntPolyMap::univariate(&[0, 1]), None, &k, 32, 100, 5).unwrap();
    assert!(r.plain <= 1e-12);
    // twist of higher degree pads P
    let q = CoefficientVector::univariate(&[0.1, 0.0, 0.731]);
    let r = descent_identity_check(&IntPolyMap::univariate(&[3]), Some(&q), &k, 32, 100, 6).unwrap();
    assert!(r.plain <= 1e-12 && r.twisted.unwrap() <= 1e-12, "{r:?}");
}

#[test]
fn descent_identity_two_dimensional() {
    let k = CZKernel::odd_power(2, 1.0, 1.0).unwrap();
    let p = IntPolyMap::from_terms(
        2,
        2,
        &[(MultiIndex(vec![1, 1]), 0, 1), (MultiIndex(vec![0, 2]), 0, -2), (MultiIndex(vec![1, 0]), 1, 3)],
    )
    .unwrap();
    let q = CoefficientVector::from_terms(2, &[(MultiIndex(vec![2, 1]), Frac::from_f64(0.3))]).unwrap();
    let r = descent_identity_check(&p, Some(&q), &k, 8, 100, 7).unwrap();
    assert!(r.plain <= 1e-12 && r.twisted.unwrap() <= 1e-12, "{r:?}");
}

#[test]
fn quasi_shift_examples() {
    let k = CZKernel::hilbert();
    let zero = CoefficientVector::zero(1, 3);
    assert_eq!(quasi_shift_check(&zero, &k, 32, 50, 1).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let theta: Vec<f64> = (0..5).map(|_| rng.gen()).collect();
    let q = CoefficientVector::univariate(&theta);
    assert!(quasi_shift_check(&q, &k, 32, 100, 2).unwrap() <= 1e-12);
    let rational = CoefficientVector::from_terms(
        1,
        &[(MultiIndex(vec![1]), Frac::new(1, 3).unwrap()), (MultiIndex(vec![2]), Frac::new(2, 7).unwrap())],
    )
    .unwrap();
    assert!(quasi_shift_check(&rational, &k, 32, 100, 3).unwrap() <= 1e-12);
}

#[test]
fn circulant_eigenvalues_are_multiplier_values() {
    let k = CZKernel::hilbert();
    assert!(circulant_eigen_check(&IntPolyMap::univariate(&[0, 1]), &k, 32, 16).unwrap() <= 1e-10);
    assert!(circulant_eigen_check(&IntPolyMap::univariate(&[1, 0, 1]), &k, 32, 64).unwrap() <= 1e-10);
    assert!(circulant_eigen_check(&IntPolyMap::univariate(&[1]), &k, 8, 0).is_err());
}

#[test]
fn multiplier_config_round_trip() {
    let json = r#"{"kind":"m_twist","kernel":{"family":"odd_power","dim":1,"A":1.0},"truncation":16,
        "P":[{"alpha":[2],"l":0,"beta":1}],"Q":[{"alpha":[1],"theta":0.25}]}"#;
    let spec: MultiplierSpec = serde_json::from_str(json).unwrap();
    let m = spec.build().unwrap();
    assert_eq!(m.kind(), MultiplierKind::MTwist);
    let v = eval_multiplier(&spec, &[0.3]).unwrap();
    let mut naive = Complex64::new(0.0, 0.0);
    for n in -16i64..=16 {
        if n != 0 {
            naive += e(-(0.3 * (n * n) as f64 - 0.25 * n as f64)) / n as f64;
        }
    }
    assert!((v - naive).norm() < 1e-12);
}

fn torus_fn(rng: &mut ChaCha8Rng, radius: i64, period: i64) -> LatticeFunction {
    let region = BoxRegion::new(vec![-radius, 0], vec![radius, period - 1]).unwrap();
    LatticeFunction::from_fn(region, |_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

#[test]
fn plancherel_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let zero_p = IntPolyMap::from_terms(2, 1, &[]).unwrap();
    let op =
        QuasiRadonOperator::new(zero_p, BilinearPhase::zero(1), &CZKernel::hilbert(), &Ball::new(1, 6.0)).unwrap();
    let f = torus_fn(&mut rng, 5, 4);
    let r = periodic_plancherel_route(&op, &f, 4).unwrap();
    assert!(r.relative_error() <= 1e-12 && r.max_pointwise <= 1e-12, "{r:?}");
    let f1 = torus_fn(&mut rng, 5, 1);
    let r = periodic_plancherel_route(&op, &f1, 1).unwrap();
    assert!(r.relative_error() <= 1e-12);
    assert!(periodic_plancherel_route(&op, &f1, 0).is_err());
}

#[test]
fn plancherel_shear_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p = IntPolyMap::from_terms(2, 1, &[(MultiIndex(vec![1, 1]), 0, 1)]).unwrap();
    let q = BilinearPhase::from_exponents_1d(&[(1, 2, Frac::from_f64(0.137))]);
    let op = QuasiRadonOperator::new(p, q, &CZKernel::hilbert(), &Ball::new(1, 5.0)).unwrap();
    let f = torus_fn(&mut rng, 6, 16);
    let r = periodic_plancherel_route(&op, &f, 16).unwrap();
    assert!(r.relative_error() <= 1e-10 && r.max_pointwise <= 1e-10, "{r:?}");
}
