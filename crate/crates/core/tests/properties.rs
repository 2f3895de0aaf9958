use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radon_core::arith::{gcd, Frac};
use radon_core::diophantine::{build_schedule, dirichlet_approx, dirichlet_exhaustive, GaussOperator, ScheduleConfig};
use radon_core::kernels::{CZKernel, LatticeKernel};
use radon_core::lattice::{Ball, BoxRegion, LatticeFunction};
use radon_core::multipliers::{descent_identity_check, periodic_plancherel_route, quasi_shift_check};
use radon_core::normlab::{norm_bracket, norm_exact, DenseMatrix, ExactP, LowerOptions};
use radon_core::operators::{ConvMethod, OscillatoryOperator, QuasiRadonOperator, RadonOperator};
use radon_core::polyalg::{BilinearPhase, CoefficientVector, IntPolyMap, MultiIndex};

fn random_fn(seed: u64, region: BoxRegion) -> LatticeFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LatticeFunction::from_fn(region, |_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

fn inner(a: &LatticeFunction, b: &LatticeFunction) -> Complex64 {
    a.region().union(b.region()).points().map(|p| a.get(&p) * b.get(&p).conj()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn descent_identity_random_polynomials(c1 in -4i64..=4, c2 in -4i64..=4, c3 in -3i64..=3, t in 0.0f64..1.0, seed in any::<u64>()) {
        let p = IntPolyMap::univariate(&[c1, c2, c3]);
        let q = CoefficientVector::univariate(&[t, 0.0, 0.0, t * t]);
        let r = descent_identity_check(&p, Some(&q), &CZKernel::hilbert(), 32, 20, seed).unwrap();
        prop_assert!(r.plain <= 1e-10);
        prop_assert!(r.twisted.unwrap() <= 1e-10);
    }

    #[test]
    fn quasi_shift_random_theta(theta in proptest::collection::vec(0.0f64..1.0, 1..=5), seed in any::<u64>()) {
        let q = CoefficientVector::univariate(&theta);
        prop_assert!(quasi_shift_check(&q, &CZKernel::hilbert(), 32, 20, seed).unwrap() <= 1e-12);
    }

    #[test]
    fn dirichlet_postconditions(num in 1i128..2000, den in 2001i128..4000, n in 1u32..200) {
        let theta = Frac::new(num, den).unwrap();
        let d = dirichlet_approx(theta, n as f64).unwrap();
        prop_assert!(d.q >= 1 && d.q as u32 <= n);
        prop_assert_eq!(gcd(d.a as i128, d.q as i128), 1);
        // distance to a/q modulo 1: a = 0 is stored as 1/1
        let gap = d.gamma_f64().abs();
        prop_assert!((theta.to_f64() - d.a as f64 / d.q as f64 - d.gamma_f64()).fract().abs() < 1e-12);
        prop_assert!(gap <= 1.0 / (d.q as f64 * n as f64) + 1e-15);
        let (_, q_min) = dirichlet_exhaustive(theta, n as f64).unwrap();
        prop_assert_eq!(q_min, d.q);
    }

    #[test]
    fn oscillatory_adjoint_pairing(t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, seed in any::<u64>()) {
        let q = BilinearPhase::from_exponents_1d(&[(1, 1, Frac::from_f64(t1)), (2, 1, Frac::from_f64(t2 / 64.0))]);
        let op = OscillatoryOperator::new(q, Arc::new(CZKernel::hilbert())).unwrap();
        let bx = BoxRegion::centered(1, 10);
        let f = random_fn(seed, bx.clone());
        let g = random_fn(seed ^ 0x55, bx.clone());
        let tf = op.apply_box(&f, &bx).unwrap();
        let tsg = op.adjoint().apply_box(&g, &bx).unwrap();
        prop_assert!((inner(&tf, &g) - inner(&f, &tsg)).norm() < 1e-11);
    }

    #[test]
    fn radon_fft_matches_direct(c1 in -3i64..=3, c2 in 1i64..=3, seed in any::<u64>()) {
        let p = IntPolyMap::univariate(&[c1, c2]);
        let k = CZKernel::hilbert();
        let ball = Ball::new(1, 12.0);
        let f = random_fn(seed, BoxRegion::centered(1, 16));
        let a = RadonOperator::new(p.clone(), None, &k, &ball).unwrap().with_method(ConvMethod::Direct).apply(&f).unwrap();
        let b = RadonOperator::new(p, None, &k, &ball).unwrap().with_method(ConvMethod::Fft).apply(&f).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-11);
    }

    #[test]
    fn gauss_norm_law(qi in 0usize..10, a_seed in any::<u64>()) {
        let primes = [2i64, 3, 5, 7, 11, 13, 17, 19, 23, 29];
        let q = primes[qi];
        let a = 1 + (a_seed % (q as u64 - 1).max(1)) as i64;
        let n = norm_exact(&GaussOperator::bilinear(q, a).unwrap().matrix(), ExactP::Two).unwrap();
        prop_assert!((n - (q as f64).powf(-0.5)).abs() < 1e-10);
    }

    #[test]
    fn schedules_partition_scales(t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, j_max in 2u32..14) {
        let q = BilinearPhase::from_exponents_1d(&[(1, 1, Frac::from_f64(t1)), (2, 2, Frac::from_f64(t2))]);
        let s = build_schedule(&q, &ScheduleConfig::new(0, j_max, 4)).unwrap();
        prop_assert!(s.is_partition());
        prop_assert!(s.radii_monotone());
    }

    #[test]
    fn plancherel_route_random(c in 1i64..=3, t in 0.0f64..1.0, seed in any::<u64>()) {
        let p = IntPolyMap::from_terms(2, 1, &[(MultiIndex(vec![1, 1]), 0, c), (MultiIndex(vec![0, 2]), 0, 1)]).unwrap();
        let q = BilinearPhase::from_exponents_1d(&[(1, 2, Frac::from_f64(t))]);
        let op = QuasiRadonOperator::new(p, q, &CZKernel::hilbert(), &Ball::new(1, 4.0)).unwrap();
        let f = random_fn(seed, BoxRegion::new(vec![-4, 0], vec![4, 7]).unwrap());
        let r = periodic_plancherel_route(&op, &f, 8).unwrap();
        prop_assert!(r.relative_error() <= 1e-10);
    }

    #[test]
    fn norm_sandwich(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8, p in 1.1f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DenseMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let est = norm_bracket(&m, p, &LowerOptions { max_iterations: 30, random_starts: 2, seed }).unwrap();
        prop_assert!(est.lower <= est.upper * (1.0 + 1e-12));
    }
}

#[test]
fn hilbert_kernel_is_odd_on_lattice() {
    let k = CZKernel::hilbert();
    for m in 1..100i64 {
        assert_eq!(k.weight(&[m]), -k.weight(&[-m]));
    }
}
