//! One module per experiment kind.

pub mod decompose;
pub mod dirichlet_audit;
pub mod factorize;
pub mod gauss_decay;
pub mod identities;
pub mod minor_decay;
pub mod uniformity;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use radon_core::arith::{gcd, Frac};

use crate::config::{ExperimentConfig, ExperimentKind, SamplingSpec};
use crate::error::CliError;
use crate::report::Report;

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Report, CliError> {
    match kind {
        ExperimentKind::Uniformity => uniformity::run(cfg),
        ExperimentKind::MinorDecay => minor_decay::run(cfg),
        ExperimentKind::GaussDecay => gauss_decay::run(cfg),
        ExperimentKind::Decompose => decompose::run(cfg),
        ExperimentKind::Factorize => factorize::run(cfg),
        ExperimentKind::Identities => identities::run(cfg),
        ExperimentKind::DirichletAudit => dirichlet_audit::run(cfg),
    }
}

/// Least-squares line `y = a + b x` with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { intercept: my - slope * mx, slope, r_squared })
}

/// Real coefficient: rational `a/q` with probability `rational_fraction`,
/// otherwise uniform in `[0, 1)`.
pub(crate) fn draw_real(rng: &mut ChaCha8Rng, sampling: Option<&SamplingSpec>) -> Frac {
    if let Some(s) = sampling {
        if s.rational_fraction > 0.0 && rng.gen::<f64>() < s.rational_fraction {
            let q = rng.gen_range(1..=s.max_denominator.max(1));
            let mut a = rng.gen_range(0..q);
            while gcd(a as i128, q as i128) != 1 {
                a = rng.gen_range(0..q);
            }
            return Frac::new(a as i128, q as i128).expect("positive denominator");
        }
    }
    Frac::from_f64(rng.gen::<f64>())
}

pub(crate) fn is_prime(n: i64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn exact_line_is_recovered() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_fits() {
        assert!(fit_line(&[1.0], &[2.0]).is_none());
        assert!(fit_line(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn primes() {
        let small: Vec<i64> = (0..30).filter(|&n| is_prime(n)).collect();
        assert_eq!(small, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn rational_draws_are_reduced() {
        let s = SamplingSpec { count: 1, seed: None, rational_fraction: 1.0, max_denominator: 12, degree: None, int_range: None };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = draw_real(&mut rng, Some(&s));
            assert!(t.den() >= 1 && t.den() <= 12 && gcd(t.num(), t.den()) == 1);
            assert!(t.to_f64() >= 0.0 && t.to_f64() < 1.0);
        }
    }
}
