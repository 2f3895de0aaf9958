//! Linear convolution of dense lattice functions by zero-padded FFTs.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::lattice::{BoxRegion, LatticeFunction};

fn transform_axes(buf: &mut [Complex64], shape: &[usize], plans: &[Arc<dyn Fft<f64>>]) {
    let total: usize = shape.iter().product();
    for (axis, plan) in plans.iter().enumerate() {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for start in 0..total {
            // first element of each line along `axis`
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = buf[start + i * stride];
            }
            plan.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                buf[start + i * stride] = *v;
            }
        }
    }
}

fn embed(f: &LatticeFunction, shape: &[usize]) -> Vec<Complex64> {
    let total: usize = shape.iter().product();
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    let region = f.region();
    for (idx, v) in f.values().iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let p = region.point_at(idx);
        let mut flat = 0usize;
        for (axis, &x) in p.iter().enumerate() {
            flat = flat * shape[axis] + (x - region.lo()[axis]) as usize;
        }
        buf[flat] = *v;
    }
    buf
}

/// `(a * b)(n) = sum_x a(x) b(n - x)` over the Minkowski sum of the boxes.
pub fn fft_convolve(a: &LatticeFunction, b: &LatticeFunction) -> LatticeFunction {
    let out_region: BoxRegion = a.region().sum(b.region());
    let dim = a.dim();
    let shape: Vec<usize> = (0..dim).map(|ax| out_region.extent(ax).next_power_of_two()).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
    let inv: Vec<_> = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
    let mut fa = embed(a, &shape);
    let mut fb = embed(b, &shape);
    transform_axes(&mut fa, &shape, &fwd);
    transform_axes(&mut fb, &shape, &fwd);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    transform_axes(&mut fa, &shape, &inv);
    let norm = 1.0 / shape.iter().product::<usize>() as f64;
    LatticeFunction::from_fn(out_region.clone(), |p| {
        let mut flat = 0usize;
        for (axis, &x) in p.iter().enumerate() {
            flat = flat * shape[axis] + (x - out_region.lo()[axis]) as usize;
        }
        fa[flat] * norm
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in 1..=2 {
            let ra = BoxRegion::new(vec![-3; dim], vec![4; dim]).unwrap();
            let rb = BoxRegion::new(vec![2; dim], vec![6; dim]).unwrap();
            let a = LatticeFunction::from_fn(ra, |_| Complex64::new(rng.gen(), rng.gen()));
            let b = LatticeFunction::from_fn(rb, |_| Complex64::new(rng.gen(), rng.gen()));
            let c = fft_convolve(&a, &b);
            for (n, v) in c.iter() {
                let mut direct = Complex64::new(0.0, 0.0);
                for (x, av) in a.iter() {
                    let d: Vec<i64> = n.iter().zip(&x).map(|(p, q)| p - q).collect();
                    direct += av * b.get(&d);
                }
                assert!((direct - v).norm() < 1e-12);
            }
        }
    }
}
