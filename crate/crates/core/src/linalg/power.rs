use super::matrix::{norm2, DenseMatrix};
use crate::rng::seeded;
use rand_distr::{Distribution, StandardNormal};

const MAX_ITERS: usize = 20_000;

/// Largest singular value by power iteration on `AᵀA`.
///
/// Iterates until the Rayleigh estimate `‖A v‖` changes by less than
/// `tol · 1e-2` relatively between steps. The zero matrix yields 0.
pub fn spectral_norm(a: &DenseMatrix, tol: f64) -> f64 {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let mut rng = seeded(0x5eed_5eed);
    let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut estimate = 0.0_f64;
    for _ in 0..MAX_ITERS {
        let av = a.matvec(&v).expect("shape checked");
        let sigma = norm2(&av);
        if sigma == 0.0 {
            // Start vector fell into the null space; perturb deterministically.
            v.iter_mut().enumerate().for_each(|(i, x)| *x += 1.0 / (i + 1) as f64);
            let n = norm2(&v);
            v.iter_mut().for_each(|x| *x /= n);
            continue;
        }
        let mut w = a.tr_matvec(&av).expect("shape checked");
        let wn = norm2(&w);
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        let done = (sigma - estimate).abs() <= tol * 1e-2 * sigma;
        estimate = sigma;
        if done {
            break;
        }
    }
    // Final Rayleigh quotient with the converged vector.
    norm2(&a.matvec(&v).expect("shape checked")).max(estimate)
}
