use rand::Rng as _;
use rand_distr::StandardNormal;

use super::LsvdError;
use crate::linalg::DenseMatrix;
use crate::rng::seeded;

/// `count` points drawn uniformly from the closed `k`-ball of the given
/// radius, one per row: a normalised Gaussian direction scaled by
/// `radius·u^{1/k}`.
pub fn sample_structured_latent(k: usize, radius: f64, count: usize, seed: u64) -> Result<DenseMatrix, LsvdError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(LsvdError::Config(format!("latent radius must be positive, got {radius}")));
    }
    if k == 0 {
        return Err(LsvdError::Config("latent dimension must be positive".into()));
    }
    let mut rng = seeded(seed);
    let mut out = DenseMatrix::zeros(count, k);
    for i in 0..count {
        let row = out.row_mut(i);
        let norm = loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                break n;
            }
        };
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / k as f64);
        for v in row.iter_mut() {
            *v *= r / norm;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(z: &DenseMatrix) -> Vec<f64> {
        (0..z.rows()).map(|i| crate::linalg::norm2(z.row(i))).collect()
    }

    #[test]
    fn samples_stay_in_ball() {
        let z = sample_structured_latent(7, 2.5, 2000, 1).unwrap();
        assert!(norms(&z).iter().all(|&n| n <= 2.5 * (1.0 + 1e-12)));
    }

    #[test]
    fn one_dimensional_samples_are_uniform() {
        let r = 1.5;
        let z = sample_structured_latent(1, r, 100_000, 2).unwrap();
        let mut v = z.into_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        // Kolmogorov-Smirnov distance to U[-r, r].
        let ks = v
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x + r) / (2.0 * r);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn radius_law_matches_uniform_ball() {
        // For the uniform k-ball, (‖z‖/r)^k is U(0,1).
        for k in [2usize, 5, 16] {
            let r = 3.0;
            let z = sample_structured_latent(k, r, 20_000, 3 + k as u64).unwrap();
            let mut t: Vec<f64> = norms(&z).iter().map(|n| (n / r).powi(k as i32)).collect();
            t.sort_by(f64::total_cmp);
            for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
                let emp = t[(q * t.len() as f64) as usize];
                assert!((emp - q).abs() < 0.02, "k={k}, q={q}: {emp}");
            }
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            assert!((mean - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(sample_structured_latent(3, 0.0, 1, 0).is_err());
        assert!(sample_structured_latent(3, f64::NAN, 1, 0).is_err());
    }
}
