use super::ImageSignal;

const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_sides(a: &ImageSignal, b: &ImageSignal) {
    assert_eq!(a.side, b.side, "metric inputs must share a side length");
}

pub fn metric_mse(a: &ImageSignal, b: &ImageSignal) -> f64 {
    check_sides(a, b);
    a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.pixels.len() as f64
}

/// Peak 1.0; identical images give `+∞`.
pub fn metric_psnr(a: &ImageSignal, b: &ImageSignal) -> f64 {
    let mse = metric_mse(a, b);
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Gaussian window width: 11, or the largest odd size fitting the image.
pub fn ssim_window(side: usize) -> usize {
    let w = 11.min(side);
    if w % 2 == 0 {
        w - 1
    } else {
        w
    }
}

fn gaussian_kernel(width: usize) -> Vec<f64> {
    let c = (width / 2) as f64;
    let k: Vec<f64> = (0..width)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `n × n` image.
fn filter_valid(img: &[f64], n: usize, k: &[f64]) -> Vec<f64> {
    let w = k.len();
    let out = n - w + 1;
    let mut rows = vec![0.0; n * out];
    for r in 0..n {
        for c in 0..out {
            rows[r * out + c] = (0..w).map(|j| k[j] * img[r * n + c + j]).sum();
        }
    }
    let mut res = vec![0.0; out * out];
    for r in 0..out {
        for c in 0..out {
            res[r * out + c] = (0..w).map(|i| k[i] * rows[(r + i) * out + c]).sum();
        }
    }
    res
}

/// Mean local SSIM over all fully contained Gaussian windows (σ = 1.5,
/// `K₁ = 0.01`, `K₂ = 0.03`, data range 1).
pub fn metric_ssim(a: &ImageSignal, b: &ImageSignal) -> f64 {
    check_sides(a, b);
    let n = a.side;
    let k = gaussian_kernel(ssim_window(n));
    let sq = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(&a.pixels, n, &k);
    let mu_b = filter_valid(&b.pixels, n, &k);
    let e_aa = filter_valid(&sq(&a.pixels, &a.pixels), n, &k);
    let e_bb = filter_valid(&sq(&b.pixels, &b.pixels), n, &k);
    let e_ab = filter_valid(&sq(&a.pixels, &b.pixels), n, &k);
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total / mu_a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn random_image(side: usize, seed: u64) -> ImageSignal {
        let mut rng = seeded(seed);
        ImageSignal::new(side, (0..side * side).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    /// Direct windowed sums with explicit 2-D weights and centred moments.
    fn ssim_direct(a: &ImageSignal, b: &ImageSignal) -> f64 {
        let n = a.side;
        let w = ssim_window(n);
        let half = (w / 2) as f64;
        let mut weights = vec![vec![0.0; w]; w];
        let mut total_w = 0.0;
        for (i, row) in weights.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let d2 = (i as f64 - half).powi(2) + (j as f64 - half).powi(2);
                *v = (-d2 / 4.5).exp();
                total_w += *v;
            }
        }
        let mut acc = 0.0;
        let mut count = 0;
        for r in 0..=n - w {
            for c in 0..=n - w {
                let mut ma = 0.0;
                let mut mb = 0.0;
                for i in 0..w {
                    for j in 0..w {
                        let g = weights[i][j] / total_w;
                        ma += g * a.get(r + i, c + j);
                        mb += g * b.get(r + i, c + j);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..w {
                    for j in 0..w {
                        let g = weights[i][j] / total_w;
                        let da = a.get(r + i, c + j) - ma;
                        let db = b.get(r + i, c + j) - mb;
                        va += g * da * da;
                        vb += g * db * db;
                        cov += g * da * db;
                    }
                }
                let l = (2.0 * ma * mb + 1e-4) / (ma * ma + mb * mb + 1e-4);
                let cs = (2.0 * cov + 9e-4) / (va + vb + 9e-4);
                acc += l * cs;
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn identical_images() {
        let a = random_image(16, 1);
        assert_eq!(metric_mse(&a, &a), 0.0);
        assert_eq!(metric_psnr(&a, &a), f64::INFINITY);
        assert!((metric_ssim(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset() {
        let a = ImageSignal::constant(8, 0.5);
        let b = ImageSignal::constant(8, 0.4);
        assert!((metric_mse(&a, &b) - 0.01).abs() < 1e-15);
        assert!((metric_psnr(&a, &b) - 20.0).abs() < 1e-10);
    }

    #[test]
    fn ssim_matches_direct_windowed_sums() {
        let a = random_image(24, 13);
        let b = random_image(24, 113);
        assert!((metric_ssim(&a, &b) - ssim_direct(&a, &b)).abs() < 1e-10);
        let c = random_image(8, 14);
        let d = random_image(8, 114);
        assert_eq!(ssim_window(8), 7);
        assert!((metric_ssim(&c, &d) - ssim_direct(&c, &d)).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn metric_properties(seed in 0u64..10_000, side in 11usize..20) {
            let a = random_image(side, seed);
            let b = random_image(side, seed + 50_000);
            let mse = metric_mse(&a, &b);
            prop_assert_eq!(metric_psnr(&a, &b), -10.0 * mse.log10());
            let s_ab = metric_ssim(&a, &b);
            prop_assert!((s_ab - metric_ssim(&b, &a)).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&s_ab));
        }
    }
}
