use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ImageSignal;
use crate::rng::{derive_seed, seeded};

/// Random-ellipse phantom parameters, in units of the half side length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomRule {
    pub min_ellipses: usize,
    pub max_ellipses: usize,
    /// Ellipse centres are drawn uniformly in the disk of this radius.
    pub centre_radius: f64,
    pub min_axis: f64,
    pub max_axis: f64,
    pub min_intensity: f64,
    pub max_intensity: f64,
}

impl Default for PhantomRule {
    fn default() -> Self {
        Self {
            min_ellipses: 1,
            max_ellipses: 4,
            centre_radius: 0.55,
            min_axis: 0.1,
            max_axis: 0.45,
            min_intensity: 0.3,
            max_intensity: 1.0,
        }
    }
}

/// Each phantom is the pointwise maximum of 1–4 filled ellipses, sampled at
/// pixel centres. Phantom `i` depends only on `(seed, i)`.
pub fn generate_phantoms(count: usize, side: usize, rule: &PhantomRule, seed: u64) -> Vec<ImageSignal> {
    assert!(side >= 8, "phantoms need side >= 8");
    (0..count)
        .map(|i| phantom(side, rule, derive_seed(seed, i as u64)))
        .collect()
}

fn phantom(side: usize, rule: &PhantomRule, seed: u64) -> ImageSignal {
    let mut rng = seeded(seed);
    let count = rng.random_range(rule.min_ellipses..=rule.max_ellipses);
    let h = side as f64 / 2.0;
    let ellipses: Vec<_> = (0..count)
        .map(|_| {
            let r = rule.centre_radius * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let a = rng.random_range(rule.min_axis..=rule.max_axis);
            let b = rng.random_range(rule.min_axis..=rule.max_axis);
            let theta = rng.random_range(0.0..std::f64::consts::PI);
            let value = rng.random_range(rule.min_intensity..=rule.max_intensity);
            (r * phi.cos(), r * phi.sin(), a, b, theta.cos(), theta.sin(), value)
        })
        .collect();
    let mut pixels = vec![0.0; side * side];
    for row in 0..side {
        for col in 0..side {
            let x = (col as f64 + 0.5 - h) / h;
            let y = (h - row as f64 - 0.5) / h;
            for &(cx, cy, a, b, c, s, v) in &ellipses {
                let (dx, dy) = (x - cx, y - cy);
                let u = (dx * c + dy * s) / a;
                let w = (-dx * s + dy * c) / b;
                if u * u + w * w <= 1.0 {
                    let p = &mut pixels[row * side + col];
                    *p = f64::max(*p, v);
                }
            }
        }
    }
    ImageSignal { side, pixels }.clamped()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let rule = PhantomRule::default();
        let a = generate_phantoms(20, 16, &rule, 5);
        assert_eq!(a, generate_phantoms(20, 16, &rule, 5));
        assert_ne!(a, generate_phantoms(20, 16, &rule, 6));
        assert!(a.iter().flat_map(|p| &p.pixels).all(|&v| (0.0..=1.0).contains(&v)));
        // Prefix stability: the first phantoms do not depend on the count.
        assert_eq!(a[..5], generate_phantoms(5, 16, &rule, 5)[..]);
    }

    #[test]
    fn support_fraction_in_range() {
        let imgs = generate_phantoms(1000, 32, &PhantomRule::default(), 11);
        let mean = imgs
            .iter()
            .map(|p| p.pixels.iter().filter(|&&v| v > 0.0).count() as f64 / p.pixels.len() as f64)
            .sum::<f64>()
            / 1000.0;
        assert!((0.05..=0.5).contains(&mean), "{mean}");
        let max_intensity = imgs.iter().flat_map(|p| &p.pixels).fold(0.0_f64, |m, &v| m.max(v));
        assert!(max_intensity <= 1.0 && max_intensity >= 0.9);
    }
}
