use serde::{Deserialize, Serialize};

use crate::nn::{DEFAULT_C_MAX, DEFAULT_C_MIN};

/// Grid for the residual bound `λ^μ·α𝒩/(λ + α𝒩) ≤ max(1, C_max)·α^μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixBGrid {
    /// `‖A‖²`; λ runs log-spaced over `(λ_max·1e-8, λ_max]`.
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// μ runs over `i/mu_points`, `i = 1..=mu_points`.
    pub mu_points: usize,
    pub alphas: Vec<f64>,
    pub noise_points: usize,
    pub c_min: f64,
    pub c_max: f64,
}

impl AppendixBGrid {
    /// 100 λ × 20 μ × 20 α × 5 𝒩 values with the default bounds.
    pub fn dense(lambda_max: f64) -> Self {
        let alphas = (0..20).map(|i| 10f64.powf(-6.0 + 6.0 * i as f64 / 19.0)).collect();
        Self {
            lambda_max,
            lambda_points: 100,
            mu_points: 20,
            alphas,
            noise_points: 5,
            c_min: DEFAULT_C_MIN,
            c_max: DEFAULT_C_MAX,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixBReport {
    pub points: usize,
    /// Smallest `rhs − lhs` over the grid.
    pub worst_slack: f64,
    pub passed: bool,
}

fn lhs(lambda: f64, mu: f64, alpha: f64, n: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    lambda.powf(mu) * alpha * n / (lambda + alpha * n)
}

fn rhs(mu: f64, alpha: f64, c_max: f64) -> f64 {
    c_max.max(1.0) * alpha.powf(mu)
}

pub fn appendix_b_inequality_check(grid: &AppendixBGrid) -> AppendixBReport {
    let lambdas: Vec<f64> = (0..grid.lambda_points)
        .map(|i| {
            let t = (i + 1) as f64 / grid.lambda_points as f64;
            grid.lambda_max * 10f64.powf(-8.0 * (1.0 - t))
        })
        .collect();
    let noise: Vec<f64> = (0..grid.noise_points)
        .map(|i| {
            if grid.noise_points == 1 {
                grid.c_max
            } else {
                grid.c_min + (grid.c_max - grid.c_min) * i as f64 / (grid.noise_points - 1) as f64
            }
        })
        .collect();
    let mut worst = f64::INFINITY;
    let mut points = 0;
    for &lambda in &lambdas {
        for j in 1..=grid.mu_points {
            let mu = j as f64 / grid.mu_points as f64;
            for &alpha in &grid.alphas {
                let r = rhs(mu, alpha, grid.c_max);
                for &n in &noise {
                    worst = worst.min(r - lhs(lambda, mu, alpha, n));
                    points += 1;
                }
            }
        }
    }
    AppendixBReport {
        points,
        worst_slack: worst,
        passed: worst >= 0.0,
    }
}
