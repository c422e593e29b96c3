use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::linalg::{norm2, SvdFactorization, RANK_TOL};
use crate::nn::MlpNetwork;
use crate::rng::{derive_seed, seeded};

/// How the exact solution is built from the source element `w`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceCondition {
    /// `x† = A†A w`, the orthogonal projection of `w` onto `N(A)^⊥`.
    #[default]
    Projection,
    /// `x† = AᵀA w`.
    Normal,
}

/// Whether the rate is fitted to `‖x − x†‖²` or `‖x − x†‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    #[default]
    Squared,
    Norm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceRunSpec {
    /// Strictly decreasing positive noise norms.
    pub deltas: Vec<f64>,
    /// `α(δ) = alpha_scale · δ^alpha_exponent`.
    #[serde(default = "one")]
    pub alpha_scale: f64,
    #[serde(default = "two_thirds")]
    pub alpha_exponent: f64,
    /// Bound on `‖w‖²`; the random source element is scaled to meet it.
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub source: SourceCondition,
    #[serde(default)]
    pub measure: ErrorMeasure,
    pub trials: usize,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn two_thirds() -> f64 {
    2.0 / 3.0
}

impl ConvergenceRunSpec {
    pub fn alpha(&self, delta: f64) -> f64 {
        self.alpha_scale * delta.powf(self.alpha_exponent)
    }

    /// The power rule satisfies `α → 0` and `δ²/α → 0` iff the exponent lies
    /// in `(0, 2)`.
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.deltas.len() < 3 {
            return Err(AnalysisError::TooFewLevels(self.deltas.len()));
        }
        if self.deltas.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(AnalysisError::Spec("noise levels must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(AnalysisError::Spec("noise levels must be strictly decreasing".into()));
        }
        if !(self.alpha_exponent > 0.0 && self.alpha_exponent < 2.0) {
            return Err(AnalysisError::Spec(format!(
                "α = c·δ^p needs p in (0, 2) so that α → 0 and δ²/α → 0, got p = {}",
                self.alpha_exponent
            )));
        }
        if !(self.alpha_scale > 0.0) || !(self.rho > 0.0) {
            return Err(AnalysisError::Spec("alpha_scale and rho must be positive".into()));
        }
        if self.trials == 0 {
            return Err(AnalysisError::Spec("trials must be positive".into()));
        }
        Ok(())
    }
}

/// The latent scaling whose convergence is measured.
#[derive(Clone, Debug)]
pub enum ConvergenceScaling {
    /// `s / (s² + α)`.
    Classical,
    /// `s / (s² + α·𝒩(Uᵀy))` with `𝒩` mapping the full coefficient vector.
    Structured(MlpNetwork),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub alpha: f64,
    pub mean_error: f64,
    pub std_error: f64,
    /// Left out of the slope fit because the error saturated.
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub slope: f64,
    pub x_dagger_norm_sq: f64,
}

/// Least-squares slope of `ln e` against `ln δ`.
pub fn fit_log_slope(deltas: &[f64], errors: &[f64]) -> f64 {
    let n = deltas.len() as f64;
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn exact_solution(svd: &SvdFactorization, w: &[f64], source: SourceCondition) -> Vec<f64> {
    let cut = svd.s.first().copied().unwrap_or(0.0) * RANK_TOL;
    let mut c = svd.v.tr_matvec(w).expect("w has image dimension");
    for (ci, &s) in c.iter_mut().zip(&svd.s) {
        *ci *= match source {
            SourceCondition::Projection if s > cut => 1.0,
            SourceCondition::Normal => s * s,
            _ => 0.0,
        };
    }
    svd.v.matvec(&c).expect("latent has SVD width")
}

fn reconstruct(svd: &SvdFactorization, y: &[f64], alpha: f64, scaling: &ConvergenceScaling) -> Result<Vec<f64>, AnalysisError> {
    let cut = svd.s.first().copied().unwrap_or(0.0) * RANK_TOL;
    let mut c = svd.project_data(y);
    let noise = match scaling {
        ConvergenceScaling::Classical => None,
        ConvergenceScaling::Structured(net) => Some(net.predict(&c)?),
    };
    for (i, (ci, &s)) in c.iter_mut().zip(&svd.s).enumerate() {
        let n = noise.as_ref().map_or(1.0, |v| v[i]);
        *ci *= if s > cut { s / (s * s + alpha * n) } else { 0.0 };
    }
    Ok(svd.lift_latent(&c))
}

/// Mean and standard deviation of the error over `trials` noise vectors of
/// norm exactly `delta`. `delta = 0` gives the pure bias.
#[allow(clippy::too_many_arguments)]
pub fn tikhonov_level_error(
    svd: &SvdFactorization,
    x_dagger: &[f64],
    delta: f64,
    alpha: f64,
    trials: usize,
    seed: u64,
    scaling: &ConvergenceScaling,
    measure: ErrorMeasure,
) -> Result<(f64, f64), AnalysisError> {
    let y: Vec<f64> = {
        let c: Vec<f64> = svd.v.tr_matvec(x_dagger)?.iter().zip(&svd.s).map(|(c, s)| c * s).collect();
        svd.u.matvec(&c)?
    };
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, t as u64));
            let e: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = norm2(&e);
            let yd: Vec<f64> = y
                .iter()
                .zip(&e)
                .map(|(yi, ei)| yi + delta * ei / norm)
                .collect();
            let x = reconstruct(svd, &yd, alpha, scaling)?;
            let sq: f64 = x.iter().zip(x_dagger).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(match measure {
                ErrorMeasure::Squared => sq,
                ErrorMeasure::Norm => sq.sqrt(),
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, var.sqrt()))
}

/// Runs every noise level and fits the log-log slope. The largest level is
/// left out of the fit when its error has saturated at half of the
/// corresponding `‖x†‖` measure or more, since the rate is asymptotic.
pub fn convergence_rate_experiment(
    svd: &SvdFactorization,
    spec: &ConvergenceRunSpec,
    scaling: &ConvergenceScaling,
) -> Result<ConvergenceReport, AnalysisError> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let m = svd.v.rows();
    let mut w: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let scale = spec.rho.sqrt() / norm2(&w);
    w.iter_mut().for_each(|v| *v *= scale);
    let x_dagger = exact_solution(svd, &w, spec.source);
    let xd_sq: f64 = x_dagger.iter().map(|v| v * v).sum();
    let saturation = 0.5
        * match spec.measure {
            ErrorMeasure::Squared => xd_sq,
            ErrorMeasure::Norm => xd_sq.sqrt(),
        };

    let mut rows = Vec::with_capacity(spec.deltas.len());
    for (i, &delta) in spec.deltas.iter().enumerate() {
        let alpha = spec.alpha(delta);
        let (mean, std) = tikhonov_level_error(
            svd,
            &x_dagger,
            delta,
            alpha,
            spec.trials,
            derive_seed(spec.seed, 1 + i as u64),
            scaling,
            spec.measure,
        )?;
        rows.push(ConvergenceRow {
            delta,
            alpha,
            mean_error: mean,
            std_error: std,
            excluded: i == 0 && mean >= saturation,
        });
    }
    let kept: Vec<&ConvergenceRow> = rows.iter().filter(|r| !r.excluded).collect();
    let slope = fit_log_slope(
        &kept.iter().map(|r| r.delta).collect::<Vec<_>>(),
        &kept.iter().map(|r| r.mean_error).collect::<Vec<_>>(),
    );
    Ok(ConvergenceReport {
        rows,
        slope,
        x_dagger_norm_sq: xd_sq,
    })
}

impl ConvergenceReport {
    /// `delta,alpha,mean_error,std_error` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,alpha,mean_error,std_error\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{:e},{:e},{:e}\n", r.delta, r.alpha, r.mean_error, r.std_error));
        }
        s
    }
}
