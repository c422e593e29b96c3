use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::linalg::{gemm, norm2, DenseMatrix};
use crate::lsvd::{sample_structured_latent, LsvdModel, SigmaVariant};
use crate::nn::MlpNetwork;
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub m_bound: f64,
    pub empirical_max_ratio: f64,
    pub pairs: usize,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.empirical_max_ratio <= self.m_bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCoverageReport {
    pub epsilon_z: f64,
    pub samples: usize,
    /// Spectral-norm product bound of `dec_x`.
    pub m: f64,
    pub m_times_eps: f64,
}

fn lipschitz_product(net: &MlpNetwork, name: &str) -> Result<f64, AnalysisError> {
    if let Some(a) = net.activations().iter().find(|a| a.lipschitz() > 1.0) {
        return Err(AnalysisError::BoundInvalid(format!("{name} uses {a:?}, which is not 1-Lipschitz")));
    }
    Ok(net.weight_norm_product())
}

/// Compares the Lipschitz bound `σ_max(Σ)·∏‖W_enc_y‖·∏‖W_dec_x‖` with the
/// largest observed ratio `‖x̂₁ − x̂₂‖/‖y₁ − y₂‖`. Half of the pairs are two
/// distinct rows of `inputs`, the other half a row and a small random
/// perturbation of it.
pub fn stability_bound(model: &LsvdModel, inputs: &DenseMatrix, pairs: usize, seed: u64) -> Result<StabilityReport, AnalysisError> {
    let sigma_norm = match &model.sigma {
        SigmaVariant::Diagonal { .. } | SigmaVariant::Full { .. } => model.sigma.operator_norm().expect("linear Σ"),
        _ => return Err(AnalysisError::BoundInvalid("Σ must be diagonal or full".into())),
    };
    let m_bound = sigma_norm * lipschitz_product(&model.enc_y.net, "enc_y")? * lipschitz_product(&model.dec_x.net, "dec_x")?;
    if inputs.rows() == 0 {
        return Err(AnalysisError::Spec("no inputs for stability pairs".into()));
    }
    let n = inputs.cols();
    let mut rng = seeded(seed);
    let mut first = DenseMatrix::zeros(pairs, n);
    let mut second = DenseMatrix::zeros(pairs, n);
    for p in 0..pairs {
        let i = rng.random_range(0..inputs.rows());
        first.row_mut(p).copy_from_slice(inputs.row(i));
        if p % 2 == 0 && inputs.rows() > 1 {
            let mut j = rng.random_range(0..inputs.rows() - 1);
            if j >= i {
                j += 1;
            }
            second.row_mut(p).copy_from_slice(inputs.row(j));
        } else {
            let y = inputs.row(i);
            let eps = 1e-3 * norm2(y).max(1e-12) / (n as f64).sqrt();
            for (o, v) in second.row_mut(p).iter_mut().zip(y) {
                *o = v + eps * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let x1 = model.reconstruct_batch(&first)?;
    let x2 = model.reconstruct_batch(&second)?;
    let mut worst = 0.0_f64;
    for p in 0..pairs {
        let dy: f64 = first.row(p).iter().zip(second.row(p)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dy == 0.0 {
            continue;
        }
        let dx: f64 = x1.row(p).iter().zip(x2.row(p)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(dx / dy);
    }
    Ok(StabilityReport {
        m_bound,
        empirical_max_ratio: worst,
        pairs,
    })
}

/// Largest latent round-trip defect `‖z̃ − Σ(enc_y(A·dec_x(z̃)))‖` over
/// uniform samples from the unit ball.
pub fn ball_coverage_estimate(
    model: &LsvdModel,
    operator: &DenseMatrix,
    samples: usize,
    seed: u64,
) -> Result<BallCoverageReport, AnalysisError> {
    let z = sample_structured_latent(model.latent_dim(), 1.0, samples, seed)?;
    let x = model.dec_x.net.predict_batch(&z)?;
    let mut y = DenseMatrix::zeros(samples, operator.rows());
    gemm(1.0, &x, false, operator, true, 0.0, &mut y);
    let zy = model.enc_y.net.predict_batch(&y)?;
    let (f, _) = model.sigma.forward_batch(&zy)?;
    let eps = (0..samples)
        .map(|i| {
            z.row(i)
                .iter()
                .zip(f.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let lip: f64 = model.dec_x.net.activations().iter().map(|a| a.lipschitz()).product();
    let m = model.dec_x.net.weight_norm_product() * lip;
    Ok(BallCoverageReport {
        epsilon_z: eps,
        samples,
        m,
        m_times_eps: m * eps,
    })
}
