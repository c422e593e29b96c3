use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{batch_loss, Batch, LatentTerms, ModelGradients};
use super::{sample_structured_latent, LossBreakdown, LossWeights, LsvdError, LsvdModel, SigmaGradients, SigmaVariant};
use crate::data::Sample;
use crate::linalg::DenseMatrix;
use crate::nn::{AdamState, LrSchedule, NetworkGradients, ParamBlock};
use crate::rng::{derive_seed, seeded};

/// Salt separating the latent-sampling stream from the shuffling stream.
const LATENT_STREAM: u64 = 0x4c41_5445_4e54;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub start_lr: f64,
    pub final_lr: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    pub seed: u64,
    /// Data autoencoder targets the clean sinogram when set.
    #[serde(default = "default_true")]
    pub denoising: bool,
    #[serde(default)]
    pub weights: LossWeights,
    /// Radius of the latent ball for the structured-latent terms.
    #[serde(default = "default_radius")]
    pub latent_radius: f64,
    /// Latent samples per step; 0 means one per batch sample.
    #[serde(default)]
    pub latent_samples: usize,
}

fn default_clip() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}
fn default_radius() -> f64 {
    1.0
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 100,
            start_lr: 1e-3,
            final_lr: 2e-4,
            clip_norm: 10.0,
            seed: 0,
            denoising: true,
            weights: LossWeights::default(),
            latent_radius: 1.0,
            latent_samples: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), LsvdError> {
        self.weights.validate()?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(LsvdError::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(LsvdError::Config(format!("clip_norm must be positive, got {}", self.clip_norm)));
        }
        LrSchedule::new(self.start_lr, self.final_lr, 1)?;
        Ok(())
    }
}

/// Which image estimate a model is judged by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// `dec_x(Σ(enc_y(y)))`.
    Sigma,
    /// `dec_x(enc_x(x))`, for image-autoencoder baselines.
    ImageAutoencoder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_mse: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub steps: u64,
}

impl TrainingHistory {
    pub fn first(&self) -> Option<&EpochRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

fn stack(samples: &[&Sample], f: impl Fn(&Sample) -> &[f64]) -> DenseMatrix {
    let cols = samples.first().map_or(0, |s| f(s).len());
    let mut m = DenseMatrix::zeros(samples.len(), cols);
    for (i, s) in samples.iter().enumerate() {
        m.row_mut(i).copy_from_slice(f(s));
    }
    m
}

fn make_batch(samples: &[&Sample], denoising: bool, force_paired: bool) -> Batch {
    Batch {
        y_in: stack(samples, |s| &s.y_noisy),
        y_target: stack(samples, |s| if denoising { &s.y_clean } else { &s.y_noisy }),
        x: stack(samples, |s| &s.x),
        paired: samples.iter().map(|s| force_paired || s.paired).collect(),
    }
}

fn check_samples(model: &LsvdModel, samples: &[Sample]) -> Result<(), LsvdError> {
    for s in samples {
        if s.y_noisy.len() != model.data_dim() || s.y_clean.len() != model.data_dim() {
            return Err(LsvdError::Shape {
                what: "sample sinogram",
                expected: model.data_dim(),
                got: s.y_noisy.len(),
            });
        }
        if s.x.len() != model.image_dim() {
            return Err(LsvdError::Shape {
                what: "sample image",
                expected: model.image_dim(),
                got: s.x.len(),
            });
        }
    }
    Ok(())
}

const EVAL_CHUNK: usize = 256;

/// Mean per-sample reconstruction MSE of the chosen output.
pub fn evaluate_mse(model: &LsvdModel, samples: &[Sample], output: Output) -> Result<f64, LsvdError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in samples.chunks(EVAL_CHUNK) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let pred = match output {
            Output::Sigma => model.reconstruct_batch(&stack(&refs, |s| &s.y_noisy))?,
            Output::ImageAutoencoder => model.autoencode_images(&stack(&refs, |s| &s.x))?,
        };
        for (i, s) in chunk.iter().enumerate() {
            total += pred.row(i).iter().zip(&s.x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / s.x.len() as f64;
        }
    }
    Ok(total / samples.len() as f64)
}

/// Loss over a sample set with every sample treated as paired and no
/// structured-latent terms.
fn evaluate_loss(model: &LsvdModel, samples: &[Sample], cfg: &TrainingConfig) -> Result<f64, LsvdError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in samples.chunks(EVAL_CHUNK) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let (l, _) = batch_loss(model, &make_batch(&refs, cfg.denoising, true), &cfg.weights, None, false)?;
        total += l.total * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

fn or_zeros(g: Option<NetworkGradients>, net: &crate::nn::MlpNetwork) -> NetworkGradients {
    g.unwrap_or_else(|| NetworkGradients::zeros_like(net))
}

/// Applies one Adam step to every trainable component. Components that
/// received no gradient this step get an explicit zero so the optimiser
/// layout never changes.
fn apply_step(
    model: &mut LsvdModel,
    grads: ModelGradients,
    adam: &mut AdamState,
    lr: f64,
    clip: f64,
) -> Result<(), LsvdError> {
    let g_ey = (!model.enc_y.frozen).then(|| or_zeros(grads.enc_y, &model.enc_y.net));
    let g_dy = (!model.dec_y.frozen).then(|| or_zeros(grads.dec_y, &model.dec_y.net));
    let g_ex = (!model.enc_x.frozen).then(|| or_zeros(grads.enc_x, &model.enc_x.net));
    let g_dx = (!model.dec_x.frozen).then(|| or_zeros(grads.dec_x, &model.dec_x.net));
    let g_s = (!model.sigma_frozen).then(|| {
        grads.sigma.unwrap_or_else(|| match &model.sigma {
            SigmaVariant::Diagonal { scales } => SigmaGradients::Diagonal(vec![0.0; scales.len()]),
            SigmaVariant::Full { matrix } => SigmaGradients::Full(DenseMatrix::zeros(matrix.rows(), matrix.cols())),
            SigmaVariant::TikhonovStructured { net, .. } | SigmaVariant::NoiseAware { net } => {
                SigmaGradients::Net(NetworkGradients::zeros_like(net))
            }
        })
    });

    let mut blocks: Vec<ParamBlock<'_>> = Vec::new();
    for (branch, g, name) in [
        (&mut model.enc_y, &g_ey, "enc_y"),
        (&mut model.dec_y, &g_dy, "dec_y"),
        (&mut model.enc_x, &g_ex, "enc_x"),
        (&mut model.dec_x, &g_dx, "dec_x"),
    ] {
        if let Some(g) = g {
            blocks.extend(branch.net.param_blocks(name, g));
        }
    }
    if let Some(gs) = &g_s {
        match (&mut model.sigma, gs) {
            (SigmaVariant::Diagonal { scales }, SigmaGradients::Diagonal(g)) => blocks.push(ParamBlock {
                name: "sigma.scales".into(),
                values: scales.as_mut_slice(),
                grad: g.as_slice(),
            }),
            (SigmaVariant::Full { matrix }, SigmaGradients::Full(g)) => blocks.push(ParamBlock {
                name: "sigma.matrix".into(),
                values: matrix.data_mut(),
                grad: g.data(),
            }),
            (SigmaVariant::TikhonovStructured { net, .. } | SigmaVariant::NoiseAware { net }, SigmaGradients::Net(g)) => {
                blocks.extend(net.param_blocks("sigma", g))
            }
            _ => unreachable!("gradient kind follows the Σ variant"),
        }
    }
    if !blocks.is_empty() {
        adam.step(&mut blocks, lr, clip)?;
    }
    Ok(())
}

/// Minibatch Adam over all trainable components with a geometric learning
/// rate decay. Sample order is reshuffled every epoch from
/// `derive_seed(cfg.seed, epoch)`, so a run is fully determined by the
/// configuration and the data.
pub fn train_lsvd(
    model: &mut LsvdModel,
    train: &[Sample],
    test: &[Sample],
    cfg: &TrainingConfig,
    operator: Option<&DenseMatrix>,
    output: Output,
) -> Result<TrainingHistory, LsvdError> {
    cfg.validate()?;
    model.validate()?;
    if train.is_empty() {
        return Err(LsvdError::Config("empty training set".into()));
    }
    check_samples(model, train)?;
    check_samples(model, test)?;
    if let Some(op) = operator {
        if op.shape() != (model.data_dim(), model.image_dim()) {
            return Err(LsvdError::Shape {
                what: "operator rows",
                expected: model.data_dim(),
                got: op.rows(),
            });
        }
    }
    let use_latent = cfg.weights.alpha_latent_ae > 0.0 || cfg.weights.alpha_latent_sigma > 0.0;

    let batches_per_epoch = train.len().div_ceil(cfg.batch_size);
    let schedule = LrSchedule::new(cfg.start_lr, cfg.final_lr, (cfg.epochs * batches_per_epoch) as u64)?;
    let mut adam = AdamState::new();
    let mut history = TrainingHistory::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seeded(derive_seed(cfg.seed, epoch as u64)));
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
            let batch = make_batch(&refs, cfg.denoising, false);
            let step = adam.step_count();
            let z = if use_latent {
                let count = if cfg.latent_samples == 0 { refs.len() } else { cfg.latent_samples };
                Some(sample_structured_latent(
                    model.latent_dim(),
                    cfg.latent_radius,
                    count,
                    derive_seed(cfg.seed ^ LATENT_STREAM, step),
                )?)
            } else {
                None
            };
            let lat = z.as_ref().map(|z| LatentTerms { z, operator });
            let (loss, grads) = batch_loss(model, &batch, &cfg.weights, lat.as_ref(), true)?;
            if !loss.is_finite() {
                return Err(LsvdError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    terms: loss,
                });
            }
            epoch_loss += loss.total;
            apply_step(model, grads, &mut adam, schedule.lr(step), cfg.clip_norm)?;
        }
        history.records.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: epoch_loss / batches_per_epoch as f64,
            test_loss: evaluate_loss(model, test, cfg)?,
            test_mse: evaluate_mse(model, test, output)?,
        });
    }
    history.steps = adam.step_count();
    Ok(history)
}

/// Loss terms of a sample set with paired flags honoured.
pub fn loss_breakdown(model: &LsvdModel, samples: &[Sample], cfg: &TrainingConfig) -> Result<LossBreakdown, LsvdError> {
    let refs: Vec<&Sample> = samples.iter().collect();
    Ok(batch_loss(model, &make_batch(&refs, cfg.denoising, false), &cfg.weights, None, false)?.0)
}
