use serde::{Deserialize, Serialize};

use super::{LsvdError, SigmaVariant};
use crate::linalg::{DenseMatrix, SvdFactorization};
use crate::nn::{geometric_widths, init_network_with_std, stack_activations, Activation, MlpNetwork, INIT_STD};

/// A sub-network together with its trainability.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub net: MlpNetwork,
    pub frozen: bool,
}

impl Branch {
    pub fn trainable(net: MlpNetwork) -> Self {
        Self { net, frozen: false }
    }

    pub fn frozen(net: MlpNetwork) -> Self {
        Self { net, frozen: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsvdModel {
    pub enc_y: Branch,
    pub dec_y: Branch,
    pub enc_x: Branch,
    pub dec_x: Branch,
    pub sigma: SigmaVariant,
    pub sigma_frozen: bool,
}

/// Shape of one encoder/decoder pair. The decoder mirrors the encoder widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchArchitecture {
    pub layers: usize,
    /// Activation after every layer but the last, which is linear.
    pub activation: Activation,
    #[serde(default)]
    pub bias: bool,
    /// Standard deviation of the Gaussian weight initialisation.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

fn default_init_std() -> f64 {
    INIT_STD
}

impl BranchArchitecture {
    pub fn linear() -> Self {
        Self {
            layers: 1,
            activation: Activation::Linear,
            bias: false,
            init_std: INIT_STD,
        }
    }

    fn build(&self, input: usize, output: usize, seed: u64) -> Result<MlpNetwork, LsvdError> {
        let dims = geometric_widths(input, output, self.layers);
        let acts = stack_activations(self.layers, self.activation, Activation::Linear);
        Ok(init_network_with_std(&dims, &acts, self.bias, seed, self.init_std)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsvdArchitecture {
    pub data_dim: usize,
    pub image_dim: usize,
    pub latent_dim: usize,
    pub y_branch: BranchArchitecture,
    pub x_branch: BranchArchitecture,
}

/// Per-sample intermediate values of one forward pass. The autoencoder
/// outputs on the image side are present only when `x` was supplied.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingBatchOutputs {
    pub z_y: Vec<f64>,
    pub y_hat_ae: Vec<f64>,
    pub z_x_sigma: Vec<f64>,
    pub x_hat_sigma: Vec<f64>,
    pub z_x_ae: Option<Vec<f64>>,
    pub x_hat_ae: Option<Vec<f64>>,
}

impl LsvdModel {
    /// Frozen SVD encoders/decoders `U_kᵀ`, `U_k`, `V_kᵀ`, `V_k` around a
    /// given Σ; `k` is the dimension of `sigma`.
    pub fn from_svd(svd: &SvdFactorization, sigma: SigmaVariant) -> Result<Self, LsvdError> {
        let k = sigma.dim();
        if k == 0 || k > svd.s.len() {
            return Err(LsvdError::Model(format!(
                "latent dimension {k} outside 1..={}",
                svd.s.len()
            )));
        }
        let u = svd.u.leading_columns(k);
        let v = svd.v.leading_columns(k);
        Self::assemble(
            Branch::frozen(MlpNetwork::linear(u.transpose())),
            Branch::frozen(MlpNetwork::linear(u)),
            Branch::frozen(MlpNetwork::linear(v.transpose())),
            Branch::frozen(MlpNetwork::linear(v)),
            sigma,
            false,
        )
    }

    /// Freshly initialised trainable encoders and decoders.
    pub fn learned(arch: &LsvdArchitecture, sigma: SigmaVariant, seed: u64) -> Result<Self, LsvdError> {
        let k = arch.latent_dim;
        let s = |i| crate::rng::derive_seed(seed, i);
        Self::assemble(
            Branch::trainable(arch.y_branch.build(arch.data_dim, k, s(0))?),
            Branch::trainable(arch.y_branch.build(k, arch.data_dim, s(1))?),
            Branch::trainable(arch.x_branch.build(arch.image_dim, k, s(2))?),
            Branch::trainable(arch.x_branch.build(k, arch.image_dim, s(3))?),
            sigma,
            false,
        )
    }

    pub fn assemble(
        enc_y: Branch,
        dec_y: Branch,
        enc_x: Branch,
        dec_x: Branch,
        sigma: SigmaVariant,
        sigma_frozen: bool,
    ) -> Result<Self, LsvdError> {
        let model = Self {
            enc_y,
            dec_y,
            enc_x,
            dec_x,
            sigma,
            sigma_frozen,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), LsvdError> {
        self.sigma.validate()?;
        let k = self.latent_dim();
        let check = |what: &'static str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(LsvdError::Shape { what, expected, got })
            }
        };
        check("Σ dimension", k, self.sigma.dim())?;
        check("dec_x input", k, self.dec_x.net.in_dim())?;
        check("enc_x output", k, self.enc_x.net.out_dim())?;
        check("dec_y input", k, self.dec_y.net.in_dim())?;
        check("dec_y output", self.data_dim(), self.dec_y.net.out_dim())?;
        check("enc_x input", self.image_dim(), self.enc_x.net.in_dim())
    }

    pub fn latent_dim(&self) -> usize {
        self.enc_y.net.out_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.enc_y.net.in_dim()
    }

    pub fn image_dim(&self) -> usize {
        self.dec_x.net.out_dim()
    }

    /// Number of parameters that training may change.
    pub fn trainable_params(&self) -> usize {
        [&self.enc_y, &self.dec_y, &self.enc_x, &self.dec_x]
            .iter()
            .filter(|b| !b.frozen)
            .map(|b| b.net.param_count())
            .sum::<usize>()
            + if self.sigma_frozen { 0 } else { self.sigma.param_count() }
    }

    pub fn forward(&self, y_noisy: &[f64], x: Option<&[f64]>) -> Result<TrainingBatchOutputs, LsvdError> {
        let n = self.data_dim();
        if y_noisy.len() != n {
            return Err(LsvdError::Shape {
                what: "sinogram",
                expected: n,
                got: y_noisy.len(),
            });
        }
        let z_y = self.enc_y.net.predict(y_noisy)?;
        let y_hat_ae = self.dec_y.net.predict(&z_y)?;
        let z_row = DenseMatrix::from_vec(1, z_y.len(), z_y.clone()).map_err(|_| crate::nn::NnError::NonFiniteInput)?;
        let z_x_sigma = self.sigma.forward_batch(&z_row)?.0.into_vec();
        let x_hat_sigma = self.dec_x.net.predict(&z_x_sigma)?;
        let (z_x_ae, x_hat_ae) = match x {
            Some(x) => {
                if x.len() != self.image_dim() {
                    return Err(LsvdError::Shape {
                        what: "image",
                        expected: self.image_dim(),
                        got: x.len(),
                    });
                }
                let z = self.enc_x.net.predict(x)?;
                let xh = self.dec_x.net.predict(&z)?;
                (Some(z), Some(xh))
            }
            None => (None, None),
        };
        Ok(TrainingBatchOutputs {
            z_y,
            y_hat_ae,
            z_x_sigma,
            x_hat_sigma,
            z_x_ae,
            x_hat_ae,
        })
    }

    /// `dec_x(Σ(enc_y(y)))` for each row of `ys`.
    pub fn reconstruct_batch(&self, ys: &DenseMatrix) -> Result<DenseMatrix, LsvdError> {
        if ys.cols() != self.data_dim() {
            return Err(LsvdError::Shape {
                what: "sinogram",
                expected: self.data_dim(),
                got: ys.cols(),
            });
        }
        let z = self.enc_y.net.predict_batch(ys)?;
        let (zs, _) = self.sigma.forward_batch(&z)?;
        Ok(self.dec_x.net.predict_batch(&zs)?)
    }

    pub fn reconstruct(&self, y_noisy: &[f64]) -> Result<Vec<f64>, LsvdError> {
        let ys = DenseMatrix::from_vec(1, y_noisy.len(), y_noisy.to_vec())
            .map_err(|_| crate::nn::NnError::NonFiniteInput)?;
        Ok(self.reconstruct_batch(&ys)?.into_vec())
    }

    /// Image-side autoencoder `dec_x(enc_x(x))` for each row of `xs`.
    pub fn autoencode_images(&self, xs: &DenseMatrix) -> Result<DenseMatrix, LsvdError> {
        let z = self.enc_x.net.predict_batch(xs)?;
        Ok(self.dec_x.net.predict_batch(&z)?)
    }
}
