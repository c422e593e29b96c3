use serde::{Deserialize, Serialize};

use super::LsvdError;
use crate::linalg::{gemm, DenseMatrix};
use crate::nn::{ForwardCache, MlpNetwork, NetworkGradients};

/// The latent scaling `z_x = Σ(z_y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaVariant {
    /// `z_x = σ ⊙ z_y`.
    Diagonal { scales: Vec<f64> },
    /// `z_x = M z_y`.
    Full { matrix: DenseMatrix },
    /// `z_x,i = s_i / (s_i² + α·𝒩(z_y)_i) · z_y,i` with a bounded head on 𝒩.
    TikhonovStructured { s: Vec<f64>, alpha: f64, net: MlpNetwork },
    /// `z_x = 𝒩(z_y) ⊙ z_y` with a non-negative head on 𝒩.
    NoiseAware { net: MlpNetwork },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    Diagonal,
    Full,
    TikhonovStructured,
    NoiseAware,
}

#[derive(Clone, Debug)]
pub struct SigmaCache {
    z_in: DenseMatrix,
    net_out: Option<DenseMatrix>,
    net_cache: Option<ForwardCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SigmaGradients {
    Diagonal(Vec<f64>),
    Full(DenseMatrix),
    Net(NetworkGradients),
}

impl SigmaGradients {
    pub fn add_assign(&mut self, other: &Self) {
        match (self, other) {
            (Self::Diagonal(a), Self::Diagonal(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            (Self::Full(a), Self::Full(b)) => {
                for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                    *x += y;
                }
            }
            (Self::Net(a), Self::Net(b)) => a.add_assign(b),
            _ => panic!("mismatched sigma gradient kinds"),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            Self::Diagonal(g) => g.clone(),
            Self::Full(m) => m.data().to_vec(),
            Self::Net(g) => g.flatten(),
        }
    }
}

#[inline]
fn tikhonov_factor(s: f64, alpha: f64, n: f64) -> (f64, f64) {
    // f(n) = s / (s² + αn) and ∂f/∂n.
    let d = s * s + alpha * n;
    (s / d, -s * alpha / (d * d))
}

impl SigmaVariant {
    pub fn kind(&self) -> SigmaKind {
        match self {
            Self::Diagonal { .. } => SigmaKind::Diagonal,
            Self::Full { .. } => SigmaKind::Full,
            Self::TikhonovStructured { .. } => SigmaKind::TikhonovStructured,
            Self::NoiseAware { .. } => SigmaKind::NoiseAware,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal { scales } => scales.len(),
            Self::Full { matrix } => matrix.rows(),
            Self::TikhonovStructured { s, .. } => s.len(),
            Self::NoiseAware { net } => net.out_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), LsvdError> {
        let bad = |msg: String| Err(LsvdError::Model(msg));
        match self {
            Self::Diagonal { scales } if scales.iter().any(|v| !v.is_finite()) => bad("non-finite diagonal scale".into()),
            Self::Full { matrix } if matrix.rows() != matrix.cols() => {
                bad(format!("full Σ must be square, got {:?}", matrix.shape()))
            }
            Self::TikhonovStructured { s, alpha, net } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return bad(format!("Tikhonov-structured Σ needs α > 0, got {alpha}"));
                }
                if net.in_dim() != s.len() || net.out_dim() != s.len() {
                    return bad(format!(
                        "scaling network maps {} → {} but Σ has dimension {}",
                        net.in_dim(),
                        net.out_dim(),
                        s.len()
                    ));
                }
                Ok(())
            }
            Self::NoiseAware { net } if net.in_dim() != net.out_dim() => bad(format!(
                "noise-aware network maps {} → {}, expected a square map",
                net.in_dim(),
                net.out_dim()
            )),
            _ => Ok(()),
        }
    }

    pub fn net(&self) -> Option<&MlpNetwork> {
        match self {
            Self::TikhonovStructured { net, .. } | Self::NoiseAware { net } => Some(net),
            _ => None,
        }
    }

    pub fn forward_batch(&self, z: &DenseMatrix) -> Result<(DenseMatrix, SigmaCache), LsvdError> {
        let k = self.dim();
        if z.cols() != k {
            return Err(LsvdError::Shape {
                what: "Σ input",
                expected: k,
                got: z.cols(),
            });
        }
        let mut out = z.clone();
        let (net_out, net_cache) = match self {
            Self::Diagonal { scales } => {
                for row in out.data_mut().chunks_mut(k) {
                    for (v, s) in row.iter_mut().zip(scales) {
                        *v *= s;
                    }
                }
                (None, None)
            }
            Self::Full { matrix } => {
                gemm(1.0, z, false, matrix, true, 0.0, &mut out);
                (None, None)
            }
            Self::TikhonovStructured { s, alpha, net } => {
                let (n, cache) = net.forward_batch(z)?;
                for (row, nrow) in out.data_mut().chunks_mut(k).zip(n.data().chunks(k)) {
                    for ((v, &nv), &si) in row.iter_mut().zip(nrow).zip(s) {
                        *v *= tikhonov_factor(si, *alpha, nv).0;
                    }
                }
                (Some(n), Some(cache))
            }
            Self::NoiseAware { net } => {
                let (n, cache) = net.forward_batch(z)?;
                for (v, nv) in out.data_mut().iter_mut().zip(n.data()) {
                    *v *= nv;
                }
                (Some(n), Some(cache))
            }
        };
        Ok((
            out,
            SigmaCache {
                z_in: z.clone(),
                net_out,
                net_cache,
            },
        ))
    }

    /// Gradient with respect to the Σ input and, if requested, Σ's own
    /// parameters, given `g = ∂L/∂z_x`.
    pub fn backward_batch(
        &self,
        cache: &SigmaCache,
        g: &DenseMatrix,
        with_params: bool,
    ) -> Result<(Option<SigmaGradients>, DenseMatrix), LsvdError> {
        let k = self.dim();
        let z = &cache.z_in;
        let mut gz = g.clone();
        let params = match self {
            Self::Diagonal { scales } => {
                let mut gs = vec![0.0; k];
                if with_params {
                    for (grow, zrow) in g.data().chunks(k).zip(z.data().chunks(k)) {
                        for ((a, gv), zv) in gs.iter_mut().zip(grow).zip(zrow) {
                            *a += gv * zv;
                        }
                    }
                }
                for row in gz.data_mut().chunks_mut(k) {
                    for (v, s) in row.iter_mut().zip(scales) {
                        *v *= s;
                    }
                }
                with_params.then_some(SigmaGradients::Diagonal(gs))
            }
            Self::Full { matrix } => {
                gemm(1.0, g, false, matrix, false, 0.0, &mut gz);
                with_params.then(|| {
                    let mut gm = DenseMatrix::zeros(k, k);
                    gemm(1.0, g, true, z, false, 0.0, &mut gm);
                    SigmaGradients::Full(gm)
                })
            }
            Self::TikhonovStructured { s, alpha, net } => {
                let n = cache.net_out.as_ref().expect("structured Σ caches its network output");
                let mut g_net = DenseMatrix::zeros(g.rows(), k);
                for (((gzr, gnr), (gr, zr)), nr) in gz
                    .data_mut()
                    .chunks_mut(k)
                    .zip(g_net.data_mut().chunks_mut(k))
                    .zip(g.data().chunks(k).zip(z.data().chunks(k)))
                    .zip(n.data().chunks(k))
                {
                    for j in 0..k {
                        let (f, df) = tikhonov_factor(s[j], *alpha, nr[j]);
                        gzr[j] = gr[j] * f;
                        gnr[j] = gr[j] * zr[j] * df;
                    }
                }
                let net_cache = cache.net_cache.as_ref().expect("structured Σ caches its network pass");
                self.net_backward(net, net_cache, &g_net, &mut gz, with_params)?
            }
            Self::NoiseAware { net } => {
                let n = cache.net_out.as_ref().expect("noise-aware Σ caches its network output");
                let mut g_net = g.clone();
                for (v, zv) in g_net.data_mut().iter_mut().zip(z.data()) {
                    *v *= zv;
                }
                for (v, nv) in gz.data_mut().iter_mut().zip(n.data()) {
                    *v *= nv;
                }
                let net_cache = cache.net_cache.as_ref().expect("noise-aware Σ caches its network pass");
                self.net_backward(net, net_cache, &g_net, &mut gz, with_params)?
            }
        };
        Ok((params, gz))
    }

    fn net_backward(
        &self,
        net: &MlpNetwork,
        cache: &ForwardCache,
        g_net: &DenseMatrix,
        gz: &mut DenseMatrix,
        with_params: bool,
    ) -> Result<Option<SigmaGradients>, LsvdError> {
        let (grads, g_in) = if with_params {
            let (g, x) = net.backward_batch(cache, g_net)?;
            (Some(SigmaGradients::Net(g)), x)
        } else {
            (None, net.backward_input(cache, g_net)?)
        };
        for (a, b) in gz.data_mut().iter_mut().zip(g_in.data()) {
            *a += b;
        }
        Ok(grads)
    }

    /// Per-sample effective diagonal scales `z_x,i / z_y,i`; entries with
    /// `|z_y,i| < 1e-8` are reported as `NaN`.
    pub fn effective_scales(&self, z: &DenseMatrix) -> Result<DenseMatrix, LsvdError> {
        let k = self.dim();
        match self {
            Self::Diagonal { scales } => Ok(DenseMatrix::from_fn(z.rows(), k, |_, j| scales[j])),
            Self::TikhonovStructured { s, alpha, net } => {
                let n = net.predict_batch(z)?;
                Ok(DenseMatrix::from_fn(z.rows(), k, |i, j| tikhonov_factor(s[j], *alpha, n.get(i, j)).0))
            }
            Self::NoiseAware { net } => Ok(net.predict_batch(z)?),
            Self::Full { .. } => {
                let (out, _) = self.forward_batch(z)?;
                let mut r = DenseMatrix::zeros(z.rows(), k);
                for i in 0..z.rows() {
                    for j in 0..k {
                        let zy = z.get(i, j);
                        r.set(i, j, if zy.abs() < 1e-8 { f64::NAN } else { out.get(i, j) / zy });
                    }
                }
                // NaN entries cannot live in a DenseMatrix built via from_vec,
                // but `set` does not validate, matching the documented sentinel.
                Ok(r)
            }
        }
    }

    /// Largest singular value of Σ viewed as a matrix; `None` for
    /// input-dependent variants.
    pub fn operator_norm(&self) -> Option<f64> {
        match self {
            Self::Diagonal { scales } => Some(scales.iter().fold(0.0_f64, |m, v| m.max(v.abs()))),
            Self::Full { matrix } => Some(crate::linalg::spectral_norm(matrix, 1e-12)),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Self::Diagonal { scales } => scales.len(),
            Self::Full { matrix } => matrix.rows() * matrix.cols(),
            Self::TikhonovStructured { net, .. } | Self::NoiseAware { net } => net.param_count(),
        }
    }
}
