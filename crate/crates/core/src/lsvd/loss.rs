use serde::{Deserialize, Serialize};

use super::{Branch, LsvdError, LsvdModel, SigmaGradients, TrainingBatchOutputs};
use crate::linalg::{gemm, DenseMatrix};
use crate::nn::{ForwardCache, NetworkGradients};

fn one() -> f64 {
    1.0
}

/// Weights of the loss terms. `reconstruction` multiplies D₁ and is 1 for
/// every L-SVD method; image-autoencoder baselines set it to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    #[serde(default = "one")]
    pub reconstruction: f64,
    pub alpha_y: f64,
    pub alpha_x: f64,
    #[serde(default)]
    pub alpha_latent_ae: f64,
    #[serde(default)]
    pub alpha_latent_sigma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            reconstruction: 1.0,
            alpha_y: 2.0,
            alpha_x: 1.0,
            alpha_latent_ae: 0.0,
            alpha_latent_sigma: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LsvdError> {
        for (name, w) in [
            ("reconstruction", self.reconstruction),
            ("alpha_y", self.alpha_y),
            ("alpha_x", self.alpha_x),
            ("alpha_latent_ae", self.alpha_latent_ae),
            ("alpha_latent_sigma", self.alpha_latent_sigma),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(LsvdError::Config(format!("loss weight {name} must be finite and ≥ 0, got {w}")));
            }
        }
        Ok(())
    }
}

/// Unweighted terms and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
}

impl LossBreakdown {
    fn weigh(&mut self, w: &LossWeights) {
        self.total = w.reconstruction * self.d1
            + w.alpha_y * self.d2
            + w.alpha_x * self.d3
            + w.alpha_latent_ae * self.d4
            + w.alpha_latent_sigma * self.d5;
    }

    pub fn is_finite(&self) -> bool {
        [self.total, self.d1, self.d2, self.d3, self.d4, self.d5]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / a.len() as f64
}

/// Loss of a single sample. `x = None` marks an unpaired sinogram, for which
/// D₁ and D₃ vanish. Structured-latent terms are batch quantities and are
/// handled by the trainer.
pub fn lsvd_loss(
    outputs: &TrainingBatchOutputs,
    x: Option<&[f64]>,
    y_target: &[f64],
    weights: &LossWeights,
) -> LossBreakdown {
    let mut b = LossBreakdown {
        d2: mse(&outputs.y_hat_ae, y_target),
        ..Default::default()
    };
    if let Some(x) = x {
        b.d1 = mse(&outputs.x_hat_sigma, x);
        if let Some(xa) = &outputs.x_hat_ae {
            b.d3 = mse(xa, x);
        }
    }
    b.weigh(weights);
    b
}

/// One minibatch in row-sample layout.
pub(crate) struct Batch {
    pub y_in: DenseMatrix,
    pub y_target: DenseMatrix,
    pub x: DenseMatrix,
    pub paired: Vec<bool>,
}

/// Latent samples for D₄/D₅ and, for D₅, the effective forward operator.
pub(crate) struct LatentTerms<'a> {
    pub z: &'a DenseMatrix,
    pub operator: Option<&'a DenseMatrix>,
}

#[derive(Debug, Default)]
pub(crate) struct ModelGradients {
    pub enc_y: Option<NetworkGradients>,
    pub dec_y: Option<NetworkGradients>,
    pub enc_x: Option<NetworkGradients>,
    pub dec_x: Option<NetworkGradients>,
    pub sigma: Option<SigmaGradients>,
}

fn accumulate(slot: &mut Option<NetworkGradients>, g: NetworkGradients) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// Reverse pass through a branch. Parameter gradients go into `slot` unless
/// the branch is frozen; the input gradient is returned only if requested.
fn branch_backward(
    branch: &Branch,
    cache: &ForwardCache,
    g: &DenseMatrix,
    need_input: bool,
    slot: &mut Option<NetworkGradients>,
    with_grads: bool,
) -> Result<Option<DenseMatrix>, LsvdError> {
    if with_grads && !branch.frozen {
        let (pg, gi) = branch.net.backward_batch(cache, g)?;
        accumulate(slot, pg);
        Ok(need_input.then_some(gi))
    } else if need_input {
        Ok(Some(branch.net.backward_input(cache, g)?))
    } else {
        Ok(None)
    }
}

/// Masked MSE term and its gradient, both scaled by `1/denominator`.
fn mse_term(out: &DenseMatrix, target: &DenseMatrix, mask: Option<&[bool]>, denominator: f64, weight: f64) -> (f64, DenseMatrix) {
    let d = out.cols();
    let mut grad = DenseMatrix::zeros(out.rows(), d);
    let mut total = 0.0;
    let scale = 2.0 * weight / (denominator * d as f64);
    for i in 0..out.rows() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let mut s = 0.0;
        for ((g, o), t) in grad.row_mut(i).iter_mut().zip(out.row(i)).zip(target.row(i)) {
            let r = o - t;
            s += r * r;
            *g = scale * r;
        }
        total += s / d as f64;
    }
    (total / denominator, grad)
}

fn add_into(acc: &mut Option<DenseMatrix>, g: DenseMatrix) {
    match acc {
        Some(a) => {
            for (p, q) in a.data_mut().iter_mut().zip(g.data()) {
                *p += q;
            }
        }
        None => *acc = Some(g),
    }
}

/// Loss of a minibatch and, if `with_grads`, gradients for every trainable
/// component. D₁–D₃ are averaged over the batch size, D₄–D₅ over the number
/// of latent samples.
pub(crate) fn batch_loss(
    model: &LsvdModel,
    batch: &Batch,
    w: &LossWeights,
    latent: Option<&LatentTerms<'_>>,
    with_grads: bool,
) -> Result<(LossBreakdown, ModelGradients), LsvdError> {
    let bsz = batch.y_in.rows() as f64;
    let mut loss = LossBreakdown::default();
    let mut grads = ModelGradients::default();
    let sigma_grads = with_grads && !model.sigma_frozen;

    let any_paired = batch.paired.iter().any(|&p| p);
    let use_d1 = w.reconstruction > 0.0 && any_paired;
    let use_d2 = w.alpha_y > 0.0;
    if use_d1 || use_d2 {
        let (zy, c_ey) = model.enc_y.net.forward_batch(&batch.y_in)?;
        let mut g_zy: Option<DenseMatrix> = None;
        if use_d1 {
            let (zs, c_s) = model.sigma.forward_batch(&zy)?;
            let (xh, c_dx) = model.dec_x.net.forward_batch(&zs)?;
            let (d1, g) = mse_term(&xh, &batch.x, Some(&batch.paired), bsz, w.reconstruction);
            loss.d1 = d1;
            if with_grads {
                let g_zs = branch_backward(&model.dec_x, &c_dx, &g, true, &mut grads.dec_x, true)?.expect("input gradient");
                let (gs, gz) = model.sigma.backward_batch(&c_s, &g_zs, sigma_grads)?;
                if let Some(gs) = gs {
                    grads.sigma = Some(gs);
                }
                add_into(&mut g_zy, gz);
            }
        }
        if use_d2 {
            let (yh, c_dy) = model.dec_y.net.forward_batch(&zy)?;
            let (d2, g) = mse_term(&yh, &batch.y_target, None, bsz, w.alpha_y);
            loss.d2 = d2;
            if with_grads {
                if let Some(gz) = branch_backward(&model.dec_y, &c_dy, &g, !model.enc_y.frozen, &mut grads.dec_y, true)? {
                    add_into(&mut g_zy, gz);
                }
            }
        }
        if let Some(g) = g_zy {
            branch_backward(&model.enc_y, &c_ey, &g, false, &mut grads.enc_y, with_grads)?;
        }
    }

    if w.alpha_x > 0.0 {
        let (zx, c_ex) = model.enc_x.net.forward_batch(&batch.x)?;
        let (xh, c_dx) = model.dec_x.net.forward_batch(&zx)?;
        let (d3, g) = mse_term(&xh, &batch.x, None, bsz, w.alpha_x);
        loss.d3 = d3;
        if with_grads {
            if let Some(gz) = branch_backward(&model.dec_x, &c_dx, &g, !model.enc_x.frozen, &mut grads.dec_x, true)? {
                branch_backward(&model.enc_x, &c_ex, &gz, false, &mut grads.enc_x, true)?;
            }
        }
    }

    if let Some(lat) = latent {
        let count = lat.z.rows() as f64;
        if w.alpha_latent_ae > 0.0 {
            let (xt, c_dx) = model.dec_x.net.forward_batch(lat.z)?;
            let (zh, c_ex) = model.enc_x.net.forward_batch(&xt)?;
            let (d4, g) = mse_term(&zh, lat.z, None, count, w.alpha_latent_ae);
            loss.d4 = d4;
            if with_grads {
                let gx = branch_backward(&model.enc_x, &c_ex, &g, !model.dec_x.frozen, &mut grads.enc_x, true)?;
                if let Some(gx) = gx {
                    branch_backward(&model.dec_x, &c_dx, &gx, false, &mut grads.dec_x, true)?;
                }
            }
        }
        if w.alpha_latent_sigma > 0.0 {
            let op = lat.operator.ok_or_else(|| {
                LsvdError::Config("the Σ structured-latent term needs the forward operator".into())
            })?;
            let (xt, c_dx) = model.dec_x.net.forward_batch(lat.z)?;
            let mut yt = DenseMatrix::zeros(xt.rows(), op.rows());
            gemm(1.0, &xt, false, op, true, 0.0, &mut yt);
            let (zy, c_ey) = model.enc_y.net.forward_batch(&yt)?;
            let (zs, c_s) = model.sigma.forward_batch(&zy)?;
            let (d5, g) = mse_term(&zs, lat.z, None, count, w.alpha_latent_sigma);
            loss.d5 = d5;
            if with_grads {
                let (gs, gz) = model.sigma.backward_batch(&c_s, &g, sigma_grads)?;
                if let Some(gs) = gs {
                    match &mut grads.sigma {
                        Some(acc) => acc.add_assign(&gs),
                        None => grads.sigma = Some(gs),
                    }
                }
                let gy = branch_backward(&model.enc_y, &c_ey, &gz, !model.dec_x.frozen, &mut grads.enc_y, true)?;
                if let Some(gy) = gy {
                    let mut gx = DenseMatrix::zeros(gy.rows(), op.cols());
                    gemm(1.0, &gy, false, op, false, 0.0, &mut gx);
                    branch_backward(&model.dec_x, &c_dx, &gx, false, &mut grads.dec_x, true)?;
                }
            }
        }
    }

    loss.weigh(w);
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsvd::SigmaVariant;
    use crate::nn::{init_network_with_std, stack_activations, Activation, MlpNetwork};
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn perfect_outputs_give_zero() {
        let out = TrainingBatchOutputs {
            z_y: vec![1.0],
            y_hat_ae: vec![1.0, 2.0],
            z_x_sigma: vec![1.0],
            x_hat_sigma: vec![3.0, 4.0],
            z_x_ae: Some(vec![1.0]),
            x_hat_ae: Some(vec![3.0, 4.0]),
        };
        let l = lsvd_loss(&out, Some(&[3.0, 4.0]), &[1.0, 2.0], &LossWeights::default());
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn hand_computed_two_dim_example() {
        let out = TrainingBatchOutputs {
            z_y: vec![0.0],
            y_hat_ae: vec![1.0, 0.0],
            z_x_sigma: vec![0.0],
            x_hat_sigma: vec![0.5, 2.0],
            z_x_ae: Some(vec![0.0]),
            x_hat_ae: Some(vec![1.0, 1.0]),
        };
        let x = [1.0, 1.0 + 0.25];
        let y = [0.0, 0.5];
        // D1 = (0.25 + 0.5625)/2, D2 = (1 + 0.25)/2, D3 = (0 + 0.0625)/2.
        let l = lsvd_loss(&out, Some(&x), &y, &LossWeights::default());
        let expected = 0.40625 + 2.0 * 0.625 + 0.03125;
        assert!((l.total - expected).abs() < 1e-14);
        // Unpaired: only the data autoencoder contributes.
        let l = lsvd_loss(&out, None, &y, &LossWeights::default());
        assert!((l.total - 1.25).abs() < 1e-14);
    }

    fn small_model(seed: u64) -> LsvdModel {
        let net = |dims: &[usize], acts: Vec<Activation>, s: u64| {
            Branch::trainable(init_network_with_std(dims, &acts, true, s, 0.5).unwrap())
        };
        let lrelu = Activation::leaky_relu(0.1);
        let sigma_net: MlpNetwork =
            init_network_with_std(&[3, 3, 3], &stack_activations(2, lrelu, Activation::Softplus), true, seed + 9, 0.5).unwrap();
        LsvdModel::assemble(
            net(&[5, 4, 3], vec![lrelu, Activation::Linear], seed),
            net(&[3, 5], vec![Activation::Linear], seed + 1),
            net(&[4, 3], vec![Activation::Linear], seed + 2),
            net(&[3, 4, 4], vec![lrelu, Activation::Linear], seed + 3),
            SigmaVariant::NoiseAware { net: sigma_net },
            false,
        )
        .unwrap()
    }

    fn random(rows: usize, cols: usize, rng: &mut crate::rng::Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Full-model gradient against central differences of the batch loss,
    /// with every term switched on.
    #[test]
    fn batch_gradients_match_differences() {
        let mut rng = seeded(3);
        let model = small_model(4);
        let op = random(5, 4, &mut rng);
        let z = random(2, 3, &mut rng);
        let batch = Batch {
            y_in: random(3, 5, &mut rng),
            y_target: random(3, 5, &mut rng),
            x: random(3, 4, &mut rng),
            paired: vec![true, false, true],
        };
        let w = LossWeights {
            reconstruction: 1.0,
            alpha_y: 2.0,
            alpha_x: 1.0,
            alpha_latent_ae: 0.5,
            alpha_latent_sigma: 0.7,
        };
        let lat = LatentTerms { z: &z, operator: Some(&op) };
        let (_, g) = batch_loss(&model, &batch, &w, Some(&lat), true).unwrap();

        let loss_with = |m: &LsvdModel| batch_loss(m, &batch, &w, Some(&lat), false).unwrap().0.total;
        let h = 1e-6;
        let check = |analytic: Vec<f64>, set: &dyn Fn(&mut LsvdModel, usize, f64), base: &dyn Fn(&LsvdModel) -> Vec<f64>| {
            let p0 = base(&model);
            for i in 0..p0.len() {
                let mut mp = model.clone();
                set(&mut mp, i, p0[i] + h);
                let mut mm = model.clone();
                set(&mut mm, i, p0[i] - h);
                let num = (loss_with(&mp) - loss_with(&mm)) / (2.0 * h);
                let a = analytic[i];
                assert!((a - num).abs() <= 1e-5 * a.abs().max(num.abs()).max(1e-2), "param {i}: {a} vs {num}");
            }
        };
        macro_rules! branch_check {
            ($field:ident) => {
                check(
                    g.$field.as_ref().unwrap().flatten(),
                    &|m: &mut LsvdModel, i, v| {
                        let mut p = m.$field.net.params_flat();
                        p[i] = v;
                        m.$field.net.set_params_flat(&p).unwrap();
                    },
                    &|m: &LsvdModel| m.$field.net.params_flat(),
                );
            };
        }
        branch_check!(enc_y);
        branch_check!(dec_y);
        branch_check!(enc_x);
        branch_check!(dec_x);
        check(
            g.sigma.as_ref().unwrap().flatten(),
            &|m: &mut LsvdModel, i, v| {
                if let SigmaVariant::NoiseAware { net } = &mut m.sigma {
                    let mut p = net.params_flat();
                    p[i] = v;
                    net.set_params_flat(&p).unwrap();
                }
            },
            &|m: &LsvdModel| m.sigma.net().unwrap().params_flat(),
        );
    }

    #[test]
    fn frozen_components_get_no_gradients() {
        let mut rng = seeded(5);
        let mut model = small_model(6);
        model.enc_y.frozen = true;
        model.dec_x.frozen = true;
        model.sigma_frozen = true;
        let batch = Batch {
            y_in: random(2, 5, &mut rng),
            y_target: random(2, 5, &mut rng),
            x: random(2, 4, &mut rng),
            paired: vec![true, true],
        };
        let (_, g) = batch_loss(&model, &batch, &LossWeights::default(), None, true).unwrap();
        assert!(g.enc_y.is_none() && g.dec_x.is_none() && g.sigma.is_none());
        assert!(g.dec_y.is_some() && g.enc_x.is_some());
    }

    /// In the linear case a perturbation of dec_x moves both image outputs
    /// through the same Jacobian block: δx̂ = δW·z for either latent.
    #[test]
    fn dec_x_is_shared_between_paths() {
        let mut rng = seeded(8);
        let lin = |r, c, rng: &mut crate::rng::Rng| Branch::trainable(MlpNetwork::linear(random(r, c, rng)));
        let model = LsvdModel::assemble(
            lin(3, 5, &mut rng),
            lin(5, 3, &mut rng),
            lin(3, 4, &mut rng),
            lin(4, 3, &mut rng),
            SigmaVariant::Diagonal { scales: vec![0.5, 1.5, -1.0] },
            false,
        )
        .unwrap();
        let y = random(1, 5, &mut rng).into_vec();
        let x = random(1, 4, &mut rng).into_vec();
        let base = model.forward(&y, Some(&x)).unwrap();
        let dw = random(4, 3, &mut rng);
        let h = 1e-3;
        let mut pert = model.clone();
        let mut p = pert.dec_x.net.params_flat();
        for (a, d) in p.iter_mut().zip(dw.data()) {
            *a += h * d;
        }
        pert.dec_x.net.set_params_flat(&p).unwrap();
        let moved = pert.forward(&y, Some(&x)).unwrap();
        let js = dw.matvec(&base.z_x_sigma).unwrap();
        let ja = dw.matvec(base.z_x_ae.as_ref().unwrap()).unwrap();
        for i in 0..4 {
            let ds = (moved.x_hat_sigma[i] - base.x_hat_sigma[i]) / h;
            let da = (moved.x_hat_ae.as_ref().unwrap()[i] - base.x_hat_ae.as_ref().unwrap()[i]) / h;
            assert!((ds - js[i]).abs() < 1e-9 && (da - ja[i]).abs() < 1e-9);
        }
    }
}
