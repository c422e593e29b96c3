use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Distribution, Normal};

use super::{Activation, NnError, ParamBlock};
use crate::linalg::{gemm, DenseMatrix};
use crate::rng::seeded;

/// Standard deviation of freshly initialised weights.
pub const INIT_STD: f64 = 0.01;

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpLayer {
    /// `out × in`.
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
}

impl MlpLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Fully connected network. Every mutation through the public API bumps an
/// internal version so that caches from earlier forward passes are rejected.
#[derive(Debug)]
pub struct MlpNetwork {
    layers: Vec<MlpLayer>,
    seed: u64,
    id: u64,
    version: u64,
}

impl Clone for MlpNetwork {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            seed: self.seed,
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for MlpNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Per-layer inputs and pre-activations of one batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    network_id: u64,
    version: u64,
    inputs: Vec<DenseMatrix>,
    pre_activations: Vec<DenseMatrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, DenseMatrix::rows)
    }

    pub fn pre_activations(&self) -> &[DenseMatrix] {
        &self.pre_activations
    }
}

/// Gradients laid out like the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Option<Vec<f64>>>,
}

impl NetworkGradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DenseMatrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| l.bias.as_ref().map(|b| vec![0.0; b.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for x in w.data_mut() {
                *x *= factor;
            }
        }
        for b in self.biases.iter_mut().flatten() {
            for x in b {
                *x *= factor;
            }
        }
    }

    /// Parameters in checkpoint order: each layer's weight then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            if let Some(b) = b {
                out.extend_from_slice(b);
            }
        }
        out
    }
}

impl MlpNetwork {
    pub fn from_layers(layers: Vec<MlpLayer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidNetwork("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            l.activation.validate()?;
            if let Some(b) = &l.bias {
                if b.len() != l.out_dim() {
                    return Err(NnError::InvalidNetwork(format!(
                        "layer {i}: bias length {} != output dimension {}",
                        b.len(),
                        l.out_dim()
                    )));
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(NnError::InvalidNetwork(format!("layer {i}: non-finite bias")));
                }
            }
            if !l.weight.is_finite() {
                return Err(NnError::InvalidNetwork(format!("layer {i}: non-finite weight")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(NnError::InvalidNetwork(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].out_dim(),
                    i + 1,
                    w[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            seed: 0,
            id: fresh_id(),
            version: 0,
        })
    }

    /// Single linear layer `x ↦ W x`.
    pub fn linear(weight: DenseMatrix) -> Self {
        Self::from_layers(vec![MlpLayer {
            weight,
            bias: None,
            activation: Activation::Linear,
        }])
        .expect("a single finite linear layer is always valid")
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    /// Mutable access invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [MlpLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, MlpLayer::out_dim)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(MlpLayer::out_dim));
        d
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(MlpLayer::param_count).sum()
    }

    /// Parameters in checkpoint order: each layer's weight then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            if let Some(b) = &l.bias {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<(), NnError> {
        if values.len() != self.param_count() {
            return Err(NnError::Shape {
                context: "parameter vector",
                expected: self.param_count(),
                got: values.len(),
            });
        }
        self.version += 1;
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weight.data_mut();
            w.copy_from_slice(&values[offset..offset + w.len()]);
            offset += w.len();
            if let Some(b) = &mut l.bias {
                let len = b.len();
                b.copy_from_slice(&values[offset..offset + len]);
                offset += len;
            }
        }
        Ok(())
    }

    /// Pairs every parameter slice with its gradient for an optimiser step.
    pub fn param_blocks<'a>(
        &'a mut self,
        prefix: &str,
        grads: &'a NetworkGradients,
    ) -> Vec<ParamBlock<'a>> {
        self.version += 1;
        let mut blocks = Vec::new();
        for (i, ((l, gw), gb)) in self
            .layers
            .iter_mut()
            .zip(&grads.weights)
            .zip(&grads.biases)
            .enumerate()
        {
            blocks.push(ParamBlock {
                name: format!("{prefix}.layer{i}.weight"),
                values: l.weight.data_mut(),
                grad: gw.data(),
            });
            if let (Some(b), Some(g)) = (&mut l.bias, gb) {
                blocks.push(ParamBlock {
                    name: format!("{prefix}.layer{i}.bias"),
                    values: b.as_mut_slice(),
                    grad: g.as_slice(),
                });
            }
        }
        blocks
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward_batch(&self, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache), NnError> {
        if x.cols() != self.in_dim() {
            return Err(NnError::Shape {
                context: "network input",
                expected: self.in_dim(),
                got: x.cols(),
            });
        }
        let batch = x.rows();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for l in &self.layers {
            let mut z = DenseMatrix::zeros(batch, l.out_dim());
            gemm(1.0, &current, false, &l.weight, true, 0.0, &mut z);
            if let Some(b) = &l.bias {
                for row in z.data_mut().chunks_mut(b.len()) {
                    for (v, bi) in row.iter_mut().zip(b) {
                        *v += bi;
                    }
                }
            }
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = l.activation.apply(*v);
            }
            inputs.push(std::mem::replace(&mut current, a));
            pre.push(z);
        }
        Ok((
            current,
            ForwardCache {
                network_id: self.id,
                version: self.version,
                inputs,
                pre_activations: pre,
            },
        ))
    }

    /// Forward pass without keeping a cache.
    pub fn predict_batch(&self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        if x.cols() != self.in_dim() {
            return Err(NnError::Shape {
                context: "network input",
                expected: self.in_dim(),
                got: x.cols(),
            });
        }
        let mut current = x.clone();
        for l in &self.layers {
            let mut z = DenseMatrix::zeros(x.rows(), l.out_dim());
            gemm(1.0, &current, false, &l.weight, true, 0.0, &mut z);
            let width = l.out_dim();
            for row in z.data_mut().chunks_mut(width) {
                for (j, v) in row.iter_mut().enumerate() {
                    let b = l.bias.as_ref().map_or(0.0, |b| b[j]);
                    *v = l.activation.apply(*v + b);
                }
            }
            current = z;
        }
        Ok(current)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        let input = DenseMatrix::from_vec(1, x.len(), x.to_vec()).map_err(|_| NnError::NonFiniteInput)?;
        let (out, cache) = self.forward_batch(&input)?;
        Ok((out.into_vec(), cache))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let input = DenseMatrix::from_vec(1, x.len(), x.to_vec()).map_err(|_| NnError::NonFiniteInput)?;
        Ok(self.predict_batch(&input)?.into_vec())
    }

    fn check_cache(&self, cache: &ForwardCache, grad_out: &DenseMatrix) -> Result<(), NnError> {
        if cache.network_id != self.id || cache.version != self.version {
            return Err(NnError::StaleCache);
        }
        if grad_out.shape() != (cache.batch_size(), self.out_dim()) {
            return Err(NnError::Shape {
                context: "output gradient",
                expected: cache.batch_size() * self.out_dim(),
                got: grad_out.rows() * grad_out.cols(),
            });
        }
        Ok(())
    }

    /// Reverse pass: parameter gradients and the gradient with respect to
    /// the input batch. `grad_out` is `∂L/∂output` (same shape as output).
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        grad_out: &DenseMatrix,
    ) -> Result<(NetworkGradients, DenseMatrix), NnError> {
        self.backward_impl(cache, grad_out, true)
            .map(|(g, x)| (g.expect("parameter gradients requested"), x))
    }

    /// Reverse pass computing only the input gradient.
    pub fn backward_input(&self, cache: &ForwardCache, grad_out: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        self.backward_impl(cache, grad_out, false).map(|(_, x)| x)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        grad_out: &DenseMatrix,
        with_params: bool,
    ) -> Result<(Option<NetworkGradients>, DenseMatrix), NnError> {
        self.check_cache(cache, grad_out)?;
        let batch = cache.batch_size();
        let n = self.layers.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut g = grad_out.clone();
        for (idx, l) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[idx];
            for (gv, zv) in g.data_mut().iter_mut().zip(z.data()) {
                *gv *= l.activation.derivative(*zv);
            }
            if with_params {
                let mut w = DenseMatrix::zeros(l.out_dim(), l.in_dim());
                gemm(1.0, &g, true, &cache.inputs[idx], false, 0.0, &mut w);
                gw.push(w);
                gb.push(l.bias.as_ref().map(|_| {
                    let mut acc = vec![0.0; l.out_dim()];
                    for row in g.data().chunks(l.out_dim()) {
                        for (a, v) in acc.iter_mut().zip(row) {
                            *a += v;
                        }
                    }
                    acc
                }));
            }
            let mut prev = DenseMatrix::zeros(batch, l.in_dim());
            gemm(1.0, &g, false, &l.weight, false, 0.0, &mut prev);
            g = prev;
        }
        let grads = with_params.then(|| {
            gw.reverse();
            gb.reverse();
            NetworkGradients {
                weights: gw,
                biases: gb,
            }
        });
        Ok((grads, g))
    }

    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &[f64],
    ) -> Result<(NetworkGradients, Vec<f64>), NnError> {
        let g = DenseMatrix::from_vec(1, grad_out.len(), grad_out.to_vec()).map_err(|_| NnError::NonFiniteInput)?;
        let (grads, gx) = self.backward_batch(cache, &g)?;
        Ok((grads, gx.into_vec()))
    }

    /// Product of layer spectral norms, an upper bound on the Lipschitz
    /// constant when every activation is 1-Lipschitz.
    pub fn weight_norm_product(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| crate::linalg::spectral_norm(&l.weight, 1e-10))
            .product()
    }
}

/// `dims[0]` is the input width; `activations[k]` follows layer `k`.
pub fn init_network(
    dims: &[usize],
    activations: &[Activation],
    with_bias: bool,
    seed: u64,
) -> Result<MlpNetwork, NnError> {
    init_network_with_std(dims, activations, with_bias, seed, INIT_STD)
}

pub fn init_network_with_std(
    dims: &[usize],
    activations: &[Activation],
    with_bias: bool,
    seed: u64,
    std: f64,
) -> Result<MlpNetwork, NnError> {
    if dims.len() < 2 || activations.len() != dims.len() - 1 {
        return Err(NnError::InvalidNetwork(format!(
            "{} dimensions need {} activations, got {}",
            dims.len(),
            dims.len().saturating_sub(1),
            activations.len()
        )));
    }
    if dims.contains(&0) {
        return Err(NnError::InvalidNetwork("layer widths must be positive".into()));
    }
    let normal = Normal::new(0.0, std).map_err(|e| NnError::InvalidNetwork(e.to_string()))?;
    let mut rng = seeded(seed);
    let layers = dims
        .windows(2)
        .zip(activations)
        .map(|(d, &activation)| MlpLayer {
            weight: DenseMatrix::from_fn(d[1], d[0], |_, _| normal.sample(&mut rng)),
            bias: with_bias.then(|| vec![0.0; d[1]]),
            activation,
        })
        .collect();
    let mut net = MlpNetwork::from_layers(layers)?;
    net.seed = seed;
    Ok(net)
}

/// `layers + 1` widths interpolating geometrically from `input` to `output`.
pub fn geometric_widths(input: usize, output: usize, layers: usize) -> Vec<usize> {
    let layers = layers.max(1);
    let ratio = output as f64 / input as f64;
    (0..=layers)
        .map(|i| match i {
            0 => input,
            i if i == layers => output,
            i => (input as f64 * ratio.powf(i as f64 / layers as f64)).round().max(1.0) as usize,
        })
        .collect()
}

/// `layers` layers of `hidden` activations followed by `last`.
pub fn stack_activations(layers: usize, hidden: Activation, last: Activation) -> Vec<Activation> {
    let mut a = vec![hidden; layers.saturating_sub(1)];
    a.push(last);
    a
}
