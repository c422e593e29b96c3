//! Fully connected networks with hand-written backpropagation, Adam with
//! global-norm clipping, and finite-difference gradient verification.

mod activation;
mod adam;
mod checkpoint;
mod network;

pub use activation::{Activation, DEFAULT_C_MAX, DEFAULT_C_MIN};
pub use adam::{adam_step, AdamState, LrSchedule, ParamBlock, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{load_network, read_network, save_network, write_network, CheckpointHeader};
pub use network::{
    geometric_widths, init_network, init_network_with_std, stack_activations, ForwardCache, MlpLayer,
    MlpNetwork, NetworkGradients, INIT_STD,
};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("{context}: expected {expected} values, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("forward cache does not belong to the current network parameters")]
    StaleCache,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },
    #[error("parameter block `{block}` changed size ({expected} -> {got}) between optimiser steps")]
    OptimiserShape {
        block: String,
        expected: usize,
        got: usize,
    },
    #[error("learning rate must be positive and finite, got {0}")]
    LearningRate(f64),
    #[error("invalid activation: {0}")]
    InvalidActivation(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mean squared error over entries and its gradient with respect to `output`.
pub fn mse_loss(output: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = output.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = output
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let r = o - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    (loss / n, grad)
}

/// Largest relative discrepancy between analytic parameter gradients and
/// fourth-order central differences, `|a − n| / max(|a|, |n|, 1e-8)`.
///
/// `loss` maps a network output to `(value, ∂value/∂output)`.
pub fn gradient_check(
    net: &MlpNetwork,
    loss: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    h: f64,
) -> f64 {
    let (out, cache) = net.forward(x).expect("input matches network");
    let (_, g) = loss(&out);
    let (grads, _) = net.backward(&cache, &g).expect("fresh cache");
    let analytic = grads.flatten();
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let mut at = |offset: f64| {
            params[i] = base[i] + offset;
            probe.set_params_flat(&params).expect("same layout");
            loss(&probe.predict(x).expect("input matches network")).0
        };
        let numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        params[i] = base[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}
