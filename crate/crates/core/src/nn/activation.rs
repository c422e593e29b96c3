use serde::{Deserialize, Serialize};

use super::NnError;

pub const DEFAULT_C_MIN: f64 = 1e-2;
pub const DEFAULT_C_MAX: f64 = 10.0;

/// Pointwise nonlinearity applied after a layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `max(a, γa)`; the derivative at 0 is taken as `γ`.
    LeakyRelu { gamma: f64 },
    Sigmoid,
    Softplus,
    /// `(c_max − c_min)·sigmoid(a) + c_min`.
    BoundedSigmoid { c_min: f64, c_max: f64 },
    Linear,
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn leaky_relu(gamma: f64) -> Self {
        Self::LeakyRelu { gamma }
    }

    pub fn bounded_sigmoid() -> Self {
        Self::BoundedSigmoid {
            c_min: DEFAULT_C_MIN,
            c_max: DEFAULT_C_MAX,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match *self {
            Self::LeakyRelu { gamma } if !(gamma > 0.0 && gamma < 1.0) => Err(NnError::InvalidActivation(
                format!("leaky_relu gamma must lie in (0, 1), got {gamma}"),
            )),
            Self::BoundedSigmoid { c_min, c_max } if !(c_min < c_max) || !c_min.is_finite() || !c_max.is_finite() => {
                Err(NnError::InvalidActivation(format!(
                    "bounded_sigmoid needs finite c_min < c_max, got {c_min} and {c_max}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, a: f64) -> f64 {
        match *self {
            Self::LeakyRelu { gamma } => {
                if a > 0.0 {
                    a
                } else {
                    gamma * a
                }
            }
            Self::Sigmoid => sigmoid(a),
            Self::Softplus => a.max(0.0) + (-a.abs()).exp().ln_1p(),
            Self::BoundedSigmoid { c_min, c_max } => (c_max - c_min) * sigmoid(a) + c_min,
            Self::Linear => a,
        }
    }

    /// Derivative with respect to the pre-activation `a`.
    #[inline]
    pub fn derivative(&self, a: f64) -> f64 {
        match *self {
            Self::LeakyRelu { gamma } => {
                if a > 0.0 {
                    1.0
                } else {
                    gamma
                }
            }
            Self::Sigmoid => {
                let s = sigmoid(a);
                s * (1.0 - s)
            }
            Self::Softplus => sigmoid(a),
            Self::BoundedSigmoid { c_min, c_max } => {
                let s = sigmoid(a);
                (c_max - c_min) * s * (1.0 - s)
            }
            Self::Linear => 1.0,
        }
    }

    /// Global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Self::LeakyRelu { gamma } => gamma.abs().max(1.0),
            Self::Sigmoid => 0.25,
            Self::Softplus | Self::Linear => 1.0,
            Self::BoundedSigmoid { c_min, c_max } => 0.25 * (c_max - c_min).abs(),
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self, Self::LeakyRelu { .. } | Self::Linear)
    }
}
