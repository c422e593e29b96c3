use super::NnError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// A named parameter slice and its gradient.
pub struct ParamBlock<'a> {
    pub name: String,
    pub values: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Moments are allocated on the first step and must keep their layout.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Clips the global gradient norm to `clip_norm`, then applies one
    /// bias-corrected Adam update. Returns the pre-clipping norm.
    pub fn step(&mut self, blocks: &mut [ParamBlock<'_>], lr: f64, clip_norm: f64) -> Result<f64, NnError> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(NnError::LearningRate(lr));
        }
        let mut sq = 0.0;
        for b in blocks.iter() {
            if b.grad.len() != b.values.len() {
                return Err(NnError::OptimiserShape {
                    block: b.name.clone(),
                    expected: b.values.len(),
                    got: b.grad.len(),
                });
            }
            let block_sq: f64 = b.grad.iter().map(|g| g * g).sum();
            if !block_sq.is_finite() {
                return Err(NnError::NonFiniteGradient { block: b.name.clone() });
            }
            sq += block_sq;
        }
        if self.first_moment.is_empty() {
            self.first_moment = blocks.iter().map(|b| vec![0.0; b.values.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        if self.first_moment.len() != blocks.len() {
            return Err(NnError::OptimiserShape {
                block: "<block list>".into(),
                expected: self.first_moment.len(),
                got: blocks.len(),
            });
        }
        for (b, m) in blocks.iter().zip(&self.first_moment) {
            if m.len() != b.values.len() {
                return Err(NnError::OptimiserShape {
                    block: b.name.clone(),
                    expected: m.len(),
                    got: b.values.len(),
                });
            }
        }
        let norm = sq.sqrt();
        let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for ((b, m), v) in blocks.iter_mut().zip(&mut self.first_moment).zip(&mut self.second_moment) {
            for (((p, g), mi), vi) in b.values.iter_mut().zip(b.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g * scale;
                *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
                *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
            }
        }
        Ok(norm)
    }
}

pub fn adam_step(
    blocks: &mut [ParamBlock<'_>],
    state: &mut AdamState,
    lr: f64,
    clip_norm: f64,
) -> Result<f64, NnError> {
    state.step(blocks, lr, clip_norm)
}

/// Geometric decay `lr(t) = start · (final/start)^(t/total_steps)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub start_lr: f64,
    pub final_lr: f64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn new(start_lr: f64, final_lr: f64, total_steps: u64) -> Result<Self, NnError> {
        for lr in [start_lr, final_lr] {
            if !(lr > 0.0) || !lr.is_finite() {
                return Err(NnError::LearningRate(lr));
            }
        }
        Ok(Self {
            start_lr,
            final_lr,
            total_steps,
        })
    }

    pub fn lr(&self, step: u64) -> f64 {
        if self.total_steps == 0 {
            return self.start_lr;
        }
        let frac = step.min(self.total_steps) as f64 / self.total_steps as f64;
        self.start_lr * (self.final_lr / self.start_lr).powf(frac)
    }
}
