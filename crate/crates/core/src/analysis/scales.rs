use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::linalg::DenseMatrix;
use crate::lsvd::LsvdModel;
use crate::rng::derive_seed;
use crate::tomo::{add_noise, NoiseModel};

/// Latent scale profiles per noise level. `raw[l][i]` is the mean effective
/// scale of latent index `order[i]` at `levels[l]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleCurves {
    pub levels: Vec<f64>,
    pub order: Vec<usize>,
    pub raw: Vec<Vec<f64>>,
    pub smoothed: Vec<Vec<f64>>,
}

/// Index `i` reflected into `0..n` about the edges (`d c b a | a b c d`),
/// periodically for offsets longer than the signal.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let r = i.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}

/// Normalised Gaussian filter truncated at `4σ` with reflecting boundaries.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || values.is_empty() {
        return values.to_vec();
    }
    let radius = (4.0 * sigma + 0.5) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|t| (-0.5 * (t as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let n = values.len();
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(k, t)| k * values[reflect(i + t, n)])
                .sum()
        })
        .collect()
}

/// Mean effective diagonal scales of Σ on noisy versions of `clean` at each
/// noise level (per-entry Gaussian standard deviation), then smoothed.
/// Scales of non-diagonal Σ are the ratios `z_x,i / z_y,i` with
/// `|z_y,i| < 1e-8` excluded. When `order_by_magnitude` is set, latent
/// indices are sorted by decreasing absolute scale at the highest level.
pub fn scale_noise_curves(
    model: &LsvdModel,
    clean: &DenseMatrix,
    levels: &[f64],
    seed: u64,
    smoothing_sigma: f64,
    order_by_magnitude: bool,
) -> Result<ScaleCurves, AnalysisError> {
    let k = model.latent_dim();
    let mut raw = Vec::with_capacity(levels.len());
    for (l, &delta) in levels.iter().enumerate() {
        let mut noisy = clean.clone();
        for i in 0..clean.rows() {
            let nm = NoiseModel::gaussian_level(delta, derive_seed(derive_seed(seed, l as u64), i as u64));
            let y = add_noise(clean.row(i), &nm)?;
            noisy.row_mut(i).copy_from_slice(&y);
        }
        let z = model.enc_y.net.predict_batch(&noisy)?;
        let scales = model.sigma.effective_scales(&z)?;
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for i in 0..scales.rows() {
            for j in 0..k {
                let v = scales.get(i, j);
                if v.is_finite() {
                    sum[j] += v;
                    count[j] += 1;
                }
            }
        }
        raw.push(
            sum.iter()
                .zip(&count)
                .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
                .collect::<Vec<f64>>(),
        );
    }
    let mut order: Vec<usize> = (0..k).collect();
    if order_by_magnitude {
        if let Some(top) = levels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| &raw[i])
        {
            order.sort_by(|&a, &b| top[b].abs().total_cmp(&top[a].abs()));
        }
    }
    let raw: Vec<Vec<f64>> = raw.iter().map(|r| order.iter().map(|&i| r[i]).collect()).collect();
    let smoothed = raw.iter().map(|r| gaussian_smooth(r, smoothing_sigma)).collect();
    Ok(ScaleCurves {
        levels: levels.to_vec(),
        order,
        raw,
        smoothed,
    })
}

/// `rank,latent_index,<δ₁>,<δ₂>,…` with smoothed values.
pub fn write_scale_csv(curves: &ScaleCurves) -> String {
    let mut s = String::from("rank,latent_index");
    for l in &curves.levels {
        let _ = write!(s, ",delta_{l}");
    }
    s.push('\n');
    for (rank, idx) in curves.order.iter().enumerate() {
        let _ = write!(s, "{rank},{idx}");
        for prof in &curves.smoothed {
            let _ = write!(s, ",{:e}", prof[rank]);
        }
        s.push('\n');
    }
    s
}
