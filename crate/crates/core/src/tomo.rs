//! Parallel-beam Radon forward matrices and measurement noise.
//!
//! Coordinates: the image covers `[-side/2, side/2]²` with pixel centres at
//! half-integers; pixel `(row, col)` has centre
//! `(col + ½ − side/2, side/2 − row − ½)`, so row 0 is the top of the image.
//! For angle `θ` the detector axis is `e = (cos θ, sin θ)` and rays travel
//! along `d = (−sin θ, cos θ)`. Bin `b` sits at detector offset
//! `t_b = b − (bins − 1)/2` (unit spacing, centred on the image centre).
//! Matrix row `k · bins + b` belongs to angle `k`, bin `b`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::rng::seeded;

#[derive(Debug, thiserror::Error)]
pub enum TomoError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error("cannot normalise: every sinogram entry is zero")]
    ZeroBatch,
    #[error("cannot normalise an empty batch")]
    EmptyBatch,
    #[error("SNR noise needs a non-zero signal")]
    ZeroSignal,
}

/// How one matrix row integrates over the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayModel {
    /// Detector strip of unit width: entry = area of the pixel inside the
    /// strip. Conserves per-angle projection mass exactly.
    #[default]
    Strip,
    /// One ray through each bin centre: entry = length of the ray inside the
    /// pixel (Siddon traversal).
    Siddon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoGeometry {
    pub image_side: usize,
    pub num_angles: usize,
    pub detector_bins: usize,
    #[serde(default)]
    pub ray_model: RayModel,
}

impl TomoGeometry {
    pub fn new(image_side: usize, num_angles: usize, detector_bins: usize) -> Self {
        Self {
            image_side,
            num_angles,
            detector_bins,
            ray_model: RayModel::default(),
        }
    }

    pub fn with_ray_model(mut self, model: RayModel) -> Self {
        self.ray_model = model;
        self
    }

    /// `angle_k = k·π/num_angles`.
    pub fn angles(&self) -> Vec<f64> {
        (0..self.num_angles)
            .map(|k| k as f64 * std::f64::consts::PI / self.num_angles as f64)
            .collect()
    }

    /// Image dimension `m = side²`.
    pub fn image_dim(&self) -> usize {
        self.image_side * self.image_side
    }

    /// Sinogram dimension `n = angles × bins`.
    pub fn data_dim(&self) -> usize {
        self.num_angles * self.detector_bins
    }

    pub fn validate(&self) -> Result<(), TomoError> {
        if self.image_side < 2 {
            return Err(TomoError::Geometry(format!(
                "image_side must be >= 2, got {}",
                self.image_side
            )));
        }
        if self.num_angles < 1 || self.detector_bins < 1 {
            return Err(TomoError::Geometry(
                "num_angles and detector_bins must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn bin_offset(&self, b: usize) -> f64 {
        b as f64 - (self.detector_bins as f64 - 1.0) / 2.0
    }

    fn pixel_centre(&self, row: usize, col: usize) -> (f64, f64) {
        let h = self.image_side as f64 / 2.0;
        (col as f64 + 0.5 - h, h - row as f64 - 0.5)
    }
}

/// Dense forward matrix together with its geometry.
#[derive(Clone, Debug)]
pub struct RadonOperator {
    pub geometry: TomoGeometry,
    pub matrix: DenseMatrix,
}

impl RadonOperator {
    pub fn apply(&self, image: &[f64]) -> Vec<f64> {
        self.matrix.matvec(image).expect("image length must equal side²")
    }

    pub fn adjoint(&self, sinogram: &[f64]) -> Vec<f64> {
        self.matrix
            .tr_matvec(sinogram)
            .expect("sinogram length must equal angles × bins")
    }
}

/// Assembles the `n × m` forward matrix. Rows of different angles are
/// written disjointly, so the result does not depend on scheduling.
pub fn assemble_radon(geometry: &TomoGeometry) -> Result<RadonOperator, TomoError> {
    geometry.validate()?;
    let n = geometry.data_dim();
    let m = geometry.image_dim();
    let bins = geometry.detector_bins;
    let angles = geometry.angles();
    let mut data = vec![0.0; n * m];
    data.par_chunks_mut(bins * m)
        .zip(angles.par_iter())
        .for_each(|(block, &theta)| match geometry.ray_model {
            RayModel::Strip => strip_block(geometry, theta, block),
            RayModel::Siddon => siddon_block(geometry, theta, block),
        });
    let matrix = DenseMatrix::from_vec(n, m, data).expect("assembled entries are finite");
    Ok(RadonOperator {
        geometry: geometry.clone(),
        matrix,
    })
}

fn strip_block(g: &TomoGeometry, theta: f64, block: &mut [f64]) {
    let side = g.image_side;
    let m = side * side;
    let (ex, ey) = (theta.cos(), theta.sin());
    let (a, b) = (ex.abs(), ey.abs());
    let half_support = 0.5 * (a + b);
    let t0 = g.bin_offset(0);
    for row in 0..side {
        for col in 0..side {
            let (cx, cy) = g.pixel_centre(row, col);
            let centre = cx * ex + cy * ey;
            let lo = ((centre - half_support - 0.5 - t0).floor().max(0.0)) as usize;
            let hi = ((centre + half_support + 0.5 - t0).ceil()) as isize;
            if hi < 0 {
                continue;
            }
            let hi = (hi as usize).min(g.detector_bins - 1);
            let pixel = row * side + col;
            for bin in lo..=hi {
                let t = g.bin_offset(bin) - centre;
                let w = uniform_sum_cdf(t + 0.5, a, b) - uniform_sum_cdf(t - 0.5, a, b);
                if w > 0.0 {
                    block[bin * m + pixel] = w;
                }
            }
        }
    }
}

/// CDF at `u` of `X + Y` with `X ~ U(−a/2, a/2)`, `Y ~ U(−b/2, b/2)`: the
/// fraction of a unit pixel whose projection onto the detector axis is `≤ u`.
fn uniform_sum_cdf(u: f64, a: f64, b: f64) -> f64 {
    let (wide, narrow) = if a >= b { (a, b) } else { (b, a) };
    let v = u + 0.5 * (wide + narrow);
    if v <= 0.0 {
        return 0.0;
    }
    if v >= wide + narrow {
        return 1.0;
    }
    if narrow < 1e-12 {
        return (v / wide).clamp(0.0, 1.0);
    }
    if v <= narrow {
        v * v / (2.0 * wide * narrow)
    } else if v <= wide {
        (v - 0.5 * narrow) / wide
    } else {
        let r = wide + narrow - v;
        1.0 - r * r / (2.0 * wide * narrow)
    }
}

fn siddon_block(g: &TomoGeometry, theta: f64, block: &mut [f64]) {
    let side = g.image_side;
    let m = side * side;
    let h = side as f64 / 2.0;
    let (ex, ey) = (theta.cos(), theta.sin());
    let (dx, dy) = (-ey, ex);
    let mut crossings: Vec<f64> = Vec::with_capacity(2 * side + 4);
    for bin in 0..g.detector_bins {
        let t = g.bin_offset(bin);
        let (px, py) = (t * ex, t * ey);
        // Parameter interval inside the bounding box.
        let mut s_lo = f64::NEG_INFINITY;
        let mut s_hi = f64::INFINITY;
        for (p, d) in [(px, dx), (py, dy)] {
            if d.abs() < 1e-14 {
                if p < -h || p > h {
                    s_lo = f64::INFINITY;
                }
            } else {
                let (s0, s1) = ((-h - p) / d, (h - p) / d);
                s_lo = s_lo.max(s0.min(s1));
                s_hi = s_hi.min(s0.max(s1));
            }
        }
        if !(s_hi > s_lo) {
            continue;
        }
        crossings.clear();
        crossings.push(s_lo);
        crossings.push(s_hi);
        for (p, d) in [(px, dx), (py, dy)] {
            if d.abs() < 1e-14 {
                continue;
            }
            for i in 0..=side {
                let s = (i as f64 - h - p) / d;
                if s > s_lo && s < s_hi {
                    crossings.push(s);
                }
            }
        }
        crossings.sort_by(f64::total_cmp);
        let row_block = &mut block[bin * m..(bin + 1) * m];
        for w in crossings.windows(2) {
            let len = w[1] - w[0];
            if len <= 1e-12 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let (x, y) = (px + mid * dx, py + mid * dy);
            let col = (x + h).floor();
            let rfb = (y + h).floor();
            if col < 0.0 || rfb < 0.0 || col >= side as f64 || rfb >= side as f64 {
                continue;
            }
            let row = side - 1 - rfb as usize;
            row_block[row * side + col as usize] += len;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// i.i.d. `N(0, level²)` per entry.
    GaussianLevel { level: f64 },
    /// i.i.d. Gaussian with σ from `10·log₁₀(‖y‖² / (n σ²)) = snr_db`.
    GaussianSnr { snr_db: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian_level(level: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::GaussianLevel { level },
            seed,
        }
    }

    pub fn gaussian_snr(snr_db: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::GaussianSnr { snr_db },
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), TomoError> {
        match self.kind {
            NoiseKind::GaussianLevel { level } if !(level >= 0.0) || !level.is_finite() => {
                Err(TomoError::Noise(format!("noise level must be finite and >= 0, got {level}")))
            }
            NoiseKind::GaussianSnr { snr_db } if !snr_db.is_finite() => {
                Err(TomoError::Noise("snr_db must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Per-entry standard deviation this model would use for `y`.
    pub fn sigma_for(&self, y: &[f64]) -> Result<f64, TomoError> {
        self.validate()?;
        match self.kind {
            NoiseKind::GaussianLevel { level } => Ok(level),
            NoiseKind::GaussianSnr { snr_db } => {
                let power: f64 = y.iter().map(|v| v * v).sum();
                if power == 0.0 || y.is_empty() {
                    return Err(TomoError::ZeroSignal);
                }
                Ok((power / (y.len() as f64 * 10f64.powf(snr_db / 10.0))).sqrt())
            }
        }
    }
}

/// Adds seeded Gaussian noise; identical seeds give bit-identical output.
pub fn add_noise(y: &[f64], model: &NoiseModel) -> Result<Vec<f64>, TomoError> {
    let sigma = model.sigma_for(y)?;
    if sigma == 0.0 {
        return Ok(y.to_vec());
    }
    let mut rng = seeded(model.seed);
    Ok(y
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
        .collect())
}

/// Divides the whole batch by its largest absolute entry.
pub fn normalise_sinograms(batch: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64), TomoError> {
    if batch.is_empty() {
        return Err(TomoError::EmptyBatch);
    }
    let factor = batch
        .iter()
        .flat_map(|y| y.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if factor == 0.0 {
        return Err(TomoError::ZeroBatch);
    }
    let scaled = batch
        .iter()
        .map(|y| y.iter().map(|v| v / factor).collect())
        .collect();
    Ok((scaled, factor))
}
