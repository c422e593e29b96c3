//! Closed-form reconstructions built on a thin SVD of the forward matrix,
//! plus an affine MMSE estimator fitted to training pairs.

use crate::linalg::{gemm, Cholesky, DenseMatrix, LinalgError, SvdFactorization, RANK_TOL};

#[derive(Debug, thiserror::Error)]
pub enum ClassicalError {
    #[error("truncation rank {requested} exceeds numerical rank {numerical_rank}")]
    RankTooLarge { requested: usize, numerical_rank: usize },
    #[error("truncation rank must be at least 1")]
    ZeroRank,
    #[error("regularisation parameter must be finite and >= 0, got {0}")]
    NegativeAlpha(f64),
    #[error("operator is not of full row rank (numerical rank {numerical_rank} < {rows})")]
    NotFullRowRank { numerical_rank: usize, rows: usize },
    #[error("prior covariance {which} is {problem}")]
    InvalidPrior { which: &'static str, problem: String },
    #[error("need at least 2 training pairs, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} has length {got}, expected {expected}")]
    Length { index: usize, got: usize, expected: usize },
    #[error("C_yy + ridge·I is singular; increase the ridge (currently {ridge:e})")]
    SingularCovariance { ridge: f64 },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `s/(s² + α)`; directions with `s ≤ s₁·RANK_TOL` are zeroed.
pub fn tikhonov_filter(s: &[f64], alpha: f64) -> Vec<f64> {
    let cut = s.first().copied().unwrap_or(0.0) * RANK_TOL;
    s.iter()
        .map(|&v| if v > cut { v / (v * v + alpha) } else { 0.0 })
        .collect()
}

/// `1/s` for the leading `r` values, `0` elsewhere.
pub fn tsvd_filter(s: &[f64], r: usize) -> Vec<f64> {
    s.iter()
        .enumerate()
        .map(|(i, &v)| if i < r { 1.0 / v } else { 0.0 })
        .collect()
}

/// `V diag(f) Uᵀ y`.
pub fn apply_filter(svd: &SvdFactorization, filter: &[f64], y: &[f64]) -> Vec<f64> {
    let mut c = svd.project_data(y);
    for (ci, f) in c.iter_mut().zip(filter) {
        *ci *= f;
    }
    svd.lift_latent(&c)
}

/// Explicit `m × n` reconstruction matrix `V diag(f) Uᵀ`.
pub fn filter_matrix(svd: &SvdFactorization, filter: &[f64]) -> DenseMatrix {
    let mut vf = svd.v.clone();
    let r = vf.cols();
    for row in vf.data_mut().chunks_mut(r) {
        for (v, f) in row.iter_mut().zip(filter) {
            *v *= f;
        }
    }
    let mut out = DenseMatrix::zeros(svd.v.rows(), svd.u.rows());
    gemm(1.0, &vf, false, &svd.u, true, 0.0, &mut out);
    out
}

/// Pseudo-inverse solution `A†y`.
pub fn mle_reconstruct(svd: &SvdFactorization, y: &[f64]) -> Vec<f64> {
    apply_filter(svd, &tikhonov_filter(&svd.s, 0.0), y)
}

/// Zero `alpha` falls back to the pseudo-inverse convention.
pub fn tikhonov_reconstruct(
    svd: &SvdFactorization,
    y: &[f64],
    alpha: f64,
) -> Result<Vec<f64>, ClassicalError> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(ClassicalError::NegativeAlpha(alpha));
    }
    Ok(apply_filter(svd, &tikhonov_filter(&svd.s, alpha), y))
}

pub fn tsvd_reconstruct(
    svd: &SvdFactorization,
    y: &[f64],
    r: usize,
) -> Result<Vec<f64>, ClassicalError> {
    check_truncation(svd, r)?;
    Ok(apply_filter(svd, &tsvd_filter(&svd.s, r), y))
}

fn check_truncation(svd: &SvdFactorization, r: usize) -> Result<(), ClassicalError> {
    if r == 0 {
        return Err(ClassicalError::ZeroRank);
    }
    let numerical_rank = svd.numerical_rank(RANK_TOL);
    if r > numerical_rank {
        return Err(ClassicalError::RankTooLarge {
            requested: r,
            numerical_rank,
        });
    }
    Ok(())
}

/// Gaussian noise covariance `B` (data space) and the latent prior
/// covariance `C_Vn`, with `C₀ = V_n C_Vn V_nᵀ`.
#[derive(Clone, Debug)]
pub struct GaussianPrior {
    pub noise_cov_b: DenseMatrix,
    pub prior_cov_cvn: DenseMatrix,
}

impl GaussianPrior {
    pub fn new(noise_cov_b: DenseMatrix, prior_cov_cvn: DenseMatrix) -> Result<Self, ClassicalError> {
        for (which, m) in [("B", &noise_cov_b), ("C_Vn", &prior_cov_cvn)] {
            if m.rows() != m.cols() {
                return Err(ClassicalError::InvalidPrior {
                    which,
                    problem: format!("not square ({}×{})", m.rows(), m.cols()),
                });
            }
            let asym = m.asymmetry();
            if asym > 1e-12 {
                return Err(ClassicalError::InvalidPrior {
                    which,
                    problem: format!("not symmetric (max asymmetry {asym:e})"),
                });
            }
            Cholesky::new(m).map_err(|e| ClassicalError::InvalidPrior {
                which,
                problem: e.to_string(),
            })?;
        }
        Ok(Self {
            noise_cov_b,
            prior_cov_cvn,
        })
    }

    /// `B = δ·I`, `C_Vn = γ·I`: the MAP estimate is Tikhonov with `α = δ/γ`.
    pub fn isotropic(n: usize, delta: f64, gamma: f64) -> Result<Self, ClassicalError> {
        Self::new(
            DenseMatrix::identity(n).scaled(delta),
            DenseMatrix::identity(n).scaled(gamma),
        )
    }
}

/// MAP estimate `V_n [B̃ (C_Vn S_n)⁻¹ + S_n]⁻¹ Uᵀ y`, with `B̃ = Uᵀ B U`.
///
/// Evaluated as `V_n C_Vn S_n (B̃ + S_n C_Vn S_n)⁻¹ Uᵀ y`, which only needs an
/// SPD solve.
pub fn bayes_map_reconstruct(
    svd: &SvdFactorization,
    prior: &GaussianPrior,
    y: &[f64],
) -> Result<Vec<f64>, ClassicalError> {
    let n = svd.u.rows();
    let numerical_rank = svd.numerical_rank(RANK_TOL);
    if svd.s.len() != n || numerical_rank < n {
        return Err(ClassicalError::NotFullRowRank {
            numerical_rank,
            rows: n,
        });
    }
    for (which, m) in [("B", &prior.noise_cov_b), ("C_Vn", &prior.prior_cov_cvn)] {
        if m.rows() != n {
            return Err(ClassicalError::InvalidPrior {
                which,
                problem: format!("of size {} but the data space has dimension {n}", m.rows()),
            });
        }
    }
    let mut bu = DenseMatrix::zeros(n, n);
    gemm(1.0, &prior.noise_cov_b, false, &svd.u, false, 0.0, &mut bu);
    let mut system = DenseMatrix::zeros(n, n);
    gemm(1.0, &svd.u, true, &bu, false, 0.0, &mut system);
    let s = &svd.s;
    let c = &prior.prior_cov_cvn;
    for i in 0..n {
        for j in 0..n {
            let v = system.get(i, j) + s[i] * c.get(i, j) * s[j];
            system.set(i, j, v);
        }
    }
    // Symmetrise away rounding from B̃ before factorising.
    let sym = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (system.get(i, j) + system.get(j, i)));
    let w = Cholesky::new(&sym)?.solve(&svd.project_data(y))?;
    let sw: Vec<f64> = w.iter().zip(s).map(|(a, b)| a * b).collect();
    let z = c.matvec(&sw)?;
    Ok(svd.lift_latent(&z))
}

/// Affine estimator `x̄ + C_xy (C_yy + ridge·I)⁻¹ (y − ȳ)` fitted to pairs.
#[derive(Clone, Debug)]
pub struct LinearMmse {
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    /// `m × n` gain `C_xy (C_yy + ridge·I)⁻¹`.
    pub gain: DenseMatrix,
    pub ridge: f64,
}

impl LinearMmse {
    /// `ridge = None` selects `1e-6 · trace(C_yy) / n`.
    pub fn fit(
        train_x: &[Vec<f64>],
        train_y: &[Vec<f64>],
        ridge: Option<f64>,
    ) -> Result<Self, ClassicalError> {
        let count = train_x.len().min(train_y.len());
        if count < 2 || train_x.len() != train_y.len() {
            return Err(ClassicalError::TooFewSamples(count));
        }
        let xc = centred(train_x)?;
        let yc = centred(train_y)?;
        let (m, n) = (xc.0.cols(), yc.0.cols());
        let scale = 1.0 / (count as f64 - 1.0);
        let mut cyy = DenseMatrix::zeros(n, n);
        gemm(scale, &yc.0, true, &yc.0, false, 0.0, &mut cyy);
        let mut cyx = DenseMatrix::zeros(n, m);
        gemm(scale, &yc.0, true, &xc.0, false, 0.0, &mut cyx);
        let trace: f64 = (0..n).map(|i| cyy.get(i, i)).sum();
        let ridge = ridge.unwrap_or(1e-6 * trace / n as f64);
        for i in 0..n {
            cyy.set(i, i, cyy.get(i, i) + ridge);
        }
        let chol = Cholesky::new(&cyy).map_err(|_| ClassicalError::SingularCovariance { ridge })?;
        // (C_yy + rI) Gᵀ = C_yx
        let gain = chol.solve_matrix(&cyx)?.transpose();
        Ok(Self {
            mean_x: xc.1,
            mean_y: yc.1,
            gain,
            ridge,
        })
    }

    pub fn reconstruct(&self, y: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = y.iter().zip(&self.mean_y).map(|(a, b)| a - b).collect();
        let mut x = self.gain.matvec(&diff).expect("data length must match training data");
        for (xi, mi) in x.iter_mut().zip(&self.mean_x) {
            *xi += mi;
        }
        x
    }
}

fn centred(samples: &[Vec<f64>]) -> Result<(DenseMatrix, Vec<f64>), ClassicalError> {
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for (index, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(ClassicalError::Length {
                index,
                got: s.len(),
                expected: dim,
            });
        }
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= samples.len() as f64;
    }
    let mut data = Vec::with_capacity(samples.len() * dim);
    for s in samples {
        data.extend(s.iter().zip(&mean).map(|(v, m)| v - m));
    }
    Ok((DenseMatrix::from_vec(samples.len(), dim, data)?, mean))
}

/// Mean per-entry variance of a sample set; the ridge of [`LinearMmse`] is
/// chosen relative to it.
pub fn mean_variance(samples: &[Vec<f64>]) -> Result<f64, ClassicalError> {
    if samples.len() < 2 {
        return Err(ClassicalError::TooFewSamples(samples.len()));
    }
    let (c, _) = centred(samples)?;
    let ss: f64 = c.data().iter().map(|v| v * v).sum();
    Ok(ss / ((samples.len() - 1) * c.cols()) as f64)
}

/// Picks the ridge of [`LinearMmse`] from `relative · mean_variance(y)` by
/// fitting on four fifths of the samples and scoring the mean reconstruction
/// MSE on every fifth. Returns the absolute ridge for the full set and the
/// held-out MSE it achieved.
pub fn select_mmse_ridge(
    train_x: &[Vec<f64>],
    train_y: &[Vec<f64>],
    relative: &[f64],
) -> Result<(f64, f64), ClassicalError> {
    if train_x.len() != train_y.len() || train_x.len() < 10 {
        return Err(ClassicalError::TooFewSamples(train_x.len().min(train_y.len())));
    }
    let held = |i: &usize| i % 5 == 4;
    let pick = |v: &[Vec<f64>], keep: bool| -> Vec<Vec<f64>> {
        v.iter().enumerate().filter(|(i, _)| held(i) != keep).map(|(_, s)| s.clone()).collect()
    };
    let (fit_x, fit_y) = (pick(train_x, true), pick(train_y, true));
    let (val_x, val_y) = (pick(train_x, false), pick(train_y, false));
    let unit_fit = mean_variance(&fit_y)?;
    let mut best: Option<(f64, f64)> = None;
    for &r in relative {
        let Ok(est) = LinearMmse::fit(&fit_x, &fit_y, Some(r * unit_fit)) else {
            continue;
        };
        let mse = val_x
            .iter()
            .zip(&val_y)
            .map(|(x, y)| {
                let e = est.reconstruct(y);
                e.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64
            })
            .sum::<f64>()
            / val_x.len() as f64;
        if best.is_none_or(|(_, m)| mse < m) {
            best = Some((r, mse));
        }
    }
    let (r, mse) = best.ok_or(ClassicalError::EmptyGrid)?;
    Ok((r * mean_variance(train_y)?, mse))
}

pub fn linear_mmse_reconstruct(
    train_x: &[Vec<f64>],
    train_y: &[Vec<f64>],
    y: &[f64],
    ridge: Option<f64>,
) -> Result<Vec<f64>, ClassicalError> {
    Ok(LinearMmse::fit(train_x, train_y, ridge)?.reconstruct(y))
}

/// `16` logarithmically spaced points per decade from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let steps = ((b - a) * per_decade as f64).round().max(0.0) as usize;
    (0..=steps)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / steps.max(1) as f64))
        .collect()
}

/// Default α search range: `[1e-8, 10] · s₁²`, 16 points per decade.
pub fn default_alpha_grid(svd: &SvdFactorization) -> Vec<f64> {
    let s1 = svd.s.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    log_grid(1e-8 * s1 * s1, 10.0 * s1 * s1, 16)
}

/// Precomputed latent coordinates of an evaluation set so that the mean
/// reconstruction MSE of any spectral filter costs `O(N·r)`.
pub struct SpectralEvaluator {
    coeffs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    image_dim: usize,
}

impl SpectralEvaluator {
    pub fn new(svd: &SvdFactorization, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Self {
        let coeffs = ys.iter().map(|y| svd.project_data(y)).collect();
        let mut targets = Vec::with_capacity(xs.len());
        let mut residuals = Vec::with_capacity(xs.len());
        for x in xs {
            let t = svd.v.tr_matvec(x).expect("image length must equal operator columns");
            let total: f64 = x.iter().map(|v| v * v).sum();
            let inside: f64 = t.iter().map(|v| v * v).sum();
            residuals.push((total - inside).max(0.0));
            targets.push(t);
        }
        Self {
            coeffs,
            targets,
            residuals,
            image_dim: svd.v.rows(),
        }
    }

    /// Mean over samples of `‖V diag(f) Uᵀ y − x‖² / m`.
    pub fn mean_mse(&self, filter: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((c, t), r) in self.coeffs.iter().zip(&self.targets).zip(&self.residuals) {
            let mut e = *r;
            for ((ci, ti), f) in c.iter().zip(t).zip(filter) {
                e += (f * ci - ti).powi(2);
            }
            acc += e;
        }
        acc / (self.coeffs.len().max(1) as f64 * self.image_dim as f64)
    }
}

/// Grid-optimal Tikhonov parameter and its mean MSE on `(xs, ys)`.
pub fn select_tikhonov_alpha(
    svd: &SvdFactorization,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    grid: &[f64],
) -> Result<(f64, f64), ClassicalError> {
    let eval = SpectralEvaluator::new(svd, xs, ys);
    grid.iter()
        .map(|&a| (a, eval.mean_mse(&tikhonov_filter(&svd.s, a))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(ClassicalError::EmptyGrid)
}

/// Best truncation rank over `1..=numerical_rank` and its mean MSE.
pub fn select_tsvd_rank(
    svd: &SvdFactorization,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> Result<(usize, f64), ClassicalError> {
    let eval = SpectralEvaluator::new(svd, xs, ys);
    (1..=svd.numerical_rank(RANK_TOL))
        .map(|r| (r, eval.mean_mse(&tsvd_filter(&svd.s, r))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(ClassicalError::EmptyGrid)
}
