use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::config::{DataSource, ExperimentConfig, Method};
use super::ExperimentError;
use crate::analysis::{
    ball_coverage_estimate, decode_dictionary, scale_noise_curves, stability_bound, write_dictionary,
    write_scale_csv,
};
use crate::classical::{
    default_alpha_grid, select_mmse_ridge, select_tikhonov_alpha, select_tsvd_rank, tikhonov_filter, tsvd_filter,
    LinearMmse,
};
use crate::data::{
    bilinear_rescale, build_dataset, dihedral_augment, generate_phantoms, load_idx_images, metric_mse, metric_psnr,
    metric_ssim, tile_grid, write_pgm_raw, DatasetOptions, DatasetSplit, ImageSignal, Sample,
};
use crate::linalg::{svd_thin, DenseMatrix, SvdFactorization, DEFAULT_MAX_SWEEPS, DEFAULT_SVD_TOL, RANK_TOL};
use crate::lsvd::{
    save_model, train_lsvd, LsvdArchitecture, LsvdModel, Output, SigmaVariant, TrainingHistory,
};
use crate::nn::{init_network_with_std, stack_activations, Activation, MlpNetwork};
use crate::rng::{derive_seed, seeded};
use crate::tomo::{assemble_radon, RadonOperator};

/// Reconstructions shown in the image grids.
const GRID_SAMPLES: usize = 8;

/// Ridge candidates of the linear MMSE baseline, relative to the mean
/// sinogram variance.
const MMSE_RIDGES: [f64; 9] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2];

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub quiet: bool,
    /// Write a checkpoint per trained or SVD-based method.
    pub save_models: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            quiet: false,
            save_models: true,
        }
    }
}

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub method: Method,
    pub test_mse: f64,
    pub test_mse_std: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    /// Mean MSE over the paired training samples the method was fitted on.
    pub train_mse: f64,
    /// `|test_mse − train_mse|`.
    pub gap: f64,
    pub test_count: usize,
}

impl MetricsRow {
    const HEADER: &'static str = "method,test_mse,test_mse_std,psnr_mean,psnr_std,ssim_mean,ssim_std,train_mse,gap,test_count";

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.test_mse,
            self.test_mse_std,
            self.psnr_mean,
            self.psnr_std,
            self.ssim_mean,
            self.ssim_std,
            self.train_mse,
            self.gap,
            self.test_count
        )
    }
}

/// A fitted method before evaluation.
pub struct TrainedMethod {
    pub method: Method,
    /// Absent only for the linear-MMSE baseline.
    pub model: Option<LsvdModel>,
    mmse: Option<LinearMmse>,
    pub history: Option<TrainingHistory>,
    /// Selected parameters, e.g. `alpha` or `rank`.
    pub details: BTreeMap<String, f64>,
}

impl TrainedMethod {
    fn output(&self) -> Output {
        if self.method.is_image_autoencoder() {
            Output::ImageAutoencoder
        } else {
            Output::Sigma
        }
    }

    /// Reconstructions of `samples`, one row each.
    pub fn reconstruct(&self, samples: &[Sample]) -> Result<DenseMatrix, ExperimentError> {
        if let Some(mmse) = &self.mmse {
            let rows: Vec<Vec<f64>> = samples.iter().map(|s| mmse.reconstruct(&s.y_noisy)).collect();
            return Ok(DenseMatrix::from_rows(&rows)?);
        }
        let model = self.model.as_ref().expect("every other method carries a model");
        Ok(match self.output() {
            Output::Sigma => model.reconstruct_batch(&stack(samples, |s| &s.y_noisy))?,
            Output::ImageAutoencoder => model.autoencode_images(&stack(samples, |s| &s.x))?,
        })
    }
}

pub struct MethodResult {
    pub trained: TrainedMethod,
    pub row: MetricsRow,
    pub seconds: f64,
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub results: Vec<MethodResult>,
}

impl RunSummary {
    pub fn row(&self, method: Method) -> Option<&MetricsRow> {
        self.results.iter().map(|r| &r.row).find(|r| r.method == method)
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(MetricsRow::HEADER);
        s.push('\n');
        for r in &self.results {
            s.push_str(&r.row.csv_line());
            s.push('\n');
        }
        s
    }
}

pub struct PreparedData {
    pub operator: RadonOperator,
    /// `A / normalisation`, the operator that maps images to the stored
    /// sinograms.
    pub effective: DenseMatrix,
    pub split: DatasetSplit,
}

fn stack(samples: &[Sample], f: impl Fn(&Sample) -> &[f64]) -> DenseMatrix {
    let cols = samples.first().map_or(0, |s| f(s).len());
    let mut m = DenseMatrix::zeros(samples.len(), cols);
    for (i, s) in samples.iter().enumerate() {
        m.row_mut(i).copy_from_slice(f(s));
    }
    m
}

fn load_idx(path: &Path, count: usize, side: usize) -> Result<Vec<ImageSignal>, ExperimentError> {
    let images = load_idx_images(path)?;
    if images.len() < count {
        return Err(ExperimentError::Invalid {
            field: "dataset.count".into(),
            message: format!("{} holds {} images, {count} requested", path.display(), images.len()),
        });
    }
    Ok(images
        .into_iter()
        .take(count)
        .map(|img| if img.side == side { img } else { bilinear_rescale(&img, side) })
        .collect())
}

/// Training and test images in split order.
fn split_images(cfg: &ExperimentConfig) -> Result<(Vec<ImageSignal>, Vec<ImageSignal>), ExperimentError> {
    let side = cfg.geometry.image_side;
    let d = &cfg.dataset;
    let seeds = cfg.seeds();
    let random_split = |images: Vec<ImageSignal>| {
        let mut order: Vec<usize> = (0..images.len()).collect();
        order.shuffle(&mut seeded(seeds.split));
        let n_train = ((d.split_fraction * images.len() as f64).round() as usize).clamp(1, images.len() - 1);
        let mut slots: Vec<Option<ImageSignal>> = images.into_iter().map(Some).collect();
        let mut take = |ids: &[usize]| -> Vec<ImageSignal> {
            ids.iter().map(|&i| slots[i].take().expect("indices are unique")).collect()
        };
        let train = take(&order[..n_train]);
        let test = take(&order[n_train..]);
        (train, test)
    };
    Ok(match &d.source {
        DataSource::Phantoms { rule } => random_split(generate_phantoms(d.count, side, rule, seeds.images)),
        DataSource::Idx { path, test_path: None, .. } => random_split(load_idx(path, d.count, side)?),
        DataSource::Idx {
            path,
            test_path: Some(test_path),
            test_count,
        } => (load_idx(path, d.count, side)?, load_idx(test_path, *test_count, side)?),
    })
}

/// Builds the operator and the noisy, normalised, split dataset.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, ExperimentError> {
    let operator = assemble_radon(&cfg.geometry)?;
    let (mut train, test) = split_images(cfg)?;
    if cfg.dataset.augment {
        train = train.iter().flat_map(dihedral_augment).collect();
    }
    let held_out = test.len();
    let mut images = train;
    images.extend(test);
    let seeds = cfg.seeds();
    let opts = DatasetOptions {
        noise: cfg.noise.to_spec(seeds.noise),
        paired_fraction: cfg.dataset.paired_fraction,
        split_fraction: 1.0,
        drop_unpaired: cfg.dataset.drop_unpaired,
        held_out_tail: held_out,
        seed: seeds.split,
    };
    let split = build_dataset(&images, &operator, &opts)?;
    let effective = operator.matrix.scaled(1.0 / split.normalisation);
    Ok(PreparedData {
        operator,
        effective,
        split,
    })
}

fn paired(samples: &[Sample]) -> Vec<Sample> {
    samples.iter().filter(|s| s.paired).cloned().collect()
}

fn columns(samples: &[Sample]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    samples.iter().map(|s| (s.x.clone(), s.y_noisy.clone())).unzip()
}

/// A scaling network of equal-width layers whose head starts at `start`
/// for every output, so training begins from a known filter.
fn scaling_network(
    cfg: &ExperimentConfig,
    k: usize,
    head: Activation,
    start: &[f64],
    seed: u64,
) -> Result<MlpNetwork, ExperimentError> {
    let net_cfg = &cfg.network;
    let dims = vec![k; net_cfg.sigma_layers + 1];
    let acts = stack_activations(net_cfg.sigma_layers, net_cfg.sigma_activation, head);
    let mut net = init_network_with_std(&dims, &acts, net_cfg.sigma_bias, seed, net_cfg.init_std)?;
    let last = net.layers_mut().last_mut().expect("at least one layer");
    if let Some(bias) = last.bias.as_mut() {
        for (b, &v) in bias.iter_mut().zip(start) {
            *b = inverse_head(head, v);
        }
    }
    Ok(net)
}

/// Pre-activation at which `head` outputs `v`, clamped into its range.
fn inverse_head(head: Activation, v: f64) -> f64 {
    match head {
        Activation::BoundedSigmoid { c_min, c_max } => {
            let p = ((v - c_min) / (c_max - c_min)).clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
        Activation::Softplus => v.max(1e-8).exp_m1().ln(),
        _ => v,
    }
}

fn mean_noise_level(samples: &[Sample]) -> f64 {
    samples.iter().map(|s| s.noise_level).sum::<f64>() / samples.len().max(1) as f64
}

/// Fits `method` on the training split. `svd` must be present for methods
/// that need it.
pub fn train_method(
    cfg: &ExperimentConfig,
    method: Method,
    data: &PreparedData,
    svd: Option<&SvdFactorization>,
) -> Result<TrainedMethod, ExperimentError> {
    let split = &data.split;
    let fit_set = paired(&split.train);
    if fit_set.is_empty() {
        return Err(ExperimentError::Invalid {
            field: "dataset.paired_fraction".into(),
            message: "no paired training samples".into(),
        });
    }
    let (xs, ys) = columns(&fit_set);
    let mut details = BTreeMap::new();
    let seed = cfg.method_seed(method);
    let need_svd = || {
        svd.ok_or_else(|| ExperimentError::Invalid {
            field: "methods".into(),
            message: format!("{method} needs the operator's SVD"),
        })
    };
    let done = |model: LsvdModel, details| TrainedMethod {
        method,
        model: Some(model),
        mmse: None,
        history: None,
        details,
    };

    // The classical baselines get their best grid value on the test split,
    // which can only flatter them in comparisons with the learned methods.
    let (test_xs, test_ys) = columns(&split.test);
    match method {
        Method::ClassicalTikhonov => {
            let svd = need_svd()?;
            let (alpha, mse) = select_tikhonov_alpha(svd, &test_xs, &test_ys, &default_alpha_grid(svd))?;
            details.insert("alpha".into(), alpha);
            details.insert("selection_mse".into(), mse);
            let scales = tikhonov_filter(&svd.s, alpha);
            return Ok(done(LsvdModel::from_svd(svd, SigmaVariant::Diagonal { scales })?, details));
        }
        Method::Tsvd => {
            let svd = need_svd()?;
            let (rank, mse) = select_tsvd_rank(svd, &test_xs, &test_ys)?;
            details.insert("rank".into(), rank as f64);
            details.insert("selection_mse".into(), mse);
            let scales = tsvd_filter(&svd.s, rank);
            return Ok(done(LsvdModel::from_svd(svd, SigmaVariant::Diagonal { scales })?, details));
        }
        Method::LinearMmse => {
            let (ridge, held_out) = select_mmse_ridge(&xs, &ys, &MMSE_RIDGES)?;
            let mmse = LinearMmse::fit(&xs, &ys, Some(ridge))?;
            details.insert("ridge".into(), ridge);
            details.insert("selection_mse".into(), held_out);
            return Ok(TrainedMethod {
                method,
                model: None,
                mmse: Some(mmse),
                history: None,
                details,
            });
        }
        _ => {}
    }

    let weights = cfg.method_weights(method);
    let train_cfg = cfg.training.to_training_config(weights, seed);
    let k_learned = cfg.effective_latent_dim();
    let mut model = if method.needs_svd() {
        let svd = need_svd()?;
        let k = k_learned.min(svd.numerical_rank(RANK_TOL)).max(1);
        // Every SVD-based learner starts from the grid-optimal Tikhonov filter.
        let (alpha, _) = select_tikhonov_alpha(svd, &xs, &ys, &default_alpha_grid(svd))?;
        details.insert("initial_alpha".into(), alpha);
        details.insert("latent_dim".into(), k as f64);
        let filter: Vec<f64> = tikhonov_filter(&svd.s, alpha)[..k].to_vec();
        let sigma = match method {
            Method::DataDrivenTikhonov => SigmaVariant::Diagonal { scales: filter },
            Method::FullSigma => SigmaVariant::Full {
                matrix: DenseMatrix::from_diag(&filter),
            },
            Method::StructuredTikhonov => {
                let delta = mean_noise_level(&split.train);
                if !(delta > 0.0) {
                    return Err(ExperimentError::Invalid {
                        field: "noise".into(),
                        message: "structured_tikhonov needs noisy training data to set α(δ)".into(),
                    });
                }
                let alpha = cfg.structured.alpha_scale * delta.powf(cfg.structured.alpha_exponent);
                details.insert("alpha".into(), alpha);
                details.insert("delta".into(), delta);
                let head = cfg.network.bounded_head();
                let net = scaling_network(cfg, k, head, &vec![1.0; k], derive_seed(seed, 7))?;
                SigmaVariant::TikhonovStructured {
                    s: svd.s[..k].to_vec(),
                    alpha,
                    net,
                }
            }
            Method::NoiseAwareSigma => SigmaVariant::NoiseAware {
                net: scaling_network(cfg, k, Activation::Softplus, &filter, derive_seed(seed, 7))?,
            },
            _ => unreachable!("only SVD-based learners reach here"),
        };
        LsvdModel::from_svd(svd, sigma)?
    } else {
        let (y_branch, x_branch) = match method {
            Method::LsvdDiag | Method::LinearAe => (cfg.network.linear_branch(), cfg.network.linear_branch()),
            _ => (cfg.network.y_branch(), cfg.network.x_branch()),
        };
        let arch = LsvdArchitecture {
            data_dim: cfg.geometry.data_dim(),
            image_dim: cfg.geometry.image_dim(),
            latent_dim: k_learned,
            y_branch,
            x_branch,
        };
        details.insert("latent_dim".into(), k_learned as f64);
        let sigma = SigmaVariant::Diagonal {
            scales: vec![1.0; k_learned],
        };
        let mut model = LsvdModel::learned(&arch, sigma, seed)?;
        if method.is_image_autoencoder() {
            // Only the image branch is trained.
            model.enc_y.frozen = true;
            model.dec_y.frozen = true;
            model.sigma_frozen = true;
        }
        model
    };
    details.insert("trainable_params".into(), model.trainable_params() as f64);

    let train_set: Vec<Sample> = if method == Method::LsvdPairedOnly {
        fit_set
    } else {
        split.train.clone()
    };
    let output = if method.is_image_autoencoder() {
        Output::ImageAutoencoder
    } else {
        Output::Sigma
    };
    let history = train_lsvd(&mut model, &train_set, &split.test, &train_cfg, Some(&data.effective), output)?;
    Ok(TrainedMethod {
        method,
        model: Some(model),
        mmse: None,
        history: Some(history),
        details,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn to_images(m: &DenseMatrix, side: usize) -> Vec<ImageSignal> {
    (0..m.rows())
        .map(|i| ImageSignal::new(side, m.row(i).to_vec()).expect("row length is side²"))
        .collect()
}

/// Test metrics and training MSE of a fitted method, plus the first test
/// reconstructions for the image grid.
pub fn evaluate_method(
    trained: &TrainedMethod,
    split: &DatasetSplit,
) -> Result<(MetricsRow, Vec<ImageSignal>), ExperimentError> {
    let side = split.image_side;
    let test_rec = to_images(&trained.reconstruct(&split.test)?, side);
    let truth: Vec<ImageSignal> = split
        .test
        .iter()
        .map(|s| ImageSignal::new(side, s.x.clone()).expect("side matches"))
        .collect();
    let mse: Vec<f64> = test_rec.iter().zip(&truth).map(|(a, b)| metric_mse(a, b)).collect();
    let psnr: Vec<f64> = test_rec.iter().zip(&truth).map(|(a, b)| metric_psnr(a, b)).collect();
    let ssim: Vec<f64> = test_rec.iter().zip(&truth).map(|(a, b)| metric_ssim(a, b)).collect();

    let fit_set: Vec<Sample> = paired(&split.train);
    let train_rec = trained.reconstruct(&fit_set)?;
    let train_mse = fit_set
        .iter()
        .enumerate()
        .map(|(i, s)| {
            train_rec.row(i).iter().zip(&s.x).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / s.x.len() as f64
        })
        .sum::<f64>()
        / fit_set.len().max(1) as f64;

    let (test_mse, test_mse_std) = mean_std(&mse);
    let (psnr_mean, psnr_std) = mean_std(&psnr);
    let (ssim_mean, ssim_std) = mean_std(&ssim);
    let row = MetricsRow {
        method: trained.method,
        test_mse,
        test_mse_std,
        psnr_mean,
        psnr_std,
        ssim_mean,
        ssim_std,
        train_mse,
        gap: (test_mse - train_mse).abs(),
        test_count: truth.len(),
    };
    Ok((row, test_rec.into_iter().take(GRID_SAMPLES).collect()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|e| ExperimentError::io(path, e))
}

fn write_grid(path: &Path, images: &[ImageSignal]) -> Result<(), ExperimentError> {
    let clamped: Vec<ImageSignal> = images.iter().cloned().map(ImageSignal::clamped).collect();
    let (w, h, pixels) = tile_grid(&clamped, GRID_SAMPLES);
    let file = fs::File::create(path).map_err(|e| ExperimentError::io(path, e))?;
    write_pgm_raw(w, h, &pixels, std::io::BufWriter::new(file))?;
    Ok(())
}

fn history_csv(results: &[MethodResult]) -> String {
    let mut s = String::from("method,epoch,train_loss,test_loss,test_mse\n");
    for r in results {
        if let Some(h) = &r.trained.history {
            for e in &h.records {
                let _ = writeln!(s, "{},{},{},{},{}", r.row.method, e.epoch, e.train_loss, e.test_loss, e.test_mse);
            }
        }
    }
    s
}

fn model_of(results: &[MethodResult], method: Method) -> Result<&LsvdModel, ExperimentError> {
    results
        .iter()
        .find(|r| r.row.method == method)
        .and_then(|r| r.trained.model.as_ref())
        .ok_or_else(|| ExperimentError::Invalid {
            field: "analysis".into(),
            message: format!("{method} has no model"),
        })
}

fn run_analyses(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    results: &[MethodResult],
    dir: &Path,
    log: &impl Fn(&str),
) -> Result<BTreeMap<String, serde_json::Value>, ExperimentError> {
    let mut out = BTreeMap::new();
    let a = &cfg.analysis;
    let test = &data.split.test;
    let seed = derive_seed(cfg.seed, 900);
    if let Some(s) = &a.stability {
        let report = stability_bound(model_of(results, s.method)?, &stack(test, |s| &s.y_noisy), s.pairs, seed)?;
        log(&format!(
            "stability ({}): max ratio {:.4e} vs bound {:.4e}",
            s.method, report.empirical_max_ratio, report.m_bound
        ));
        let v = serde_json::json!({"method": s.method, "report": report, "holds": report.holds()});
        write_file(&dir.join("stability.json"), serde_json::to_string_pretty(&v).expect("json"))?;
        out.insert("stability".into(), v);
    }
    if let Some(b) = &a.ball {
        let report = ball_coverage_estimate(model_of(results, b.method)?, &data.effective, b.samples, seed ^ 1)?;
        log(&format!("ball coverage ({}): eps_z {:.4e}", b.method, report.epsilon_z));
        let v = serde_json::json!({"method": b.method, "report": report});
        write_file(&dir.join("ball.json"), serde_json::to_string_pretty(&v).expect("json"))?;
        out.insert("ball".into(), v);
    }
    if let Some(sc) = &a.scales {
        let clean = stack(test, |s| &s.y_clean);
        for &m in &sc.methods {
            let curves = scale_noise_curves(
                model_of(results, m)?,
                &clean,
                &sc.levels,
                seed ^ 2,
                sc.smoothing_sigma,
                sc.order_by_magnitude,
            )?;
            write_file(&dir.join(format!("scales_{m}.csv")), write_scale_csv(&curves))?;
        }
        out.insert("scales".into(), serde_json::json!({"methods": sc.methods, "levels": sc.levels}));
    }
    if let Some(d) = &a.dictionary {
        for &m in &d.methods {
            let dict = decode_dictionary(model_of(results, m)?, d.scale, d.with_sinograms)?;
            let sub = dir.join(format!("dictionary_{m}"));
            fs::create_dir_all(&sub).map_err(|e| ExperimentError::io(&sub, e))?;
            write_dictionary(
                &dict,
                cfg.geometry.image_side,
                (cfg.geometry.num_angles, cfg.geometry.detector_bins),
                &sub,
            )?;
        }
        out.insert("dictionary".into(), serde_json::json!({"methods": d.methods}));
    }
    Ok(out)
}

/// Runs every configured method and writes the artefacts to `out_dir`
/// (default: the config's `output_dir`):
///
/// * `metrics.csv`, `loss_history.csv`
/// * `ground_truth.pgm` and `recon_<method>.pgm` for the first test samples
/// * `models/<method>/` checkpoints
/// * analysis outputs when requested
/// * `manifest.json` with the full resolved configuration
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    opts: RunOptions,
) -> Result<RunSummary, ExperimentError> {
    cfg.validate()?;
    let dir = out_dir.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
    let log = |msg: &str| {
        if !opts.quiet {
            eprintln!("[lsvd] {msg}");
        }
    };

    let start = Instant::now();
    let data = prepare_data(cfg)?;
    log(&format!(
        "data: {} train ({} paired), {} test, normalisation {:.4e}",
        data.split.train.len(),
        data.split.paired_count(),
        data.split.test.len(),
        data.split.normalisation
    ));
    let svd = if cfg.methods.iter().any(|m| m.needs_svd()) {
        let t = Instant::now();
        let svd = svd_thin(&data.effective, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS)?;
        log(&format!(
            "svd: rank {} of {} in {:.1}s",
            svd.numerical_rank(RANK_TOL),
            svd.s.len(),
            t.elapsed().as_secs_f64()
        ));
        Some(svd)
    } else {
        None
    };

    let side = cfg.geometry.image_side;
    let truth: Vec<ImageSignal> = data
        .split
        .test
        .iter()
        .take(GRID_SAMPLES)
        .map(|s| ImageSignal::new(side, s.x.clone()).expect("side matches"))
        .collect();
    write_grid(&dir.join("ground_truth.pgm"), &truth)?;

    let mut results = Vec::new();
    for &method in &cfg.methods {
        let t = Instant::now();
        let wrap = |e: ExperimentError| ExperimentError::Method {
            method,
            source: Box::new(e),
        };
        let trained = train_method(cfg, method, &data, svd.as_ref()).map_err(wrap)?;
        let (row, grid) = evaluate_method(&trained, &data.split).map_err(wrap)?;
        let seconds = t.elapsed().as_secs_f64();
        log(&format!(
            "{method}: test mse {:.4e}, psnr {:.2}±{:.2}, ssim {:.3}, train mse {:.4e} ({seconds:.1}s)",
            row.test_mse, row.psnr_mean, row.psnr_std, row.ssim_mean, row.train_mse
        ));
        write_grid(&dir.join(format!("recon_{method}.pgm")), &grid)?;
        if opts.save_models {
            if let Some(model) = &trained.model {
                let steps = trained.history.as_ref().map_or(0, |h| h.steps);
                save_model(model, dir.join("models").join(method.name()), steps).map_err(|e| wrap(e.into()))?;
            }
        }
        results.push(MethodResult { trained, row, seconds });
    }

    let summary = RunSummary {
        out_dir: dir.clone(),
        results,
    };
    write_file(&dir.join("metrics.csv"), summary.metrics_csv())?;
    write_file(&dir.join("loss_history.csv"), history_csv(&summary.results))?;
    let analysis = run_analyses(cfg, &data, &summary.results, &dir, &log)?;

    let methods: BTreeMap<&str, serde_json::Value> = summary
        .results
        .iter()
        .map(|r| {
            (
                r.row.method.name(),
                serde_json::json!({"details": r.trained.details, "seconds": r.seconds, "metrics": r.row}),
            )
        })
        .collect();
    let manifest = serde_json::json!({
        "config": cfg,
        "data": {
            "train": data.split.train.len(),
            "paired": data.split.paired_count(),
            "test": data.split.test.len(),
            "normalisation": data.split.normalisation,
        },
        "methods": methods,
        "analysis": analysis,
        "seconds": start.elapsed().as_secs_f64(),
    });
    write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("json"))?;
    log(&format!("done in {:.1}s, artefacts in {}", start.elapsed().as_secs_f64(), dir.display()));
    Ok(summary)
}
