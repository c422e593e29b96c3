//! `lsvd`: runs the tomography experiments from JSON configs and exposes the
//! individual steps (data generation, training, reconstruction, analyses and
//! image metrics) as subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use lsvd_core::analysis::{
    appendix_b_inequality_check, ball_coverage_estimate, convergence_rate_experiment, decode_dictionary,
    scale_noise_curves, stability_bound, write_dictionary, write_scale_csv, AppendixBGrid, ConvergenceScaling,
};
use lsvd_core::data::{metric_mse, metric_psnr, metric_ssim, read_pgm_file, write_idx_images, write_pgm_file, ImageSignal};
use lsvd_core::experiment::{
    evaluate_method, prepare_data, preset, run_experiment, train_method, ConvergenceConfig, ExperimentConfig, Method,
    PreparedData, RunOptions, PRESETS,
};
use lsvd_core::linalg::{read_csv_file, svd_thin, write_csv_file, DenseMatrix, SvdFactorization, DEFAULT_MAX_SWEEPS, DEFAULT_SVD_TOL};
use lsvd_core::lsvd::{load_model, save_model, LsvdModel};
use lsvd_core::tomo::assemble_radon;

#[derive(Parser, Debug)]
#[command(name = "lsvd", version, about = "SVD-based and learned reconstruction for tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment (or convergence) config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory or file, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the dataset of a config and write images, sinograms and a manifest.
    GenData,
    /// Train and evaluate one method of a config.
    Train {
        #[arg(long)]
        method: String,
    },
    /// Reconstruct images from a sinogram CSV (one sinogram per row).
    Reconstruct {
        /// Checkpoint directory written by `train` or `run`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Analyses of the theory and of trained models.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// MSE, PSNR and SSIM between two PGM images.
    Metrics { reference: PathBuf, candidate: PathBuf },
    /// Run a full experiment.
    Run {
        /// Use a shipped preset instead of `--config`.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Validate and write the manifest without training.
        #[arg(long)]
        dry_run: bool,
    },
    /// List the shipped presets.
    Presets,
}

#[derive(Subcommand, Debug)]
enum Analysis {
    /// Fitted error rate of Tikhonov with a power-law parameter choice.
    Convergence,
    /// Empirical Lipschitz ratios against the weight-norm bound.
    Stability {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// Latent round-trip error over the unit ball.
    Ball {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Effective latent scales as a function of the noise level.
    Scales {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.04,0.08,0.12,0.16,0.2")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        smoothing: f64,
        #[arg(long)]
        order_by_magnitude: bool,
    },
    /// Decoded latent unit vectors.
    Dictionary {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        with_sinograms: bool,
    },
    /// Grid check of the scalar inequality behind the convergence proof.
    AppendixB {
        #[arg(long, default_value_t = 1.0)]
        lambda_max: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// `LSVD_THREADS` caps the worker pool; 0 or unset lets rayon decide.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("LSVD_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .with_context(|| format!("LSVD_THREADS must be a non-negative integer, got {value:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

struct Ctx {
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[lsvd] {msg}");
        }
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let path = self.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
        let cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
        Ok(self.with_seed(cfg))
    }

    fn with_seed(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output_dir.clone())
    }
}

fn parse_method(name: &str) -> Result<Method> {
    Method::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        anyhow!("unknown method `{name}`; expected one of {}", names.join(", "))
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::GenData => gen_data(&ctx),
        Command::Train { method } => train(&ctx, parse_method(&method)?),
        Command::Reconstruct { model, input } => reconstruct(&ctx, &model, &input),
        Command::Analyze { what } => analyze(&ctx, what),
        Command::Metrics { reference, candidate } => metrics(&reference, &candidate),
        Command::Run { preset: name, dry_run } => run(&ctx, name.as_deref(), dry_run),
        Command::Presets => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn rows_of(samples: &[lsvd_core::data::Sample], f: impl Fn(&lsvd_core::data::Sample) -> &[f64]) -> Result<DenseMatrix> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| f(s).to_vec()).collect();
    Ok(DenseMatrix::from_rows(&rows)?)
}

fn gen_data(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.experiment()?;
    let dir = ctx.out.clone().unwrap_or_else(|| cfg.output_dir.join("data"));
    create_dir(&dir)?;
    let data = prepare_data(&cfg)?;
    let split = &data.split;
    let side = split.image_side;
    for (name, samples) in [("train", &split.train), ("test", &split.test)] {
        let images: Vec<ImageSignal> = samples
            .iter()
            .map(|s| ImageSignal::new(side, s.x.clone()))
            .collect::<Result<_, _>>()?;
        let path = dir.join(format!("{name}_images.idx"));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_idx_images(&images, std::io::BufWriter::new(file))?;
        write_csv_file(&rows_of(samples, |s| &s.y_noisy)?, dir.join(format!("{name}_sinograms.csv")))?;
        write_csv_file(&rows_of(samples, |s| &s.y_clean)?, dir.join(format!("{name}_clean_sinograms.csv")))?;
    }
    let paired: String = split.train.iter().map(|s| if s.paired { "1\n" } else { "0\n" }).collect();
    fs::write(dir.join("train_paired.csv"), paired)?;
    let manifest = serde_json::json!({
        "config": cfg,
        "train": split.train.len(),
        "paired": split.paired_count(),
        "test": split.test.len(),
        "normalisation": split.normalisation,
        "image_side": side,
        "data_dim": cfg.geometry.data_dim(),
    });
    fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&manifest)?)?;
    ctx.log(&format!(
        "wrote {} training and {} test samples to {}",
        split.train.len(),
        split.test.len(),
        dir.display()
    ));
    Ok(())
}

fn svd_if_needed(method: Method, data: &PreparedData) -> Result<Option<SvdFactorization>> {
    Ok(if method.needs_svd() {
        Some(svd_thin(&data.effective, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS)?)
    } else {
        None
    })
}

fn train(ctx: &Ctx, method: Method) -> Result<()> {
    let cfg = ctx.experiment()?;
    let dir = ctx.out_dir(&cfg);
    create_dir(&dir)?;
    let data = prepare_data(&cfg)?;
    let svd = svd_if_needed(method, &data)?;
    ctx.log(&format!("training {method} on {} samples", data.split.train.len()));
    let trained = train_method(&cfg, method, &data, svd.as_ref())?;
    let (row, _) = evaluate_method(&trained, &data.split)?;
    if let Some(model) = &trained.model {
        let steps = trained.history.as_ref().map_or(0, |h| h.steps);
        let model_dir = dir.join("models").join(method.name());
        save_model(model, &model_dir, steps)?;
        ctx.log(&format!("checkpoint in {}", model_dir.display()));
    }
    if let Some(h) = &trained.history {
        let mut s = String::from("epoch,train_loss,test_loss,test_mse\n");
        for e in &h.records {
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.test_loss, e.test_mse));
        }
        fs::write(dir.join(format!("loss_history_{method}.csv")), s)?;
    }
    println!("method,test_mse,psnr_mean,ssim_mean,train_mse");
    println!("{},{},{},{},{}", row.method, row.test_mse, row.psnr_mean, row.ssim_mean, row.train_mse);
    Ok(())
}

fn image_side(model: &LsvdModel) -> Result<usize> {
    let m = model.image_dim();
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m {
        bail!("model image dimension {m} is not a square");
    }
    Ok(side)
}

fn reconstruct(ctx: &Ctx, model_dir: &Path, input: &Path) -> Result<()> {
    let (model, _) = load_model(model_dir).with_context(|| format!("loading model from {}", model_dir.display()))?;
    let ys = read_csv_file(input).with_context(|| format!("reading {}", input.display()))?;
    if ys.cols() != model.data_dim() {
        bail!("sinograms have {} entries, the model expects {}", ys.cols(), model.data_dim());
    }
    let side = image_side(&model)?;
    let xs = model.reconstruct_batch(&ys)?;
    let out = ctx.out.clone().unwrap_or_else(|| PathBuf::from("reconstructions"));
    let image = |i: usize| ImageSignal::new(side, xs.row(i).to_vec());
    if xs.rows() == 1 && out.extension().is_some_and(|e| e == "pgm") {
        write_pgm_file(&image(0)?.clamped(), &out)?;
        ctx.log(&format!("wrote {}", out.display()));
        return Ok(());
    }
    create_dir(&out)?;
    for i in 0..xs.rows() {
        write_pgm_file(&image(i)?.clamped(), out.join(format!("recon_{i:04}.pgm")))?;
    }
    write_csv_file(&xs, out.join("reconstructions.csv"))?;
    ctx.log(&format!("wrote {} reconstructions to {}", xs.rows(), out.display()));
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn analyze(ctx: &Ctx, what: Analysis) -> Result<()> {
    match what {
        Analysis::Convergence => {
            let path = ctx.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
            let mut cfg = ConvergenceConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
            if let Some(seed) = ctx.seed {
                cfg.run.seed = seed;
            }
            let op = assemble_radon(&cfg.geometry)?;
            let svd = svd_thin(&op.matrix, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS)?;
            let report = convergence_rate_experiment(&svd, &cfg.run, &ConvergenceScaling::Classical)?;
            let dir = ctx
                .out
                .clone()
                .or(cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("runs/convergence"));
            create_dir(&dir)?;
            fs::write(dir.join("convergence.csv"), report.to_csv())?;
            write_json(&dir.join("convergence.json"), &serde_json::json!({"config": cfg, "report": report}))?;
            println!("slope {}", report.slope);
            Ok(())
        }
        Analysis::AppendixB { lambda_max } => {
            let report = appendix_b_inequality_check(&AppendixBGrid::dense(lambda_max));
            println!("points {} worst_slack {} passed {}", report.points, report.worst_slack, report.passed);
            if !report.passed {
                bail!("inequality violated (worst slack {})", report.worst_slack);
            }
            Ok(())
        }
        Analysis::Stability { model, pairs } => {
            let (model, data, dir) = model_and_data(ctx, &model)?;
            let ys = rows_of(&data.split.test, |s| &s.y_noisy)?;
            let report = stability_bound(&model, &ys, pairs, ctx_seed(ctx))?;
            println!(
                "m_bound {} empirical_max_ratio {} holds {}",
                report.m_bound,
                report.empirical_max_ratio,
                report.holds()
            );
            write_json(&dir.join("stability.json"), &serde_json::json!({"report": report, "holds": report.holds()}))
        }
        Analysis::Ball { model, samples } => {
            let (model, data, dir) = model_and_data(ctx, &model)?;
            let report = ball_coverage_estimate(&model, &data.effective, samples, ctx_seed(ctx))?;
            println!("epsilon_z {} m {} m_times_eps {}", report.epsilon_z, report.m, report.m_times_eps);
            write_json(&dir.join("ball.json"), &serde_json::json!({ "report": report }))
        }
        Analysis::Scales {
            model,
            levels,
            smoothing,
            order_by_magnitude,
        } => {
            let (model, data, dir) = model_and_data(ctx, &model)?;
            let clean = rows_of(&data.split.test, |s| &s.y_clean)?;
            let curves = scale_noise_curves(&model, &clean, &levels, ctx_seed(ctx), smoothing, order_by_magnitude)?;
            let path = dir.join("scales.csv");
            fs::write(&path, write_scale_csv(&curves))?;
            ctx.log(&format!("wrote {}", path.display()));
            Ok(())
        }
        Analysis::Dictionary {
            model,
            scale,
            with_sinograms,
        } => {
            let (model, _) = load_model(&model).with_context(|| format!("loading model from {}", model.display()))?;
            let side = image_side(&model)?;
            let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("dictionary"));
            let dict = decode_dictionary(&model, scale, with_sinograms)?;
            let shape = match &ctx.config {
                Some(_) => {
                    let cfg = ctx.experiment()?;
                    (cfg.geometry.num_angles, cfg.geometry.detector_bins)
                }
                None => (1, model.data_dim()),
            };
            let files = write_dictionary(&dict, side, shape, &dir)?;
            ctx.log(&format!("wrote {} images to {}", files.len(), dir.display()));
            Ok(())
        }
    }
}

fn ctx_seed(ctx: &Ctx) -> u64 {
    ctx.seed.unwrap_or(0)
}

/// Loads a checkpoint and rebuilds the dataset of `--config` so analyses
/// see the same test sinograms and operator the model was trained with.
fn model_and_data(ctx: &Ctx, model_dir: &Path) -> Result<(LsvdModel, PreparedData, PathBuf)> {
    let (model, _) = load_model(model_dir).with_context(|| format!("loading model from {}", model_dir.display()))?;
    let cfg = ctx.experiment()?;
    let data = prepare_data(&cfg)?;
    if model.data_dim() != cfg.geometry.data_dim() || model.image_dim() != cfg.geometry.image_dim() {
        bail!(
            "model maps {} → {} but the config geometry gives {} → {}",
            model.data_dim(),
            model.image_dim(),
            cfg.geometry.data_dim(),
            cfg.geometry.image_dim()
        );
    }
    let dir = ctx.out.clone().unwrap_or_else(|| cfg.output_dir.join("analysis"));
    create_dir(&dir)?;
    Ok((model, data, dir))
}

fn metrics(reference: &Path, candidate: &Path) -> Result<()> {
    let a = read_pgm_file(reference).with_context(|| format!("reading {}", reference.display()))?;
    let b = read_pgm_file(candidate).with_context(|| format!("reading {}", candidate.display()))?;
    if a.side != b.side {
        bail!("images differ in size: {} vs {}", a.side, b.side);
    }
    println!("mse,psnr,ssim");
    println!("{},{},{}", metric_mse(&a, &b), metric_psnr(&a, &b), metric_ssim(&a, &b));
    Ok(())
}

fn run(ctx: &Ctx, preset_name: Option<&str>, dry_run: bool) -> Result<()> {
    let cfg = match preset_name {
        Some(name) => ctx.with_seed(preset(name)?),
        None => ctx.experiment()?,
    };
    let dir = ctx.out_dir(&cfg);
    if dry_run {
        create_dir(&dir)?;
        write_json(&dir.join("manifest.json"), &serde_json::json!({ "config": cfg }))?;
        ctx.log(&format!("config valid; manifest in {}", dir.display()));
        return Ok(());
    }
    let summary = run_experiment(
        &cfg,
        Some(&dir),
        RunOptions {
            quiet: ctx.quiet,
            save_models: true,
        },
    )?;
    print!("{}", summary.metrics_csv());
    Ok(())
}
