use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::analysis::ConvergenceRunSpec;
use crate::data::{NoiseSpec, PhantomRule};
use crate::lsvd::{BranchArchitecture, LossWeights, TrainingConfig};
use crate::nn::{Activation, INIT_STD};
use crate::rng::derive_seed;
use crate::tomo::{NoiseModel, TomoGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Custom,
}

/// Every reconstruction method the runner knows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClassicalTikhonov,
    Tsvd,
    LinearMmse,
    /// Learned diagonal Σ between frozen SVD factors.
    DataDrivenTikhonov,
    /// `s / (s² + α·𝒩(z))` between frozen SVD factors.
    StructuredTikhonov,
    /// `𝒩(z) ⊙ z` between frozen SVD factors.
    NoiseAwareSigma,
    /// Learned full Σ between frozen SVD factors.
    FullSigma,
    /// Single-layer linear encoders and decoders with a diagonal Σ.
    LsvdDiag,
    LsvdFullNonlinear,
    /// The nonlinear architecture trained on the reconstruction loss alone.
    LsvdAlpha0,
    /// The nonlinear architecture trained on the paired samples only.
    LsvdPairedOnly,
    /// Image-side linear autoencoder.
    LinearAe,
    /// Image-side nonlinear autoencoder.
    NonlinearAe,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::ClassicalTikhonov,
        Method::Tsvd,
        Method::LinearMmse,
        Method::DataDrivenTikhonov,
        Method::StructuredTikhonov,
        Method::NoiseAwareSigma,
        Method::FullSigma,
        Method::LsvdDiag,
        Method::LsvdFullNonlinear,
        Method::LsvdAlpha0,
        Method::LsvdPairedOnly,
        Method::LinearAe,
        Method::NonlinearAe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ClassicalTikhonov => "classical_tikhonov",
            Method::Tsvd => "tsvd",
            Method::LinearMmse => "linear_mmse",
            Method::DataDrivenTikhonov => "data_driven_tikhonov",
            Method::StructuredTikhonov => "structured_tikhonov",
            Method::NoiseAwareSigma => "noise_aware_sigma",
            Method::FullSigma => "full_sigma",
            Method::LsvdDiag => "lsvd_diag",
            Method::LsvdFullNonlinear => "lsvd_full_nonlinear",
            Method::LsvdAlpha0 => "lsvd_alpha0",
            Method::LsvdPairedOnly => "lsvd_paired_only",
            Method::LinearAe => "linear_ae",
            Method::NonlinearAe => "nonlinear_ae",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Stable per-method salt so seeds do not depend on list order.
    pub(crate) fn salt(self) -> u64 {
        100 + Self::ALL.iter().position(|&m| m == self).expect("listed") as u64
    }

    /// Uses the forward operator's SVD.
    pub fn needs_svd(self) -> bool {
        matches!(
            self,
            Method::ClassicalTikhonov
                | Method::Tsvd
                | Method::DataDrivenTikhonov
                | Method::StructuredTikhonov
                | Method::NoiseAwareSigma
                | Method::FullSigma
        )
    }

    /// Fitted by gradient descent.
    pub fn is_trained(self) -> bool {
        !matches!(self, Method::ClassicalTikhonov | Method::Tsvd | Method::LinearMmse)
    }

    /// Encoders and decoders are learned rather than taken from the SVD.
    pub fn is_fully_learned(self) -> bool {
        self.is_trained() && !self.needs_svd()
    }

    pub fn is_image_autoencoder(self) -> bool {
        matches!(self, Method::LinearAe | Method::NonlinearAe)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Measurement noise without seeds; seeds come from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    GaussianLevel { level: f64 },
    GaussianSnr { snr_db: f64 },
    /// Per-sample level drawn uniformly from `[min, max]`.
    UniformLevel { min: f64, max: f64 },
}

impl NoiseConfig {
    pub fn to_spec(self, seed: u64) -> NoiseSpec {
        match self {
            NoiseConfig::GaussianLevel { level } => NoiseSpec::Fixed {
                model: NoiseModel::gaussian_level(level, seed),
            },
            NoiseConfig::GaussianSnr { snr_db } => NoiseSpec::Fixed {
                model: NoiseModel::gaussian_snr(snr_db, seed),
            },
            NoiseConfig::UniformLevel { min, max } => NoiseSpec::UniformLevel { min, max, seed },
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            NoiseConfig::GaussianLevel { level } if !(level >= 0.0 && level.is_finite()) => {
                Err(format!("level must be finite and >= 0, got {level}"))
            }
            NoiseConfig::GaussianSnr { snr_db } if !snr_db.is_finite() => Err("snr_db must be finite".into()),
            NoiseConfig::UniformLevel { min, max } if !(0.0 <= min && min <= max && max.is_finite()) => {
                Err(format!("need 0 <= min <= max, got [{min}, {max}]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Fully connected layers per sinogram-side encoder and decoder.
    pub y_layers: usize,
    /// Fully connected layers per image-side encoder and decoder.
    pub x_layers: usize,
    pub bias: bool,
    /// Hidden activation of the nonlinear methods.
    pub activation: Activation,
    /// Convolutional layers on the image side; only 0 is supported.
    #[serde(default)]
    pub conv_layers: usize,
    #[serde(default)]
    pub conv_kernels: usize,
    #[serde(default)]
    pub conv_kernel_size: usize,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    #[serde(default = "default_sigma_layers")]
    pub sigma_layers: usize,
    /// Hidden activation of the scaling network.
    #[serde(default = "default_sigma_activation")]
    pub sigma_activation: Activation,
    #[serde(default = "default_true")]
    pub sigma_bias: bool,
    /// Bounds of the structured variant's head.
    #[serde(default = "default_c_min")]
    pub c_min: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
}

fn default_init_std() -> f64 {
    INIT_STD
}
fn default_sigma_layers() -> usize {
    5
}
fn default_sigma_activation() -> Activation {
    Activation::leaky_relu(0.1)
}
fn default_true() -> bool {
    true
}
fn default_c_min() -> f64 {
    crate::nn::DEFAULT_C_MIN
}
fn default_c_max() -> f64 {
    crate::nn::DEFAULT_C_MAX
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            y_layers: 1,
            x_layers: 1,
            bias: false,
            activation: Activation::Linear,
            conv_layers: 0,
            conv_kernels: 0,
            conv_kernel_size: 0,
            init_std: INIT_STD,
            sigma_layers: 5,
            sigma_activation: default_sigma_activation(),
            sigma_bias: true,
            c_min: default_c_min(),
            c_max: default_c_max(),
        }
    }
}

impl NetworkConfig {
    pub fn linear_branch(&self) -> BranchArchitecture {
        BranchArchitecture {
            init_std: self.init_std,
            ..BranchArchitecture::linear()
        }
    }

    pub fn y_branch(&self) -> BranchArchitecture {
        BranchArchitecture {
            layers: self.y_layers,
            activation: self.activation,
            bias: self.bias,
            init_std: self.init_std,
        }
    }

    pub fn x_branch(&self) -> BranchArchitecture {
        BranchArchitecture {
            layers: self.x_layers,
            activation: self.activation,
            bias: self.bias,
            init_std: self.init_std,
        }
    }

    /// Head of the structured variant's network.
    pub fn bounded_head(&self) -> Activation {
        Activation::BoundedSigmoid {
            c_min: self.c_min,
            c_max: self.c_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub start_lr: f64,
    pub final_lr: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    /// Sinogram autoencoder reconstructs the clean sinogram.
    #[serde(default = "default_true")]
    pub denoising: bool,
    #[serde(default = "default_radius")]
    pub latent_radius: f64,
    #[serde(default)]
    pub latent_samples: usize,
}

fn default_clip() -> f64 {
    10.0
}
fn default_radius() -> f64 {
    1.0
}

impl TrainingSection {
    pub fn to_training_config(&self, weights: LossWeights, seed: u64) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            start_lr: self.start_lr,
            final_lr: self.final_lr,
            clip_norm: self.clip_norm,
            seed,
            denoising: self.denoising,
            weights,
            latent_radius: self.latent_radius,
            latent_samples: self.latent_samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Random-ellipse phantoms at the geometry's resolution.
    Phantoms {
        #[serde(default)]
        rule: PhantomRule,
    },
    /// Images from an IDX file, rescaled to the geometry's resolution and
    /// divided by 255. With `test_path`, the first `test_count` images of
    /// that file form the test split.
    Idx {
        path: PathBuf,
        #[serde(default)]
        test_path: Option<PathBuf>,
        #[serde(default)]
        test_count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub source: DataSource,
    /// Images drawn from the source before splitting.
    pub count: usize,
    #[serde(default = "one")]
    pub paired_fraction: f64,
    /// Fraction of images in the training split.
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    #[serde(default)]
    pub drop_unpaired: bool,
    /// Add the eight dihedral copies of every training image.
    #[serde(default)]
    pub augment: bool,
}

fn one() -> f64 {
    1.0
}
fn default_split() -> f64 {
    0.9
}

/// Parameter choice `α = scale·δ^exponent` of the structured variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredSection {
    #[serde(default = "one")]
    pub alpha_scale: f64,
    #[serde(default = "two_thirds")]
    pub alpha_exponent: f64,
}

fn two_thirds() -> f64 {
    2.0 / 3.0
}

impl Default for StructuredSection {
    fn default() -> Self {
        Self {
            alpha_scale: 1.0,
            alpha_exponent: two_thirds(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub method: Method,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_pairs() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSection {
    pub method: Method,
    #[serde(default = "default_ball_samples")]
    pub samples: usize,
}

fn default_ball_samples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesSection {
    pub methods: Vec<Method>,
    /// Per-entry noise levels applied to the clean test sinograms.
    pub levels: Vec<f64>,
    #[serde(default = "default_smoothing")]
    pub smoothing_sigma: f64,
    /// Order latent indices by magnitude at the highest level instead of
    /// keeping the SVD order.
    #[serde(default)]
    pub order_by_magnitude: bool,
}

fn default_smoothing() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySection {
    pub methods: Vec<Method>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub with_sinograms: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default)]
    pub stability: Option<StabilitySection>,
    #[serde(default)]
    pub ball: Option<BallSection>,
    #[serde(default)]
    pub scales: Option<ScalesSection>,
    #[serde(default)]
    pub dictionary: Option<DictionarySection>,
}

impl AnalysisSection {
    fn referenced_methods(&self) -> Vec<(&'static str, Method)> {
        let mut out = Vec::new();
        if let Some(s) = &self.stability {
            out.push(("analysis.stability.method", s.method));
        }
        if let Some(b) = &self.ball {
            out.push(("analysis.ball.method", b.method));
        }
        if let Some(s) = &self.scales {
            out.extend(s.methods.iter().map(|&m| ("analysis.scales.methods", m)));
        }
        if let Some(d) = &self.dictionary {
            out.extend(d.methods.iter().map(|&m| ("analysis.dictionary.methods", m)));
        }
        out
    }
}

/// One experiment: geometry, data, methods, training and analyses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    /// Master seed; dataset, noise and training seeds derive from it.
    pub seed: u64,
    pub geometry: TomoGeometry,
    pub methods: Vec<Method>,
    /// Latent dimension of the bottlenecked methods; `null` means the full
    /// rank `min(n, m)`.
    #[serde(default)]
    pub latent_dim: Option<usize>,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub loss: LossWeights,
    pub noise: NoiseConfig,
    pub training: TrainingSection,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub structured: StructuredSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub output_dir: PathBuf,
}

/// Seeds of the independent random streams of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSeeds {
    pub images: u64,
    pub noise: u64,
    pub split: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn seeds(&self) -> RunSeeds {
        RunSeeds {
            images: derive_seed(self.seed, 1),
            noise: derive_seed(self.seed, 2),
            split: derive_seed(self.seed, 3),
        }
    }

    pub fn method_seed(&self, method: Method) -> u64 {
        derive_seed(self.seed, method.salt())
    }

    pub fn full_rank(&self) -> usize {
        self.geometry.image_dim().min(self.geometry.data_dim())
    }

    pub fn effective_latent_dim(&self) -> usize {
        self.latent_dim.unwrap_or_else(|| self.full_rank())
    }

    /// Loss weights actually used for `method`. Methods built on the SVD and
    /// the reconstruction-only variant drop the autoencoder terms; image
    /// autoencoders drop everything but the image term.
    pub fn method_weights(&self, method: Method) -> LossWeights {
        let mut w = self.loss;
        if method.needs_svd() || method == Method::LsvdAlpha0 {
            w.alpha_y = 0.0;
            w.alpha_x = 0.0;
        }
        if method.needs_svd() {
            w.alpha_latent_ae = 0.0;
        }
        if method.is_image_autoencoder() {
            w = LossWeights {
                reconstruction: 0.0,
                alpha_y: 0.0,
                alpha_x: if self.loss.alpha_x > 0.0 { self.loss.alpha_x } else { 1.0 },
                alpha_latent_ae: 0.0,
                alpha_latent_sigma: 0.0,
            };
        }
        w
    }

    /// Field-level checks that serde cannot express.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |field: &str, msg: String| Err(ExperimentError::Invalid {
            field: field.to_string(),
            message: msg,
        });
        if let Err(e) = self.geometry.validate() {
            return bad("geometry", e.to_string());
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad("methods", format!("{m} is listed twice"));
            }
        }
        let full = self.full_rank();
        if let Some(k) = self.latent_dim {
            if k == 0 || k > full {
                return bad("latent_dim", format!("must lie in 1..={full}, got {k}"));
            }
        }
        let net = &self.network;
        if net.conv_layers > 0 {
            return bad(
                "network.conv_layers",
                format!("convolutional layers are not supported, got {}; use fully connected layers", net.conv_layers),
            );
        }
        if net.y_layers == 0 || net.x_layers == 0 {
            return bad("network", "y_layers and x_layers must be positive".into());
        }
        if net.sigma_layers == 0 {
            return bad("network.sigma_layers", "must be positive".into());
        }
        if !(net.init_std > 0.0 && net.init_std.is_finite()) {
            return bad("network.init_std", format!("must be positive, got {}", net.init_std));
        }
        for (field, act) in [
            ("network.activation", net.activation),
            ("network.sigma_activation", net.sigma_activation),
            ("network.c_min", net.bounded_head()),
        ] {
            if let Err(e) = act.validate() {
                return bad(field, e.to_string());
            }
        }
        if !(net.c_min > 0.0) {
            return bad("network.c_min", format!("must be positive, got {}", net.c_min));
        }
        if let Err(e) = self.loss.validate() {
            return bad("loss", e.to_string());
        }
        if let Err(msg) = self.noise.validate() {
            return bad("noise", msg);
        }
        let t = &self.training;
        if t.epochs == 0 || t.batch_size == 0 {
            return bad("training", "epochs and batch_size must be positive".into());
        }
        if let Err(e) = self.training.to_training_config(self.loss, 0).validate() {
            return bad("training", e.to_string());
        }
        let d = &self.dataset;
        if d.count < 2 {
            return bad("dataset.count", format!("need at least 2 images, got {}", d.count));
        }
        for (field, f) in [
            ("dataset.paired_fraction", d.paired_fraction),
            ("dataset.split_fraction", d.split_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return bad(field, format!("must lie in (0, 1], got {f}"));
            }
        }
        match &d.source {
            DataSource::Phantoms { rule } => {
                if self.geometry.image_side < 8 {
                    return bad("geometry.image_side", "phantoms need a side of at least 8".into());
                }
                if rule.min_ellipses == 0 || rule.min_ellipses > rule.max_ellipses {
                    return bad("dataset.source.rule", "need 1 <= min_ellipses <= max_ellipses".into());
                }
            }
            DataSource::Idx { test_path, test_count, .. } => {
                if test_path.is_some() && *test_count == 0 {
                    return bad("dataset.source.test_count", "must be positive when test_path is set".into());
                }
            }
        }
        let uses_test_split = d.split_fraction < 1.0
            || matches!(&d.source, DataSource::Idx { test_path: Some(_), .. });
        if !uses_test_split {
            return bad("dataset.split_fraction", "leaves no test images".into());
        }
        if self.methods.contains(&Method::StructuredTikhonov) {
            let s = &self.structured;
            if !(s.alpha_exponent > 0.0 && s.alpha_exponent < 2.0) {
                return bad(
                    "structured.alpha_exponent",
                    format!("α = c·δ^p needs p in (0, 2), got {}", s.alpha_exponent),
                );
            }
            if !(s.alpha_scale > 0.0) {
                return bad("structured.alpha_scale", "must be positive".into());
            }
        }
        if self.methods.contains(&Method::LsvdPairedOnly) && d.drop_unpaired {
            return bad(
                "dataset.drop_unpaired",
                "lsvd_paired_only already restricts itself to paired samples".into(),
            );
        }
        for (field, m) in self.analysis.referenced_methods() {
            if !self.methods.contains(&m) {
                return bad(field, format!("{m} is not among the configured methods"));
            }
            if !m.is_trained() && m != Method::ClassicalTikhonov && m != Method::Tsvd {
                return bad(field, format!("{m} has no latent model to analyse"));
            }
        }
        if let Some(s) = &self.analysis.stability {
            if s.pairs == 0 {
                return bad("analysis.stability.pairs", "must be positive".into());
            }
        }
        if let Some(s) = &self.analysis.scales {
            if s.levels.is_empty() || s.levels.iter().any(|&l| !(l >= 0.0)) {
                return bad("analysis.scales.levels", "need at least one non-negative level".into());
            }
        }
        Ok(())
    }
}

/// Rate experiment on the unnormalised Radon operator of `geometry`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub geometry: TomoGeometry,
    pub run: ConvergenceRunSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ConvergenceConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if let Err(e) = cfg.geometry.validate() {
            return Err(ExperimentError::Invalid {
                field: "geometry".into(),
                message: e.to_string(),
            });
        }
        cfg.run.validate().map_err(|e| ExperimentError::Invalid {
            field: "run".into(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Presets shipped with the library, by name.
pub const PRESETS: [(&str, &str); 7] = [
    ("exp1", include_str!("../../presets/exp1.json")),
    ("exp1-noise", include_str!("../../presets/exp1-noise.json")),
    ("exp2", include_str!("../../presets/exp2.json")),
    ("exp2-semi", include_str!("../../presets/exp2-semi.json")),
    ("exp3", include_str!("../../presets/exp3.json")),
    ("paper-exp1", include_str!("../../presets/paper-exp1.json")),
    ("paper-exp2", include_str!("../../presets/paper-exp2.json")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ExperimentError::UnknownPreset(name.to_string()))?;
    ExperimentConfig::from_json(text)
}
