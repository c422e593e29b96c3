//! A model directory holds `manifest.json`, one network checkpoint per
//! sub-network and, for the linear Σ variants, a raw little-endian `f64`
//! parameter file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Branch, LsvdError, LsvdModel, SigmaKind, SigmaVariant};
use crate::linalg::DenseMatrix;
use crate::nn::{load_network, save_network};

const MANIFEST: &str = "manifest.json";
const SIGMA_PARAMS: &str = "sigma.f64";
const SIGMA_NET: &str = "sigma_net.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelManifest {
    pub format_version: u32,
    pub sigma: SigmaKind,
    pub sigma_frozen: bool,
    pub latent_dim: usize,
    /// Sub-network name → (file, frozen).
    pub branches: BTreeMap<String, BranchEntry>,
    pub sigma_params: Option<String>,
    pub sigma_net: Option<String>,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub file: String,
    pub frozen: bool,
}

fn write_f64s(path: &Path, values: &[f64]) -> Result<(), LsvdError> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f64s(path: &Path) -> Result<Vec<f64>, LsvdError> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(LsvdError::Manifest(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn save_model(model: &LsvdModel, dir: impl AsRef<Path>, step: u64) -> Result<ModelManifest, LsvdError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut branches = BTreeMap::new();
    for (name, b) in [
        ("enc_y", &model.enc_y),
        ("dec_y", &model.dec_y),
        ("enc_x", &model.enc_x),
        ("dec_x", &model.dec_x),
    ] {
        let file = format!("{name}.bin");
        save_network(&b.net, step, dir.join(&file))?;
        branches.insert(name.to_string(), BranchEntry { file, frozen: b.frozen });
    }
    let (params, net) = match &model.sigma {
        SigmaVariant::Diagonal { scales } => (Some(scales.clone()), None),
        SigmaVariant::Full { matrix } => (Some(matrix.data().to_vec()), None),
        SigmaVariant::TikhonovStructured { s, alpha, net } => {
            let mut p = s.clone();
            p.push(*alpha);
            (Some(p), Some(net))
        }
        SigmaVariant::NoiseAware { net } => (None, Some(net)),
    };
    if let Some(p) = &params {
        write_f64s(&dir.join(SIGMA_PARAMS), p)?;
    }
    if let Some(net) = net {
        save_network(net, step, dir.join(SIGMA_NET))?;
    }
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        sigma: model.sigma.kind(),
        sigma_frozen: model.sigma_frozen,
        latent_dim: model.latent_dim(),
        branches,
        sigma_params: params.map(|_| SIGMA_PARAMS.to_string()),
        sigma_net: net.map(|_| SIGMA_NET.to_string()),
        step,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| LsvdError::Manifest(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json)?;
    Ok(manifest)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(LsvdModel, ModelManifest), LsvdError> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: ModelManifest = serde_json::from_str(&text).map_err(|e| LsvdError::Manifest(e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(LsvdError::Manifest(format!("unsupported format version {}", manifest.format_version)));
    }
    let branch = |name: &str| -> Result<Branch, LsvdError> {
        let entry = manifest
            .branches
            .get(name)
            .ok_or_else(|| LsvdError::Manifest(format!("missing sub-network {name}")))?;
        let (net, _) = load_network(dir.join(&entry.file))?;
        Ok(Branch { net, frozen: entry.frozen })
    };
    let k = manifest.latent_dim;
    let params = || -> Result<Vec<f64>, LsvdError> {
        let file = manifest
            .sigma_params
            .as_ref()
            .ok_or_else(|| LsvdError::Manifest("Σ parameter file not named".into()))?;
        read_f64s(&dir.join(file))
    };
    let net = || -> Result<crate::nn::MlpNetwork, LsvdError> {
        let file = manifest
            .sigma_net
            .as_ref()
            .ok_or_else(|| LsvdError::Manifest("Σ network file not named".into()))?;
        Ok(load_network(dir.join(file))?.0)
    };
    let bad_len = |got: usize| LsvdError::Manifest(format!("Σ parameter file has {got} values for latent dimension {k}"));
    let sigma = match manifest.sigma {
        SigmaKind::Diagonal => {
            let p = params()?;
            if p.len() != k {
                return Err(bad_len(p.len()));
            }
            SigmaVariant::Diagonal { scales: p }
        }
        SigmaKind::Full => {
            let p = params()?;
            if p.len() != k * k {
                return Err(bad_len(p.len()));
            }
            SigmaVariant::Full {
                matrix: DenseMatrix::from_vec(k, k, p).map_err(|e| LsvdError::Manifest(e.to_string()))?,
            }
        }
        SigmaKind::TikhonovStructured => {
            let mut p = params()?;
            if p.len() != k + 1 {
                return Err(bad_len(p.len()));
            }
            let alpha = p.pop().expect("k + 1 values");
            SigmaVariant::TikhonovStructured { s: p, alpha, net: net()? }
        }
        SigmaKind::NoiseAware => SigmaVariant::NoiseAware { net: net()? },
    };
    let model = LsvdModel::assemble(
        branch("enc_y")?,
        branch("dec_y")?,
        branch("enc_x")?,
        branch("dec_x")?,
        sigma,
        manifest.sigma_frozen,
    )?;
    Ok((model, manifest))
}
