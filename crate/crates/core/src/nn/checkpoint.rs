//! Binary network checkpoints: the 8-byte magic `LSVDNET1`, a little-endian
//! `u64` header length, a JSON header, then every parameter as a
//! little-endian `f64` in `params_flat` order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, MlpLayer, MlpNetwork, NnError};
use crate::linalg::DenseMatrix;

const MAGIC: &[u8; 8] = b"LSVDNET1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub biases: Vec<bool>,
    pub seed: u64,
    pub step: u64,
}

pub fn write_network<W: Write>(net: &MlpNetwork, step: u64, mut out: W) -> Result<(), NnError> {
    let header = CheckpointHeader {
        dims: net.dims(),
        activations: net.activations(),
        biases: net.layers().iter().map(|l| l.bias.is_some()).collect(),
        seed: net.seed(),
        step,
    };
    let json = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for v in net.params_flat() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Returns the network and the optimiser step stored with it.
pub fn read_network<R: Read>(mut input: R) -> Result<(MlpNetwork, CheckpointHeader), NnError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic bytes".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 24 {
        return Err(NnError::Checkpoint(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| NnError::Checkpoint(format!("header: {e}")))?;
    let layers = header.activations.len();
    if header.dims.len() != layers + 1 || header.biases.len() != layers || layers == 0 {
        return Err(NnError::Checkpoint("header dims, activations and biases disagree".into()));
    }
    let mut read_f64s = |count: usize| -> Result<Vec<f64>, NnError> {
        let mut buf = vec![0u8; count * 8];
        input.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    };
    let mut built = Vec::with_capacity(layers);
    for i in 0..layers {
        let (fan_in, fan_out) = (header.dims[i], header.dims[i + 1]);
        let weight = DenseMatrix::from_vec(fan_out, fan_in, read_f64s(fan_in * fan_out)?)
            .map_err(|e| NnError::Checkpoint(format!("layer {i}: {e}")))?;
        let bias = if header.biases[i] { Some(read_f64s(fan_out)?) } else { None };
        built.push(MlpLayer {
            weight,
            bias,
            activation: header.activations[i],
        });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(NnError::Checkpoint("trailing bytes after parameter blob".into()));
    }
    let mut net = MlpNetwork::from_layers(built)?;
    net.set_seed(header.seed);
    Ok((net, header))
}

pub fn save_network(net: &MlpNetwork, step: u64, path: impl AsRef<Path>) -> Result<(), NnError> {
    write_network(net, step, BufWriter::new(File::create(path)?))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<(MlpNetwork, CheckpointHeader), NnError> {
    read_network(BufReader::new(File::open(path)?))
}
