use std::path::{Path, PathBuf};

use super::AnalysisError;
use crate::data::write_pgm_raw;
use crate::linalg::DenseMatrix;
use crate::lsvd::LsvdModel;

/// Decoded canonical latent directions, one row per latent index.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    pub images: DenseMatrix,
    pub sinograms: Option<DenseMatrix>,
}

/// `dec_x(scale·e_i)` for every latent index, and `dec_y(scale·e_i)` when
/// `with_sinograms` is set.
pub fn decode_dictionary(model: &LsvdModel, scale: f64, with_sinograms: bool) -> Result<Dictionary, AnalysisError> {
    let k = model.latent_dim();
    let basis = DenseMatrix::identity(k).scaled(scale);
    Ok(Dictionary {
        images: model.dec_x.net.predict_batch(&basis)?,
        sinograms: if with_sinograms {
            Some(model.dec_y.net.predict_batch(&basis)?)
        } else {
            None
        },
    })
}

/// Min-max normalisation to `[0, 1]`; constant inputs map to mid-grey.
fn normalise(v: &[f64]) -> Vec<f64> {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if hi - lo <= 0.0 || !lo.is_finite() {
        return vec![0.5; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Writes `dict_x_<i>.pgm` (`image_side²` pixels) and, if present,
/// `dict_y_<i>.pgm` laid out as `angles` rows of `bins` pixels. Each atom is
/// min-max normalised for display.
pub fn write_dictionary(
    dict: &Dictionary,
    image_side: usize,
    sinogram_shape: (usize, usize),
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, AnalysisError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |branch: &str, atoms: &DenseMatrix, w: usize, h: usize| -> Result<(), AnalysisError> {
        for i in 0..atoms.rows() {
            let path = dir.join(format!("dict_{branch}_{i}.pgm"));
            let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write_pgm_raw(w, h, &normalise(atoms.row(i)), file)?;
            written.push(path);
        }
        Ok(())
    };
    emit("x", &dict.images, image_side, image_side)?;
    if let Some(s) = &dict.sinograms {
        emit("y", s, sinogram_shape.1, sinogram_shape.0)?;
    }
    Ok(written)
}
