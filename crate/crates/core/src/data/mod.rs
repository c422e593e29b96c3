//! Ground-truth images, datasets of (image, sinogram) pairs and image
//! quality metrics.

mod dataset;
mod idx;
mod image;
mod metrics;
mod phantom;

pub use dataset::{build_dataset, DatasetOptions, DatasetSplit, NoiseSpec, Sample};
pub use idx::{load_idx_images, parse_idx_images, write_idx_images};
pub use image::{bilinear_rescale, dihedral_augment, read_pgm, read_pgm_file, tile_grid, write_pgm, write_pgm_file, write_pgm_raw, ImageSignal};
pub use metrics::{metric_mse, metric_psnr, metric_ssim, ssim_window};
pub use phantom::{generate_phantoms, PhantomRule};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("IDX: expected magic 0x{expected:08x}, found 0x{found:08x}")]
    IdxMagic { expected: u32, found: u32 },
    #[error("IDX: file truncated at byte offset {offset} ({context})")]
    IdxTruncated { offset: usize, context: &'static str },
    #[error("PGM: {0}")]
    Pgm(String),
    #[error("image side {side} does not match {len} pixels")]
    BadImage { side: usize, len: usize },
    #[error("images have different sides ({0} vs {1})")]
    SideMismatch(usize, usize),
    #[error("invalid dataset options: {0}")]
    Options(String),
    #[error(transparent)]
    Tomo(#[from] crate::tomo::TomoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
