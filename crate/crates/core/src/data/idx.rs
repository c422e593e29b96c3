//! IDX image files: big-endian magic `0x00000803`, then image count, rows
//! and columns as big-endian `u32`, then unsigned bytes row by row.

use std::io::Write;
use std::path::Path;

use super::{DataError, ImageSignal};

const IMAGE_MAGIC: u32 = 0x0000_0803;

fn be_u32(bytes: &[u8], offset: usize, context: &'static str) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("four bytes")))
        .ok_or(DataError::IdxTruncated { offset, context })
}

/// Images at raw resolution, pixel bytes scaled by `1/255`. Non-square
/// images are rejected since every consumer works on square grids.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<ImageSignal>, DataError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::IdxMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    if rows != cols {
        return Err(DataError::BadImage {
            side: rows,
            len: rows * cols,
        });
    }
    let size = rows * cols;
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * size;
        let chunk = bytes.get(start..start + size).ok_or(DataError::IdxTruncated {
            offset: bytes.len(),
            context: "pixel data",
        })?;
        images.push(ImageSignal {
            side: rows,
            pixels: chunk.iter().map(|&b| b as f64 / 255.0).collect(),
        });
    }
    Ok(images)
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<ImageSignal>, DataError> {
    parse_idx_images(&std::fs::read(path)?)
}

/// Writes images quantised to bytes (`round(255·v)`).
pub fn write_idx_images<W: Write>(images: &[ImageSignal], mut out: W) -> Result<(), DataError> {
    let side = images.first().map_or(0, |i| i.side);
    out.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    out.write_all(&(images.len() as u32).to_be_bytes())?;
    out.write_all(&(side as u32).to_be_bytes())?;
    out.write_all(&(side as u32).to_be_bytes())?;
    for img in images {
        if img.side != side {
            return Err(DataError::SideMismatch(side, img.side));
        }
        let bytes: Vec<u8> = img
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        out.write_all(&bytes)?;
    }
    Ok(())
}
