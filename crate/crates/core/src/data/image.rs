use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DataError;

/// Square grey-scale image, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSignal {
    pub side: usize,
    pub pixels: Vec<f64>,
}

impl ImageSignal {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self, DataError> {
        if pixels.len() != side * side {
            return Err(DataError::BadImage {
                side,
                len: pixels.len(),
            });
        }
        Ok(Self { side, pixels })
    }

    pub fn constant(side: usize, value: f64) -> Self {
        Self {
            side,
            pixels: vec![value; side * side],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }

    pub fn clamped(mut self) -> Self {
        for p in &mut self.pixels {
            *p = p.clamp(0.0, 1.0);
        }
        self
    }
}

/// Bilinear interpolation with pixel-centre alignment: destination index
/// `i` samples source coordinate `(i + ½)·old/new − ½`, clamped to the edge.
pub fn bilinear_rescale(img: &ImageSignal, new_side: usize) -> ImageSignal {
    assert!(new_side >= 2, "new_side must be >= 2");
    let old = img.side;
    if old == new_side {
        return img.clone();
    }
    let coord = |i: usize| -> (usize, usize, f64) {
        let s = ((i as f64 + 0.5) * old as f64 / new_side as f64 - 0.5).clamp(0.0, (old - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(old - 1);
        (lo, hi, s - lo as f64)
    };
    let cols: Vec<_> = (0..new_side).map(coord).collect();
    let mut pixels = Vec::with_capacity(new_side * new_side);
    for r in 0..new_side {
        let (r0, r1, fr) = coord(r);
        for &(c0, c1, fc) in &cols {
            let top = img.get(r0, c0) * (1.0 - fc) + img.get(r0, c1) * fc;
            let bottom = img.get(r1, c0) * (1.0 - fc) + img.get(r1, c1) * fc;
            pixels.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    ImageSignal {
        side: new_side,
        pixels,
    }
    .clamped()
}

/// The eight images obtained by mirroring and rotating by multiples of 90°.
pub fn dihedral_augment(img: &ImageSignal) -> Vec<ImageSignal> {
    let n = img.side;
    let rotate = |src: &ImageSignal| ImageSignal {
        side: n,
        pixels: (0..n * n).map(|p| src.get(n - 1 - p % n, p / n)).collect(),
    };
    let mirror = ImageSignal {
        side: n,
        pixels: (0..n * n).map(|p| img.get(p / n, n - 1 - p % n)).collect(),
    };
    let mut out = Vec::with_capacity(8);
    for start in [img.clone(), mirror] {
        let mut cur = start;
        for _ in 0..4 {
            let next = rotate(&cur);
            out.push(cur);
            cur = next;
        }
    }
    out
}

/// Binary PGM (P5, maxval 255) with linear quantisation of `[0, 1]`.
pub fn write_pgm<W: Write>(img: &ImageSignal, out: W) -> Result<(), DataError> {
    write_pgm_raw(img.side, img.side, &img.pixels, out)
}

/// Binary PGM of an arbitrary `width × height` row-major canvas.
pub fn write_pgm_raw<W: Write>(width: usize, height: usize, pixels: &[f64], mut out: W) -> Result<(), DataError> {
    assert_eq!(pixels.len(), width * height, "canvas size mismatch");
    write!(out, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn write_pgm_file(img: &ImageSignal, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_pgm(img, BufWriter::new(File::create(path)?))
}

/// Reads a square binary PGM with maxval ≤ 255 into `[0, 1]`.
pub fn read_pgm<R: Read>(mut input: R) -> Result<ImageSignal, DataError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let mut token = || -> Result<String, DataError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(DataError::Pgm("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(DataError::Pgm("only binary P5 files are supported".into()));
    }
    let mut number = |what: &str| -> Result<usize, DataError> {
        token()?
            .parse()
            .map_err(|_| DataError::Pgm(format!("bad {what}")))
    };
    let (w, h, maxval) = (number("width")?, number("height")?, number("maxval")?);
    if w != h {
        return Err(DataError::Pgm(format!("image is {w}×{h}, expected square")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(DataError::Pgm(format!("unsupported maxval {maxval}")));
    }
    let data = &bytes[pos + 1..];
    if data.len() < w * h {
        return Err(DataError::Pgm(format!(
            "pixel data truncated: {} of {} bytes",
            data.len(),
            w * h
        )));
    }
    let pixels = data[..w * h].iter().map(|&b| b as f64 / maxval as f64).collect();
    ImageSignal::new(w, pixels)
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<ImageSignal, DataError> {
    read_pgm(BufReader::new(File::open(path)?))
}

/// Lays images out row by row, `columns` per row, separated by a 1-pixel
/// white border. Returns the raw canvas as a non-square PGM-ready buffer.
pub fn tile_grid(images: &[ImageSignal], columns: usize) -> (usize, usize, Vec<f64>) {
    let side = images.first().map_or(0, |i| i.side);
    let columns = columns.max(1);
    let rows = images.len().div_ceil(columns);
    let width = columns * (side + 1) + 1;
    let height = rows * (side + 1) + 1;
    let mut canvas = vec![1.0; width * height];
    for (k, img) in images.iter().enumerate() {
        let (gr, gc) = (k / columns, k % columns);
        for r in 0..side {
            for c in 0..side {
                let y = gr * (side + 1) + 1 + r;
                let x = gc * (side + 1) + 1 + c;
                canvas[y * width + x] = img.get(r, c);
            }
        }
    }
    (width, height, canvas)
}
