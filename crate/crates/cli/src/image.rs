use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use png::{ColorType, Transformations};
use whitex_core::tensor_io::npy;
use whitex_core::{Error, ImageTensor, Result};

/// Loads an 8-bit PNG or an `H x W` / `H x W x C` NPY array. Alpha channels
/// are dropped; palette and low-bit-depth PNGs are expanded to 8 bits.
pub fn load_image(path: &Path) -> Result<ImageTensor> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => load_png(path),
        Some("npy") => load_npy(path),
        _ => Err(Error::Validation(format!(
            "{}: unsupported image format; expected .png or .npy",
            path.display()
        ))),
    }
}

fn load_png(path: &Path) -> Result<ImageTensor> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::normalize_to_color8());
    let bad = |e: png::DecodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut reader = decoder.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;

    let (samples, keep) = match info.color_type {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        ColorType::Indexed => {
            return Err(Error::Format(format!(
                "{}: palette was not expanded",
                path.display()
            )))
        }
    };
    let (h, w) = (info.height as usize, info.width as usize);
    let mut pixels = Vec::with_capacity(h * w * keep);
    for line in buf.chunks(info.line_size).take(h) {
        for px in line[..w * samples].chunks_exact(samples) {
            pixels.extend(px[..keep].iter().map(|&b| f64::from(b)));
        }
    }
    ImageTensor::new(pixels, h, w, keep)
}

fn load_npy(path: &Path) -> Result<ImageTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let arr = npy::parse_npy(&bytes)?;
    let (h, w, c) = match arr.shape[..] {
        [h, w] => (h, w, 1),
        [h, w, c] => (h, w, c),
        _ => {
            return Err(Error::Format(format!(
                "{}: expected an HxW or HxWxC array, got shape {:?}",
                path.display(),
                arr.shape
            )))
        }
    };
    ImageTensor::new(arr.values, h, w, c)
}
