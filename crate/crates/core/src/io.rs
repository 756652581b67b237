//! 8-bit PNG / PGM image files.
//!
//! Gray levels map to `v / 255` on load. Color inputs are reduced to
//! luminance `0.299 R + 0.587 G + 0.114 B`. Saving clamps to `[0, 1]` and
//! rounds to the nearest 8-bit level.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use crate::error::{Error, Result};
use crate::image::{clamp_to_gray, GrayImage, Plane, SignedImage};

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) / 255.0
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let decoded = reader.decode().map_err(|e| image_err(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match &decoded {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| f64::from(p[0]) / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| f64::from(p[0]) / 255.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luminance(p[0], p[1], p[2])).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| luminance(p[0], p[1], p[2])).collect(),
        other => {
            return Err(Error::UnsupportedDepth {
                path: path.to_path_buf(),
                color: format!("{:?}", other.color()),
            })
        }
    };
    GrayImage::from_vec(w, h, data)
}

/// Nearest 8-bit level of each clamped value.
pub fn quantize<P: Plane>(img: &P) -> Vec<u8> {
    img.data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Format follows the extension (`.png`, `.pgm`).
pub fn save_image<P: Plane>(img: &P, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, quantize(img))
            .expect("buffer length matches dimensions");
    buf.save(path).map_err(|e| image_err(path, e))
}

/// Writes a signed high-frequency layer with zero mapped to mid-gray.
pub fn save_signed_visual(img: &SignedImage, path: impl AsRef<Path>) -> Result<()> {
    let shifted = SignedImage::from_vec(
        img.width(),
        img.height(),
        img.data().iter().map(|v| v + 0.5).collect(),
    )?;
    save_image(&clamp_to_gray(&shifted), path)
}

/// Image files (`png`, `pgm`, `ppm`, `pnm`) directly inside `dir`, sorted by name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm" | "ppm" | "pnm")) && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
