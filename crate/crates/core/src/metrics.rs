use crate::error::{dim_err, Result};
use crate::image::Plane;

/// Peak signal-to-noise ratio in dB with peak 1.0, over the full image.
///
/// Identical inputs give `f64::INFINITY`.
pub fn psnr<A: Plane, B: Plane>(a: &A, b: &B) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(dim_err(format!(
            "psnr of {}x{} against {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let n = a.data().len() as f64;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let mse = sse / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;

    #[test]
    fn identical_is_infinite() {
        let a = GrayImage::filled(3, 3, 0.2).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn one_level_offset() {
        let a = GrayImage::filled(8, 8, 100.0 / 255.0).unwrap();
        let b = GrayImage::filled(8, 8, 101.0 / 255.0).unwrap();
        let db = psnr(&a, &b).unwrap();
        assert!((db - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((db - 48.1308).abs() < 1e-4);
        assert_eq!(db, psnr(&b, &a).unwrap());
    }

    #[test]
    fn size_mismatch() {
        let a = GrayImage::filled(3, 3, 0.2).unwrap();
        let b = GrayImage::filled(3, 4, 0.2).unwrap();
        assert!(psnr(&a, &b).is_err());
    }
}
