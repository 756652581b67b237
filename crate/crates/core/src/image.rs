//! Whole-image containers and operators: the degradation model (blur then
//! decimation), bicubic interpolation and pixelwise arithmetic.
//!
//! Intensities are `f64` in `[0, 1]` at the I/O boundary. Operators never
//! clamp; [`clamp_to_gray`] is the only place values are clipped.

use rayon::prelude::*;

use crate::error::{dim_err, Result};

/// Read access shared by [`GrayImage`] and [`SignedImage`].
pub trait Plane {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    /// Row-major pixel values.
    fn data(&self) -> &[f64];

    fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> f64 {
        self.data()[row * self.width() + col]
    }
}

macro_rules! plane_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            width: usize,
            height: usize,
            data: Vec<f64>,
        }

        impl $name {
            /// Wraps row-major `data`. Fails unless `data.len() == width * height`,
            /// both dimensions are non-zero and every value is finite.
            pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
                if width == 0 || height == 0 {
                    return Err(dim_err(format!("empty image {width}x{height}")));
                }
                if data.len() != width * height {
                    return Err(dim_err(format!(
                        "{} values for a {width}x{height} image",
                        data.len()
                    )));
                }
                if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                    return Err(dim_err(format!("non-finite value at index {i}")));
                }
                Ok(Self { width, height, data })
            }

            pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
                Self::from_vec(width, height, vec![value; width * height])
            }

            pub fn from_fn(
                width: usize,
                height: usize,
                mut f: impl FnMut(usize, usize) -> f64,
            ) -> Result<Self> {
                let mut data = Vec::with_capacity(width * height);
                for r in 0..height {
                    for c in 0..width {
                        data.push(f(r, c));
                    }
                }
                Self::from_vec(width, height, data)
            }

            // Callers guarantee the length invariant.
            pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
                debug_assert_eq!(data.len(), width * height);
                Self { width, height, data }
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.data
            }
        }

        impl Plane for $name {
            fn width(&self) -> usize {
                self.width
            }
            fn height(&self) -> usize {
                self.height
            }
            fn data(&self) -> &[f64] {
                &self.data
            }
        }
    };
}

plane_type!(
    /// Grayscale image with intensities nominally in `[0, 1]`.
    ///
    /// Loaders and [`clamp_to_gray`] produce values inside the range.
    /// Interpolation can overshoot slightly; those values are kept as-is.
    GrayImage
);

plane_type!(
    /// Image of signed values: high-frequency layers and unclamped sums.
    SignedImage
);

impl GrayImage {
    pub fn to_signed(&self) -> SignedImage {
        SignedImage::from_raw(self.width, self.height, self.data.clone())
    }

    /// Top-left anchored crop to the largest dimensions divisible by `scale`.
    pub fn crop_to_multiple(&self, scale: usize) -> Result<GrayImage> {
        if scale == 0 {
            return Err(dim_err("scale must be positive"));
        }
        let w = self.width - self.width % scale;
        let h = self.height - self.height % scale;
        if w == 0 || h == 0 {
            return Err(dim_err(format!(
                "{}x{} image is smaller than scale {scale}",
                self.width, self.height
            )));
        }
        Ok(self.crop(0, 0, w, h))
    }

    pub fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> GrayImage {
        assert!(top + height <= self.height && left + width <= self.width);
        let mut data = Vec::with_capacity(width * height);
        for r in top..top + height {
            let start = r * self.width + left;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        GrayImage::from_raw(width, height, data)
    }
}

impl SignedImage {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Reinterprets the values as a gray image without clamping.
    pub fn into_gray_unclamped(self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.data)
    }
}

/// Mirror-without-repeat index extension: `-1 -> 1`, `n -> n - 2`.
#[inline]
pub(crate) fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Dense 2-D stencil applied by true convolution (the kernel is flipped).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Kernel2d {
    /// Both dimensions must be odd so the stencil has a center tap.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows % 2 == 0 || cols % 2 == 0 {
            return Err(dim_err(format!("kernel must have odd dimensions, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(dim_err(format!("{} taps for a {rows}x{cols} kernel", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn row(taps: &[f64]) -> Result<Self> {
        Self::new(1, taps.len(), taps.to_vec())
    }

    pub fn transposed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c]);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn taps(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Convolves a plane with this kernel using mirror border extension.
    pub fn convolve<P: Plane>(&self, img: &P) -> Result<Vec<f64>> {
        let (h, w) = img.dims();
        if self.rows > h || self.cols > w {
            return Err(dim_err(format!(
                "{}x{} kernel does not fit a {w}x{h} image",
                self.cols, self.rows
            )));
        }
        let cy = (self.rows / 2) as isize;
        let cx = (self.cols / 2) as isize;
        let src = img.data();
        let mut out = vec![0.0; w * h];
        out.par_chunks_mut(w).enumerate().for_each(|(r, out_row)| {
            for (c, out_px) in out_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for ky in 0..self.rows {
                    // flipped: tap (ky, kx) reads source offset (cy - ky, cx - kx)
                    let sr = mirror(r as isize + cy - ky as isize, h);
                    let src_row = &src[sr * w..sr * w + w];
                    let k_row = &self.data[ky * self.cols..(ky + 1) * self.cols];
                    for (kx, k) in k_row.iter().enumerate() {
                        let sc = mirror(c as isize + cx - kx as isize, w);
                        acc += k * src_row[sc];
                    }
                }
                *out_px = acc;
            }
        });
        Ok(out)
    }
}

/// Parameters of the degradation model: Gaussian blur then decimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    pub blur_kernel_size: usize,
    pub blur_sigma: f64,
    pub scale: usize,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            blur_kernel_size: 5,
            blur_sigma: 1.0,
            scale: 2,
        }
    }
}

impl DegradationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blur_kernel_size == 0 || self.blur_kernel_size % 2 == 0 {
            return Err(dim_err(format!(
                "blur kernel size must be odd, got {}",
                self.blur_kernel_size
            )));
        }
        if !(self.blur_sigma > 0.0 && self.blur_sigma.is_finite()) {
            return Err(dim_err(format!("blur sigma must be positive, got {}", self.blur_sigma)));
        }
        if self.scale < 2 {
            return Err(dim_err(format!("scale must be at least 2, got {}", self.scale)));
        }
        Ok(())
    }

    /// Normalized sampled Gaussian, `exp(-(i^2 + j^2) / (2 sigma^2)) / Z`.
    pub fn blur_kernel(&self) -> Result<Kernel2d> {
        let n = self.blur_kernel_size;
        if n == 0 || n % 2 == 0 {
            return Err(dim_err(format!("blur kernel size must be odd, got {n}")));
        }
        let half = (n / 2) as isize;
        let two_var = 2.0 * self.blur_sigma * self.blur_sigma;
        let mut taps = Vec::with_capacity(n * n);
        for i in -half..=half {
            for j in -half..=half {
                taps.push((-((i * i + j * j) as f64) / two_var).exp());
            }
        }
        let z: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= z);
        Kernel2d::new(n, n, taps)
    }
}

pub fn gaussian_blur(img: &GrayImage, spec: &DegradationSpec) -> Result<GrayImage> {
    let kernel = spec.blur_kernel()?;
    let out = kernel.convolve(img)?;
    Ok(GrayImage::from_raw(img.width, img.height, out))
}

/// Keeps the top-left sample of every `scale x scale` block.
pub fn decimate(img: &GrayImage, scale: usize) -> Result<GrayImage> {
    if scale == 0 {
        return Err(dim_err("scale must be positive"));
    }
    if img.width % scale != 0 || img.height % scale != 0 {
        return Err(dim_err(format!(
            "{}x{} image is not divisible by scale {scale}",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width / scale, img.height / scale);
    let mut data = Vec::with_capacity(w * h);
    for r in 0..h {
        let row = &img.data[r * scale * img.width..];
        data.extend((0..w).map(|c| row[c * scale]));
    }
    Ok(GrayImage::from_raw(w, h, data))
}

/// Noise-free observation model: blur followed by decimation.
pub fn degrade(img: &GrayImage, spec: &DegradationSpec) -> Result<GrayImage> {
    decimate(&gaussian_blur(img, spec)?, spec.scale)
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn keys_cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Per-phase tap weights for source offsets `-1, 0, 1, 2`.
fn bicubic_phases(scale: usize) -> Vec<[f64; 4]> {
    (0..scale)
        .map(|p| {
            let t = p as f64 / scale as f64;
            [
                keys_cubic(t + 1.0),
                keys_cubic(t),
                keys_cubic(1.0 - t),
                keys_cubic(2.0 - t),
            ]
        })
        .collect()
}

fn upscale_rows(src: &[f64], w: usize, h: usize, scale: usize, phases: &[[f64; 4]]) -> Vec<f64> {
    let ow = w * scale;
    let mut out = vec![0.0; ow * h];
    out.par_chunks_mut(ow).enumerate().for_each(|(r, out_row)| {
        let row = &src[r * w..(r + 1) * w];
        for (o, px) in out_row.iter_mut().enumerate() {
            let base = (o / scale) as isize;
            let wts = &phases[o % scale];
            let mut acc = 0.0;
            for (k, wt) in wts.iter().enumerate() {
                acc += wt * row[mirror(base + k as isize - 1, w)];
            }
            *px = acc;
        }
    });
    out
}

/// Separable bicubic interpolation by an integer factor.
///
/// Output pixel `o` samples source position `o / scale`, so
/// `out[r * s][c * s] == img[r][c]` up to rounding.
pub fn bicubic_upscale(img: &GrayImage, scale: usize) -> Result<GrayImage> {
    if scale == 0 {
        return Err(dim_err("scale must be positive"));
    }
    let (w, h) = (img.width, img.height);
    let phases = bicubic_phases(scale);
    let horiz = upscale_rows(&img.data, w, h, scale, &phases);
    let ow = w * scale;
    let oh = h * scale;
    let mut out = vec![0.0; ow * oh];
    out.par_chunks_mut(ow).enumerate().for_each(|(o, out_row)| {
        let base = (o / scale) as isize;
        let wts = &phases[o % scale];
        for (k, wt) in wts.iter().enumerate() {
            let sr = mirror(base + k as isize - 1, h);
            let src_row = &horiz[sr * ow..(sr + 1) * ow];
            for (px, s) in out_row.iter_mut().zip(src_row) {
                *px += wt * s;
            }
        }
    });
    Ok(GrayImage::from_raw(ow, oh, out))
}

fn check_same<A: Plane, B: Plane>(a: &A, b: &B) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(dim_err(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn img_add<A: Plane>(a: &A, b: &SignedImage) -> Result<SignedImage> {
    check_same(a, b)?;
    let data = a.data().iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(SignedImage::from_raw(a.width(), a.height(), data))
}

pub fn img_sub<A: Plane, B: Plane>(a: &A, b: &B) -> Result<SignedImage> {
    check_same(a, b)?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    Ok(SignedImage::from_raw(a.width(), a.height(), data))
}

pub fn clamp_to_gray<P: Plane>(a: &P) -> GrayImage {
    let data = a.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    GrayImage::from_raw(a.width(), a.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |r, c| (r * w + c) as f64).unwrap()
    }

    #[test]
    fn mirror_extension_without_repeat() {
        let got: Vec<usize> = (-3..8).map(|i| mirror(i, 5)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(mirror(-2, 1), 0);
        assert_eq!(mirror(2, 2), 0);
    }

    #[test]
    fn blur_kernel_is_normalized() {
        let k = DegradationSpec::default().blur_kernel().unwrap();
        assert!(k.taps().iter().all(|&t| t >= 0.0));
        assert!((k.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn blur_preserves_constant() {
        let img = GrayImage::filled(12, 9, 0.37).unwrap();
        let out = gaussian_blur(&img, &DegradationSpec::default()).unwrap();
        for v in out.data() {
            assert!((v - 0.37).abs() < 1e-14);
        }
    }

    #[test]
    fn blur_of_impulse_is_the_gaussian() {
        let img = GrayImage::from_fn(11, 11, |r, c| if r == 5 && c == 5 { 1.0 } else { 0.0 }).unwrap();
        let out = gaussian_blur(&img, &DegradationSpec::default()).unwrap();
        // independent evaluation of exp(-(i^2+j^2)/2) / Z
        let mut expected = [[0.0f64; 5]; 5];
        let mut z = 0.0;
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                let v = (-f64::from(i * i + j * j) / 2.0).exp();
                expected[(i + 2) as usize][(j + 2) as usize] = v;
                z += v;
            }
        }
        for r in 0..11 {
            for c in 0..11 {
                let want = if (3..=7).contains(&r) && (3..=7).contains(&c) {
                    expected[r - 3][c - 3] / z
                } else {
                    0.0
                };
                assert!((out.at(r, c) - want).abs() < 1e-15, "({r},{c})");
            }
        }
        // the center value of the normalized 5x5 sigma=1 Gaussian
        assert!((out.at(5, 5) - 0.16210282163712664).abs() < 1e-12);
    }

    #[test]
    fn blur_is_linear() {
        let a = GrayImage::from_fn(10, 8, |r, c| ((r * 7 + c * 3) % 11) as f64 / 11.0).unwrap();
        let b = GrayImage::from_fn(10, 8, |r, c| ((r * r + c) % 5) as f64 / 5.0).unwrap();
        let sum = GrayImage::from_vec(10, 8, img_add(&a, &b.to_signed()).unwrap().into_vec()).unwrap();
        let spec = DegradationSpec::default();
        let lhs = gaussian_blur(&sum, &spec).unwrap();
        let rhs = img_add(&gaussian_blur(&a, &spec).unwrap(), &gaussian_blur(&b, &spec).unwrap().to_signed()).unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn blur_rejects_oversized_kernel() {
        let img = GrayImage::filled(4, 8, 0.5).unwrap();
        assert!(gaussian_blur(&img, &DegradationSpec::default()).is_err());
    }

    #[test]
    fn decimate_samples_top_left() {
        let img = ramp(4, 4);
        let out = decimate(&img, 2).unwrap();
        assert_eq!(out.data(), &[0.0, 2.0, 8.0, 10.0]);
        assert_eq!(decimate(&img, 1).unwrap(), img);
        assert!(decimate(&ramp(5, 4), 2).is_err());
    }

    #[test]
    fn degrade_composes_public_ops() {
        let img = GrayImage::from_fn(16, 12, |r, c| ((r * 13 + c * 7) % 17) as f64 / 17.0).unwrap();
        let spec = DegradationSpec::default();
        let composed = decimate(&gaussian_blur(&img, &spec).unwrap(), 2).unwrap();
        assert_eq!(degrade(&img, &spec).unwrap(), composed);
        let c = degrade(&GrayImage::filled(16, 12, 0.25).unwrap(), &spec).unwrap();
        assert_eq!(c.dims(), (6, 8));
        assert!(c.data().iter().all(|v| (v - 0.25).abs() < 1e-14));
    }

    #[test]
    fn keys_kernel_values() {
        assert_eq!(keys_cubic(0.0), 1.0);
        assert_eq!(keys_cubic(1.0), 0.0);
        assert_eq!(keys_cubic(2.0), 0.0);
        assert!((keys_cubic(0.5) - 0.5625).abs() < 1e-15);
        assert!((keys_cubic(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn bicubic_identity_and_constant() {
        let img = ramp(7, 5);
        assert_eq!(bicubic_upscale(&img, 1).unwrap(), img);
        let c = bicubic_upscale(&GrayImage::filled(6, 5, 0.8).unwrap(), 3).unwrap();
        assert_eq!(c.dims(), (15, 18));
        assert!(c.data().iter().all(|v| (v - 0.8).abs() <= 1e-12));
    }

    #[test]
    fn bicubic_interpolates_source_samples() {
        let img = GrayImage::from_fn(9, 7, |r, c| ((r * 5 + c * 3) % 7) as f64 / 7.0).unwrap();
        let up = bicubic_upscale(&img, 2).unwrap();
        for r in 0..7 {
            for c in 0..9 {
                assert!((up.at(2 * r, 2 * c) - img.at(r, c)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bicubic_ramp_at_half_positions() {
        // 1-D horizontal ramp x, replicated over 3 rows
        let img = GrayImage::from_fn(8, 3, |_, c| c as f64).unwrap();
        let up = bicubic_upscale(&img, 2).unwrap();
        // closed form: weights at offsets 1.5, 0.5, 0.5, 1.5 are -1/16, 9/16, 9/16, -1/16
        let w = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];
        for k in 1..6usize {
            let want: f64 = (0..4).map(|i| w[i] * (k + i) as f64 - w[i]).sum();
            assert!((want - (k as f64 + 0.5)).abs() < 1e-12);
            for r in 0..6 {
                assert!((up.at(r, 2 * k + 1) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn arithmetic_and_clamp() {
        let a = GrayImage::from_fn(4, 3, |r, c| (r * 4 + c) as f64 / 256.0).unwrap();
        let b = GrayImage::from_fn(4, 3, |r, c| ((r + c * 5) % 9) as f64 / 256.0).unwrap();
        let zero = img_sub(&a, &a).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        let diff = img_sub(&a, &b).unwrap();
        let back = img_add(&diff, &b.to_signed()).unwrap();
        assert_eq!(back.data(), a.data());
        let s = SignedImage::from_vec(3, 1, vec![1.2, -0.1, 0.4]).unwrap();
        assert_eq!(clamp_to_gray(&s).data(), &[1.0, 0.0, 0.4]);
        assert!(img_sub(&a, &GrayImage::filled(3, 4, 0.0).unwrap()).is_err());
    }

    #[test]
    fn constructor_checks() {
        assert!(GrayImage::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::from_vec(0, 2, vec![]).is_err());
        assert!(SignedImage::from_vec(1, 1, vec![f64::NAN]).is_err());
        let img = GrayImage::from_fn(5, 3, |r, c| (r * 5 + c) as f64).unwrap();
        let cropped = img.crop_to_multiple(2).unwrap();
        assert_eq!(cropped.dims(), (2, 4));
        assert_eq!(cropped.data(), &[0.0, 1.0, 2.0, 3.0, 5.0, 6.0, 7.0, 8.0]);
    }
}
