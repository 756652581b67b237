//! Overlapping square patches and their least-squares reassembly.
//!
//! The reassembly minimizes `sum_k |R_k X - p_k|^2` over the image `X`,
//! where `R_k` reads the patch at origin `k`. Since `sum_k R_k^T R_k` is
//! diagonal (per-pixel coverage counts), the minimizer is the per-pixel mean
//! of every patch value covering that pixel.

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};
use crate::image::{Plane, SignedImage};

/// Patches stored one per column (row-major within the patch), with the
/// top-left origin each column was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    patch_size: usize,
    stride: usize,
    origins: Vec<(usize, usize)>,
    patches: DMatrix<f64>,
    image_dims: (usize, usize),
}

/// Origins along one axis: a regular grid plus a final origin pinned to the
/// border so every pixel is covered.
pub fn axis_origins(len: usize, patch_size: usize, stride: usize) -> Vec<usize> {
    let last = len - patch_size;
    let mut out: Vec<usize> = (0..last).step_by(stride).collect();
    out.push(last);
    out
}

fn check_geometry(height: usize, width: usize, patch_size: usize, stride: usize) -> Result<()> {
    if patch_size == 0 {
        return Err(dim_err("patch size must be positive"));
    }
    if patch_size > height.min(width) {
        return Err(dim_err(format!(
            "{patch_size}x{patch_size} patch does not fit a {width}x{height} image"
        )));
    }
    if stride == 0 || stride > patch_size {
        return Err(dim_err(format!(
            "stride {stride} must lie in 1..={patch_size}"
        )));
    }
    Ok(())
}

/// Row-major origin list for an image of `(height, width)`.
pub fn grid_origins(
    image_dims: (usize, usize),
    patch_size: usize,
    stride: usize,
) -> Result<Vec<(usize, usize)>> {
    let (h, w) = image_dims;
    check_geometry(h, w, patch_size, stride)?;
    let rows = axis_origins(h, patch_size, stride);
    let cols = axis_origins(w, patch_size, stride);
    Ok(rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect())
}

/// Reads the patch at each origin into one column of a matrix.
pub(crate) fn read_patches<P: Plane>(
    img: &P,
    origins: &[(usize, usize)],
    patch_size: usize,
) -> DMatrix<f64> {
    let w = img.width();
    let data = img.data();
    let mut patches = DMatrix::zeros(patch_size * patch_size, origins.len());
    for (k, &(r0, c0)) in origins.iter().enumerate() {
        let mut col = patches.column_mut(k);
        for dr in 0..patch_size {
            let start = (r0 + dr) * w + c0;
            for (dc, v) in data[start..start + patch_size].iter().enumerate() {
                col[dr * patch_size + dc] = *v;
            }
        }
    }
    patches
}

pub fn extract_patches<P: Plane>(img: &P, patch_size: usize, stride: usize) -> Result<PatchGrid> {
    let origins = grid_origins(img.dims(), patch_size, stride)?;
    let patches = read_patches(img, &origins, patch_size);
    Ok(PatchGrid {
        patch_size,
        stride,
        origins,
        patches,
        image_dims: img.dims(),
    })
}

impl PatchGrid {
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }

    pub fn patches(&self) -> &DMatrix<f64> {
        &self.patches
    }

    pub fn into_patches(self) -> DMatrix<f64> {
        self.patches
    }

    /// `(height, width)` of the source image.
    pub fn image_dims(&self) -> (usize, usize) {
        self.image_dims
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Same geometry, different patch contents (e.g. estimated patches).
    pub fn with_patches(&self, patches: DMatrix<f64>) -> Result<PatchGrid> {
        if patches.nrows() != self.patch_size * self.patch_size || patches.ncols() != self.len() {
            return Err(dim_err(format!(
                "expected {}x{} patch matrix, got {}x{}",
                self.patch_size * self.patch_size,
                self.len(),
                patches.nrows(),
                patches.ncols()
            )));
        }
        Ok(PatchGrid {
            patches,
            origins: self.origins.clone(),
            ..*self
        })
    }

    /// Builds a grid from explicit parts, validating every invariant.
    pub fn from_parts(
        patch_size: usize,
        stride: usize,
        origins: Vec<(usize, usize)>,
        patches: DMatrix<f64>,
        image_dims: (usize, usize),
    ) -> Result<PatchGrid> {
        let (h, w) = image_dims;
        check_geometry(h, w, patch_size, stride)?;
        if patches.nrows() != patch_size * patch_size || patches.ncols() != origins.len() {
            return Err(dim_err("patch matrix does not match origin count"));
        }
        if let Some(&(r, c)) = origins
            .iter()
            .find(|&&(r, c)| r + patch_size > h || c + patch_size > w)
        {
            return Err(dim_err(format!("origin ({r}, {c}) lies outside the image")));
        }
        Ok(PatchGrid {
            patch_size,
            stride,
            origins,
            patches,
            image_dims,
        })
    }
}

/// Least-squares image from overlapping patch estimates.
///
/// Each pixel is the running mean of the patch values covering it, so
/// patches that agree reproduce their common value exactly.
pub fn assemble_patches(grid: &PatchGrid) -> Result<SignedImage> {
    let (h, w) = grid.image_dims;
    let p = grid.patch_size;
    let mut mean = vec![0.0; h * w];
    let mut count = vec![0u32; h * w];
    for (k, &(r0, c0)) in grid.origins.iter().enumerate() {
        let col = grid.patches.column(k);
        for dr in 0..p {
            let base = (r0 + dr) * w + c0;
            for dc in 0..p {
                let i = base + dc;
                count[i] += 1;
                mean[i] += (col[dr * p + dc] - mean[i]) / f64::from(count[i]);
            }
        }
    }
    if let Some(i) = count.iter().position(|&n| n == 0) {
        return Err(Error::Coverage {
            row: i / w,
            col: i % w,
        });
    }
    SignedImage::from_vec(w, h, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;

    #[test]
    fn single_patch_grid() {
        let img = GrayImage::filled(9, 9, 0.5).unwrap();
        let grid = extract_patches(&img, 9, 8).unwrap();
        assert_eq!(grid.origins(), &[(0, 0)]);
    }

    #[test]
    fn two_by_two_grid() {
        let img = GrayImage::filled(17, 17, 0.5).unwrap();
        let grid = extract_patches(&img, 9, 8).unwrap();
        assert_eq!(grid.origins(), &[(0, 0), (0, 8), (8, 0), (8, 8)]);
    }

    #[test]
    fn clamped_last_origin_and_full_coverage() {
        assert_eq!(axis_origins(20, 9, 8), vec![0, 8, 11]);
        let origins = grid_origins((20, 20), 9, 8).unwrap();
        assert_eq!(origins.len(), 9);
        // brute-force coverage scan
        let mut covered = [[false; 20]; 20];
        for &(r, c) in &origins {
            for row in covered.iter_mut().skip(r).take(9) {
                for px in row.iter_mut().skip(c).take(9) {
                    *px = true;
                }
            }
        }
        assert!(covered.iter().flatten().all(|&b| b));
    }

    #[test]
    fn extraction_reads_row_major() {
        let img = GrayImage::from_fn(4, 3, |r, c| (r * 4 + c) as f64).unwrap();
        let grid = extract_patches(&img, 2, 2).unwrap();
        assert_eq!(grid.origins(), &[(0, 0), (0, 2), (1, 0), (1, 2)]);
        assert_eq!(grid.patches().column(3).as_slice(), &[6.0, 7.0, 10.0, 11.0]);
    }

    #[test]
    fn rejects_bad_geometry() {
        let img = GrayImage::filled(8, 12, 0.0).unwrap();
        assert!(extract_patches(&img, 9, 8).is_err());
        assert!(extract_patches(&img, 4, 0).is_err());
        assert!(extract_patches(&img, 4, 5).is_err());
    }

    #[test]
    fn overlap_strip_is_averaged() {
        // 9 wide, 5 tall: patches at columns 0 and 4 overlap on column 4
        let origins = vec![(0, 0), (0, 4)];
        let mut patches = DMatrix::zeros(25, 2);
        patches.column_mut(0).fill(1.0);
        patches.column_mut(1).fill(3.0);
        let grid = PatchGrid::from_parts(5, 4, origins, patches, (5, 9)).unwrap();
        let out = assemble_patches(&grid).unwrap();
        for r in 0..5 {
            assert_eq!(out.at(r, 3), 1.0);
            assert_eq!(out.at(r, 4), 2.0);
            assert_eq!(out.at(r, 5), 3.0);
        }
    }

    #[test]
    fn uncovered_pixel_is_an_error() {
        let grid = PatchGrid::from_parts(2, 2, vec![(0, 0)], DMatrix::zeros(4, 1), (3, 3)).unwrap();
        assert!(matches!(assemble_patches(&grid), Err(Error::Coverage { row: 0, col: 2 })));
    }

    #[test]
    fn whole_image_patch_verbatim() {
        let img = GrayImage::from_fn(6, 6, |r, c| (r * 6 + c) as f64 * 0.1).unwrap();
        let grid = extract_patches(&img, 6, 3).unwrap();
        assert_eq!(assemble_patches(&grid).unwrap().data(), img.data());
    }
}
