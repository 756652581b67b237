//! Low-frequency patch features: a bank of zero-DC high-pass stencils,
//! patch extraction from each filtered image, and a PCA projection that
//! reduces the concatenated responses to a compact feature vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, Error, Result};
use crate::image::{Kernel2d, Plane, SignedImage};
use crate::patching::{grid_origins, read_patches};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    kernels: Vec<Kernel2d>,
}

impl Default for FilterBank {
    /// First- and second-order derivative stencils in both directions.
    fn default() -> Self {
        let grad = Kernel2d::row(&[1.0, 0.0, -1.0]).expect("odd stencil");
        let lap = Kernel2d::row(&[1.0, 0.0, -2.0, 0.0, 1.0])
            .expect("odd stencil")
            .scaled(0.5);
        Self {
            kernels: vec![grad.clone(), grad.transposed(), lap.clone(), lap.transposed()],
        }
    }
}

impl FilterBank {
    /// Every kernel must be high-pass: its taps sum to zero.
    pub fn new(kernels: Vec<Kernel2d>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Config("filter bank needs at least one kernel".into()));
        }
        if let Some(i) = kernels.iter().position(|k| k.sum().abs() > 1e-12) {
            return Err(Error::Config(format!("kernel {i} has non-zero DC response")));
        }
        Ok(Self { kernels })
    }

    /// Skips the zero-DC check. Used for test fixtures such as an identity tap.
    pub fn new_unchecked(kernels: Vec<Kernel2d>) -> Self {
        Self { kernels }
    }

    pub fn kernels(&self) -> &[Kernel2d] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn raw_dim(&self, patch_size: usize) -> usize {
        self.kernels.len() * patch_size * patch_size
    }
}

/// One filtered image per kernel, same size as the input.
pub fn filter_image<P: Plane>(img: &P, bank: &FilterBank) -> Result<Vec<SignedImage>> {
    bank.kernels
        .iter()
        .map(|k| {
            let data = k.convolve(img)?;
            SignedImage::from_vec(img.width(), img.height(), data)
        })
        .collect()
}

/// Concatenated filtered patches, one column per patch origin, in
/// the same origin order as [`crate::patching::extract_patches`].
pub fn raw_features<P: Plane>(
    img: &P,
    bank: &FilterBank,
    patch_size: usize,
    stride: usize,
) -> Result<DMatrix<f64>> {
    let origins = grid_origins(img.dims(), patch_size, stride)?;
    let filtered = filter_image(img, bank)?;
    let block = patch_size * patch_size;
    let mut out = DMatrix::zeros(block * filtered.len(), origins.len());
    for (f, plane) in filtered.iter().enumerate() {
        let patches = read_patches(plane, &origins, patch_size);
        out.rows_mut(f * block, block).copy_from(&patches);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    mean: DVector<f64>,
    /// Orthonormal rows, ordered by descending variance.
    basis: DMatrix<f64>,
    energy_kept: f64,
}

impl PcaProjection {
    pub fn from_parts(mean: DVector<f64>, basis: DMatrix<f64>, energy_kept: f64) -> Result<Self> {
        if basis.ncols() != mean.len() {
            return Err(dim_err(format!(
                "basis has {} columns for a {}-dim mean",
                basis.ncols(),
                mean.len()
            )));
        }
        if basis.nrows() == 0 || basis.nrows() > basis.ncols() {
            return Err(dim_err(format!("invalid reduced dimension {}", basis.nrows())));
        }
        Ok(Self {
            mean,
            basis,
            energy_kept,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn energy_kept(&self) -> f64 {
        self.energy_kept
    }

    pub fn raw_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.basis.nrows()
    }
}

/// Principal components keeping at least `energy_kept` of the total variance.
pub fn fit_pca(samples: &DMatrix<f64>, energy_kept: f64) -> Result<PcaProjection> {
    let (dim, n) = samples.shape();
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 samples, got {n}")));
    }
    if !(energy_kept > 0.0 && energy_kept <= 1.0) {
        return Err(Error::Config(format!("energy_kept must lie in (0, 1], got {energy_kept}")));
    }
    let mean = samples.column_mean();
    let mut centered = samples.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = (&centered * centered.transpose()) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    // descending eigenvalue, index as tie-break
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();

    let mut keep = dim;
    if total > 0.0 {
        let mut cum = 0.0;
        for (i, v) in values.iter().enumerate() {
            cum += v;
            if cum >= energy_kept * total {
                keep = i + 1;
                break;
            }
        }
    } else {
        keep = 1;
    }

    let mut basis = DMatrix::zeros(keep, dim);
    for (row, &i) in order.iter().take(keep).enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = v.iamax();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..dim {
            basis[(row, j)] = sign * v[j];
        }
    }
    PcaProjection::from_parts(mean, basis, energy_kept)
}

/// `basis * (x - mean)` for every column `x`.
pub fn project(features: &DMatrix<f64>, pca: &PcaProjection) -> Result<DMatrix<f64>> {
    if features.nrows() != pca.raw_dim() {
        return Err(dim_err(format!(
            "features have dimension {}, projection expects {}",
            features.nrows(),
            pca.raw_dim()
        )));
    }
    let mut centered = features.clone();
    for mut col in centered.column_iter_mut() {
        col -= &pca.mean;
    }
    Ok(&pca.basis * centered)
}

/// Filter bank, patch geometry and PCA: everything needed to map an
/// image to its per-patch feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline {
    pub bank: FilterBank,
    pub pca: PcaProjection,
    pub patch_size: usize,
    pub stride: usize,
}

impl FeaturePipeline {
    pub fn raw_features<P: Plane>(&self, img: &P) -> Result<DMatrix<f64>> {
        raw_features(img, &self.bank, self.patch_size, self.stride)
    }

    /// Projected features, `reduced_dim x n_patches`.
    pub fn features<P: Plane>(&self, img: &P) -> Result<DMatrix<f64>> {
        project(&self.raw_features(img)?, &self.pca)
    }

    pub fn reduced_dim(&self) -> usize {
        self.pca.reduced_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use crate::patching::extract_patches;

    #[test]
    fn default_bank_is_high_pass() {
        let bank = FilterBank::default();
        assert_eq!(bank.len(), 4);
        for k in bank.kernels() {
            assert!(k.sum().abs() <= 1e-12);
        }
        assert!(FilterBank::new(vec![Kernel2d::row(&[1.0, 1.0, 0.0]).unwrap()]).is_err());
    }

    #[test]
    fn constant_image_filters_to_zero() {
        let img = GrayImage::filled(12, 12, 0.6).unwrap();
        for out in filter_image(&img, &FilterBank::default()).unwrap() {
            assert!(out.data().iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn ramp_gradient_is_two() {
        let img = GrayImage::from_fn(10, 6, |_, c| c as f64).unwrap();
        let out = filter_image(&img, &FilterBank::default()).unwrap();
        for r in 0..6 {
            for c in 1..9 {
                assert_eq!(out[0].at(r, c), 2.0);
            }
        }
    }

    #[test]
    fn raw_feature_layout() {
        let img = GrayImage::from_fn(20, 20, |r, c| ((r * 3 + c * c) % 13) as f64 / 13.0).unwrap();
        let bank = FilterBank::default();
        let feats = raw_features(&img, &bank, 9, 8).unwrap();
        assert_eq!(feats.shape(), (324, 9));
        let filtered = filter_image(&img, &bank).unwrap();
        for (f, plane) in filtered.iter().enumerate() {
            let grid = extract_patches(plane, 9, 8).unwrap();
            for k in 0..9 {
                assert_eq!(feats.column(k).rows(f * 81, 81), grid.patches().column(k));
            }
        }
    }

    #[test]
    fn identity_tap_reproduces_patches() {
        let img = GrayImage::from_fn(11, 13, |r, c| (r * 13 + c) as f64).unwrap();
        let bank = FilterBank::new_unchecked(vec![Kernel2d::row(&[1.0]).unwrap()]);
        let feats = raw_features(&img, &bank, 5, 3).unwrap();
        assert_eq!(&feats, extract_patches(&img, 5, 3).unwrap().patches());
    }

    #[test]
    fn pca_rank_one_line() {
        let dir = DVector::from_vec(vec![1.0, 2.0, -2.0]) / 3.0;
        let samples = DMatrix::from_fn(3, 50, |i, j| 0.5 + (j as f64 - 20.0) * 0.1 * dir[i]);
        let pca = fit_pca(&samples, 0.999).unwrap();
        assert_eq!(pca.reduced_dim(), 1);
        let cos = pca.basis().row(0).transpose().dot(&dir).abs();
        assert!(cos >= 1.0 - 1e-8);
    }

    #[test]
    fn pca_degenerate_keeps_one_dim() {
        let samples = DMatrix::from_element(4, 10, 0.3);
        let pca = fit_pca(&samples, 0.9).unwrap();
        assert_eq!(pca.reduced_dim(), 1);
        assert!(fit_pca(&DMatrix::zeros(4, 1), 0.9).is_err());
        assert!(fit_pca(&samples, 0.0).is_err());
    }

    #[test]
    fn projection_of_mean_is_zero() {
        let samples = DMatrix::from_fn(5, 30, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let pca = fit_pca(&samples, 1.0).unwrap();
        let z = project(&DMatrix::from_column_slice(5, 1, pca.mean().as_slice()), &pca).unwrap();
        assert!(z.norm() < 1e-12);
        assert!(project(&DMatrix::zeros(4, 1), &pca).is_err());
    }

    #[test]
    fn identity_basis_only_centers() {
        let mean = DVector::from_vec(vec![1.0, -1.0]);
        let pca = PcaProjection::from_parts(mean, DMatrix::identity(2, 2), 1.0).unwrap();
        let x = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        assert_eq!(project(&x, &pca).unwrap().as_slice(), &[2.0, 5.0]);
    }
}
