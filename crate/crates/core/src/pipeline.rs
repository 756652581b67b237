//! Dual-dictionary training and two-layer synthesis.
//!
//! Layer one maps bicubic-upscaled features to the main high-frequency
//! detail. Layer two is trained on what layer one leaves behind and runs
//! on the layer-one result.

use nalgebra::DMatrix;

use crate::error::{dim_err, Error, Result};
use crate::features::{fit_pca, project, raw_features, FeaturePipeline, FilterBank};
use crate::image::{
    bicubic_upscale, clamp_to_gray, degrade, img_add, img_sub, DegradationSpec, GrayImage, Plane,
    SignedImage,
};
use crate::learning::{prune_mask, train_coupled, CoupledDictionary, KsvdConfig};
use crate::metrics::psnr;
use crate::patching::{assemble_patches, extract_patches, grid_origins, PatchGrid};
use crate::sparse::{omp_batch, SparseCode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Every hyperparameter of training and synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub degradation: DegradationSpec,
    pub patch_size: usize,
    pub stride: usize,
    pub sparsity: usize,
    pub md_atoms: usize,
    pub rd_atoms: usize,
    pub ksvd_iterations: usize,
    pub seed: u64,
    pub min_patch_norm: f64,
    pub pca_energy: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let ksvd = KsvdConfig::default();
        Self {
            degradation: DegradationSpec::default(),
            patch_size: 9,
            stride: 2,
            sparsity: ksvd.sparsity,
            md_atoms: 500,
            rd_atoms: 500,
            ksvd_iterations: ksvd.iterations,
            seed: ksvd.seed,
            min_patch_norm: ksvd.min_patch_norm,
            pca_energy: 0.999,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.degradation.validate()?;
        let positive = [
            ("patch_size", self.patch_size),
            ("stride", self.stride),
            ("sparsity", self.sparsity),
            ("md_atoms", self.md_atoms),
            ("rd_atoms", self.rd_atoms),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.stride > self.patch_size {
            return Err(Error::Config(format!(
                "stride {} exceeds patch size {}",
                self.stride, self.patch_size
            )));
        }
        if self.sparsity > self.md_atoms.min(self.rd_atoms) {
            return Err(Error::Config("sparsity exceeds dictionary size".into()));
        }
        if !(self.min_patch_norm >= 0.0) {
            return Err(Error::Config("min_patch_norm must be non-negative".into()));
        }
        if !(self.pca_energy > 0.0 && self.pca_energy <= 1.0) {
            return Err(Error::Config("pca_energy must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn ksvd_config(&self, n_atoms: usize) -> KsvdConfig {
        KsvdConfig {
            n_atoms,
            sparsity: self.sparsity,
            iterations: self.ksvd_iterations,
            seed: self.seed,
            min_patch_norm: self.min_patch_norm,
        }
    }
}

/// A trained dual-dictionary model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SRModel {
    pub config: ModelConfig,
    pub md_features: FeaturePipeline,
    pub md: CoupledDictionary,
    pub rd_features: FeaturePipeline,
    pub rd: CoupledDictionary,
    pub format_version: u32,
}

impl SRModel {
    pub fn new(
        config: ModelConfig,
        md_features: FeaturePipeline,
        md: CoupledDictionary,
        rd_features: FeaturePipeline,
        rd: CoupledDictionary,
    ) -> Result<Self> {
        let model = Self {
            config,
            md_features,
            md,
            rd_features,
            rd,
            format_version: MODEL_FORMAT_VERSION,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let p2 = self.config.patch_size * self.config.patch_size;
        for (name, feats, dict) in [
            ("main", &self.md_features, &self.md),
            ("residual", &self.rd_features, &self.rd),
        ] {
            if dict.low().signal_dim() != feats.reduced_dim() {
                return Err(dim_err(format!(
                    "{name} dictionary atoms have dimension {}, features have {}",
                    dict.low().signal_dim(),
                    feats.reduced_dim()
                )));
            }
            if dict.high().nrows() != p2 {
                return Err(dim_err(format!(
                    "{name} high atoms have dimension {}, expected {p2}",
                    dict.high().nrows()
                )));
            }
            if feats.patch_size != self.config.patch_size || feats.stride != self.config.stride {
                return Err(dim_err(format!("{name} feature geometry differs from config")));
            }
            if feats.pca.raw_dim() != feats.bank.raw_dim(feats.patch_size) {
                return Err(dim_err(format!("{name} PCA does not match its filter bank")));
            }
        }
        if self.md.n_atoms() != self.config.md_atoms || self.rd.n_atoms() != self.config.rd_atoms {
            return Err(dim_err("dictionary sizes differ from config"));
        }
        Ok(())
    }

    /// Copy with both high dictionaries zeroed.
    pub fn with_zero_high(&self) -> Self {
        Self {
            md: self.md.with_zero_high(),
            rd: self.rd.with_zero_high(),
            ..self.clone()
        }
    }
}

/// Patches whose raw filter response is below this norm carry no detail and
/// get an empty code. Without it, centering would map a flat patch to
/// `-basis * mean` and paint texture onto flat regions.
const FLAT_RESPONSE: f64 = 1e-9;

/// High-frequency estimate for an image at HR size: features, sparse codes
/// over the low atoms, the same codes applied to the high atoms, then
/// least-squares patch assembly.
pub fn synthesize_hf<P: Plane>(
    lf_img: &P,
    features: &FeaturePipeline,
    dict: &CoupledDictionary,
    sparsity: usize,
) -> Result<SignedImage> {
    let raw = features.raw_features(lf_img)?;
    let feats = project(&raw, &features.pca)?;
    let mut codes = omp_batch(dict.low(), &feats, sparsity)?;
    for (code, col) in codes.iter_mut().zip(raw.column_iter()) {
        if col.norm() < FLAT_RESPONSE {
            *code = SparseCode::empty(sparsity);
        }
    }
    let p = features.patch_size;
    let origins = grid_origins(lf_img.dims(), p, features.stride)?;
    let mut patches = DMatrix::zeros(p * p, codes.len());
    for (k, code) in codes.iter().enumerate() {
        patches.column_mut(k).copy_from_slice(&code.synthesize(dict.high()));
    }
    let grid = PatchGrid::from_parts(p, features.stride, origins, patches, lf_img.dims())?;
    assemble_patches(&grid)
}

/// Every intermediate image of one synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisLayers {
    /// Bicubic upscale of the input.
    pub lf: GrayImage,
    pub mhf: SignedImage,
    /// `lf + mhf`, unclamped.
    pub tmp: SignedImage,
    pub rhf: SignedImage,
    /// `clamp(tmp + rhf)`.
    pub est: GrayImage,
}

fn first_layer(lr: &GrayImage, model: &SRModel) -> Result<(GrayImage, SignedImage, SignedImage)> {
    let cfg = &model.config;
    let lf = bicubic_upscale(lr, cfg.degradation.scale)?;
    if lf.width().min(lf.height()) < cfg.patch_size {
        return Err(dim_err(format!(
            "{}x{} upscaled image is smaller than a {}-pixel patch",
            lf.width(),
            lf.height(),
            cfg.patch_size
        )));
    }
    let mhf = synthesize_hf(&lf, &model.md_features, &model.md, cfg.sparsity)?;
    let tmp = img_add(&lf, &mhf)?;
    Ok((lf, mhf, tmp))
}

pub fn super_resolve_layers(lr: &GrayImage, model: &SRModel) -> Result<SynthesisLayers> {
    let (lf, mhf, tmp) = first_layer(lr, model)?;
    let rhf = synthesize_hf(&tmp, &model.rd_features, &model.rd, model.config.sparsity)?;
    let est = clamp_to_gray(&img_add(&tmp, &rhf)?);
    Ok(SynthesisLayers {
        lf,
        mhf,
        tmp,
        rhf,
        est,
    })
}

/// Two-layer reconstruction of a low-resolution image.
pub fn super_resolve(lr: &GrayImage, model: &SRModel) -> Result<GrayImage> {
    Ok(super_resolve_layers(lr, model)?.est)
}

/// First layer only: `clamp(bicubic + main HF)`.
pub fn super_resolve_single_layer(lr: &GrayImage, model: &SRModel) -> Result<GrayImage> {
    let (_, _, tmp) = first_layer(lr, model)?;
    Ok(clamp_to_gray(&tmp))
}

/// Diagnostics recorded while training.
#[derive(Debug, Clone, Default)]
pub struct TrainingReport {
    pub total_patches: usize,
    pub md_patches_kept: usize,
    pub rd_patches_kept: usize,
    pub md_objective: Vec<f64>,
    pub rd_objective: Vec<f64>,
    pub md_high_rank: usize,
    pub rd_high_rank: usize,
    /// PSNR of the clamped bicubic image against each training original.
    pub psnr_lf: Vec<f64>,
    /// PSNR of the clamped first-layer image against each training original.
    pub psnr_tmp: Vec<f64>,
}

struct LayerTraining {
    features: FeaturePipeline,
    dict: CoupledDictionary,
    kept: usize,
    objective: Vec<f64>,
    high_rank: usize,
}

/// Learns one coupled layer from pooled (input, HF target) image pairs.
fn train_layer<P: Plane>(
    name: &str,
    inputs: &[P],
    targets: &[SignedImage],
    n_atoms: usize,
    cfg: &ModelConfig,
) -> Result<LayerTraining> {
    let bank = FilterBank::default();
    let mut raw_cols = Vec::new();
    let mut hf_cols = Vec::new();
    for (input, target) in inputs.iter().zip(targets) {
        raw_cols.push(raw_features(input, &bank, cfg.patch_size, cfg.stride)?);
        hf_cols.push(extract_patches(target, cfg.patch_size, cfg.stride)?.into_patches());
    }
    let raw = hstack(&raw_cols);
    let hf = hstack(&hf_cols);

    let kept = prune_mask(&hf, cfg.min_patch_norm);
    if kept.len() < n_atoms {
        return Err(Error::Config(format!(
            "{name} dictionary: {} usable patches after pruning (of {}), {} short of the {n_atoms} atoms",
            kept.len(),
            hf.ncols(),
            n_atoms - kept.len()
        )));
    }
    let pca = fit_pca(&raw.select_columns(&kept), cfg.pca_energy)?;
    let low = project(&raw, &pca)?;
    log::info!(
        "{name} dictionary: {} patches, {} kept, feature dim {} -> {}",
        hf.ncols(),
        kept.len(),
        pca.raw_dim(),
        pca.reduced_dim()
    );
    let trained = train_coupled(&low, &hf, &cfg.ksvd_config(n_atoms))?;
    if trained.high_rank < n_atoms {
        log::warn!("{name} dictionary: code matrix rank {} < {n_atoms}", trained.high_rank);
    }
    Ok(LayerTraining {
        features: FeaturePipeline {
            bank,
            pca,
            patch_size: cfg.patch_size,
            stride: cfg.stride,
        },
        dict: trained.dictionary,
        kept: trained.kept.len(),
        objective: trained.ksvd_objective,
        high_rank: trained.high_rank,
    })
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Trains the main and residual coupled dictionaries.
///
/// Every image must have dimensions divisible by the scale factor.
pub fn train_model(training_images: &[GrayImage], cfg: &ModelConfig) -> Result<(SRModel, TrainingReport)> {
    cfg.validate()?;
    if training_images.is_empty() {
        return Err(Error::Config("no training images".into()));
    }
    let scale = cfg.degradation.scale;
    let mut lfs = Vec::with_capacity(training_images.len());
    let mut hfs = Vec::with_capacity(training_images.len());
    for orig in training_images {
        let lf = bicubic_upscale(&degrade(orig, &cfg.degradation)?, scale)?;
        hfs.push(img_sub(orig, &lf)?);
        lfs.push(lf);
    }

    let main = train_layer("main", &lfs, &hfs, cfg.md_atoms, cfg)?;

    let mut report = TrainingReport::default();
    let mut tmps = Vec::with_capacity(training_images.len());
    let mut rhfs = Vec::with_capacity(training_images.len());
    for (orig, lf) in training_images.iter().zip(&lfs) {
        let mhf = synthesize_hf(lf, &main.features, &main.dict, cfg.sparsity)?;
        let tmp = img_add(lf, &mhf)?;
        rhfs.push(img_sub(orig, &tmp)?);
        report.psnr_lf.push(psnr(&clamp_to_gray(lf), orig)?);
        report.psnr_tmp.push(psnr(&clamp_to_gray(&tmp), orig)?);
        tmps.push(tmp);
    }

    let residual = train_layer("residual", &tmps, &rhfs, cfg.rd_atoms, cfg)?;

    report.total_patches = hfs
        .iter()
        .map(|h| {
            grid_origins(h.dims(), cfg.patch_size, cfg.stride)
                .map(|o| o.len())
                .unwrap_or(0)
        })
        .sum();
    report.md_patches_kept = main.kept;
    report.rd_patches_kept = residual.kept;
    report.md_objective = main.objective;
    report.rd_objective = residual.objective;
    report.md_high_rank = main.high_rank;
    report.rd_high_rank = residual.high_rank;

    let model = SRModel::new(*cfg, main.features, main.dict, residual.features, residual.dict)?;
    Ok((model, report))
}
