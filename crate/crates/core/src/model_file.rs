//! Binary `.ddsr` model files.
//!
//! Layout, all integers `u64` and all reals `f64`, little-endian:
//!
//! ```text
//! magic "DDSR" | version u32
//! config:   blur_kernel_size blur_sigma scale patch_size stride sparsity
//!           md_atoms rd_atoms ksvd_iterations seed min_patch_norm pca_energy
//! layer x2 (main, residual):
//!   bank:   n_kernels, then per kernel rows cols taps[rows*cols]
//!   geometry: patch_size stride
//!   pca:    energy_kept, mean (len, values), basis (rows, cols, column-major values)
//!   low:    rows cols values      (unit-norm atoms)
//!   high:   rows cols values
//! ```
//!
//! Reals are stored bit-for-bit so a load reproduces the saved model exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, ModelFormatError, Result};
use crate::features::{FeaturePipeline, FilterBank, PcaProjection};
use crate::image::{DegradationSpec, Kernel2d};
use crate::learning::CoupledDictionary;
use crate::pipeline::{ModelConfig, SRModel, MODEL_FORMAT_VERSION};
use crate::sparse::Dictionary;

pub const MAGIC: [u8; 4] = *b"DDSR";

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u64(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn values(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }

    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows());
        self.u64(m.ncols());
        self.values(m.as_slice());
    }

    fn config(&mut self, c: &ModelConfig) {
        self.u64(c.degradation.blur_kernel_size);
        self.f64(c.degradation.blur_sigma);
        self.u64(c.degradation.scale);
        self.u64(c.patch_size);
        self.u64(c.stride);
        self.u64(c.sparsity);
        self.u64(c.md_atoms);
        self.u64(c.rd_atoms);
        self.u64(c.ksvd_iterations);
        self.buf.extend_from_slice(&c.seed.to_le_bytes());
        self.f64(c.min_patch_norm);
        self.f64(c.pca_energy);
    }

    fn layer(&mut self, f: &FeaturePipeline, d: &CoupledDictionary) {
        self.u64(f.bank.len());
        for k in f.bank.kernels() {
            self.u64(k.rows());
            self.u64(k.cols());
            self.values(k.taps());
        }
        self.u64(f.patch_size);
        self.u64(f.stride);
        self.f64(f.pca.energy_kept());
        self.u64(f.pca.mean().len());
        self.values(f.pca.mean().as_slice());
        self.matrix(f.pca.basis());
        self.matrix(d.low().atoms());
        self.matrix(d.high());
    }
}

pub fn model_to_bytes(model: &SRModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(&MAGIC);
    w.buf.extend_from_slice(&model.format_version.to_le_bytes());
    w.config(&model.config);
    w.layer(&model.md_features, &model.md);
    w.layer(&model.rd_features, &model.rd);
    w.buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(ModelFormatError::Truncated {
                section: self.section,
                needed: n,
                available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn raw_u64(&mut self) -> Result<u64, ModelFormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u64(&mut self) -> Result<usize, ModelFormatError> {
        let v = self.raw_u64()?;
        usize::try_from(v).map_err(|_| self.corrupt(format!("count {v} overflows")))
    }

    fn f64(&mut self) -> Result<f64, ModelFormatError> {
        Ok(f64::from_bits(self.raw_u64()?))
    }

    fn corrupt(&self, message: impl Into<String>) -> ModelFormatError {
        ModelFormatError::Corrupt {
            section: self.section,
            message: message.into(),
        }
    }

    fn values(&mut self, n: usize) -> Result<Vec<f64>, ModelFormatError> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| self.corrupt(format!("length {n} overflows")))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>, ModelFormatError> {
        let rows = self.u64()?;
        let cols = self.u64()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| self.corrupt(format!("{rows}x{cols} overflows")))?;
        let values = self.values(n)?;
        Ok(DMatrix::from_vec(rows, cols, values))
    }

    fn config(&mut self) -> Result<ModelConfig, ModelFormatError> {
        self.section = "config";
        Ok(ModelConfig {
            degradation: DegradationSpec {
                blur_kernel_size: self.u64()?,
                blur_sigma: self.f64()?,
                scale: self.u64()?,
            },
            patch_size: self.u64()?,
            stride: self.u64()?,
            sparsity: self.u64()?,
            md_atoms: self.u64()?,
            rd_atoms: self.u64()?,
            ksvd_iterations: self.u64()?,
            seed: self.raw_u64()?,
            min_patch_norm: self.f64()?,
            pca_energy: self.f64()?,
        })
    }

    fn layer(
        &mut self,
        names: &[&'static str; 4],
    ) -> Result<(FeaturePipeline, CoupledDictionary), ModelFormatError> {
        self.section = names[0];
        let n_kernels = self.u64()?;
        let mut kernels = Vec::new();
        for _ in 0..n_kernels {
            let rows = self.u64()?;
            let cols = self.u64()?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| self.corrupt("kernel size overflows"))?;
            let taps = self.values(n)?;
            kernels.push(Kernel2d::new(rows, cols, taps).map_err(|e| self.corrupt(e.to_string()))?);
        }
        let bank = FilterBank::new(kernels).map_err(|e| self.corrupt(e.to_string()))?;
        let patch_size = self.u64()?;
        let stride = self.u64()?;

        self.section = names[1];
        let energy = self.f64()?;
        let mean_len = self.u64()?;
        let mean = DVector::from_vec(self.values(mean_len)?);
        let basis = self.matrix()?;
        let pca = PcaProjection::from_parts(mean, basis, energy).map_err(|e| self.corrupt(e.to_string()))?;

        self.section = names[2];
        let low = Dictionary::new(self.matrix()?).map_err(|e| self.corrupt(e.to_string()))?;
        self.section = names[3];
        let high = self.matrix()?;
        let dict = CoupledDictionary::new(low, high).map_err(|e| self.corrupt(e.to_string()))?;
        Ok((
            FeaturePipeline {
                bank,
                pca,
                patch_size,
                stride,
            },
            dict,
        ))
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<SRModel> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        section: "header",
    };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(ModelFormatError::BadMagic { found: magic }.into());
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(ModelFormatError::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        }
        .into());
    }
    let config = r.config()?;
    let (md_features, md) = r.layer(&["main.bank", "main.pca", "main.low", "main.high"])?;
    let (rd_features, rd) = r.layer(&[
        "residual.bank",
        "residual.pca",
        "residual.low",
        "residual.high",
    ])?;
    if r.pos != bytes.len() {
        return Err(ModelFormatError::TrailingBytes(bytes.len() - r.pos).into());
    }
    SRModel::new(config, md_features, md, rd_features, rd).map_err(|e| {
        ModelFormatError::Corrupt {
            section: "model",
            message: e.to_string(),
        }
        .into()
    })
}

pub fn save_model(model: &SRModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SRModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_bytes(&bytes)
}
