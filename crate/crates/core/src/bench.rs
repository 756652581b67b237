//! PSNR benchmark: bicubic vs first layer only vs both layers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{bicubic_upscale, clamp_to_gray, degrade, GrayImage};
use crate::metrics::psnr;
use crate::pipeline::{super_resolve_layers, SRModel};

/// Published averages over a different, unavailable image set (bicubic,
/// dual layer, dual minus single). Printed for context only.
pub const REFERENCE_AVERAGES_DB: (f64, f64, f64) = (31.69, 34.83, 0.50);

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: String,
    pub psnr_bicubic: f64,
    pub psnr_single: f64,
    pub psnr_dual: f64,
    /// `psnr_dual - psnr_single`.
    pub gain: f64,
}

impl BenchRow {
    pub fn new(name: impl Into<String>, bicubic: f64, single: f64, dual: f64) -> Self {
        Self {
            name: name.into(),
            psnr_bicubic: bicubic,
            psnr_single: single,
            psnr_dual: dual,
            gain: dual - single,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Arithmetic means of the rows; `None` for an empty report.
    pub average: Option<BenchRow>,
}

impl BenchReport {
    pub fn from_rows(rows: Vec<BenchRow>) -> Self {
        let average = (!rows.is_empty()).then(|| {
            let n = rows.len() as f64;
            let mean = |f: fn(&BenchRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            BenchRow {
                name: "average".into(),
                psnr_bicubic: mean(|r| r.psnr_bicubic),
                psnr_single: mean(|r| r.psnr_single),
                psnr_dual: mean(|r| r.psnr_dual),
                gain: mean(|r| r.gain),
            }
        });
        Self { rows, average }
    }

    /// CSV with `name,bicubic_db,single_db,dual_db,gain_db` columns, preceded
    /// by `#` comment lines describing how the numbers were measured.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let (b, d, g) = REFERENCE_AVERAGES_DB;
        let header = format!(
            "# psnr: peak 1.0 (8-bit 255 equivalent), full image, no border trimming\n\
             # reference averages on a different image set (not reproducible here): \
             bicubic {b:.2} dB, dual {d:.2} dB, gain {g:.2} dB\n"
        );
        let io_err = |source| Error::Io {
            path: "<report>".into(),
            source,
        };
        out.write_all(header.as_bytes()).map_err(io_err)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io {
            path: "<report>".into(),
            source: e.into(),
        };
        w.write_record(["name", "bicubic_db", "single_db", "dual_db", "gain_db"])
            .map_err(csv_err)?;
        for row in self.rows.iter().chain(self.average.iter()) {
            w.write_record([
                row.name.clone(),
                format!("{:.4}", row.psnr_bicubic),
                format!("{:.4}", row.psnr_single),
                format!("{:.4}", row.psnr_dual),
                format!("{:.4}", row.gain),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<16} {:>9} {:>9} {:>9} {:>7}", "image", "bicubic", "single", "dual", "gain")?;
        for r in self.rows.iter().chain(self.average.iter()) {
            writeln!(
                f,
                "{:<16} {:>9.2} {:>9.2} {:>9.2} {:>7.2}",
                r.name, r.psnr_bicubic, r.psnr_single, r.psnr_dual, r.gain
            )?;
        }
        Ok(())
    }
}

/// Scores one original: crop to the scale, degrade with the model's own
/// degradation, then reconstruct three ways.
pub fn bench_image(name: &str, original: &GrayImage, model: &SRModel) -> Result<BenchRow> {
    let spec = &model.config.degradation;
    let orig = original.crop_to_multiple(spec.scale)?;
    let lr = degrade(&orig, spec)?;
    let bicubic = clamp_to_gray(&bicubic_upscale(&lr, spec.scale)?);
    let layers = super_resolve_layers(&lr, model)?;
    let single = clamp_to_gray(&layers.tmp);
    Ok(BenchRow::new(
        name,
        psnr(&bicubic, &orig)?,
        psnr(&single, &orig)?,
        psnr(&layers.est, &orig)?,
    ))
}

pub fn run_benchmark(model: &SRModel, test_images: &[(String, GrayImage)]) -> Result<BenchReport> {
    let rows = test_images
        .iter()
        .map(|(name, img)| bench_image(name, img, model))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchReport::from_rows(rows))
}
