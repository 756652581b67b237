//! Train on `testdata/train`, then score bicubic, single-layer and
//! dual-layer reconstructions on every image in `testdata/test`.
//!
//! ```text
//! cargo run --release --example benchmark [-- <train_dir> <test_dir> [report.csv]]
//! ```
//!
//! Set `DDSR_CONFIG=<file>` to override the default configuration.

use std::path::PathBuf;
use std::time::Instant;

use ddsr::{bench, io, pipeline, ModelConfig};

fn main() -> ddsr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata");
    let mut args = std::env::args().skip(1);
    let train_dir = args.next().map_or_else(|| root.join("train"), PathBuf::from);
    let test_dir = args.next().map_or_else(|| root.join("test"), PathBuf::from);
    let report_path = args.next();

    let cfg = match std::env::var_os("DDSR_CONFIG") {
        Some(path) => ddsr::config::load_config(path)?,
        None => ModelConfig::default(),
    };
    let train = io::list_images(&train_dir)?
        .iter()
        .map(|p| io::load_image(p)?.crop_to_multiple(cfg.degradation.scale))
        .collect::<ddsr::Result<Vec<_>>>()?;

    let t = Instant::now();
    let (model, report) = pipeline::train_model(&train, &cfg)?;
    println!("training took {:.1}s", t.elapsed().as_secs_f64());
    println!(
        "main K-SVD objective {:.4} -> {:.4}, residual {:.4} -> {:.4}",
        report.md_objective[0],
        report.md_objective.last().unwrap(),
        report.rd_objective[0],
        report.rd_objective.last().unwrap()
    );
    for (lf, tmp) in report.psnr_lf.iter().zip(&report.psnr_tmp) {
        println!("training image: bicubic {lf:.2} dB, first layer {tmp:.2} dB");
    }

    let tests = io::list_images(&test_dir)?
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            Ok((name, io::load_image(p)?))
        })
        .collect::<ddsr::Result<Vec<_>>>()?;
    let t = Instant::now();
    let rep = bench::run_benchmark(&model, &tests)?;
    println!("synthesis took {:.1}s\n", t.elapsed().as_secs_f64());
    print!("{rep}");
    if let Some(path) = report_path {
        rep.save_csv(path)?;
    }
    Ok(())
}
