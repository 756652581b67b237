//! Train a small model on a crop of the training photograph, then
//! super-resolve a held-out image and write every intermediate layer.
//!
//! ```text
//! cargo run --release --example super_resolve [-- <out_dir>]
//! ```

use std::path::PathBuf;

use ddsr::image::{bicubic_upscale, clamp_to_gray, degrade};
use ddsr::metrics::psnr;
use ddsr::pipeline::{super_resolve_layers, train_model};
use ddsr::{io, model_file, ModelConfig, Plane};

fn main() -> ddsr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata");
    let out_dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("ddsr-layers"), PathBuf::from);

    // small enough to train in seconds
    let cfg = ModelConfig {
        md_atoms: 128,
        rd_atoms: 128,
        ksvd_iterations: 10,
        ..ModelConfig::default()
    };
    let train = io::load_image(root.join("train/camera.png"))?.crop(128, 128, 256, 256);
    let (model, report) = train_model(&[train], &cfg)?;
    println!(
        "trained: {} patches, {} / {} kept, feature dims {} / {}",
        report.total_patches,
        report.md_patches_kept,
        report.rd_patches_kept,
        model.md_features.reduced_dim(),
        model.rd_features.reduced_dim()
    );

    let hr = io::load_image(root.join("test/coins.png"))?.crop_to_multiple(2)?;
    let lr = degrade(&hr, &cfg.degradation)?;
    let layers = super_resolve_layers(&lr, &model)?;
    let bicubic = clamp_to_gray(&bicubic_upscale(&lr, 2)?);
    println!("{}x{} -> {}x{}", lr.width(), lr.height(), layers.est.width(), layers.est.height());
    println!("bicubic      {:.2} dB", psnr(&bicubic, &hr)?);
    println!("first layer  {:.2} dB", psnr(&clamp_to_gray(&layers.tmp), &hr)?);
    println!("both layers  {:.2} dB", psnr(&layers.est, &hr)?);

    std::fs::create_dir_all(&out_dir).map_err(|source| ddsr::Error::Io { path: out_dir.clone(), source })?;
    io::save_image(&lr, out_dir.join("input.png"))?;
    io::save_image(&layers.lf, out_dir.join("lf.png"))?;
    io::save_signed_visual(&layers.mhf, out_dir.join("mhf.png"))?;
    io::save_signed_visual(&layers.rhf, out_dir.join("rhf.png"))?;
    io::save_image(&layers.est, out_dir.join("est.png"))?;
    model_file::save_model(&model, out_dir.join("model.ddsr"))?;
    println!("layers and model written to {}", out_dir.display());
    Ok(())
}
