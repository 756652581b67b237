use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddsr::{bench, config, io, model_file, pipeline, GrayImage, ModelConfig};

#[derive(Parser)]
#[command(name = "ddsr", version, about = "Dual-dictionary sparse-representation super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from every image in a directory.
    Train {
        /// key = value configuration file; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Super-resolve one low-resolution image.
    Upscale {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// stop after the main dictionary
        #[arg(long)]
        single_layer: bool,
        /// also write lf/mhf/tmp/rhf/est layers to this directory
        #[arg(long)]
        dump_layers: Option<PathBuf>,
    },
    /// Degrade each original, reconstruct it, and report PSNR.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

fn load_dir(dir: &Path) -> ddsr::Result<Vec<(String, GrayImage)>> {
    io::list_images(dir)?
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            Ok((name, io::load_image(&p)?))
        })
        .collect()
}

fn run(cmd: Command) -> ddsr::Result<()> {
    match cmd {
        Command::Train { config, images, out } => {
            let cfg = match config {
                Some(path) => config::load_config(path)?,
                None => ModelConfig::default(),
            };
            let imgs = load_dir(&images)?
                .into_iter()
                .map(|(_, img)| img.crop_to_multiple(cfg.degradation.scale))
                .collect::<ddsr::Result<Vec<_>>>()?;
            if imgs.is_empty() {
                return Err(ddsr::Error::Config(format!("no images in {}", images.display())));
            }
            let (model, report) = pipeline::train_model(&imgs, &cfg)?;
            model_file::save_model(&model, &out)?;
            println!(
                "trained on {} images: {} patches, {} kept (main), {} kept (residual)",
                imgs.len(),
                report.total_patches,
                report.md_patches_kept,
                report.rd_patches_kept
            );
            for (lf, tmp) in report.psnr_lf.iter().zip(&report.psnr_tmp) {
                println!("  training psnr: bicubic {lf:.2} dB, first layer {tmp:.2} dB");
            }
        }
        Command::Upscale {
            model,
            input,
            out,
            single_layer,
            dump_layers,
        } => {
            let model = model_file::load_model(model)?;
            let lr = io::load_image(input)?;
            let layers = pipeline::super_resolve_layers(&lr, &model)?;
            if let Some(dir) = dump_layers {
                std::fs::create_dir_all(&dir).map_err(|source| ddsr::Error::Io {
                    path: dir.clone(),
                    source,
                })?;
                io::save_image(&layers.lf, dir.join("lf.png"))?;
                io::save_signed_visual(&layers.mhf, dir.join("mhf.png"))?;
                io::save_image(&layers.tmp, dir.join("tmp.png"))?;
                io::save_signed_visual(&layers.rhf, dir.join("rhf.png"))?;
                io::save_image(&layers.est, dir.join("est.png"))?;
            }
            if single_layer {
                io::save_image(&ddsr::image::clamp_to_gray(&layers.tmp), out)?;
            } else {
                io::save_image(&layers.est, out)?;
            }
        }
        Command::Eval { model, images, report } => {
            let model = model_file::load_model(model)?;
            let imgs = load_dir(&images)?;
            let rep = bench::run_benchmark(&model, &imgs)?;
            rep.save_csv(&report)?;
            print!("{rep}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
