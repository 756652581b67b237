//! Blur + decimate a photograph, upscale it back with bicubic interpolation,
//! and report how much was lost.
//!
//! ```text
//! cargo run --release --example degradation [-- <image> [out_dir]]
//! ```

use std::path::PathBuf;

use ddsr::image::{bicubic_upscale, clamp_to_gray, degrade, gaussian_blur, img_sub};
use ddsr::metrics::psnr;
use ddsr::{io, DegradationSpec, Plane};

fn main() -> ddsr::Result<()> {
    let mut args = std::env::args().skip(1);
    let input = args.next().map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata/test/chelsea.png"),
        PathBuf::from,
    );
    let spec = DegradationSpec::default();
    let hr = io::load_image(&input)?.crop_to_multiple(spec.scale)?;

    let kernel = spec.blur_kernel()?;
    println!("{}x{} Gaussian, sigma {}:", kernel.rows(), kernel.cols(), spec.blur_sigma);
    for row in kernel.taps().chunks(kernel.cols()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.5}")).collect();
        println!("  {}", cells.join(" "));
    }

    let blurred = gaussian_blur(&hr, &spec)?;
    let lr = degrade(&hr, &spec)?;
    let lf = clamp_to_gray(&bicubic_upscale(&lr, spec.scale)?);
    println!("\n{}x{} -> {}x{} -> {}x{}", hr.width(), hr.height(), lr.width(), lr.height(), lf.width(), lf.height());
    println!("blur alone:       {:.2} dB", psnr(&blurred, &hr)?);
    println!("degrade+bicubic:  {:.2} dB", psnr(&lf, &hr)?);

    // the detail a super-resolver has to recover
    let hf = img_sub(&hr, &lf)?;
    let energy = hf.data().iter().map(|v| v * v).sum::<f64>() / hf.data().len() as f64;
    println!("missing detail:   rms {:.4}", energy.sqrt());

    if let Some(dir) = args.next().map(PathBuf::from) {
        std::fs::create_dir_all(&dir).map_err(|source| ddsr::Error::Io { path: dir.clone(), source })?;
        io::save_image(&lr, dir.join("lr.png"))?;
        io::save_image(&lf, dir.join("bicubic.png"))?;
        io::save_signed_visual(&hf, dir.join("detail.png"))?;
        println!("wrote lr.png, bicubic.png, detail.png to {}", dir.display());
    }
    Ok(())
}
