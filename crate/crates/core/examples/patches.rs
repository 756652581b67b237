//! Patch grids: where the origins land, how often each pixel is covered,
//! and that averaging overlapping patches puts an image back together.

use ddsr::patching::{assemble_patches, axis_origins, extract_patches, grid_origins};
use ddsr::{GrayImage, Plane};

fn coverage(h: usize, w: usize, p: usize, stride: usize) -> ddsr::Result<Vec<u32>> {
    let mut cover = vec![0u32; h * w];
    for (r, c) in grid_origins((h, w), p, stride)? {
        for i in 0..p {
            for j in 0..p {
                cover[(r + i) * w + c + j] += 1;
            }
        }
    }
    Ok(cover)
}

fn main() -> ddsr::Result<()> {
    let (h, w, p) = (20, 23, 9);
    for stride in [8, 4, 2, 1] {
        let cover = coverage(h, w, p, stride)?;
        println!(
            "stride {stride}: rows {:?}, cols {:?}, coverage {}..={}",
            axis_origins(h, p, stride),
            axis_origins(w, p, stride),
            cover.iter().min().unwrap(),
            cover.iter().max().unwrap()
        );
    }

    // the last origin is pinned to the border, so coverage doubles up there
    println!("\ncoverage counts, {w}x{h} image, 9x9 patches, stride 8:");
    for row in coverage(h, w, p, 8)?.chunks(w) {
        println!("  {}", row.iter().map(|n| n.to_string()).collect::<String>());
    }

    let img = GrayImage::from_fn(w, h, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0)?;
    let grid = extract_patches(&img, p, 2)?;
    println!("\n{} patches as a {}x{} matrix", grid.len(), grid.patches().nrows(), grid.patches().ncols());
    let back = assemble_patches(&grid)?;
    println!("extract -> assemble reproduces the image exactly: {}", back.data() == img.data());
    Ok(())
}
