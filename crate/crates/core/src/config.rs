//! Flat `key = value` configuration files for [`ModelConfig`].
//!
//! ```text
//! # defaults shown
//! blur_kernel_size = 5
//! blur_sigma = 1.0
//! scale = 2
//! patch_size = 9
//! stride = 2
//! sparsity = 3
//! md_atoms = 500
//! rd_atoms = 500
//! ksvd_iterations = 40
//! seed = 0
//! min_patch_norm = 0.03
//! pca_energy = 0.999
//! ```
//!
//! Keys may appear in any order; missing keys keep their defaults.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pipeline::ModelConfig;

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value {value:?} for {key}")))
}

pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {n}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "blur_kernel_size" => cfg.degradation.blur_kernel_size = parse(key, value, n)?,
            "blur_sigma" => cfg.degradation.blur_sigma = parse(key, value, n)?,
            "scale" => cfg.degradation.scale = parse(key, value, n)?,
            "patch_size" => cfg.patch_size = parse(key, value, n)?,
            "stride" => cfg.stride = parse(key, value, n)?,
            "sparsity" => cfg.sparsity = parse(key, value, n)?,
            "md_atoms" => cfg.md_atoms = parse(key, value, n)?,
            "rd_atoms" => cfg.rd_atoms = parse(key, value, n)?,
            "ksvd_iterations" => cfg.ksvd_iterations = parse(key, value, n)?,
            "seed" => cfg.seed = parse(key, value, n)?,
            "min_patch_norm" => cfg.min_patch_norm = parse(key, value, n)?,
            "pca_energy" => cfg.pca_energy = parse(key, value, n)?,
            other => return Err(Error::Config(format!("line {n}: unknown key {other:?}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn format_config(cfg: &ModelConfig) -> String {
    format!(
        "blur_kernel_size = {}\nblur_sigma = {}\nscale = {}\npatch_size = {}\nstride = {}\n\
         sparsity = {}\nmd_atoms = {}\nrd_atoms = {}\nksvd_iterations = {}\nseed = {}\n\
         min_patch_norm = {}\npca_energy = {}\n",
        cfg.degradation.blur_kernel_size,
        cfg.degradation.blur_sigma,
        cfg.degradation.scale,
        cfg.patch_size,
        cfg.stride,
        cfg.sparsity,
        cfg.md_atoms,
        cfg.rd_atoms,
        cfg.ksvd_iterations,
        cfg.seed,
        cfg.min_patch_norm,
        cfg.pca_energy,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), ModelConfig::default());
    }

    #[test]
    fn formatted_config_parses_back() {
        let mut cfg = ModelConfig::default();
        cfg.stride = 1;
        cfg.min_patch_norm = 0.125;
        cfg.seed = 42;
        assert_eq!(parse_config(&format_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn comments_and_errors() {
        let cfg = parse_config("# header\nmd_atoms = 64  # small\n\nrd_atoms=32\n").unwrap();
        assert_eq!((cfg.md_atoms, cfg.rd_atoms), (64, 32));
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("stride").is_err());
        assert!(parse_config("stride = x").is_err());
        assert!(parse_config("stride = 10").is_err());
    }
}
