#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use ddsr::{io, pipeline, GrayImage, ModelConfig, SRModel};

pub fn testdata() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata")
}

/// 96x96 textured crop of the training photograph.
pub fn camera_crop() -> GrayImage {
    io::load_image(testdata().join("train/camera.png"))
        .unwrap()
        .crop(200, 180, 96, 96)
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        stride: 4,
        md_atoms: 24,
        rd_atoms: 24,
        ksvd_iterations: 4,
        ..ModelConfig::default()
    }
}

/// Small model trained once per test binary.
pub fn tiny_model() -> &'static SRModel {
    static MODEL: OnceLock<SRModel> = OnceLock::new();
    MODEL.get_or_init(|| pipeline::train_model(&[camera_crop()], &tiny_config()).unwrap().0)
}
