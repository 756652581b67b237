//! Two-layer example-based image super-resolution with coupled sparse
//! dictionaries.
//!
//! A low-resolution image is first bicubic-upscaled. A main coupled
//! dictionary, learned with K-SVD, predicts the missing high-frequency
//! detail patch by patch. A second, residual dictionary is trained on what
//! the first layer misses and is applied to the first-layer output.
//!
//! ```no_run
//! use ddsr::{io, pipeline, ModelConfig};
//!
//! let train = io::load_image("train.png")?.crop_to_multiple(2)?;
//! let (model, _report) = pipeline::train_model(&[train], &ModelConfig::default())?;
//! let lr = io::load_image("small.png")?;
//! let hr = pipeline::super_resolve(&lr, &model)?;
//! io::save_image(&hr, "big.png")?;
//! # Ok::<(), ddsr::Error>(())
//! ```
//!
//! Runnable walkthroughs of each stage live in `examples/`:
//!
//! ```text
//! cargo run --release --example degradation
//! cargo run --release --example patches
//! cargo run --release --example sparse_coding
//! cargo run --release --example dictionary_learning
//! cargo run --release --example super_resolve
//! cargo run --release --example benchmark
//! ```

pub mod bench;
pub mod config;
pub mod error;
pub mod features;
pub mod image;
pub mod io;
pub mod learning;
pub mod metrics;
pub mod model_file;
pub mod patching;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, ModelFormatError, Result};
pub use image::{DegradationSpec, GrayImage, Plane, SignedImage};
pub use learning::{CoupledDictionary, KsvdConfig};
pub use pipeline::{ModelConfig, SRModel};
pub use sparse::{Dictionary, SparseCode};
