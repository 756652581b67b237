mod common;

use ddsr::image::{bicubic_upscale, clamp_to_gray, degrade, img_add};
use ddsr::pipeline::{
    super_resolve, super_resolve_layers, super_resolve_single_layer, synthesize_hf, train_model,
};
use ddsr::{CoupledDictionary, Dictionary, Error, GrayImage, Plane};
use nalgebra::DMatrix;

use common::{camera_crop, tiny_config, tiny_model};

fn low_res() -> GrayImage {
    degrade(&camera_crop(), &tiny_model().config.degradation).unwrap()
}

fn bits<P: Plane>(img: &P) -> Vec<u64> {
    img.data().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn zero_high_model_is_clamped_bicubic() {
    let model = tiny_model().with_zero_high();
    let lr = low_res();
    let expected = clamp_to_gray(&bicubic_upscale(&lr, 2).unwrap());
    assert_eq!(bits(&super_resolve(&lr, &model).unwrap()), bits(&expected));
    assert_eq!(bits(&super_resolve_single_layer(&lr, &model).unwrap()), bits(&expected));
}

#[test]
fn constant_input_stays_constant() {
    let lr = GrayImage::filled(24, 20, 0.4).unwrap();
    let out = super_resolve(&lr, tiny_model()).unwrap();
    assert_eq!(out.dims(), (40, 48));
    assert!(out.data().iter().all(|&v| (v - 0.4).abs() < 1e-12));
}

#[test]
fn layers_are_consistent() {
    let model = tiny_model();
    let lr = low_res();
    let layers = super_resolve_layers(&lr, model).unwrap();
    assert_eq!(layers.lf.dims(), (96, 96));
    assert_eq!(bits(&layers.tmp), bits(&img_add(&layers.lf, &layers.mhf).unwrap()));
    assert_eq!(
        bits(&layers.est),
        bits(&clamp_to_gray(&img_add(&layers.tmp, &layers.rhf).unwrap()))
    );
    assert_eq!(
        bits(&super_resolve_single_layer(&lr, model).unwrap()),
        bits(&clamp_to_gray(&layers.tmp))
    );
    assert!(layers.est.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn trained_model_invariants() {
    let model = tiny_model();
    model.validate().unwrap();
    let cfg = tiny_config();
    assert_eq!(model.config, cfg);
    assert_eq!(model.md.n_atoms(), cfg.md_atoms);
    assert_eq!(model.rd.n_atoms(), cfg.rd_atoms);
    for d in [&model.md, &model.rd] {
        assert_eq!(d.high().nrows(), 81);
        for k in 0..d.n_atoms() {
            let n: f64 = d.low().atom(k).iter().map(|v| v * v).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-10);
        }
    }
    assert_eq!(model.md_features.bank.raw_dim(9), 324);
    assert!(model.md_features.reduced_dim() <= 324);
}

#[test]
fn training_improves_the_training_image() {
    let (_, report) = train_model(&[camera_crop()], &tiny_config()).unwrap();
    assert_eq!(report.psnr_lf.len(), 1);
    assert!(report.psnr_tmp[0] >= report.psnr_lf[0]);
    assert!(report.md_patches_kept <= report.total_patches);
    for w in report.md_objective.windows(2).chain(report.rd_objective.windows(2)) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
}

#[test]
fn flat_training_image_is_rejected() {
    let flat = GrayImage::filled(64, 64, 0.5).unwrap();
    match train_model(&[flat], &tiny_config()) {
        Err(Error::Config(msg)) => assert!(msg.contains("short of"), "{msg}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn odd_sized_training_image_is_rejected() {
    let img = camera_crop().crop(0, 0, 95, 96);
    assert!(train_model(&[img], &tiny_config()).is_err());
}

#[test]
fn too_small_input_is_rejected() {
    let lr = GrayImage::filled(4, 4, 0.5).unwrap();
    assert!(super_resolve(&lr, tiny_model()).is_err());
}

#[test]
fn single_atom_synthesis_matches_oracle() {
    let model = tiny_model();
    let feats = &model.md_features;
    let lf = bicubic_upscale(&low_res(), 2).unwrap();

    let atom = DMatrix::from_column_slice(feats.reduced_dim(), 1, model.md.low().atom(0));
    let high = DMatrix::from_fn(81, 1, |i, _| (i % 9) as f64 * 0.01 - 0.04);
    let dict = CoupledDictionary::new(Dictionary::new(atom).unwrap(), high.clone()).unwrap();
    let got = synthesize_hf(&lf, feats, &dict, 1).unwrap();

    // each patch is <atom, feature> * high; pixels average their covering patches
    let f = feats.features(&lf).unwrap();
    let origins = ddsr::patching::grid_origins(lf.dims(), 9, feats.stride).unwrap();
    let (h, w) = lf.dims();
    let mut num = vec![0.0; h * w];
    let mut den = vec![0.0; h * w];
    for (k, &(r0, c0)) in origins.iter().enumerate() {
        let coef: f64 = f.column(k).iter().zip(model.md.low().atom(0)).map(|(a, b)| a * b).sum();
        for i in 0..81 {
            let px = (r0 + i / 9) * w + c0 + i % 9;
            num[px] += coef * high[i];
            den[px] += 1.0;
        }
    }
    for (g, (n, d)) in got.data().iter().zip(num.iter().zip(&den)) {
        assert!((g - n / d).abs() < 1e-12);
    }
}

#[test]
fn synthesis_ignores_thread_count() {
    let lr = low_res();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| super_resolve(&lr, tiny_model()).unwrap())
    };
    assert_eq!(bits(&run(1)), bits(&run(4)));
}

#[test]
fn training_ignores_thread_count() {
    let img = camera_crop();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train_model(&[img.clone()], &tiny_config()).unwrap().0)
    };
    assert_eq!(run(1), run(3));
}
