use ddsr::sparse::{omp, omp_batch, omp_with_trace};
use ddsr::Dictionary;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dict(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Dictionary {
    Dictionary::normalized(DMatrix::from_fn(d, k, |_, _| rng.random::<f64>() - 0.5)).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(dict: &Dictionary, x: &[f64], code: &ddsr::SparseCode) -> Vec<f64> {
    let rec = code.synthesize(dict.atoms());
    x.iter().zip(rec).map(|(a, b)| a - b).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn omp_contracts(d in 4usize..30, k in 1usize..60, l in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dict = random_dict(&mut rng, d, k);
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let l = l.min(k);
        let (code, trace) = omp_with_trace(&dict, &x, l).unwrap();

        prop_assert!(code.len() <= l);
        let mut seen = code.indices.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), code.len());

        let r = residual(&dict, &x, &code);
        let scale = norm(&x);
        for &j in &code.indices {
            let ip: f64 = dict.atom(j).iter().zip(&r).map(|(a, b)| a * b).sum();
            prop_assert!(ip.abs() <= 1e-8 * scale, "<d_{}, r> = {}", j, ip);
        }

        prop_assert_eq!(trace.len(), code.len());
        let mut prev = scale;
        for &t in &trace {
            prop_assert!(t <= prev * (1.0 + 1e-12));
            prev = t;
        }
        prop_assert!((prev - norm(&r)).abs() <= 1e-10 * scale);

        prop_assert_eq!(omp(&dict, &x, l).unwrap(), code);
    }

    #[test]
    fn ties_pick_the_lowest_index(d in 3usize..12, dup in 2usize..5, l in 1usize..3) {
        // identical atoms give exactly equal correlations
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let base = random_dict(&mut rng, d, 1);
        let atoms = DMatrix::from_fn(d, dup, |i, _| base.atoms()[(i, 0)]);
        let dict = Dictionary::new(atoms).unwrap();
        let x: Vec<f64> = (0..d).map(|i| base.atoms()[(i, 0)] * 2.0 + 1e-3 * i as f64).collect();
        let code = omp(&dict, &x, l).unwrap();
        prop_assert_eq!(code.indices[0], 0);
        prop_assert_eq!(code.len(), 1);
    }
}

#[test]
fn exact_sparse_signal_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dict = random_dict(&mut rng, 40, 80);
    let mut x = vec![0.0; 40];
    for (k, c) in [(5, 1.0), (17, -0.7), (63, 0.4)] {
        for (xi, a) in x.iter_mut().zip(dict.atom(k)) {
            *xi += c * a;
        }
    }
    let code = omp(&dict, &x, 3).unwrap();
    let mut idx = code.indices.clone();
    idx.sort_unstable();
    assert_eq!(idx, vec![5, 17, 63]);
    assert!(norm(&residual(&dict, &x, &code)) <= 1e-10);
}

#[test]
fn zero_signal_gives_empty_code() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dict = random_dict(&mut rng, 10, 20);
    assert!(omp(&dict, &[0.0; 10], 3).unwrap().is_empty());
}

#[test]
fn dimension_mismatch_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dict = random_dict(&mut rng, 10, 20);
    assert!(omp(&dict, &[1.0; 9], 3).is_err());
    assert!(omp_batch(&dict, &DMatrix::zeros(9, 4), 3).is_err());
}

#[test]
fn batch_is_bit_identical_to_single() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dict = random_dict(&mut rng, 324, 500);
    let signals = DMatrix::from_fn(324, 100, |_, _| rng.random::<f64>() - 0.5);
    let batch = omp_batch(&dict, &signals, 3).unwrap();
    for (j, code) in batch.iter().enumerate() {
        let single = omp(&dict, signals.column(j).as_slice(), 3).unwrap();
        assert_eq!(code.indices, single.indices);
        let a: Vec<u64> = code.coefficients.iter().map(|c| c.to_bits()).collect();
        let b: Vec<u64> = single.coefficients.iter().map(|c| c.to_bits()).collect();
        assert_eq!(a, b, "column {j}");
    }
}

#[test]
fn batch_follows_column_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dict = random_dict(&mut rng, 30, 60);
    let signals = DMatrix::from_fn(30, 40, |_, _| rng.random::<f64>() - 0.5);
    let perm: Vec<usize> = (0..40).rev().collect();
    let shuffled = signals.select_columns(&perm);
    let a = omp_batch(&dict, &signals, 4).unwrap();
    let b = omp_batch(&dict, &shuffled, 4).unwrap();
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(b[i], a[p]);
    }
}
