//! K-SVD on synthetic data drawn from a known dictionary: the objective
//! falls every sweep and most planted atoms are found again. Then the
//! coupled high-resolution atoms are fitted by least squares.

use ddsr::learning::{fit_high_dictionary, ksvd};
use ddsr::{Dictionary, KsvdConfig};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ddsr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (dim, atoms, n, s) = (20, 40, 2000, 3);
    let truth = Dictionary::normalized(DMatrix::from_fn(dim, atoms, |_, _| rng.random::<f64>() - 0.5))?;
    // a second "view" of each atom, standing in for the HR patch
    let high_truth = DMatrix::from_fn(25, atoms, |_, _| rng.random::<f64>() - 0.5);

    let mut low = DMatrix::zeros(dim, n);
    let mut high = DMatrix::zeros(25, n);
    for j in 0..n {
        for k in sample(&mut rng, atoms, s) {
            let c = rng.random::<f64>() * 2.0 - 1.0;
            low.column_mut(j).axpy(c, &truth.atoms().column(k), 1.0);
            high.column_mut(j).axpy(c, &high_truth.column(k), 1.0);
        }
    }
    low.iter_mut().for_each(|v| *v += 0.01 * (rng.random::<f64>() - 0.5));

    let cfg = KsvdConfig {
        n_atoms: atoms,
        sparsity: s,
        iterations: 30,
        seed: 0,
        min_patch_norm: 0.0,
    };
    let out = ksvd(&low, &cfg)?;
    for (i, e) in out.objective.iter().enumerate().step_by(5) {
        println!("sweep {i:>2}: objective {e:.4}");
    }

    let sims = (out.dictionary.atoms().transpose() * truth.atoms()).map(f64::abs);
    let found = (0..atoms).filter(|&k| sims.column(k).max() >= 0.95).count();
    println!("{found}/{atoms} planted atoms found with |cos| >= 0.95");

    let fit = fit_high_dictionary(&high, &out.codes, atoms)?;
    let pred: f64 = out
        .codes
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let p = c.synthesize(&fit.atoms);
            p.iter().zip(high.column(j).iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum();
    println!(
        "high atoms: rank {}/{atoms}, relative fit error {:.4}",
        fit.rank,
        (pred / high.norm_squared()).sqrt()
    );
    Ok(())
}
