//! Orthogonal matching pursuit on a random dictionary: recover a planted
//! 3-sparse signal, watch the residual shrink, and time batch coding.

use std::time::Instant;

use ddsr::sparse::{omp, omp_batch, omp_with_trace};
use ddsr::Dictionary;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ddsr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dict = Dictionary::normalized(DMatrix::from_fn(64, 256, |_, _| rng.random::<f64>() - 0.5))?;

    let planted = [(12, 1.5), (97, -0.8), (200, 0.3)];
    let mut x = vec![0.0; 64];
    for (k, c) in planted {
        for (xi, a) in x.iter_mut().zip(dict.atom(k)) {
            *xi += c * a;
        }
    }
    let noise = 0.01;
    x.iter_mut().for_each(|v| *v += noise * (rng.random::<f64>() - 0.5));

    let (code, trace) = omp_with_trace(&dict, &x, 3)?;
    println!("planted  {planted:?}");
    let found: Vec<(usize, f64)> = code.iter().map(|(k, c)| (k, (c * 1000.0).round() / 1000.0)).collect();
    println!("found    {found:?}");
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("residual |x| = {norm:.4} -> {}", trace.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join(" -> "));

    // a larger sparsity keeps fitting the noise
    let (_, trace) = omp_with_trace(&dict, &x, 8)?;
    println!("L = 8:   final residual {:.5}", trace.last().unwrap());

    let signals = DMatrix::from_fn(64, 20_000, |_, _| rng.random::<f64>() - 0.5);
    let t = Instant::now();
    let codes = omp_batch(&dict, &signals, 3)?;
    println!("\ncoded {} signals in {:.2}s", codes.len(), t.elapsed().as_secs_f64());
    let same = codes
        .iter()
        .enumerate()
        .step_by(997)
        .all(|(j, c)| omp(&dict, signals.column(j).as_slice(), 3).map_or(false, |s| &s == c));
    println!("batch matches one-at-a-time pursuit: {same}");
    Ok(())
}
