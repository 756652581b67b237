//! Coupled dictionary training.
//!
//! The low-frequency dictionary is learned with K-SVD under a hard
//! sparsity constraint. The high-frequency dictionary is then the
//! least-squares map from those sparse codes to the paired HF patches,
//! `P_h Q^T (Q Q^T)^-1`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, Error, Result};
use crate::sparse::{dot, omp_batch, Dictionary, SparseCode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdConfig {
    pub n_atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
    /// HF patches with a smaller Euclidean norm are dropped before training.
    pub min_patch_norm: f64,
}

impl Default for KsvdConfig {
    fn default() -> Self {
        Self {
            n_atoms: 500,
            sparsity: 3,
            iterations: 40,
            seed: 0,
            min_patch_norm: 0.03,
        }
    }
}

/// A low-frequency dictionary and its coupled high-frequency atoms.
/// Atom `k` of `low` and column `k` of `high` share one sparse code.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledDictionary {
    low: Dictionary,
    high: DMatrix<f64>,
}

impl CoupledDictionary {
    pub fn new(low: Dictionary, high: DMatrix<f64>) -> Result<Self> {
        if low.n_atoms() != high.ncols() {
            return Err(dim_err(format!(
                "low dictionary has {} atoms, high has {}",
                low.n_atoms(),
                high.ncols()
            )));
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> &Dictionary {
        &self.low
    }

    pub fn high(&self) -> &DMatrix<f64> {
        &self.high
    }

    pub fn n_atoms(&self) -> usize {
        self.low.n_atoms()
    }

    /// Same low dictionary with every high atom set to zero.
    pub fn with_zero_high(&self) -> Self {
        Self {
            low: self.low.clone(),
            high: DMatrix::zeros(self.high.nrows(), self.high.ncols()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KsvdOutput {
    pub dictionary: Dictionary,
    /// Codes from a fresh pursuit over the final dictionary.
    pub codes: Vec<SparseCode>,
    /// Sum of squared residuals after initial coding and after every sweep.
    pub objective: Vec<f64>,
}

fn residual_of(x: &[f64], code: &SparseCode, atoms: &DMatrix<f64>) -> Vec<f64> {
    let rec = code.synthesize(atoms);
    x.iter().zip(rec).map(|(a, b)| a - b).collect()
}

fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let d = m.nrows();
    &m.as_slice()[j * d..(j + 1) * d]
}

/// Leading left singular vector `u` of `e` (d x m, column-major) and the
/// optimal coefficients `e^T u`. `None` when `e` is zero.
fn rank_one(e: &DMatrix<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let (d, m) = e.shape();
    let top = |eig: &SymmetricEigen<f64, nalgebra::Dyn>| eig.eigenvalues.imax();
    let mut u: Vec<f64> = if d <= m {
        let eig = SymmetricEigen::new(e * e.transpose());
        eig.eigenvectors.column(top(&eig)).iter().copied().collect()
    } else {
        let eig = SymmetricEigen::new(e.transpose() * e);
        let v = eig.eigenvectors.column(top(&eig)).clone_owned();
        (e * v).iter().copied().collect()
    };
    let norm = dot(&u, &u).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= norm);
    let coeffs = (0..m).map(|j| dot(column(e, j), &u)).collect();
    Some((u, coeffs))
}

fn objective(residuals: &[Vec<f64>]) -> f64 {
    residuals.iter().map(|r| dot(r, r)).sum()
}

/// Initial atoms: distinct non-zero training columns in seeded random order.
fn initial_dictionary(samples: &DMatrix<f64>, cfg: &KsvdConfig) -> Result<Dictionary> {
    let mut order: Vec<usize> = (0..samples.ncols()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let picked: Vec<usize> = order
        .into_iter()
        .filter(|&j| column(samples, j).iter().any(|&v| v != 0.0))
        .take(cfg.n_atoms)
        .collect();
    if picked.len() < cfg.n_atoms {
        return Err(Error::Config(format!(
            "only {} non-zero training samples for {} atoms",
            picked.len(),
            cfg.n_atoms
        )));
    }
    Dictionary::normalized(samples.select_columns(&picked))
}

/// K-SVD: alternate sparse coding and per-atom rank-one updates.
///
/// A sample keeps its previous code when re-coding does not lower its
/// residual, which makes the objective non-increasing per sweep.
pub fn ksvd(samples: &DMatrix<f64>, cfg: &KsvdConfig) -> Result<KsvdOutput> {
    let n = samples.ncols();
    let k_atoms = cfg.n_atoms;
    if k_atoms == 0 {
        return Err(Error::Config("dictionary needs at least one atom".into()));
    }
    if n < k_atoms {
        return Err(Error::Config(format!(
            "{n} training samples for {k_atoms} atoms"
        )));
    }
    let mut dict = initial_dictionary(samples, cfg)?;
    let mut codes = omp_batch(&dict, samples, cfg.sparsity)?;
    let mut residuals: Vec<Vec<f64>> = (0..n)
        .map(|j| residual_of(column(samples, j), &codes[j], dict.atoms()))
        .collect();
    let mut history = vec![objective(&residuals)];

    for it in 0..cfg.iterations {
        if it > 0 {
            let fresh = omp_batch(&dict, samples, cfg.sparsity)?;
            for (j, new_code) in fresh.into_iter().enumerate() {
                let x = column(samples, j);
                let old_res = residual_of(x, &codes[j], dict.atoms());
                let new_res = residual_of(x, &new_code, dict.atoms());
                if dot(&new_res, &new_res) < dot(&old_res, &old_res) {
                    codes[j] = new_code;
                    residuals[j] = new_res;
                } else {
                    residuals[j] = old_res;
                }
            }
        }
        update_atoms(samples, &mut dict, &mut codes, &mut residuals);
        // recompute from scratch to keep incremental rounding out of the record
        for j in 0..n {
            residuals[j] = residual_of(column(samples, j), &codes[j], dict.atoms());
        }
        history.push(objective(&residuals));
        log::debug!("k-svd sweep {}: objective {:.6e}", it + 1, history.last().unwrap());
    }

    let codes = omp_batch(&dict, samples, cfg.sparsity)?;
    Ok(KsvdOutput {
        dictionary: dict,
        codes,
        objective: history,
    })
}

fn update_atoms(
    samples: &DMatrix<f64>,
    dict: &mut Dictionary,
    codes: &mut [SparseCode],
    residuals: &mut [Vec<f64>],
) {
    let k_atoms = dict.n_atoms();
    let d = dict.signal_dim();
    // (sample, slot within that sample's code)
    let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k_atoms];
    for (j, code) in codes.iter().enumerate() {
        for (slot, &k) in code.indices.iter().enumerate() {
            users[k].push((j, slot));
        }
    }
    let mut replaced = vec![false; samples.ncols()];

    for k in 0..k_atoms {
        let atom: Vec<f64> = dict.atom(k).to_vec();
        if users[k].is_empty() {
            // replace with the worst-represented sample not used yet this sweep
            let worst = (0..samples.ncols())
                .filter(|&j| !replaced[j])
                .map(|j| (j, dot(&residuals[j], &residuals[j])))
                .fold(None, |best: Option<(usize, f64)>, (j, e)| match best {
                    Some((_, be)) if be >= e => best,
                    _ => Some((j, e)),
                });
            if let Some((j, err)) = worst {
                let x = column(samples, j);
                let norm = dot(x, x).sqrt();
                if err > 0.0 && norm > 0.0 {
                    replaced[j] = true;
                    let mut col = dict.atoms_mut().column_mut(k);
                    for (c, v) in col.iter_mut().zip(x) {
                        *c = v / norm;
                    }
                }
            }
            continue;
        }

        let m = users[k].len();
        let mut e = DMatrix::zeros(d, m);
        for (col, &(j, slot)) in users[k].iter().enumerate() {
            let q = codes[j].coefficients[slot];
            for (i, (r, a)) in residuals[j].iter().zip(&atom).enumerate() {
                e[(i, col)] = r + q * a;
            }
        }
        let (u, coeffs) = match rank_one(&e) {
            Some(x) => x,
            None => (atom.clone(), vec![0.0; m]),
        };
        dict.atoms_mut().column_mut(k).copy_from_slice(&u);
        for (col, &(j, slot)) in users[k].iter().enumerate() {
            codes[j].coefficients[slot] = coeffs[col];
            for (i, r) in residuals[j].iter_mut().enumerate() {
                *r = e[(i, col)] - coeffs[col] * u[i];
            }
        }
    }
}

/// Least-squares HF atoms together with the numerical rank of `Q Q^T`.
#[derive(Debug, Clone)]
pub struct HighDictionaryFit {
    pub atoms: DMatrix<f64>,
    pub rank: usize,
}

impl HighDictionaryFit {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.atoms.ncols()
    }
}

/// Minimizes `sum_k |p_k - H q_k|^2` over `H` (d_h x K).
///
/// Solves the normal equations `H (Q Q^T) = P Q^T` by Cholesky. If `Q` is
/// rank-deficient the minimum-norm pseudo-inverse solution is returned and a
/// warning is logged.
pub fn fit_high_dictionary(
    high_patches: &DMatrix<f64>,
    codes: &[SparseCode],
    n_atoms: usize,
) -> Result<HighDictionaryFit> {
    if high_patches.ncols() != codes.len() {
        return Err(dim_err(format!(
            "{} patches but {} codes",
            high_patches.ncols(),
            codes.len()
        )));
    }
    if let Some(bad) = codes.iter().flat_map(|c| c.indices.iter()).find(|&&k| k >= n_atoms) {
        return Err(dim_err(format!("code references atom {bad} of {n_atoms}")));
    }
    let dh = high_patches.nrows();
    let mut qqt = DMatrix::<f64>::zeros(n_atoms, n_atoms);
    // P Q^T stored transposed (K x d_h) so the solve works on columns
    let mut pqt_t = DMatrix::<f64>::zeros(n_atoms, dh);
    for (j, code) in codes.iter().enumerate() {
        let p = column(high_patches, j);
        for (a, ca) in code.iter() {
            for (b, cb) in code.iter() {
                qqt[(a, b)] += ca * cb;
            }
            for (i, v) in p.iter().enumerate() {
                pqt_t[(a, i)] += ca * v;
            }
        }
    }

    let used = (0..n_atoms).filter(|&k| qqt[(k, k)] > 0.0).count();
    if used == n_atoms {
        if let Some(chol) = Cholesky::new(qqt.clone()) {
            let diag = chol.l_dirty().diagonal();
            let (lo, hi) = (diag.min(), diag.max());
            if lo > 0.0 && (lo / hi).powi(2) > 1e-12 {
                let h_t = chol.solve(&pqt_t);
                return Ok(HighDictionaryFit {
                    atoms: h_t.transpose(),
                    rank: n_atoms,
                });
            }
        }
    }

    let eig = SymmetricEigen::new(qqt);
    let max_ev = eig.eigenvalues.max().max(0.0);
    let tol = max_ev * 1e-12;
    let mut pinv = DMatrix::<f64>::zeros(n_atoms, n_atoms);
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol && lambda > 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(i);
            pinv += (&v * v.transpose()) / lambda;
        }
    }
    log::warn!(
        "code matrix has rank {rank} < {n_atoms} ({used} atoms used); using the minimum-norm solution"
    );
    Ok(HighDictionaryFit {
        atoms: (pinv * pqt_t).transpose(),
        rank,
    })
}

/// Indices of the columns whose Euclidean norm reaches `threshold`.
pub fn prune_mask(high_patches: &DMatrix<f64>, threshold: f64) -> Vec<usize> {
    (0..high_patches.ncols())
        .filter(|&j| {
            let p = column(high_patches, j);
            dot(p, p).sqrt() >= threshold
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CoupledTraining {
    pub dictionary: CoupledDictionary,
    /// Column indices of the input that survived pruning.
    pub kept: Vec<usize>,
    pub ksvd_objective: Vec<f64>,
    pub high_rank: usize,
    /// Codes of the kept columns over the final low dictionary.
    pub codes: Vec<SparseCode>,
}

/// Prunes flat patches from both matrices, learns the low dictionary with
/// K-SVD and fits the coupled high atoms to the final codes.
pub fn train_coupled(
    low_feats: &DMatrix<f64>,
    high_patches: &DMatrix<f64>,
    cfg: &KsvdConfig,
) -> Result<CoupledTraining> {
    if low_feats.ncols() != high_patches.ncols() {
        return Err(dim_err(format!(
            "{} feature columns but {} HF patches",
            low_feats.ncols(),
            high_patches.ncols()
        )));
    }
    let kept = prune_mask(high_patches, cfg.min_patch_norm);
    if kept.len() < cfg.n_atoms {
        return Err(Error::Config(format!(
            "{} usable patches after pruning (of {}), need at least {} for the dictionary",
            kept.len(),
            high_patches.ncols(),
            cfg.n_atoms
        )));
    }
    let low = low_feats.select_columns(&kept);
    let high = high_patches.select_columns(&kept);
    let out = ksvd(&low, cfg)?;
    let fit = fit_high_dictionary(&high, &out.codes, cfg.n_atoms)?;
    Ok(CoupledTraining {
        dictionary: CoupledDictionary::new(out.dictionary, fit.atoms)?,
        kept,
        ksvd_objective: out.objective,
        high_rank: fit.rank,
        codes: out.codes,
    })
}
