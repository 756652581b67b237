//! Orthogonal matching pursuit with a hard sparsity target.
//!
//! The solver follows the Gram-matrix formulation: correlations with the
//! residual are updated as `alpha = D^T x - G_I gamma`, and the least-squares
//! system on the selected atoms is factored by an incrementally grown
//! Cholesky factor whose pivots double as the rank check.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};

/// Relative pivot below which a newly selected atom is considered linearly
/// dependent on the current support.
const RANK_TOL: f64 = 1e-12;
/// Relative residual norm at which pursuit stops early.
const RESIDUAL_TOL: f64 = 1e-12;

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results do not depend on call site.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Unit-norm atoms, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

impl Dictionary {
    /// Fails if any atom's norm differs from one by more than `1e-10`.
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(dim_err("dictionary must have at least one atom"));
        }
        for (k, col) in atoms.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > 1e-10 {
                return Err(Error::Config(format!("atom {k} has norm {n}, expected 1")));
            }
        }
        Ok(Self { atoms })
    }

    /// Scales every column to unit norm. Zero columns are rejected.
    pub fn normalized(mut atoms: DMatrix<f64>) -> Result<Self> {
        for (k, mut col) in atoms.column_iter_mut().enumerate() {
            let n = col.norm();
            if n == 0.0 {
                return Err(Error::Config(format!("atom {k} is zero")));
            }
            col /= n;
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn signal_dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        let d = self.atoms.nrows();
        &self.atoms.as_slice()[k * d..(k + 1) * d]
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.atoms
    }

    /// `D^T D`, entry `(i, k) = dot(atom_i, atom_k)`.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.n_atoms();
        let mut g = DMatrix::zeros(k, k);
        for j in 0..k {
            for i in 0..=j {
                let v = dot(self.atom(i), self.atom(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// Support and coefficients of an L-sparse representation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub max_nonzeros: usize,
}

impl SparseCode {
    pub fn empty(max_nonzeros: usize) -> Self {
        Self {
            indices: Vec::new(),
            coefficients: Vec::new(),
            max_nonzeros,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.coefficients.iter().copied())
    }

    /// `atoms * q` for any atom matrix with matching column count.
    pub fn synthesize(&self, atoms: &DMatrix<f64>) -> Vec<f64> {
        let d = atoms.nrows();
        let mut out = vec![0.0; d];
        for (k, c) in self.iter() {
            let atom = &atoms.as_slice()[k * d..(k + 1) * d];
            for (o, a) in out.iter_mut().zip(atom) {
                *o += c * a;
            }
        }
        out
    }

    pub fn to_dense(&self, n_atoms: usize) -> Vec<f64> {
        let mut q = vec![0.0; n_atoms];
        for (k, c) in self.iter() {
            q[k] = c;
        }
        q
    }
}

enum GramSource<'a> {
    Precomputed(&'a DMatrix<f64>),
    OnTheFly,
}

impl GramSource<'_> {
    fn column(&self, dict: &Dictionary, k: usize, out: &mut Vec<f64>) {
        out.clear();
        match self {
            GramSource::Precomputed(g) => {
                let n = g.nrows();
                out.extend_from_slice(&g.as_slice()[k * n..(k + 1) * n]);
            }
            GramSource::OnTheFly => {
                let ak = dict.atom(k);
                out.extend((0..dict.n_atoms()).map(|i| dot(dict.atom(i), ak)));
            }
        }
    }
}

fn check_args(dict: &Dictionary, signal_dim: usize, l: usize) -> Result<()> {
    if signal_dim != dict.signal_dim() {
        return Err(dim_err(format!(
            "signal has dimension {signal_dim}, dictionary atoms have {}",
            dict.signal_dim()
        )));
    }
    if l == 0 || l > dict.n_atoms() {
        return Err(Error::Config(format!(
            "sparsity {l} must lie in 1..={}",
            dict.n_atoms()
        )));
    }
    Ok(())
}

fn pursue(
    dict: &Dictionary,
    signal: &[f64],
    l: usize,
    gram: GramSource<'_>,
    mut trace: Option<&mut Vec<f64>>,
) -> SparseCode {
    let n_atoms = dict.n_atoms();
    let signal_norm = dot(signal, signal).sqrt();
    let mut code = SparseCode::empty(l);
    if signal_norm == 0.0 {
        return code;
    }

    let alpha0: Vec<f64> = (0..n_atoms).map(|k| dot(dict.atom(k), signal)).collect();
    let mut alpha = alpha0.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(l);
    let mut gram_cols: Vec<Vec<f64>> = Vec::with_capacity(l);
    // lower-triangular Cholesky factor of G_II, row-major rows of growing length
    let mut chol: Vec<Vec<f64>> = Vec::with_capacity(l);
    let mut gamma: Vec<f64> = Vec::new();
    let mut scratch = Vec::with_capacity(n_atoms);

    while selected.len() < l {
        let mut best = None;
        let mut best_abs = 0.0;
        for (k, a) in alpha.iter().enumerate() {
            if a.abs() > best_abs && !selected.contains(&k) {
                best_abs = a.abs();
                best = Some(k);
            }
        }
        let Some(k) = best else { break };

        gram.column(dict, k, &mut scratch);
        let gkk = scratch[k];
        let mut w = Vec::with_capacity(selected.len());
        for (i, row) in chol.iter().enumerate() {
            let mut s = scratch[selected[i]];
            for (j, wj) in w.iter().enumerate() {
                s -= row[j] * wj;
            }
            w.push(s / row[i]);
        }
        let pivot_sq = gkk - w.iter().map(|v| v * v).sum::<f64>();
        if !(pivot_sq > RANK_TOL * gkk) {
            break;
        }
        w.push(pivot_sq.sqrt());
        chol.push(w);
        selected.push(k);
        gram_cols.push(scratch.clone());

        // L L^T gamma = alpha0_I
        let m = selected.len();
        let mut y = vec![0.0; m];
        for i in 0..m {
            let mut s = alpha0[selected[i]];
            for j in 0..i {
                s -= chol[i][j] * y[j];
            }
            y[i] = s / chol[i][i];
        }
        gamma = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = y[i];
            for j in i + 1..m {
                s -= chol[j][i] * gamma[j];
            }
            gamma[i] = s / chol[i][i];
        }

        let mut residual = signal.to_vec();
        for (&idx, g) in selected.iter().zip(&gamma) {
            for (r, a) in residual.iter_mut().zip(dict.atom(idx)) {
                *r -= g * a;
            }
        }
        let residual_norm = dot(&residual, &residual).sqrt();
        if let Some(t) = trace.as_deref_mut() {
            t.push(residual_norm);
        }
        if residual_norm <= RESIDUAL_TOL * signal_norm {
            break;
        }

        alpha.copy_from_slice(&alpha0);
        for (col, g) in gram_cols.iter().zip(&gamma) {
            for (a, c) in alpha.iter_mut().zip(col) {
                *a -= g * c;
            }
        }
    }

    code.indices = selected;
    code.coefficients = gamma;
    code
}

/// Greedy L-sparse code of `signal` over `dict`.
///
/// Stops after `l` atoms, when the residual vanishes, or when the next atom
/// would make the support rank-deficient (that atom is dropped).
pub fn omp(dict: &Dictionary, signal: &[f64], l: usize) -> Result<SparseCode> {
    check_args(dict, signal.len(), l)?;
    Ok(pursue(dict, signal, l, GramSource::OnTheFly, None))
}

/// Like [`omp`], also returning the residual norm after each greedy step.
pub fn omp_with_trace(dict: &Dictionary, signal: &[f64], l: usize) -> Result<(SparseCode, Vec<f64>)> {
    check_args(dict, signal.len(), l)?;
    let mut trace = Vec::with_capacity(l);
    let code = pursue(dict, signal, l, GramSource::OnTheFly, Some(&mut trace));
    Ok((code, trace))
}

/// Codes every column of `signals`. Results are bit-identical to calling
/// [`omp`] on each column.
pub fn omp_batch(dict: &Dictionary, signals: &DMatrix<f64>, l: usize) -> Result<Vec<SparseCode>> {
    check_args(dict, signals.nrows(), l)?;
    let gram = dict.gram();
    let d = signals.nrows();
    let data = signals.as_slice();
    Ok((0..signals.ncols())
        .into_par_iter()
        .map(|j| pursue(dict, &data[j * d..(j + 1) * d], l, GramSource::Precomputed(&gram), None))
        .collect())
}
