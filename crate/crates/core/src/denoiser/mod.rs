//! Spectral denoising of an observed adjacency matrix.
//!
//! The adjacency is centered by its grand mean and scaled by `1/sqrt(N)`;
//! its leading `(m-1)K+1` singular values are shrunk towards the values
//! they would have without noise, giving a low-rank estimate of the signal
//! matrix `S_K` (up to the unknown vertex permutation).

mod spectral;
mod svd;

pub use spectral::{ks_distance, quarter_circle, shrinkage_risk, spike_prediction, SpectralModel, SpikePrediction};
pub use svd::{
    randomized_svd, singular_values_full, truncated_svd, truncated_svd_with, LanczosOptions, SvdTriple,
};

use crate::error::{KronError, Result};
use crate::kron_model::{exact_exponent, Adjacency};
use crate::linalg::{LinearOperator, Matrix};
use crate::linear_map::{rank_bound, SignalMatrix};
use crate::scalar::Scalar;

/// Edge-density estimates from one graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PEstimate {
    /// `pbar_hat^(1/K)`
    pub p_hat: f64,
    /// Grand mean `1^T A 1 / N^2`.
    pub pbar_hat: f64,
}

pub fn estimate_p(a: &Adjacency, k: usize) -> Result<PEstimate> {
    if a.n() == 0 {
        return Err(KronError::InvalidConfig("adjacency is empty".into()));
    }
    if k == 0 {
        return Err(KronError::ParameterOutOfRange("exponent K must be at least 1".into()));
    }
    let mean = a.grand_mean();
    if mean <= 0.0 || mean >= 1.0 {
        return Err(KronError::DegenerateGraph { mean });
    }
    Ok(PEstimate {
        p_hat: mean.powf(1.0 / k as f64),
        pbar_hat: mean,
    })
}

/// `(A - pbar_hat 1 1^T) / sqrt(N)` stored densely.
#[derive(Clone, Debug)]
pub struct CenteredAdjacency<T> {
    entries: Matrix<T>,
    pbar_hat: T,
}

impl<T: Scalar> CenteredAdjacency<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.entries
    }
    pub fn into_matrix(self) -> Matrix<T> {
        self.entries
    }
    pub fn pbar_hat(&self) -> T {
        self.pbar_hat
    }
}

pub fn center_adjacency<T: Scalar>(a: &Adjacency) -> CenteredAdjacency<T> {
    center_matrix(&a.to_matrix())
}

/// Centering for an arbitrary square matrix; re-centering a centered matrix
/// only rescales it by `1/sqrt(N)`.
pub fn center_matrix<T: Scalar>(m: &Matrix<T>) -> CenteredAdjacency<T> {
    let n = m.nrows();
    let nf = T::of_usize(n);
    let mean = crate::scalar::pairwise_sum(m.as_slice()) / (nf * nf);
    let inv = nf.sqrt().recip();
    CenteredAdjacency {
        entries: m.map(|v| (v - mean) * inv),
        pbar_hat: mean,
    }
}

/// Matrix-free `(A - pbar 1 1^T) / sqrt(N)` over the sparse edge structure of `A`.
#[derive(Clone, Debug)]
pub struct CenteredOperator<T> {
    n: usize,
    pbar: T,
    inv_sqrt_n: T,
    row_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    col_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

fn compress(n: usize, lists: impl Iterator<Item = (usize, usize)>) -> (Vec<usize>, Vec<u32>) {
    let mut counts = vec![0usize; n + 1];
    let pairs: Vec<(usize, usize)> = lists.collect();
    for &(r, _) in &pairs {
        counts[r + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut fill = counts.clone();
    let mut idx = vec![0u32; pairs.len()];
    for (r, c) in pairs {
        idx[fill[r]] = c as u32;
        fill[r] += 1;
    }
    (counts, idx)
}

impl<T: Scalar> CenteredOperator<T> {
    pub fn new(a: &Adjacency, pbar: T) -> Self {
        let n = a.n();
        let edges = || (0..n).flat_map(move |i| a.row(i).iter().enumerate().filter(|(_, &b)| b != 0).map(move |(j, _)| (i, j)));
        let (row_ptr, row_idx) = compress(n, edges());
        let (col_ptr, col_idx) = compress(n, edges().map(|(i, j)| (j, i)));
        CenteredOperator {
            n,
            pbar,
            inv_sqrt_n: T::of_usize(n).sqrt().recip(),
            row_ptr,
            row_idx,
            col_ptr,
            col_idx,
        }
    }

    fn product(&self, ptr: &[usize], idx: &[u32], x: &[T], y: &mut [T]) {
        let shift = self.pbar * crate::scalar::pairwise_sum(x);
        for (i, yi) in y.iter_mut().enumerate() {
            let s = idx[ptr[i]..ptr[i + 1]].iter().fold(T::zero(), |s, &j| s + x[j as usize]);
            *yi = (s - shift) * self.inv_sqrt_n;
        }
    }

    fn block_product(&self, ptr: &[usize], idx: &[u32], x: &Matrix<T>) -> Matrix<T> {
        let (n, l) = (self.n, x.ncols());
        let mut rows = vec![T::zero(); n * l];
        for c in 0..l {
            for (i, &v) in x.col(c).iter().enumerate() {
                rows[i * l + c] = v;
            }
        }
        let shifts: Vec<T> = (0..l).map(|c| self.pbar * crate::scalar::pairwise_sum(x.col(c))).collect();
        let mut out = Matrix::zeros(n, l);
        let mut acc = vec![T::zero(); l];
        for i in 0..n {
            acc.iter_mut().for_each(|v| *v = T::zero());
            for &j in &idx[ptr[i]..ptr[i + 1]] {
                let src = &rows[j as usize * l..(j as usize + 1) * l];
                for (a, &s) in acc.iter_mut().zip(src) {
                    *a += s;
                }
            }
            for c in 0..l {
                out[(i, c)] = (acc[c] - shifts[c]) * self.inv_sqrt_n;
            }
        }
        out
    }
}

impl<T: Scalar> LinearOperator<T> for CenteredOperator<T> {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.product(&self.row_ptr, &self.row_idx, x, y)
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.product(&self.col_ptr, &self.col_idx, x, y)
    }
    fn apply_block(&self, x: &Matrix<T>) -> Matrix<T> {
        self.block_product(&self.row_ptr, &self.row_idx, x)
    }
    fn apply_transpose_block(&self, x: &Matrix<T>) -> Matrix<T> {
        self.block_product(&self.col_ptr, &self.col_idx, x)
    }
}

/// `f(t) = sqrt(t^2 - 4 pbar (1 - pbar))` strictly above the bulk edge, else 0.
pub fn shrink_singular<T: Scalar>(t: T, pbar_hat: T) -> T {
    let four_a2 = T::of(4.0) * pbar_hat * (T::one() - pbar_hat);
    if t > four_a2.sqrt() {
        (t * t - four_a2).sqrt()
    } else {
        T::zero()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SvdMode {
    #[default]
    Deterministic,
    Randomized { oversample: usize, power_q: usize },
}

impl SvdMode {
    pub fn randomized() -> Self {
        SvdMode::Randomized {
            oversample: 10,
            power_q: 2,
        }
    }
}

/// Low-rank shrinkage estimate of the (permuted) signal matrix.
#[derive(Clone, Debug)]
pub struct Denoised<T> {
    m: usize,
    k: usize,
    pbar_hat: T,
    spectrum: Vec<T>,
    shrunk: Vec<T>,
    /// Left vectors scaled by their shrunk values, nonzero components only.
    left: Matrix<T>,
    right: Matrix<T>,
}

impl<T: Scalar> Denoised<T> {
    pub fn n(&self) -> usize {
        self.left.nrows()
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn pbar_hat(&self) -> T {
        self.pbar_hat
    }
    pub fn p_hat(&self) -> T {
        self.pbar_hat.powf(T::one() / T::of_usize(self.k))
    }
    /// Leading singular values of the centered adjacency that were examined.
    pub fn spectrum(&self) -> &[T] {
        &self.spectrum
    }
    /// Shrunk counterparts of [`Self::spectrum`].
    pub fn shrunk(&self) -> &[T] {
        &self.shrunk
    }
    /// Number of components that survive shrinkage.
    pub fn retained(&self) -> usize {
        self.left.ncols()
    }

    pub fn column_into(&self, j: usize, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for c in 0..self.left.ncols() {
            let w = self.right[(j, c)];
            crate::scalar::axpy(w, self.left.col(c), out);
        }
    }

    /// Columns `cols` of the estimate, concatenated.
    pub fn columns(&self, cols: &[usize]) -> Vec<T> {
        let n = self.n();
        let mut out = vec![T::zero(); n * cols.len()];
        for (b, &j) in cols.iter().enumerate() {
            self.column_into(j, &mut out[b * n..(b + 1) * n]);
        }
        out
    }

    pub fn to_signal(&self) -> SignalMatrix<T> {
        let ones = vec![T::one(); self.left.ncols()];
        SignalMatrix::new(self.m, self.k, self.left.scaled_outer(&ones, &self.right))
    }
}

fn exponent_for(n: usize, m: usize) -> Result<usize> {
    exact_exponent(n, m).ok_or_else(|| {
        KronError::InvalidConfig(format!("graph size {n} is not a power of the initiator side {m}"))
    })
}

/// Centers `a`, takes its leading singular triples and shrinks them.
pub fn denoise<T: Scalar>(a: &Adjacency, m: usize, mode: SvdMode, seed: u64) -> Result<Denoised<T>> {
    let k = exponent_for(a.n(), m)?;
    let est = estimate_p(a, k)?;
    let pbar = T::of(est.pbar_hat);
    let op = CenteredOperator::new(a, pbar);
    denoise_operator(&op, m, k, pbar, mode, seed)
}

/// Shrinkage applied to an already centered operator (e.g. a noiseless signal).
pub fn denoise_operator<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    m: usize,
    k: usize,
    pbar_hat: T,
    mode: SvdMode,
    seed: u64,
) -> Result<Denoised<T>> {
    let n = op.nrows();
    if !(pbar_hat > T::zero() && pbar_hat < T::one()) {
        return Err(KronError::DegenerateGraph { mean: pbar_hat.as_f64() });
    }
    let r = rank_bound(m, k).min(n);
    let svd = match mode {
        SvdMode::Deterministic => truncated_svd(op, r)?,
        SvdMode::Randomized { oversample, power_q } => {
            randomized_svd(op, r, oversample.min(n - r), power_q, seed)?
        }
    };
    let shrunk: Vec<T> = svd.singular_values.iter().map(|&s| shrink_singular(s, pbar_hat)).collect();
    let keep: Vec<usize> = (0..r).filter(|&i| shrunk[i] > T::zero()).collect();
    let left = Matrix::from_fn(n, keep.len(), |i, c| shrunk[keep[c]] * svd.left_vectors[(i, keep[c])]);
    let right = Matrix::from_fn(n, keep.len(), |i, c| svd.right_vectors[(i, keep[c])]);
    Ok(Denoised {
        m,
        k,
        pbar_hat,
        spectrum: svd.singular_values,
        shrunk,
        left,
        right,
    })
}
