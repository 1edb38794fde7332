//! The low-rank linearization of a Kronecker graph's edge probabilities.
//!
//! `S_K` is linear in `X`: `vec(S_K) = Theta vec(X)` where row `q = i + N j`
//! of `Theta` counts, for each initiator cell `(u, v)`, how many digit
//! positions `l` have `(i_l, j_l) = (u, v)`, scaled by `p^(K-1) / N`.
//! `Theta` has `N^2` rows and is never materialized; the split of every
//! index into low and high digit halves lets products, adjoints and Gram
//! blocks stream one column block at a time.

use std::io::Write;

use crate::error::{KronError, Result};
use crate::kron_model::{checked_size, GraphParams};
use crate::linalg::{LinearOperator, Matrix};
use crate::scalar::Scalar;

/// `(m - 1) K + 1`, the rank ceiling of `S_K` and of the linearized `P_K`.
pub fn rank_bound(m: usize, k: usize) -> usize {
    (m.saturating_sub(1)) * k + 1
}

/// Base-`m` digits of every vertex index, least significant first.
#[derive(Clone, Debug)]
pub struct DigitTable {
    m: usize,
    k: usize,
    n: usize,
    digits: Vec<u8>,
    lo_len: usize,
}

impl DigitTable {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m == 0 || m > 255 {
            return Err(KronError::ParameterOutOfRange(format!("initiator side {m} is unsupported")));
        }
        let n = if m == 1 { 1 } else { checked_size(m, k)? };
        let mut digits = Vec::with_capacity(n * k);
        for i in 0..n {
            let mut v = i;
            for _ in 0..k {
                digits.push((v % m) as u8);
                v /= m;
            }
        }
        let lo_len = m.pow((k / 2) as u32);
        Ok(DigitTable {
            m,
            k,
            n,
            digits,
            lo_len,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn digits(&self, i: usize) -> &[u8] {
        &self.digits[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    fn lo(&self, i: usize) -> usize {
        i % self.lo_len
    }

    #[inline]
    fn hi(&self, i: usize) -> usize {
        i / self.lo_len
    }
}

/// Implicit `N^2 x m^2` coefficient matrix.
#[derive(Clone, Debug)]
pub struct ThetaMap<T> {
    m: usize,
    k: usize,
    p: T,
    scale: T,
    table: DigitTable,
    lo_len: usize,
    hi_len: usize,
    /// Digit-pair counts for the low half, indexed `(a + L b) * m^2 + c`.
    lo_counts: Vec<u32>,
    /// Same for the high half, indexed `(a + H b) * m^2 + c`.
    hi_counts: Vec<u32>,
    lo_sparse: Vec<Vec<(usize, u32)>>,
    hi_sparse: Vec<Vec<(usize, u32)>>,
}

impl<T: Scalar> ThetaMap<T> {
    /// `m = 1` is accepted as a degenerate single-vertex model.
    pub fn new(m: usize, k: usize, p: T) -> Result<Self> {
        if k < 1 {
            return Err(KronError::ParameterOutOfRange("exponent K must be at least 1".into()));
        }
        if !(p > T::zero() && p < T::one()) {
            return Err(KronError::ParameterOutOfRange(format!("base probability p = {p} is outside (0, 1)")));
        }
        let table = DigitTable::new(m, k)?;
        let n = table.n;
        let h = k / 2;
        let lo_len = m.pow(h as u32);
        let hi_len = m.pow((k - h) as u32);
        let mm = m * m;
        let half_counts = |len: usize, digit_range: std::ops::Range<usize>| {
            let mut counts = vec![0u32; len * len * mm];
            for b in 0..len {
                for a in 0..len {
                    let base = (a + len * b) * mm;
                    let (mut va, mut vb) = (a, b);
                    for _ in digit_range.clone() {
                        counts[base + va % m + m * (vb % m)] += 1;
                        va /= m;
                        vb /= m;
                    }
                }
            }
            counts
        };
        let lo_counts = half_counts(lo_len, 0..h);
        let hi_counts = half_counts(hi_len, h..k);
        let sparse = |counts: &[u32]| {
            counts
                .chunks(mm)
                .map(|c| c.iter().enumerate().filter(|(_, &v)| v > 0).map(|(i, &v)| (i, v)).collect())
                .collect()
        };
        let lo_sparse = sparse(&lo_counts);
        let hi_sparse = sparse(&hi_counts);
        let scale = p.powi(k as i32 - 1) / T::of_usize(n);
        Ok(ThetaMap {
            m,
            k,
            p,
            scale,
            table,
            lo_len,
            hi_len,
            lo_counts,
            hi_counts,
            lo_sparse,
            hi_sparse,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn n(&self) -> usize {
        self.table.n
    }
    /// Number of unknowns, `m^2`.
    pub fn dim(&self) -> usize {
        self.m * self.m
    }
    /// `p^(K-1) / N`, the common factor of every entry.
    pub fn scale(&self) -> T {
        self.scale
    }

    fn check_len(&self, expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(KronError::DimensionMismatch { expected, found });
        }
        Ok(())
    }

    /// Row `q = i + N j` (0-based `i`, `j`) by direct digit counting.
    pub fn theta_row(&self, i: usize, j: usize) -> Result<Vec<T>> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(KronError::IndexOutOfRange(format!("({}, {}) outside 1..={n}", i + 1, j + 1)));
        }
        let mut counts = vec![0u32; self.dim()];
        for (&di, &dj) in self.table.digits(i).iter().zip(self.table.digits(j)) {
            counts[di as usize + self.m * dj as usize] += 1;
        }
        Ok(counts.into_iter().map(|c| self.scale * T::of(c as f64)).collect())
    }

    fn cols_or_all<'a>(&self, cols: Option<&'a [usize]>, all: &'a mut Vec<usize>) -> Result<&'a [usize]> {
        match cols {
            Some(c) => {
                if let Some(&bad) = c.iter().find(|&&j| j >= self.n()) {
                    return Err(KronError::IndexOutOfRange(format!("block {} outside 1..={}", bad + 1, self.n())));
                }
                Ok(c)
            }
            None => {
                *all = (0..self.n()).collect();
                Ok(all.as_slice())
            }
        }
    }

    fn half_tables(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let mm = self.dim();
        let fold = |counts: &[u32]| -> Vec<T> {
            counts
                .chunks(mm)
                .map(|c| c.iter().zip(x).fold(T::zero(), |s, (&cnt, &xv)| if cnt == 0 { s } else { s + T::of(cnt as f64) * xv }))
                .collect()
        };
        (fold(&self.lo_counts), fold(&self.hi_counts))
    }

    /// `Theta x`, length `N^2` in column-major order.
    pub fn theta_apply(&self, x: &[T]) -> Result<Vec<T>> {
        self.theta_apply_blocks(x, None)
    }

    /// `Theta x` restricted to the rows of the listed column blocks, block by
    /// block (`N` entries per block, in the given order).
    pub fn theta_apply_blocks(&self, x: &[T], cols: Option<&[usize]>) -> Result<Vec<T>> {
        self.check_len(self.dim(), x.len())?;
        let mut all = Vec::new();
        let cols = self.cols_or_all(cols, &mut all)?;
        let n = self.n();
        let mut out = vec![T::zero(); n * cols.len()];
        self.theta_apply_into(x, cols, &mut out);
        debug_assert_eq!(out.len(), n * cols.len());
        Ok(out)
    }

    pub(crate) fn theta_apply_into(&self, x: &[T], cols: &[usize], out: &mut [T]) {
        let n = self.n();
        let (t_lo, t_hi) = self.half_tables(x);
        let (lo_len, hi_len) = (self.lo_len, self.hi_len);
        let lo_idx: Vec<usize> = (0..n).map(|i| self.table.lo(i)).collect();
        let hi_idx: Vec<usize> = (0..n).map(|i| self.table.hi(i)).collect();
        for (b, &j) in cols.iter().enumerate() {
            let lo_row = &t_lo[lo_len * lo_idx[j]..lo_len * (lo_idx[j] + 1)];
            let hi_row = &t_hi[hi_len * hi_idx[j]..hi_len * (hi_idx[j] + 1)];
            let dst = &mut out[b * n..(b + 1) * n];
            for (i, d) in dst.iter_mut().enumerate() {
                *d = self.scale * (lo_row[lo_idx[i]] + hi_row[hi_idx[i]]);
            }
        }
    }

    /// `Theta^T r` for `r` of length `N^2`.
    pub fn theta_adjoint_apply(&self, r: &[T]) -> Result<Vec<T>> {
        self.theta_adjoint_blocks(r, None)
    }

    /// `Theta^T r` where `r` holds the rows of the listed blocks only.
    pub fn theta_adjoint_blocks(&self, r: &[T], cols: Option<&[usize]>) -> Result<Vec<T>> {
        let mut all = Vec::new();
        let cols = self.cols_or_all(cols, &mut all)?;
        let n = self.n();
        self.check_len(n * cols.len(), r.len())?;
        let mm = self.dim();
        let mut out = vec![T::zero(); mm];
        let mut w_lo = vec![T::zero(); self.lo_len];
        let mut w_hi = vec![T::zero(); self.hi_len];
        for (b, &j) in cols.iter().enumerate() {
            w_lo.iter_mut().for_each(|v| *v = T::zero());
            w_hi.iter_mut().for_each(|v| *v = T::zero());
            for (i, &v) in r[b * n..(b + 1) * n].iter().enumerate() {
                w_lo[self.table.lo(i)] += v;
                w_hi[self.table.hi(i)] += v;
            }
            let (bl, bh) = (self.table.lo(j), self.table.hi(j));
            for (a, &w) in w_lo.iter().enumerate() {
                for &(c, cnt) in &self.lo_sparse[a + self.lo_len * bl] {
                    out[c] += T::of(cnt as f64) * w;
                }
            }
            for (a, &w) in w_hi.iter().enumerate() {
                for &(c, cnt) in &self.hi_sparse[a + self.hi_len * bh] {
                    out[c] += T::of(cnt as f64) * w;
                }
            }
        }
        Ok(out.into_iter().map(|v| v * self.scale).collect())
    }

    /// `Theta^T r` for a sparse `r` given as `(i, j, value)` entries.
    pub fn theta_adjoint_sparse(&self, entries: impl IntoIterator<Item = (usize, usize, T)>) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (i, j, w) in entries {
            let lo = &self.lo_sparse[self.table.lo(i) + self.lo_len * self.table.lo(j)];
            let hi = &self.hi_sparse[self.table.hi(i) + self.hi_len * self.table.hi(j)];
            for &(c, cnt) in lo.iter().chain(hi) {
                out[c] += T::of(cnt as f64) * w;
            }
        }
        out.into_iter().map(|v| v * self.scale).collect()
    }

    /// `Theta^T Theta` over all rows, or over the rows of the listed column
    /// blocks. Counts are accumulated exactly in integers.
    pub fn theta_gram(&self, cols: Option<&[usize]>) -> Result<Matrix<T>> {
        if matches!(cols, Some(c) if c.is_empty()) {
            return Err(KronError::InvalidConfig("block subset is empty".into()));
        }
        let mut all = Vec::new();
        let cols = self.cols_or_all(cols, &mut all)?;
        let mm = self.dim();
        let (lo_len, hi_len) = (self.lo_len, self.hi_len);
        // Per column-digit half: sum of count vectors and of their outer products
        // over all row-digit halves.
        let summarize = |counts: &[u32], len: usize| {
            let mut sums = vec![0u64; len * mm];
            let mut outer = vec![0u64; len * mm * mm];
            for b in 0..len {
                for a in 0..len {
                    let c = &counts[(a + len * b) * mm..(a + len * b + 1) * mm];
                    for (p, &cp) in c.iter().enumerate() {
                        if cp == 0 {
                            continue;
                        }
                        sums[b * mm + p] += cp as u64;
                        for (q, &cq) in c.iter().enumerate() {
                            outer[(b * mm + p) * mm + q] += (cp * cq) as u64;
                        }
                    }
                }
            }
            (sums, outer)
        };
        let (lo_sum, lo_outer) = summarize(&self.lo_counts, lo_len);
        let (hi_sum, hi_outer) = summarize(&self.hi_counts, hi_len);
        let mut acc = vec![0u64; mm * mm];
        for &j in cols {
            let (b, bh) = (self.table.lo(j), self.table.hi(j));
            for p in 0..mm {
                for q in 0..mm {
                    acc[p * mm + q] += hi_len as u64 * lo_outer[(b * mm + p) * mm + q]
                        + lo_len as u64 * hi_outer[(bh * mm + p) * mm + q]
                        + lo_sum[b * mm + p] * hi_sum[bh * mm + q]
                        + hi_sum[bh * mm + p] * lo_sum[b * mm + q];
                }
            }
        }
        let s2 = self.scale * self.scale;
        Ok(Matrix::from_fn(mm, mm, |p, q| s2 * T::of(acc[p * mm + q] as f64)))
    }
}

/// Dense `S_K` together with the generation parameters.
#[derive(Clone, Debug)]
pub struct SignalMatrix<T> {
    m: usize,
    k: usize,
    entries: Matrix<T>,
}

impl<T: Scalar> SignalMatrix<T> {
    pub fn new(m: usize, k: usize, entries: Matrix<T>) -> Self {
        SignalMatrix { m, k, entries }
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
    pub fn matrix(&self) -> &Matrix<T> {
        &self.entries
    }
    pub fn into_matrix(self) -> Matrix<T> {
        self.entries
    }
    /// `vec(S)`, column-major.
    pub fn vec(&self) -> &[T] {
        self.entries.as_slice()
    }

    /// Row-major CSV with shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{}", self.entries[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `S_1 = X / N`, `S_k = p^(k-1)/N (1 1^T) (x) X + p S_(k-1) (x) (1 1^T)`.
pub fn build_signal_recursive<T: Scalar>(p: T, x: &Matrix<T>, m: usize, k: usize) -> Result<SignalMatrix<T>> {
    if x.nrows() != m || x.ncols() != m {
        return Err(KronError::DimensionMismatch {
            expected: m * m,
            found: x.nrows() * x.ncols(),
        });
    }
    if k < 1 {
        return Err(KronError::ParameterOutOfRange("exponent K must be at least 1".into()));
    }
    let n = if m == 1 { 1 } else { checked_size(m, k)? };
    let inv_n = T::of_usize(n).recip();
    let mut s = x.map(|v| v * inv_n);
    let mut pk = T::one();
    for _ in 2..=k {
        pk *= p;
        let coef = pk * inv_n;
        let sz = s.nrows();
        let mut next = Matrix::zeros(sz * m, sz * m);
        for c in 0..sz {
            for d in 0..m {
                let col = next.col_mut(c * m + d);
                for a in 0..sz {
                    let base = p * s[(a, c)];
                    for b in 0..m {
                        col[a * m + b] = coef * x[(b, d)] + base;
                    }
                }
            }
        }
        s = next;
    }
    Ok(SignalMatrix::new(m, k, s))
}

/// `P_K^lin = p^K 1 1^T + sqrt(N) S_K`.
#[derive(Clone, Debug)]
pub struct LinearizedProbability<T> {
    entries: Matrix<T>,
}

impl<T: Scalar> LinearizedProbability<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.entries
    }
}

pub fn linearized_probability<T: Scalar>(params: &GraphParams<T>) -> Result<LinearizedProbability<T>> {
    let s = build_signal_recursive(params.p(), params.x(), params.m(), params.k())?;
    let pk = params.pbar();
    let root_n = T::of_usize(params.n()).sqrt();
    Ok(LinearizedProbability {
        entries: s.into_matrix().map(|v| pk + root_n * v),
    })
}

/// Matrix-free `S_K` using its Kronecker-sum structure; `O(N K)` per product
/// and no size cap beyond `usize`.
#[derive(Clone, Debug)]
pub struct SignalOperator<T> {
    m: usize,
    k: usize,
    n: usize,
    scale: T,
    x: Matrix<T>,
}

impl<T: Scalar> SignalOperator<T> {
    pub fn new(p: T, x: &Matrix<T>, m: usize, k: usize) -> Result<Self> {
        if x.nrows() != m || x.ncols() != m || m < 1 || k < 1 {
            return Err(KronError::DimensionMismatch {
                expected: m * m,
                found: x.nrows() * x.ncols(),
            });
        }
        let n = m
            .checked_pow(k as u32)
            .ok_or(KronError::SizeOverflow {
                size: u128::MAX,
                cap: usize::MAX,
            })?;
        Ok(SignalOperator {
            m,
            k,
            n,
            scale: p.powi(k as i32 - 1) / T::of_usize(n),
            x: x.clone(),
        })
    }

    fn apply_with(&self, xm: &Matrix<T>, input: &[T], out: &mut [T]) {
        let (m, k) = (self.m, self.k);
        // digit sums of the input per position
        let mut sums = vec![T::zero(); k * m];
        for (j, &v) in input.iter().enumerate() {
            let mut jj = j;
            for l in 0..k {
                sums[l * m + jj % m] += v;
                jj /= m;
            }
        }
        let mut w = vec![T::zero(); k * m];
        for l in 0..k {
            for u in 0..m {
                w[l * m + u] = (0..m).fold(T::zero(), |s, v| s + xm[(u, v)] * sums[l * m + v]);
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut ii = i;
            let mut acc = T::zero();
            for l in 0..k {
                acc += w[l * m + ii % m];
                ii /= m;
            }
            *o = self.scale * acc;
        }
    }
}

impl<T: Scalar> LinearOperator<T> for SignalOperator<T> {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_with(&self.x, x, y)
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        let xt = self.x.transpose();
        self.apply_with(&xt, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_x(m: usize, rng: &mut crate::rng::Rng) -> Matrix<f64> {
        Matrix::from_fn(m, m, |_, _| rng.random_range(-6.0..6.0))
    }

    /// Explicit `N^2 x m^2` Theta from theta_row.
    fn materialize(theta: &ThetaMap<f64>) -> Matrix<f64> {
        let n = theta.n();
        let mut out = Matrix::zeros(n * n, theta.dim());
        for j in 0..n {
            for i in 0..n {
                for (c, v) in theta.theta_row(i, j).unwrap().into_iter().enumerate() {
                    out[(i + n * j, c)] = v;
                }
            }
        }
        out
    }

    #[test]
    fn rank_bound_values() {
        assert_eq!(rank_bound(1, 7), 1);
        assert_eq!(rank_bound(2, 12), 13);
        assert_eq!(rank_bound(4, 5), 16);
    }

    #[test]
    fn signal_base_case_and_zero() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]);
        let s1 = build_signal_recursive(0.4, &x, 2, 1).unwrap();
        assert_eq!(s1.matrix(), &x.map(|v| v / 2.0));
        let zero = build_signal_recursive(0.4, &Matrix::zeros(2, 2), 2, 5).unwrap();
        assert!(zero.vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn signal_two_levels_by_hand() {
        let x = Matrix::from_rows(&[vec![3.0, 1.0], vec![-1.0, 2.0]]);
        let s: SignalMatrix<f64> = build_signal_recursive(0.5, &x, 2, 2).unwrap();
        assert!((s.matrix()[(0, 0)] - 0.25 * 3.0).abs() < 1e-15);
    }

    #[test]
    fn theta_rows_by_hand() {
        let theta = ThetaMap::new(2, 2, 0.5).unwrap();
        assert_eq!(theta.theta_row(0, 0).unwrap(), vec![0.25, 0.0, 0.0, 0.0]);
        assert_eq!(theta.theta_row(1, 2).unwrap(), vec![0.0, 0.125, 0.125, 0.0]);
        assert!(theta.theta_row(4, 0).is_err());
    }

    #[test]
    fn theta_apply_special_vectors() {
        let theta = ThetaMap::new(3, 3, 0.6).unwrap();
        assert!(theta.theta_apply(&[0.0; 9]).unwrap().iter().all(|&v| v == 0.0));
        let want = 0.6f64.powi(2) * 3.0 / 27.0;
        for v in theta.theta_apply(&[1.0; 9]).unwrap() {
            assert!((v - want).abs() <= 1e-14 * want);
        }
        assert!(theta.theta_apply(&[1.0; 4]).is_err());
    }

    #[test]
    fn theta_apply_matches_recursion() {
        let mut rng = crate::rng::seeded(5);
        for m in 2..=3 {
            for k in 1..=5 {
                let theta = ThetaMap::new(m, k, 0.7).unwrap();
                let x = random_x(m, &mut rng);
                let s = build_signal_recursive(0.7, &x, m, k).unwrap();
                let y = theta.theta_apply(x.as_slice()).unwrap();
                let err = y.iter().zip(s.vec()).fold(0.0f64, |a, (&u, &v)| a.max((u - v).abs()));
                assert!(err <= 1e-12, "m={m} k={k} err={err}");
            }
        }
    }

    #[test]
    fn adjoint_and_gram_match_materialized_theta() {
        let mut rng = crate::rng::seeded(6);
        let theta = ThetaMap::new(2, 3, 0.35).unwrap();
        let dense = materialize(&theta);
        let n2 = dense.nrows();
        let r: Vec<f64> = (0..n2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = dense.matvec_t(&r);
        let got = theta.theta_adjoint_apply(&r).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let sparse: Vec<(usize, usize, f64)> = (0..n2).filter(|q| q % 5 == 0).map(|q| (q % 8, q / 8, r[q])).collect();
        let masked: Vec<f64> = (0..n2).map(|q| if q % 5 == 0 { r[q] } else { 0.0 }).collect();
        let want = dense.matvec_t(&masked);
        for (a, b) in theta.theta_adjoint_sparse(sparse).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        let gram = theta.theta_gram(None).unwrap();
        assert!(gram.max_abs_diff(&dense.t_matmul(&dense)) < 1e-12);
        // block-restricted version against materialized rows of those blocks
        let cols = [1usize, 6];
        let sub = Matrix::from_fn(cols.len() * 8, 4, |q, c| dense[(q % 8 + 8 * cols[q / 8], c)]);
        assert!(theta.theta_gram(Some(&cols)).unwrap().max_abs_diff(&sub.t_matmul(&sub)) < 1e-14);
        assert!(theta.theta_gram(Some(&[])).is_err());
    }

    #[test]
    fn adjoint_of_ones_is_constant() {
        for &(m, k, p) in &[(2usize, 4usize, 0.3f64), (3, 3, 0.7)] {
            let theta = ThetaMap::new(m, k, p).unwrap();
            let n = theta.n();
            let out = theta.theta_adjoint_apply(&vec![1.0; n * n]).unwrap();
            let want = p.powi(k as i32 - 1) * k as f64 * n as f64 / (m * m) as f64;
            for v in out {
                assert!((v - want).abs() <= 1e-13 * want);
            }
        }
    }

    #[test]
    fn degenerate_single_column_gram() {
        let theta = ThetaMap::new(1, 4, 0.5).unwrap();
        let g = theta.theta_gram(None).unwrap();
        let want = (0.5f64.powi(3) * 4.0).powi(2);
        assert!((g[(0, 0)] - want).abs() < 1e-15);
    }

    #[test]
    fn linearized_probability_constant_and_two_level_gap() {
        let g = GraphParams::from_vec(2, 3, 0.6f64, &[0.0; 4]).unwrap();
        let lin = linearized_probability(&g).unwrap();
        assert!(lin.matrix().as_slice().iter().all(|&v| (v - 0.216).abs() < 1e-15));

        let x11 = 0.4;
        let g = GraphParams::from_vec(2, 2, 0.5, &[x11, 0.0, 0.0, 0.0]).unwrap();
        let lin = linearized_probability(&g).unwrap();
        let exact = (0.5 + x11 / 2.0f64).powi(2);
        let gap = exact - lin.matrix()[(0, 0)];
        assert!((gap - x11 * x11 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn signal_operator_matches_dense() {
        let mut rng = crate::rng::seeded(8);
        let x = random_x(3, &mut rng);
        let s = build_signal_recursive(0.55, &x, 3, 4).unwrap();
        let op = SignalOperator::new(0.55, &x, 3, 4).unwrap();
        let v: Vec<f64> = (0..81).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; 81];
        op.apply(&v, &mut y);
        let want = s.matrix().matvec(&v);
        assert!(y.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-13));
        op.apply_transpose(&v, &mut y);
        let want = s.matrix().matvec_t(&v);
        assert!(y.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn csv_dump_is_row_major() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let s = build_signal_recursive(0.5, &x, 2, 1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0.5,1\n1.5,2\n");
    }

    #[test]
    fn f32_theta_apply_agrees_with_f64() {
        let x64 = [1.5f64, -2.0, 0.25, 3.0];
        let x32: Vec<f32> = x64.iter().map(|&v| v as f32).collect();
        let t64 = ThetaMap::new(2, 6, 0.7f64).unwrap().theta_apply(&x64).unwrap();
        let t32 = ThetaMap::new(2, 6, 0.7f32).unwrap().theta_apply(&x32).unwrap();
        for (a, b) in t64.iter().zip(&t32) {
            assert!((a - *b as f64).abs() < 1e-6);
        }
    }
}
