//! Dense column-major matrices and the small factorizations the pipeline
//! needs: Gram–Schmidt orthonormalization, one-sided Jacobi SVD and the
//! cyclic Jacobi symmetric eigensolver.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{axpy, dot, norm2, Scalar};

/// Dense matrix stored column by column.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "storage length does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    /// Standard normal entries.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| T::of(rng.sample::<f64, _>(StandardNormal)))
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&mut self, k: usize) {
        let k = k.min(self.cols);
        self.data.truncate(k * self.rows);
        self.cols = k;
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// `y = self * x`
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        y.iter_mut().for_each(|v| *v = T::zero());
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                axpy(xj, self.col(j), y);
            }
        }
    }

    /// `y = self^T * x`
    pub fn matvec_t_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = dot(self.col(j), x);
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.cols];
        self.matvec_t_into(x, &mut y);
        y
    }

    /// `self * b`; reads each column of `self` once.
    pub fn matmul(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, b.rows);
        let mut out = Matrix::zeros(self.rows, b.cols);
        for j in 0..self.cols {
            let a_col = self.col(j);
            for c in 0..b.cols {
                let w = b[(j, c)];
                if w != T::zero() {
                    axpy(w, a_col, out.col_mut(c));
                }
            }
        }
        out
    }

    /// `self^T * b`
    pub fn t_matmul(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.rows, b.rows);
        let mut out = Matrix::zeros(self.cols, b.cols);
        for j in 0..self.cols {
            let a_col = self.col(j);
            for c in 0..b.cols {
                out[(j, c)] = dot(a_col, b.col(c));
            }
        }
        out
    }

    /// `self * diag(d) * other^T`, the outer-product form of a factored
    /// low-rank matrix.
    pub fn scaled_outer(&self, d: &[T], other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, d.len());
        assert_eq!(other.cols, d.len());
        let mut out = Matrix::zeros(self.rows, other.rows);
        for j in 0..other.rows {
            let col = out.col_mut(j);
            for (k, &dk) in d.iter().enumerate() {
                let w = dk * other[(j, k)];
                if w != T::zero() {
                    axpy(w, &self.data[k * self.rows..(k + 1) * self.rows], col);
                }
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row: Vec<String> = (0..self.cols.min(8))
                .map(|j| format!("{:?}", self[(i, j)]))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Anything that can multiply a vector and its transpose.
pub trait LinearOperator<T: Scalar> {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[T], y: &mut [T]);
    /// `y = A^T x`
    fn apply_transpose(&self, x: &[T], y: &mut [T]);

    fn apply_block(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(self.nrows(), x.ncols());
        for c in 0..x.ncols() {
            self.apply(x.col(c), out.col_mut(c));
        }
        out
    }

    fn apply_transpose_block(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(self.ncols(), x.ncols());
        for c in 0..x.ncols() {
            self.apply_transpose(x.col(c), out.col_mut(c));
        }
        out
    }
}

impl<T: Scalar> LinearOperator<T> for Matrix<T> {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec_into(x, y)
    }
    fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        self.matvec_t_into(x, y)
    }
    fn apply_block(&self, x: &Matrix<T>) -> Matrix<T> {
        self.matmul(x)
    }
    fn apply_transpose_block(&self, x: &Matrix<T>) -> Matrix<T> {
        self.t_matmul(x)
    }
}

/// Removes from `x` its components along each vector in `basis`, twice.
pub fn reorthogonalize<T: Scalar>(x: &mut [T], basis: &[Vec<T>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, x);
            axpy(-c, b, x);
        }
    }
}

/// In-place modified Gram–Schmidt with one reorthogonalization pass.
/// Columns that become numerically zero are replaced by a unit vector
/// orthogonal to the previous ones.
pub fn orthonormalize_columns<T: Scalar>(m: &mut Matrix<T>) {
    let n = m.nrows();
    let k = m.ncols();
    let eps = T::epsilon() * T::of_usize(n.max(1)).sqrt();
    for j in 0..k {
        let original = norm2(m.col(j));
        for _ in 0..2 {
            for i in 0..j {
                let (prev, cur) = m.data.split_at_mut(j * n);
                let qi = &prev[i * n..(i + 1) * n];
                let cur = &mut cur[..n];
                let c = dot(qi, cur);
                axpy(-c, qi, cur);
            }
        }
        let nrm = norm2(m.col(j));
        if nrm <= eps * original.max(T::min_positive_value()) || nrm == T::zero() {
            fill_orthogonal_unit(m, j);
        } else {
            let inv = nrm.recip();
            m.col_mut(j).iter_mut().for_each(|v| *v *= inv);
        }
    }
}

/// Writes into column `j` a unit vector orthogonal to columns `0..j`.
fn fill_orthogonal_unit<T: Scalar>(m: &mut Matrix<T>, j: usize) {
    let n = m.nrows();
    for e in 0..n {
        let mut v = vec![T::zero(); n];
        v[e] = T::one();
        for _ in 0..2 {
            for i in 0..j {
                let c = dot(m.col(i), &v);
                axpy(-c, m.col(i), &mut v);
            }
        }
        let nrm = norm2(&v);
        if nrm > T::of(0.5) {
            let inv = nrm.recip();
            for (dst, src) in m.col_mut(j).iter_mut().zip(v) {
                *dst = src * inv;
            }
            return;
        }
    }
    m.col_mut(j).iter_mut().for_each(|v| *v = T::zero());
}

/// Completes the orthonormal columns `0..filled` of `m` with further
/// orthonormal columns.
pub fn complete_orthonormal<T: Scalar>(m: &mut Matrix<T>, filled: usize) {
    for j in filled..m.ncols() {
        fill_orthogonal_unit(m, j);
    }
}

/// Thin SVD `A = U diag(s) V^T` of a dense matrix by one-sided Jacobi
/// rotations. Values are sorted in descending order.
pub struct DenseSvd<T> {
    pub u: Matrix<T>,
    pub s: Vec<T>,
    pub v: Matrix<T>,
}

pub fn jacobi_svd<T: Scalar>(a: &Matrix<T>) -> DenseSvd<T> {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose());
        return DenseSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let m = a.nrows();
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = T::epsilon() * T::of_usize(m.max(1));
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                rotate_cols(&mut w, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<T> = (0..n).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let mut u_sorted = Matrix::zeros(m, n);
    let mut v_sorted = Matrix::zeros(n, n);
    let mut s_sorted = Vec::with_capacity(n);
    let smax = s.iter().copied().fold(T::zero(), T::max);
    let mut filled = 0;
    let mut null_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
        let sv = s[src];
        if sv > smax * T::epsilon() * T::of_usize(n.max(1)) && sv > T::zero() {
            let inv = sv.recip();
            for (d, &x) in u_sorted.col_mut(dst).iter_mut().zip(w.col(src)) {
                *d = x * inv;
            }
            filled += 1;
        } else {
            null_cols.push(dst);
        }
        s_sorted.push(sv);
    }
    if !null_cols.is_empty() {
        // Null columns are all at the tail after sorting.
        complete_orthonormal(&mut u_sorted, filled);
    }
    s.clear();
    DenseSvd {
        u: u_sorted,
        s: s_sorted,
        v: v_sorted,
    }
}

fn rotate_cols<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = m.nrows();
    let (lo, hi) = m.data.split_at_mut(q * n);
    let cp = &mut lo[p * n..(p + 1) * n];
    let cq = &mut hi[..n];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi.
/// Returns eigenvalues in descending order with matching eigenvector columns.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    off += m[(i, j)] * m[(i, j)];
                } else {
                    diag += m[(i, i)] * m[(i, i)];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                rotate_cols(&mut v, p, q, c, s);
            }
        }
    }
    let vals: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.col_mut(dst).copy_from_slice(v.col(src));
    }
    (sorted_vals, sorted_vecs)
}

/// Moore–Penrose pseudoinverse of a symmetric positive semi-definite matrix.
/// Eigenvalues at or below `rel_cutoff * max_eigenvalue` are treated as zero.
pub fn psd_pseudoinverse<T: Scalar>(a: &Matrix<T>, rel_cutoff: T) -> Matrix<T> {
    let n = a.nrows();
    let (vals, vecs) = symmetric_eigen(a);
    let vmax = vals.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let cutoff = rel_cutoff * vmax;
    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cutoff || lam == T::zero() {
            continue;
        }
        let inv = lam.recip();
        for j in 0..n {
            let w = inv * vecs[(j, k)];
            for i in 0..n {
                out[(i, j)] += vecs[(i, k)] * w;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jacobi_svd_reconstructs_rectangular_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(r, c) in &[(7usize, 4usize), (4, 7), (5, 5)] {
            let a: Matrix<f64> = Matrix::gaussian(r, c, &mut rng);
            let svd = jacobi_svd(&a);
            let rec = svd.u.scaled_outer(&svd.s, &svd.v);
            assert!(rec.max_abs_diff(&a) < 1e-12, "{r}x{c}");
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let utu = svd.u.t_matmul(&svd.u);
            assert!(utu.max_abs_diff(&Matrix::identity(svd.s.len())) < 1e-12);
        }
    }

    #[test]
    fn jacobi_svd_rank_deficient_completes_basis() {
        let u = [1.0f64, 2.0, 3.0];
        let a = Matrix::from_fn(3, 3, |i, j| u[i] * u[j]);
        let svd = jacobi_svd(&a);
        assert!((svd.s[0] - 14.0).abs() < 1e-12);
        assert!(svd.s[1].abs() < 1e-12 && svd.s[2].abs() < 1e-12);
        let utu = svd.u.t_matmul(&svd.u);
        assert!(utu.max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn symmetric_eigen_diagonalizes() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 1.0]]);
        let (vals, vecs) = symmetric_eigen(&a);
        let rec = vecs.scaled_outer(&vals, &vecs);
        assert!(rec.max_abs_diff(&a) < 1e-13);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pseudoinverse_of_singular_psd_matrix() {
        // rank one: [1 1; 1 1], pinv = [1 1; 1 1] / 4
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let p = psd_pseudoinverse(&a, 1e-12);
        assert!(p.max_abs_diff(&Matrix::from_rows(&[vec![0.25, 0.25], vec![0.25, 0.25]])) < 1e-14);
    }

    #[test]
    fn orthonormalize_handles_dependent_columns() {
        let mut m = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 0.0, 1.0]]);
        orthonormalize_columns(&mut m);
        let g = m.t_matmul(&m);
        assert!(g.max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn f32_matmul_matches_f64() {
        let a = Matrix::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![0.5f32, -1.0], vec![2.0, 0.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.as_slice(), &[4.5, 9.5, -1.0, -3.0]);
        let ct = a.t_matmul(&b);
        assert_eq!(ct[(0, 0)], 6.5);
    }
}
