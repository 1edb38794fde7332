//! Truncated singular value decompositions of matrix-free operators.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{KronError, Result};
use crate::linalg::{jacobi_svd, orthonormalize_columns, reorthogonalize, LinearOperator, Matrix};
use crate::rng::{self, streams};
use crate::scalar::{axpy, norm2, Scalar};

/// Leading singular triples, values in descending order.
#[derive(Clone, Debug)]
pub struct SvdTriple<T> {
    pub singular_values: Vec<T>,
    /// One column per value.
    pub left_vectors: Matrix<T>,
    pub right_vectors: Matrix<T>,
}

impl<T: Scalar> SvdTriple<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `max_i ||M v_i - s_i u_i||`.
    pub fn max_residual<O: LinearOperator<T> + ?Sized>(&self, op: &O) -> T {
        let mut buf = vec![T::zero(); op.nrows()];
        let mut worst = T::zero();
        for (i, &s) in self.singular_values.iter().enumerate() {
            op.apply(self.right_vectors.col(i), &mut buf);
            axpy(-s, self.left_vectors.col(i), &mut buf);
            worst = worst.max(norm2(&buf));
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Relative Ritz residual at which a triple counts as converged.
    pub tol: f64,
    /// Seed of the start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 1000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

fn lanczos_tol<T: Scalar>(requested: f64) -> T {
    T::of(requested).max(T::epsilon().sqrt())
}

fn residual_tol<T: Scalar>() -> T {
    T::of(1e-8).max(T::epsilon().sqrt() * T::of(10.0))
}

fn gaussian_vec<T: Scalar>(n: usize, rng: &mut rng::Rng) -> Vec<T> {
    (0..n)
        .map(|_| T::of(StandardNormal.sample(rng)))
        .collect()
}

/// Random unit vector orthogonal to `basis`, or `None` if the basis spans everything.
fn random_orthogonal_unit<T: Scalar>(n: usize, basis: &[Vec<T>], rng: &mut rng::Rng) -> Option<Vec<T>> {
    if basis.len() >= n {
        return None;
    }
    for _ in 0..8 {
        let mut v = gaussian_vec(n, rng);
        reorthogonalize(&mut v, basis);
        let nrm = norm2(&v);
        if nrm > T::of(1e-3) {
            v.iter_mut().for_each(|x| *x /= nrm);
            return Some(v);
        }
    }
    None
}

/// Top-`r` singular triples by Golub–Kahan–Lanczos bidiagonalization with
/// full reorthogonalization and default options.
pub fn truncated_svd<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, r: usize) -> Result<SvdTriple<T>> {
    truncated_svd_with(op, r, &LanczosOptions::default())
}

pub fn truncated_svd_with<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    r: usize,
    opts: &LanczosOptions,
) -> Result<SvdTriple<T>> {
    let (nr, nc) = (op.nrows(), op.ncols());
    let kmax = nr.min(nc);
    if r > kmax {
        return Err(KronError::InvalidConfig(format!(
            "requested {r} singular values of a {nr}x{nc} operator"
        )));
    }
    if r == 0 {
        return Ok(SvdTriple {
            singular_values: Vec::new(),
            left_vectors: Matrix::zeros(nr, 0),
            right_vectors: Matrix::zeros(nc, 0),
        });
    }
    let tol: T = lanczos_tol(opts.tol);
    let tiny = T::epsilon() * T::of(100.0);
    let mut rng = rng::substream(opts.seed, streams::SVD_START);

    let mut us: Vec<Vec<T>> = Vec::new();
    let mut vs: Vec<Vec<T>> = Vec::new();
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut scale = T::zero();
    let mut v = random_orthogonal_unit(nc, &vs, &mut rng).expect("nonempty operator");
    let mut beta_prev = T::zero();
    // Top values seen at the previous exact breakdown. A breakdown only proves
    // an invariant subspace was found, so convergence there needs a restart
    // that uncovers nothing new.
    let mut at_last_breakdown: Option<Vec<T>> = None;

    loop {
        let mut u = vec![T::zero(); nr];
        op.apply(&v, &mut u);
        if let Some(prev) = us.last() {
            axpy(-beta_prev, prev, &mut u);
        }
        reorthogonalize(&mut u, &us);
        let mut alpha = norm2(&u);
        scale = scale.max(alpha);
        vs.push(v);
        if alpha <= tiny * scale || alpha == T::zero() {
            // A v lies in the span already found; continue from a fresh direction.
            u = random_orthogonal_unit(nr, &us, &mut rng).unwrap_or_else(|| vec![T::zero(); nr]);
            alpha = T::zero();
        } else {
            u.iter_mut().for_each(|x| *x /= alpha);
        }
        us.push(u);
        alphas.push(alpha);
        let k = vs.len();

        let mut w = vec![T::zero(); nc];
        let mut beta = T::zero();
        if k < kmax {
            op.apply_transpose(&us[k - 1], &mut w);
            axpy(-alpha, &vs[k - 1], &mut w);
            reorthogonalize(&mut w, &vs);
            beta = norm2(&w);
            scale = scale.max(beta);
            if beta <= tiny * scale || beta == T::zero() {
                w = random_orthogonal_unit(nc, &vs, &mut rng).unwrap_or_else(|| vec![T::zero(); nc]);
                beta = T::zero();
            } else {
                w.iter_mut().for_each(|x| *x /= beta);
            }
        }

        let exhausted = k == kmax;
        let at_cap = k >= opts.max_iter;
        if k >= r && ((k - r).is_multiple_of(4) || exhausted || at_cap || beta == T::zero()) {
            let b = Matrix::from_fn(k, k, |i, j| {
                if i == j {
                    alphas[i]
                } else if j == i + 1 {
                    betas[i]
                } else {
                    T::zero()
                }
            });
            let small = jacobi_svd(&b);
            let s1 = small.s[0];
            let worst = (0..r).fold(T::zero(), |acc, i| acc.max(beta * small.u[(k - 1, i)].abs()));
            let mut accept = exhausted || (beta > T::zero() && worst <= tol * s1);
            if beta == T::zero() && !exhausted {
                let top = small.s[..r].to_vec();
                if let Some(prev) = &at_last_breakdown {
                    accept = prev.iter().zip(&top).all(|(&a, &b)| (a - b).abs() <= tol * s1);
                }
                at_last_breakdown = Some(top);
            }
            if accept {
                let triple = ritz_triple(&us, &vs, &small.u, &small.s, &small.v, r);
                let resid = triple.max_residual(op);
                if resid > residual_tol::<T>() * s1.max(T::min_positive_value()) {
                    return Err(KronError::ConvergenceFailure {
                        iterations: k,
                        residual: (resid / s1).as_f64(),
                    });
                }
                return Ok(triple);
            }
            if at_cap {
                return Err(KronError::ConvergenceFailure {
                    iterations: k,
                    residual: (worst / s1).as_f64(),
                });
            }
        }
        betas.push(beta);
        beta_prev = beta;
        v = w;
    }
}

fn ritz_triple<T: Scalar>(
    us: &[Vec<T>],
    vs: &[Vec<T>],
    p: &Matrix<T>,
    s: &[T],
    q: &Matrix<T>,
    r: usize,
) -> SvdTriple<T> {
    let combine = |basis: &[Vec<T>], coef: &Matrix<T>| {
        let n = basis[0].len();
        let mut out = Matrix::zeros(n, r);
        for i in 0..r {
            let col = out.col_mut(i);
            for (j, b) in basis.iter().enumerate() {
                let c = coef[(j, i)];
                if c != T::zero() {
                    axpy(c, b, col);
                }
            }
        }
        out
    };
    SvdTriple {
        singular_values: s[..r].to_vec(),
        left_vectors: combine(us, p),
        right_vectors: combine(vs, q),
    }
}

/// Randomized range finder with `power_q` subspace iterations, followed by
/// an exact SVD of the projected matrix.
pub fn randomized_svd<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    r: usize,
    oversample: usize,
    power_q: usize,
    seed: u64,
) -> Result<SvdTriple<T>> {
    let (nr, nc) = (op.nrows(), op.ncols());
    let l = r + oversample;
    if l > nr.min(nc) {
        return Err(KronError::InvalidConfig(format!(
            "rank {r} plus oversampling {oversample} exceeds dimension {}",
            nr.min(nc)
        )));
    }
    let mut rng = rng::substream(seed, streams::SKETCH);
    let omega = Matrix::from_col_major(nc, l, gaussian_vec(nc * l, &mut rng));
    let mut q = op.apply_block(&omega);
    orthonormalize_columns(&mut q);
    for _ in 0..power_q {
        let mut z = op.apply_transpose_block(&q);
        orthonormalize_columns(&mut z);
        q = op.apply_block(&z);
        orthonormalize_columns(&mut q);
    }
    // B^T = M^T Q is nc x l; its SVD gives B = V S U^T.
    let bt = op.apply_transpose_block(&q);
    let small = jacobi_svd(&bt);
    let mut left = q.matmul(&small.v);
    left.truncate_cols(r);
    let mut right = small.u;
    right.truncate_cols(r);
    Ok(SvdTriple {
        singular_values: small.s[..r].to_vec(),
        left_vectors: left,
        right_vectors: right,
    })
}

/// All singular values of a dense matrix, descending.
pub fn singular_values_full(m: &Matrix<f64>) -> Result<Vec<f64>> {
    let mat = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let mut s = mat
        .singular_values()
        .map_err(|_| KronError::ConvergenceFailure {
            iterations: 0,
            residual: f64::NAN,
        })
        .map(|v| v.to_vec())?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(n: usize, seed: u64) -> Matrix<f64> {
        let mut rng = rng::seeded(seed);
        Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn diagonal_top_two() {
        let mut d = Matrix::<f64>::zeros(3, 3);
        d[(0, 0)] = 3.0;
        d[(1, 1)] = 2.0;
        d[(2, 2)] = 1.0;
        let t = truncated_svd(&d, 2).unwrap();
        assert!((t.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((t.singular_values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_recovers_vectors() {
        let u = [0.6f64, 0.8, 0.0, 0.0];
        let v = [0.0f64, 0.0, 1.0, 0.0, 0.0];
        let m = Matrix::from_fn(4, 5, |i, j| 7.0 * u[i] * v[j]);
        let t = truncated_svd(&m, 1).unwrap();
        assert!((t.singular_values[0] - 7.0).abs() < 1e-12);
        let align_u: f64 = t.left_vectors.col(0).iter().zip(&u).map(|(a, b)| a * b).sum();
        let align_v: f64 = t.right_vectors.col(0).iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((align_u.abs() - 1.0).abs() < 1e-12 && (align_v.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_matches_full_decomposition() {
        let m = random_matrix(64, 3);
        let t = truncated_svd(&m, 6).unwrap();
        let full = singular_values_full(&m).unwrap();
        for (a, b) in t.singular_values.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(t.max_residual(&m) <= 1e-8 * t.singular_values[0]);
        let utu = t.left_vectors.t_matmul(&t.left_vectors);
        assert!(utu.max_abs_diff(&Matrix::identity(6)) < 1e-8);
    }

    #[test]
    fn exact_low_rank_with_extra_requested_values() {
        let mut rng = rng::seeded(4);
        let a = Matrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(30, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = a.matmul(&b.transpose());
        let t = truncated_svd(&m, 5).unwrap();
        assert!(t.singular_values[3] < 1e-10 * t.singular_values[0]);
        assert!(t.singular_values[4] < 1e-10 * t.singular_values[0]);
        let full = singular_values_full(&m).unwrap();
        for i in 0..3 {
            assert!((t.singular_values[i] - full[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_matrix_and_oversized_request() {
        let z = Matrix::<f64>::zeros(5, 5);
        let t = truncated_svd(&z, 2).unwrap();
        assert!(t.singular_values.iter().all(|&s| s == 0.0));
        assert!(truncated_svd(&z, 6).is_err());
        assert!(randomized_svd(&z, 2, 4, 1, 0).is_err());
    }

    #[test]
    fn randomized_exact_rank() {
        let mut rng = rng::seeded(9);
        let a = Matrix::<f64>::from_fn(80, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = Matrix::from_fn(80, 4, |_, _| rng.random_range(-1.0..1.0));
        let m = a.matmul(&b.transpose());
        let det = truncated_svd(&m, 4).unwrap();
        let rnd = randomized_svd(&m, 4, 10, 2, 1).unwrap();
        for (a, b) in det.singular_values.iter().zip(&rnd.singular_values) {
            assert!((a - b).abs() < 1e-8 * det.singular_values[0]);
        }
        let again = randomized_svd(&m, 4, 10, 2, 1).unwrap();
        assert_eq!(rnd.singular_values, again.singular_values);
    }

    #[test]
    fn power_iterations_reduce_error() {
        let mut rng = rng::seeded(10);
        let n = 120;
        let a = Matrix::from_fn(n, 5, |_, _| rng.random_range(-1.0..1.0));
        let noise = random_matrix(n, 11);
        let mut m = a.matmul(&a.transpose());
        for (x, e) in m.as_mut_slice().iter_mut().zip(noise.as_slice()) {
            *x += 2.0 * e;
        }
        let err = |t: &SvdTriple<f64>| {
            let approx = t.left_vectors.scaled_outer(&t.singular_values, &t.right_vectors);
            let mut d = m.clone();
            for (x, y) in d.as_mut_slice().iter_mut().zip(approx.as_slice()) {
                *x -= y;
            }
            d.frobenius_norm()
        };
        let q0 = randomized_svd(&m, 5, 5, 0, 2).unwrap();
        let q2 = randomized_svd(&m, 5, 5, 2, 2).unwrap();
        assert!(err(&q2) <= err(&q0));
    }

    #[test]
    fn single_precision_lanczos() {
        let m64 = random_matrix(30, 12);
        let m32 = m64.map(|v| v as f32);
        let t = truncated_svd(&m32, 3).unwrap();
        let full = singular_values_full(&m64).unwrap();
        for i in 0..3 {
            assert!((t.singular_values[i] as f64 - full[i]).abs() < 1e-3 * full[0]);
        }
    }
}
