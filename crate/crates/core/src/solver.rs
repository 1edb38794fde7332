//! Recovery of `vec(X)` from a denoised, vertex-shuffled signal matrix.
//!
//! The shuffle makes `vec(S_hat) = Theta x + d` with `d` supported on the
//! rows of displaced vertex pairs. `d` is estimated either by iterative hard
//! thresholding or by an l1 penalty, alternating with least squares in `x`.
//! Rows are processed one column block (`N` rows) at a time, optionally on a
//! random subset of blocks.

use std::cmp::Ordering;
use std::time::Instant;

use rand::seq::index::sample;

use crate::denoiser::{denoise, estimate_p, SvdMode};
use crate::error::{KronError, Result};
use crate::kron_model::{exact_exponent, Adjacency};
use crate::linalg::{psd_pseudoinverse, Matrix};
use crate::linear_map::ThetaMap;
use crate::rng::{self, streams};
use crate::scalar::{norm2, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Iht,
    Relax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// IHT step length in `(0, 1]`.
    pub eta: f64,
    /// Number of displaced vertices the IHT budget allows for.
    pub s: usize,
    /// l1 penalty; `None` uses `2 sqrt(pbar (1 - pbar)) / sqrt(N)`.
    pub gamma: Option<f64>,
    pub max_iter: usize,
    /// Stop once `||x_new - x|| <= tol ||x_new||`.
    pub tol: f64,
    /// Number of column blocks to sample; `None` uses all rows.
    pub block_count: Option<usize>,
    /// Entries kept by hard thresholding over all rows; defaults to `2 s N`.
    pub keep_count: Option<usize>,
    pub svd_mode: SvdMode,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Iht,
            eta: 1.0,
            s: 5,
            gamma: None,
            max_iter: 500,
            tol: 1e-6,
            block_count: None,
            keep_count: None,
            svd_mode: SvdMode::Deterministic,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn iht(s: usize) -> Self {
        SolverConfig {
            s,
            ..Default::default()
        }
    }

    pub fn relax(gamma: Option<f64>) -> Self {
        SolverConfig {
            method: Method::Relax,
            gamma,
            ..Default::default()
        }
    }

    /// Randomized SVD and 100 sampled blocks.
    pub fn accelerated(mut self) -> Self {
        self.svd_mode = SvdMode::randomized();
        self.block_count = Some(100);
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(KronError::InvalidConfig(msg));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("step length eta = {} is outside (0, 1]", self.eta));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0) || !g.is_finite() {
                return bad(format!("penalty gamma = {g} must be a finite nonnegative number"));
            }
            if self.method == Method::Relax && g == 0.0 {
                return bad("penalty gamma must be positive for the relaxed solver".into());
            }
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance {} must be positive", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if let Some(b) = self.block_count {
            if b == 0 || b > n {
                return bad(format!("block count {b} is outside 1..={n}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct InferenceResult<T> {
    pub p_hat: T,
    pub x_hat: Matrix<T>,
    /// Support size of the final outlier vector `d`.
    pub d_nnz: usize,
    /// Rows `q = i + N j` (0-based) where `d` is nonzero, ascending.
    pub d_support: Vec<usize>,
    pub iterations: usize,
    /// `||s - Theta x - d||` on the rows used.
    pub final_residual: T,
    pub converged: bool,
    /// Relax: penalized objective after each iteration. IHT: residual norm.
    pub trace: Vec<T>,
    pub wall_time: f64,
}

impl<T: Scalar> InferenceResult<T> {
    pub fn vec_x(&self) -> &[T] {
        self.x_hat.as_slice()
    }

    /// `||x_hat - x||^2`
    pub fn squared_error(&self, truth: &[T]) -> T {
        self.vec_x()
            .iter()
            .zip(truth)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    }
}

/// Keeps the `k` largest-magnitude entries; ties go to the lower index.
pub fn hard_threshold<T: Scalar>(v: &[T], k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    for i in top_k_indices(v, k) {
        out[i] = v[i];
    }
    out
}

fn top_k_indices<T: Scalar>(v: &[T], k: usize) -> Vec<usize> {
    let k = k.min(v.len());
    if k == 0 {
        return Vec::new();
    }
    let mut idx: Vec<u32> = (0..v.len() as u32).collect();
    let cmp = |&a: &u32, &b: &u32| -> Ordering {
        let (x, y) = (v[a as usize].abs(), v[b as usize].abs());
        y.partial_cmp(&x).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    };
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    let mut out: Vec<usize> = idx.into_iter().map(|i| i as usize).collect();
    out.sort_unstable();
    out
}

/// `sign(v) max(|v| - gamma/2, 0)`, the minimizer of `(v - d)^2 + gamma |d|`.
pub fn soft_threshold<T: Scalar>(v: &[T], gamma: T) -> Vec<T> {
    let h = gamma / T::of(2.0);
    v.iter().map(|&x| soft(x, h)).collect()
}

#[inline]
fn soft<T: Scalar>(x: T, h: T) -> T {
    if x > h {
        x - h
    } else if x < -h {
        x + h
    } else {
        T::zero()
    }
}

/// Least squares restricted to a set of column blocks.
struct BlockSystem<'a, T> {
    theta: &'a ThetaMap<T>,
    cols: Vec<usize>,
    rhs: Vec<T>,
    theta_t_rhs: Vec<T>,
    gram_pinv: Matrix<T>,
}

impl<'a, T: Scalar> BlockSystem<'a, T> {
    fn new(theta: &'a ThetaMap<T>, cols: Vec<usize>, rhs: Vec<T>) -> Result<Self> {
        let gram = theta.theta_gram(Some(&cols))?;
        let gram_pinv = psd_pseudoinverse(&gram, T::of(1e-12));
        let theta_t_rhs = theta.theta_adjoint_blocks(&rhs, Some(&cols))?;
        Ok(BlockSystem {
            theta,
            cols,
            rhs,
            theta_t_rhs,
            gram_pinv,
        })
    }

    fn n(&self) -> usize {
        self.theta.n()
    }

    /// Row `q = i + N j` for position `pos` in block layout.
    fn row_of(&self, pos: usize) -> (usize, usize) {
        let n = self.n();
        (pos % n, self.cols[pos / n])
    }

    /// `x = G^+ Theta^T (rhs - d)` with `d` given by its support.
    fn solve(&self, d: &[T], support: &[usize]) -> Vec<T> {
        let td = self
            .theta
            .theta_adjoint_sparse(support.iter().map(|&p| {
                let (i, j) = self.row_of(p);
                (i, j, d[p])
            }));
        let b: Vec<T> = self.theta_t_rhs.iter().zip(&td).map(|(&a, &c)| a - c).collect();
        self.gram_pinv.matvec(&b)
    }

    /// `rhs - Theta x`
    fn residual(&self, x: &[T], out: &mut [T]) {
        self.theta.theta_apply_into(x, &self.cols, out);
        for (o, &s) in out.iter_mut().zip(&self.rhs) {
            *o = s - *o;
        }
    }
}

fn relative_change<T: Scalar>(new: &[T], old: &[T]) -> T {
    let diff = new.iter().zip(old).fold(T::zero(), |a, (&x, &y)| a + (x - y) * (x - y)).sqrt();
    let base = norm2(new);
    if base == T::zero() {
        diff
    } else {
        diff / base
    }
}

fn default_gamma<T: Scalar>(pbar: T, n: usize) -> T {
    T::of(2.0) * (pbar * (T::one() - pbar)).sqrt() / T::of_usize(n).sqrt()
}

struct Outcome<T> {
    x: Vec<T>,
    d_support: Vec<usize>,
    iterations: usize,
    final_residual: T,
    converged: bool,
    trace: Vec<T>,
}

fn run<T: Scalar>(sys: &BlockSystem<T>, cfg: &SolverConfig) -> Outcome<T> {
    let n = sys.n();
    let rows = sys.rhs.len();
    let mm = sys.theta.dim();
    let mut x = vec![T::zero(); mm];
    let mut d = vec![T::zero(); rows];
    let mut support: Vec<usize> = Vec::new();
    let mut r = vec![T::zero(); rows];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let keep = {
        let total = cfg.keep_count.unwrap_or(2 * cfg.s * n) as f64;
        let frac = sys.cols.len() as f64 / n as f64;
        ((total * frac).round() as usize).min(rows)
    };
    let eta = T::of(cfg.eta);
    let gamma = match cfg.gamma {
        Some(g) => T::of(g),
        None => default_gamma(sys.theta.p().powi(sys.theta.k() as i32), n),
    };
    let half_gamma = gamma / T::of(2.0);

    for it in 0..cfg.max_iter {
        sys.residual(&x, &mut r);
        match cfg.method {
            Method::Iht => {
                if cfg.eta < 1.0 {
                    for (ri, &di) in r.iter_mut().zip(&d) {
                        *ri = (T::one() - eta) * di + eta * *ri;
                    }
                }
                for &p in &support {
                    d[p] = T::zero();
                }
                support = top_k_indices(&r, keep);
                for &p in &support {
                    d[p] = r[p];
                }
            }
            Method::Relax => {
                if it > 0 {
                    trace.push(relax_objective(&r, &d, gamma));
                }
                support.clear();
                for (p, (&ri, di)) in r.iter().zip(d.iter_mut()).enumerate() {
                    *di = soft(ri, half_gamma);
                    if *di != T::zero() {
                        support.push(p);
                    }
                }
            }
        }
        let x_new = sys.solve(&d, &support);
        let change = relative_change(&x_new, &x);
        x = x_new;
        iterations = it + 1;
        if cfg.method == Method::Iht {
            sys.residual(&x, &mut r);
            let res = support.iter().fold(norm2(&r).powi(2), |acc, &p| acc - r[p] * r[p] + (r[p] - d[p]) * (r[p] - d[p]));
            trace.push(res.max(T::zero()).sqrt());
        }
        if change <= T::of(cfg.tol) {
            converged = true;
            break;
        }
    }
    sys.residual(&x, &mut r);
    if cfg.method == Method::Relax {
        trace.push(relax_objective(&r, &d, gamma));
    }
    for &p in &support {
        r[p] -= d[p];
    }
    let final_residual = norm2(&r);
    let d_support = {
        let mut rows: Vec<usize> = support
            .iter()
            .map(|&p| {
                let (i, j) = sys.row_of(p);
                i + n * j
            })
            .collect();
        rows.sort_unstable();
        rows
    };
    Outcome {
        x,
        d_support,
        iterations,
        final_residual,
        converged,
        trace,
    }
}

/// `||r - d||^2 + gamma ||d||_1`
fn relax_objective<T: Scalar>(r: &[T], d: &[T], gamma: T) -> T {
    r.iter()
        .zip(d)
        .fold(T::zero(), |acc, (&ri, &di)| acc + (ri - di) * (ri - di) + gamma * di.abs())
}

/// Column blocks to use: all of them, or a sorted uniform sample.
fn choose_blocks(n: usize, cfg: &SolverConfig) -> Vec<usize> {
    match cfg.block_count {
        None => (0..n).collect(),
        Some(b) => {
            let mut rng = rng::substream(cfg.seed, streams::BLOCKS);
            let mut cols = sample(&mut rng, n, b.min(n)).into_vec();
            cols.sort_unstable();
            cols
        }
    }
}

/// Least squares `x = (Theta^T Theta)^+ Theta^T (vec(S) - d)` over all rows.
pub fn solve_ls<T: Scalar>(s_hat: &Matrix<T>, theta: &ThetaMap<T>, d: &[T], blocks: Option<&[usize]>) -> Result<Vec<T>> {
    let n = theta.n();
    if s_hat.nrows() != n || s_hat.ncols() != n {
        return Err(KronError::DimensionMismatch {
            expected: n * n,
            found: s_hat.nrows() * s_hat.ncols(),
        });
    }
    if d.len() != n * n {
        return Err(KronError::DimensionMismatch {
            expected: n * n,
            found: d.len(),
        });
    }
    let cols: Vec<usize> = match blocks {
        Some(b) => b.to_vec(),
        None => (0..n).collect(),
    };
    let rhs: Vec<T> = cols
        .iter()
        .flat_map(|&j| (0..n).map(move |i| s_hat[(i, j)] - d[i + n * j]))
        .collect();
    let sys = BlockSystem::new(theta, cols, rhs)?;
    Ok(sys.solve(&[], &[]))
}

fn solve_with_method<T: Scalar>(
    s_hat: &Matrix<T>,
    theta: &ThetaMap<T>,
    config: &SolverConfig,
    method: Method,
) -> Result<InferenceResult<T>> {
    let start = Instant::now();
    let n = theta.n();
    if s_hat.nrows() != n || s_hat.ncols() != n {
        return Err(KronError::DimensionMismatch {
            expected: n * n,
            found: s_hat.nrows() * s_hat.ncols(),
        });
    }
    if config.method != method {
        return Err(KronError::InvalidConfig(format!("config selects {:?}", config.method)));
    }
    config.validate(n)?;
    let cols = choose_blocks(n, config);
    let rhs: Vec<T> = cols.iter().flat_map(|&j| s_hat.col(j).iter().copied()).collect();
    let sys = BlockSystem::new(theta, cols, rhs)?;
    Ok(assemble(run(&sys, config), theta, theta.p(), start))
}

fn assemble<T: Scalar>(out: Outcome<T>, theta: &ThetaMap<T>, p_hat: T, start: Instant) -> InferenceResult<T> {
    let m = theta.m();
    InferenceResult {
        p_hat,
        x_hat: Matrix::from_col_major(m, m, out.x),
        d_nnz: out.d_support.len(),
        d_support: out.d_support,
        iterations: out.iterations,
        final_residual: out.final_residual,
        converged: out.converged,
        trace: out.trace,
        wall_time: start.elapsed().as_secs_f64(),
    }
}

/// Iterative hard thresholding on a dense denoised signal.
pub fn solve_iht<T: Scalar>(s_hat: &Matrix<T>, theta: &ThetaMap<T>, config: &SolverConfig) -> Result<InferenceResult<T>> {
    solve_with_method(s_hat, theta, config, Method::Iht)
}

/// Alternating l1-penalized solve on a dense denoised signal.
pub fn solve_relax<T: Scalar>(s_hat: &Matrix<T>, theta: &ThetaMap<T>, config: &SolverConfig) -> Result<InferenceResult<T>> {
    solve_with_method(s_hat, theta, config, Method::Relax)
}

/// Estimates `p` and `X` from an adjacency whose size is a power of `m`.
pub fn infer<T: Scalar>(a: &Adjacency, m: usize, config: &SolverConfig) -> Result<InferenceResult<T>> {
    let start = Instant::now();
    let n = a.n();
    let k = exact_exponent(n, m).ok_or_else(|| {
        KronError::InvalidConfig(format!("graph size {n} is not a power of the initiator side {m}"))
    })?;
    config.validate(n)?;
    let est = estimate_p(a, k)?;
    let den = denoise::<T>(a, m, config.svd_mode, config.seed)?;
    let p_hat = T::of(est.p_hat);
    let theta = ThetaMap::new(m, k, p_hat)?;
    let cols = choose_blocks(n, config);
    let rhs = den.columns(&cols);
    let sys = BlockSystem::new(&theta, cols, rhs)?;
    Ok(assemble(run(&sys, config), &theta, p_hat, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_map::build_signal_recursive;
    use proptest::prelude::*;

    #[test]
    fn hard_threshold_cases() {
        assert_eq!(hard_threshold(&[3.0, -5.0, 1.0], 2), vec![3.0, -5.0, 0.0]);
        assert_eq!(hard_threshold(&[3.0, -5.0, 1.0], 0), vec![0.0; 3]);
        assert_eq!(hard_threshold(&[3.0, -5.0, 1.0], 3), vec![3.0, -5.0, 1.0]);
        assert_eq!(hard_threshold(&[2.0, -2.0, 2.0], 2), vec![2.0, -2.0, 0.0]);
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(&[3.0, -1.0, 0.2], 1.0), vec![2.5, -0.5, 0.0]);
        assert_eq!(soft_threshold(&[3.0, -1.0, 0.2], 0.0), vec![3.0, -1.0, 0.2]);
        assert_eq!(soft_threshold(&[0.3, -0.4], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn least_squares_cases() {
        let theta = ThetaMap::new(2, 3, 0.6f64).unwrap();
        let zero = Matrix::zeros(8, 8);
        let d = vec![0.0; 64];
        assert!(solve_ls(&zero, &theta, &d, None).unwrap().iter().all(|&v| v == 0.0));
        let ones = Matrix::from_col_major(8, 8, theta.theta_apply(&[1.0; 4]).unwrap());
        for v in solve_ls(&ones, &theta, &d, None).unwrap() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        let xs = [2.0f64, -1.0, 0.5, 3.0];
        let mut s = Matrix::from_col_major(8, 8, theta.theta_apply(&xs).unwrap());
        let mut d = vec![0.0; 64];
        s[(3, 5)] += 0.7;
        d[3 + 8 * 5] = 0.7;
        for (v, w) in solve_ls(&s, &theta, &d, None).unwrap().iter().zip(&xs) {
            assert!((v - w).abs() < 1e-10);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate(16).is_ok());
        assert!(SolverConfig { eta: 0.0, ..Default::default() }.validate(16).is_err());
        assert!(SolverConfig { eta: 1.5, ..Default::default() }.validate(16).is_err());
        assert!(SolverConfig::relax(Some(0.0)).validate(16).is_err());
        assert!(SolverConfig::relax(Some(-1.0)).validate(16).is_err());
        assert!(SolverConfig { block_count: Some(17), ..Default::default() }.validate(16).is_err());
        assert!(SolverConfig { block_count: Some(0), ..Default::default() }.validate(16).is_err());
    }

    fn noiseless(m: usize, k: usize, p: f64, x: &[f64]) -> (Matrix<f64>, ThetaMap<f64>) {
        let xm = Matrix::from_col_major(m, m, x.to_vec());
        let s = build_signal_recursive(p, &xm, m, k).unwrap();
        (s.into_matrix(), ThetaMap::new(m, k, p).unwrap())
    }

    #[test]
    fn exact_recovery_both_methods() {
        let x = [5.25, 0.25, 2.25, -7.75];
        let (s, theta) = noiseless(2, 8, 0.8, &x);
        let cfg = SolverConfig { tol: 1e-12, ..SolverConfig::iht(5) };
        let res = solve_iht(&s, &theta, &cfg).unwrap();
        assert!(res.converged);
        for (a, b) in res.vec_x().iter().zip(&x) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let cfg = SolverConfig { tol: 1e-12, ..SolverConfig::relax(None) };
        let res = solve_relax(&s, &theta, &cfg).unwrap();
        for (a, b) in res.vec_x().iter().zip(&x) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(solve_relax(&s, &theta, &SolverConfig::iht(5)).is_err());
    }

    #[test]
    fn huge_penalty_is_plain_least_squares() {
        let (mut s, theta) = noiseless(2, 5, 0.5, &[1.0, -2.0, 3.0, 0.5]);
        s[(1, 2)] += 0.01;
        let res = solve_relax(&s, &theta, &SolverConfig::relax(Some(1e6))).unwrap();
        assert_eq!(res.d_nnz, 0);
        let ls = solve_ls(&s, &theta, &vec![0.0; 32 * 32], None).unwrap();
        for (a, b) in res.vec_x().iter().zip(&ls) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn all_blocks_sampled_is_bitwise_identical() {
        let (mut s, theta) = noiseless(2, 6, 0.7, &[3.0, -1.0, 2.0, -4.0]);
        for i in 0..64 {
            s[(i, (i * 7) % 64)] += 0.003 * (i % 5) as f64;
        }
        for cfg in [SolverConfig::iht(2), SolverConfig::relax(Some(1e-3))] {
            let full = solve_with_method(&s, &theta, &cfg, cfg.method).unwrap();
            let sampled_cfg = SolverConfig { block_count: Some(64), seed: 99, ..cfg.clone() };
            let sampled = solve_with_method(&s, &theta, &sampled_cfg, cfg.method).unwrap();
            assert_eq!(full.vec_x(), sampled.vec_x());
            assert_eq!(full.d_support, sampled.d_support);
            assert_eq!(full.iterations, sampled.iterations);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn relax_objective_never_increases(seed in 0u64..1000, gamma in 1e-4f64..1e-1) {
            use rand::Rng;
            let mut rng = rng::seeded(seed);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-6.0..6.0)).collect();
            let (mut s, theta) = noiseless(2, 5, 0.6, &x);
            for v in s.as_mut_slice().iter_mut() {
                *v += rng.random_range(-0.02..0.02);
            }
            let cfg = SolverConfig { max_iter: 50, tol: 1e-14, ..SolverConfig::relax(Some(gamma)) };
            let res = solve_relax(&s, &theta, &cfg).unwrap();
            for w in res.trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn iht_support_within_budget(seed in 0u64..1000, sparsity in 0usize..4) {
            use rand::Rng;
            let mut rng = rng::seeded(seed);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-6.0..6.0)).collect();
            let (mut s, theta) = noiseless(2, 5, 0.6, &x);
            for v in s.as_mut_slice().iter_mut() {
                *v += rng.random_range(-0.02..0.02);
            }
            let res = solve_iht(&s, &theta, &SolverConfig::iht(sparsity)).unwrap();
            prop_assert!(res.d_nnz <= 2 * sparsity * 32);
        }

        #[test]
        fn hard_threshold_keeps_exactly_k_largest(v in proptest::collection::vec(-10.0f64..10.0, 1..40), k in 0usize..40) {
            let out = hard_threshold(&v, k);
            let kept = out.iter().filter(|&&x| x != 0.0).count();
            prop_assert!(kept <= k.min(v.len()));
            let min_kept = v.iter().zip(&out).filter(|(_, &o)| o != 0.0).map(|(a, _)| a.abs()).fold(f64::INFINITY, f64::min);
            let max_dropped = v.iter().zip(&out).filter(|(_, &o)| o == 0.0).map(|(a, _)| a.abs()).fold(0.0, f64::max);
            if kept > 0 && kept < v.len() {
                prop_assert!(min_kept >= max_dropped);
            }
        }
    }
}
