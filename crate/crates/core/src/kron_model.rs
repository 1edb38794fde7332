//! Kronecker graph model: initiators, Kronecker powers, Bernoulli sampling
//! and vertex permutations.
//!
//! Index convention: vertex `i` (0-based here, 1-based in files) is written
//! in base `m` with digit 0 the least significant. Digit `l` selects the row
//! (or column) of the initiator in the `l`-th factor counted from the right,
//! so `P_K = P_{K-1} (x) P_1` places `P_1` on digit 0.

use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{KronError, Result};
use crate::linalg::Matrix;
use crate::rng::{self, streams};
use crate::scalar::Scalar;

/// Largest graph with dense storage.
pub const MAX_VERTICES: usize = 8192;

/// `m^k`, rejecting anything above [`MAX_VERTICES`].
pub fn checked_size(m: usize, k: usize) -> Result<usize> {
    let size = (m as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if size > MAX_VERTICES as u128 {
        return Err(KronError::SizeOverflow {
            size,
            cap: MAX_VERTICES,
        });
    }
    Ok(size as usize)
}

/// Exact `K` with `m^K == n`, if any.
pub fn exact_exponent(n: usize, m: usize) -> Option<usize> {
    if m < 2 || n == 0 {
        return (m == 1 && n == 1).then_some(1);
    }
    let mut k = 0;
    let mut v = 1usize;
    while v < n {
        v = v.checked_mul(m)?;
        k += 1;
    }
    (v == n && k >= 1).then_some(k)
}

/// Model parameters `(m, K, p, X)` with initiator `P_uv = p + X_uv / sqrt(N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphParams<T> {
    m: usize,
    k: usize,
    n: usize,
    p: T,
    x: Matrix<T>,
}

impl<T: Scalar> GraphParams<T> {
    pub fn new(m: usize, k: usize, p: T, x: Matrix<T>) -> Result<Self> {
        if m < 2 {
            return Err(KronError::ParameterOutOfRange(format!("initiator side m = {m} must be at least 2")));
        }
        if k < 1 {
            return Err(KronError::ParameterOutOfRange("exponent K must be at least 1".into()));
        }
        if x.nrows() != m || x.ncols() != m {
            return Err(KronError::DimensionMismatch {
                expected: m * m,
                found: x.nrows() * x.ncols(),
            });
        }
        let n = checked_size(m, k)?;
        build_initiator(m, k, p, &x)?;
        Ok(GraphParams { m, k, n, p, x })
    }

    /// `x` is `vec(X)`, column-major (entry `u + m v` is `X_uv`).
    pub fn from_vec(m: usize, k: usize, p: T, x: &[T]) -> Result<Self> {
        if x.len() != m * m {
            return Err(KronError::DimensionMismatch {
                expected: m * m,
                found: x.len(),
            });
        }
        Self::new(m, k, p, Matrix::from_col_major(m, m, x.to_vec()))
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> T {
        self.p
    }
    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }
    pub fn vec_x(&self) -> Vec<T> {
        self.x.as_slice().to_vec()
    }

    /// The initiator `P_1`; always valid for constructed parameters.
    pub fn initiator(&self) -> Matrix<T> {
        build_initiator(self.m, self.k, self.p, &self.x).expect("validated at construction")
    }

    /// Average edge probability `p^K` of the underlying Erdős–Rényi base.
    pub fn pbar(&self) -> T {
        self.p.powi(self.k as i32)
    }
}

/// `[P_1]_uv = p + X_uv / sqrt(m^K)`, each entry required to lie in (0, 1).
pub fn build_initiator<T: Scalar>(m: usize, k: usize, p: T, x: &Matrix<T>) -> Result<Matrix<T>> {
    if !(p > T::zero() && p < T::one()) {
        return Err(KronError::ParameterOutOfRange(format!("base probability p = {p} is outside (0, 1)")));
    }
    let n = (m as f64).powi(k as i32);
    let scale = T::of(n.sqrt()).recip();
    let mut out = Matrix::zeros(m, m);
    for v in 0..m {
        for u in 0..m {
            let puv = p + x[(u, v)] * scale;
            if !(puv > T::zero() && puv < T::one()) {
                return Err(KronError::ParameterOutOfRange(format!(
                    "initiator entry P[{},{}] = {puv} is outside (0, 1)",
                    u + 1,
                    v + 1
                )));
            }
            out[(u, v)] = puv;
        }
    }
    Ok(out)
}

/// Dense `N x N` edge-probability matrix `P_K`.
#[derive(Clone, Debug)]
pub struct ProbabilityMatrix<T> {
    k: usize,
    entries: Matrix<T>,
}

impl<T: Scalar> ProbabilityMatrix<T> {
    pub fn from_matrix(entries: Matrix<T>, k: usize) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(KronError::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if let Some(bad) = entries.as_slice().iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
            return Err(KronError::ParameterOutOfRange(format!("probability {bad} is outside [0, 1]")));
        }
        Ok(ProbabilityMatrix { k, entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[(i, j)]
    }
    pub fn matrix(&self) -> &Matrix<T> {
        &self.entries
    }
    pub fn into_matrix(self) -> Matrix<T> {
        self.entries
    }
}

/// `K`-fold Kronecker power of a square initiator with entries in [0, 1].
pub fn kronecker_power<T: Scalar>(p1: &Matrix<T>, k: usize) -> Result<ProbabilityMatrix<T>> {
    let m = p1.nrows();
    if m != p1.ncols() {
        return Err(KronError::DimensionMismatch {
            expected: m,
            found: p1.ncols(),
        });
    }
    if k < 1 {
        return Err(KronError::ParameterOutOfRange("exponent K must be at least 1".into()));
    }
    checked_size(m, k)?;
    let mut cur = p1.clone();
    for _ in 1..k {
        let s = cur.nrows();
        let mut next = Matrix::zeros(s * m, s * m);
        for c in 0..s {
            for d in 0..m {
                let col = next.col_mut(c * m + d);
                for a in 0..s {
                    let w = cur[(a, c)];
                    for b in 0..m {
                        col[a * m + b] = w * p1[(b, d)];
                    }
                }
            }
        }
        cur = next;
    }
    ProbabilityMatrix::from_matrix(cur, k)
}

/// Binary adjacency matrix, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    directed: bool,
    seed: Option<u64>,
    data: Vec<u8>,
}

impl Adjacency {
    pub fn zeros(n: usize, directed: bool) -> Self {
        Adjacency {
            n,
            directed,
            seed: None,
            data: vec![0; n * n],
        }
    }

    /// Row-major 0/1 bytes.
    pub fn from_row_major(n: usize, data: Vec<u8>, directed: bool) -> Result<Self> {
        if data.len() != n * n {
            return Err(KronError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|&b| b > 1) {
            return Err(KronError::InvalidFormat(format!("byte {} at offset {pos} is not 0 or 1", data[pos])));
        }
        let a = Adjacency {
            n,
            directed,
            seed: None,
            data,
        };
        if !directed && !a.is_symmetric() {
            return Err(KronError::InvalidFormat("undirected adjacency is not symmetric".into()));
        }
        Ok(a)
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_row_major(n, data, true)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn is_directed(&self) -> bool {
        self.directed
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.n + j] = v as u8;
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn edge_count(&self) -> u64 {
        self.data.iter().map(|&b| b as u64).sum()
    }

    /// `1^T A 1 / N^2`
    pub fn grand_mean(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.edge_count() as f64 / (self.n as f64 * self.n as f64)
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.row(i).iter().map(|&b| b as u64).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n];
        for i in 0..self.n {
            for (o, &b) in out.iter_mut().zip(self.row(i)) {
                *o += b as u64;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Dense column-major copy with 0/1 entries.
    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.n, self.n, |i, j| if self.get(i, j) == 1 { T::one() } else { T::zero() })
    }

    /// 1-based `(i, j)` pairs of present entries in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(move |(q, _)| (q / self.n + 1, q % self.n + 1))
    }

    /// 8-byte little-endian `N`, then `N^2` bytes row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)
            .map_err(|e| KronError::InvalidFormat(format!("missing size header: {e}")))?;
        let n = u64::from_le_bytes(header);
        if n > MAX_VERTICES as u64 {
            return Err(KronError::SizeOverflow {
                size: n as u128,
                cap: MAX_VERTICES,
            });
        }
        let n = n as usize;
        let mut data = Vec::with_capacity(n * n);
        r.read_to_end(&mut data)?;
        if data.len() != n * n {
            return Err(KronError::InvalidFormat(format!(
                "expected {} adjacency bytes after header, found {}",
                n * n,
                data.len()
            )));
        }
        let mut a = Self::from_row_major(n, data, true)?;
        a.directed = !a.is_symmetric();
        Ok(a)
    }

    /// One `i j` pair (1-based) per line, preceded by a `# nodes N` line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# nodes {}", self.n)?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    /// Reads an edge list. Lines starting with `#` are comments; a
    /// `# nodes N` comment fixes the vertex count, otherwise the largest
    /// endpoint is used.
    pub fn read_edge_list<R: Read>(r: R) -> Result<Self> {
        let mut declared = None;
        let mut pairs = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if let Some(rest) = t.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("nodes") {
                    declared = it.next().and_then(|v| v.parse::<usize>().ok());
                }
                continue;
            }
            if t.is_empty() {
                continue;
            }
            let mut it = t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|v| v.parse::<usize>().ok())
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| KronError::InvalidFormat(format!("line {}: expected two 1-based indices", lineno + 1)))
            };
            let i = parse(it.next())?;
            let j = parse(it.next())?;
            pairs.push((i, j));
        }
        let max_index = pairs.iter().map(|&(i, j)| i.max(j)).max().unwrap_or(0);
        let n = declared.unwrap_or(max_index);
        if max_index > n {
            return Err(KronError::IndexOutOfRange(format!("vertex {max_index} exceeds declared count {n}")));
        }
        if n > MAX_VERTICES {
            return Err(KronError::SizeOverflow {
                size: n as u128,
                cap: MAX_VERTICES,
            });
        }
        let mut a = Adjacency::zeros(n, true);
        for (i, j) in pairs {
            a.set(i - 1, j - 1, true);
        }
        a.directed = !a.is_symmetric();
        Ok(a)
    }
}

/// Draws each entry independently from `Bern(P_ij)`.
///
/// Row `i` uses its own substream of `seed`. Undirected graphs sample the
/// upper triangle including the diagonal and mirror it.
pub fn sample_adjacency<T: Scalar>(p: &ProbabilityMatrix<T>, seed: u64, directed: bool) -> Adjacency {
    let n = p.n();
    let probs = p.matrix();
    let mut a = Adjacency::zeros(n, directed);
    a.seed = Some(seed);
    for i in 0..n {
        let mut rng = rng::substream(seed, i as u64);
        let start = if directed { 0 } else { i };
        for j in start..n {
            let u: f64 = rng.random();
            if u < probs[(i, j)].as_f64() {
                a.data[i * n + j] = 1;
                if !directed {
                    a.data[j * n + i] = 1;
                }
            }
        }
    }
    a
}

/// Vertex permutation; `map[i]` is the new position of vertex `i` (0-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { map: (0..n).collect() }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &t in &map {
            if t >= n || std::mem::replace(&mut seen[t], true) {
                return Err(KronError::InvalidFormat(format!("{t} breaks the bijection on 0..{n}")));
            }
        }
        Ok(Permutation { map })
    }

    /// 1-based images, as written in permutation files.
    pub fn from_one_based(map: &[usize]) -> Result<Self> {
        if map.contains(&0) {
            return Err(KronError::InvalidFormat("permutation entries are 1-based".into()));
        }
        Self::from_map(map.iter().map(|&v| v - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
    pub fn map(&self) -> &[usize] {
        &self.map
    }
    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &t) in self.map.iter().enumerate() {
            inv[t] = i;
        }
        Permutation { map: inv }
    }

    /// Number of displaced vertices, `d_H(Pi, I)`.
    pub fn hamming_distance(&self) -> usize {
        self.map.iter().enumerate().filter(|&(i, &t)| i != t).count()
    }

    /// `Pi M Pi^{-1}` for a dense matrix: entry `(i, j)` moves to `(map[i], map[j])`.
    pub fn conjugate<T: Scalar>(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.map.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(KronError::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            let tj = self.map[j];
            let src = m.col(j);
            let dst = out.col_mut(tj);
            for (i, &v) in src.iter().enumerate() {
                dst[self.map[i]] = v;
            }
        }
        Ok(out)
    }
}

/// Moves `floor(rho N)` uniformly chosen vertices by a uniformly random
/// derangement among themselves (no chosen vertex stays put when at least
/// two are chosen).
pub fn random_sparse_permutation(n: usize, rho: f64, seed: u64) -> Result<Permutation> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(KronError::ParameterOutOfRange(format!("shuffle fraction {rho} is outside [0, 1]")));
    }
    let count = ((rho * n as f64).floor() as usize).min(n);
    let mut perm = Permutation::identity(n);
    if count < 2 {
        return Ok(perm);
    }
    let mut rng = rng::substream(seed, streams::PERMUTATION);
    let chosen = sample_indices(&mut rng, n, count).into_vec();
    let mut order: Vec<usize> = (0..count).collect();
    loop {
        order.shuffle(&mut rng);
        if order.iter().enumerate().all(|(t, &s)| t != s) {
            break;
        }
    }
    for (t, &s) in order.iter().enumerate() {
        perm.map[chosen[t]] = chosen[s];
    }
    Ok(perm)
}

/// Output entry `(Pi(i), Pi(j))` equals input entry `(i, j)`.
pub fn apply_permutation(a: &Adjacency, perm: &Permutation) -> Result<Adjacency> {
    let n = a.n();
    if perm.len() != n {
        return Err(KronError::DimensionMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    let mut out = Adjacency::zeros(n, a.directed);
    out.seed = a.seed;
    for i in 0..n {
        let ti = perm.image(i);
        for (j, &b) in a.row(i).iter().enumerate() {
            out.data[ti * n + perm.image(j)] = b;
        }
    }
    Ok(out)
}

/// A sampled graph together with the vertex shuffle applied to it.
#[derive(Clone, Debug)]
pub struct KroneckerSample {
    pub adjacency: Adjacency,
    pub permutation: Permutation,
}

/// Samples `A ~ Bern(P_K)` and shuffles a fraction `shuffle` of its vertices.
pub fn generate<T: Scalar>(params: &GraphParams<T>, shuffle: f64, seed: u64, directed: bool) -> Result<KroneckerSample> {
    let pk = kronecker_power(&params.initiator(), params.k())?;
    let permutation = random_sparse_permutation(params.n(), shuffle, seed)?;
    let sampled = sample_adjacency(&pk, seed, directed);
    let adjacency = apply_permutation(&sampled, &permutation)?;
    Ok(KroneckerSample {
        adjacency,
        permutation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(m: usize, k: usize, p: f64, x: &[f64]) -> Result<GraphParams<f64>> {
        GraphParams::from_vec(m, k, p, x)
    }

    #[test]
    fn initiator_zero_deviation_is_constant() {
        let g = params(2, 10, 0.7, &[0.0; 4]).unwrap();
        assert!(g.initiator().as_slice().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn initiator_applies_scaled_deviation() {
        let g = params(2, 10, 0.7, &[5.25, 0.0, 0.0, 0.0]).unwrap();
        assert!((g.initiator()[(0, 0)] - 0.8640625).abs() < 1e-15);
    }

    #[test]
    fn initiator_out_of_range_is_rejected() {
        let err = params(2, 2, 0.5, &[10.0, 0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, KronError::ParameterOutOfRange(_)));
        assert!(params(2, 2, 1.1, &[0.0; 4]).is_err());
        assert!(params(1, 2, 0.5, &[0.0]).is_err());
        assert!(params(2, 0, 0.5, &[0.0; 4]).is_err());
    }

    #[test]
    fn size_cap_is_enforced() {
        assert!(matches!(checked_size(2, 14), Err(KronError::SizeOverflow { .. })));
        assert_eq!(checked_size(2, 13).unwrap(), 8192);
        assert!(checked_size(3, 200).is_err());
        assert_eq!(exact_exponent(1024, 2), Some(10));
        assert_eq!(exact_exponent(1000, 2), None);
        assert_eq!(exact_exponent(2, 2), Some(1));
    }

    #[test]
    fn kronecker_power_k1_is_identity_operation() {
        let p1 = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert_eq!(kronecker_power(&p1, 1).unwrap().matrix(), &p1);
    }

    #[test]
    fn kronecker_power_constant_initiator() {
        let p1 = Matrix::from_fn(3, 3, |_, _| 0.6);
        let pk = kronecker_power(&p1, 4).unwrap();
        let want = 0.6f64.powi(4);
        assert!(pk.matrix().as_slice().iter().all(|&v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn kronecker_power_two_levels_by_hand() {
        let p1 = Matrix::from_rows(&[vec![0.9f64, 0.5], vec![0.5, 0.1]]);
        let pk = kronecker_power(&p1, 2).unwrap();
        assert!((pk.get(0, 0) - 0.81).abs() < 1e-15);
        assert!((pk.get(3, 3) - 0.01).abs() < 1e-15);
        assert!((pk.get(0, 3) - 0.25).abs() < 1e-15);
    }

    /// Entry `(i, j)` as the product over base-m digit pairs.
    fn digit_product(p1: &Matrix<f64>, k: usize, mut i: usize, mut j: usize) -> f64 {
        let m = p1.nrows();
        let mut prod = 1.0;
        for _ in 0..k {
            prod *= p1[(i % m, j % m)];
            i /= m;
            j /= m;
        }
        prod
    }

    #[test]
    fn kronecker_power_matches_digit_product_oracle() {
        let mut rng = crate::rng::seeded(11);
        for m in 2..=3 {
            for k in 1..=5 {
                let p1 = Matrix::from_fn(m, m, |_, _| 0.05 + 0.9 * rng.random::<f64>());
                let pk = kronecker_power(&p1, k).unwrap();
                let n = pk.n();
                for i in 0..n {
                    for j in 0..n {
                        let want = digit_product(&p1, k, i, j);
                        assert!((pk.get(i, j) - want).abs() <= 1e-14 * want);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_bernoulli_probabilities() {
        let ones = ProbabilityMatrix::from_matrix(Matrix::from_fn(8, 8, |_, _| 1.0), 3).unwrap();
        assert_eq!(sample_adjacency(&ones, 5, true).edge_count(), 64);
        let zeros = ProbabilityMatrix::from_matrix(Matrix::<f64>::zeros(8, 8), 3).unwrap();
        assert_eq!(sample_adjacency(&zeros, 5, true).edge_count(), 0);
    }

    #[test]
    fn sampling_concentrates_around_mean() {
        let half = ProbabilityMatrix::from_matrix(Matrix::from_fn(1024, 1024, |_, _| 0.5), 10).unwrap();
        let a = sample_adjacency(&half, 42, true);
        assert!((a.grand_mean() - 0.5).abs() < 0.002);
    }

    #[test]
    fn sampling_is_seed_deterministic_and_undirected_is_symmetric() {
        let g = params(2, 6, 0.6, &[1.0, -1.0, 0.5, -0.5]).unwrap();
        let pk = kronecker_power(&g.initiator(), 6).unwrap();
        assert_eq!(sample_adjacency(&pk, 9, true), sample_adjacency(&pk, 9, true));
        assert_ne!(sample_adjacency(&pk, 9, true), sample_adjacency(&pk, 10, true));
        let u = sample_adjacency(&pk, 9, false);
        assert!(u.is_symmetric());
        assert!(!u.is_directed());
    }

    #[test]
    fn erdos_renyi_limit_density() {
        let g = params(2, 11, 0.8, &[0.0; 4]).unwrap();
        let pk = kronecker_power(&g.initiator(), 11).unwrap();
        let a = sample_adjacency(&pk, 3, true);
        let q = g.pbar();
        let n2 = (g.n() * g.n()) as f64;
        let sigma = (q * (1.0 - q) / n2).sqrt();
        assert!((a.grand_mean() - q).abs() < 3.0 * sigma);
    }

    #[test]
    fn permutation_edge_cases() {
        assert_eq!(random_sparse_permutation(10, 0.0, 1).unwrap(), Permutation::identity(10));
        assert_eq!(random_sparse_permutation(2, 1.0, 1).unwrap().map(), &[1, 0]);
        let p = random_sparse_permutation(1024, 0.2, 7).unwrap();
        let d = p.hamming_distance();
        assert!((2..=204).contains(&d));
        // derangement within the chosen set: exactly floor(0.2 * 1024) moved
        assert_eq!(d, 204);
        assert!(random_sparse_permutation(4, 1.5, 1).is_err());
        assert!(Permutation::from_map(vec![0, 0]).is_err());
    }

    #[test]
    fn swap_moves_entry_by_hand() {
        let a = Adjacency::from_rows(&[vec![0, 1], vec![0, 0]]).unwrap();
        let swap = Permutation::from_map(vec![1, 0]).unwrap();
        let b = apply_permutation(&a, &swap).unwrap();
        assert_eq!(b.as_bytes(), &[0, 0, 1, 0]);
        assert!(apply_permutation(&a, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn binary_and_edge_list_formats() {
        let a = Adjacency::from_rows(&[vec![0, 1, 1], vec![0, 0, 0], vec![1, 0, 1]]).unwrap();
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        assert_eq!(&buf[8..], &[0, 1, 1, 0, 0, 0, 1, 0, 1]);
        assert_eq!(Adjacency::read_binary(&buf[..]).unwrap(), a);
        assert!(Adjacency::read_binary(&buf[..10]).is_err());

        let mut text = Vec::new();
        a.write_edge_list(&mut text).unwrap();
        assert_eq!(String::from_utf8(text.clone()).unwrap(), "# nodes 3\n1 2\n1 3\n3 1\n3 3\n");
        assert_eq!(Adjacency::read_edge_list(&text[..]).unwrap(), a);
    }

    #[test]
    fn conjugation_matches_adjacency_permutation() {
        let a = Adjacency::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]]).unwrap();
        let p = Permutation::from_map(vec![2, 0, 1]).unwrap();
        let dense: Matrix<f64> = a.to_matrix();
        let via_matrix = p.conjugate(&dense).unwrap();
        let via_adj: Matrix<f64> = apply_permutation(&a, &p).unwrap().to_matrix();
        assert_eq!(via_matrix, via_adj);
    }

    proptest! {
        #[test]
        fn permutation_round_trip_and_degree_multisets(seed in 0u64..500, rho in 0.0f64..=1.0, n in 2usize..24) {
            let probs = ProbabilityMatrix::from_matrix(Matrix::from_fn(n, n, |_, _| 0.4), 1).unwrap();
            let a = sample_adjacency(&probs, seed, true);
            let p = random_sparse_permutation(n, rho, seed).unwrap();
            let b = apply_permutation(&a, &p).unwrap();
            prop_assert_eq!(&apply_permutation(&b, &p.inverse()).unwrap(), &a);
            let mut ra = a.row_sums(); ra.sort();
            let mut rb = b.row_sums(); rb.sort();
            prop_assert_eq!(ra, rb);
            let mut ca = a.col_sums(); ca.sort();
            let mut cb = b.col_sums(); cb.sort();
            prop_assert_eq!(ca, cb);
            prop_assert!(p.hamming_distance() <= (rho * n as f64).floor() as usize);
        }
    }
}
