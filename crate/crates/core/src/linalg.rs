//! Compressed-row sparse matrices and the dense/iterative eigensolvers
//! built on top of them.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real CSR matrix. Duplicate entries are summed at assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(
                r < rows && c < cols,
                "entry ({r},{c}) outside {rows}x{cols}"
            );
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune(0.0);
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_triplets(
            n,
            n,
            values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// Drops entries with `|v| <= tol`.
    pub fn prune(&mut self, tol: f64) {
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                if v.abs() > tol {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| x[c] * v).sum();
        }
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.rows];
        self.matvec_complex(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.cols,
            self.rows,
            self.triplets().map(|(r, c, v)| (c, r, v)).collect(),
        )
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut acc = vec![0.0; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.cols];
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.rows, other.cols, triplets)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SparseMatrix, b: f64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        let t = self
            .triplets()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        Self::from_triplets(self.rows, self.cols, t)
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        self.combine(1.0, other, 1.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - Aᵀ|.
    pub fn max_asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Max absolute row sum; bounds the spectral norm of a symmetric matrix.
    pub fn norm_bound(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m.write(r, c, v);
        }
        m
    }

    /// Restriction to the rows/columns accepted by `keep`, with index map.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.rows.max(self.cols)];
        for (new, &old) in keep.iter().enumerate() {
            pos[old] = new;
        }
        let t = self
            .triplets()
            .filter(|&(r, c, _)| pos[r] != usize::MAX && pos[c] != usize::MAX)
            .map(|(r, c, v)| (pos[r], pos[c], v))
            .collect();
        Self::from_triplets(keep.len(), keep.len(), t)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ⟨a|b⟩ for a real bra and complex ket.
pub fn rcdot(a: &[f64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| y * *x).sum()
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh(m: &Mat<f64>) -> (Vec<f64>, Mat<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let evd = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
    let values = order.iter().map(|&k| s.read(k)).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u.read(i, order[j]));
    (values, vectors)
}

pub fn column(m: &Mat<f64>, j: usize) -> Vec<f64> {
    m.col_as_slice(j).to_vec()
}

/// Deterministic pseudo-random unit vector (splitmix64).
pub fn seeded_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut v: Vec<f64> = (0..dim)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    normalize(&mut v);
    v
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            max_iter: 3000,
            check_every: 10,
            seed: 7,
        }
    }
}

/// Lowest `k` eigenpairs of a symmetric matrix by Lanczos with full
/// reorthogonalization. Stops when every wanted Ritz residual is below
/// `tol·‖H‖`. On an invariant-subspace breakdown the recursion is restarted
/// from a fresh vector orthogonal to the current basis, which is how
/// degenerate copies enter the Krylov space.
pub fn lanczos_lowest(
    h: &SparseMatrix,
    k: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = h.rows();
    if k == 0 || n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let k = k.min(n);
    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    let max_iter = opts.max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = seeded_vector(n, opts.seed);
    let mut restarts = 0u64;
    let mut worst = f64::INFINITY;
    let mut converged = 0;

    loop {
        basis.push(q.clone());
        let mut w = h.apply(&q);
        let a = dot(&w, &q);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mut b = norm(&w);
        let m = basis.len();
        let exhausted = m == max_iter;
        if b < 1e-12 * scale && !exhausted {
            // breakdown: continue with a new direction
            restarts += 1;
            let mut fresh = seeded_vector(n, opts.seed.wrapping_add(restarts * 1_000_003));
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&fresh, v);
                    fresh.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nf = normalize(&mut fresh);
            if nf < 1e-8 {
                return ritz(h, &basis, &alpha, &beta, k, scale, opts.tol);
            }
            w = fresh;
            b = 0.0;
            beta.push(b);
            q = w;
            continue;
        }
        if m >= k && (m % opts.check_every == 0 || exhausted) {
            let (_, y) = tridiagonal_eigh(&alpha, &beta);
            worst = 0.0;
            converged = 0;
            for i in 0..k {
                let r = (b * y.read(m - 1, i)).abs();
                worst = f64::max(worst, r);
                if r <= opts.tol * scale {
                    converged += 1;
                }
            }
            if converged == k || exhausted {
                return ritz(h, &basis, &alpha, &beta, k, scale, opts.tol);
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        q = w;
    }
    Err(Error::NotConverged {
        wanted: k,
        converged,
        residual: worst,
    })
}

fn tridiagonal_eigh(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Mat<f64>) {
    let m = alpha.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    eigh(&t)
}

fn ritz(
    h: &SparseMatrix,
    basis: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    k: usize,
    scale: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (theta, y) = tridiagonal_eigh(alpha, &beta[..alpha.len() - 1]);
    let n = h.rows();
    let k = k.min(theta.len());
    let mut vectors = Vec::with_capacity(k);
    let mut worst: f64 = 0.0;
    let mut converged = 0;
    for i in 0..k {
        let mut v = vec![0.0; n];
        for (j, b) in basis.iter().enumerate() {
            let c = y.read(j, i);
            v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        normalize(&mut v);
        let hv = h.apply(&v);
        let r = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - theta[i] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(r);
        if r <= 10.0 * tol * scale {
            converged += 1;
        }
        vectors.push(v);
    }
    if converged < k {
        return Err(Error::NotConverged {
            wanted: k,
            converged,
            residual: worst,
        });
    }
    Ok((theta[..k].to_vec(), vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.01 * i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn triplets_coalesce_and_cancel() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 0, -1.0)],
        );
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 1, 4.0), (1, 0, 5.0), (2, 0, 6.0), (2, 1, -1.0)],
        );
        let c = a.matmul(&b);
        let dense = &a.to_dense() * &b.to_dense();
        for r in 0..2 {
            for col in 0..2 {
                assert_eq!(c.get(r, col), dense.read(r, col));
            }
        }
        assert_eq!(a.transpose().get(2, 0), 2.0);
    }

    #[test]
    fn eigh_sorted_and_orthonormal() {
        let h = laplacian(40);
        let (e, v) = eigh(&h.to_dense());
        assert!(e.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..40 {
            for j in 0..40 {
                let d = dot(&column(&v, i), &column(&v, j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = laplacian(300);
        let (dense, _) = eigh(&h.to_dense());
        let (e, v) = lanczos_lowest(&h, 4, &LanczosOptions::default()).unwrap();
        for i in 0..4 {
            assert!((e[i] - dense[i]).abs() < 1e-9, "{} vs {}", e[i], dense[i]);
            let hv = h.apply(&v[i]);
            let r: f64 = hv
                .iter()
                .zip(&v[i])
                .map(|(a, b)| (a - e[i] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-9 * h.norm_bound());
        }
    }

    #[test]
    fn lanczos_finds_degenerate_copies() {
        // two decoupled identical blocks: every eigenvalue is doubly degenerate
        let block = laplacian(30);
        let mut t: Vec<(usize, usize, f64)> = block.triplets().collect();
        t.extend(block.triplets().map(|(r, c, v)| (r + 30, c + 30, v)));
        let h = SparseMatrix::from_triplets(60, 60, t);
        let (dense, _) = eigh(&h.to_dense());
        let (e, _) = lanczos_lowest(&h, 4, &LanczosOptions::default()).unwrap();
        for i in 0..4 {
            assert!((e[i] - dense[i]).abs() < 1e-9);
        }
    }
}
