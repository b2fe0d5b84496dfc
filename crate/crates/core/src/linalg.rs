//! Sparse Hermitian positive-definite factorization and small dense helpers.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::sparse::{CsrMatrix, Entry};
use crate::{Error, Result, C64};

/// Reverse Cuthill–McKee ordering of a symmetric sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Entry>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component from a minimum-degree node
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        let start = pseudo_peripheral(start, &adj, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(root, adj);
        let far = *levels.iter().filter(|&&l| l != usize::MAX).max().unwrap();
        if far <= ecc {
            break;
        }
        ecc = far;
        root = (0..adj.len())
            .filter(|&i| levels[i] == far)
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
    }
    root
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                q.push_back(w);
            }
        }
    }
    level
}

/// Envelope (skyline) Cholesky `P A Pᵀ = L Lᴴ` of a Hermitian positive-definite matrix.
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    lower: Vec<C64>,
    diag: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor<T: Entry>(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                let jn = inv[j];
                if jn < new {
                    first[new] = first[new].min(jn);
                }
            }
        }
        let mut offsets = vec![0; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + (i - first[i]);
        }
        let mut lower = vec![C64::new(0.0, 0.0); offsets[n]];
        let mut diag = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                let z: C64 = v.into();
                if jn < new {
                    lower[offsets[new] + jn - first[new]] = z;
                } else if jn == new {
                    diag[new] = z.re;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let (done, row_i) = lower.split_at_mut(offsets[i]);
            let row_i = &mut row_i[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[offsets[j]..offsets[j] + (j - fj)];
                let s = dot_conj(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                row_i[j - fi] = (row_i[j - fi] - s) / diag[j];
            }
            let d = diag[i] - row_i.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::LinearSolve {
                    residual: f64::NAN,
                    reason: format!("matrix is not positive definite (pivot {d:e} at row {i})"),
                });
            }
            diag[i] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            perm,
            first,
            offsets,
            lower,
            diag,
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Stored entries of the factor, a measure of fill.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n();
        let mut y: Vec<C64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            let s: C64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.diag[i];
        }
        for i in (0..n).rev() {
            y[i] /= self.diag[i];
            let xi = y[i];
            let fi = self.first[i];
            let row = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            for (v, l) in y[fi..i].iter_mut().zip(row) {
                *v -= l.conj() * xi;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve with one step of iterative refinement; returns the solution and
    /// the relative residual `‖b − Ax‖ / ‖b‖`.
    pub fn solve_refined<T: Entry>(&self, a: &CsrMatrix<T>, b: &[C64]) -> (Vec<C64>, f64) {
        let mut x = self.solve(b);
        let r = residual(a, &x, b);
        let dx = self.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        let bn = norm2(b);
        let rel = if bn == 0.0 {
            norm2(&residual(a, &x, b))
        } else {
            norm2(&residual(a, &x, b)) / bn
        };
        (x, rel)
    }
}

#[inline]
fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        // x * conj(y)
        re += x.re * y.re + x.im * y.im;
        im += x.im * y.re - x.re * y.im;
    }
    C64::new(re, im)
}

fn residual<T: Entry>(a: &CsrMatrix<T>, x: &[C64], b: &[C64]) -> Vec<C64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `xᴴ y`
pub fn inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Lowest eigenpairs of the dense Hermitian-definite pencil `(K, M)`, ascending,
/// with M-orthonormal eigenvectors as columns.
pub fn dense_generalized_eigen(k: &DMatrix<C64>, m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let chol = m.clone().cholesky().ok_or_else(|| Error::LinearSolve {
        residual: f64::NAN,
        reason: "mass matrix is not positive definite".into(),
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Internal("singular Cholesky factor".into()))?;
    let mut c = &linv * k * linv.adjoint();
    // symmetrize rounding
    let ct = c.adjoint();
    c = (c + ct) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(eig.eigenvectors.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    let x = linv.adjoint() * y;
    Ok((vals, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_2d(nx: usize) -> CsrMatrix<C64> {
        let n = nx * nx;
        let mut t = Vec::new();
        for j in 0..nx {
            for i in 0..nx {
                let k = j * nx + i;
                t.push((k, k, C64::new(4.5, 0.0)));
                if i + 1 < nx {
                    t.push((k, k + 1, C64::new(-1.0, 0.3)));
                    t.push((k + 1, k, C64::new(-1.0, -0.3)));
                }
                if j + 1 < nx {
                    t.push((k, k + nx, C64::new(-1.0, -0.2)));
                    t.push((k + nx, k, C64::new(-1.0, 0.2)));
                }
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_2d(7);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort();
        assert_eq!(p, (0..49).collect::<Vec<_>>());
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let a = laplacian_2d(12);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<C64> = (0..a.n())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let (x, rel) = f.solve_refined(&a, &b);
        assert!(rel < 1e-13, "relative residual {rel}");
        let ax = a.mul_vec(&x);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::LinearSolve { .. })));
    }

    #[test]
    fn dense_pencil() {
        let k = DMatrix::from_row_slice(2, 2, &[C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0)]);
        let m = DMatrix::identity(2, 2);
        let (vals, x) = dense_generalized_eigen(&k, &m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let r = &k * x.column(0) - x.column(0) * C64::new(vals[0], 0.0);
        assert!(r.norm() < 1e-12);
    }
}
