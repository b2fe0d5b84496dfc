//! Lowest eigenpairs of the pencil (K, M).

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::FormPair;
use crate::linalg::{dense_generalized_eigen, inner, EnvelopeCholesky};
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// Problems up to this size are solved densely.
pub const DENSE_LIMIT: usize = 400;
pub const MAX_ITERATIONS: usize = 500;
pub const SHIFT: f64 = -0.5;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal, one vector per eigenvalue.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<C64>>,
    /// `‖K x − λ M x‖` measured in the dual (M⁻¹) norm.
    pub residuals: Vec<f64>,
    pub h: f64,
    pub requested: usize,
    pub achieved: usize,
    pub iterations: usize,
}

pub fn solve_lowest(fp: &FormPair, m: usize, tol: f64) -> Result<SpectralResult> {
    solve_pencil(&fp.k, &fp.m, m, tol, fp.mesh().h)
}

/// Lowest `count` eigenpairs of `K x = λ M x` for Hermitian K ⪰ 0 and SPD M.
pub fn solve_pencil(k: &CsrMatrix<C64>, m: &CsrMatrix<f64>, count: usize, tol: f64, h: f64) -> Result<SpectralResult> {
    let n = k.n();
    if m.n() != n {
        return Err(Error::Size(format!("stiffness is {n}x{n} but mass is {0}x{0}", m.n())));
    }
    if !(tol > 1e-12 && tol < 1e-4) {
        return Err(Error::InvalidSpec(format!("tolerance {tol:e} outside (1e-12, 1e-4)")));
    }
    if count == 0 || count > n || (count == n && n > DENSE_LIMIT) {
        return Err(Error::Size(format!("cannot compute {count} eigenpairs of a problem of size {n}")));
    }
    let mass = EnvelopeCholesky::factor(m)?;
    let (vals, vecs, iterations) = if n <= DENSE_LIMIT {
        let (v, x) = dense_solve(k, m, count)?;
        (v, x, 0)
    } else {
        subspace_iteration(k, m, &mass, count, tol)?
    };
    let mut eigenvectors = vecs;
    for x in &mut eigenvectors {
        fix_phase(x);
    }
    let residuals: Vec<f64> = vals
        .iter()
        .zip(&eigenvectors)
        .map(|(&l, x)| dual_residual(k, m, &mass, l, x))
        .collect();
    let worst = residuals
        .iter()
        .zip(&vals)
        .any(|(&r, &l)| !(r <= tol * (1.0 + l.abs())));
    if worst {
        return Err(Error::Convergence { iterations, residuals });
    }
    Ok(SpectralResult {
        achieved: vals.len(),
        eigenvalues: vals,
        eigenvectors,
        residuals,
        h,
        requested: count,
        iterations,
    })
}

fn dense_solve(k: &CsrMatrix<C64>, m: &CsrMatrix<f64>, count: usize) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = k.n();
    let mut kd = DMatrix::zeros(n, n);
    let mut md = DMatrix::zeros(n, n);
    for (i, j, v) in k.triplets() {
        kd[(i, j)] = v;
    }
    for (i, j, v) in m.triplets() {
        md[(i, j)] = C64::new(v, 0.0);
    }
    let (vals, x) = dense_generalized_eigen(&kd, &md)?;
    let vecs = (0..count).map(|c| x.column(c).iter().copied().collect()).collect();
    Ok((vals[..count].to_vec(), vecs))
}

fn subspace_iteration(
    k: &CsrMatrix<C64>,
    m: &CsrMatrix<f64>,
    mass: &EnvelopeCholesky,
    count: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<C64>>, usize)> {
    let n = k.n();
    let p = (count + count.max(8)).min(n);
    let shifted = k.combine(1.0, m, -SHIFT);
    let op = EnvelopeCholesky::factor(&shifted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ n as u64);
    let mut block: Vec<Vec<C64>> = (0..p)
        .map(|_| {
            (0..n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let mut residuals = vec![f64::INFINITY; count];
    for it in 1..=MAX_ITERATIONS {
        let mut y: Vec<Vec<C64>> = block.iter().map(|x| op.solve(&m.mul_vec(x))).collect();
        m_orthonormalize(m, &mut y);
        let ky: Vec<Vec<C64>> = y.iter().map(|v| k.mul_vec(v)).collect();
        let q = y.len();
        let mut proj = DMatrix::from_fn(q, q, |i, j| inner(&y[i], &ky[j]));
        let pt = proj.adjoint();
        proj = (proj + pt) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(proj);
        let mut idx: Vec<usize> = (0..q).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        block = idx
            .iter()
            .map(|&c| {
                let mut x = vec![C64::new(0.0, 0.0); n];
                for (r, yr) in y.iter().enumerate() {
                    let w = eig.eigenvectors[(r, c)];
                    for (xi, yi) in x.iter_mut().zip(yr) {
                        *xi += w * yi;
                    }
                }
                x
            })
            .collect();
        for c in 0..count {
            residuals[c] = dual_residual(k, m, mass, vals[c], &block[c]);
        }
        if residuals.iter().zip(&vals).all(|(&r, &l)| r <= 0.1 * tol * (1.0 + l.abs())) {
            block.truncate(count);
            return Ok((vals[..count].to_vec(), block, it));
        }
    }
    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        residuals,
    })
}

/// Two passes of modified Gram–Schmidt in the M inner product.
fn m_orthonormalize(m: &CsrMatrix<f64>, y: &mut Vec<Vec<C64>>) {
    for _ in 0..2 {
        let mut kept: Vec<Vec<C64>> = Vec::with_capacity(y.len());
        let mut kept_m: Vec<Vec<C64>> = Vec::with_capacity(y.len());
        for mut v in y.drain(..) {
            for (q, mq) in kept.iter().zip(&kept_m) {
                let c = inner(mq, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            let mv = m.mul_vec(&v);
            let nrm = inner(&v, &mv).re.max(0.0).sqrt();
            if nrm > 1e-300 {
                let s = 1.0 / nrm;
                v.iter_mut().for_each(|z| *z *= s);
                kept_m.push(mv.into_iter().map(|z| z * s).collect());
                kept.push(v);
            }
        }
        *y = kept;
    }
}

fn dual_residual(k: &CsrMatrix<C64>, m: &CsrMatrix<f64>, mass: &EnvelopeCholesky, l: f64, x: &[C64]) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: Vec<C64> = kx.iter().zip(&mx).map(|(a, b)| a - l * b).collect();
    let z = mass.solve(&r);
    inner(&r, &z).re.max(0.0).sqrt()
}

/// Rotate so the largest-modulus entry is real and positive.
fn fix_phase(x: &mut [C64]) {
    let Some(big) = x.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return;
    };
    if big.norm() > 0.0 {
        let rot = big.conj() / big.norm();
        x.iter_mut().for_each(|z| *z *= rot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, norms};
    use crate::geometry::{triangulate, DomainSpec};
    use crate::potential::PotentialModel;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn square_pair(h: f64, pot: &PotentialModel) -> FormPair {
        let mesh = Arc::new(triangulate(&DomainSpec::unit_square(), None, h).unwrap());
        assemble(mesh, pot).unwrap()
    }

    fn check_invariants(fp: &FormPair, r: &SpectralResult, tol: f64) {
        for w in r.eigenvalues.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(r.eigenvalues[0] >= -1e-9);
        for (i, xi) in r.eigenvectors.iter().enumerate() {
            for (j, xj) in r.eigenvectors.iter().enumerate() {
                let g = fp.m.form(xi, xj);
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((g - d).norm() < 1e-8, "gram ({i},{j}) = {g}");
            }
            let rq = fp.k.form(xi, xi).re;
            let l = r.eigenvalues[i];
            assert!((rq - l).abs() <= 1e-8 * l.abs().max(1.0));
            assert!(r.residuals[i] <= tol * (1.0 + l));
        }
    }

    #[test]
    fn one_by_one() {
        let k = CsrMatrix::from_triplets(1, vec![(0, 0, C64::new(2.0, 0.0))]);
        let m = CsrMatrix::from_triplets(1, vec![(0, 0, 1.0)]);
        let r = solve_pencil(&k, &m, 1, 1e-8, 1.0).unwrap();
        assert!((r.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!((r.eigenvectors[0][0] - 1.0).norm() < 1e-14);
        assert!(matches!(solve_pencil(&k, &m, 2, 1e-8, 1.0), Err(Error::Size(_))));
        assert!(matches!(solve_pencil(&k, &m, 1, 1e-3, 1.0), Err(Error::InvalidSpec(_))));
    }

    fn neumann_square(count: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..10)
            .flat_map(|p| (0..10).map(move |q| PI * PI * (p * p + q * q) as f64))
            .collect();
        v.sort_by(f64::total_cmp);
        v.truncate(count);
        v
    }

    #[test]
    fn square_laplacian_iterative() {
        let fp = square_pair(1.0 / 64.0, &PotentialModel::zero());
        let r = solve_lowest(&fp, 6, 1e-8).unwrap();
        assert!(r.iterations > 0);
        let exact = neumann_square(6);
        assert!(r.eigenvalues[0].abs() < 1e-8);
        for (l, e) in r.eigenvalues.iter().zip(&exact).skip(1) {
            assert!((l - e).abs() <= 0.02 * e, "{l} vs {e}");
        }
        check_invariants(&fp, &r, 1e-8);
    }

    #[test]
    fn dense_and_iterative_agree() {
        let fp = square_pair(1.0 / 20.0, &PotentialModel::uniform(2.0));
        let r = solve_lowest(&fp, 8, 1e-9).unwrap();
        let (d, _) = dense_solve(&fp.k, &fp.m, 8).unwrap();
        for (a, b) in r.eigenvalues.iter().zip(&d) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b));
        }
        check_invariants(&fp, &r, 1e-9);
        let small = square_pair(1.0 / 10.0, &PotentialModel::uniform(2.0));
        let rd = solve_lowest(&small, 6, 1e-9).unwrap();
        assert_eq!(rd.iterations, 0);
        check_invariants(&small, &rd, 1e-9);
    }

    #[test]
    fn refinement_improves_accuracy() {
        let exact = neumann_square(6);
        let err = |h: f64| {
            let r = solve_lowest(&square_pair(h, &PotentialModel::zero()), 6, 1e-9).unwrap();
            r.eigenvalues.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        assert!(err(1.0 / 32.0) < err(1.0 / 16.0));
    }

    #[test]
    fn gauge_shift_preserves_spectrum() {
        let a = PotentialModel::uniform(1.0);
        let b = a.gauge_shift_named("xy", 1.0).unwrap();
        let gap = |h: f64| {
            let ra = solve_lowest(&square_pair(h, &a), 6, 1e-9).unwrap();
            let rb = solve_lowest(&square_pair(h, &b), 6, 1e-9).unwrap();
            ra.eigenvalues
                .iter()
                .zip(&rb.eigenvalues)
                .map(|(x, y)| (x - y).abs() / x.max(1e-3))
                .fold(0.0, f64::max)
        };
        let g32 = gap(1.0 / 32.0);
        assert!(g32 < 0.05, "relative gap {g32}");
        assert!(gap(1.0 / 64.0) < g32);
    }

    #[test]
    fn eigenpair_norms() {
        let fp = square_pair(1.0 / 12.0, &PotentialModel::uniform(1.0));
        let r = solve_lowest(&fp, 4, 1e-10).unwrap();
        for (l, x) in r.eigenvalues.iter().zip(&r.eigenvectors) {
            assert!((norms(&fp, x, 1).unwrap() - (1.0 + l).sqrt()).abs() < 1e-8);
            assert!((norms(&fp, x, 2).unwrap() - (1.0 + l)).abs() < 1e-7 * (1.0 + l));
        }
    }
}
