//! Compressed sparse row matrices with deterministic triplet assembly.

use std::io::Write;
use std::ops::AddAssign;

use crate::C64;

/// Values usable as matrix entries; always promotable to complex.
pub trait Entry: Copy + Default + AddAssign + Into<C64> + Send + Sync {}
impl Entry for f64 {}
impl Entry for C64 {}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Entry> CsrMatrix<T> {
    /// Square matrix from (row, col, value) triplets. Duplicates are summed in
    /// input order, so the result is bit-identical for identical input.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => T::default(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .fold(C64::new(0.0, 0.0), |acc, (j, v)| acc + v.into() * x[j])
            })
            .collect()
    }

    /// `xᴴ A y`.
    pub fn form(&self, x: &[C64], y: &[C64]) -> C64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, &v| m.max(v.into().norm()))
    }

    /// `max |A − Aᴴ|` over stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        self.triplets().fold(0.0_f64, |m, (i, j, v)| {
            let t: C64 = self.get(j, i).into();
            m.max((v.into() - t.conj()).norm())
        })
    }

    pub fn sum_entries(&self) -> C64 {
        self.vals.iter().map(|&v| v.into()).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `α·A + β·B` on the union pattern.
    pub fn combine<U: Entry>(&self, alpha: f64, other: &CsrMatrix<U>, beta: f64) -> CsrMatrix<C64> {
        assert_eq!(self.n, other.n);
        let mut t: Vec<(usize, usize, C64)> = self.triplets().map(|(i, j, v)| (i, j, v.into() * alpha)).collect();
        t.extend(other.triplets().map(|(i, j, v)| (i, j, v.into() * beta)));
        CsrMatrix::from_triplets(self.n, t)
    }

    /// Coordinate text export, one `row col re im` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n {} nnz {}", self.n, self.nnz())?;
        for (i, j, v) in self.triplets() {
            let z: C64 = v.into();
            writeln!(w, "{i} {j} {} {}", z.re, z.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 0.5), (0, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
        let y = m.mul_vec(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        assert_eq!(y, vec![C64::new(1.5, -1.0), C64::new(2.0, 0.0)]);
    }

    #[test]
    fn coo_export() {
        let m = CsrMatrix::from_triplets(1, vec![(0, 0, C64::new(2.0, -1.0))]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# n 1 nnz 1\n0 0 2 -1\n");
    }
}
