//! Compressed sparse row operators.

use super::ApplyOp;
use crate::error::{Error, Result};
use crate::par;

/// Real sparse matrix in CSR form, possibly rectangular (difference
/// factors carry ghost rows). Row assembly is parallel and
/// deterministic; the symmetry flag is validated, not trusted.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Build a square operator from unsorted triplets; duplicates sum.
    pub fn from_triplets(n: usize, trips: Vec<(u32, u32, f64)>) -> Self {
        Self::from_triplets_rect(n, n, trips)
    }

    pub fn from_triplets_rect(
        nrows: usize,
        ncols: usize,
        mut trips: Vec<(u32, u32, f64)>,
    ) -> Self {
        trips.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut m = SparseOperator {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
            symmetric: false,
        };
        let mut k = 0usize;
        for row in 0..nrows {
            m.indptr[row] = m.indices.len();
            while k < trips.len() && trips[k].0 as usize == row {
                let c = trips[k].1;
                let mut v = trips[k].2;
                k += 1;
                while k < trips.len() && trips[k].0 as usize == row && trips[k].1 == c {
                    v += trips[k].2;
                    k += 1;
                }
                if v != 0.0 {
                    m.indices.push(c);
                    m.data.push(v);
                }
            }
        }
        m.indptr[nrows] = m.indices.len();
        m
    }

    /// Assemble square rows in parallel. `row(i)` returns (column,
    /// value) pairs; they need not be sorted.
    pub fn from_rows<F>(n: usize, row: F) -> Self
    where
        F: Fn(usize) -> Vec<(u32, f64)> + Sync,
    {
        Self::from_rows_rect(n, n, row)
    }

    /// Assemble possibly rectangular rows in parallel.
    pub fn from_rows_rect<F>(nrows: usize, ncols: usize, row: F) -> Self
    where
        F: Fn(usize) -> Vec<(u32, f64)> + Sync,
    {
        let build_row = |i: usize| {
            let mut r = row(i);
            r.sort_unstable_by_key(|e| e.0);
            r.retain(|e| e.1 != 0.0);
            r
        };
        #[cfg(feature = "parallel")]
        let rows: Vec<Vec<(u32, f64)>> = if !par::sequential_forced() {
            use rayon::prelude::*;
            (0..nrows).into_par_iter().map(build_row).collect()
        } else {
            (0..nrows).map(build_row).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rows: Vec<Vec<(u32, f64)>> = (0..nrows).map(build_row).collect();

        let mut indptr = vec![0usize; nrows + 1];
        for (i, r) in rows.iter().enumerate() {
            indptr[i + 1] = indptr[i] + r.len();
        }
        let nnz = indptr[nrows];
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                indices.push(c);
                data.push(v);
            }
        }
        SparseOperator {
            nrows,
            ncols,
            indptr,
            indices,
            data,
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_rows(n, |i| vec![(i as u32, 1.0)]);
        m.symmetric = true;
        m
    }

    /// Square dimension; panics for rectangular factors.
    pub fn dim(&self) -> usize {
        assert_eq!(self.nrows, self.ncols, "operator is rectangular");
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    /// Apply a possibly rectangular operator.
    pub fn apply_rect(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        par::for_each_chunk(&mut y, 0, &|i, slot| {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut s = 0.0;
            for k in lo..hi {
                s += self.data[k] * x[self.indices[k] as usize];
            }
            *slot = s;
        });
        y
    }

    /// Validate entrywise symmetry to relative tolerance and set the flag.
    pub fn flag_symmetric(&mut self, rel_tol: f64) -> Result<()> {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(1e-300);
        let mut defect = 0.0f64;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = t.row(i);
            if ca.len() != cb.len() {
                defect = f64::INFINITY;
                break;
            }
            for k in 0..ca.len() {
                if ca[k] != cb[k] {
                    defect = f64::INFINITY;
                } else {
                    defect = defect.max((va[k] - vb[k]).abs());
                }
            }
        }
        if defect > rel_tol * scale {
            return Err(Error::FactorizationFailure(format!(
                "symmetry defect {defect:.3e} exceeds {rel_tol:.1e} * {scale:.3e}"
            )));
        }
        self.symmetric = true;
        Ok(())
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut trips = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                trips.push((*c, i as u32, *v));
            }
        }
        SparseOperator::from_triplets_rect(self.ncols, self.nrows, trips)
    }

    /// Gram operator `A^T A` (square, ncols x ncols).
    pub fn ata(&self) -> SparseOperator {
        let mut trips = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (a, va) in cols.iter().zip(vals) {
                for (b, vb) in cols.iter().zip(vals) {
                    trips.push((*a, *b, va * vb));
                }
            }
        }
        let mut m = SparseOperator::from_triplets(self.ncols, trips);
        m.symmetric = true;
        m
    }

    /// `alpha * A + beta * B` entrywise.
    pub fn add_scaled(&self, alpha: f64, other: &SparseOperator, beta: f64) -> SparseOperator {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut trips = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (cc, vv) in c.iter().zip(v) {
                trips.push((i as u32, *cc, alpha * vv));
            }
            let (c, v) = other.row(i);
            for (cc, vv) in c.iter().zip(v) {
                trips.push((i as u32, *cc, beta * vv));
            }
        }
        SparseOperator::from_triplets_rect(self.nrows, self.ncols, trips)
    }

    /// Antisymmetric part `(A - A^T)/2`.
    pub fn antisymmetrize(&self) -> SparseOperator {
        self.add_scaled(0.5, &self.transpose(), -0.5)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .position(|&cc| cc as usize == i)
                    .map_or(0.0, |p| v[p])
            })
            .collect()
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut a = ndarray::Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (cc, vv) in c.iter().zip(v) {
                a[(i, *cc as usize)] += *vv;
            }
        }
        a
    }

    /// Max |A_ij - A_ji| over the pattern, for tests.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut d = 0.0f64;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (c, v) in ca.iter().zip(va) {
                let (tc, tv) = t.row(i);
                let w = tc
                    .iter()
                    .position(|x| x == c)
                    .map_or(0.0, |p| tv[p]);
                d = d.max((v - w).abs());
            }
        }
        d
    }
}

impl ApplyOp for SparseOperator {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        par::for_each_chunk(y, 0, &|i, slot| {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut s = 0.0;
            for k in lo..hi {
                s += self.data[k] * x[self.indices[k] as usize];
            }
            *slot = s;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_duplicates() {
        let m = SparseOperator::from_triplets(
            3,
            vec![(0, 1, 1.0), (0, 1, 2.0), (2, 0, -1.0), (1, 1, 5.0)],
        );
        assert_eq!(m.nnz(), 3);
        let (c, v) = m.row(0);
        assert_eq!(c, &[1]);
        assert_eq!(v, &[3.0]);
        assert_eq!(m.diagonal(), vec![0.0, 5.0, 0.0]);
    }

    #[test]
    fn ata_is_symmetric_gram() {
        // D = forward difference on 4 nodes
        let d = SparseOperator::from_rows(4, |i| {
            let mut r = vec![(i as u32, -1.0)];
            if i + 1 < 4 {
                r.push((i as u32 + 1, 1.0));
            }
            r
        });
        let g = d.ata();
        assert_eq!(g.symmetry_defect(), 0.0);
        let dense = g.to_dense();
        // interior row of D^T D is (-1, 2, -1)
        assert_eq!(dense[(1, 1)], 2.0);
        assert_eq!(dense[(1, 0)], -1.0);
        assert_eq!(dense[(1, 2)], -1.0);
        // quadratic form equals |D u|^2
        let u = [1.0, -2.0, 0.5, 3.0];
        let du = d.apply(&u);
        let gu = g.apply(&u);
        let lhs: f64 = u.iter().zip(&gu).map(|(a, b)| a * b).sum();
        let rhs: f64 = du.iter().map(|v| v * v).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn antisymmetrize_works() {
        let m = SparseOperator::from_triplets(2, vec![(0, 1, 2.0), (1, 0, -1.0)]);
        let s = m.antisymmetrize();
        let d = s.to_dense();
        assert_eq!(d[(0, 1)], 1.5);
        assert_eq!(d[(1, 0)], -1.5);
    }
}
