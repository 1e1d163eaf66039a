//! Dense symmetric eigendecomposition (LAPACK via ndarray-linalg).

use crate::error::{Error, Result};
use crate::par;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

/// Eigendecomposition `Op = Q diag(lambda) Q^T` with ascending
/// eigenvalues and orthonormal columns.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    eigenvalues: Vec<f64>,
    /// columns are eigenvectors
    vectors: Array2<f64>,
}

/// Factorize a dense symmetric matrix.
pub fn sym_eigen(a: Array2<f64>) -> Result<SpectralFactorization> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::FactorizationFailure("matrix not square".into()));
    }
    let (vals, vecs): (Array1<f64>, Array2<f64>) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::FactorizationFailure(format!("eigh: {e}")))?;
    Ok(SpectralFactorization {
        eigenvalues: vals.to_vec(),
        vectors: vecs,
    })
}

impl SpectralFactorization {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// j-th eigenvector (ascending order).
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j).to_vec()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    /// Coefficients `Q^T x`.
    pub fn analyze(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        par::map_indexed(n, |j| {
            let col = self.vectors.column(j);
            let mut s = 0.0;
            for (a, b) in col.iter().zip(x) {
                s += a * b;
            }
            s
        })
    }

    /// `y = Q c`.
    pub fn synthesize_into(&self, c: &[f64], y: &mut [f64]) {
        par::for_each_chunk(y, 0, &|i, slot| {
            let row = self.vectors.row(i);
            let mut s = 0.0;
            for (a, b) in row.iter().zip(c) {
                s += a * b;
            }
            *slot = s;
        });
    }

    /// `y = Q f(Lambda) Q^T x`.
    pub fn apply_fn_into(&self, f: &(dyn Fn(f64) -> f64 + Sync), x: &[f64], y: &mut [f64]) {
        let mut c = self.analyze(x);
        for (ci, l) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(*l);
        }
        self.synthesize_into(&c, y);
    }

    /// Spot-check orthonormality and reconstruction against `op` on a
    /// few deterministic probe vectors.
    pub fn verify_against(
        &self,
        op: &dyn super::ApplyOp,
        ortho_tol: f64,
        recon_tol: f64,
    ) -> Result<()> {
        let n = self.dim();
        let probes = 6.min(n);
        // orthonormality of a probe set of columns
        for a in 0..probes {
            let ja = a * (n - 1) / probes.max(1);
            for b in 0..=a {
                let jb = b * (n - 1) / probes.max(1);
                let dot: f64 = self
                    .vectors
                    .column(ja)
                    .iter()
                    .zip(self.vectors.column(jb).iter())
                    .map(|(u, v)| u * v)
                    .sum();
                let want = if ja == jb { 1.0 } else { 0.0 };
                if (dot - want).abs() > ortho_tol {
                    return Err(Error::FactorizationFailure(format!(
                        "orthonormality defect {:.3e} at columns ({ja},{jb})",
                        (dot - want).abs()
                    )));
                }
            }
        }
        // reconstruction on probe vectors
        let scale = self
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.abs()))
            .max(1e-300);
        for s in 0..3 {
            let x: Vec<f64> = (0..n)
                .map(|i| ((i * 37 + s * 101 + 13) as f64 * 0.6180339887).sin())
                .collect();
            let xn = par::norm2(&x);
            let mut y = vec![0.0; n];
            self.apply_fn_into(&|l: f64| l, &x, &mut y);
            let direct = op.apply(&x);
            let mut defect = 0.0f64;
            for (a, b) in y.iter().zip(&direct) {
                defect = defect.max((a - b).abs());
            }
            if defect > recon_tol * scale * xn {
                return Err(Error::FactorizationFailure(format!(
                    "reconstruction defect {defect:.3e} > {recon_tol:.1e} * {scale:.3e}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigh_small() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let f = sym_eigen(a).unwrap();
        assert!((f.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((f.eigenvalues()[1] - 3.0).abs() < 1e-12);
        let mut y = vec![0.0; 2];
        f.apply_fn_into(&|l| l * l, &[1.0, 0.0], &mut y);
        // A^2 = [[5,4],[4,5]]
        assert!((y[0] - 5.0).abs() < 1e-12);
        assert!((y[1] - 4.0).abs() < 1e-12);
    }
}
