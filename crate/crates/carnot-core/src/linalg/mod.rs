//! Matrix-free linear algebra: CSR operators, dense spectral
//! factorizations, Krylov iterations and the separable fast spectral
//! path for box Laplacians.

pub mod cg;
pub mod dense;
pub mod dst;
pub mod lanczos;
pub mod sparse;
pub mod tridiag;

pub use cg::cg_solve;
pub use dense::{sym_eigen, SpectralFactorization};
pub use dst::BoxGrid;
pub use lanczos::{inverse_iteration, lanczos_extremal, lanczos_tridiagonalize, Extreme};
pub use sparse::SparseOperator;

use std::sync::Arc;

/// Anything that can act on a vector. All operators here are real
/// symmetric unless stated otherwise by the caller.
pub trait ApplyOp: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<T: ApplyOp + ?Sized> ApplyOp for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

/// Composable operator handle used by the assembly and estimator layers.
#[derive(Clone)]
pub enum Operator {
    Identity(usize),
    Csr(Arc<SparseOperator>),
    /// Diagonal multiplication operator.
    Diag(Arc<Vec<f64>>),
    /// `Q f(Lambda) Q^T` from a dense factorization.
    DenseSpectral {
        fact: Arc<SpectralFactorization>,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// `f(-Delta)` for the separable box Laplacian (abelian lattices),
    /// applied exactly in the sine eigenbasis.
    AbelianSpectral {
        grid: BoxGrid,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// Matrix-free Dirichlet box Laplacian (2m+1-point stencil).
    BoxStencil(BoxGrid),
    /// `f(A)` applied by two-pass Lanczos (no stored factorization).
    LanczosFn {
        op: Arc<SparseOperator>,
        iters: usize,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// `sum_i c_i Op_i`
    Sum(Vec<(f64, Operator)>),
}

impl std::fmt::Debug for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Operator::Identity(n) => write!(f, "Identity({n})"),
            Operator::Csr(m) => write!(f, "Csr({}x{}, nnz {})", m.dim(), m.dim(), m.nnz()),
            Operator::Diag(d) => write!(f, "Diag({})", d.len()),
            Operator::DenseSpectral { fact, .. } => write!(f, "DenseSpectral({})", fact.dim()),
            Operator::AbelianSpectral { grid, .. } => write!(f, "AbelianSpectral({:?})", grid.dims),
            Operator::BoxStencil(grid) => write!(f, "BoxStencil({:?})", grid.dims),
            Operator::LanczosFn { op, iters, .. } => {
                write!(f, "LanczosFn({}x{}, k={})", op.dim(), op.dim(), iters)
            }
            Operator::Sum(terms) => {
                write!(f, "Sum[")?;
                for (c, t) in terms {
                    write!(f, " {c}*{t:?}")?;
                }
                write!(f, " ]")
            }
        }
    }
}

impl Operator {
    pub fn diag(d: Vec<f64>) -> Self {
        Operator::Diag(Arc::new(d))
    }

    pub fn csr(m: SparseOperator) -> Self {
        Operator::Csr(Arc::new(m))
    }

    pub fn scaled(self, c: f64) -> Self {
        Operator::Sum(vec![(c, self)])
    }

    pub fn plus(self, c: f64, other: Operator) -> Self {
        match self {
            Operator::Sum(mut terms) => {
                terms.push((c, other));
                Operator::Sum(terms)
            }
            first => Operator::Sum(vec![(1.0, first), (c, other)]),
        }
    }

    /// `self - shift * I`
    pub fn shifted(self, shift: f64) -> Self {
        let n = self.dim();
        self.plus(-shift, Operator::Identity(n))
    }
}

impl ApplyOp for Operator {
    fn dim(&self) -> usize {
        match self {
            Operator::Identity(n) => *n,
            Operator::Csr(m) => m.dim(),
            Operator::Diag(d) => d.len(),
            Operator::DenseSpectral { fact, .. } => fact.dim(),
            Operator::AbelianSpectral { grid, .. } => grid.len(),
            Operator::BoxStencil(grid) => grid.len(),
            Operator::LanczosFn { op, .. } => op.dim(),
            Operator::Sum(terms) => terms[0].1.dim(),
        }
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Operator::Identity(_) => y.copy_from_slice(x),
            Operator::Csr(m) => m.apply_into(x, y),
            Operator::Diag(d) => {
                crate::par::for_each_chunk(y, 0, &|i, slot| *slot = d[i] * x[i]);
            }
            Operator::DenseSpectral { fact, f } => fact.apply_fn_into(f.as_ref(), x, y),
            Operator::AbelianSpectral { grid, f } => grid.apply_fn_into(f.as_ref(), x, y),
            Operator::BoxStencil(grid) => {
                let dims = &grid.dims;
                let m = dims.len();
                let inv_h2 = 1.0 / (grid.h * grid.h);
                let mut strides = vec![1usize; m];
                for a in 1..m {
                    strides[a] = strides[a - 1] * dims[a - 1];
                }
                let diag = 2.0 * m as f64 * inv_h2;
                crate::par::for_each_chunk(y, 0, &|i, slot| {
                    let mut s = diag * x[i];
                    let mut rest = i;
                    for a in 0..m {
                        let ia = rest % dims[a];
                        rest /= dims[a];
                        if ia > 0 {
                            s -= inv_h2 * x[i - strides[a]];
                        }
                        if ia + 1 < dims[a] {
                            s -= inv_h2 * x[i + strides[a]];
                        }
                    }
                    *slot = s;
                });
            }
            Operator::LanczosFn { op, iters, f } => {
                let (out, _err) =
                    crate::spectral::lanczos_fn_apply(op.as_ref(), f.as_ref(), x, *iters)
                        .expect("Lanczos matrix-function apply failed");
                y.copy_from_slice(&out);
            }
            Operator::Sum(terms) => {
                y.iter_mut().for_each(|v| *v = 0.0);
                let mut tmp = vec![0.0; x.len()];
                for (c, t) in terms {
                    t.apply_into(x, &mut tmp);
                    crate::par::axpy(*c, &tmp, y);
                }
            }
        }
    }
}

/// Wrap a closure as an operator (used by estimator compositions).
pub struct FnOp<F: Fn(&[f64], &mut [f64]) + Sync> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> ApplyOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}
