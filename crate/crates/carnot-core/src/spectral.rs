//! Spectral calculus for the discretized sublaplacian: dense
//! factorization up to a size limit, the exact sine-basis path on
//! abelian lattices, and a Lanczos matrix-function fallback above the
//! dense limit.

use crate::error::{Error, Result};
use crate::lattice::{GridFunction, Lattice, SparseOperator};
use crate::linalg::{self, ApplyOp, BoxGrid, Operator};
use crate::par;
use std::sync::Arc;

pub use crate::linalg::SpectralFactorization;

/// Default node-count limit for dense factorization.
pub const DENSE_LIMIT: usize = 5000;

/// How spectral functions of a positive operator get applied.
#[derive(Clone, Debug)]
pub enum SpectralHandle {
    /// Exact sine diagonalization of the separable box Laplacian.
    Abelian(BoxGrid),
    /// Dense eigendecomposition.
    Dense(Arc<SpectralFactorization>),
    /// Two-pass Lanczos matrix-function application (no factorization
    /// stored); approximation error is reported per apply.
    Lanczos {
        op: Arc<SparseOperator>,
        iters: usize,
    },
}

impl SpectralHandle {
    /// Pick a backend for `-Delta` on this lattice: exact sine basis for
    /// abelian algebras, dense factorization up to `dense_limit` nodes,
    /// Lanczos beyond.
    pub fn for_sublaplacian(
        latt: &Lattice,
        minus_delta: Option<Arc<SparseOperator>>,
        dense_limit: usize,
    ) -> Result<Self> {
        if latt.algebra().step() == 1 {
            return Ok(SpectralHandle::Abelian(latt.box_grid()));
        }
        let op = match minus_delta {
            Some(op) => op,
            None => Arc::new(crate::lattice::sublaplacian(latt, None)?.op),
        };
        if latt.node_count() <= dense_limit {
            let fact = factorize(&op)?;
            Ok(SpectralHandle::Dense(Arc::new(fact)))
        } else {
            Ok(SpectralHandle::Lanczos { op, iters: 220 })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpectralHandle::Abelian(g) => g.len(),
            SpectralHandle::Dense(f) => f.dim(),
            SpectralHandle::Lanczos { op, .. } => op.dim(),
        }
    }

    /// Operator handle for `Op^s` (the factorized operator to a power).
    pub fn power_operator(&self, s: f64) -> Result<Operator> {
        match self {
            SpectralHandle::Abelian(g) => Ok(Operator::AbelianSpectral {
                grid: g.clone(),
                f: Arc::new(move |l: f64| l.powf(s)),
            }),
            SpectralHandle::Dense(f) => {
                check_positive(f.eigenvalues(), s)?;
                Ok(Operator::DenseSpectral {
                    fact: f.clone(),
                    f: Arc::new(move |l: f64| l.max(0.0).powf(s)),
                })
            }
            SpectralHandle::Lanczos { op, iters } => Ok(Operator::LanczosFn {
                op: op.clone(),
                iters: *iters,
                f: Arc::new(move |l: f64| l.max(0.0).powf(s)),
            }),
        }
    }

    /// `y = Op^s x` with an error estimate (exact paths report 0).
    pub fn apply_power(&self, s: f64, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        match self {
            SpectralHandle::Abelian(g) => {
                let mut y = vec![0.0; g.len()];
                g.apply_fn_into(&move |l: f64| l.powf(s), x, &mut y);
                Ok((y, 0.0))
            }
            SpectralHandle::Dense(f) => {
                check_positive(f.eigenvalues(), s)?;
                let mut y = vec![0.0; f.dim()];
                f.apply_fn_into(&move |l: f64| l.max(0.0).powf(s), x, &mut y);
                Ok((y, 0.0))
            }
            SpectralHandle::Lanczos { op, iters } => {
                lanczos_fn_apply(op.as_ref(), &|l: f64| l.max(0.0).powf(s), x, *iters)
            }
        }
    }
}

fn check_positive(eigs: &[f64], s: f64) -> Result<()> {
    let scale = eigs.iter().fold(0.0f64, |m, &l| m.max(l.abs())).max(1e-300);
    if s.fract() != 0.0 || s < 0.0 {
        if let Some(&bad) = eigs.iter().find(|&&l| l < -1e-10 * scale) {
            return Err(Error::NegativeEigenvalue(bad));
        }
    }
    Ok(())
}

/// Dense factorization of a sparse symmetric operator with invariant
/// checks (orthonormality 1e-10, probe reconstruction 1e-8).
pub fn factorize(op: &SparseOperator) -> Result<SpectralFactorization> {
    let fact = linalg::sym_eigen(op.to_dense())?;
    fact.verify_against(op, 1e-10, 1e-8)?;
    Ok(fact)
}

/// Two-pass Lanczos evaluation of `f(A) x` without storing the basis.
/// The error estimate compares against a lower Krylov order.
pub fn lanczos_fn_apply(
    op: &dyn ApplyOp,
    f: &(dyn Fn(f64) -> f64 + Sync),
    x: &[f64],
    iters: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = op.dim();
    let xnorm = par::norm2(x);
    if xnorm == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let iters = iters.min(n);
    // pass 1: build T
    let mut alphas = Vec::with_capacity(iters);
    let mut betas = Vec::with_capacity(iters);
    {
        let mut v = x.to_vec();
        par::scale(1.0 / xnorm, &mut v);
        let mut v_prev = vec![0.0; n];
        let mut beta_prev = 0.0;
        let mut w = vec![0.0; n];
        for _ in 0..iters {
            op.apply_into(&v, &mut w);
            if beta_prev != 0.0 {
                par::axpy(-beta_prev, &v_prev, &mut w);
            }
            let alpha = par::dot(&v, &w);
            par::axpy(-alpha, &v, &mut w);
            alphas.push(alpha);
            let beta = par::norm2(&w);
            if beta < 1e-13 {
                break;
            }
            betas.push(beta);
            std::mem::swap(&mut v_prev, &mut v);
            v.copy_from_slice(&w);
            par::scale(1.0 / beta, &mut v);
            beta_prev = beta;
        }
        if betas.len() == alphas.len() {
            betas.pop();
        }
    }
    let k = alphas.len();
    let coeff_full = tridiag_fn_e1(&alphas, &betas, f)?;
    let err = if k > 5 {
        let coeff_trunc = tridiag_fn_e1(&alphas[..k - 3], &betas[..k - 4], f)?;
        let mut d = 0.0;
        for i in 0..coeff_trunc.len() {
            d += (coeff_full[i] - coeff_trunc[i]).powi(2);
        }
        for c in &coeff_full[coeff_trunc.len()..] {
            d += c * c;
        }
        d.sqrt() * xnorm
    } else {
        0.0
    };
    // pass 2: regenerate basis, accumulate y = |x| sum coeff_i q_i
    let mut y = vec![0.0; n];
    {
        let mut v = x.to_vec();
        par::scale(1.0 / xnorm, &mut v);
        let mut v_prev = vec![0.0; n];
        let mut beta_prev = 0.0;
        let mut w = vec![0.0; n];
        for (i, &alpha) in alphas.iter().enumerate() {
            par::axpy(coeff_full[i] * xnorm, &v, &mut y);
            if i + 1 == alphas.len() {
                break;
            }
            op.apply_into(&v, &mut w);
            if beta_prev != 0.0 {
                par::axpy(-beta_prev, &v_prev, &mut w);
            }
            par::axpy(-alpha, &v, &mut w);
            let beta = betas[i];
            std::mem::swap(&mut v_prev, &mut v);
            v.copy_from_slice(&w);
            par::scale(1.0 / beta, &mut v);
            beta_prev = beta;
        }
    }
    Ok((y, err))
}

/// `f(T) e_1` for a small symmetric tridiagonal, by dense eigen.
fn tridiag_fn_e1(alphas: &[f64], betas: &[f64], f: &dyn Fn(f64) -> f64) -> Result<Vec<f64>> {
    let k = alphas.len();
    let mut t = ndarray::Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let fact = linalg::sym_eigen(t)?;
    let mut out = vec![0.0; k];
    for j in 0..k {
        let col = fact.eigenvector(j);
        let w = f(fact.eigenvalues()[j]) * col[0];
        for (o, c) in out.iter_mut().zip(&col) {
            *o += w * c;
        }
    }
    Ok(out)
}

/// Homogeneous Sobolev norm `|u|_{H-dot^sigma} = |(-Delta)^{sigma/2} u|`
/// in the lattice measure.
pub fn sobolev_norm(handle: &SpectralHandle, u: &GridFunction, sigma: f64) -> Result<f64> {
    let (y, _) = handle.apply_power(sigma / 2.0, &u.values)?;
    Ok(u.lattice.cell_volume().sqrt() * par::norm2(&y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::StratifiedAlgebra;
    use crate::lattice::{sublaplacian, Lattice, LatticeSpec};

    fn heis_lattice(r: f64, h: f64) -> Arc<Lattice> {
        Lattice::build(
            Arc::new(StratifiedAlgebra::heisenberg(1)),
            LatticeSpec::new(r, h),
        )
        .unwrap()
    }

    #[test]
    fn fractional_power_identities() {
        let latt = heis_lattice(2.0, 0.5);
        let sl = Arc::new(sublaplacian(&latt, None).unwrap().op);
        let handle =
            SpectralHandle::for_sublaplacian(&latt, Some(sl.clone()), DENSE_LIMIT).unwrap();

        let x: Vec<f64> = (0..latt.node_count())
            .map(|i| ((i * 31 + 7) as f64 * 0.13).sin())
            .collect();

        // s = 0 is the identity
        let (y, _) = handle.apply_power(0.0, &x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }

        // (Op^{1/2})^2 = Op to 1e-8 relative
        let (y1, _) = handle.apply_power(0.5, &x).unwrap();
        let (y2, _) = handle.apply_power(0.5, &y1).unwrap();
        let direct = sl.apply(&x);
        let scale = par::norm2(&direct);
        let mut d = 0.0f64;
        for (a, b) in y2.iter().zip(&direct) {
            d += (a - b) * (a - b);
        }
        assert!(d.sqrt() <= 1e-8 * scale, "defect {}", d.sqrt() / scale);
    }

    #[test]
    fn eigenvalue_mapping_under_half_power() {
        // an eigenvector with eigenvalue 4 maps to 2v under s = 1/2
        let n = 40;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((
                i as u32,
                i as u32,
                if i == 17 { 4.0 } else { 1.0 + i as f64 * 0.01 },
            ));
        }
        let op = SparseOperator::from_triplets(n, trips);
        let fact = factorize(&op).unwrap();
        let handle = SpectralHandle::Dense(Arc::new(fact));
        let mut v = vec![0.0; n];
        v[17] = 1.0;
        let (y, _) = handle.apply_power(0.5, &v).unwrap();
        assert!((y[17] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn negative_operator_rejected_for_fractional_powers() {
        let op = SparseOperator::from_triplets(2, vec![(0, 0, -1.0), (1, 1, 2.0)]);
        let fact = factorize(&op).unwrap();
        let handle = SpectralHandle::Dense(Arc::new(fact));
        let err = handle.apply_power(0.5, &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NegativeEigenvalue(_)));
        // integer powers are fine
        assert!(handle.apply_power(2.0, &[1.0, 0.0]).is_ok());
    }

    #[test]
    fn lanczos_fn_apply_matches_dense() {
        let latt = heis_lattice(2.0, 0.5);
        let sl = Arc::new(sublaplacian(&latt, None).unwrap().op);
        let x: Vec<f64> = (0..latt.node_count())
            .map(|i| (-((i % 97) as f64) * 0.07).exp())
            .collect();
        let dense = SpectralHandle::for_sublaplacian(&latt, Some(sl.clone()), DENSE_LIMIT).unwrap();
        let (want, _) = dense.apply_power(-0.5, &x).unwrap();
        let (got, err) =
            lanczos_fn_apply(sl.as_ref(), &|l: f64| l.max(1e-30).powf(-0.5), &x, 160).unwrap();
        let scale = par::norm2(&want);
        let mut d = 0.0;
        for (a, b) in got.iter().zip(&want) {
            d += (a - b) * (a - b);
        }
        assert!(
            d.sqrt() < 1e-6 * scale,
            "defect {} err-est {}",
            d.sqrt() / scale,
            err
        );
    }

    #[test]
    fn sobolev_norm_zero_order_is_l2() {
        let latt = heis_lattice(2.0, 0.5);
        let handle = SpectralHandle::for_sublaplacian(&latt, None, DENSE_LIMIT).unwrap();
        let u = GridFunction::sample(latt.clone(), |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        })
        .unwrap();
        let n0 = sobolev_norm(&handle, &u, 0.0).unwrap();
        assert!((n0 - u.norm()).abs() < 1e-10 * u.norm());
    }
}
