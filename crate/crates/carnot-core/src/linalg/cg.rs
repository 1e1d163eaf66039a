//! Conjugate gradients for symmetric positive definite operators.

use super::ApplyOp;
use crate::error::{Error, Result};
use crate::par;

/// Solve `A x = b` with CG. Tolerance is on `|r| <= rtol |b| + atol`.
pub fn cg_solve(
    a: &dyn ApplyOp,
    b: &[f64],
    x0: Option<&[f64]>,
    rtol: f64,
    atol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.dim();
    let bnorm = par::norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = rtol * bnorm + atol;

    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.apply(&x);
        par::axpy(-1.0, &ax, &mut r);
    }
    let mut p = r.clone();
    let mut rr = par::dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(x);
    }
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        a.apply_into(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolveFailure(format!(
                "CG breakdown: <p, Ap> = {pap:.3e} (operator not positive definite?)"
            )));
        }
        let alpha = rr / pap;
        par::axpy(alpha, &p, &mut x);
        par::axpy(-alpha, &ap, &mut r);
        let rr_new = par::dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        par::xpby(&r, beta, &mut p);
    }
    Err(Error::NonConvergence(format!(
        "CG: residual {:.3e} > {:.3e} after {} iterations",
        rr.sqrt(),
        target,
        max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseOperator;

    #[test]
    fn cg_solves_dirichlet_laplacian() {
        let n = 64;
        let a = SparseOperator::from_rows(n, |i| {
            let mut r = vec![(i as u32, 2.0)];
            if i > 0 {
                r.push((i as u32 - 1, -1.0));
            }
            if i + 1 < n {
                r.push((i as u32 + 1, -1.0));
            }
            r
        });
        let xtrue: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.apply(&xtrue);
        let x = cg_solve(&a, &b, None, 1e-12, 0.0, 1000).unwrap();
        for (u, v) in x.iter().zip(&xtrue) {
            assert!((u - v).abs() < 1e-9);
        }
    }
}
