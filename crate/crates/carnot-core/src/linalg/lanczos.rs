//! Lanczos iterations: extremal eigenvalues without reorthogonalization
//! (Ritz values approach extremes from inside the spectrum), full
//! tridiagonalization with reorthogonalization for resolvent elements,
//! and shifted inverse iteration for eigenvectors.

use super::{cg_solve, tridiag, ApplyOp};
use crate::error::{Error, Result};
use crate::par;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

/// Deterministic unit start vector.
pub fn seeded_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nrm = par::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    v
}

/// Extremal eigenvalue of a symmetric operator by plain three-term
/// Lanczos. Stops when the targeted Ritz value stagnates below
/// `tol` (relative) over a probation window. The returned value always
/// lies inside the true spectrum, so certifications of nonnegativity
/// made with it are conservative.
pub fn lanczos_extremal(
    op: &dyn ApplyOp,
    which: Extreme,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<f64> {
    let n = op.dim();
    if n == 1 {
        let y = op.apply(&[1.0]);
        return Ok(y[0]);
    }
    let max_iter = max_iter.min(4 * n);
    let mut v = seeded_unit_vector(n, seed);
    let mut v_prev = vec![0.0; n];
    let mut beta_prev = 0.0f64;
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];

    let mut best = f64::NAN;
    let mut stable = 0usize;
    let check_every = 8usize;

    for it in 0..max_iter {
        op.apply_into(&v, &mut w);
        if beta_prev != 0.0 {
            par::axpy(-beta_prev, &v_prev, &mut w);
        }
        let alpha = par::dot(&v, &w);
        par::axpy(-alpha, &v, &mut w);
        alphas.push(alpha);
        let beta = par::norm2(&w);
        if beta < 1e-13 * alpha.abs().max(1.0) {
            // invariant subspace exhausted: T is exact
            let (lo, hi) = tridiag::extremes(&alphas, &betas, 1e-13);
            return Ok(match which {
                Extreme::Smallest => lo,
                Extreme::Largest => hi,
            });
        }
        betas.push(beta);
        std::mem::swap(&mut v_prev, &mut v);
        v.copy_from_slice(&w);
        par::scale(1.0 / beta, &mut v);
        beta_prev = beta;

        if (it + 1) % check_every == 0 || it + 1 == max_iter {
            let (lo, hi) = tridiag::extremes(&alphas, &betas[..alphas.len() - 1], 1e-13);
            let cur = match which {
                Extreme::Smallest => lo,
                Extreme::Largest => hi,
            };
            let scale = hi.abs().max(lo.abs()).max(1e-300);
            if best.is_finite() && (cur - best).abs() <= tol * scale {
                stable += 1;
                if stable >= 3 {
                    return Ok(cur);
                }
            } else {
                stable = 0;
            }
            best = cur;
        }
    }
    // Did not stagnate to tolerance; report the best Ritz value if the
    // last two checks were close, otherwise fail.
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::NonConvergence(
            "Lanczos produced no Ritz value".into(),
        ))
    }
}

/// Full Lanczos tridiagonalization of `op` started at `u`, with complete
/// reorthogonalization; returns (alphas, betas, |u|). Used for resolvent
/// matrix elements `<u, (H - z)^{-1} u>`, which require an accurate T.
pub fn lanczos_tridiagonalize(
    op: &dyn ApplyOp,
    u: &[f64],
    k_max: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = op.dim();
    let unorm = par::norm2(u);
    if unorm == 0.0 {
        return Err(Error::SolveFailure("zero start vector".into()));
    }
    let k_max = k_max.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut v = u.to_vec();
    par::scale(1.0 / unorm, &mut v);
    basis.push(v.clone());
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut w = vec![0.0; n];
    for k in 0..k_max {
        op.apply_into(&basis[k], &mut w);
        let alpha = par::dot(&basis[k], &w);
        alphas.push(alpha);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for q in &basis {
                let c = par::dot(q, &w);
                par::axpy(-c, q, &mut w);
            }
        }
        let beta = par::norm2(&w);
        if beta < 1e-12 * alpha.abs().max(1.0) || k + 1 == k_max {
            break;
        }
        betas.push(beta);
        let mut next = w.clone();
        par::scale(1.0 / beta, &mut next);
        basis.push(next);
    }
    Ok((alphas, betas, unorm))
}

/// Eigenvector for an isolated eigenvalue near `lambda` by inverse
/// iteration on `op - sigma I` (sigma slightly below), solved with CG.
/// Returns the refined Rayleigh quotient and the unit eigenvector.
pub fn inverse_iteration(
    op: &dyn ApplyOp,
    lambda: f64,
    gap_hint: f64,
    seed: u64,
    max_outer: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = op.dim();
    let sigma = lambda - gap_hint.max(1e-8);
    let shifted = ShiftedOp { op, sigma };
    let mut v = seeded_unit_vector(n, seed);
    let mut rayleigh = lambda;
    for _ in 0..max_outer {
        let y = cg_solve(&shifted, &v, None, 1e-10, 0.0, 20 * (n as f64).sqrt() as usize + 200)?;
        let nrm = par::norm2(&y);
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::SolveFailure("inverse iteration collapsed".into()));
        }
        v = y;
        par::scale(1.0 / nrm, &mut v);
        let av = op.apply(&v);
        let new_rayleigh = par::dot(&v, &av);
        let resid = {
            let mut r = av;
            par::axpy(-new_rayleigh, &v, &mut r);
            par::norm2(&r)
        };
        let done = resid < 1e-9 * new_rayleigh.abs().max(1.0);
        rayleigh = new_rayleigh;
        if done {
            return Ok((rayleigh, v));
        }
    }
    Ok((rayleigh, v))
}

struct ShiftedOp<'a> {
    op: &'a dyn ApplyOp,
    sigma: f64,
}

impl ApplyOp for ShiftedOp<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y);
        par::axpy(-self.sigma, x, y);
    }
}

/// Ritz values below `bound` from a no-reorthogonalization Lanczos run,
/// deduplicated by clustering (ghost copies collapse). Suitable for
/// counting well-separated eigenvalues at the bottom of the spectrum.
pub fn ritz_values_below(
    op: &dyn ApplyOp,
    bound: f64,
    seed: u64,
    iters: usize,
    cluster_tol: f64,
) -> Result<Vec<f64>> {
    let n = op.dim();
    let iters = iters.min(n);
    let mut v = seeded_unit_vector(n, seed);
    let mut v_prev = vec![0.0; n];
    let mut beta_prev = 0.0;
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
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
    let vals = tridiag::eigenvalues_below(&alphas, &betas, bound, 1e-12);
    let mut out: Vec<f64> = Vec::new();
    for v in vals {
        if out.last().map_or(true, |&l| (v - l).abs() > cluster_tol) {
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseOperator;

    fn lap1d(n: usize) -> SparseOperator {
        SparseOperator::from_rows(n, |i| {
            let mut r = vec![(i as u32, 2.0)];
            if i > 0 {
                r.push((i as u32 - 1, -1.0));
            }
            if i + 1 < n {
                r.push((i as u32 + 1, -1.0));
            }
            r
        })
    }

    #[test]
    fn extremal_eigenvalues_of_lap1d() {
        let n = 200;
        let a = lap1d(n);
        let lam_min = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let lam_max = 2.0 + 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let lo = lanczos_extremal(&a, Extreme::Smallest, 7, 4000, 1e-10).unwrap();
        let hi = lanczos_extremal(&a, Extreme::Largest, 7, 4000, 1e-10).unwrap();
        assert!((lo - lam_min).abs() < 1e-7, "{lo} vs {lam_min}");
        assert!((hi - lam_max).abs() < 1e-7, "{hi} vs {lam_max}");
    }

    #[test]
    fn inverse_iteration_recovers_ground_state() {
        let n = 120;
        let a = lap1d(n);
        let lam1 = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let (lam, v) = inverse_iteration(&a, lam1 * 1.02, lam1, 3, 30).unwrap();
        assert!((lam - lam1).abs() < 1e-9);
        // ground state is the half-sine
        let expect: Vec<f64> = (0..n)
            .map(|i| ((i + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).sin())
            .collect();
        let overlap = par::dot(&v, &expect).abs() / par::norm2(&expect);
        assert!(overlap > 0.999999);
    }
}
