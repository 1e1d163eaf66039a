//! Symmetric tridiagonal eigenvalue tools (Sturm bisection) and the
//! complex resolvent continued fraction for Lanczos matrices.

use num_complex::Complex64;

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) that
/// are strictly below `x`, by Sturm sequence sign counting.
pub fn sturm_count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..n {
        let off2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        d = diag[i] - x - if i == 0 { 0.0 } else { off2 / d };
        if d == 0.0 {
            d = 1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin bounds for the tridiagonal spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { 0.0 })
            + (if i + 1 < n { off[i].abs() } else { 0.0 });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// k-th smallest eigenvalue (0-based) by bisection, absolute tolerance.
pub fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = gershgorin(diag, off);
    if lo == hi {
        return lo;
    }
    while hi - lo > tol.max(1e-15 * (hi.abs() + lo.abs())) {
        let mid = 0.5 * (lo + hi);
        if sturm_count_below(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest and largest eigenvalues.
pub fn extremes(diag: &[f64], off: &[f64], tol: f64) -> (f64, f64) {
    let n = diag.len();
    (
        kth_eigenvalue(diag, off, 0, tol),
        kth_eigenvalue(diag, off, n - 1, tol),
    )
}

/// All eigenvalues strictly below `bound` (ascending), each to `tol`.
pub fn eigenvalues_below(diag: &[f64], off: &[f64], bound: f64, tol: f64) -> Vec<f64> {
    let count = sturm_count_below(diag, off, bound);
    (0..count)
        .map(|k| kth_eigenvalue(diag, off, k, tol))
        .collect()
}

/// `e_1^T (T - z)^{-1} e_1` evaluated bottom-up as a continued fraction;
/// `T` is the symmetric tridiagonal with diagonal `alphas` and
/// off-diagonal `betas`.
pub fn resolvent_corner(alphas: &[f64], betas: &[f64], z: Complex64) -> Complex64 {
    let k = alphas.len();
    let mut g = Complex64::new(0.0, 0.0);
    for i in (0..k).rev() {
        let b2 = if i + 1 < k {
            betas[i] * betas[i]
        } else {
            0.0
        };
        g = (Complex64::new(alphas[i], 0.0) - z - b2 * g).inv();
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_counts_match_known_spectrum() {
        // tridiag(-1, 2, -1), n = 4: eigenvalues 2 - 2cos(k pi / 5)
        let diag = vec![2.0; 4];
        let off = vec![-1.0; 3];
        let eig: Vec<f64> = (1..=4)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 5.0).cos())
            .collect();
        for (k, &e) in eig.iter().enumerate() {
            let v = kth_eigenvalue(&diag, &off, k, 1e-12);
            assert!((v - e).abs() < 1e-10, "k={k}: {v} vs {e}");
        }
        assert_eq!(sturm_count_below(&diag, &off, 2.0), 2);
    }

    #[test]
    fn resolvent_corner_matches_direct_inverse() {
        let alphas = vec![1.0, 2.0, 3.0];
        let betas = vec![0.5, 0.25];
        let z = Complex64::new(0.3, 0.1);
        let g = resolvent_corner(&alphas, &betas, z);
        // direct 3x3 complex inverse, first entry
        let a = |i: usize, j: usize| -> Complex64 {
            let t = if i == j {
                alphas[i]
            } else if i + 1 == j || j + 1 == i {
                betas[i.min(j)]
            } else {
                0.0
            };
            Complex64::new(t, 0.0) - if i == j { z } else { Complex64::new(0.0, 0.0) }
        };
        // Cramer for the (0,0) entry of the inverse
        let det3 = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
            - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
            + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        let minor = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
        let want = minor / det3;
        assert!((g - want).norm() < 1e-13);
    }
}
