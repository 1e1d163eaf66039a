//! Box-lattice discretization of horizontal fields, the sublaplacian,
//! the Euler operator and the dilation action.
//!
//! Nodes live in exponential coordinates on `[-R, R]^m` with uniform
//! spacing `h`; the half-spacing offset keeps every node away from the
//! group identity so singular weights stay finite. First-order fields
//! use centered differences; `-Delta` is assembled as `sum_j D_j^T D_j`
//! from one-sided difference factors, which makes positivity exact by
//! construction.

use crate::algebra::{GroupElement, StratifiedAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{BoxGrid, Operator};
pub use crate::linalg::SparseOperator;
use crate::par;
use serde::Deserialize;
use std::io::Write;
use std::sync::Arc;

/// Lattice geometry. `radius`/`spacing` set the box and grid; `offset`
/// shifts nodes by half a spacing per axis so none sits at the identity.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub radius: f64,
    pub spacing: f64,
    #[serde(default = "default_true")]
    pub offset: bool,
    #[serde(default = "default_budget")]
    pub max_nodes: usize,
}

fn default_true() -> bool {
    true
}

fn default_budget() -> usize {
    1 << 22
}

impl LatticeSpec {
    pub fn new(radius: f64, spacing: f64) -> Self {
        LatticeSpec {
            radius,
            spacing,
            offset: true,
            max_nodes: default_budget(),
        }
    }

    pub fn with_offset(mut self, offset: bool) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_budget(mut self, max_nodes: usize) -> Self {
        self.max_nodes = max_nodes;
        self
    }
}

/// An enumerated box lattice over a stratified algebra.
#[derive(Clone, Debug)]
pub struct Lattice {
    alg: Arc<StratifiedAlgebra>,
    spec: LatticeSpec,
    /// nodes per axis (equal on all axes)
    per_axis: usize,
    n: usize,
}

/// Real scalar function sampled on lattice nodes.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub lattice: Arc<Lattice>,
    pub values: Vec<f64>,
}

impl Lattice {
    /// Enumerate the lattice. Requires `R/h >= 2`; the node count must
    /// fit the spec budget.
    pub fn build(alg: Arc<StratifiedAlgebra>, spec: LatticeSpec) -> Result<Arc<Lattice>> {
        if !(spec.radius > 0.0) || !(spec.spacing > 0.0) {
            return Err(Error::OutOfRange {
                what: "lattice radius/spacing".into(),
                value: spec.radius.min(spec.spacing),
                range: "positive".into(),
            });
        }
        let q = (spec.radius / spec.spacing).floor() as usize;
        if q < 2 {
            return Err(Error::OutOfRange {
                what: "radius/spacing".into(),
                value: spec.radius / spec.spacing,
                range: ">= 2 (at least 4 nodes per axis)".into(),
            });
        }
        let per_axis = if spec.offset { 2 * q } else { 2 * q + 1 };
        let m = alg.dim();
        let n = per_axis
            .checked_pow(m as u32)
            .filter(|&n| n <= spec.max_nodes)
            .ok_or(Error::BudgetExceeded {
                nodes: per_axis.pow(m as u32),
                budget: spec.max_nodes,
            })?;
        Ok(Arc::new(Lattice {
            alg,
            spec,
            per_axis,
            n,
        }))
    }

    pub fn algebra(&self) -> &StratifiedAlgebra {
        &self.alg
    }

    pub fn algebra_arc(&self) -> Arc<StratifiedAlgebra> {
        self.alg.clone()
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing
    }

    /// Measure weight of one cell, `h^m` (Haar measure is Lebesgue in
    /// exponential coordinates).
    pub fn cell_volume(&self) -> f64 {
        self.spec.spacing.powi(self.alg.dim() as i32)
    }

    /// Coordinate of 1D index `i` along any axis.
    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - (self.per_axis as f64 - 1.0) / 2.0) * self.spec.spacing
    }

    /// Decompose a flat index (axis 0 fastest).
    #[inline]
    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for slot in out.iter_mut() {
            *slot = idx % self.per_axis;
            idx /= self.per_axis;
        }
    }

    #[inline]
    pub fn flat_index(&self, mi: &[usize]) -> usize {
        let mut idx = 0;
        for &i in mi.iter().rev() {
            idx = idx * self.per_axis + i;
        }
        idx
    }

    /// Coordinates of a node.
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let m = self.alg.dim();
        let mut mi = vec![0usize; m];
        self.multi_index(idx, &mut mi);
        mi.iter().map(|&i| self.axis_coord(i)).collect()
    }

    pub fn node(&self, idx: usize) -> GroupElement {
        GroupElement(self.coords(idx))
    }

    /// Distance to the box boundary in whole cells.
    pub fn boundary_cells(&self, idx: usize) -> usize {
        let m = self.alg.dim();
        let mut mi = vec![0usize; m];
        self.multi_index(idx, &mut mi);
        mi.iter()
            .map(|&i| i.min(self.per_axis - 1 - i))
            .min()
            .unwrap()
    }

    /// Tensor-grid view for the separable fast paths.
    pub fn box_grid(&self) -> BoxGrid {
        BoxGrid {
            dims: vec![self.per_axis; self.alg.dim()],
            h: self.spec.spacing,
        }
    }

    /// Coefficients of `X_j` at `x`: the list of (k, p_jk(x)) for the
    /// expansion `X_j = sum_k p_jk d_k`, from the step <= 2 closed form
    /// or a user callback.
    pub fn field_coefficients(
        &self,
        j: usize,
        x: &[f64],
        user: Option<&FieldCoefficients>,
    ) -> Result<Vec<(usize, f64)>> {
        if let Some(f) = user {
            return Ok(f(j, x));
        }
        let linear = self.alg.left_invariant_linear_terms(j)?;
        let mut out = vec![(j, 1.0)];
        for (k, terms) in linear {
            let c: f64 = terms.iter().map(|&(i, a)| a * x[i]).sum();
            if c != 0.0 {
                out.push((k, c));
            }
        }
        Ok(out)
    }
}

/// User-supplied left-invariant coefficient polynomials for algebras of
/// step > 2: maps (field index j, coordinates) to pairs (k, p_jk(x)).
pub type FieldCoefficients = dyn Fn(usize, &[f64]) -> Vec<(usize, f64)> + Sync;

impl GridFunction {
    pub fn zeros(lattice: Arc<Lattice>) -> Self {
        let n = lattice.node_count();
        GridFunction {
            lattice,
            values: vec![0.0; n],
        }
    }

    /// Sample a scalar field at all nodes.
    pub fn sample<F>(lattice: Arc<Lattice>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = lattice.node_count();
        let latt = lattice.clone();
        let values = par::map_indexed(n, |i| f(&latt.coords(i)));
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                index: bad,
                context: format!("at {:?}", lattice.coords(bad)),
            });
        }
        Ok(GridFunction { lattice, values })
    }

    /// L2 inner product with the cell-volume measure weight.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        self.lattice.cell_volume() * par::dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Operator assembly
// ---------------------------------------------------------------------------

/// Centered-difference discretization of the horizontal field `X_j`
/// (0-based, `j < m_1`). Skew-symmetric by construction because the
/// coefficient of each differenced direction does not depend on the
/// differenced coordinate for step <= 2 fields.
pub fn horizontal_field_operator(
    latt: &Lattice,
    j: usize,
    user: Option<&FieldCoefficients>,
) -> Result<SparseOperator> {
    if j >= latt.algebra().horizontal_dim() {
        return Err(Error::DimensionMismatch(format!(
            "field index {j} >= m_1 = {}",
            latt.algebra().horizontal_dim()
        )));
    }
    field_operator(latt, j, user)
}

/// Centered-difference operator for any basis field `X_j`, j < m.
pub fn field_operator(
    latt: &Lattice,
    j: usize,
    user: Option<&FieldCoefficients>,
) -> Result<SparseOperator> {
    let n = latt.node_count();
    let m = latt.algebra().dim();
    let per = latt.per_axis();
    let inv2h = 1.0 / (2.0 * latt.spacing());
    // probe once so UnsupportedStep surfaces before assembly
    let _ = latt.field_coefficients(j, &vec![0.0; m], user)?;

    let op = SparseOperator::from_rows(n, |idx| {
        let x = latt.coords(idx);
        let mut mi = vec![0usize; m];
        latt.multi_index(idx, &mut mi);
        let coeffs = latt
            .field_coefficients(j, &x, user)
            .expect("coefficients checked above");
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(2 * coeffs.len());
        for (k, c) in coeffs {
            if c == 0.0 {
                continue;
            }
            let stride = per.pow(k as u32);
            if mi[k] + 1 < per {
                row.push(((idx + stride) as u32, c * inv2h));
            }
            if mi[k] > 0 {
                row.push(((idx - stride) as u32, -c * inv2h));
            }
        }
        row
    });
    Ok(op)
}

/// One-sided (forward) difference factor `D_j` of the field `X_j`, used
/// in the sum-of-squares assembly of `-Delta`. The factor carries a
/// ring of ghost rows one cell outside the box where the zero-extended
/// function is differenced, so `D_j^T D_j` is the Dirichlet form of the
/// whole-space difference operator (for abelian algebras this is the
/// textbook 2m+1-point stencil including boundary rows).
fn forward_factor(
    latt: &Lattice,
    j: usize,
    user: Option<&FieldCoefficients>,
) -> Result<SparseOperator> {
    let n = latt.node_count();
    let m = latt.algebra().dim();
    let per = latt.per_axis();
    let invh = 1.0 / latt.spacing();
    let _ = latt.field_coefficients(j, &vec![0.0; m], user)?;

    // ghost ring: multi-indices in {-1..=per}^m with at least one
    // out-of-box component
    let mut ghosts: Vec<Vec<i64>> = Vec::new();
    {
        let mut mi = vec![-1i64; m];
        loop {
            if mi.iter().any(|&i| i < 0 || i >= per as i64) {
                ghosts.push(mi.clone());
            }
            let mut a = 0;
            loop {
                mi[a] += 1;
                if mi[a] <= per as i64 {
                    break;
                }
                mi[a] = -1;
                a += 1;
                if a == m {
                    break;
                }
            }
            if a == m {
                break;
            }
        }
    }
    let half = (per as f64 - 1.0) / 2.0;
    let h = latt.spacing();
    let coord_of = |i: i64| (i as f64 - half) * h;

    Ok(SparseOperator::from_rows_rect(n + ghosts.len(), n, |r| {
        let mut row: Vec<(u32, f64)> = Vec::new();
        if r < n {
            let x = latt.coords(r);
            let mut mi = vec![0usize; m];
            latt.multi_index(r, &mut mi);
            let coeffs = latt
                .field_coefficients(j, &x, user)
                .expect("coefficients checked above");
            for (k, c) in coeffs {
                if c == 0.0 {
                    continue;
                }
                let stride = per.pow(k as u32);
                // zero-extended forward difference (u(x+h e_k) - u(x))/h
                if mi[k] + 1 < per {
                    row.push(((r + stride) as u32, c * invh));
                }
                row.push((r as u32, -c * invh));
            }
        } else {
            let g = &ghosts[r - n];
            let x: Vec<f64> = g.iter().map(|&i| coord_of(i)).collect();
            let coeffs = latt
                .field_coefficients(j, &x, user)
                .expect("coefficients checked above");
            for (k, c) in coeffs {
                if c == 0.0 {
                    continue;
                }
                // only the forward neighbor can re-enter the box
                let mut ni = g.clone();
                ni[k] += 1;
                if ni.iter().all(|&i| i >= 0 && i < per as i64) {
                    let mut flat = 0usize;
                    for &i in ni.iter().rev() {
                        flat = flat * per + i as usize;
                    }
                    row.push((flat as u32, c * invh));
                }
            }
        }
        row
    }))
}

/// The positive operator `-Delta = sum_j D_j^T D_j` together with its
/// one-sided factors. The factors witness the quadratic-form identity
/// `<u, (-Delta) u> = sum_j |D_j u|^2`.
pub struct Sublaplacian {
    pub op: SparseOperator,
    pub factors: Vec<SparseOperator>,
}

pub fn sublaplacian(latt: &Lattice, user: Option<&FieldCoefficients>) -> Result<Sublaplacian> {
    let m1 = latt.algebra().horizontal_dim();
    let mut factors = Vec::with_capacity(m1);
    for j in 0..m1 {
        factors.push(forward_factor(latt, j, user)?);
    }
    let n = latt.node_count();
    let mut op = SparseOperator::from_triplets(n, Vec::new());
    for f in &factors {
        op = op.add_scaled(1.0, &f.ata(), 1.0);
    }
    let mut op = op;
    op.flag_symmetric(1e-12)?;
    Ok(Sublaplacian { op, factors })
}

/// Matrix-free `-Delta` for abelian lattices (standard 2m+1-point
/// stencil); identical to the assembled operator, without the memory.
pub fn box_laplacian_op(latt: &Lattice) -> Result<Operator> {
    if latt.algebra().step() != 1 {
        return Err(Error::DimensionMismatch(
            "box_laplacian_op requires an abelian algebra".into(),
        ));
    }
    Ok(Operator::BoxStencil(latt.box_grid()))
}

/// Euler operator `E = sum_j nu_j x_j X_j` over all m basis directions,
/// with centered-difference fields.
pub fn euler_operator(latt: &Lattice, user: Option<&FieldCoefficients>) -> Result<SparseOperator> {
    let n = latt.node_count();
    let m = latt.algebra().dim();
    let per = latt.per_axis();
    let inv2h = 1.0 / (2.0 * latt.spacing());
    let weights: Vec<f64> = latt.algebra().weights().iter().map(|&w| w as f64).collect();
    let _ = latt.field_coefficients(0, &vec![0.0; m], user)?;

    Ok(SparseOperator::from_rows(n, |idx| {
        let x = latt.coords(idx);
        let mut mi = vec![0usize; m];
        latt.multi_index(idx, &mut mi);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for j in 0..m {
            let amp = weights[j] * x[j];
            if amp == 0.0 {
                continue;
            }
            let coeffs = latt
                .field_coefficients(j, &x, user)
                .expect("coefficients checked above");
            for (k, c) in coeffs {
                if c == 0.0 {
                    continue;
                }
                let stride = per.pow(k as u32);
                if mi[k] + 1 < per {
                    row.push(((idx + stride) as u32, amp * c * inv2h));
                }
                if mi[k] > 0 {
                    row.push(((idx - stride) as u32, -amp * c * inv2h));
                }
            }
        }
        row
    }))
}

/// The lattice stand-in for `iA`: the real antisymmetric part
/// `S = (E - E^T)/2`, so that `A = -iS = Im E` is Hermitian. All
/// commutator forms downstream consume `S` directly.
pub fn dilation_generator(latt: &Lattice, user: Option<&FieldCoefficients>) -> Result<SparseOperator> {
    let e = euler_operator(latt, user)?;
    Ok(e.antisymmetrize())
}

/// Diagonal multiplication operator by a scalar field.
pub fn multiplication_diagonal<F>(latt: &Lattice, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = latt.node_count();
    let diag = par::map_indexed(n, |i| f(&latt.coords(i)));
    if let Some(bad) = diag.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample {
            index: bad,
            context: format!("multiplication operator at {:?}", latt.coords(bad)),
        });
    }
    Ok(diag)
}

/// `[Dil(t) u](x) = e^{Mt/2} u(dil_t x)` with multilinear interpolation;
/// points dilated outside the box read zero (Dirichlet-consistent).
/// When `e^{nu_j t}` maps nodes onto nodes (dyadic `t` on an
/// origin-symmetric lattice) the interpolation weights collapse to 0/1
/// and the pullback is exact.
pub fn dilation_pullback(latt: &Lattice, t: f64, u: &[f64]) -> Vec<f64> {
    let m = latt.algebra().dim();
    let per = latt.per_axis();
    let h = latt.spacing();
    let half = (per as f64 - 1.0) / 2.0;
    let scale = ((latt.algebra().homogeneous_dimension() as f64) * t / 2.0).exp();
    let factors: Vec<f64> = latt
        .algebra()
        .weights()
        .iter()
        .map(|&w| (w as f64 * t).exp())
        .collect();

    par::map_indexed(latt.node_count(), |idx| {
        let mut mi = vec![0usize; m];
        latt.multi_index(idx, &mut mi);
        // per-axis cell and weight of the dilated point
        let mut lo = vec![0usize; m];
        let mut frac = vec![0.0f64; m];
        for a in 0..m {
            let y = factors[a] * latt.axis_coord(mi[a]);
            let pos = y / h + half;
            if pos < -1e-12 || pos > (per - 1) as f64 + 1e-12 {
                return 0.0;
            }
            let fl = pos.floor().clamp(0.0, (per - 1) as f64);
            lo[a] = fl as usize;
            frac[a] = (pos - fl).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        'corner: for corner in 0..(1usize << m) {
            let mut w = 1.0;
            let mut cidx = 0usize;
            for a in (0..m).rev() {
                let up = (corner >> a) & 1 == 1;
                let wa = if up { frac[a] } else { 1.0 - frac[a] };
                if wa == 0.0 {
                    continue 'corner;
                }
                let ia = lo[a] + up as usize;
                if ia >= per {
                    continue 'corner;
                }
                w *= wa;
                cidx = cidx * per + ia;
            }
            acc += w * u[cidx];
        }
        scale * acc
    })
}

// ---------------------------------------------------------------------------
// Export formats
// ---------------------------------------------------------------------------

/// Write a table as delimiter-separated text (comma).
pub fn write_dsv(path: &std::path::Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", headers.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// Binary tabular format: magic `CARNOTB1`, u32 column count, u64 row
/// count, column names (u16 length + UTF-8 bytes each), then row-major
/// little-endian f64 data.
pub fn write_binary_table(
    path: &std::path::Path,
    headers: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(b"CARNOTB1")?;
    f.write_all(&(headers.len() as u32).to_le_bytes())?;
    f.write_all(&(rows.len() as u64).to_le_bytes())?;
    for h in headers {
        f.write_all(&(h.len() as u16).to_le_bytes())?;
        f.write_all(h.as_bytes())?;
    }
    for row in rows {
        for v in row {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Export a grid function as (node index, coordinates..., value) rows.
pub fn grid_function_rows(u: &GridFunction) -> Vec<Vec<f64>> {
    (0..u.values.len())
        .map(|i| {
            let mut row = vec![i as f64];
            row.extend(u.lattice.coords(i));
            row.push(u.values[i]);
            row
        })
        .collect()
}

/// Export a sparse operator as (row, col, value) triplet rows.
pub fn operator_rows(op: &SparseOperator) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(op.nnz());
    for i in 0..op.dim() {
        let (cols, vals) = op.row(i);
        for (c, v) in cols.iter().zip(vals) {
            out.push(vec![i as f64, *c as f64, *v]);
        }
    }
    out
}
