//! Stratified Lie algebras, the nilpotent group law and dilations.
//!
//! An algebra is described by its layer dimensions `m_1..m_r` and the
//! structure constants `c[i][j][k]` of `[X_i, X_j] = sum_k c[i][j][k] X_k`
//! on a graded basis. Group elements carry exponential coordinates of the
//! first kind, so the product is the Baker-Campbell-Hausdorff series,
//! which terminates at commutator depth `r`.

use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Exponential coordinates of the first kind: `x = exp(sum x_j X_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement(pub Vec<f64>);

impl GroupElement {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for GroupElement {
    fn from(v: Vec<f64>) -> Self {
        GroupElement(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Abelian(usize),
    Heisenberg(usize),
}

/// One monomial of the truncated BCH series: a word over {X, Y} with a
/// rational coefficient, contributing `coeff * [w1,[w2,...[wk-1,wk]]]`.
#[derive(Clone, Debug)]
struct BchTerm {
    word: Vec<u8>,
    coeff: f64,
}

/// A stratified nilpotent Lie algebra with validated structure constants.
#[derive(Clone, Debug)]
pub struct StratifiedAlgebra {
    layer_dims: Vec<usize>,
    weights: Vec<usize>,
    dim: usize,
    step: usize,
    hom_dim: usize,
    /// Bracket table for ordered pairs i < j: entries (i, j, targets).
    pairs: Vec<(usize, usize, Vec<(usize, f64)>)>,
    bch: Arc<Vec<BchTerm>>,
    preset: Option<Preset>,
}

/// Weight vector for given layer dimensions: `nu_j = k` iff
/// `m_{k-1} < j <= m_k` (1-based j).
pub fn weights_for(layer_dims: &[usize]) -> Vec<usize> {
    let mut w = Vec::with_capacity(layer_dims.iter().sum());
    for (k, &mk) in layer_dims.iter().enumerate() {
        w.extend(std::iter::repeat(k + 1).take(mk));
    }
    w
}

impl StratifiedAlgebra {
    /// Build and validate an algebra from layer dimensions and a bracket
    /// table given for `i < j` only (0-based indices); antisymmetry is
    /// filled in.
    pub fn new(layer_dims: &[usize], brackets: &[(usize, usize, usize, f64)]) -> Result<Self> {
        if layer_dims.is_empty() || layer_dims.contains(&0) {
            return Err(Error::DimensionMismatch(
                "layer_dims must be nonempty positive integers".into(),
            ));
        }
        let dim: usize = layer_dims.iter().sum();
        let step = layer_dims.len();
        let weights = weights_for(layer_dims);
        let hom_dim = weights.iter().sum();

        let mut map: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for &(i, j, k, v) in brackets {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::DimensionMismatch(format!(
                    "bracket index ({i},{j},{k}) out of range for dimension {dim}"
                )));
            }
            if i >= j {
                return Err(Error::DimensionMismatch(format!(
                    "bracket table must list i < j, got ({i},{j})"
                )));
            }
            if !v.is_finite() {
                return Err(Error::DimensionMismatch(format!(
                    "non-finite structure constant at ({i},{j},{k})"
                )));
            }
            if v != 0.0 {
                map.entry((i, j)).or_default().push((k, v));
            }
        }
        let mut pairs: Vec<(usize, usize, Vec<(usize, f64)>)> = map
            .into_iter()
            .map(|((i, j), mut t)| {
                t.sort_by_key(|e| e.0);
                (i, j, t)
            })
            .collect();
        pairs.sort_by_key(|&(i, j, _)| (i, j));

        let alg = StratifiedAlgebra {
            layer_dims: layer_dims.to_vec(),
            weights,
            dim,
            step,
            hom_dim,
            pairs,
            bch: bch_terms(step),
            preset: None,
        };
        alg.validate()?;
        Ok(alg)
    }

    /// The Abelian group R^m (single layer, all brackets zero).
    pub fn abelian(m: usize) -> Self {
        let mut alg = Self::new(&[m], &[]).expect("abelian preset is always valid");
        alg.preset = Some(Preset::Abelian(m));
        alg
    }

    /// The Heisenberg group H_d in the vector-field normalization
    /// `X_i = d_i + 2 x_{d+i} d_t`, `X_{d+i} = d_{d+i} - 2 x_i d_t`,
    /// which gives `[X_i, X_{d+i}] = -4 X_{2d+1}`. Other conventions use
    /// bracket coefficients of modulus 1 or 2; constants derived from
    /// this algebra depend on the normalization.
    pub fn heisenberg(d: usize) -> Self {
        assert!(d >= 1, "heisenberg(d) needs d >= 1");
        let brackets: Vec<(usize, usize, usize, f64)> =
            (0..d).map(|i| (i, d + i, 2 * d, -4.0)).collect();
        let mut alg = Self::new(&[2 * d, 1], &brackets).expect("heisenberg preset is always valid");
        alg.preset = Some(Preset::Heisenberg(d));
        alg
    }

    pub fn from_preset(p: Preset) -> Self {
        match p {
            Preset::Abelian(m) => Self::abelian(m),
            Preset::Heisenberg(d) => Self::heisenberg(d),
        }
    }

    pub fn preset(&self) -> Option<Preset> {
        self.preset
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Dimension of the first (horizontal) layer.
    pub fn horizontal_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Homogeneous dimension `M = sum_k k m_k = sum_j nu_j`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.hom_dim
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(vec![0.0; self.dim])
    }

    /// Structure constant `c[i][j][k]` (antisymmetry applied).
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        if i == j {
            return 0.0;
        }
        for &(pi, pj, ref t) in &self.pairs {
            if pi == a && pj == b {
                return sign * t.iter().find(|e| e.0 == k).map_or(0.0, |e| e.1);
            }
        }
        0.0
    }

    /// Lie bracket of coefficient vectors.
    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.bracket_into(u, v, &mut out);
        out
    }

    fn bracket_into(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for &(i, j, ref targets) in &self.pairs {
            let amp = u[i] * v[j] - u[j] * v[i];
            if amp != 0.0 {
                for &(k, c) in targets {
                    out[k] += c * amp;
                }
            }
        }
    }

    /// Group product in exponential coordinates via the truncated BCH
    /// series (exact for nilpotent step r, up to floating point).
    pub fn bch_multiply(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement> {
        if x.dim() != self.dim || y.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "group elements must have {} coordinates",
                self.dim
            )));
        }
        let mut acc = vec![0.0; self.dim];
        let mut nested = vec![0.0; self.dim];
        for term in self.bch.iter() {
            let w = &term.word;
            let last = *w.last().unwrap();
            let leaf = if last == 0 { x.coords() } else { y.coords() };
            if w.len() == 1 {
                for d in 0..self.dim {
                    acc[d] += term.coeff * leaf[d];
                }
                continue;
            }
            // right-nested bracket [w0,[w1,...[w_{k-2}, w_{k-1}]...]]
            nested.copy_from_slice(leaf);
            let mut scratch = vec![0.0; self.dim];
            let mut dead = false;
            for &letter in w[..w.len() - 1].iter().rev() {
                let arg = if letter == 0 { x.coords() } else { y.coords() };
                scratch.iter_mut().for_each(|s| *s = 0.0);
                self.bracket_into(arg, &nested, &mut scratch);
                std::mem::swap(&mut nested, &mut scratch);
                if nested.iter().all(|&v| v == 0.0) {
                    dead = true;
                    break;
                }
            }
            if !dead {
                for d in 0..self.dim {
                    acc[d] += term.coeff * nested[d];
                }
            }
        }
        Ok(GroupElement(acc))
    }

    pub fn inverse(&self, x: &GroupElement) -> GroupElement {
        GroupElement(x.coords().iter().map(|v| -v).collect())
    }

    /// Anisotropic dilation `dil_t(x)_j = e^{nu_j t} x_j`.
    pub fn dilate(&self, t: f64, x: &GroupElement) -> GroupElement {
        GroupElement(
            x.coords()
                .iter()
                .enumerate()
                .map(|(j, &v)| (self.weights[j] as f64 * t).exp() * v)
                .collect(),
        )
    }

    /// First-layer coordinates and their Euclidean norm.
    pub fn horizontal_part(&self, x: &GroupElement) -> (Vec<f64>, f64) {
        let m1 = self.layer_dims[0];
        let tilde: Vec<f64> = x.coords()[..m1].to_vec();
        let norm = tilde.iter().map(|v| v * v).sum::<f64>().sqrt();
        (tilde, norm)
    }

    /// Coefficient polynomials of the left-invariant field `X_j` in
    /// exponential coordinates. Valid in closed form for step <= 2:
    /// `X_j = d_j + (1/2) sum_{i,k} x_i c[i][j][k] d_k`.
    ///
    /// Returns, for every coordinate direction `k != j` that X_j touches,
    /// the linear form `sum_i coef_i x_i` as a list of `(i, coef)`.
    pub fn left_invariant_linear_terms(&self, j: usize) -> Result<Vec<(usize, Vec<(usize, f64)>)>> {
        if self.step > 2 {
            return Err(Error::UnsupportedStep { step: self.step });
        }
        let mut per_k: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for i in 0..self.dim {
            if i == j {
                continue;
            }
            for k in 0..self.dim {
                let c = self.structure_constant(i, j, k);
                if c != 0.0 {
                    per_k.entry(k).or_default().push((i, 0.5 * c));
                }
            }
        }
        let mut out: Vec<(usize, Vec<(usize, f64)>)> = per_k.into_iter().collect();
        out.iter_mut().for_each(|(_, v)| v.sort_by_key(|e| e.0));
        out.sort_by_key(|e| e.0);
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        // Grading compatibility: c[i][j][k] != 0 forces nu_k = nu_i + nu_j.
        for &(i, j, ref targets) in &self.pairs {
            for &(k, v) in targets {
                let (wi, wj, wk) = (self.weights[i], self.weights[j], self.weights[k]);
                if wi + wj != wk {
                    return Err(Error::GradingViolation {
                        i,
                        j,
                        k,
                        value: v,
                        wi,
                        wj,
                        wk,
                    });
                }
            }
        }
        // Jacobi identity by direct summation on basis triples.
        let mut ei = vec![0.0; self.dim];
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                for k in (j + 1)..self.dim {
                    ei.iter_mut().for_each(|v| *v = 0.0);
                    let mut acc = vec![0.0; self.dim];
                    self.jacobi_term(i, j, k, &mut acc);
                    self.jacobi_term(j, k, i, &mut acc);
                    self.jacobi_term(k, i, j, &mut acc);
                    let residual = acc.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    let scale = self.bracket_scale();
                    if residual > 1e-12 * scale.max(1.0) * scale.max(1.0) {
                        return Err(Error::JacobiViolation { i, j, k, residual });
                    }
                }
            }
        }
        // Stratification: layer k+1 must be spanned by [v_1, v_k].
        self.check_generation()?;
        Ok(())
    }

    /// acc += [[X_a, X_b], X_c]
    fn jacobi_term(&self, a: usize, b: usize, c: usize, acc: &mut [f64]) {
        let mut ea = vec![0.0; self.dim];
        let mut eb = vec![0.0; self.dim];
        let mut ec = vec![0.0; self.dim];
        ea[a] = 1.0;
        eb[b] = 1.0;
        ec[c] = 1.0;
        let ab = self.bracket(&ea, &eb);
        self.bracket_into(&ab, &ec, acc);
    }

    fn bracket_scale(&self) -> f64 {
        self.pairs
            .iter()
            .flat_map(|(_, _, t)| t.iter().map(|e| e.1.abs()))
            .fold(0.0, f64::max)
    }

    fn check_generation(&self) -> Result<()> {
        let m1 = self.layer_dims[0];
        for k in 0..self.step - 1 {
            let start_k: usize = self.layer_dims[..k].iter().sum();
            let start_next: usize = self.layer_dims[..k + 1].iter().sum();
            let dim_next = self.layer_dims[k + 1];
            // images [X_i, X_j] with nu_i = 1, nu_j = k+1, projected on layer k+2
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for i in 0..m1 {
                for j in start_k..start_next {
                    let mut ei = vec![0.0; self.dim];
                    let mut ej = vec![0.0; self.dim];
                    ei[i] = 1.0;
                    ej[j] = 1.0;
                    let br = self.bracket(&ei, &ej);
                    let row: Vec<f64> = br[start_next..start_next + dim_next].to_vec();
                    if row.iter().any(|&v| v != 0.0) {
                        rows.push(row);
                    }
                }
            }
            if rank(&mut rows) < dim_next {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} (dim {}) is not generated by [v1, v{}]; algebra is graded but not stratified",
                    k + 2,
                    dim_next,
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Row rank by Gaussian elimination with partial pivoting (destructive).
fn rank(rows: &mut [Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncol = rows[0].len();
    let mut r = 0;
    for c in 0..ncol {
        let Some(p) = (r..rows.len()).max_by(|&a, &b| {
            rows[a][c].abs().partial_cmp(&rows[b][c].abs()).unwrap()
        }) else {
            break;
        };
        if rows[p][c].abs() < 1e-12 {
            continue;
        }
        rows.swap(r, p);
        for q in (r + 1)..rows.len() {
            let f = rows[q][c] / rows[r][c];
            if f != 0.0 {
                for cc in c..ncol {
                    let sub = f * rows[r][cc];
                    rows[q][cc] -= sub;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

// ---------------------------------------------------------------------------
// BCH series via the Dynkin formula
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Frac {
    num: i128,
    den: i128,
}

impl Frac {
    fn new(num: i128, den: i128) -> Self {
        Frac { num, den }.reduce()
    }

    fn reduce(self) -> Self {
        let g = gcd(self.num.unsigned_abs(), self.den.unsigned_abs()) as i128;
        let s = if self.den < 0 { -1 } else { 1 };
        if g == 0 {
            return Frac { num: 0, den: 1 };
        }
        Frac {
            num: s * self.num / g,
            den: s * self.den / g,
        }
    }

    fn add(self, other: Frac) -> Frac {
        Frac::new(
            self.num * other.den + other.num * self.den,
            self.den * other.den,
        )
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product::<i128>().max(1)
}

/// Dynkin-formula terms of the BCH series up to total degree `step`,
/// deduplicated per word; words whose right-nested bracket vanishes
/// identically (repeated trailing letter) are dropped. Cached per step.
fn bch_terms(step: usize) -> Arc<Vec<BchTerm>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<BchTerm>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(t) = guard.get(&step) {
        return t.clone();
    }
    assert!(step <= 6, "BCH coefficient table supports step <= 6");

    let mut words: HashMap<Vec<u8>, Frac> = HashMap::new();
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    enumerate_blocks(step, 0, &mut blocks, &mut words);

    let mut terms: Vec<BchTerm> = words
        .into_iter()
        .filter(|(w, c)| {
            c.num != 0 && !(w.len() >= 2 && w[w.len() - 1] == w[w.len() - 2])
        })
        .map(|(word, coeff)| BchTerm {
            word,
            coeff: coeff.to_f64(),
        })
        .collect();
    terms.sort_by(|a, b| (a.word.len(), &a.word).cmp(&(b.word.len(), &b.word)));
    let arc = Arc::new(terms);
    guard.insert(step, arc.clone());
    arc
}

fn enumerate_blocks(
    max_deg: usize,
    used: usize,
    blocks: &mut Vec<(usize, usize)>,
    words: &mut HashMap<Vec<u8>, Frac>,
) {
    if !blocks.is_empty() {
        record_tuple(blocks, used, words);
    }
    for s in 1..=(max_deg - used) {
        for p in 0..=s {
            let q = s - p;
            blocks.push((p, q));
            enumerate_blocks(max_deg, used + s, blocks, words);
            blocks.pop();
        }
    }
}

fn record_tuple(blocks: &[(usize, usize)], degree: usize, words: &mut HashMap<Vec<u8>, Frac>) {
    let n = blocks.len() as i128;
    let mut den = n * degree as i128;
    let mut word = Vec::with_capacity(degree);
    for &(p, q) in blocks {
        den *= factorial(p) * factorial(q);
        word.extend(std::iter::repeat(0u8).take(p));
        word.extend(std::iter::repeat(1u8).take(q));
    }
    let sign = if blocks.len() % 2 == 1 { 1 } else { -1 };
    let contrib = Frac::new(sign, den);
    let entry = words.entry(word).or_insert(Frac { num: 0, den: 1 });
    *entry = entry.add(contrib);
}

// ---------------------------------------------------------------------------
// Quasi-norms
// ---------------------------------------------------------------------------

/// Homogeneous quasi-norms: `q(dil_t x) = e^t q(x)`, vanishing only at e.
#[derive(Clone)]
pub enum QuasiNorm {
    /// `(sum_j |x_j|^{2 r!/nu_j})^{1/(2 r!)}` — works on every algebra.
    PowerSum,
    /// `rho(z,t) = (|z|^4 + t^2)^{1/4}` on Heisenberg presets; the
    /// quasi-norm whose power is the fundamental solution of `-Delta`.
    HeisenbergRho,
    /// Euclidean norm; homogeneous only on abelian (step 1) algebras.
    Euclidean,
    /// User-supplied callback, homogeneity-checked at construction.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for QuasiNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuasiNorm::PowerSum => write!(f, "PowerSum"),
            QuasiNorm::HeisenbergRho => write!(f, "HeisenbergRho"),
            QuasiNorm::Euclidean => write!(f, "Euclidean"),
            QuasiNorm::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl QuasiNorm {
    /// Wrap a user callback, probing degree-1 homogeneity and vanishing
    /// at the identity on a deterministic point set.
    pub fn custom<F>(alg: &StratifiedAlgebra, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let m = alg.dim();
        if f(&vec![0.0; m]).abs() > 1e-12 {
            return Err(Error::OutOfRange {
                what: "custom quasi-norm at identity".into(),
                value: f(&vec![0.0; m]),
                range: "must vanish at e".into(),
            });
        }
        for s in 0..8 {
            let x: Vec<f64> = (0..m)
                .map(|j| ((s * m + j) as f64 * 0.7391 + 0.13).sin() * 2.0)
                .collect();
            let ge = GroupElement(x.clone());
            for &t in &[-0.9, 0.37, 1.1] {
                let fx = f(&x);
                let fdx = f(alg.dilate(t, &ge).coords());
                if (fdx - t.exp() * fx).abs() > 1e-9 * (1.0 + fx.abs()) {
                    return Err(Error::OutOfRange {
                        what: "custom quasi-norm homogeneity defect".into(),
                        value: fdx - t.exp() * fx,
                        range: "|q(dil_t x) - e^t q(x)| <= 1e-9".into(),
                    });
                }
            }
        }
        Ok(QuasiNorm::Custom(Arc::new(f)))
    }

    pub fn evaluate(&self, alg: &StratifiedAlgebra, x: &[f64]) -> Result<f64> {
        match self {
            QuasiNorm::PowerSum => Ok(power_sum_norm(alg, x)),
            QuasiNorm::Euclidean => {
                if alg.step() != 1 {
                    return Err(Error::DimensionMismatch(
                        "euclidean quasi-norm is homogeneous only on abelian algebras".into(),
                    ));
                }
                Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            QuasiNorm::HeisenbergRho => {
                let d = heisenberg_d(alg)?;
                let z2: f64 = x[..2 * d].iter().map(|v| v * v).sum();
                let t = x[2 * d];
                Ok((z2 * z2 + t * t).powf(0.25))
            }
            QuasiNorm::Custom(f) => Ok(f(x)),
        }
    }
}

fn heisenberg_d(alg: &StratifiedAlgebra) -> Result<usize> {
    match alg.preset() {
        Some(Preset::Heisenberg(d)) => Ok(d),
        _ => Err(Error::DimensionMismatch(
            "HeisenbergRho quasi-norm requires a heisenberg(d) preset".into(),
        )),
    }
}

/// Power-sum norm evaluated in scaled form so the huge exponents
/// 2 r!/nu_j cannot overflow.
fn power_sum_norm(alg: &StratifiedAlgebra, x: &[f64]) -> f64 {
    let r = alg.step();
    let two_rfact = 2.0 * factorial(r) as f64;
    // homogeneous scale of x
    let mut s: f64 = 0.0;
    for (j, &v) in x.iter().enumerate() {
        let w = alg.weights()[j] as f64;
        s = s.max(v.abs().powf(1.0 / w));
    }
    if s == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (j, &v) in x.iter().enumerate() {
        let w = alg.weights()[j] as f64;
        let ratio = v.abs() / s.powf(w); // <= 1
        sum += ratio.powf(two_rfact / w);
    }
    s * sum.powf(1.0 / two_rfact)
}

/// Horizontal gradient modulus of the Heisenberg quasi-norm:
/// `|grad rho| = |z| / rho`, so `(grad rho)^2 / rho^2 = |z|^2/(|z|^4+t^2)`.
pub fn gradient_rho(alg: &StratifiedAlgebra, x: &[f64]) -> Result<f64> {
    let d = heisenberg_d(alg)?;
    let z2: f64 = x[..2 * d].iter().map(|v| v * v).sum();
    let t = x[2 * d];
    let rho4 = z2 * z2 + t * t;
    if rho4 == 0.0 {
        return Err(Error::OriginSingular("gradient_rho at the identity".into()));
    }
    Ok(z2.sqrt() / rho4.powf(0.25))
}

// ---------------------------------------------------------------------------
// Algebra definition files
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgebraFile {
    preset: Option<String>,
    layers: Option<Vec<usize>>,
    /// entries (i, j, k, value), 1-based indices, i < j
    brackets: Option<Vec<(usize, usize, usize, f64)>>,
}

/// Parse a preset name such as `abelian(3)` or `heisenberg(1)`.
pub fn parse_preset(s: &str) -> Result<Preset> {
    let s = s.trim();
    let parse_arg = |inner: &str| -> Result<usize> {
        inner
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::parse(format!("bad preset argument in '{s}'")))
    };
    if let Some(rest) = s.strip_prefix("abelian(").and_then(|r| r.strip_suffix(')')) {
        return Ok(Preset::Abelian(parse_arg(rest)?));
    }
    if let Some(rest) = s
        .strip_prefix("heisenberg(")
        .and_then(|r| r.strip_suffix(')'))
    {
        return Ok(Preset::Heisenberg(parse_arg(rest)?));
    }
    Err(Error::parse(format!(
        "unknown preset '{s}' (expected abelian(m) or heisenberg(d))"
    )))
}

/// Load an algebra definition from structured text. Recognized keys:
/// `layers` (integer list), `brackets` (list of (i, j, k, value) with
/// 1-based indices), `preset` (string). Unknown keys are rejected.
/// A preset, when present, takes precedence and the table is ignored.
pub fn algebra_from_str(text: &str) -> Result<StratifiedAlgebra> {
    let file: AlgebraFile = toml::from_str(text).map_err(|e| Error::parse(e.to_string()))?;
    if let Some(p) = &file.preset {
        return Ok(StratifiedAlgebra::from_preset(parse_preset(p)?));
    }
    let layers = file
        .layers
        .ok_or_else(|| Error::parse("algebra file needs either `preset` or `layers`"))?;
    let brackets: Vec<(usize, usize, usize, f64)> = file
        .brackets
        .unwrap_or_default()
        .into_iter()
        .map(|(i, j, k, v)| {
            if i == 0 || j == 0 || k == 0 {
                Err(Error::parse("bracket indices are 1-based"))
            } else {
                Ok((i - 1, j - 1, k - 1, v))
            }
        })
        .collect::<Result<_>>()?;
    StratifiedAlgebra::new(&layers, &brackets)
}

pub fn algebra_from_file(path: &std::path::Path) -> Result<StratifiedAlgebra> {
    algebra_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engel_like() -> StratifiedAlgebra {
        // layers (3,2,1): X4=[X1,X2], X5=[X1,X3], X6=[X1,X4]
        StratifiedAlgebra::new(
            &[3, 2, 1],
            &[(0, 1, 3, 1.0), (0, 2, 4, 1.0), (0, 3, 5, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn presets_have_expected_invariants() {
        let ab = StratifiedAlgebra::abelian(3);
        assert_eq!(ab.step(), 1);
        assert_eq!(ab.dim(), 3);
        assert_eq!(ab.homogeneous_dimension(), 3);

        let h1 = StratifiedAlgebra::heisenberg(1);
        assert_eq!(h1.layer_dims(), &[2, 1]);
        assert_eq!(h1.dim(), 3);
        assert_eq!(h1.homogeneous_dimension(), 4);
        assert_eq!(h1.weights(), &[1, 1, 2]);
        assert_eq!(h1.structure_constant(0, 1, 2), -4.0);
        assert_eq!(h1.structure_constant(1, 0, 2), 4.0);

        for d in 1..=3 {
            let hd = StratifiedAlgebra::heisenberg(d);
            assert_eq!(hd.homogeneous_dimension(), 2 * d + 2);
        }
    }

    #[test]
    fn random_gradings_satisfy_weight_sum() {
        let mut s = 0x9e3779b97f4a7c15u64;
        for _ in 0..100 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = 1 + (s >> 33) as usize % 6;
            let dims: Vec<usize> = (0..r)
                .map(|k| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    1 + ((s >> 37) as usize + k) % 4
                })
                .collect();
            let w = weights_for(&dims);
            let m_formula: usize = dims.iter().enumerate().map(|(k, &mk)| (k + 1) * mk).sum();
            assert_eq!(w.iter().sum::<usize>(), m_formula);
        }
    }

    #[test]
    fn bch_abelian_is_addition() {
        let ab = StratifiedAlgebra::abelian(3);
        let p = ab
            .bch_multiply(
                &GroupElement(vec![1.0, 2.0, 3.0]),
                &GroupElement(vec![4.0, 5.0, 6.0]),
            )
            .unwrap();
        assert_eq!(p.coords(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn bch_heisenberg_product() {
        let h1 = StratifiedAlgebra::heisenberg(1);
        let p = h1
            .bch_multiply(
                &GroupElement(vec![1.0, 0.0, 0.0]),
                &GroupElement(vec![0.0, 1.0, 0.0]),
            )
            .unwrap();
        // x + y + [x,y]/2 with [X1,X2] = -4 X3
        assert!((p.coords()[0] - 1.0).abs() < 1e-15);
        assert!((p.coords()[1] - 1.0).abs() < 1e-15);
        assert!((p.coords()[2] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn bch_inverse_gives_identity() {
        let alg = engel_like();
        let x = GroupElement(vec![0.7, -1.3, 0.4, 2.0, -0.6, 1.1]);
        let inv = alg.inverse(&x);
        let e = alg.bch_multiply(&x, &inv).unwrap();
        for &v in e.coords() {
            assert!(v.abs() < 1e-12, "inverse defect {v}");
        }
    }

    #[test]
    fn bch_associative_on_step3() {
        let alg = engel_like();
        let mut s = 12345u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..50 {
            let x = GroupElement((0..6).map(|_| rnd()).collect());
            let y = GroupElement((0..6).map(|_| rnd()).collect());
            let z = GroupElement((0..6).map(|_| rnd()).collect());
            let xy_z = alg
                .bch_multiply(&alg.bch_multiply(&x, &y).unwrap(), &z)
                .unwrap();
            let x_yz = alg
                .bch_multiply(&x, &alg.bch_multiply(&y, &z).unwrap())
                .unwrap();
            let scale: f64 = xy_z.coords().iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (a, b) in xy_z.coords().iter().zip(x_yz.coords()) {
                assert!((a - b).abs() <= 1e-10 * scale, "associativity defect {}", a - b);
            }
        }
    }

    #[test]
    fn dilation_is_group_automorphism() {
        let h1 = StratifiedAlgebra::heisenberg(1);
        let x = GroupElement(vec![0.3, -1.2, 0.8]);
        let y = GroupElement(vec![-0.5, 0.9, 2.0]);
        for &t in &[-1.0, 0.31, 2.2] {
            let lhs = h1.dilate(t, &h1.bch_multiply(&x, &y).unwrap());
            let rhs = h1
                .bch_multiply(&h1.dilate(t, &x), &h1.dilate(t, &y))
                .unwrap();
            for (a, b) in lhs.coords().iter().zip(rhs.coords()) {
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
        // dilate(t=ln 2) on (1,1,-2) with weights (1,1,2)
        let d = h1.dilate(2.0f64.ln(), &GroupElement(vec![1.0, 1.0, -2.0]));
        assert!((d.coords()[0] - 2.0).abs() < 1e-14);
        assert!((d.coords()[1] - 2.0).abs() < 1e-14);
        assert!((d.coords()[2] + 8.0).abs() < 1e-13);
    }

    #[test]
    fn dilation_composes_additively() {
        let alg = engel_like();
        let x = GroupElement(vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.25]);
        let a = alg.dilate(0.4, &alg.dilate(0.6, &x));
        let b = alg.dilate(1.0, &x);
        for (u, v) in a.coords().iter().zip(b.coords()) {
            assert!((u - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn quasi_norm_examples_and_homogeneity() {
        let h1 = StratifiedAlgebra::heisenberg(1);
        let rho = QuasiNorm::HeisenbergRho;
        assert!((rho.evaluate(&h1, &[0.0, 0.0, 4.0]).unwrap() - 2.0).abs() < 1e-15);

        // Remark-4.3 weights at (1,0,0): all three equal 1.
        assert!((gradient_rho(&h1, &[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);

        let ab3 = StratifiedAlgebra::abelian(3);
        let kinds: Vec<(QuasiNorm, &StratifiedAlgebra)> = vec![
            (QuasiNorm::PowerSum, &h1),
            (QuasiNorm::HeisenbergRho, &h1),
            (QuasiNorm::PowerSum, &ab3),
            (QuasiNorm::Euclidean, &ab3),
        ];
        let t = 3.0f64.ln();
        for (kind, alg) in kinds {
            for seed in 0..20 {
                let x: Vec<f64> = (0..alg.dim())
                    .map(|j| ((seed * 7 + j) as f64 * 0.917).sin() * 3.0)
                    .collect();
                let q0 = kind.evaluate(alg, &x).unwrap();
                let q1 = kind
                    .evaluate(alg, alg.dilate(t, &GroupElement(x.clone())).coords())
                    .unwrap();
                assert!(
                    (q1 - 3.0 * q0).abs() <= 1e-12 * (1.0 + q0.abs() * 3.0),
                    "homogeneity defect {} for {kind:?}",
                    q1 - 3.0 * q0
                );
            }
            assert_eq!(kind.evaluate(alg, &vec![0.0; alg.dim()]).unwrap(), 0.0);
        }
    }

    #[test]
    fn power_sum_matches_euclidean_on_abelian() {
        let ab = StratifiedAlgebra::abelian(3);
        let x = [1.0, -2.0, 2.0];
        let q = QuasiNorm::PowerSum.evaluate(&ab, &x).unwrap();
        assert!((q - 3.0).abs() < 1e-12);
    }

    #[test]
    fn horizontal_part_examples() {
        let h1 = StratifiedAlgebra::heisenberg(1);
        let (tilde, norm) = h1.horizontal_part(&GroupElement(vec![3.0, 4.0, 7.0]));
        assert_eq!(tilde, vec![3.0, 4.0]);
        assert_eq!(norm, 5.0);

        // dilate covariance: first layer has weight 1
        let x = GroupElement(vec![3.0, 4.0, 7.0]);
        let (_, n1) = h1.horizontal_part(&h1.dilate(0.7, &x));
        assert!((n1 - 0.7f64.exp() * 5.0).abs() < 1e-12);

        let ab = StratifiedAlgebra::abelian(4);
        let (tilde, _) = ab.horizontal_part(&GroupElement(vec![1.0, 2.0, 3.0, 4.0]));
        assert_eq!(tilde.len(), 4);
    }

    #[test]
    fn build_rejects_bad_structures() {
        // grading violation: [X1,X2] into layer 1
        let err = StratifiedAlgebra::new(&[2, 1], &[(0, 1, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::GradingViolation { .. }));

        // grading violation: bracket of weights 1+2 in a step-2 algebra
        let err = StratifiedAlgebra::new(&[2, 1], &[(0, 2, 2, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::GradingViolation { .. }));

        // Jacobi violation on layers (3,2,1): with [X1,X2]=X4, [X2,X3]=X4,
        // [X1,X3]=X5 and [X1,X4]=X6 the cyclic sum over (1,2,3) is -X6.
        let err = StratifiedAlgebra::new(
            &[3, 2, 1],
            &[
                (0, 1, 3, 1.0),
                (0, 2, 4, 1.0),
                (1, 2, 3, 1.0),
                (0, 3, 5, 1.0),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::JacobiViolation { .. }), "got {err:?}");

        // graded but not stratified: second layer not generated
        let err = StratifiedAlgebra::new(&[2, 1], &[]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn bch_terms_match_low_order_coefficients() {
        let terms = bch_terms(3);
        let find = |w: &[u8]| {
            terms
                .iter()
                .find(|t| t.word == w)
                .map(|t| t.coeff)
                .unwrap_or(0.0)
        };
        assert_eq!(find(&[0]), 1.0);
        assert_eq!(find(&[1]), 1.0);
        assert!((find(&[0, 1]) - 0.25).abs() < 1e-15);
        assert!((find(&[1, 0]) + 0.25).abs() < 1e-15);
        // degree-3 words recombine to 1/12 [X,[X,Y]] + 1/12 [Y,[Y,X]]
        assert!((find(&[0, 0, 1]) - 1.0 / 36.0).abs() < 1e-15);
        assert!((find(&[0, 1, 0]) + 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn algebra_file_round_trip() {
        let alg = algebra_from_str("preset = \"heisenberg(2)\"\n").unwrap();
        assert_eq!(alg.dim(), 5);
        assert_eq!(alg.homogeneous_dimension(), 6);

        let alg = algebra_from_str("layers = [2, 1]\nbrackets = [[1, 2, 3, -4.0]]\n").unwrap();
        assert_eq!(alg.structure_constant(0, 1, 2), -4.0);

        let err = algebra_from_str("layers = [2, 1]\nunknown_key = 3\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { .. }));
    }

    #[test]
    fn custom_quasi_norm_checked() {
        let h1 = StratifiedAlgebra::heisenberg(1);
        let ok = QuasiNorm::custom(&h1, |x: &[f64]| {
            (x[0].powi(4) + x[1].powi(4) + x[2] * x[2]).powf(0.25)
        });
        assert!(ok.is_ok());
        let bad = QuasiNorm::custom(&h1, |x: &[f64]| x.iter().map(|v| v.abs()).sum());
        assert!(bad.is_err());
    }
}
