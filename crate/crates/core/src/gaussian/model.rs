//! The truncated Hilbert-space family `H_K = L²(Q_K, μ_K)` in Hermite bases.
//!
//! Each space gets the orthonormal basis `Π_k h_{n_k}((Σ_K^{-1/2} x)_k)`,
//! `n_k < N`, little-endian over the sorted coordinates. `Φ = φ*` acts as
//! `ψ ↦ ψ ∘ φ`; in whitened variables `φ` becomes an orthogonal matrix `T`
//! and `Φ[a, c] = E_u[h_a(u) h_c(T u)]`, `u ~ N(0, I)`. When `T` is a
//! permutation (independent coordinates) so is `Φ`; otherwise the entries
//! are computed by tensor Gauss–Hermite quadrature, which is exact for the
//! truncated polynomials as long as the order is at least `2N` and at most
//! three coordinates are involved.

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};
use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config_space::{self, CoordinateModel, FMat};
use super::hermite::{gauss_hermite, hermite_values};
use crate::directed::DirectedFamily;
use crate::error::{Error, Result};
use crate::factorized::{FactorIso, Factorization, FactorizedFamily, HilbertSpace, TripleIso, DEFAULT_UNITARITY_TOL};
use crate::label::{IndexSet, Label};
use crate::scalar::{c, Field, RMat, Real};
use crate::unitary::{Permutation, Unitary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// Independent standard Gaussians; `ω` zero-pads.
    AxisAligned,
    /// AR(1) chain `x_{k+1} = s·x_k + y_{k+1}` along the sorted coordinates;
    /// `ω_{{k,k+1},{k}}(q) = (q, s·q)`.
    Sheared { shear: f64 },
    /// Explicit covariance over the coordinate universe (row-major).
    Custom { covariance: Vec<Vec<f64>> },
}

fn default_tag() -> String {
    "f".to_owned()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    /// Opaque momentum tag carried by every label of the family.
    #[serde(default = "default_tag")]
    pub tag: String,
    pub coords: IndexSet,
    pub variant: Variant,
    /// Hermite functions per coordinate.
    pub truncation: usize,
    /// Gauss–Hermite nodes per coordinate; `2·truncation` when absent.
    #[serde(default)]
    pub quadrature_order: Option<usize>,
    /// Unitarity tolerance of the resulting family.
    #[serde(default)]
    pub unitarity_tol: Option<f64>,
}

impl GaussianSpec {
    pub fn new(coords: IndexSet, variant: Variant, truncation: usize) -> Self {
        Self { tag: default_tag(), coords, variant, truncation, quadrature_order: None, unitarity_tol: None }
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature_order.unwrap_or(2 * self.truncation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation < 2 {
            return Err(Error::InvalidParameter(format!("truncation order must be ≥ 2, got {}", self.truncation)));
        }
        if self.quadrature() < self.truncation {
            return Err(Error::InvalidParameter(format!(
                "quadrature order {} is below the truncation order {}",
                self.quadrature(),
                self.truncation
            )));
        }
        match &self.variant {
            Variant::Sheared { shear } if !(shear.is_finite() && shear.abs() < 1.0) => {
                Err(Error::InvalidParameter(format!("shear parameter must satisfy |s| < 1, got {shear}")))
            }
            Variant::Custom { covariance } if covariance.iter().any(|r| r.len() != self.coords.len()) => {
                Err(Error::InvalidParameter("covariance rows must match the coordinate count".into()))
            }
            _ => Ok(()),
        }
    }

    /// Covariance model over the chosen field.
    pub fn coordinate_model<F: Field>(&self) -> Result<CoordinateModel<F>> {
        self.validate()?;
        let u = self.coords.clone();
        match &self.variant {
            Variant::AxisAligned => Ok(CoordinateModel::independent(u)),
            Variant::Sheared { shear } => Ok(CoordinateModel::ar1(u, F::from_f64_exact(*shear))),
            Variant::Custom { covariance } => {
                let n = u.len();
                if covariance.len() != n {
                    return Err(Error::InvalidParameter(format!("covariance has {} rows, expected {n}", covariance.len())));
                }
                let m = FMat::from_fn(n, n, |i, j| F::from_f64_exact(covariance[i][j]));
                CoordinateModel::custom(u, m)
            }
        }
    }
}

/// A `Φ` matrix: an exact basis permutation or a dense real matrix.
#[derive(Clone, Debug)]
pub enum PhiMatrix<R: Real> {
    Permutation(Permutation),
    Dense(RMat<R>),
}

impl<R: Real> PhiMatrix<R> {
    pub fn dim(&self) -> usize {
        match self {
            PhiMatrix::Permutation(p) => p.len(),
            PhiMatrix::Dense(m) => m.ncols(),
        }
    }

    pub fn to_dense(&self) -> RMat<R> {
        match self {
            PhiMatrix::Permutation(p) => {
                let n = p.len();
                let mut m = RMat::zeros(n, n);
                for (j, &i) in p.image().iter().enumerate() {
                    m[(i, j)] = R::one();
                }
                m
            }
            PhiMatrix::Dense(m) => m.clone(),
        }
    }

    pub fn to_unitary(&self) -> Unitary<R> {
        match self {
            PhiMatrix::Permutation(p) => Unitary::Permutation(p.clone()),
            PhiMatrix::Dense(m) => Unitary::Dense(m.map(c)),
        }
    }

    pub fn apply(&self, v: &[R]) -> Vec<R> {
        match self {
            PhiMatrix::Permutation(p) => {
                let mut out = vec![R::zero(); v.len()];
                for (j, &i) in p.image().iter().enumerate() {
                    out[i] = v[j];
                }
                out
            }
            PhiMatrix::Dense(m) => (m * DMatrixView::from_slice(v, v.len(), 1)).as_slice().to_vec(),
        }
    }

    pub fn apply_transpose(&self, v: &[R]) -> Vec<R> {
        match self {
            PhiMatrix::Permutation(p) => p.image().iter().map(|&i| v[i]).collect(),
            PhiMatrix::Dense(m) => m.tr_mul(&DMatrixView::from_slice(v, v.len(), 1)).as_slice().to_vec(),
        }
    }
}

/// Symmetric square root and inverse square root of an SPD matrix; exact
/// entrywise roots when the matrix is diagonal.
pub fn sqrt_pair<R: Real>(cov: &FMat<f64>) -> Result<(RMat<R>, RMat<R>)> {
    let n = cov.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || cov[(i, j)] == 0.0));
    if diagonal {
        if (0..n).any(|i| cov[(i, i)] <= 0.0) {
            return Err(Error::InvalidParameter("covariance is not positive definite".into()));
        }
        let s = RMat::from_fn(n, n, |i, j| if i == j { R::lit(cov[(i, i)].sqrt()) } else { R::zero() });
        let si = RMat::from_fn(n, n, |i, j| if i == j { R::lit(1.0 / cov[(i, i)].sqrt()) } else { R::zero() });
        return Ok((s, si));
    }
    let m = DMatrix::<R>::from_fn(n, n, |i, j| R::lit(cov[(i, j)]));
    let e = SymmetricEigen::try_new(m, R::default_epsilon(), 0)
        .ok_or_else(|| Error::Eigensolver("covariance square root".into()))?;
    if e.eigenvalues.iter().any(|&v| v <= R::zero()) {
        return Err(Error::InvalidParameter("covariance is not positive definite".into()));
    }
    let v = &e.eigenvectors;
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.sqrt()));
    let di = DMatrix::from_diagonal(&e.eigenvalues.map(|x| R::one() / x.sqrt()));
    Ok((v * d * v.transpose(), v * di * v.transpose()))
}

fn to_real<R: Real>(m: &FMat<f64>) -> RMat<R> {
    RMat::from_fn(m.nrows(), m.ncols(), |i, j| R::lit(m[(i, j)]))
}

fn hstack_r<R: Real>(a: &RMat<R>, b: &RMat<R>) -> RMat<R> {
    let mut out = RMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// `T` as a permutation `Φ`, when its entries are exactly 0/1 with one 1
/// per row and column.
fn permutation_from_transform<R: Real>(t: &RMat<R>, n: usize) -> Option<Permutation> {
    let d = t.nrows();
    let mut src = vec![usize::MAX; d]; // input variable i ← output coordinate src[i]
    for k in 0..d {
        for i in 0..d {
            let v = t[(k, i)];
            if v == R::one() {
                if src[i] != usize::MAX {
                    return None;
                }
                src[i] = k;
            } else if v != R::zero() {
                return None;
            }
        }
    }
    if src.contains(&usize::MAX) {
        return None;
    }
    let dim = n.pow(d as u32);
    let image = (0..dim)
        .map(|cidx| {
            let digit = |k: usize| (cidx / n.pow(k as u32)) % n;
            (0..d).map(|i| digit(src[i]) * n.pow(i as u32)).sum()
        })
        .collect();
    Some(Permutation::from_image(image).expect("digit relabelling is a bijection"))
}

/// `Φ[a, c] = Σ_u w(u) h_a(u) h_c(T u)` over a tensor Gauss–Hermite grid,
/// contracted one axis at a time.
pub fn phi_from_transform<R: Real>(t: &RMat<R>, n: usize, x: &[R], w: &[R]) -> RMat<R> {
    let d = t.nrows();
    let q = x.len();
    let dim = n.pow(d as u32);
    let nodes = q.pow(d as u32);
    // hk[k][m * nodes + node] = h_m((T z)_k)
    let mut hk = vec![vec![R::zero(); n * nodes]; d];
    let mut z = vec![R::zero(); d];
    for node in 0..nodes {
        let mut rest = node;
        for zi in z.iter_mut() {
            *zi = x[rest % q];
            rest /= q;
        }
        for (k, hrow) in hk.iter_mut().enumerate() {
            let y = (0..d).fold(R::zero(), |acc, i| acc + t[(k, i)] * z[i]);
            for (m, v) in hermite_values(n, y).into_iter().enumerate() {
                hrow[m * nodes + node] = v;
            }
        }
    }
    let at = RMat::from_fn(q, n, |j, a| w[j] * hermite_values(n, x[j])[a]);
    let columns: Vec<Vec<R>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let mut g = vec![R::one(); nodes];
            let mut rest = col;
            for hrow in &hk {
                let m = rest % n;
                rest /= n;
                let h = &hrow[m * nodes..(m + 1) * nodes];
                for (gi, hi) in g.iter_mut().zip(h) {
                    *gi *= *hi;
                }
            }
            let mut len = nodes;
            for _ in 0..d {
                let view = DMatrixView::from_slice(&g, q, len / q);
                let next = view.tr_mul(&at);
                len = len / q * n;
                g = next.as_slice().to_vec();
            }
            g
        })
        .collect();
    let mut out = RMat::zeros(dim, dim);
    for (col, v) in columns.into_iter().enumerate() {
        out.column_mut(col).copy_from_slice(&v);
    }
    out
}

/// The Gaussian model: configuration data, truncation and quadrature rule.
#[derive(Debug)]
pub struct GaussianModel<R: Real> {
    spec: GaussianSpec,
    directed: DirectedFamily,
    coords: CoordinateModel<f64>,
    nodes: Vec<R>,
    weights: Vec<R>,
}

impl<R: Real> GaussianModel<R> {
    pub fn new(spec: GaussianSpec) -> Result<Self> {
        spec.validate()?;
        let coords = spec.coordinate_model::<f64>()?;
        let (nodes, weights) = gauss_hermite(spec.quadrature())?;
        let directed = DirectedFamily::gaussian(&spec.tag, spec.coords.clone());
        Ok(Self { spec, directed, coords, nodes, weights })
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }

    pub fn truncation(&self) -> usize {
        self.spec.truncation
    }

    pub fn directed(&self) -> &DirectedFamily {
        &self.directed
    }

    pub fn label(&self, coords: IndexSet) -> Label {
        self.directed.label(coords)
    }

    pub fn coordinates(&self) -> &CoordinateModel<f64> {
        &self.coords
    }

    /// The same model in exact rational arithmetic.
    pub fn exact_coordinates(&self) -> Result<CoordinateModel<BigRational>> {
        self.spec.coordinate_model()
    }

    pub fn dim(&self, coords: &IndexSet) -> usize {
        self.spec.truncation.pow(coords.len() as u32)
    }

    /// Orthogonal `T` of `Φ_{hi,lo}`: input variables are the `lo`
    /// coordinates followed by `hi \ lo`, so the input basis index is
    /// complement-major.
    pub fn pair_transform(&self, lo: &IndexSet, hi: &IndexSet) -> Result<RMat<R>> {
        let d = hi.len();
        if lo == hi {
            return Ok(RMat::identity(d, d));
        }
        let r = hi.difference(lo);
        let (_, s_hi_inv) = sqrt_pair::<R>(&self.coords.block(hi, hi)?)?;
        let (s_lo, _) = sqrt_pair::<R>(&self.coords.block(lo, lo)?)?;
        let (s_r, _) = sqrt_pair::<R>(&self.coords.complement_covariance(lo, hi)?)?;
        let om = to_real::<R>(&self.coords.injection(lo, hi)?.matrix);
        let e_r = to_real::<R>(&config_space::embedding::<f64>(hi, &r)?);
        Ok(&s_hi_inv * hstack_r(&(om * s_lo), &(e_r * s_r)))
    }

    /// Orthogonal `T` of `Φ_{hi,mid,lo}` on the coordinates `hi \ lo`: input
    /// variables are `mid \ lo` (inner factor) followed by `hi \ mid`.
    pub fn triple_transform(&self, lo: &IndexSet, mid: &IndexSet, hi: &IndexSet) -> Result<RMat<R>> {
        let r2 = hi.difference(lo);
        if lo == mid || mid == hi {
            return Ok(RMat::identity(r2.len(), r2.len()));
        }
        let a = hi.difference(mid);
        let b = mid.difference(lo);
        let (_, s_r2_inv) = sqrt_pair::<R>(&self.coords.complement_covariance(lo, hi)?)?;
        let (s_a, _) = sqrt_pair::<R>(&self.coords.complement_covariance(mid, hi)?)?;
        let (s_b, _) = sqrt_pair::<R>(&self.coords.complement_covariance(lo, mid)?)?;
        let w = self.coords.injection(mid, hi)?.matrix;
        let p = config_space::transpose(&config_space::embedding::<f64>(hi, &r2)?);
        let pwb = config_space::matmul(&config_space::matmul(&p, &w), &config_space::embedding(mid, &b)?);
        let e_a = to_real::<R>(&config_space::embedding::<f64>(&r2, &a)?);
        Ok(&s_r2_inv * hstack_r(&(to_real::<R>(&pwb) * s_b), &(e_a * s_a)))
    }

    pub fn phi_for_transform(&self, t: &RMat<R>) -> PhiMatrix<R> {
        let n = self.spec.truncation;
        match permutation_from_transform(t, n) {
            Some(p) => PhiMatrix::Permutation(p),
            None => PhiMatrix::Dense(phi_from_transform(t, n, &self.nodes, &self.weights)),
        }
    }

    /// `Φ_{hi,lo}` in the Hermite bases.
    pub fn pair_matrix(&self, lo: &IndexSet, hi: &IndexSet) -> Result<PhiMatrix<R>> {
        Ok(self.phi_for_transform(&self.pair_transform(lo, hi)?))
    }

    /// `Φ_{hi,mid,lo}` in the Hermite bases.
    pub fn triple_matrix(&self, lo: &IndexSet, mid: &IndexSet, hi: &IndexSet) -> Result<PhiMatrix<R>> {
        Ok(self.phi_for_transform(&self.triple_transform(lo, mid, hi)?))
    }
}

/// [`Factorization`] backed by a [`GaussianModel`].
#[derive(Debug)]
pub struct GaussianFactorization<R: Real> {
    model: Arc<GaussianModel<R>>,
}

impl<R: Real> GaussianFactorization<R> {
    pub fn new(model: Arc<GaussianModel<R>>) -> Self {
        Self { model }
    }
}

impl<R: Real> Factorization<R> for GaussianFactorization<R> {
    fn directed(&self) -> &DirectedFamily {
        self.model.directed()
    }

    fn space(&self, l: &Label) -> Result<HilbertSpace> {
        Ok(HilbertSpace::product(l.indices(), self.model.truncation()))
    }

    fn factor_iso(&self, lo: &Label, hi: &Label) -> Result<FactorIso<R>> {
        let (k, kp) = (lo.indices(), hi.indices());
        let op = self.model.pair_matrix(k, kp)?.to_unitary();
        FactorIso::new(lo.clone(), hi.clone(), self.model.dim(&kp.difference(k)), self.model.dim(k), op)
    }

    fn triple_iso(&self, lo: &Label, mid: &Label, hi: &Label) -> Result<TripleIso<R>> {
        let (k, km, kh) = (lo.indices(), mid.indices(), hi.indices());
        let op = self.model.triple_matrix(k, km, kh)?.to_unitary();
        TripleIso::new(
            lo.clone(),
            mid.clone(),
            hi.clone(),
            self.model.dim(&kh.difference(km)),
            self.model.dim(&km.difference(k)),
            op,
        )
    }
}

/// The factorized family of a Gaussian spec, together with its model.
pub fn build_gaussian_family<R: Real>(spec: GaussianSpec) -> Result<(FactorizedFamily<R>, Arc<GaussianModel<R>>)> {
    let tol = R::lit(spec.unitarity_tol.unwrap_or(DEFAULT_UNITARITY_TOL));
    let model = Arc::new(GaussianModel::new(spec)?);
    let fam = FactorizedFamily::new(Arc::new(GaussianFactorization::new(model.clone())), tol);
    Ok((fam, model))
}

/// Truncated coherent-state probe `⊗_k Σ_n e^{-α_k²/2} α_k^n/√n! e_n`,
/// normalized, little-endian over coordinates.
pub fn coherent_probe<R: Real>(alphas: &[f64], n: usize) -> Vec<R> {
    let mut v = vec![1.0f64];
    for &a in alphas {
        let mut coeff = Vec::with_capacity(n);
        let mut c = (-a * a / 2.0).exp();
        for k in 0..n {
            if k > 0 {
                c *= a / (k as f64).sqrt();
            }
            coeff.push(c);
        }
        // new coordinate is the slower digit
        let mut next = Vec::with_capacity(v.len() * n);
        for ck in &coeff {
            next.extend(v.iter().map(|x| x * ck));
        }
        v = next;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| R::lit(x / norm)).collect()
}

/// Fixed probe displacements for `d` coordinates.
pub fn probe_alphas(d: usize) -> Vec<Vec<f64>> {
    const BASE: [[f64; 3]; 3] = [[0.6, -0.4, 0.2], [1.0, 0.5, -0.5], [-0.3, 0.9, 0.4]];
    BASE.iter().map(|row| (0..d).map(|k| row[k % 3]).collect()).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorized::{check_coherence, regroup_permutation};

    fn set(v: &[u32]) -> IndexSet {
        IndexSet::new(v.to_vec())
    }

    fn spec(variant: Variant, n: usize) -> GaussianSpec {
        GaussianSpec::new(set(&[1, 2, 3]), variant, n)
    }

    fn orth_defect(t: &RMat<f64>) -> f64 {
        let d = t.nrows();
        (t.transpose() * t - RMat::identity(d, d)).abs().max()
    }

    #[test]
    fn axis_aligned_pair_is_regroup_permutation() {
        let m = GaussianModel::<f64>::new(spec(Variant::AxisAligned, 3)).unwrap();
        let phi = m.pair_matrix(&set(&[1]), &set(&[1, 2])).unwrap();
        let PhiMatrix::Permutation(p) = phi else { panic!("expected a permutation") };
        assert_eq!(p.len(), 9);
        assert_eq!(p, regroup_permutation(2, 3, &[0]));
        let p2 = m.pair_matrix(&set(&[2]), &set(&[1, 2, 3])).unwrap();
        let PhiMatrix::Permutation(p2) = p2 else { panic!() };
        assert_eq!(p2, regroup_permutation(3, 3, &[1]));
    }

    #[test]
    fn trivial_pair_and_triples_are_identities() {
        let m = GaussianModel::<f64>::new(spec(Variant::Sheared { shear: 0.3 }, 3)).unwrap();
        for k in [set(&[]), set(&[2]), set(&[1, 3])] {
            let PhiMatrix::Permutation(p) = m.pair_matrix(&k, &k).unwrap() else { panic!() };
            assert!(p.is_identity());
        }
        let PhiMatrix::Permutation(p) = m.triple_matrix(&set(&[1]), &set(&[1]), &set(&[1, 2])).unwrap() else { panic!() };
        assert!(p.is_identity());
    }

    #[test]
    fn transforms_are_orthogonal() {
        let m = GaussianModel::<f64>::new(spec(Variant::Sheared { shear: 0.3 }, 4)).unwrap();
        let t = m.pair_transform(&set(&[1]), &set(&[1, 2])).unwrap();
        assert!(orth_defect(&t) < 1e-14);
        let t = m.pair_transform(&set(&[2]), &set(&[1, 2, 3])).unwrap();
        assert!(orth_defect(&t) < 1e-14);
        let t = m.triple_transform(&set(&[1]), &set(&[1, 2]), &set(&[1, 2, 3])).unwrap();
        assert!(orth_defect(&t) < 1e-14);
        let t = m.triple_transform(&set(&[2]), &set(&[1, 2]), &set(&[1, 2, 3])).unwrap();
        assert!(orth_defect(&t) < 1e-14);
    }

    /// Dense-grid oracle: `Φ[a,c] = Σ_nodes w h_a(u) h_c(Tu)` without sum factorization.
    fn brute_phi(t: &RMat<f64>, n: usize, q: usize) -> RMat<f64> {
        let (x, w) = gauss_hermite::<f64>(q).unwrap();
        let d = t.nrows();
        let dim = n.pow(d as u32);
        let mut out = RMat::zeros(dim, dim);
        for node in 0..q.pow(d as u32) {
            let idx: Vec<usize> = (0..d).map(|i| (node / q.pow(i as u32)) % q).collect();
            let u: Vec<f64> = idx.iter().map(|&j| x[j]).collect();
            let wt: f64 = idx.iter().map(|&j| w[j]).product();
            let y: Vec<f64> = (0..d).map(|k| (0..d).map(|i| t[(k, i)] * u[i]).sum()).collect();
            let hu: Vec<Vec<f64>> = u.iter().map(|&v| hermite_values(n, v)).collect();
            let hy: Vec<Vec<f64>> = y.iter().map(|&v| hermite_values(n, v)).collect();
            for a in 0..dim {
                let fa: f64 = (0..d).map(|i| hu[i][(a / n.pow(i as u32)) % n]).product();
                for cidx in 0..dim {
                    let fc: f64 = (0..d).map(|k| hy[k][(cidx / n.pow(k as u32)) % n]).product();
                    out[(a, cidx)] += wt * fa * fc;
                }
            }
        }
        out
    }

    #[test]
    fn sum_factorization_matches_brute_force() {
        let m = GaussianModel::<f64>::new(spec(Variant::Sheared { shear: 0.3 }, 3)).unwrap();
        let t = m.pair_transform(&set(&[2]), &set(&[1, 2, 3])).unwrap();
        let PhiMatrix::Dense(fast) = m.phi_for_transform(&t) else { panic!() };
        let slow = brute_phi(&t, 3, 6);
        assert!((fast - slow).abs().max() < 1e-13);
    }

    #[test]
    fn sheared_zero_equals_axis_aligned() {
        let a = GaussianModel::<f64>::new(spec(Variant::AxisAligned, 3)).unwrap();
        let s = GaussianModel::<f64>::new(spec(Variant::Sheared { shear: 0.0 }, 3)).unwrap();
        for (lo, hi) in [(set(&[1]), set(&[1, 2])), (set(&[]), set(&[1, 3])), (set(&[2]), set(&[1, 2, 3]))] {
            let da = a.pair_matrix(&lo, &hi).unwrap().to_dense();
            let ds = s.pair_matrix(&lo, &hi).unwrap().to_dense();
            assert!((da - ds).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn one_dimensional_shear_maps_are_exactly_unitary_at_low_degree() {
        // Φ maps polynomials of degree < N into polynomials of total degree < N,
        // so the leading block (h_0, h_1) is exactly orthogonal
        let m = GaussianModel::<f64>::new(spec(Variant::Sheared { shear: 0.3 }, 6)).unwrap();
        let p = m.pair_matrix(&set(&[1]), &set(&[1, 2])).unwrap().to_dense();
        let probe: Vec<f64> = (0..36).map(|i| if i == 1 || i == 6 { 0.5f64.sqrt() } else { 0.0 }).collect();
        let v = PhiMatrix::Dense(p.clone()).apply(&probe);
        let back = PhiMatrix::Dense(p).apply_transpose(&v);
        let err: f64 = back.iter().zip(&probe).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn axis_aligned_family_is_coherent() {
        let (fam, _) = build_gaussian_family::<f64>(spec(Variant::AxisAligned, 2)).unwrap();
        let rep = check_coherence(&fam, &fam.directed().all_triples(), 1e-12).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.max_diagram_defect, 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(GaussianModel::<f64>::new(spec(Variant::Sheared { shear: 1.0 }, 3)).is_err());
        assert!(GaussianModel::<f64>::new(spec(Variant::AxisAligned, 1)).is_err());
        let mut s = spec(Variant::AxisAligned, 4);
        s.quadrature_order = Some(3);
        assert!(GaussianModel::<f64>::new(s).is_err());
        let c = Variant::Custom { covariance: vec![vec![1.0, 0.2, 0.0], vec![0.2, 1.0, 0.1], vec![0.0, 0.1, 1.0]] };
        assert!(GaussianModel::<f64>::new(spec(c, 3)).is_ok());
        let bad = Variant::Custom { covariance: vec![vec![1.0, 2.0, 0.0], vec![2.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]] };
        assert!(GaussianModel::<f64>::new(spec(bad, 3)).is_err());
        let json = serde_json::to_string(&spec(Variant::Sheared { shear: 0.3 }, 4)).unwrap();
        let back: GaussianSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec(Variant::Sheared { shear: 0.3 }, 4));
    }

    #[test]
    fn coherent_probe_layout() {
        let v = coherent_probe::<f64>(&[0.5, 0.0], 3);
        // second coordinate in its ground state: only the first N entries are nonzero
        assert!(v[3..].iter().all(|x| *x == 0.0));
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(probe_alphas(2), vec![vec![0.6, -0.4], vec![1.0, 0.5], vec![-0.3, 0.9]]);
    }
}
