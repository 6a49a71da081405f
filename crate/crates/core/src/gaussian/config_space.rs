//! Configuration spaces `Q_K = ℝ^K`, coordinate projections, the injections
//! `ω_{K'K}` and the Gaussian covariance data behind them.
//!
//! Everything here is generic over [`Field`], so the composition laws and
//! direct-sum decompositions can be checked in exact rational arithmetic.
//!
//! All measures are marginals of one centered Gaussian with covariance `Σ`
//! on the coordinate universe. `ω_{K'K} = Σ_{K'K} Σ_{KK}⁻¹` is the
//! regression of the `K'` coordinates on the `K` coordinates, and the
//! complement measure on `ker pr_{KK'}` (the coordinates `K' \ K`) is the
//! conditional Gaussian with covariance the Schur complement.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::label::IndexSet;
use crate::scalar::Field;

pub type FMat<F> = DMatrix<F>;

pub fn identity<F: Field>(n: usize) -> FMat<F> {
    FMat::from_fn(n, n, |i, j| if i == j { F::one() } else { F::zero() })
}

pub fn zeros<F: Field>(r: usize, c: usize) -> FMat<F> {
    FMat::from_fn(r, c, |_, _| F::zero())
}

pub fn matmul<F: Field>(a: &FMat<F>, b: &FMat<F>) -> FMat<F> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    FMat::from_fn(a.nrows(), b.ncols(), |i, j| {
        (0..a.ncols()).fold(F::zero(), |acc, k| acc + a[(i, k)].clone() * b[(k, j)].clone())
    })
}

pub fn transpose<F: Field>(a: &FMat<F>) -> FMat<F> {
    FMat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].clone())
}

pub fn sub<F: Field>(a: &FMat<F>, b: &FMat<F>) -> FMat<F> {
    assert_eq!(a.shape(), b.shape());
    FMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].clone() - b[(i, j)].clone())
}

/// `[a | b]`.
pub fn hstack<F: Field>(blocks: &[&FMat<F>]) -> FMat<F> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows);
        for j in 0..b.ncols() {
            for i in 0..rows {
                out[(i, off + j)] = b[(i, j)].clone();
            }
        }
        off += b.ncols();
    }
    out
}

pub fn max_abs<F: Field>(a: &FMat<F>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.magnitude()))
}

pub fn is_zero<F: Field>(a: &FMat<F>) -> bool {
    a.iter().all(|x| x.is_negligible())
}

/// Row echelon form by Gaussian elimination with largest-magnitude pivots;
/// returns the rank.
pub fn rank<F: Field>(a: &FMat<F>) -> usize {
    let mut m = a.clone();
    let (rows, cols) = m.shape();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let piv = (r..rows).max_by(|&i, &j| m[(i, c)].magnitude().total_cmp(&m[(j, c)].magnitude())).unwrap();
        if m[(piv, c)].is_negligible() {
            continue;
        }
        m.swap_rows(r, piv);
        let p = m[(r, c)].clone();
        for i in r + 1..rows {
            if m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone() / p.clone();
            for k in c..cols {
                let v = m[(r, k)].clone() * f.clone();
                m[(i, k)] = m[(i, k)].clone() - v;
            }
        }
        r += 1;
    }
    r
}

/// Gauss–Jordan inverse.
pub fn inverse<F: Field>(a: &FMat<F>) -> Result<FMat<F>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch(format!("inverse of a {}x{} matrix", n, a.ncols())));
    }
    let mut m = a.clone();
    let mut inv = identity::<F>(n);
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[(i, c)].magnitude().total_cmp(&m[(j, c)].magnitude())).unwrap();
        if m[(piv, c)].is_negligible() {
            return Err(Error::InvalidParameter("singular matrix".into()));
        }
        m.swap_rows(c, piv);
        inv.swap_rows(c, piv);
        let p = m[(c, c)].clone();
        for k in 0..n {
            m[(c, k)] = m[(c, k)].clone() / p.clone();
            inv[(c, k)] = inv[(c, k)].clone() / p.clone();
        }
        for i in 0..n {
            if i == c || m[(i, c)].is_zero() {
                continue;
            }
            let f = m[(i, c)].clone();
            for k in 0..n {
                let a1 = m[(c, k)].clone() * f.clone();
                m[(i, k)] = m[(i, k)].clone() - a1;
                let a2 = inv[(c, k)].clone() * f.clone();
                inv[(i, k)] = inv[(i, k)].clone() - a2;
            }
        }
    }
    Ok(inv)
}

/// `Q_K`: the coordinates `K`; `dim Q_K = |K|`, possibly zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigSpace {
    pub coords: IndexSet,
}

impl ConfigSpace {
    pub fn new(coords: IndexSet) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// `E`: `|outer| × |inner|` coordinate embedding of `inner ⊆ outer`.
pub fn embedding<F: Field>(outer: &IndexSet, inner: &IndexSet) -> Result<FMat<F>> {
    if !inner.is_subset(outer) {
        return Err(Error::InvalidParameter(format!("{inner} is not a subset of {outer}")));
    }
    let mut e = zeros(outer.len(), inner.len());
    for (j, c) in inner.iter().enumerate() {
        e[(outer.position(c).expect("subset"), j)] = F::one();
    }
    Ok(e)
}

/// `pr_{KK'}: Q_{K'} → Q_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMap<F: Field> {
    pub from: ConfigSpace,
    pub to: ConfigSpace,
    pub matrix: FMat<F>,
}

impl<F: Field> ProjectionMap<F> {
    /// Coordinate selection.
    pub fn select(to: &IndexSet, from: &IndexSet) -> Result<Self> {
        let e = embedding::<F>(from, to)?;
        Ok(Self { from: ConfigSpace::new(from.clone()), to: ConfigSpace::new(to.clone()), matrix: transpose(&e) })
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &ProjectionMap<F>) -> Result<Self> {
        if inner.to != self.from {
            return Err(Error::ShapeMismatch("projection composition mismatch".into()));
        }
        Ok(Self { from: inner.from.clone(), to: self.to.clone(), matrix: matmul(&self.matrix, &inner.matrix) })
    }

    pub fn is_surjective(&self) -> bool {
        rank(&self.matrix) == self.to.dim()
    }

    /// Basis of `ker pr` as columns in `Q_{K'}`: the dropped coordinates.
    pub fn kernel_basis(&self) -> FMat<F> {
        embedding(&self.from.coords, &self.from.coords.difference(&self.to.coords)).expect("difference is a subset")
    }
}

/// `ω_{K'K}: Q_K → Q_{K'}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectionMap<F: Field> {
    pub from: ConfigSpace,
    pub to: ConfigSpace,
    pub matrix: FMat<F>,
}

impl<F: Field> InjectionMap<F> {
    /// `self ∘ inner`.
    pub fn compose(&self, inner: &InjectionMap<F>) -> Result<Self> {
        if inner.to != self.from {
            return Err(Error::ShapeMismatch("injection composition mismatch".into()));
        }
        Ok(Self { from: inner.from.clone(), to: self.to.clone(), matrix: matmul(&self.matrix, &inner.matrix) })
    }

    pub fn is_injective(&self) -> bool {
        rank(&self.matrix) == self.from.dim()
    }

    pub fn apply(&self, q: &[F]) -> Vec<F> {
        apply(&self.matrix, q)
    }
}

pub fn apply<F: Field>(m: &FMat<F>, v: &[F]) -> Vec<F> {
    assert_eq!(m.ncols(), v.len());
    (0..m.nrows())
        .map(|i| (0..m.ncols()).fold(F::zero(), |acc, k| acc + m[(i, k)].clone() * v[k].clone()))
        .collect()
}

/// Covariance of the global Gaussian over a coordinate universe.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateModel<F: Field> {
    universe: IndexSet,
    covariance: FMat<F>,
}

impl<F: Field> CoordinateModel<F> {
    /// Independent standard Gaussians.
    pub fn independent(universe: IndexSet) -> Self {
        let n = universe.len();
        Self { universe, covariance: identity(n) }
    }

    /// AR(1) chain along the sorted universe: `x_first = y_first`,
    /// `x_{k+1} = s·x_k + y_{k+1}` with `y` independent standard Gaussians.
    /// The injection `{k} → {k, k+1}` is `q ↦ (q, s·q)`.
    pub fn ar1(universe: IndexSet, s: F) -> Self {
        let n = universe.len();
        // L = (I − s·subdiag)⁻¹ has L[i][j] = s^{i−j} for i ≥ j
        let mut l = zeros::<F>(n, n);
        for j in 0..n {
            let mut p = F::one();
            for i in j..n {
                l[(i, j)] = p.clone();
                p = p * s.clone();
            }
        }
        let cov = matmul(&l, &transpose(&l));
        Self { universe, covariance: cov }
    }

    /// Explicit covariance, checked symmetric positive definite.
    pub fn custom(universe: IndexSet, covariance: FMat<F>) -> Result<Self> {
        let n = universe.len();
        if covariance.shape() != (n, n) {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}x{}, universe has {n} coordinates",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !is_zero(&sub(&covariance, &transpose(&covariance))) {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        // leading principal minors via elimination pivots
        let mut m = covariance.clone();
        for c in 0..n {
            let p = m[(c, c)].clone();
            if p.is_negligible() || p.to_f64() <= 0.0 {
                return Err(Error::InvalidParameter("covariance is not positive definite".into()));
            }
            for i in c + 1..n {
                let f = m[(i, c)].clone() / p.clone();
                for k in c..n {
                    let v = m[(c, k)].clone() * f.clone();
                    m[(i, k)] = m[(i, k)].clone() - v;
                }
            }
        }
        Ok(Self { universe, covariance })
    }

    pub fn universe(&self) -> &IndexSet {
        &self.universe
    }

    pub fn covariance(&self) -> &FMat<F> {
        &self.covariance
    }

    fn check(&self, k: &IndexSet) -> Result<()> {
        if k.is_subset(&self.universe) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{k} is outside the coordinate universe {}", self.universe)))
        }
    }

    /// `Σ_{rows, cols}`.
    pub fn block(&self, rows: &IndexSet, cols: &IndexSet) -> Result<FMat<F>> {
        self.check(rows)?;
        self.check(cols)?;
        let ri: Vec<usize> = rows.iter().map(|c| self.universe.position(c).unwrap()).collect();
        let ci: Vec<usize> = cols.iter().map(|c| self.universe.position(c).unwrap()).collect();
        Ok(FMat::from_fn(ri.len(), ci.len(), |i, j| self.covariance[(ri[i], ci[j])].clone()))
    }

    fn check_pair(&self, lo: &IndexSet, hi: &IndexSet) -> Result<()> {
        self.check(hi)?;
        if !lo.is_subset(hi) {
            return Err(Error::InvalidParameter(format!("{lo} is not a subset of {hi}")));
        }
        Ok(())
    }

    pub fn projection(&self, lo: &IndexSet, hi: &IndexSet) -> Result<ProjectionMap<F>> {
        self.check_pair(lo, hi)?;
        ProjectionMap::select(lo, hi)
    }

    /// `ω_{hi,lo} = Σ_{hi,lo} Σ_{lo,lo}⁻¹`.
    pub fn injection(&self, lo: &IndexSet, hi: &IndexSet) -> Result<InjectionMap<F>> {
        self.check_pair(lo, hi)?;
        let matrix = if lo == hi {
            identity(lo.len())
        } else if lo.is_empty() {
            zeros(hi.len(), 0)
        } else {
            matmul(&self.block(hi, lo)?, &inverse(&self.block(lo, lo)?)?)
        };
        Ok(InjectionMap { from: ConfigSpace::new(lo.clone()), to: ConfigSpace::new(hi.clone()), matrix })
    }

    /// Covariance of the complement measure on `ker pr_{lo,hi}` (coordinates
    /// `hi \ lo`): `Σ_rr − Σ_{r,lo} Σ_{lo,lo}⁻¹ Σ_{lo,r}`.
    pub fn complement_covariance(&self, lo: &IndexSet, hi: &IndexSet) -> Result<FMat<F>> {
        self.check_pair(lo, hi)?;
        let r = hi.difference(lo);
        let srr = self.block(&r, &r)?;
        if lo.is_empty() || r.is_empty() {
            return Ok(srr);
        }
        let srl = self.block(&r, lo)?;
        let corr = matmul(&matmul(&srl, &inverse(&self.block(lo, lo)?)?), &transpose(&srl));
        Ok(sub(&srr, &corr))
    }

    /// `φ_{hi,lo}(y, q) = E_r y + ω q` as the matrix `[E_r | ω]` (`y` first).
    pub fn phi_pair(&self, lo: &IndexSet, hi: &IndexSet) -> Result<FMat<F>> {
        let e = embedding(hi, &hi.difference(lo))?;
        let w = self.injection(lo, hi)?.matrix;
        Ok(hstack(&[&e, &w]))
    }

    /// `φ_{hi,mid,lo}(y'', y') = y'' + ω_{hi,mid}(y')` as a map into the
    /// coordinates `hi \ lo`, matrix `[E_a | P ω_{hi,mid} E_b]` with
    /// `a = hi \ mid`, `b = mid \ lo` (`y''` first).
    pub fn phi_triple(&self, lo: &IndexSet, mid: &IndexSet, hi: &IndexSet) -> Result<FMat<F>> {
        self.check_pair(lo, mid)?;
        self.check_pair(mid, hi)?;
        let r2 = hi.difference(lo);
        let a = hi.difference(mid);
        let b = mid.difference(lo);
        let e_a = embedding(&r2, &a)?;
        let w = self.injection(mid, hi)?.matrix;
        let wb = matmul(&w, &embedding(mid, &b)?);
        let p = transpose(&embedding::<F>(hi, &r2)?);
        Ok(hstack(&[&e_a, &matmul(&p, &wb)]))
    }
}

/// Outcome of the exact structural checks for a triple `lo ⊆ mid ⊆ hi`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StructureReport {
    /// `pr ∘ ω = id` for all three pairs.
    pub po_id: bool,
    /// `pr_{lo,hi} = pr_{lo,mid} ∘ pr_{mid,hi}`.
    pub ppp: bool,
    /// `ω_{hi,lo} = ω_{hi,mid} ∘ ω_{mid,lo}`.
    pub ooo: bool,
    /// `Q_{K'} = ker pr ⊕ ω(Q_K)` for all three pairs.
    pub pair_decomposition: bool,
    /// `Q_{hi} = ker pr_{mid,hi} ⊕ ω_{hi,mid}(ker pr_{lo,mid}) ⊕ ω_{hi,lo}(Q_lo)`.
    pub triple_decomposition: bool,
    /// `ker pr_{lo,hi} = ker pr_{mid,hi} ⊕ ω_{hi,mid}(ker pr_{lo,mid})`.
    pub kernel_decomposition: bool,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.po_id && self.ppp && self.ooo && self.pair_decomposition && self.triple_decomposition && self.kernel_decomposition
    }
}

pub fn check_structure<F: Field>(m: &CoordinateModel<F>, lo: &IndexSet, mid: &IndexSet, hi: &IndexSet) -> Result<StructureReport> {
    let pairs = [(lo, mid), (mid, hi), (lo, hi)];
    let mut po_id = true;
    let mut pair_decomposition = true;
    for (a, b) in pairs {
        let pr = m.projection(a, b)?;
        let om = m.injection(a, b)?;
        po_id &= is_zero(&sub(&matmul(&pr.matrix, &om.matrix), &identity(a.len())));
        pair_decomposition &= om.is_injective() && rank(&hstack(&[&pr.kernel_basis(), &om.matrix])) == b.len();
    }
    let ppp = {
        let lhs = m.projection(lo, hi)?;
        let rhs = m.projection(lo, mid)?.compose(&m.projection(mid, hi)?)?;
        is_zero(&sub(&lhs.matrix, &rhs.matrix))
    };
    let ooo = {
        let lhs = m.injection(lo, hi)?;
        let rhs = m.injection(mid, hi)?.compose(&m.injection(lo, mid)?)?;
        is_zero(&sub(&lhs.matrix, &rhs.matrix))
    };
    let ker_hm = m.projection(mid, hi)?.kernel_basis();
    let w_hm = m.injection(mid, hi)?.matrix;
    let w_ker_ml = matmul(&w_hm, &m.projection(lo, mid)?.kernel_basis());
    let w_hl = m.injection(lo, hi)?.matrix;
    let triple_decomposition = rank(&hstack(&[&ker_hm, &w_ker_ml, &w_hl])) == hi.len();
    // the summands lie in ker pr_{lo,hi} and together have its dimension
    let pr_hl = m.projection(lo, hi)?.matrix;
    let inside = is_zero(&matmul(&pr_hl, &ker_hm)) && is_zero(&matmul(&pr_hl, &w_ker_ml));
    let kernel_decomposition = inside && rank(&hstack(&[&ker_hm, &w_ker_ml])) == hi.len() - lo.len();
    Ok(StructureReport { po_id, ppp, ooo, pair_decomposition, triple_decomposition, kernel_decomposition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(x: f64) -> Q {
        Q::from_f64_exact(x)
    }

    fn set(v: &[u32]) -> IndexSet {
        IndexSet::new(v.to_vec())
    }

    #[test]
    fn ar1_injection_is_shear() {
        let m = CoordinateModel::<Q>::ar1(set(&[1, 2]), q(0.3));
        let w = m.injection(&set(&[1]), &set(&[1, 2])).unwrap();
        assert_eq!(w.matrix, FMat::from_column_slice(2, 1, &[q(1.0), q(0.3)]));
        let s = m.complement_covariance(&set(&[1]), &set(&[1, 2])).unwrap();
        assert_eq!(s[(0, 0)], q(1.0));
        assert_eq!(m.covariance()[(1, 1)], q(1.0) + q(0.3) * q(0.3));
    }

    #[test]
    fn structure_holds_exactly() {
        let models = [
            CoordinateModel::<Q>::independent(set(&[1, 2, 3, 4])),
            CoordinateModel::<Q>::ar1(set(&[1, 2, 3, 4]), q(0.3)),
            CoordinateModel::<Q>::ar1(set(&[1, 2, 3, 4]), q(-0.7)),
        ];
        let triples = [
            (set(&[1]), set(&[1, 2]), set(&[1, 2, 3])),
            (set(&[2]), set(&[2, 4]), set(&[1, 2, 3, 4])),
            (set(&[]), set(&[3]), set(&[1, 3])),
            (set(&[1, 3]), set(&[1, 3]), set(&[1, 2, 3])),
            (set(&[4]), set(&[1, 2, 3, 4]), set(&[1, 2, 3, 4])),
        ];
        for m in &models {
            for (a, b, c) in &triples {
                let r = check_structure(m, a, b, c).unwrap();
                assert!(r.passed(), "{r:?} for {a} {b} {c}");
            }
        }
    }

    #[test]
    fn float_structure_within_tolerance() {
        let m = CoordinateModel::<f64>::ar1(set(&[0, 1, 2]), 0.3);
        assert!(check_structure(&m, &set(&[1]), &set(&[0, 1]), &set(&[0, 1, 2])).unwrap().passed());
    }

    #[test]
    fn linear_algebra() {
        let a = FMat::from_row_slice(2, 2, &[q(2.0), q(1.0), q(1.0), q(3.0)]);
        let inv = inverse(&a).unwrap();
        assert_eq!(matmul(&a, &inv), identity::<Q>(2));
        assert_eq!(rank(&FMat::from_row_slice(2, 2, &[q(1.0), q(2.0), q(2.0), q(4.0)])), 1);
        assert!(inverse(&FMat::from_row_slice(2, 2, &[q(1.0), q(2.0), q(2.0), q(4.0)])).is_err());
        assert_eq!(rank(&zeros::<Q>(0, 3)), 0);
    }

    #[test]
    fn custom_covariance_validation() {
        let ok = FMat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(CoordinateModel::custom(set(&[0, 1]), ok).is_ok());
        let asym = FMat::from_row_slice(2, 2, &[2.0, 0.5, 0.4, 1.0]);
        assert!(CoordinateModel::custom(set(&[0, 1]), asym).is_err());
        let indef = FMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CoordinateModel::custom(set(&[0, 1]), indef).is_err());
        assert!(CoordinateModel::custom(set(&[0]), FMat::<f64>::identity(2, 2)).is_err());
    }

    #[test]
    fn pair_maps_and_points() {
        let m = CoordinateModel::<Q>::ar1(set(&[1, 2, 3]), q(0.5));
        let (lo, mid, hi) = (set(&[1]), set(&[1, 2]), set(&[1, 2, 3]));
        // the two routes around the point-map diagram agree exactly
        let p_hl = m.phi_pair(&lo, &hi).unwrap();
        let p_hm = m.phi_pair(&mid, &hi).unwrap();
        let p_ml = m.phi_pair(&lo, &mid).unwrap();
        let t = m.phi_triple(&lo, &mid, &hi).unwrap();
        let (y2, y1, x) = (q(0.25), q(-1.5), q(2.0));
        let k = apply(&t, &[y2.clone(), y1.clone()]);
        let left = apply(&p_hl, &[k[0].clone(), k[1].clone(), x.clone()]);
        let inner = apply(&p_ml, &[y1, x]);
        let right = apply(&p_hm, &[y2, inner[0].clone(), inner[1].clone()]);
        assert_eq!(left, right);
    }
}
