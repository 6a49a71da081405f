//! Families of factorized Hilbert spaces.
//!
//! For every pair `lo ≤ hi` a unitary `Φ_{hi,lo}: H_hi → H̃_{hi,lo} ⊗ H_lo`,
//! and for every triple `lo ≤ mid ≤ hi` a unitary
//! `Φ_{hi,mid,lo}: H̃_{hi,lo} → H̃_{hi,mid} ⊗ H̃_{mid,lo}`, such that
//!
//! ```text
//! (Φ_{hi,mid,lo} ⊗ id_lo) ∘ Φ_{hi,lo} = (id_{hi,mid} ⊗ Φ_{mid,lo}) ∘ Φ_{hi,mid}
//! ```
//!
//! Tensor indices are complement-major everywhere: the basis vector
//! `t ⊗ q` of `H̃ ⊗ H` has index `t · dim(H) + q`. Within a single space,
//! multi-site (or multi-coordinate) basis states are little-endian in the
//! sorted index set: the smallest site is the fastest-varying digit.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

use crate::directed::DirectedFamily;
use crate::error::{Error, Result};
use crate::label::{IndexSet, Label};
use crate::scalar::{CMat, Real};
use crate::unitary::{Permutation, Unitary};

/// A finite-dimensional Hilbert space with a product basis over its sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    dim: usize,
    /// `(index, local dimension)` per tensor factor, sorted by index.
    factors: Vec<(u32, usize)>,
}

impl HilbertSpace {
    pub fn product(indices: &IndexSet, local_dim: usize) -> Self {
        let factors: Vec<_> = indices.iter().map(|i| (i, local_dim)).collect();
        let dim = factors.iter().map(|f| f.1).product();
        Self { dim, factors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[(u32, usize)] {
        &self.factors
    }

    /// Label of basis vector `i`: `index=digit` per factor, smallest index first.
    pub fn basis_label(&self, mut i: usize) -> String {
        if self.factors.is_empty() {
            return "1".to_owned();
        }
        let mut parts = Vec::with_capacity(self.factors.len());
        for &(site, d) in &self.factors {
            parts.push(format!("{site}={}", i % d));
            i /= d;
        }
        parts.join(",")
    }

    pub fn basis_labels(&self) -> Vec<String> {
        (0..self.dim).map(|i| self.basis_label(i)).collect()
    }
}

/// `Φ_{hi,lo}: H_hi → H̃_{hi,lo} ⊗ H_lo`.
#[derive(Debug)]
pub struct FactorIso<R: Real> {
    pub lo: Label,
    pub hi: Label,
    pub complement_dim: usize,
    pub base_dim: usize,
    pub op: Unitary<R>,
    defect: OnceLock<R>,
}

impl<R: Real> FactorIso<R> {
    pub fn new(lo: Label, hi: Label, complement_dim: usize, base_dim: usize, op: Unitary<R>) -> Result<Self> {
        if op.dim() != complement_dim * base_dim || op.rows() != op.dim() {
            return Err(Error::ShapeMismatch(format!(
                "Φ_{{{hi},{lo}}} has shape {}x{}, expected {}",
                op.rows(),
                op.dim(),
                complement_dim * base_dim
            )));
        }
        Ok(Self { lo, hi, complement_dim, base_dim, op, defect: OnceLock::new() })
    }

    pub fn matrix(&self) -> CMat<R> {
        self.op.to_dense()
    }

    /// Cached `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> R {
        *self.defect.get_or_init(|| self.op.unitarity_defect())
    }
}

/// `Φ_{hi,mid,lo}: H̃_{hi,lo} → H̃_{hi,mid} ⊗ H̃_{mid,lo}`.
#[derive(Debug)]
pub struct TripleIso<R: Real> {
    pub lo: Label,
    pub mid: Label,
    pub hi: Label,
    /// `dim H̃_{hi,mid}`
    pub outer_dim: usize,
    /// `dim H̃_{mid,lo}`
    pub inner_dim: usize,
    pub op: Unitary<R>,
}

impl<R: Real> TripleIso<R> {
    pub fn new(lo: Label, mid: Label, hi: Label, outer_dim: usize, inner_dim: usize, op: Unitary<R>) -> Result<Self> {
        if op.dim() != outer_dim * inner_dim || op.rows() != op.dim() {
            return Err(Error::ShapeMismatch(format!(
                "Φ_{{{hi},{mid},{lo}}} has dimension {}, expected {}",
                op.dim(),
                outer_dim * inner_dim
            )));
        }
        Ok(Self { lo, mid, hi, outer_dim, inner_dim, op })
    }
}

/// Source of spaces and isomorphisms for a family. Callers go through
/// [`FactorizedFamily`], which validates order and memoizes pairs.
pub trait Factorization<R: Real>: Send + Sync + fmt::Debug {
    fn directed(&self) -> &DirectedFamily;
    fn space(&self, l: &Label) -> Result<HilbertSpace>;
    /// Called only with `lo ≤ hi`, both in the family.
    fn factor_iso(&self, lo: &Label, hi: &Label) -> Result<FactorIso<R>>;
    /// Called only with `lo ≤ mid ≤ hi`, all in the family.
    fn triple_iso(&self, lo: &Label, mid: &Label, hi: &Label) -> Result<TripleIso<R>>;
}

/// Permutation regrouping a little-endian multi-digit basis into
/// `(outer digits) ⊗ (inner digits)`, outer major. `inner` lists the digit
/// positions (ascending) that go to the inner factor.
pub fn regroup_permutation(digits: usize, local_dim: usize, inner: &[usize]) -> Permutation {
    let n = local_dim.pow(digits as u32);
    let mut is_inner = vec![false; digits];
    for &p in inner {
        is_inner[p] = true;
    }
    let inner_dim = local_dim.pow(inner.len() as u32);
    let mut image = Vec::with_capacity(n);
    for j in 0..n {
        let (mut rest, mut q, mut t) = (j, 0usize, 0usize);
        let (mut qw, mut tw) = (1usize, 1usize);
        for &inn in &is_inner {
            let d = rest % local_dim;
            rest /= local_dim;
            if inn {
                q += d * qw;
                qw *= local_dim;
            } else {
                t += d * tw;
                tw *= local_dim;
            }
        }
        image.push(t * inner_dim + q);
    }
    Permutation::from_image(image).expect("regrouping is a bijection")
}

fn positions_in(outer: &IndexSet, inner: &IndexSet) -> Vec<usize> {
    inner.iter().map(|i| outer.position(i).expect("inner ⊆ outer")).collect()
}

/// Tensor-product family over lattice sites, `local_dim` states per site.
#[derive(Debug)]
pub struct LatticeFactorization {
    directed: DirectedFamily,
    local_dim: usize,
}

impl LatticeFactorization {
    pub fn new(sites: IndexSet, local_dim: usize) -> Result<Self> {
        if local_dim < 2 {
            return Err(Error::InvalidParameter(format!("local_dim must be ≥ 2, got {local_dim}")));
        }
        if sites.is_empty() {
            return Err(Error::InvalidParameter("empty site range".into()));
        }
        Ok(Self { directed: DirectedFamily::lattice(sites), local_dim })
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }
}

impl<R: Real> Factorization<R> for LatticeFactorization {
    fn directed(&self) -> &DirectedFamily {
        &self.directed
    }

    fn space(&self, l: &Label) -> Result<HilbertSpace> {
        self.directed.check(l)?;
        Ok(HilbertSpace::product(l.indices(), self.local_dim))
    }

    fn factor_iso(&self, lo: &Label, hi: &Label) -> Result<FactorIso<R>> {
        let d = self.local_dim;
        let (hs, ls) = (hi.indices(), lo.indices());
        let perm = regroup_permutation(hs.len(), d, &positions_in(hs, ls));
        let comp = d.pow((hs.len() - ls.len()) as u32);
        FactorIso::new(lo.clone(), hi.clone(), comp, d.pow(ls.len() as u32), Unitary::Permutation(perm))
    }

    fn triple_iso(&self, lo: &Label, mid: &Label, hi: &Label) -> Result<TripleIso<R>> {
        let d = self.local_dim;
        let outer_sites = hi.indices().difference(lo.indices());
        let inner_sites = mid.indices().difference(lo.indices());
        let perm = regroup_permutation(outer_sites.len(), d, &positions_in(&outer_sites, &inner_sites));
        let outer_dim = d.pow((hi.size() - mid.size()) as u32);
        let inner_dim = d.pow(inner_sites.len() as u32);
        TripleIso::new(lo.clone(), mid.clone(), hi.clone(), outer_dim, inner_dim, Unitary::Permutation(perm))
    }
}

type PairKey = (Label, Label);
type TripleKey = (Label, Label, Label);

/// A family assembled from explicitly registered spaces and isomorphisms.
/// Requests for anything not registered fail with `IncompleteFamily`.
#[derive(Debug)]
pub struct RegisteredFactorization<R: Real> {
    directed: DirectedFamily,
    spaces: HashMap<Label, HilbertSpace>,
    pairs: HashMap<PairKey, (usize, usize, Unitary<R>)>,
    triples: HashMap<TripleKey, (usize, usize, Unitary<R>)>,
}

impl<R: Real> RegisteredFactorization<R> {
    pub fn new(directed: DirectedFamily) -> Self {
        Self { directed, spaces: HashMap::new(), pairs: HashMap::new(), triples: HashMap::new() }
    }

    pub fn register_space(&mut self, l: Label, space: HilbertSpace) {
        self.spaces.insert(l, space);
    }

    pub fn register_pair(&mut self, lo: Label, hi: Label, complement_dim: usize, base_dim: usize, op: Unitary<R>) {
        self.pairs.insert((lo, hi), (complement_dim, base_dim, op));
    }

    pub fn register_triple(&mut self, lo: Label, mid: Label, hi: Label, outer: usize, inner: usize, op: Unitary<R>) {
        self.triples.insert((lo, mid, hi), (outer, inner, op));
    }
}

impl<R: Real> Factorization<R> for RegisteredFactorization<R> {
    fn directed(&self) -> &DirectedFamily {
        &self.directed
    }

    fn space(&self, l: &Label) -> Result<HilbertSpace> {
        self.spaces.get(l).cloned().ok_or_else(|| Error::IncompleteFamily(format!("no space registered for {l}")))
    }

    fn factor_iso(&self, lo: &Label, hi: &Label) -> Result<FactorIso<R>> {
        let (c, b, op) = self
            .pairs
            .get(&(lo.clone(), hi.clone()))
            .ok_or_else(|| Error::IncompleteFamily(format!("missing Φ for pair ({hi}, {lo})")))?;
        FactorIso::new(lo.clone(), hi.clone(), *c, *b, op.clone())
    }

    fn triple_iso(&self, lo: &Label, mid: &Label, hi: &Label) -> Result<TripleIso<R>> {
        let (o, i, op) = self
            .triples
            .get(&(lo.clone(), mid.clone(), hi.clone()))
            .ok_or_else(|| Error::IncompleteFamily(format!("missing Φ for triple ({hi}, {mid}, {lo})")))?;
        TripleIso::new(lo.clone(), mid.clone(), hi.clone(), *o, *i, op.clone())
    }
}

/// Default tolerance on `‖U†U − I‖_max`.
pub const DEFAULT_UNITARITY_TOL: f64 = 1e-10;

/// A family of factorized Hilbert spaces with memoized pair isomorphisms.
///
/// Immutable after construction apart from the internally synchronized
/// cache, so it can be shared across threads.
pub struct FactorizedFamily<R: Real> {
    source: Arc<dyn Factorization<R>>,
    unitarity_tol: R,
    overrides: HashMap<PairKey, Arc<FactorIso<R>>>,
    cache: RwLock<HashMap<PairKey, Arc<FactorIso<R>>>>,
}

impl<R: Real> fmt::Debug for FactorizedFamily<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorizedFamily")
            .field("source", &self.source)
            .field("unitarity_tol", &self.unitarity_tol)
            .field("overrides", &self.overrides.len())
            .finish()
    }
}

impl<R: Real> Clone for FactorizedFamily<R> {
    fn clone(&self) -> Self {
        Self {
            source: self.source.clone(),
            unitarity_tol: self.unitarity_tol,
            overrides: self.overrides.clone(),
            cache: RwLock::new(self.cache.read().expect("cache poisoned").clone()),
        }
    }
}

impl<R: Real> FactorizedFamily<R> {
    pub fn new(source: Arc<dyn Factorization<R>>, unitarity_tol: R) -> Self {
        Self { source, unitarity_tol, overrides: HashMap::new(), cache: RwLock::new(HashMap::new()) }
    }

    /// Tensor-product family on `sites` with `local_dim` states per site.
    pub fn lattice(sites: IndexSet, local_dim: usize) -> Result<Self> {
        Ok(Self::new(Arc::new(LatticeFactorization::new(sites, local_dim)?), R::lit(DEFAULT_UNITARITY_TOL)))
    }

    pub fn directed(&self) -> &DirectedFamily {
        self.source.directed()
    }

    pub fn unitarity_tol(&self) -> R {
        self.unitarity_tol
    }

    pub fn with_unitarity_tol(mut self, tol: R) -> Self {
        self.unitarity_tol = tol;
        self
    }

    pub fn space(&self, l: &Label) -> Result<HilbertSpace> {
        self.directed().check(l)?;
        self.source.space(l)
    }

    pub fn dim(&self, l: &Label) -> Result<usize> {
        Ok(self.space(l)?.dim())
    }

    fn check_order(&self, lo: &Label, hi: &Label) -> Result<()> {
        self.directed().check(lo)?;
        self.directed().check(hi)?;
        if !lo.leq(hi)? {
            return Err(Error::OrderViolation { lo: lo.clone(), hi: hi.clone() });
        }
        Ok(())
    }

    /// `Φ_{hi,lo}`, memoized.
    pub fn factor_iso(&self, lo: &Label, hi: &Label) -> Result<Arc<FactorIso<R>>> {
        self.check_order(lo, hi)?;
        let key = (lo.clone(), hi.clone());
        if let Some(f) = self.overrides.get(&key) {
            return Ok(f.clone());
        }
        if let Some(f) = self.cache.read().expect("cache poisoned").get(&key) {
            return Ok(f.clone());
        }
        let iso = Arc::new(self.source.factor_iso(lo, hi)?);
        self.cache.write().expect("cache poisoned").entry(key).or_insert_with(|| iso.clone());
        Ok(iso)
    }

    /// `Φ_{hi,mid,lo}`.
    pub fn triple_iso(&self, lo: &Label, mid: &Label, hi: &Label) -> Result<TripleIso<R>> {
        self.check_order(lo, mid)?;
        self.check_order(mid, hi)?;
        self.source.triple_iso(lo, mid, hi)
    }

    /// A copy of this family with `Φ_{hi,lo}` replaced by `op`.
    pub fn with_replaced_iso(&self, lo: &Label, hi: &Label, op: Unitary<R>) -> Result<Self> {
        let orig = self.factor_iso(lo, hi)?;
        let iso = FactorIso::new(lo.clone(), hi.clone(), orig.complement_dim, orig.base_dim, op)?;
        let mut out = self.clone();
        out.overrides.insert((lo.clone(), hi.clone()), Arc::new(iso));
        Ok(out)
    }
}

/// Partial trace over the complement factor of a complement-major matrix:
/// `out[q, q̄] = Σ_t M[t·b + q, t·b + q̄]`.
pub fn partial_trace<R: Real>(m: &CMat<R>, complement_dim: usize, base_dim: usize) -> Result<CMat<R>> {
    let n = complement_dim * base_dim;
    if m.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!(
            "partial trace of {}x{} over {complement_dim}⊗{base_dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = CMat::zeros(base_dim, base_dim);
    for t in 0..complement_dim {
        let off = t * base_dim;
        for q in 0..base_dim {
            for qb in 0..base_dim {
                out[(q, qb)] += m[(off + q, off + qb)];
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TripleDefect {
    pub lo: Label,
    pub mid: Label,
    pub hi: Label,
    /// `‖(Φ_{hi,mid,lo} ⊗ id)Φ_{hi,lo} − (id ⊗ Φ_{mid,lo})Φ_{hi,mid}‖_max`
    pub diagram: f64,
    /// Largest unitarity defect among the four maps.
    pub unitarity: f64,
    /// Distance of `Φ_{hi,mid,lo}` from the identity when the triple is degenerate.
    pub triviality: Option<f64>,
    pub dims_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrivialityCheck {
    pub label: Label,
    pub complement_dim: usize,
    /// Distance of `Φ_{λλ}` from `1 · identity`.
    pub defect: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoherenceReport {
    pub tol: f64,
    pub unitarity_tol: f64,
    pub triples: Vec<TripleDefect>,
    pub trivial: Vec<TrivialityCheck>,
    pub max_diagram_defect: f64,
    pub max_unitarity_defect: f64,
    pub worst: Option<(Label, Label, Label)>,
    pub passed: bool,
}

/// Verify the factorization axioms on the given triples.
///
/// Computes the diagram defect and unitarity defects per triple, the
/// triviality of `Φ_{hi,mid,lo}` on degenerate triples, and
/// `dim H̃_{λλ} = 1`, `Φ_{λλ} = id` for every label that occurs.
pub fn check_coherence<R: Real>(
    fam: &FactorizedFamily<R>,
    triples: &[(Label, Label, Label)],
    tol: R,
) -> Result<CoherenceReport> {
    if tol <= R::zero() {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let utol = fam.unitarity_tol();
    let mut records = Vec::with_capacity(triples.len());
    let mut labels = BTreeSet::new();
    let (mut max_d, mut max_u) = (0.0f64, 0.0f64);
    let mut worst: Option<(f64, usize)> = None;
    for (k, (lo, mid, hi)) in triples.iter().enumerate() {
        labels.extend([lo.clone(), mid.clone(), hi.clone()]);
        let p_hl = fam.factor_iso(lo, hi)?;
        let p_hm = fam.factor_iso(mid, hi)?;
        let p_ml = fam.factor_iso(lo, mid)?;
        let t = fam.triple_iso(lo, mid, hi)?;
        let dims_ok = p_hl.complement_dim == t.outer_dim * t.inner_dim
            && p_hm.complement_dim == t.outer_dim
            && p_ml.complement_dim == t.inner_dim
            && p_hl.base_dim == p_ml.base_dim
            && p_hm.base_dim == p_ml.complement_dim * p_ml.base_dim;
        let diagram = if dims_ok {
            let left = t.op.kron(&Unitary::identity(p_hl.base_dim)).compose(&p_hl.op);
            let right = Unitary::<R>::identity(t.outer_dim).kron(&p_ml.op).compose(&p_hm.op);
            left.max_abs_diff(&right).as_f64()
        } else {
            f64::INFINITY
        };
        let unitarity = [p_hl.unitarity_defect(), p_hm.unitarity_defect(), p_ml.unitarity_defect(), t.op.unitarity_defect()]
            .into_iter()
            .fold(0.0f64, |a, b| a.max(b.as_f64()));
        let triviality = (lo == mid || mid == hi).then(|| t.op.identity_defect().as_f64());
        let passed = dims_ok
            && diagram <= tol.as_f64()
            && unitarity <= utol.as_f64()
            && triviality.is_none_or(|d| d <= tol.as_f64());
        max_d = max_d.max(diagram);
        max_u = max_u.max(unitarity);
        let badness = if passed { diagram } else { f64::INFINITY.min(diagram.max(1.0)) + diagram };
        if worst.is_none_or(|(w, _)| badness > w) {
            worst = Some((badness, k));
        }
        records.push(TripleDefect {
            lo: lo.clone(),
            mid: mid.clone(),
            hi: hi.clone(),
            diagram,
            unitarity,
            triviality,
            dims_ok,
            passed,
        });
    }
    let mut trivial = Vec::with_capacity(labels.len());
    for l in labels {
        let p = fam.factor_iso(&l, &l)?;
        let defect = p.op.identity_defect().as_f64();
        trivial.push(TrivialityCheck {
            passed: p.complement_dim == 1 && defect <= tol.as_f64(),
            complement_dim: p.complement_dim,
            defect,
            label: l,
        });
    }
    let passed = records.iter().all(|r| r.passed) && trivial.iter().all(|t| t.passed);
    let worst = worst.map(|(_, k)| {
        let r = &records[k];
        (r.lo.clone(), r.mid.clone(), r.hi.clone())
    });
    Ok(CoherenceReport {
        tol: tol.as_f64(),
        unitarity_tol: utol.as_f64(),
        triples: records,
        trivial,
        max_diagram_defect: max_d,
        max_unitarity_defect: max_u,
        worst,
        passed,
    })
}

/// Helper for tests and fault injection: a zero matrix of the right shape.
pub fn zero_like<R: Real>(n: usize) -> CMat<R> {
    CMat::from_element(n, n, Complex::zero())
}
