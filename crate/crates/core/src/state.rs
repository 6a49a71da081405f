//! Density operators, the projections `π_{λλ'} = ι*_{λ'λ}`, extension of
//! states to larger subsystems, and nets of compatible states.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::ComplexField;
use num_complex::Complex;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::algebra::{embed_observable, AlgebraElement};
use crate::error::{Error, Result};
use crate::factorized::{partial_trace, FactorizedFamily};
use crate::label::Label;
use crate::linalg::{self, MatrixRecord};
use crate::scalar::{CMat, Real};
use crate::unitary::Unitary;
use crate::vacuum::{self, LatticeModelSpec};

/// Tolerance used by the density invariants: `1e-12`, widened to a few
/// hundred ulps for single precision.
pub fn density_tol<R: Real>() -> R {
    R::lit(1e-12).max(R::default_epsilon() * R::lit(64.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator<R: Real> {
    level: Label,
    matrix: CMat<R>,
}

impl<R: Real> DensityOperator<R> {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(level: Label, matrix: CMat<R>) -> Result<Self> {
        validate_density(&matrix)?;
        Ok(Self { level, matrix })
    }

    /// Skips validation; for states that are densities by construction.
    pub fn new_unchecked(level: Label, matrix: CMat<R>) -> Self {
        Self { level, matrix }
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(level: Label, psi: &[Complex<R>]) -> Result<Self> {
        let norm2 = psi.iter().fold(R::zero(), |acc, z| acc + z.norm_sqr());
        if norm2 <= R::zero() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let m = linalg::projector(psi).unscale(norm2);
        Ok(Self { level, matrix: m })
    }

    pub fn maximally_mixed(level: Label, dim: usize) -> Self {
        let w = R::one() / R::lit(dim as f64);
        Self { level, matrix: CMat::from_diagonal_element(dim, dim, Complex::new(w, R::zero())) }
    }

    /// Random density of rank at most `rank`.
    pub fn random<G: rand::Rng + ?Sized>(level: Label, dim: usize, rank: usize, rng: &mut G) -> Self {
        Self { level, matrix: linalg::random_density(dim, rank, rng) }
    }

    pub fn level(&self) -> &Label {
        &self.level
    }

    pub fn matrix(&self) -> &CMat<R> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat<R> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> R {
        linalg::trace_product(&self.matrix, &self.matrix).re
    }

    /// `tr(ρ a)`.
    pub fn expectation(&self, a: &CMat<R>) -> Complex<R> {
        linalg::trace_product(&self.matrix, a)
    }

    /// Re-run the density invariants.
    pub fn validate(&self) -> Result<()> {
        validate_density(&self.matrix)
    }

    pub fn to_record(&self) -> StateRecord {
        StateRecord { label: self.level.clone(), matrix: MatrixRecord::from_matrix(&self.matrix) }
    }
}

fn validate_density<R: Real>(m: &CMat<R>) -> Result<()> {
    let tol = density_tol::<R>();
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidState(format!("{}x{} is not a nonempty square matrix", m.nrows(), m.ncols())));
    }
    let h = linalg::hermitian_defect(m);
    if h > tol {
        return Err(Error::InvalidState(format!("hermiticity defect {h:e}")));
    }
    let tr = linalg::trace(m).re;
    if (tr - R::one()).abs() > tol {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    let min = linalg::hermitian_eigenvalues(m)?[0];
    if min < -tol {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Serialized form: label plus row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub label: Label,
    pub matrix: MatrixRecord,
}

/// Trace norm `‖a − b‖₁` of a difference of hermitian matrices.
pub fn trace_norm_distance<R: Real>(a: &CMat<R>, b: &CMat<R>) -> Result<R> {
    linalg::trace_norm_hermitian(&(a - b))
}

/// Trace distance `‖ρ − σ‖₁ / 2`.
pub fn trace_distance<R: Real>(a: &DensityOperator<R>, b: &DensityOperator<R>) -> Result<R> {
    Ok(trace_norm_distance(&a.matrix, &b.matrix)? * R::lit(0.5))
}

fn check_dim<R: Real>(fam: &FactorizedFamily<R>, rho: &DensityOperator<R>) -> Result<()> {
    let d = fam.dim(&rho.level)?;
    if rho.dim() != d {
        return Err(Error::ShapeMismatch(format!("density of dimension {} at {}, expected {d}", rho.dim(), rho.level)));
    }
    Ok(())
}

/// `π_{target,level}(ρ) = tr_{H̃}(Φ ρ Φ†)`.
pub fn project_state<R: Real>(
    fam: &FactorizedFamily<R>,
    rho: &DensityOperator<R>,
    target: &Label,
) -> Result<DensityOperator<R>> {
    check_dim(fam, rho)?;
    let iso = fam.factor_iso(target, &rho.level)?;
    let (c, b) = (iso.complement_dim, iso.base_dim);
    let out = match &iso.op {
        Unitary::Permutation(p) => {
            if c == 1 && p.is_identity() {
                return Ok(DensityOperator::new_unchecked(target.clone(), rho.matrix.clone()));
            }
            let inv = p.inverse();
            let src = inv.image();
            let mut out = CMat::zeros(b, b);
            for t in 0..c {
                let off = t * b;
                for qb in 0..b {
                    let j = src[off + qb];
                    for q in 0..b {
                        out[(q, qb)] += rho.matrix[(src[off + q], j)];
                    }
                }
            }
            out
        }
        Unitary::Dense(_) => partial_trace(&iso.op.conjugate(&rho.matrix), c, b)?,
    };
    Ok(DensityOperator::new_unchecked(target.clone(), out))
}

/// `|tr(π(ρ) a) − tr(ρ ι(a))|`.
pub fn duality_check<R: Real>(fam: &FactorizedFamily<R>, rho: &DensityOperator<R>, a: &AlgebraElement<R>) -> Result<R> {
    let reduced = project_state(fam, rho, &a.level)?;
    let lhs = reduced.expectation(&a.matrix);
    let rhs = rho.expectation(&embed_observable(fam, a, &rho.level)?.matrix);
    Ok((lhs - rhs).modulus())
}

/// `Φ† (filler ⊗ ρ) Φ`, a state at `target` whose projection to `ρ.level` is `ρ`.
pub fn extend_state<R: Real>(
    fam: &FactorizedFamily<R>,
    rho: &DensityOperator<R>,
    target: &Label,
    filler: &DensityOperator<R>,
) -> Result<DensityOperator<R>> {
    check_dim(fam, rho)?;
    let iso = fam.factor_iso(&rho.level, target)?;
    if filler.dim() != iso.complement_dim {
        return Err(Error::ShapeMismatch(format!(
            "filler of dimension {} for a complement of dimension {}",
            filler.dim(),
            iso.complement_dim
        )));
    }
    let b = iso.base_dim;
    let out = match &iso.op {
        Unitary::Permutation(p) => {
            let img = p.image();
            let n = img.len();
            CMat::from_fn(n, n, |i, j| {
                let (pi, pj) = (img[i], img[j]);
                filler.matrix[(pi / b, pj / b)] * rho.matrix[(pi % b, pj % b)]
            })
        }
        Unitary::Dense(_) => iso.op.pull_back(&linalg::kron(&filler.matrix, &rho.matrix)),
    };
    Ok(DensityOperator::new_unchecked(target.clone(), out))
}

/// How the entries of a net are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// `λ ↦ ⊗_{i∈λ} ρ₀`.
    ProductState { site_state: MatrixRecord },
    /// `λ ↦ π_{λ,outer}(ground state of H_outer)`.
    VacuumNet { spec: LatticeModelSpec, outer: Label },
    Explicit,
}

/// A finite sample of a projective-limit state: densities on a finite set of
/// levels, either stored or produced on demand by a generator.
pub struct StateNet<R: Real> {
    provenance: Provenance,
    levels: Vec<Label>,
    site_state: Option<CMat<R>>,
    outer_state: OnceLock<Arc<DensityOperator<R>>>,
    cache: RwLock<BTreeMap<Label, Arc<DensityOperator<R>>>>,
}

impl<R: Real> std::fmt::Debug for StateNet<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateNet").field("provenance", &self.provenance).field("levels", &self.levels).finish()
    }
}

fn sort_levels(mut levels: Vec<Label>) -> Vec<Label> {
    levels.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
    levels.dedup();
    levels
}

impl<R: Real> StateNet<R> {
    fn with(provenance: Provenance, levels: Vec<Label>, site_state: Option<CMat<R>>) -> Self {
        Self {
            provenance,
            levels: sort_levels(levels),
            site_state,
            outer_state: OnceLock::new(),
            cache: RwLock::new(BTreeMap::new()),
        }
    }

    /// A net of stored densities, one per level.
    pub fn explicit(entries: Vec<DensityOperator<R>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("a net needs at least one entry".into()));
        }
        let mut cache = BTreeMap::new();
        for e in entries {
            let l = e.level.clone();
            if cache.insert(l.clone(), Arc::new(e)).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate level {l}")));
            }
        }
        let net = Self::with(Provenance::Explicit, cache.keys().cloned().collect(), None);
        *net.cache.write().expect("cache poisoned") = cache;
        Ok(net)
    }

    /// Product net of the single-site density `site_state` sampled on `levels`.
    pub fn product(fam: &FactorizedFamily<R>, site_state: &DensityOperator<R>, levels: Vec<Label>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("a net needs at least one level".into()));
        }
        for l in &levels {
            let d = fam.dim(l)?;
            if d != site_state.dim().pow(l.size() as u32) {
                return Err(Error::ShapeMismatch(format!("site state of dimension {} does not tile {l}", site_state.dim())));
            }
        }
        Ok(Self::with(
            Provenance::ProductState { site_state: MatrixRecord::from_matrix(&site_state.matrix) },
            levels,
            Some(site_state.matrix.clone()),
        ))
    }

    /// Net of projections of the ground state of `H_outer` to `levels`.
    pub fn vacuum(fam: &FactorizedFamily<R>, spec: LatticeModelSpec, outer: Label, levels: Vec<Label>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("a net needs at least one level".into()));
        }
        fam.directed().check(&outer)?;
        for l in &levels {
            if !l.leq(&outer)? {
                return Err(Error::OrderViolation { lo: l.clone(), hi: outer.clone() });
            }
        }
        Ok(Self::with(Provenance::VacuumNet { spec, outer }, levels, None))
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Stored levels, smallest first.
    pub fn levels(&self) -> &[Label] {
        &self.levels
    }

    /// The density at a stored level, generated and memoized on first use.
    pub fn entry(&self, fam: &FactorizedFamily<R>, level: &Label) -> Result<Arc<DensityOperator<R>>> {
        if let Some(e) = self.cache.read().expect("cache poisoned").get(level) {
            return Ok(e.clone());
        }
        if !self.levels.contains(level) {
            return Err(Error::InsufficientNet(level.clone()));
        }
        let rho = Arc::new(self.generate(fam, level)?);
        Ok(self.cache.write().expect("cache poisoned").entry(level.clone()).or_insert(rho).clone())
    }

    fn generate(&self, fam: &FactorizedFamily<R>, level: &Label) -> Result<DensityOperator<R>> {
        match &self.provenance {
            Provenance::ProductState { .. } => {
                let s = self.site_state.as_ref().expect("product net keeps its site state");
                // little-endian: later (larger) sites are the major factor
                let mut acc = CMat::from_element(1, 1, Complex::one());
                for _ in level.indices().iter() {
                    acc = linalg::kron(s, &acc);
                }
                Ok(DensityOperator::new_unchecked(level.clone(), acc))
            }
            Provenance::VacuumNet { spec, outer } => {
                let top = match self.outer_state.get() {
                    Some(t) => t.clone(),
                    None => {
                        let h = vacuum::build_hamiltonian::<R>(spec, outer)?;
                        let g = vacuum::ground_state(&h, R::lit(vacuum::DEFAULT_DEGENERACY_TOL))?;
                        self.outer_state.get_or_init(|| Arc::new(g.state)).clone()
                    }
                };
                project_state(fam, &top, level)
            }
            Provenance::Explicit => Err(Error::InsufficientNet(level.clone())),
        }
    }

    /// An explicit copy with every level materialized.
    pub fn to_explicit(&self, fam: &FactorizedFamily<R>) -> Result<Self> {
        let entries = self.levels.iter().map(|l| self.entry(fam, l).map(|e| (*e).clone())).collect::<Result<Vec<_>>>()?;
        Self::explicit(entries)
    }

    /// An explicit copy with the entry at `rho.level` replaced (or added).
    pub fn with_entry(&self, fam: &FactorizedFamily<R>, rho: DensityOperator<R>) -> Result<Self> {
        let mut entries: Vec<_> = self
            .levels
            .iter()
            .filter(|l| **l != rho.level)
            .map(|l| self.entry(fam, l).map(|e| (*e).clone()))
            .collect::<Result<_>>()?;
        entries.push(rho);
        Self::explicit(entries)
    }

    pub fn to_records(&self, fam: &FactorizedFamily<R>) -> Result<Vec<StateRecord>> {
        self.levels.iter().map(|l| Ok(self.entry(fam, l)?.to_record())).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NetPairDefect {
    pub lo: Label,
    pub hi: Label,
    /// `‖π_{lo,hi}(ρ_hi) − ρ_lo‖₁`
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetReport {
    pub tol: f64,
    pub pairs: Vec<NetPairDefect>,
    pub max_defect: f64,
    pub worst: Option<(Label, Label)>,
    pub passed: bool,
}

/// Compatibility of every stored comparable pair.
pub fn check_net<R: Real>(fam: &FactorizedFamily<R>, net: &StateNet<R>, tol: R) -> Result<NetReport> {
    let mut pairs = Vec::new();
    let levels = net.levels();
    for (i, lo) in levels.iter().enumerate() {
        for hi in &levels[i + 1..] {
            if !lo.leq(hi)? {
                continue;
            }
            let proj = project_state(fam, &*net.entry(fam, hi)?, lo)?;
            let defect = trace_norm_distance(proj.matrix(), net.entry(fam, lo)?.matrix())?.as_f64();
            pairs.push(NetPairDefect { lo: lo.clone(), hi: hi.clone(), defect });
        }
    }
    let worst = pairs
        .iter()
        .max_by(|a, b| a.defect.total_cmp(&b.defect))
        .map(|p| (p.lo.clone(), p.hi.clone()));
    let max_defect = pairs.iter().fold(0.0f64, |m, p| m.max(p.defect));
    Ok(NetReport { tol: tol.as_f64(), passed: max_defect <= tol.as_f64(), pairs, max_defect, worst })
}

/// Stored levels at or above `level`, smallest first.
pub fn evaluation_levels<R: Real>(net: &StateNet<R>, level: &Label) -> Result<Vec<Label>> {
    let mut out = Vec::new();
    for l in net.levels() {
        if level.same_kind(l) && level.leq(l)? {
            out.push(l.clone());
        }
    }
    Ok(out)
}

/// `tr(ρ_level · ι_{level}(a))` at a chosen stored level.
pub fn evaluate_net_at<R: Real>(
    fam: &FactorizedFamily<R>,
    net: &StateNet<R>,
    a: &AlgebraElement<R>,
    level: &Label,
) -> Result<Complex<R>> {
    let rho = net.entry(fam, level)?;
    let e = embed_observable(fam, a, level)?;
    Ok(rho.expectation(&e.matrix))
}

/// `s([a])`, evaluated at the lowest stored level at or above `a.level`.
pub fn evaluate_net<R: Real>(fam: &FactorizedFamily<R>, net: &StateNet<R>, a: &AlgebraElement<R>) -> Result<Complex<R>> {
    let levels = evaluation_levels(net, &a.level)?;
    let level = levels.first().ok_or_else(|| Error::InsufficientNet(a.level.clone()))?;
    evaluate_net_at(fam, net, a, level)
}

/// Evaluates at every valid stored level; returns the lowest-level value and
/// the largest deviation of any other level from it.
pub fn evaluate_net_cross_checked<R: Real>(
    fam: &FactorizedFamily<R>,
    net: &StateNet<R>,
    a: &AlgebraElement<R>,
) -> Result<(Complex<R>, R)> {
    let levels = evaluation_levels(net, &a.level)?;
    let first = levels.first().ok_or_else(|| Error::InsufficientNet(a.level.clone()))?;
    let v0 = evaluate_net_at(fam, net, a, first)?;
    let mut spread = R::zero();
    for l in &levels[1..] {
        spread = spread.max((evaluate_net_at(fam, net, a, l)? - v0).modulus());
    }
    Ok((v0, spread))
}
