//! Truncated Hamiltonians, their ground states, and the projected vacuum
//! candidates `v_{λλ'} = π_{λλ'}(v_{λ'})` along growing chains.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::factorized::FactorizedFamily;
use crate::label::Label;
use crate::linalg;
use crate::scalar::{CMat, Real};
use crate::state::{project_state, trace_distance, DensityOperator, StateRecord};

/// Eigenvalues within this distance of the minimum count as ground states.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// Largest Hilbert-space dimension diagonalized densely by default.
pub const DEFAULT_DIM_BUDGET: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    TransverseFieldIsing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
}

/// `H = −J Σ Z_i Z_{i+1} − h Σ X_i` on a lattice region; `i, i+1` are
/// adjacent when both lie in the region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeModelSpec {
    pub coupling: f64,
    pub field: f64,
    pub model: ModelKind,
    pub boundary: Boundary,
}

impl LatticeModelSpec {
    pub fn tfi(coupling: f64, field: f64) -> Result<Self> {
        let s = Self { coupling, field, model: ModelKind::TransverseFieldIsing, boundary: Boundary::Open };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coupling.is_finite() || !self.field.is_finite() {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if self.coupling == 0.0 && self.field == 0.0 {
            return Err(Error::InvalidParameter("at least one of J, h must be nonzero".into()));
        }
        Ok(())
    }
}

/// Dense `H_λ` in the computational basis (`|0⟩` has `Z = +1`).
pub fn build_hamiltonian<R: Real>(spec: &LatticeModelSpec, level: &Label) -> Result<AlgebraElement<R>> {
    spec.validate()?;
    if !matches!(level, Label::Lattice(_)) {
        return Err(Error::InvalidParameter(format!("{level} is not a lattice label")));
    }
    let sites = level.indices().as_slice();
    if sites.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = sites.len();
    let dim = 1usize << n;
    let bonds: Vec<usize> = (0..n - 1).filter(|&k| sites[k + 1] == sites[k] + 1).collect();
    let (j, h) = (R::lit(spec.coupling), R::lit(spec.field));
    let mut m = CMat::<R>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = R::zero();
        for &k in &bonds {
            let aligned = (s >> k & 1) == (s >> (k + 1) & 1);
            diag += if aligned { -j } else { j };
        }
        m[(s, s)] = Complex::new(diag, R::zero());
        for k in 0..n {
            m[(s ^ (1 << k), s)] -= Complex::new(h, R::zero());
        }
    }
    Ok(AlgebraElement { level: level.clone(), matrix: m })
}

#[derive(Clone, Debug)]
pub struct GroundState<R: Real> {
    pub state: DensityOperator<R>,
    pub energy: R,
    /// `E_1 − E_0` above the ground space; `None` when the whole spectrum is degenerate.
    pub gap: Option<R>,
    pub degeneracy: usize,
}

impl<R: Real> GroundState<R> {
    pub fn degenerate(&self) -> bool {
        self.degeneracy > 1
    }
}

/// Ground state of a hermitian element; the normalized projector onto the
/// ground eigenspace when it is degenerate.
pub fn ground_state<R: Real>(h: &AlgebraElement<R>, degeneracy_tol: R) -> Result<GroundState<R>> {
    let tol = R::lit(1e-10).max(R::default_epsilon() * R::lit(1e3));
    let hd = linalg::hermitian_defect(&h.matrix);
    if hd > tol * linalg::max_abs(&h.matrix).max(R::one()) {
        return Err(Error::InvalidParameter(format!("hamiltonian is not hermitian (defect {hd:e})")));
    }
    let (vals, vecs) = linalg::hermitian_eigen(&h.matrix)?;
    let e0 = vals[0];
    let k = vals.iter().take_while(|&&v| v - e0 <= degeneracy_tol).count();
    let n = vals.len();
    let mut rho = CMat::<R>::zeros(n, n);
    let w = Complex::new(R::one() / R::lit(k as f64), R::zero());
    for g in 0..k {
        let v = vecs.column(g);
        for j in 0..n {
            let vj = v[j].conj() * w;
            if vj.is_zero() {
                continue;
            }
            for i in 0..n {
                rho[(i, j)] += v[i] * vj;
            }
        }
    }
    Ok(GroundState {
        state: DensityOperator::new_unchecked(h.level.clone(), rho),
        energy: e0,
        gap: vals.get(k).map(|&v| v - e0),
        degeneracy: k,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TracePoint {
    pub label: Label,
    pub sites: usize,
    pub energy: f64,
    pub gap: Option<f64>,
    pub degeneracy: usize,
    pub projected: StateRecord,
}

/// Projected vacuum candidates at a fixed level along a growing chain.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTrace {
    pub level: Label,
    pub spec: LatticeModelSpec,
    pub points: Vec<TracePoint>,
    /// `d_k = ‖v_{λ,λ'_{k+1}} − v_{λ,λ'_k}‖₁ / 2`
    pub distances: Vec<f64>,
    /// Largest violation of the density invariants among projected states.
    pub density_defect: f64,
    pub metric: &'static str,
}

impl ConvergenceTrace {
    /// Rows `(L, energy, gap, d_k)`; `d_k` is the distance to the previous
    /// chain member and is empty on the first row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["L", "energy", "gap", "d_k"])?;
        for (k, p) in self.points.iter().enumerate() {
            let d = if k == 0 { String::new() } else { format!("{:e}", self.distances[k - 1]) };
            let gap = p.gap.map(|g| format!("{g:e}")).unwrap_or_default();
            wr.write_record([p.sites.to_string(), format!("{:e}", p.energy), gap, d])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Distance of a matrix from satisfying the density invariants.
pub fn density_violation<R: Real>(m: &CMat<R>) -> Result<f64> {
    let herm = linalg::hermitian_defect(m).as_f64();
    let tr = (linalg::trace(m).re - R::one()).abs().as_f64();
    let min = linalg::hermitian_eigenvalues(m)?[0].as_f64();
    Ok(herm.max(tr).max((-min).max(0.0)))
}

/// Ground states along `chain`, projected to `level`.
pub fn vacuum_trace<R: Real>(
    fam: &FactorizedFamily<R>,
    spec: &LatticeModelSpec,
    level: &Label,
    chain: &[Label],
    dim_budget: usize,
) -> Result<ConvergenceTrace> {
    spec.validate()?;
    if chain.is_empty() {
        return Err(Error::InvalidParameter("empty chain".into()));
    }
    if !level.leq(&chain[0])? {
        return Err(Error::ChainNotAscending(0));
    }
    for (k, w) in chain.windows(2).enumerate() {
        if !w[0].leq(&w[1])? || w[0] == w[1] {
            return Err(Error::ChainNotAscending(k + 1));
        }
    }
    let top = chain.last().expect("nonempty");
    let required = fam.dim(top)?;
    if required > dim_budget {
        let bytes = (required as u64).pow(2) * std::mem::size_of::<Complex<R>>() as u64;
        return Err(Error::BudgetExceeded { required, limit: dim_budget, bytes });
    }
    let results: Vec<(GroundState<R>, DensityOperator<R>)> = chain
        .par_iter()
        .map(|l| {
            let h = build_hamiltonian::<R>(spec, l)?;
            let g = ground_state(&h, R::lit(DEFAULT_DEGENERACY_TOL))?;
            let v = project_state(fam, &g.state, level)?;
            Ok((g, v))
        })
        .collect::<Result<_>>()?;
    let mut distances = Vec::with_capacity(chain.len().saturating_sub(1));
    for w in results.windows(2) {
        distances.push(trace_distance(&w[1].1, &w[0].1)?.as_f64());
    }
    let mut density_defect = 0.0f64;
    let mut points = Vec::with_capacity(chain.len());
    for (l, (g, v)) in chain.iter().zip(&results) {
        density_defect = density_defect.max(density_violation(v.matrix())?);
        points.push(TracePoint {
            label: l.clone(),
            sites: l.size(),
            energy: g.energy.as_f64(),
            gap: g.gap.map(|x| x.as_f64()),
            degeneracy: g.degeneracy,
            projected: v.to_record(),
        });
    }
    Ok(ConvergenceTrace {
        level: level.clone(),
        spec: *spec,
        points,
        distances,
        density_defect,
        metric: "trace distance",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{pauli_x, pauli_z};
    use crate::label::IndexSet;
    use crate::scalar::c;

    type M = CMat<f64>;

    fn l(v: &[u32]) -> Label {
        Label::lattice(v.iter().copied())
    }

    /// `op` at position `k` of `n`, little-endian Kronecker oracle.
    fn at(op: &M, k: usize, n: usize) -> M {
        let mut acc = M::identity(1, 1);
        for p in 0..n {
            let f = if p == k { op.clone() } else { M::identity(2, 2) };
            acc = linalg::kron(&f, &acc);
        }
        acc
    }

    fn oracle(j: f64, h: f64, n: usize) -> M {
        let mut m = M::zeros(1 << n, 1 << n);
        for k in 0..n - 1 {
            m -= (at(&pauli_z(), k, n) * at(&pauli_z(), k + 1, n)).scale(j);
        }
        for k in 0..n {
            m -= at(&pauli_x(), k, n).scale(h);
        }
        m
    }

    #[test]
    fn hamiltonian_matches_kron_oracle() {
        for (j, h, n) in [(1.0, 1.0, 2), (1.0, 2.0, 4), (0.3, -0.7, 3)] {
            let spec = LatticeModelSpec::tfi(j, h).unwrap();
            let sites: Vec<u32> = (5..5 + n as u32).collect();
            let hm = build_hamiltonian::<f64>(&spec, &l(&sites)).unwrap();
            assert!(linalg::max_abs_diff(&hm.matrix, &oracle(j, h, n)) < 1e-15);
            assert!(linalg::hermitian_defect(&hm.matrix) <= 1e-14);
        }
    }

    #[test]
    fn non_adjacent_sites_are_uncoupled() {
        let spec = LatticeModelSpec::tfi(1.0, 0.0).unwrap();
        let h = build_hamiltonian::<f64>(&spec, &l(&[0, 2])).unwrap();
        assert_eq!(linalg::max_abs(&h.matrix), 0.0);
    }

    #[test]
    fn single_site_field() {
        let spec = LatticeModelSpec::tfi(5.0, 1.0).unwrap();
        let h = build_hamiltonian::<f64>(&spec, &l(&[3])).unwrap();
        assert_eq!(h.matrix, -pauli_x::<f64>());
        let vals = linalg::hermitian_eigenvalues(&h.matrix).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
        let g = ground_state(&h, 1e-9).unwrap();
        assert!(!g.degenerate());
        // X = +1 eigenvector (|0⟩ + |1⟩)/√2
        let plus = M::from_element(2, 2, c(0.5));
        assert!(linalg::max_abs_diff(g.state.matrix(), &plus) < 1e-14);
        assert!((g.state.purity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn classical_ising_is_degenerate() {
        let spec = LatticeModelSpec::tfi(1.0, 0.0).unwrap();
        let h = build_hamiltonian::<f64>(&spec, &l(&[0, 1])).unwrap();
        let g = ground_state(&h, 1e-9).unwrap();
        assert_eq!(g.degeneracy, 2);
        let mut expect = M::zeros(4, 4);
        expect[(0, 0)] = c(0.5);
        expect[(3, 3)] = c(0.5);
        assert!(linalg::max_abs_diff(g.state.matrix(), &expect) < 1e-15);
        assert!((g.gap.unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn four_site_energy_matches_oracle() {
        let spec = LatticeModelSpec::tfi(1.0, 2.0).unwrap();
        let h = build_hamiltonian::<f64>(&spec, &l(&[0, 1, 2, 3])).unwrap();
        let g = ground_state(&h, 1e-9).unwrap();
        // free-fermion oracle for the open chain
        let e = open_chain_energy(1.0, 2.0, 4);
        assert!((g.energy - e).abs() < 1e-10, "{} vs {e}", g.energy);
    }

    /// Free-fermion ground energy of the open chain: minus the sum of the
    /// singular values of `h·I + J·(superdiagonal)`.
    fn open_chain_energy(j: f64, h: f64, n: usize) -> f64 {
        let b = nalgebra::DMatrix::<f64>::from_fn(n, n, |r, col| {
            if r == col {
                h
            } else if col == r + 1 {
                j
            } else {
                0.0
            }
        });
        -b.singular_values().iter().sum::<f64>()
    }

    #[test]
    fn uncoupled_energy_is_extensive_and_local() {
        let spec = LatticeModelSpec::tfi(0.0, 1.3).unwrap();
        for n in 1..5u32 {
            let h = build_hamiltonian::<f64>(&spec, &Label::lattice(0..n)).unwrap();
            let g = ground_state(&h, 1e-9).unwrap();
            assert!((g.energy + 1.3 * n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        assert!(LatticeModelSpec::tfi(0.0, 0.0).is_err());
        let spec = LatticeModelSpec::tfi(1.0, 1.0).unwrap();
        assert!(matches!(build_hamiltonian::<f64>(&spec, &l(&[])), Err(Error::EmptyRegion)));
        let fam = FactorizedFamily::<f64>::lattice(IndexSet::range(0, 6), 2).unwrap();
        let lam = l(&[2, 3]);
        let bad = [l(&[1, 2, 3, 4]), l(&[2, 3])];
        assert!(matches!(vacuum_trace(&fam, &spec, &lam, &bad, 4096), Err(Error::ChainNotAscending(1))));
        let big = [l(&[0, 1, 2, 3, 4, 5])];
        assert!(matches!(vacuum_trace(&fam, &spec, &lam, &big, 16), Err(Error::BudgetExceeded { required: 64, .. })));
        let nh = AlgebraElement { level: l(&[0]), matrix: M::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]) };
        assert!(ground_state(&nh, 1e-9).is_err());
    }

    #[test]
    fn small_trace_controls() {
        let fam = FactorizedFamily::<f64>::lattice(IndexSet::range(0, 6), 2).unwrap();
        let lam = l(&[2, 3]);
        let chain = [l(&[1, 2, 3, 4]), l(&[0, 1, 2, 3, 4, 5])];
        for spec in [LatticeModelSpec::tfi(0.0, 1.0).unwrap(), LatticeModelSpec::tfi(1.0, 0.0).unwrap()] {
            let t = vacuum_trace(&fam, &spec, &lam, &chain, 4096).unwrap();
            assert!(t.distances.iter().all(|&d| d <= 1e-12), "{:?}", t.distances);
            assert!(t.density_defect <= 1e-12);
        }
        let t = vacuum_trace(&fam, &LatticeModelSpec::tfi(1.0, 2.0).unwrap(), &lam, &chain, 4096).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("L,energy,gap,d_k\n4,"));
        assert_eq!(text.lines().count(), 3);
    }
}
