//! Checks of the Gaussian construction: measure decompositions, point maps,
//! the induced Hilbert-space diagram, and the partial-trace description of
//! the projections.

use nalgebra::{DMatrix, DMatrixView};
use num_rational::BigRational;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config_space::{self, check_structure, CoordinateModel, FMat, StructureReport};
use super::hermite::{gauss_hermite, hermite_values};
use super::model::{coherent_probe, probe_alphas, sqrt_pair, GaussianModel, GaussianSpec, PhiMatrix, Variant};
use crate::error::{Error, Result};
use crate::factorized::{partial_trace, FactorizedFamily};
use crate::label::IndexSet;
use crate::rng;
use crate::scalar::{c, CMat, Field, RMat, Real};
use crate::state::{extend_state, project_state, trace_norm_distance, DensityOperator};

/// Matrices above this side are not squared to get a max-norm unitarity defect.
pub const MAX_DENSE_UNITARITY_DIM: usize = 1024;

fn digits(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(idx % base);
        idx /= base;
    }
    out
}

/// Exponent vectors over `d` variables with total degree `≤ degree`.
pub fn monomials(d: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; d]];
    for _ in 0..degree {
        let mut next = Vec::new();
        for m in &out {
            let last = m.iter().rposition(|&e| e > 0).unwrap_or(0);
            for k in last..d {
                let mut e = m.clone();
                e[k] += 1;
                next.push(e);
            }
        }
        out.extend(next.iter().filter(|e| e.iter().sum::<u32>() as usize <= degree).cloned());
        out.sort();
        out.dedup();
    }
    out
}

/// `E[Π_k (L u)_k^{α_k}]` for `u ~ N(0, I)`, each monomial in `exps`, by a
/// tensor Gauss–Hermite rule of order `q` per variable.
pub fn linear_gaussian_moments(l: &FMat<f64>, exps: &[Vec<u32>], q: usize) -> Result<Vec<f64>> {
    let (x, w) = gauss_hermite::<f64>(q)?;
    let d = l.ncols();
    let rows = l.nrows();
    let mut acc = vec![0.0; exps.len()];
    let mut y = vec![0.0; rows];
    for node in 0..q.pow(d as u32) {
        let idx = digits(node, q, d);
        let wt: f64 = idx.iter().map(|&j| w[j]).product();
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = idx.iter().enumerate().map(|(i, &j)| l[(k, i)] * x[j]).sum();
        }
        for (a, e) in acc.iter_mut().zip(exps) {
            *a += wt * e.iter().zip(&y).map(|(&p, v)| v.powi(p as i32)).product::<f64>();
        }
    }
    Ok(acc)
}

fn sqrt_f64(cov: &FMat<f64>) -> Result<FMat<f64>> {
    Ok(sqrt_pair::<f64>(cov)?.0)
}

fn hstack(blocks: &[&FMat<f64>]) -> FMat<f64> {
    config_space::hstack(blocks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureIdentity {
    pub name: String,
    pub monomials: usize,
    pub max_discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub lo: IndexSet,
    pub mid: Option<IndexSet>,
    pub hi: IndexSet,
    pub degree: usize,
    pub quadrature_order: usize,
    pub identities: Vec<MeasureIdentity>,
    pub max_discrepancy: f64,
}

fn compare_laws(name: &str, lhs: &FMat<f64>, rhs: &FMat<f64>, degree: usize, q: usize) -> Result<MeasureIdentity> {
    let exps = monomials(lhs.nrows(), degree);
    let a = linear_gaussian_moments(lhs, &exps, q)?;
    let b = linear_gaussian_moments(rhs, &exps, q)?;
    let max_discrepancy = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(MeasureIdentity { name: name.to_owned(), monomials: exps.len(), max_discrepancy })
}

fn check_order<R: Real>(model: &GaussianModel<R>, order: usize) -> Result<()> {
    if order < model.truncation() {
        return Err(Error::InvalidParameter(format!(
            "quadrature order {order} is below the truncation order {}",
            model.truncation()
        )));
    }
    Ok(())
}

fn report(lo: &IndexSet, mid: Option<&IndexSet>, hi: &IndexSet, degree: usize, q: usize, ids: Vec<MeasureIdentity>) -> MeasureReport {
    let max_discrepancy = ids.iter().map(|i| i.max_discrepancy).fold(0.0, f64::max);
    MeasureReport { lo: lo.clone(), mid: mid.cloned(), hi: hi.clone(), degree, quadrature_order: q, identities: ids, max_discrepancy }
}

/// `dμ_{hi} = dμ̃_{hi,lo} × ω_*(dμ_lo)` tested on monomials up to `degree`.
///
/// Both sides are laws of linear images of standard normals: `Σ_hi^{1/2} u`
/// against `E_r S^{1/2} y + ω Σ_lo^{1/2} q`.
pub fn verify_measure_product<R: Real>(
    model: &GaussianModel<R>,
    lo: &IndexSet,
    hi: &IndexSet,
    order: usize,
    degree: usize,
) -> Result<MeasureReport> {
    check_order(model, order)?;
    let m = model.coordinates();
    let lhs = sqrt_f64(&m.block(hi, hi)?)?;
    let rhs = product_factor(m, lo, hi)?;
    Ok(report(lo, None, hi, degree, order, vec![compare_laws("mmm", &lhs, &rhs, degree, order)?]))
}

fn product_factor(m: &CoordinateModel<f64>, lo: &IndexSet, hi: &IndexSet) -> Result<FMat<f64>> {
    let r = hi.difference(lo);
    let e_r = config_space::embedding::<f64>(hi, &r)?;
    let s = sqrt_f64(&m.complement_covariance(lo, hi)?)?;
    let w = m.injection(lo, hi)?.matrix;
    let sk = sqrt_f64(&m.block(lo, lo)?)?;
    Ok(hstack(&[&(e_r * s), &(w * sk)]))
}

/// The triple identities: `dμ_{hi} = dμ̃_{hi,mid} × ω_{hi,mid*}(dμ̃_{mid,lo}) ×
/// ω_{hi,lo*}(dμ_lo)` and `dμ̃_{hi,lo} = dμ̃_{hi,mid} × ω_{hi,mid*}(dμ̃_{mid,lo})`
/// on `ker pr_{lo,hi}`.
pub fn verify_measure_triple<R: Real>(
    model: &GaussianModel<R>,
    lo: &IndexSet,
    mid: &IndexSet,
    hi: &IndexSet,
    order: usize,
    degree: usize,
) -> Result<MeasureReport> {
    check_order(model, order)?;
    let m = model.coordinates();
    let a = hi.difference(mid);
    let b = mid.difference(lo);
    let r2 = hi.difference(lo);
    let s_a = sqrt_f64(&m.complement_covariance(mid, hi)?)?;
    let s_b = sqrt_f64(&m.complement_covariance(lo, mid)?)?;
    let w_hm = m.injection(mid, hi)?.matrix;
    let wb = &w_hm * config_space::embedding::<f64>(mid, &b)? * &s_b;
    let ea = config_space::embedding::<f64>(hi, &a)? * &s_a;
    let wl = m.injection(lo, hi)?.matrix * sqrt_f64(&m.block(lo, lo)?)?;

    let m1_lhs = sqrt_f64(&m.block(hi, hi)?)?;
    let m1_rhs = hstack(&[&ea, &wb, &wl]);
    let p = config_space::transpose(&config_space::embedding::<f64>(hi, &r2)?);
    let m2_lhs = sqrt_f64(&m.complement_covariance(lo, hi)?)?;
    let m2_rhs = hstack(&[&(&p * &ea), &(&p * &wb)]);
    let ids = vec![
        compare_laws("m1", &m1_lhs, &m1_rhs, degree, order)?,
        compare_laws("m2", &m2_lhs, &m2_rhs, degree, order)?,
    ];
    Ok(report(lo, Some(mid), hi, degree, order, ids))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDefect {
    pub map: String,
    pub dim: usize,
    /// `max(‖PᵀP − I‖_max, ‖PPᵀ − I‖_max)`; skipped above
    /// [`MAX_DENSE_UNITARITY_DIM`].
    pub max: Option<f64>,
    /// `max_v ‖PᵀP v − v‖` over the coherent probes.
    pub probe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleMapReport {
    pub lo: IndexSet,
    pub mid: IndexSet,
    pub hi: IndexSet,
    pub truncation: usize,
    pub quadrature_order: usize,
    pub structure: StructureReport,
    pub points: usize,
    /// Point-map disagreement computed in exact rational arithmetic.
    pub point_defect_exact: f64,
    pub point_defect_float: f64,
    /// `‖(Φ_{hi,mid,lo} ⊗ 1)Φ_{hi,lo} − (1 ⊗ Φ_{mid,lo})Φ_{hi,mid}‖_max`.
    pub diagram_max: Option<f64>,
    /// The same difference applied to the coherent probes, in the 2-norm.
    pub diagram_probe: f64,
    pub permutations: bool,
    pub unitarity: Vec<MapDefect>,
}

impl TripleMapReport {
    pub fn max_unitarity_probe(&self) -> f64 {
        self.unitarity.iter().map(|u| u.probe).fold(0.0, f64::max)
    }
}

fn point_defect<F: Field>(m: &CoordinateModel<F>, lo: &IndexSet, mid: &IndexSet, hi: &IndexSet, pts: &[Vec<f64>]) -> Result<f64> {
    let via_lo = m.phi_pair(lo, hi)?;
    let tri = m.phi_triple(lo, mid, hi)?;
    let via_mid = m.phi_pair(mid, hi)?;
    let inner = m.phi_pair(lo, mid)?;
    let na = hi.len() - mid.len();
    let nb = mid.len() - lo.len();
    let mut worst = 0.0f64;
    for p in pts {
        let v: Vec<F> = p.iter().map(|&x| F::from_f64_exact(x)).collect();
        let (ya, rest) = v.split_at(na);
        let (yb, q) = rest.split_at(nb);
        // φ_{hi,lo}(φ_{hi,mid,lo}(y'', y'), q)
        let mut lhs_in = config_space::apply(&tri, &v[..na + nb]);
        lhs_in.extend_from_slice(q);
        let lhs = config_space::apply(&via_lo, &lhs_in);
        // φ_{hi,mid}(y'', φ_{mid,lo}(y', q))
        let mut inner_in = yb.to_vec();
        inner_in.extend_from_slice(q);
        let mut rhs_in = ya.to_vec();
        rhs_in.extend(config_space::apply(&inner, &inner_in));
        let rhs = config_space::apply(&via_mid, &rhs_in);
        for (a, b) in lhs.into_iter().zip(rhs) {
            worst = worst.max((a - b).magnitude());
        }
    }
    Ok(worst)
}

fn unitarity_defect<R: Real>(name: &str, p: &PhiMatrix<R>, probes: &[Vec<R>]) -> MapDefect {
    let dim = p.dim();
    let probe = probes
        .iter()
        .map(|v| {
            let back = p.apply_transpose(&p.apply(v));
            back.iter().zip(v).map(|(a, b)| (*a - *b).powi(2)).fold(R::zero(), |s, x| s + x).sqrt().as_f64()
        })
        .fold(0.0, f64::max);
    let max = match p {
        PhiMatrix::Permutation(_) => Some(0.0),
        PhiMatrix::Dense(m) if dim <= MAX_DENSE_UNITARITY_DIM => {
            let id = RMat::<R>::identity(dim, dim);
            let a = (m.tr_mul(m) - &id).abs().max().as_f64();
            let b = (m * m.transpose() - &id).abs().max().as_f64();
            Some(a.max(b))
        }
        PhiMatrix::Dense(_) => None,
    };
    MapDefect { map: name.to_owned(), dim, max, probe }
}

/// `(T ⊗ 1_b) M` where `M` has rows indexed `t·b + q`.
fn kron_identity_apply<R: Real>(t: &RMat<R>, b: usize, m: &RMat<R>) -> RMat<R> {
    let tn = t.nrows();
    let cols = m.ncols();
    // reorder rows to q·tn + t so each (q, column) slice is a contiguous column
    let mut buf = vec![R::zero(); tn * b * cols];
    for col in 0..cols {
        for ti in 0..tn {
            for q in 0..b {
                buf[col * tn * b + q * tn + ti] = m[(ti * b + q, col)];
            }
        }
    }
    let prod = t * DMatrixView::from_slice(&buf, tn, b * cols);
    RMat::from_fn(tn * b, cols, |i, col| prod[(i / b, (i % b) + b * col)])
}

/// `(1_o ⊗ P) M` where `M` has rows indexed `t·p + j`.
fn identity_kron_apply<R: Real>(o: usize, p: &RMat<R>, m: &RMat<R>) -> RMat<R> {
    let pn = p.nrows();
    let prod = p * DMatrixView::from_slice(m.as_slice(), pn, o * m.ncols());
    DMatrix::from_vec(pn * o, m.ncols(), prod.as_slice().to_vec())
}

/// Max-norm diagram defect over column blocks of the `hi` space.
fn diagram_max<R: Real>(p_hl: &RMat<R>, p_hm: &RMat<R>, p_ml: &RMat<R>, tr: &RMat<R>, base: usize, outer: usize) -> f64 {
    let dim = p_hl.ncols();
    let block = 256.min(dim.max(1));
    let mut worst = 0.0f64;
    let mut start = 0;
    while start < dim {
        let w = block.min(dim - start);
        let a = kron_identity_apply(tr, base, &p_hl.columns(start, w).into_owned());
        let b = identity_kron_apply(outer, p_ml, &p_hm.columns(start, w).into_owned());
        worst = worst.max((a - b).abs().max().as_f64());
        start += w;
    }
    worst
}

fn apply_kron_identity_vec<R: Real>(t: &PhiMatrix<R>, b: usize, v: &[R]) -> Vec<R> {
    let tn = v.len() / b;
    let mut out = vec![R::zero(); v.len()];
    for q in 0..b {
        let slice: Vec<R> = (0..tn).map(|ti| v[ti * b + q]).collect();
        for (ti, x) in t.apply(&slice).into_iter().enumerate() {
            out[ti * b + q] = x;
        }
    }
    out
}

fn apply_identity_kron_vec<R: Real>(p: &PhiMatrix<R>, v: &[R]) -> Vec<R> {
    let pn = p.dim();
    v.chunks(pn).flat_map(|chunk| p.apply(chunk)).collect()
}

/// Point maps (exact and float), structural decompositions, and the
/// truncated Hilbert-space diagram for `lo ⊆ mid ⊆ hi`.
pub fn verify_triple_maps<R: Real>(
    model: &GaussianModel<R>,
    lo: &IndexSet,
    mid: &IndexSet,
    hi: &IndexSet,
    points: usize,
    seed: u64,
) -> Result<TripleMapReport> {
    if !(lo.is_subset(mid) && mid.is_subset(hi)) {
        return Err(Error::InvalidParameter(format!("{lo} ⊆ {mid} ⊆ {hi} is not a chain")));
    }
    let exact: CoordinateModel<BigRational> = model.exact_coordinates()?;
    let structure = check_structure(&exact, lo, mid, hi)?;
    let mut g = rng::stream(seed, "gaussian-points");
    let pts: Vec<Vec<f64>> = (0..points).map(|_| (0..hi.len()).map(|_| g.random_range(-4.0..4.0)).collect()).collect();
    let point_defect_exact = point_defect(&exact, lo, mid, hi, &pts)?;
    let point_defect_float = point_defect(model.coordinates(), lo, mid, hi, &pts)?;

    let n = model.truncation();
    let p_hl = model.pair_matrix(lo, hi)?;
    let p_hm = model.pair_matrix(mid, hi)?;
    let p_ml = model.pair_matrix(lo, mid)?;
    let tr = model.triple_matrix(lo, mid, hi)?;
    let base = model.dim(lo);
    let outer = model.dim(&hi.difference(mid));
    let permutations = [&p_hl, &p_hm, &p_ml, &tr].iter().all(|p| matches!(p, PhiMatrix::Permutation(_)));

    let probes = |d: usize| -> Vec<Vec<R>> { probe_alphas(d).iter().map(|a| coherent_probe(a, n)).collect() };
    let hi_probes = probes(hi.len());
    let diagram_probe = hi_probes
        .iter()
        .map(|v| {
            let a = apply_kron_identity_vec(&tr, base, &p_hl.apply(v));
            let b = apply_identity_kron_vec(&p_ml, &p_hm.apply(v));
            a.iter().zip(&b).map(|(x, y)| (*x - *y).powi(2)).fold(R::zero(), |s, x| s + x).sqrt().as_f64()
        })
        .fold(0.0, f64::max);
    let diagram_max = if permutations {
        let left = apply_perm_diagram(&p_hl, &tr, base);
        let right = apply_perm_right(&p_hm, &p_ml);
        Some(if left == right { 0.0 } else { 1.0 })
    } else {
        Some(diagram_max(&p_hl.to_dense(), &p_hm.to_dense(), &p_ml.to_dense(), &tr.to_dense(), base, outer))
    };
    let unitarity = vec![
        unitarity_defect("pair_hi_lo", &p_hl, &hi_probes),
        unitarity_defect("pair_hi_mid", &p_hm, &hi_probes),
        unitarity_defect("pair_mid_lo", &p_ml, &probes(mid.len())),
        unitarity_defect("triple", &tr, &probes(hi.len() - lo.len())),
    ];
    Ok(TripleMapReport {
        lo: lo.clone(),
        mid: mid.clone(),
        hi: hi.clone(),
        truncation: n,
        quadrature_order: model.spec().quadrature(),
        structure,
        points,
        point_defect_exact,
        point_defect_float,
        diagram_max,
        diagram_probe,
        permutations,
        unitarity,
    })
}

fn perm_image<R: Real>(p: &PhiMatrix<R>) -> Vec<usize> {
    match p {
        PhiMatrix::Permutation(p) => p.image().to_vec(),
        PhiMatrix::Dense(_) => unreachable!("permutation expected"),
    }
}

/// Image of each basis vector under `(T ⊗ 1_b) Φ_{hi,lo}`.
fn apply_perm_diagram<R: Real>(p_hl: &PhiMatrix<R>, tr: &PhiMatrix<R>, b: usize) -> Vec<usize> {
    let t = perm_image(tr);
    perm_image(p_hl).into_iter().map(|i| t[i / b] * b + i % b).collect()
}

/// Image of each basis vector under `(1_o ⊗ Φ_{mid,lo}) Φ_{hi,mid}`.
fn apply_perm_right<R: Real>(p_hm: &PhiMatrix<R>, p_ml: &PhiMatrix<R>) -> Vec<usize> {
    let inner = perm_image(p_ml);
    let m = inner.len();
    perm_image(p_hm).into_iter().map(|i| (i / m) * m + inner[i % m]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub lo: IndexSet,
    pub hi: IndexSet,
    pub samples: usize,
    pub quadrature_order: usize,
    /// `max ‖π_a(ρ) − π_b(ρ)‖₁` over the random densities.
    pub max_trace_norm_difference: f64,
    /// `‖π_b(Φ†(filler ⊗ ρ)Φ) − ρ‖₁`.
    pub product_defect: f64,
}

/// `tr_{H̃}` with respect to `H_hi = H̃ ⊗ H_lo` realised as functions of
/// `(y, pr x)`, then conjugation by `ω*`, all by direct quadrature in the
/// `hi` configuration space.
pub struct AppendixProjector<R: Real> {
    /// `C[(t, b), c] = ∫ ẽ_t(y(x)) g_b(pr x) h_c(x) dμ_hi(x)`.
    change: CMat<R>,
    /// `W[b', b] = ∫ g_{b'}(q) g_b(pr ω q) dμ_lo(q)`.
    omega: CMat<R>,
    complement_dim: usize,
    base_dim: usize,
}

impl<R: Real> AppendixProjector<R> {
    pub fn new(model: &GaussianModel<R>, lo: &IndexSet, hi: &IndexSet, order: usize) -> Result<Self> {
        if !lo.is_subset(hi) {
            return Err(Error::InvalidParameter(format!("{lo} is not a subset of {hi}")));
        }
        let n = model.truncation();
        let m = model.coordinates();
        let r = hi.difference(lo);
        let d = hi.len();
        let (x, w) = gauss_hermite::<f64>(order)?;
        let (s_hi, _) = sqrt_pair::<f64>(&m.block(hi, hi)?)?;
        let (s_lo, s_lo_inv) = sqrt_pair::<f64>(&m.block(lo, lo)?)?;
        let (_, s_r_inv) = sqrt_pair::<f64>(&m.complement_covariance(lo, hi)?)?;
        let om = m.injection(lo, hi)?.matrix;
        let lo_pos: Vec<usize> = lo.iter().map(|k| hi.position(k).unwrap()).collect();
        let r_pos: Vec<usize> = r.iter().map(|k| hi.position(k).unwrap()).collect();
        let (cd, bd) = (model.dim(&r), model.dim(lo));
        let dim = cd * bd;
        let nodes = order.pow(d as u32);
        let mut fin = RMat::<f64>::zeros(dim, nodes);
        let mut fout = RMat::<f64>::zeros(dim, nodes);
        for node in 0..nodes {
            let idx = digits(node, order, d);
            let z: Vec<f64> = idx.iter().map(|&j| x[j]).collect();
            let wt: f64 = idx.iter().map(|&j| w[j]).product();
            let xs = &s_hi * nalgebra::DVector::from_vec(z.clone());
            let q = nalgebra::DVector::from_fn(lo.len(), |i, _| xs[lo_pos[i]]);
            let wq = &om * &q;
            let y = nalgebra::DVector::from_fn(r.len(), |i, _| xs[r_pos[i]] - wq[r_pos[i]]);
            let qw = &s_lo_inv * &q;
            let yw = &s_r_inv * &y;
            let hq: Vec<Vec<f64>> = qw.iter().map(|&v| hermite_values(n, v)).collect();
            let hy: Vec<Vec<f64>> = yw.iter().map(|&v| hermite_values(n, v)).collect();
            let hz: Vec<Vec<f64>> = z.iter().map(|&v| hermite_values(n, v)).collect();
            for t in 0..cd {
                let et: f64 = digits(t, n, r.len()).iter().enumerate().map(|(i, &k)| hy[i][k]).product();
                for b in 0..bd {
                    let gb: f64 = digits(b, n, lo.len()).iter().enumerate().map(|(i, &k)| hq[i][k]).product();
                    fin[(t * bd + b, node)] = wt * et * gb;
                }
            }
            for cidx in 0..dim {
                fout[(cidx, node)] = digits(cidx, n, d).iter().enumerate().map(|(k, &a)| hz[k][a]).product();
            }
        }
        let change = (fin * fout.transpose()).map(|v| c(R::lit(v)));

        // Gram of g_b and g_b ∘ pr ∘ ω over μ_lo
        let dl = lo.len();
        let pr_om = config_space::matmul(&config_space::transpose(&config_space::embedding::<f64>(hi, lo)?), &om);
        let mut omega = RMat::<f64>::zeros(bd, bd);
        for node in 0..order.pow(dl as u32) {
            let idx = digits(node, order, dl);
            let u = nalgebra::DVector::from_fn(dl, |i, _| x[idx[i]]);
            let wt: f64 = idx.iter().map(|&j| w[j]).product();
            let q = &s_lo * &u;
            let moved = &s_lo_inv * (&pr_om * &q);
            let h0: Vec<Vec<f64>> = u.iter().map(|&v| hermite_values(n, v)).collect();
            let h1: Vec<Vec<f64>> = moved.iter().map(|&v| hermite_values(n, v)).collect();
            for b1 in 0..bd {
                let g1: f64 = digits(b1, n, dl).iter().enumerate().map(|(i, &k)| h0[i][k]).product();
                for b0 in 0..bd {
                    let g0: f64 = digits(b0, n, dl).iter().enumerate().map(|(i, &k)| h1[i][k]).product();
                    omega[(b1, b0)] += wt * g1 * g0;
                }
            }
        }
        Ok(Self { change, omega: omega.map(|v| c(R::lit(v))), complement_dim: cd, base_dim: bd })
    }

    /// `ω* ∘ tr_{H̃}(C ρ C†) ∘ ω*†`.
    pub fn project(&self, rho: &CMat<R>) -> Result<CMat<R>> {
        let fact = &self.change * rho * self.change.adjoint();
        let reduced = partial_trace(&fact, self.complement_dim, self.base_dim)?;
        Ok(&self.omega * reduced * self.omega.adjoint())
    }
}

/// `π_{lo,hi}` via `ι*` (the factorized-family pipeline) against the
/// partial-trace prescription of [`AppendixProjector`].
pub fn verify_appendix_projection<R: Real>(
    fam: &FactorizedFamily<R>,
    model: &GaussianModel<R>,
    lo: &IndexSet,
    hi: &IndexSet,
    samples: usize,
    seed: u64,
) -> Result<AppendixReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is required".into()));
    }
    let order = model.spec().quadrature() + 1;
    let proj = AppendixProjector::new(model, lo, hi, order)?;
    let (l_lo, l_hi) = (model.label(lo.clone()), model.label(hi.clone()));
    let (d_lo, d_hi) = (model.dim(lo), model.dim(hi));
    let mut g = rng::stream(seed, "appendix-densities");
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let rho = DensityOperator::<R>::random(l_hi.clone(), d_hi, d_hi, &mut g);
        let a = project_state(fam, &rho, &l_lo)?;
        let b = proj.project(rho.matrix())?;
        worst = worst.max(trace_norm_distance(a.matrix(), &b)?.as_f64());
    }
    let rho = DensityOperator::<R>::random(l_lo.clone(), d_lo, d_lo, &mut g);
    let filler = DensityOperator::<R>::random(l_lo.clone(), d_hi / d_lo, 2.min(d_hi / d_lo), &mut g);
    let big = extend_state(fam, &rho, &l_hi, &filler)?;
    let product_defect = trace_norm_distance(&proj.project(big.matrix())?, rho.matrix())?.as_f64();
    Ok(AppendixReport {
        lo: lo.clone(),
        hi: hi.clone(),
        samples,
        quadrature_order: order,
        max_trace_norm_difference: worst,
        product_defect,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub truncation: usize,
    pub quadrature_order: usize,
    pub unitarity_max: Option<f64>,
    pub unitarity_probe: f64,
    pub diagram_max: Option<f64>,
    pub diagram_probe: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationStudy {
    pub variant: Variant,
    pub pair: (IndexSet, IndexSet),
    pub triple: Option<(IndexSet, IndexSet, IndexSet)>,
    pub rows: Vec<TruncationRow>,
    pub unitarity_decreasing: bool,
    pub diagram_decreasing: bool,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Unitarity defect of `Φ_{{c0,c1},{c0}}` and diagram defect of the triple
/// `{c0} ⊆ {c0,c1} ⊆ {c0,c1,c2}` (first coordinates of `coords`) as the
/// truncation order grows. The default study uses `coords = {1,2,3}`.
pub fn truncation_study<R: Real>(
    coords: &IndexSet,
    variant: Variant,
    ns: &[usize],
    quadrature_order: Option<usize>,
) -> Result<TruncationStudy> {
    let c = coords.as_slice();
    if c.len() < 2 {
        return Err(Error::InvalidParameter("the truncation study needs at least two coordinates".into()));
    }
    let k = IndexSet::new(vec![c[0]]);
    let k1 = IndexSet::new(vec![c[0], c[1]]);
    let triple = (c.len() >= 3).then(|| (k.clone(), k1.clone(), IndexSet::new(c[..3].to_vec())));
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = GaussianSpec { quadrature_order, ..GaussianSpec::new(coords.clone(), variant.clone(), n) };
        let model = GaussianModel::<R>::new(spec)?;
        let pair = model.pair_matrix(&k, &k1)?;
        let probes: Vec<Vec<R>> = probe_alphas(2).iter().map(|a| coherent_probe(a, n)).collect();
        let u = unitarity_defect("pair", &pair, &probes);
        let tri = match &triple {
            Some((a, b, c)) => Some(verify_triple_maps(&model, a, b, c, 0, 0)?),
            None => None,
        };
        rows.push(TruncationRow {
            truncation: n,
            quadrature_order: model.spec().quadrature(),
            unitarity_max: u.max,
            unitarity_probe: u.probe,
            diagram_max: tri.as_ref().and_then(|t| t.diagram_max),
            diagram_probe: tri.as_ref().map(|t| t.diagram_probe),
        });
    }
    let up: Vec<f64> = rows.iter().map(|r| r.unitarity_probe).collect();
    let dp: Vec<f64> = rows.iter().filter_map(|r| r.diagram_probe).collect();
    Ok(TruncationStudy {
        variant,
        pair: (k, k1),
        triple,
        unitarity_decreasing: strictly_decreasing(&up),
        diagram_decreasing: strictly_decreasing(&dp),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::build_gaussian_family;

    fn set(v: &[u32]) -> IndexSet {
        IndexSet::new(v.to_vec())
    }

    fn model(variant: Variant, n: usize) -> GaussianModel<f64> {
        GaussianModel::new(GaussianSpec::new(set(&[1, 2, 3]), variant, n)).unwrap()
    }

    /// Isserlis: `E[Π x_i]` over a multiset of indices as a sum over pairings.
    fn isserlis(cov: &FMat<f64>, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 1.0;
        }
        if idx.len() % 2 == 1 {
            return 0.0;
        }
        let first = idx[0];
        (1..idx.len())
            .map(|j| {
                let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|(k, _)| k + 1 != j).map(|(_, &v)| v).collect();
                cov[(first, idx[j])] * isserlis(cov, &rest)
            })
            .sum()
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(3, 4).len(), 35);
        assert_eq!(monomials(0, 4), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn quadrature_moments_match_isserlis() {
        let m = model(Variant::Sheared { shear: 0.3 }, 4);
        let cov = m.coordinates().covariance().clone();
        let l = sqrt_f64(&cov).unwrap();
        let exps = monomials(3, 4);
        let got = linear_gaussian_moments(&l, &exps, 6).unwrap();
        for (e, g) in exps.iter().zip(got) {
            let idx: Vec<usize> = e.iter().enumerate().flat_map(|(k, &p)| std::iter::repeat_n(k, p as usize)).collect();
            assert!((g - isserlis(&cov, &idx)).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn measure_identities() {
        for (variant, tol) in [(Variant::AxisAligned, 1e-12), (Variant::Sheared { shear: 0.3 }, 1e-8)] {
            let m = model(variant, 4);
            let r = verify_measure_product(&m, &set(&[1]), &set(&[1, 2]), 40, 4).unwrap();
            assert!(r.max_discrepancy <= tol, "{r:?}");
            let r = verify_measure_product(&m, &set(&[2]), &set(&[1, 2, 3]), 10, 4).unwrap();
            assert!(r.max_discrepancy <= tol, "{r:?}");
            let r = verify_measure_triple(&m, &set(&[1]), &set(&[1, 2]), &set(&[1, 2, 3]), 10, 4).unwrap();
            assert!(r.max_discrepancy <= tol, "{r:?}");
            let r = verify_measure_triple(&m, &set(&[]), &set(&[3]), &set(&[1, 2, 3]), 10, 4).unwrap();
            assert!(r.max_discrepancy <= tol, "{r:?}");
        }
        assert!(verify_measure_product(&model(Variant::AxisAligned, 4), &set(&[1]), &set(&[1, 2]), 3, 4).is_err());
    }

    #[test]
    fn a_wrong_complement_measure_is_detected() {
        let m = model(Variant::Sheared { shear: 0.3 }, 4);
        let lhs = sqrt_f64(&m.coordinates().block(&set(&[1, 2]), &set(&[1, 2])).unwrap()).unwrap();
        // forgetting the Schur complement: complement variance 1 + s² instead of 1
        let mut rhs = product_factor(m.coordinates(), &set(&[1]), &set(&[1, 2])).unwrap();
        rhs[(1, 0)] = (1.0f64 + 0.09).sqrt();
        let id = compare_laws("mmm", &lhs, &rhs, 4, 10).unwrap();
        assert!(id.max_discrepancy > 1e-2);
    }

    #[test]
    fn axis_aligned_triple_maps_are_exact() {
        let m = model(Variant::AxisAligned, 3);
        let r = verify_triple_maps(&m, &set(&[1]), &set(&[1, 2]), &set(&[1, 2, 3]), 100, 3).unwrap();
        assert!(r.structure.passed());
        assert_eq!(r.point_defect_exact, 0.0);
        assert_eq!(r.point_defect_float, 0.0);
        assert!(r.permutations);
        assert_eq!(r.diagram_max, Some(0.0));
        assert!(r.diagram_probe <= 1e-15);
    }

    #[test]
    fn sheared_point_maps_are_exact_and_diagram_is_small() {
        let m = model(Variant::Sheared { shear: 0.3 }, 4);
        for (lo, mid, hi) in [(set(&[1]), set(&[1, 2]), set(&[1, 2, 3])), (set(&[2]), set(&[1, 2]), set(&[1, 2, 3]))] {
            let r = verify_triple_maps(&m, &lo, &mid, &hi, 50, 1).unwrap();
            assert!(r.structure.passed());
            assert_eq!(r.point_defect_exact, 0.0);
            assert!(r.point_defect_float < 1e-12);
            assert!(!r.permutations);
            assert!(r.diagram_probe < 0.1, "{r:?}");
        }
    }

    #[test]
    fn dense_diagram_helpers_match_kronecker_products() {
        let m = model(Variant::Sheared { shear: 0.3 }, 2);
        let (lo, mid, hi) = (set(&[1]), set(&[1, 2]), set(&[1, 2, 3]));
        let p_hl = m.pair_matrix(&lo, &hi).unwrap().to_dense();
        let p_hm = m.pair_matrix(&mid, &hi).unwrap().to_dense();
        let p_ml = m.pair_matrix(&lo, &mid).unwrap().to_dense();
        let tr = m.triple_matrix(&lo, &mid, &hi).unwrap().to_dense();
        let a = tr.kronecker(&RMat::identity(2, 2)) * &p_hl;
        let b = RMat::<f64>::identity(2, 2).kronecker(&p_ml) * &p_hm;
        assert!((kron_identity_apply(&tr, 2, &p_hl) - &a).abs().max() < 1e-15);
        assert!((identity_kron_apply(2, &p_ml, &p_hm) - &b).abs().max() < 1e-15);
        let want = (a - b).abs().max();
        assert!((diagram_max(&p_hl, &p_hm, &p_ml, &tr, 2, 2) - want).abs() < 1e-15);
    }

    #[test]
    fn appendix_projection_axis_aligned() {
        let spec = GaussianSpec::new(set(&[1, 2, 3]), Variant::AxisAligned, 3);
        let (fam, m) = build_gaussian_family::<f64>(spec).unwrap();
        let r = verify_appendix_projection(&fam, &m, &set(&[1]), &set(&[1, 2]), 10, 5).unwrap();
        assert!(r.max_trace_norm_difference <= 1e-12, "{r:?}");
        assert!(r.product_defect <= 1e-12, "{r:?}");
        let r = verify_appendix_projection(&fam, &m, &set(&[2]), &set(&[1, 2, 3]), 3, 5).unwrap();
        assert!(r.max_trace_norm_difference <= 1e-12, "{r:?}");
    }

    #[test]
    fn appendix_projection_sheared() {
        let spec = GaussianSpec { unitarity_tol: Some(1.0), ..GaussianSpec::new(set(&[1, 2, 3]), Variant::Sheared { shear: 0.3 }, 4) };
        let (fam, m) = build_gaussian_family::<f64>(spec).unwrap();
        let r = verify_appendix_projection(&fam, &m, &set(&[1]), &set(&[1, 2]), 5, 5).unwrap();
        assert!(r.max_trace_norm_difference <= 1e-6, "{r:?}");
    }

    #[test]
    fn truncation_study_small() {
        let s = truncation_study::<f64>(&set(&[1, 2, 3]), Variant::Sheared { shear: 0.3 }, &[4, 8], None).unwrap();
        assert!(s.unitarity_decreasing, "{s:?}");
        assert!(s.diagram_decreasing, "{s:?}");
        let a = truncation_study::<f64>(&set(&[1, 2, 3]), Variant::AxisAligned, &[2, 3], None).unwrap();
        assert!(a.rows.iter().all(|r| r.unitarity_probe < 1e-15 && r.diagram_max == Some(0.0)));
    }
}
