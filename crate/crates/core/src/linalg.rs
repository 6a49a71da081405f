//! Dense complex matrix helpers shared by every module.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, CMat, Real};

pub fn identity<R: Real>(n: usize) -> CMat<R> {
    CMat::identity(n, n)
}

/// Kronecker product with `a` as the slower-varying (major) factor.
pub fn kron<R: Real>(a: &CMat<R>, b: &CMat<R>) -> CMat<R> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s.is_zero() {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn trace<R: Real>(m: &CMat<R>) -> Complex<R> {
    (0..m.nrows().min(m.ncols())).fold(Complex::zero(), |acc, i| acc + m[(i, i)])
}

/// `tr(a b)` without forming the product.
pub fn trace_product<R: Real>(a: &CMat<R>, b: &CMat<R>) -> Complex<R> {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn max_abs<R: Real>(m: &CMat<R>) -> R {
    m.iter().fold(R::zero(), |acc, z| acc.max(z.modulus()))
}

pub fn max_abs_diff<R: Real>(a: &CMat<R>, b: &CMat<R>) -> R {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    a.iter().zip(b.iter()).fold(R::zero(), |acc, (x, y)| acc.max((x - y).modulus()))
}

/// `max |m - m†|`.
pub fn hermitian_defect<R: Real>(m: &CMat<R>) -> R {
    let n = m.nrows();
    let mut d = R::zero();
    for i in 0..n {
        for j in i..n {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).modulus());
        }
    }
    d
}

fn is_real<R: Real>(m: &CMat<R>) -> bool {
    m.iter().all(|z| z.im.is_zero())
}

/// Eigen-decomposition of the hermitian part of `m`, eigenvalues ascending.
///
/// Real symmetric input is diagonalized in real arithmetic.
pub fn hermitian_eigen<R: Real>(m: &CMat<R>) -> Result<(Vec<R>, CMat<R>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::ShapeMismatch(format!("eigen of {}x{} matrix", n, m.ncols())));
    }
    let eps = R::default_epsilon();
    let (vals, vecs): (Vec<R>, CMat<R>) = if is_real(m) {
        let re = DMatrix::from_fn(n, n, |i, j| (m[(i, j)].re + m[(j, i)].re) * R::lit(0.5));
        let e = re
            .try_symmetric_eigen(eps, 0)
            .ok_or_else(|| Error::Eigensolver(format!("real symmetric {n}x{n} did not converge")))?;
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors.map(c))
    } else {
        let h = (m + m.adjoint()).scale(R::lit(0.5));
        let e = h
            .try_symmetric_eigen(eps, 0)
            .ok_or_else(|| Error::Eigensolver(format!("hermitian {n}x{n} did not converge")))?;
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = CMat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok((sorted_vals, sorted_vecs))
}

/// Eigenvalues of the hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues<R: Real>(m: &CMat<R>) -> Result<Vec<R>> {
    let n = m.nrows();
    let mut vals: Vec<R> = if is_real(m) {
        let re = DMatrix::from_fn(n, n, |i, j| (m[(i, j)].re + m[(j, i)].re) * R::lit(0.5));
        re.symmetric_eigenvalues().iter().copied().collect()
    } else {
        let h = (m + m.adjoint()).scale(R::lit(0.5));
        h.symmetric_eigenvalues().iter().copied().collect()
    };
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Trace norm `Σ|λ|` of a hermitian matrix.
pub fn trace_norm_hermitian<R: Real>(m: &CMat<R>) -> Result<R> {
    Ok(hermitian_eigenvalues(m)?.into_iter().fold(R::zero(), |acc, v| acc + v.abs()))
}

/// Largest singular value.
pub fn spectral_norm<R: Real>(m: &CMat<R>) -> R {
    if m.is_empty() {
        return R::zero();
    }
    m.singular_values().iter().fold(R::zero(), |acc, &s| acc.max(s))
}

pub fn complex_gaussian<R: Real, G: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut G) -> CMat<R> {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(R::lit(re), R::lit(im))
    })
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> CMat<R> {
    let g = complex_gaussian::<R, _>(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.modulus();
        if norm > R::zero() {
            let phase = d / c(norm);
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Normalized Gaussian random vector.
pub fn random_pure<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> Vec<Complex<R>> {
    let v = complex_gaussian::<R, _>(n, 1, rng);
    let norm = v.norm();
    v.iter().map(|z| z / c(norm)).collect()
}

/// Random density matrix of rank at most `rank`: a mixture of Gaussian pure
/// states with uniformly random weights. Positive and of unit trace by
/// construction.
pub fn random_density<R: Real, G: Rng + ?Sized>(n: usize, rank: usize, rng: &mut G) -> CMat<R> {
    let rank = rank.clamp(1, n.max(1));
    let mut w: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let mut rho = CMat::zeros(n, n);
    for wk in w {
        let psi = random_pure::<R, _>(n, rng);
        let wk = R::lit(wk);
        for i in 0..n {
            let a = psi[i] * c(wk);
            for j in 0..n {
                rho[(i, j)] += a * psi[j].conj();
            }
        }
    }
    rho
}

/// `|ψ⟩⟨ψ|`.
pub fn projector<R: Real>(psi: &[Complex<R>]) -> CMat<R> {
    let n = psi.len();
    CMat::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// Random hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Real, G: Rng + ?Sized>(n: usize, rng: &mut G) -> CMat<R> {
    let g = complex_gaussian::<R, _>(n, n, rng);
    (&g + g.adjoint()).scale(R::lit(0.5))
}

pub fn scalar_identity<R: Real>(n: usize, z: Complex<R>) -> CMat<R> {
    CMat::from_diagonal_element(n, n, z)
}

pub fn one<R: Real>() -> Complex<R> {
    Complex::one()
}

/// Row-major `[re, im]` serialization of a complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixRecord {
    pub fn from_matrix<R: Real>(m: &CMat<R>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = m[(i, j)];
                data.push([z.re.as_f64(), z.im.as_f64()]);
            }
        }
        Self { rows, cols, data }
    }

    pub fn to_matrix<R: Real>(&self) -> Result<CMat<R>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            Complex::new(R::lit(re), R::lit(im))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    type M = CMat<f64>;

    #[test]
    fn matrix_record_round_trip() {
        let mut r = rng::stream(5, "t");
        let a: M = complex_gaussian(3, 2, &mut r);
        let rec = MatrixRecord::from_matrix(&a);
        assert_eq!(rec.to_matrix::<f64>().unwrap(), a);
        assert!(MatrixRecord { rows: 2, cols: 2, data: vec![] }.to_matrix::<f64>().is_err());
    }

    #[test]
    fn kron_is_major_minor() {
        let a = M::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let b = M::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 2)], c(2.0));
        assert_eq!(k[(1, 3)], c(2.0));
        assert_eq!(k[(0, 1)], c(0.0));
    }

    #[test]
    fn eigen_real_and_complex_paths_agree() {
        let mut r = rng::stream(1, "t");
        let h: M = random_hermitian(6, &mut r);
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        let recon = &vecs * M::from_diagonal(&nalgebra::DVector::from_iterator(6, vals.iter().map(|&v| c(v)))) * vecs.adjoint();
        assert!(max_abs_diff(&recon, &h) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let re = h.map(|z| c(z.re));
        let (rv, _) = hermitian_eigen(&re).unwrap();
        let only = hermitian_eigenvalues(&re).unwrap();
        for (a, b) in rv.iter().zip(&only) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_density_is_a_state() {
        let mut r = rng::stream(2, "t");
        let rho: M = random_density(8, 3, &mut r);
        assert!((trace(&rho).re - 1.0).abs() < 1e-12);
        assert!(hermitian_defect(&rho) < 1e-14);
        assert!(hermitian_eigenvalues(&rho).unwrap()[0] > -1e-12);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut r = rng::stream(3, "t");
        let u: M = random_unitary(5, &mut r);
        assert!(max_abs_diff(&(u.adjoint() * &u), &M::identity(5, 5)) < 1e-12);
        assert!((spectral_norm(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_product_matches_product_trace() {
        let mut r = rng::stream(4, "t");
        let a: M = complex_gaussian(4, 4, &mut r);
        let b: M = complex_gaussian(4, 4, &mut r);
        assert!((trace_product(&a, &b) - trace(&(&a * &b))).norm() < 1e-12);
    }
}
