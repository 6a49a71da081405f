//! Unitary maps between finite-dimensional Hilbert spaces.
//!
//! Regrouping isomorphisms (lattice families, axis-aligned Gaussian
//! families) are basis permutations and are kept in that form so that
//! compositions, Kronecker products and defects are exact. Everything else
//! is a dense complex matrix.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{CMat, Real};

/// Basis permutation: column `j` of the matrix has its single unit entry in
/// row `image[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { image: (0..n).collect() }
    }

    pub fn from_image(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &i in &image {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!("not a permutation of 0..{n}")));
            }
        }
        Ok(Self { image })
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(j, &i)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (j, &i) in self.image.iter().enumerate() {
            inv[i] = j;
        }
        Self { image: inv }
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &Permutation) -> Self {
        assert_eq!(self.len(), rhs.len());
        Self { image: rhs.image.iter().map(|&k| self.image[k]).collect() }
    }

    /// `self ⊗ rhs`, `self` major.
    pub fn kron(&self, rhs: &Permutation) -> Self {
        let nb = rhs.len();
        let mut image = Vec::with_capacity(self.len() * nb);
        for &a in &self.image {
            for &b in &rhs.image {
                image.push(a * nb + b);
            }
        }
        Self { image }
    }

    pub fn to_dense<R: Real>(&self) -> CMat<R> {
        let n = self.len();
        let mut m = CMat::zeros(n, n);
        for (j, &i) in self.image.iter().enumerate() {
            m[(i, j)] = Complex::one();
        }
        m
    }
}

#[derive(Clone, Debug)]
pub enum Unitary<R: Real> {
    Permutation(Permutation),
    Dense(CMat<R>),
}

impl<R: Real> Unitary<R> {
    pub fn identity(n: usize) -> Self {
        Unitary::Permutation(Permutation::identity(n))
    }

    pub fn dim(&self) -> usize {
        match self {
            Unitary::Permutation(p) => p.len(),
            Unitary::Dense(m) => m.ncols(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Unitary::Permutation(p) => p.len(),
            Unitary::Dense(m) => m.nrows(),
        }
    }

    pub fn is_permutation(&self) -> bool {
        matches!(self, Unitary::Permutation(_))
    }

    pub fn to_dense(&self) -> CMat<R> {
        match self {
            Unitary::Permutation(p) => p.to_dense(),
            Unitary::Dense(m) => m.clone(),
        }
    }

    pub fn adjoint(&self) -> Self {
        match self {
            Unitary::Permutation(p) => Unitary::Permutation(p.inverse()),
            Unitary::Dense(m) => Unitary::Dense(m.adjoint()),
        }
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &Unitary<R>) -> Self {
        match (self, rhs) {
            (Unitary::Permutation(a), Unitary::Permutation(b)) => Unitary::Permutation(a.compose(b)),
            _ => Unitary::Dense(self.to_dense() * rhs.to_dense()),
        }
    }

    /// `self ⊗ rhs`, `self` major.
    pub fn kron(&self, rhs: &Unitary<R>) -> Self {
        match (self, rhs) {
            (Unitary::Permutation(a), Unitary::Permutation(b)) => Unitary::Permutation(a.kron(b)),
            _ => Unitary::Dense(linalg::kron(&self.to_dense(), &rhs.to_dense())),
        }
    }

    /// `U X U†`.
    pub fn conjugate(&self, x: &CMat<R>) -> CMat<R> {
        match self {
            Unitary::Permutation(p) => {
                let n = p.len();
                assert_eq!(x.shape(), (n, n));
                let mut out = CMat::zeros(n, n);
                for j in 0..n {
                    let pj = p.image[j];
                    for i in 0..n {
                        out[(p.image[i], pj)] = x[(i, j)];
                    }
                }
                out
            }
            Unitary::Dense(u) => u * x * u.adjoint(),
        }
    }

    /// `U† X U`.
    pub fn pull_back(&self, x: &CMat<R>) -> CMat<R> {
        match self {
            Unitary::Permutation(p) => {
                let n = p.len();
                assert_eq!(x.shape(), (n, n));
                CMat::from_fn(n, n, |i, j| x[(p.image[i], p.image[j])])
            }
            Unitary::Dense(u) => u.adjoint() * x * u,
        }
    }

    /// `max(‖U†U − I‖_max, ‖UU† − I‖_max)`; zero for a valid permutation.
    pub fn unitarity_defect(&self) -> R {
        match self {
            Unitary::Permutation(_) => R::zero(),
            Unitary::Dense(u) => {
                let id = CMat::<R>::identity(u.ncols(), u.ncols());
                let a = linalg::max_abs_diff(&(u.adjoint() * u), &id);
                if u.nrows() == u.ncols() {
                    a.max(linalg::max_abs_diff(&(u * u.adjoint()), &id))
                } else {
                    a
                }
            }
        }
    }

    /// `‖self − other‖_max`.
    pub fn max_abs_diff(&self, other: &Unitary<R>) -> R {
        match (self, other) {
            (Unitary::Permutation(a), Unitary::Permutation(b)) => {
                assert_eq!(a.len(), b.len());
                if a == b {
                    R::zero()
                } else {
                    R::one()
                }
            }
            _ => linalg::max_abs_diff(&self.to_dense(), &other.to_dense()),
        }
    }

    /// Distance from the identity.
    pub fn identity_defect(&self) -> R {
        match self {
            Unitary::Permutation(p) => {
                if p.is_identity() {
                    R::zero()
                } else {
                    R::one()
                }
            }
            Unitary::Dense(m) => {
                let n = m.ncols();
                if m.nrows() != n {
                    return R::one();
                }
                linalg::max_abs_diff(m, &CMat::identity(n, n))
            }
        }
    }

    /// Matrix entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Complex<R> {
        match self {
            Unitary::Permutation(p) => {
                if p.image[j] == i {
                    Complex::one()
                } else {
                    Complex::zero()
                }
            }
            Unitary::Dense(m) => m[(i, j)],
        }
    }
}
