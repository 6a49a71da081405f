//! The inductive family of observable algebras `B(H_λ)` and its algebraic
//! inductive limit.
//!
//! An [`AlgebraElement`] is a representative of a class `[a]`; two
//! representatives denote the same class when their embeddings into a common
//! upper level coincide.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorized::FactorizedFamily;
use crate::label::Label;
use crate::linalg::{self, MatrixRecord};
use crate::scalar::{CMat, Real};
use crate::unitary::Unitary;

/// Default tolerance for [`class_equal`].
pub const DEFAULT_CLASS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement<R: Real> {
    pub level: Label,
    pub matrix: CMat<R>,
}

impl<R: Real> AlgebraElement<R> {
    /// Checks the matrix against `dim H_level`.
    pub fn new(fam: &FactorizedFamily<R>, level: Label, matrix: CMat<R>) -> Result<Self> {
        let d = fam.dim(&level)?;
        if matrix.shape() != (d, d) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix at {level}, which has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { level, matrix })
    }

    pub fn identity(fam: &FactorizedFamily<R>, level: Label) -> Result<Self> {
        let d = fam.dim(&level)?;
        Ok(Self { level, matrix: CMat::identity(d, d) })
    }

    /// The unit class, represented at the bottom label.
    pub fn unit(fam: &FactorizedFamily<R>) -> Result<Self> {
        Self::identity(fam, fam.directed().bottom())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_record(&self) -> ElementRecord {
        ElementRecord { label: self.level.clone(), matrix: MatrixRecord::from_matrix(&self.matrix) }
    }

    pub fn from_record(fam: &FactorizedFamily<R>, rec: &ElementRecord) -> Result<Self> {
        Self::new(fam, rec.label.clone(), rec.matrix.to_matrix()?)
    }
}

/// Serialized form: label plus row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub label: Label,
    pub matrix: MatrixRecord,
}

pub fn pauli_x<R: Real>() -> CMat<R> {
    let (o, z) = (Complex::one(), Complex::zero());
    CMat::from_row_slice(2, 2, &[z, o, o, z])
}

pub fn pauli_y<R: Real>() -> CMat<R> {
    let (i, z) = (Complex::i(), Complex::zero());
    CMat::from_row_slice(2, 2, &[z, -i, i, z])
}

pub fn pauli_z<R: Real>() -> CMat<R> {
    let (o, z) = (Complex::one(), Complex::zero());
    CMat::from_row_slice(2, 2, &[o, z, z, -o])
}

/// A single-site operator `op` as an element at level `{site}`.
pub fn site_operator<R: Real>(fam: &FactorizedFamily<R>, site: u32, op: CMat<R>) -> Result<AlgebraElement<R>> {
    let level = fam.directed().label([site].into_iter().collect());
    AlgebraElement::new(fam, level, op)
}

/// `Φ† (I_c ⊗ a) Φ` without materializing `I_c ⊗ a` for permutations.
fn conjugate_block<R: Real>(op: &Unitary<R>, a: &CMat<R>, complement_dim: usize) -> CMat<R> {
    let b = a.nrows();
    match op {
        Unitary::Permutation(p) => {
            let img = p.image();
            let n = img.len();
            CMat::from_fn(n, n, |i, j| {
                let (pi, pj) = (img[i], img[j]);
                if pi / b == pj / b {
                    a[(pi % b, pj % b)]
                } else {
                    Complex::zero()
                }
            })
        }
        Unitary::Dense(_) => op.pull_back(&linalg::kron(&CMat::identity(complement_dim, complement_dim), a)),
    }
}

/// `ι_{target,level}(a) = Φ† (1 ⊗ a) Φ`.
pub fn embed_observable<R: Real>(
    fam: &FactorizedFamily<R>,
    a: &AlgebraElement<R>,
    target: &Label,
) -> Result<AlgebraElement<R>> {
    let iso = fam.factor_iso(&a.level, target)?;
    if a.matrix.shape() != (iso.base_dim, iso.base_dim) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix at {}, which has dimension {}",
            a.matrix.nrows(),
            a.matrix.ncols(),
            a.level,
            iso.base_dim
        )));
    }
    if &a.level == target && iso.op.identity_defect() == R::zero() {
        return Ok(a.clone());
    }
    Ok(AlgebraElement { level: target.clone(), matrix: conjugate_block(&iso.op, &a.matrix, iso.complement_dim) })
}

/// Both elements at the join of their levels.
pub fn promote_pair<R: Real>(
    fam: &FactorizedFamily<R>,
    a: &AlgebraElement<R>,
    b: &AlgebraElement<R>,
) -> Result<(AlgebraElement<R>, AlgebraElement<R>)> {
    let top = a.level.join(&b.level)?;
    Ok((embed_observable(fam, a, &top)?, embed_observable(fam, b, &top)?))
}

pub fn add<R: Real>(fam: &FactorizedFamily<R>, a: &AlgebraElement<R>, b: &AlgebraElement<R>) -> Result<AlgebraElement<R>> {
    let (a, b) = promote_pair(fam, a, b)?;
    Ok(AlgebraElement { level: a.level, matrix: a.matrix + b.matrix })
}

/// `z a + w b`.
pub fn linear_combination<R: Real>(
    fam: &FactorizedFamily<R>,
    z: Complex<R>,
    a: &AlgebraElement<R>,
    w: Complex<R>,
    b: &AlgebraElement<R>,
) -> Result<AlgebraElement<R>> {
    let (a, b) = promote_pair(fam, a, b)?;
    Ok(AlgebraElement { level: a.level, matrix: a.matrix * z + b.matrix * w })
}

pub fn scale<R: Real>(a: &AlgebraElement<R>, z: Complex<R>) -> AlgebraElement<R> {
    AlgebraElement { level: a.level.clone(), matrix: &a.matrix * z }
}

pub fn mul<R: Real>(fam: &FactorizedFamily<R>, a: &AlgebraElement<R>, b: &AlgebraElement<R>) -> Result<AlgebraElement<R>> {
    let (a, b) = promote_pair(fam, a, b)?;
    Ok(AlgebraElement { level: a.level, matrix: a.matrix * b.matrix })
}

pub fn adjoint<R: Real>(a: &AlgebraElement<R>) -> AlgebraElement<R> {
    AlgebraElement { level: a.level.clone(), matrix: a.matrix.adjoint() }
}

/// Operator norm of the class, i.e. the largest singular value of any representative.
pub fn class_norm<R: Real>(a: &AlgebraElement<R>) -> R {
    linalg::spectral_norm(&a.matrix)
}

/// Whether `a` and `b` represent the same class, comparing at the join.
pub fn class_equal<R: Real>(fam: &FactorizedFamily<R>, a: &AlgebraElement<R>, b: &AlgebraElement<R>, tol: R) -> Result<bool> {
    if tol <= R::zero() {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let (a, b) = promote_pair(fam, a, b)?;
    Ok(linalg::max_abs_diff(&a.matrix, &b.matrix) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::IndexSet;
    use crate::rng;
    use crate::scalar::c;

    type Fam = FactorizedFamily<f64>;
    type M = CMat<f64>;

    fn fam(n: u32) -> Fam {
        Fam::lattice(IndexSet::range(0, n), 2).unwrap()
    }

    fn l(v: &[u32]) -> Label {
        Label::lattice(v.iter().copied())
    }

    fn elem(level: Label, m: M) -> AlgebraElement<f64> {
        AlgebraElement { level, matrix: m }
    }

    #[test]
    fn embed_to_same_level_is_unchanged() {
        let f = fam(2);
        let a = site_operator(&f, 0, pauli_z()).unwrap();
        assert_eq!(embed_observable(&f, &a, &l(&[0])).unwrap(), a);
    }

    #[test]
    fn embed_is_unital() {
        let f = fam(3);
        let one = AlgebraElement::identity(&f, l(&[1])).unwrap();
        let e = embed_observable(&f, &one, &l(&[0, 1, 2])).unwrap();
        assert_eq!(e.matrix, M::identity(8, 8));
    }

    #[test]
    fn sigma_z_at_site_zero_is_kron_oracle() {
        let f = fam(2);
        let a = site_operator(&f, 0, pauli_z()).unwrap();
        let e = embed_observable(&f, &a, &l(&[0, 1])).unwrap();
        assert_eq!(e.matrix, linalg::kron(&M::identity(2, 2), &pauli_z()));
    }

    #[test]
    fn promote_pair_of_paulis() {
        let f = fam(2);
        let z0 = site_operator(&f, 0, pauli_z()).unwrap();
        let x1 = site_operator(&f, 1, pauli_x()).unwrap();
        let (a, b) = promote_pair(&f, &z0, &x1).unwrap();
        assert_eq!(a.level, l(&[0, 1]));
        assert_eq!(a.matrix, linalg::kron(&M::identity(2, 2), &pauli_z()));
        assert_eq!(b.matrix, linalg::kron(&pauli_x(), &M::identity(2, 2)));
        // same level: unchanged
        let (c0, d0) = promote_pair(&f, &z0, &z0).unwrap();
        assert_eq!((c0, d0), (z0.clone(), z0.clone()));
        // only the lower one moves
        let (p, q) = promote_pair(&f, &z0, &b).unwrap();
        assert_eq!(q, b);
        assert_eq!(p, a);
    }

    #[test]
    fn pauli_product() {
        let f = fam(1);
        let z = site_operator(&f, 0, pauli_z()).unwrap();
        let x = site_operator(&f, 0, pauli_x()).unwrap();
        let zx = mul(&f, &z, &x).unwrap();
        let iy = pauli_y::<f64>() * Complex::i();
        assert!(linalg::max_abs_diff(&zx.matrix, &iy) < 1e-15);
    }

    #[test]
    fn inverse_gives_identity_class() {
        let f = fam(3);
        let mut r = rng::stream(1, "t");
        let u = linalg::random_unitary::<f64, _>(4, &mut r);
        let a = elem(l(&[0, 2]), u.clone());
        let ainv = elem(l(&[0, 2]), u.adjoint());
        let p = mul(&f, &a, &ainv).unwrap();
        let one = AlgebraElement::unit(&f).unwrap();
        assert!(class_equal(&f, &p, &one, 1e-12).unwrap());
        assert_eq!(adjoint(&adjoint(&a)), a);
    }

    #[test]
    fn norms() {
        let f = fam(2);
        assert!((class_norm(&AlgebraElement::identity(&f, l(&[0, 1])).unwrap()) - 1.0).abs() < 1e-14);
        let z = site_operator(&f, 0, pauli_z()).unwrap();
        let e = embed_observable(&f, &z, &l(&[0, 1])).unwrap();
        assert!((class_norm(&z) - 1.0).abs() < 1e-14);
        assert!((class_norm(&e) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn class_equality() {
        let f = fam(2);
        let z0 = site_operator(&f, 0, pauli_z()).unwrap();
        let z1 = site_operator(&f, 1, pauli_z()).unwrap();
        let e = embed_observable(&f, &z0, &l(&[0, 1])).unwrap();
        assert!(class_equal(&f, &z0, &e, 1e-10).unwrap());
        assert!(!class_equal(&f, &z0, &z1, 1e-10).unwrap());
        let pert = elem(z0.level.clone(), &z0.matrix + M::identity(2, 2).scale(1e-6));
        assert!(!class_equal(&f, &z0, &pert, 1e-10).unwrap());
        assert!(class_equal(&f, &z0, &z0, 0.0).is_err());
    }

    #[test]
    fn errors() {
        let f = fam(2);
        let a = site_operator(&f, 0, pauli_z()).unwrap();
        assert!(matches!(
            embed_observable(&f, &elem(l(&[0, 1]), M::identity(4, 4)), &l(&[0])),
            Err(Error::OrderViolation { .. })
        ));
        assert!(AlgebraElement::new(&f, l(&[0]), M::identity(3, 3)).is_err());
        let g = elem(Label::gaussian("x", [0]), M::identity(2, 2));
        assert!(matches!(promote_pair(&f, &a, &g), Err(Error::IncomparableLabels { .. })));
    }

    #[test]
    fn dense_and_permutation_paths_agree() {
        let f = fam(3);
        let mut r = rng::stream(2, "t");
        let a = elem(l(&[1]), linalg::complex_gaussian(2, 2, &mut r));
        let iso = f.factor_iso(&a.level, &l(&[0, 1, 2])).unwrap();
        let fast = conjugate_block(&iso.op, &a.matrix, iso.complement_dim);
        let dense = conjugate_block(&Unitary::Dense(iso.matrix()), &a.matrix, iso.complement_dim);
        assert!(linalg::max_abs_diff(&fast, &dense) < 1e-15);
        assert_eq!(fast, linalg::kron(&linalg::kron(&M::identity(2, 2), &a.matrix), &M::identity(2, 2)));
    }

    #[test]
    fn record_round_trip() {
        let f = fam(2);
        let a = site_operator(&f, 1, pauli_y()).unwrap();
        let rec = a.to_record();
        let json = serde_json::to_string(&rec).unwrap();
        let back: ElementRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(AlgebraElement::from_record(&f, &back).unwrap(), a);
    }

    #[test]
    fn linear_combination_promotes() {
        let f = fam(2);
        let z0 = site_operator(&f, 0, pauli_z()).unwrap();
        let x1 = site_operator(&f, 1, pauli_x()).unwrap();
        let s = linear_combination(&f, c(2.0), &z0, c(-1.0), &x1).unwrap();
        let t = add(&f, &scale(&z0, c(2.0)), &scale(&x1, c(-1.0))).unwrap();
        assert_eq!(s, t);
    }
}
