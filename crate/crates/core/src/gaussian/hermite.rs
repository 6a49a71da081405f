//! Normalized probabilists' Hermite polynomials and Gauss–Hermite quadrature
//! for the standard normal measure.
//!
//! `h_n = He_n / √n!` is orthonormal in `L²(ℝ, N(0,1))`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `[h_0(x), …, h_{n-1}(x)]`.
pub fn hermite_values<R: Real>(n: usize, x: R) -> Vec<R> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(R::one());
    if n == 1 {
        return out;
    }
    out.push(x);
    for k in 2..n {
        let kf = R::lit(k as f64);
        let v = (x * out[k - 1] - (kf - R::one()).sqrt() * out[k - 2]) / kf.sqrt();
        out.push(v);
    }
    out
}

/// `h_n(x)` and `h_n'(x) = √n · h_{n-1}(x)` in `f64`.
fn hermite_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let v = hermite_values(n + 1, x);
    (v[n], (n as f64).sqrt() * v[n - 1])
}

/// Gauss–Hermite rule with `q` nodes for `E[f(Z)]`, `Z ~ N(0,1)`; weights
/// sum to one. Exact for polynomials of degree `≤ 2q − 1`.
///
/// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton
/// iterations on `h_q`; weights from the Christoffel function
/// `w_i = 1 / Σ_{k<q} h_k(x_i)²`.
pub fn gauss_hermite<R: Real>(q: usize) -> Result<(Vec<R>, Vec<R>)> {
    if q == 0 {
        return Err(Error::InvalidParameter("quadrature order must be positive".into()));
    }
    let jac = DMatrix::<f64>::from_fn(q, q, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::try_new(jac, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolver(format!("Jacobi matrix of order {q}")))?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    for x in &mut nodes {
        for _ in 0..4 {
            let (p, dp) = hermite_with_derivative(q, *x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // symmetrize: the rule is exactly symmetric about 0
    for i in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[q - 1 - i] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes.iter().map(|&x| 1.0 / hermite_values(q, x).iter().map(|h| h * h).sum::<f64>()).collect();
    for i in 0..q / 2 {
        let m = 0.5 * (weights[i] + weights[q - 1 - i]);
        weights[i] = m;
        weights[q - 1 - i] = m;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((nodes.into_iter().map(R::lit).collect(), weights.into_iter().map(R::lit).collect()))
}
