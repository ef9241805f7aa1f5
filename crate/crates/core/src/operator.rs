//! The Lagrangian angle `G(A) = Σ arctan λᵢ(A)` and its linearization.

use num_complex::Complex64;

use crate::sym::{eig2, eig3};
use crate::{Error, Result, SymMatrix};

/// `Σ arctan λᵢ(A)`.
pub fn angle(a: &SymMatrix) -> Result<f64> {
    Ok(a.eigenvalues()?.iter().map(|l| l.atan()).sum())
}

/// Hot-path angle for packed upper storage of size `n <= 3`.
#[inline]
pub(crate) fn angle_packed(n: usize, u: &[f64]) -> f64 {
    match n {
        1 => u[0].atan(),
        2 => {
            let [a, b] = eig2(u[0], u[1], u[2]);
            a.atan() + b.atan()
        }
        _ => {
            let [a, b, c] = eig3(u[0], u[1], u[2], u[3], u[4], u[5]);
            a.atan() + b.atan() + c.atan()
        }
    }
}

/// `arg det(I + iA)`, valid when the total argument stays inside `(-π, π)`.
///
/// Requires `n <= 4` and `|λᵢ| < 1`; the latter is checked as positive
/// definiteness of `I - A²` so the eigenvalue kernel is not involved.
pub fn angle_via_complex_det(a: &SymMatrix) -> Result<f64> {
    let n = a.dim();
    if n > 4 {
        return Err(Error::BranchAmbiguity);
    }
    let gap = SymMatrix::identity(n).sub(&a.square());
    if gap.cholesky().is_none() {
        return Err(Error::BranchAmbiguity);
    }
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let re = if i == j { 1.0 } else { 0.0 };
                    Complex64::new(re, a.get(i, j))
                })
                .collect()
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].norm().total_cmp(&m[q][col].norm()))
            .expect("non-empty pivot range");
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for row in col + 1..n {
            let f = m[row][col] / p;
            for k in col..n {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
        }
    }
    // The normalization by sqrt(det(I + A²)) is a positive real factor and
    // does not change the argument.
    Ok(det.arg())
}

/// `(I + A²)⁻¹`: the directional derivative of [`angle`] at `A` in
/// direction `B` is `trace((I + A²)⁻¹ B)`.
pub fn linearization(a: &SymMatrix) -> SymMatrix {
    SymMatrix::identity(a.dim())
        .add(&a.square())
        .inverse_spd()
        .expect("I + A² is positive definite")
}
