//! Symmetric matrices in packed upper-triangular storage and their spectra.
//!
//! Eigenvalues come from closed forms for `n <= 3` (the sizes every grid
//! produces) and from cyclic Jacobi sweeps otherwise.

use std::f64::consts::PI;
use std::fmt;

use smallvec::{smallvec, SmallVec};

use crate::{Error, Result};

pub type Spectrum = SmallVec<[f64; 4]>;

const JACOBI_MAX_SWEEPS: usize = 30;
const JACOBI_REL_TOL: f64 = 1e-13;

#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    upper: SmallVec<[f64; 6]>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect();
        f.debug_struct("SymMatrix").field("rows", &rows).finish()
    }
}

#[inline]
fn packed(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * i.saturating_sub(1) / 2 + j - i
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            upper: smallvec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from row-major upper-triangular entries `a11, a12, .., a1n, a22, ..`.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        if dim == 0 || upper.len() != dim * (dim + 1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "{} upper-triangular entries do not describe a {dim}x{dim} matrix",
                upper.len()
            )));
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self {
            dim,
            upper: upper.iter().copied().collect(),
        })
    }

    /// Builds from a full row-major matrix, reading the upper triangle only.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument("matrix is not square".into()));
            }
            upper.extend_from_slice(&row[i..]);
        }
        Self::from_upper(n, &upper)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed(self.dim, i, j);
        self.upper[k] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            upper: self.upper.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// `self * self`, symmetric by construction.
    pub fn square(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                out.set(i, j, (0..n).map(|k| self.get(i, k) * self.get(k, j)).sum());
            }
        }
        out
    }

    /// `Q self Qᵀ` for a row-major square `q`.
    pub fn conjugate(&self, q: &[Vec<f64>]) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        s += q[i][k] * self.get(k, l) * q[j][l];
                    }
                }
                out.set(i, j, s);
            }
        }
        out
    }

    /// `trace(self * other)`, the Frobenius inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    /// Cholesky factor `L` (row-major lower triangle) when positive definite.
    pub fn cholesky(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.dim;
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Some(l)
    }

    /// Inverse of a positive definite matrix via its Cholesky factor.
    pub fn inverse_spd(&self) -> Option<Self> {
        let n = self.dim;
        let l = self.cholesky()?;
        let mut out = Self::zeros(n);
        // Solve L Lᵀ x = e_j column by column.
        for j in 0..n {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[i][k] * y[k];
                }
                y[i] = s / l[i][i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[k][i] * x[k];
                }
                x[i] = s / l[i][i];
            }
            for i in 0..=j {
                out.set(i, j, x[i]);
            }
        }
        Some(out)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Spectrum> {
        sym_eigenvalues(self)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    }
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(a: &SymMatrix) -> Result<Spectrum> {
    match a.dim {
        1 => Ok(smallvec![a.upper[0]]),
        2 => Ok(eig2(a.upper[0], a.upper[1], a.upper[2]).into_iter().collect()),
        3 => {
            let u = &a.upper;
            Ok(eig3(u[0], u[1], u[2], u[3], u[4], u[5]).into_iter().collect())
        }
        _ => jacobi_eigenvalues(a),
    }
}

/// Eigenvalues of `[[a, b], [b, d]]`, ascending.
#[inline]
pub fn eig2(a: f64, b: f64, d: f64) -> [f64; 2] {
    if b == 0.0 {
        return if a <= d { [a, d] } else { [d, a] };
    }
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b);
    [mean - r, mean + r]
}

/// Eigenvalues of the symmetric matrix with upper triangle
/// `a11 a12 a13 / a22 a23 / a33`, ascending, by the trigonometric solution
/// of the characteristic cubic.
#[inline]
pub fn eig3(a11: f64, a12: f64, a13: f64, a22: f64, a23: f64, a33: f64) -> [f64; 3] {
    let off = a12 * a12 + a13 * a13 + a23 * a23;
    if off == 0.0 {
        let mut d = [a11, a22, a33];
        d.sort_by(|x, y| x.total_cmp(y));
        return d;
    }
    let q = (a11 + a22 + a33) / 3.0;
    let (b11, b22, b33) = (a11 - q, a22 - q, a33 - q);
    let p = ((b11 * b11 + b22 * b22 + b33 * b33 + 2.0 * off) / 6.0).sqrt();
    // det((A - qI)/p) / 2
    let det = b11 * (b22 * b33 - a23 * a23) - a12 * (a12 * b33 - a23 * a13)
        + a13 * (a12 * a23 - b22 * a13);
    let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let mid = 3.0 * q - hi - lo;
    let mut e = [lo, mid, hi];
    e.sort_by(|x, y| x.total_cmp(y));
    e
}

fn jacobi_eigenvalues(a: &SymMatrix) -> Result<Spectrum> {
    let n = a.dim;
    let mut m = a.to_rows();
    let scale = a.frobenius_norm();
    let off_norm = |m: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * m[i][j] * m[i][j];
            }
        }
        s.sqrt()
    };
    let mut converged = scale == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for row in m.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p][k], m[q][k]);
                    m[p][k] = c * pk - s * qk;
                    m[q][k] = s * pk + c * qk;
                }
                m[p][q] = 0.0;
                m[q][p] = 0.0;
            }
        }
        converged = off_norm(&m) <= JACOBI_REL_TOL * scale;
    }
    if !converged {
        return Err(Error::EigenNonConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    let mut ev: Spectrum = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: bisection on the characteristic polynomial built
    /// from the Laplace expansion of `det(A - x I)`.
    fn det(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(k, _)| k != j)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det(&minor)
            })
            .sum()
    }

    fn char_roots(a: &SymMatrix) -> Vec<f64> {
        let rows = a.to_rows();
        let n = rows.len();
        let p = |x: f64| {
            let mut s = rows.clone();
            for (i, row) in s.iter_mut().enumerate() {
                row[i] -= x;
            }
            det(&s)
        };
        // Fine scan plus bisection; fine enough for well-separated roots.
        let bound = a.frobenius_norm() + 1.0;
        let steps = 200_000;
        let mut roots = Vec::new();
        let mut x0 = -bound;
        let mut p0 = p(x0);
        for k in 1..=steps {
            let x1 = -bound + 2.0 * bound * k as f64 / steps as f64;
            let p1 = p(x1);
            if p0 == 0.0 {
                roots.push(x0);
            } else if p0 * p1 < 0.0 {
                let (mut lo, mut hi) = (x0, x1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if p(lo) * p(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            x0 = x1;
            p0 = p1;
        }
        assert_eq!(roots.len(), n, "oracle lost a root");
        roots
    }

    #[test]
    fn diagonal_two_by_two() {
        let ev = SymMatrix::diag(&[0.1, 0.3]).eigenvalues().unwrap();
        assert_eq!(ev.as_slice(), &[0.1, 0.3]);
    }

    #[test]
    fn off_diagonal_pair() {
        let a = SymMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let ev = a.eigenvalues().unwrap();
        assert_abs_diff_eq!(ev[0], -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[1], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn three_by_three_against_characteristic_polynomial() {
        let a = SymMatrix::from_rows(&[
            vec![0.2, 0.1, 0.0],
            vec![0.1, 0.2, 0.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let oracle = char_roots(&a);
        for (e, o) in a.eigenvalues().unwrap().iter().zip(&oracle) {
            assert_abs_diff_eq!(*e, *o, epsilon = 1e-12);
        }
        let ev = a.eigenvalues().unwrap();
        assert_abs_diff_eq!(ev[0], 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[2], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn random_matrices_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=5 {
            for _ in 0..10 {
                let upper: Vec<f64> = (0..n * (n + 1) / 2)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                let a = SymMatrix::from_upper(n, &upper).unwrap();
                let oracle = char_roots(&a);
                let ev = a.eigenvalues().unwrap();
                for (e, o) in ev.iter().zip(&oracle) {
                    assert_abs_diff_eq!(*e, *o, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn jacobi_handles_zero_and_diagonal() {
        let z = SymMatrix::zeros(5);
        assert!(z.eigenvalues().unwrap().iter().all(|&v| v == 0.0));
        let d = SymMatrix::diag(&[3.0, -1.0, 2.0, 0.5]);
        assert_eq!(d.eigenvalues().unwrap().as_slice(), &[-1.0, 0.5, 2.0, 3.0]);
    }

    #[test]
    fn jacobi_trace_and_frobenius_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let upper: Vec<f64> = (0..n * (n + 1) / 2)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let a = SymMatrix::from_upper(n, &upper).unwrap();
        let ev = a.eigenvalues().unwrap();
        assert_abs_diff_eq!(ev.iter().sum::<f64>(), a.trace(), epsilon = 1e-12);
        let fro: f64 = ev.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(fro, a.frobenius_norm(), epsilon = 1e-12);
    }

    #[test]
    fn packed_layout() {
        let a = SymMatrix::from_upper(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.get(0, 2), 3.0);
        assert_eq!(a.get(2, 0), 3.0);
        assert_eq!(a.get(1, 1), 4.0);
        assert_eq!(a.get(2, 1), 5.0);
        assert_eq!(a.get(2, 2), 6.0);
    }

    #[test]
    fn spd_inverse() {
        let a = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let inv = a.inverse_spd().unwrap();
        let rows = a.to_rows();
        let irows = inv.to_rows();
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..2).map(|k| rows[i][k] * irows[k][j]).sum();
                assert_abs_diff_eq!(s, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        assert!(SymMatrix::diag(&[1.0, -1.0]).inverse_spd().is_none());
    }
}
