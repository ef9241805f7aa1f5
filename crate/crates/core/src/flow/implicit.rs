//! Linearized backward Euler for the physical flow.
//!
//! With `A = D²uⁿ` frozen, the increment `δ = uⁿ⁺¹ − uⁿ` solves
//! `δ − Δt Σ aᵢⱼ ∂ᵢⱼδ = Δt G(A)` where `a = (I + A²)⁻¹`. Ghost increments
//! come from the Dirichlet closure at the two clock values.

use super::{advance, FlowState};
use crate::closure::{ClosureKind, Padded};
use crate::operator::{angle_packed, linearization};
use crate::parallel::fill;
use crate::sym::SymMatrix;
use crate::{BoundaryClosure, Error, Grid, Result, ScalarField};

pub const LINEAR_TOL: f64 = 1e-10;
pub const LINEAR_MAX_ITER: usize = 2000;

struct Operator<'a> {
    grid: Grid,
    width: usize,
    /// Packed `(I + A²)⁻¹` per point.
    coef: &'a [f64],
    dt: f64,
}

impl Operator<'_> {
    /// `Σ aᵢⱼ ∂ᵢⱼ` of a padded field at every lattice point.
    fn diffusion(&self, pad: &Padded, out: &mut [f64]) {
        let n = self.grid.dim();
        let w = self.width;
        fill(out, |k| {
            let mut h = [0.0; 6];
            pad.hessian_at(pad.index_of(k), &mut h);
            let a = &self.coef[k * w..(k + 1) * w];
            let mut s = 0.0;
            let mut q = 0;
            for i in 0..n {
                for j in i..n {
                    s += if i == j { a[q] * h[q] } else { 2.0 * a[q] * h[q] };
                    q += 1;
                }
            }
            s
        });
    }

    /// `δ − Δt Σ aᵢⱼ ∂ᵢⱼδ` with zero ghosts.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let pad = zero_ghost_pad(&self.grid, x);
        self.diffusion(&pad, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - self.dt * *o;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let n = self.grid.dim();
        let h2 = self.grid.spacing() * self.grid.spacing();
        (0..self.grid.len())
            .map(|k| {
                let a = &self.coef[k * self.width..(k + 1) * self.width];
                let mut q = 0;
                let mut tr = 0.0;
                for i in 0..n {
                    tr += a[q];
                    q += n - i;
                }
                1.0 + 2.0 * self.dt * tr / h2
            })
            .collect()
    }
}

fn zero_ghost_pad(grid: &Grid, values: &[f64]) -> Padded {
    let field = ScalarField::from_raw(*grid, values.to_vec());
    let mut pad = Padded::build(&field, &BoundaryClosure::none()).expect("no closure");
    for v in pad.data.iter_mut() {
        if v.is_nan() {
            *v = 0.0;
        }
    }
    pad
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB; the frozen-coefficient operator is not
/// symmetric once the coefficients vary in space.
fn bicgstab(op: &Operator, b: &[f64]) -> Result<(Vec<f64>, usize)> {
    let len = b.len();
    let dinv: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = norm(b);
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; len];
    let mut p = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut t = vec![0.0; len];
    let mut s = vec![0.0; len];
    for it in 1..=LINEAR_MAX_ITER {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..len {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = dinv[k] * p[k];
        }
        op.apply(&y, &mut v);
        alpha = rho / dot(&r0, &v);
        for k in 0..len {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) <= LINEAR_TOL * bnorm {
            for k in 0..len {
                x[k] += alpha * y[k];
            }
            return Ok((x, it));
        }
        for k in 0..len {
            z[k] = dinv[k] * s[k];
        }
        op.apply(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for k in 0..len {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        if norm(&r) <= LINEAR_TOL * bnorm {
            return Ok((x, it));
        }
    }
    Err(Error::LinearSolve {
        iterations: LINEAR_MAX_ITER,
        residual: norm(&r) / bnorm,
    })
}

/// One linearized backward Euler step; returns the new state and the
/// number of inner iterations. Needs a Dirichlet closure.
pub fn step_physical_implicit(
    state: &FlowState,
    closure: &BoundaryClosure,
    dt: f64,
) -> Result<(FlowState, usize)> {
    if !matches!(
        closure.kind,
        ClosureKind::FrozenHessianDirichlet | ClosureKind::StationaryConeDirichlet(_)
    ) {
        return Err(Error::InvalidArgument(
            "the implicit step needs a Dirichlet boundary closure".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let grid = *state.field.grid();
    let n = grid.dim();
    let width = n * (n + 1) / 2;
    let now = Padded::build(&state.field, &closure.at_time(state.time))?;
    let later = Padded::build(&state.field, &closure.at_time(state.time + dt))?;

    let mut coef = vec![0.0; grid.len() * width];
    let mut g = vec![0.0; grid.len()];
    crate::parallel::fill_chunks(&mut coef, width, |k, out| {
        let mut h = [0.0; 6];
        now.hessian_at(now.index_of(k), &mut h);
        let a = SymMatrix::from_upper(n, &h[..width]).expect("finite Hessian");
        let inv = linearization(&a);
        out.copy_from_slice(inv.upper());
    });
    fill(&mut g, |k| {
        let mut h = [0.0; 6];
        now.hessian_at(now.index_of(k), &mut h);
        angle_packed(n, &h)
    });

    let op = Operator {
        grid,
        width,
        coef: &coef,
        dt,
    };
    // Ghost increments enter the right-hand side through the stencil.
    let ghost = Padded {
        grid,
        pm: now.pm,
        pstride: now.pstride,
        data: later.data.iter().zip(&now.data).map(|(a, b)| a - b).collect(),
    };
    let mut rhs = vec![0.0; grid.len()];
    op.diffusion(&ghost, &mut rhs);
    for (r, gk) in rhs.iter_mut().zip(&g) {
        *r = dt * (gk + *r);
    }
    let (delta, iterations) = bicgstab(&op, &rhs)?;
    let u = state.field.values();
    let next = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
    Ok((advance(state, next, dt)?, iterations))
}
