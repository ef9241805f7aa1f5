//! Second-order centered finite differences on the lattice and the soliton
//! residual operators built from them.
//!
//! `∂ᵢᵢ` uses `(u₊ − 2u₀ + u₋)/h²` and `∂ᵢⱼ` the four-point cross
//! `/(4h²)`, so every global quadratic is differentiated exactly.

use crate::closure::Padded;
use crate::operator::angle_packed;
use crate::parallel::fill;
use crate::{BoundaryClosure, Error, Grid, Result, ScalarField, SymMatrix};

/// Discrete Hessians in packed upper storage, one block per lattice point.
#[derive(Debug, Clone)]
pub struct HessianField {
    grid: Grid,
    margin: usize,
    width: usize,
    entries: Vec<f64>,
}

impl HessianField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Cells next to the boundary where no Hessian is defined (0 with a ghost closure).
    pub fn undefined_margin(&self) -> usize {
        self.margin
    }

    pub fn packed(&self, flat: usize) -> Option<&[f64]> {
        if !self.grid.is_interior(flat, self.margin) {
            return None;
        }
        Some(&self.entries[flat * self.width..(flat + 1) * self.width])
    }

    pub fn get(&self, flat: usize) -> Option<SymMatrix> {
        self.packed(flat)
            .map(|p| SymMatrix::from_upper(self.grid.dim(), p).expect("finite stencil output"))
    }
}

/// Discrete gradients, `n` components per lattice point.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    margin: usize,
    components: Vec<f64>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn get(&self, flat: usize) -> Option<&[f64]> {
        if !self.grid.is_interior(flat, self.margin) {
            return None;
        }
        let n = self.grid.dim();
        Some(&self.components[flat * n..(flat + 1) * n])
    }
}

fn packed_width(n: usize) -> usize {
    n * (n + 1) / 2
}

pub fn hessian(u: &ScalarField, closure: &BoundaryClosure) -> Result<HessianField> {
    let grid = *u.grid();
    let pad = Padded::build(u, closure)?;
    let margin = closure.undefined_margin();
    let width = packed_width(grid.dim());
    let mut entries = vec![0.0; grid.len() * width];
    crate::parallel::fill_chunks(&mut entries, width, |k, out| {
        if grid.is_interior(k, margin) {
            let mut h = [0.0; 6];
            pad.hessian_at(pad.index_of(k), &mut h);
            out.copy_from_slice(&h[..width]);
        }
    });
    Ok(HessianField {
        grid,
        margin,
        width,
        entries,
    })
}

pub fn gradient(u: &ScalarField, closure: &BoundaryClosure) -> Result<VectorField> {
    let grid = *u.grid();
    let pad = Padded::build(u, closure)?;
    let margin = closure.undefined_margin();
    let n = grid.dim();
    let mut components = vec![0.0; grid.len() * n];
    crate::parallel::fill_chunks(&mut components, n, |k, out| {
        if grid.is_interior(k, margin) {
            let mut g = [0.0; 3];
            pad.gradient_at(pad.index_of(k), &mut g);
            out.copy_from_slice(&g[..n]);
        }
    });
    Ok(VectorField {
        grid,
        margin,
        components,
    })
}

/// Evaluates `f(x, u, G(D²u), ∇u)` on every point the stencils reach;
/// points they cannot reach (only without a ghost closure) are set to 0.
fn pointwise<F>(u: &ScalarField, closure: &BoundaryClosure, f: F) -> Result<ScalarField>
where
    F: Fn(&[f64], f64, f64, &[f64]) -> f64 + Sync + Send,
{
    let grid = *u.grid();
    let n = grid.dim();
    let pad = Padded::build(u, closure)?;
    let margin = closure.undefined_margin();
    let vals = u.values();
    let mut out = vec![0.0; grid.len()];
    fill(&mut out, |k| {
        if !grid.is_interior(k, margin) {
            return 0.0;
        }
        let p = pad.index_of(k);
        let mut h = [0.0; 6];
        let mut g = [0.0; 3];
        pad.hessian_at(p, &mut h);
        pad.gradient_at(p, &mut g);
        let x = grid.point(k);
        f(&x[..n], vals[k], angle_packed(n, &h), &g[..n])
    });
    ScalarField::new(grid, out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `G(D²u)` pointwise.
pub fn angle_field(u: &ScalarField, closure: &BoundaryClosure) -> Result<ScalarField> {
    pointwise(u, closure, |_, _, g, _| g)
}

/// `G(D²v) − v + ½ x·∇v`.
pub fn expander_residual(v: &ScalarField, closure: &BoundaryClosure) -> Result<ScalarField> {
    pointwise(v, closure, |x, v, g, grad| g - v + 0.5 * dot(x, grad))
}

/// `G(D²v) + v − ½ x·∇v`.
pub fn shrinker_residual(v: &ScalarField, closure: &BoundaryClosure) -> Result<ScalarField> {
    pointwise(v, closure, |x, v, g, grad| g + v - 0.5 * dot(x, grad))
}

/// `Σ arctan λᵢ(D²u₀) + a·∇u₀ − b·x − c`.
pub fn translator_residual(
    u0: &ScalarField,
    a: &[f64],
    b: &[f64],
    c: f64,
    closure: &BoundaryClosure,
) -> Result<ScalarField> {
    let n = u0.grid().dim();
    for v in [a, b] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    pointwise(u0, closure, |x, _, g, grad| g + dot(a, grad) - dot(b, x) - c)
}

/// Residual of the self-similar expander profile seen in physical variables:
/// `G(D²u) − (u − ½ x·∇u)/t`, which vanishes iff `u(x,t) = t·v(x/√t)` with
/// `v` an expander.
pub fn physical_similarity_residual(
    u: &ScalarField,
    t: f64,
    closure: &BoundaryClosure,
) -> Result<ScalarField> {
    pointwise(u, closure, |x, u, g, grad| g - (u - 0.5 * dot(x, grad)) / t)
}
