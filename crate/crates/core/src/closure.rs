//! Ghost-layer closures for stencils that leave the truncated domain.

use serde::Serialize;

use crate::operator::angle;
use crate::{ConeSpec, Error, Grid, Result, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonKind {
    Expander,
    Shrinker,
}

impl SolitonKind {
    /// Sign of the additive constant `±G(A)` of the quadratic soliton.
    pub fn sign(self) -> f64 {
        match self {
            SolitonKind::Expander => 1.0,
            SolitonKind::Shrinker => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolitonKind::Expander => "expander",
            SolitonKind::Shrinker => "shrinker",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    /// Ghost value `½ xᵀA(x)x + t·G(A(x))`: the exact physical-flow solution
    /// of a sector that is globally quadratic.
    FrozenHessianDirichlet,
    /// Ghost value `½ xᵀA(x)x ± G(A(x))`: the quadratic soliton of the
    /// boundary sector, stationary under the rescaled flows.
    StationaryConeDirichlet(SolitonKind),
    /// Ghost value `2u_b − u_{b−1} + h² A_nn(x)`, i.e. the normal second
    /// difference across the boundary is pinned to the cone's sector
    /// Hessian. Exact on quadratics and time independent.
    HessianExtrapolation,
    /// Ghost value `3u_b − 3u_{b−1} + u_{b−2}`: the third normal difference
    /// vanishes across the boundary, so every quadratic is continued exactly
    /// whatever its Hessian. Needs no cone.
    QuadraticExtrapolation,
    /// No ghost layer; stencils are only evaluated one cell inside.
    None,
}

/// Boundary closure plus the flow-time clock at which ghosts are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClosure {
    pub kind: ClosureKind,
    pub cone: Option<ConeSpec>,
    pub clock: f64,
    /// Constant added to Dirichlet ghost values.
    pub offset: f64,
    /// The cone is evaluated at `x − translation`.
    pub translation: Vec<f64>,
}

impl BoundaryClosure {
    fn with_cone(kind: ClosureKind, cone: ConeSpec) -> Self {
        let n = cone.dim();
        Self {
            kind,
            cone: Some(cone),
            clock: 0.0,
            offset: 0.0,
            translation: vec![0.0; n],
        }
    }

    pub fn frozen_hessian(cone: ConeSpec) -> Self {
        Self::with_cone(ClosureKind::FrozenHessianDirichlet, cone)
    }

    pub fn stationary_cone(cone: ConeSpec, kind: SolitonKind) -> Self {
        Self::with_cone(ClosureKind::StationaryConeDirichlet(kind), cone)
    }

    pub fn hessian_extrapolation(cone: ConeSpec) -> Self {
        Self::with_cone(ClosureKind::HessianExtrapolation, cone)
    }

    pub fn quadratic_extrapolation() -> Self {
        Self {
            kind: ClosureKind::QuadraticExtrapolation,
            ..Self::none()
        }
    }

    pub fn none() -> Self {
        Self {
            kind: ClosureKind::None,
            cone: None,
            clock: 0.0,
            offset: 0.0,
            translation: Vec::new(),
        }
    }

    pub fn at_time(&self, clock: f64) -> Self {
        Self {
            clock,
            ..self.clone()
        }
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            offset: self.offset + offset,
            ..self.clone()
        }
    }

    pub fn translated(&self, by: &[f64]) -> Self {
        Self {
            translation: self.translation.iter().zip(by).map(|(a, b)| a + b).collect(),
            ..self.clone()
        }
    }

    pub fn has_ghosts(&self) -> bool {
        self.kind != ClosureKind::None
    }

    /// Cells next to the boundary where stencils are undefined.
    pub fn undefined_margin(&self) -> usize {
        if self.has_ghosts() {
            0
        } else {
            1
        }
    }

    fn cone(&self) -> Result<&ConeSpec> {
        self.cone.as_ref().ok_or(Error::MissingGhostClosure)
    }

    fn cone_point(&self, x: &[f64]) -> [f64; 3] {
        let mut y = [0.0; 3];
        for (i, xi) in x.iter().enumerate() {
            y[i] = xi - self.translation.get(i).copied().unwrap_or(0.0);
        }
        y
    }

    /// Dirichlet ghost value at an exterior point.
    pub fn ghost_value(&self, x: &[f64]) -> Result<f64> {
        let cone = self.cone()?;
        let y = self.cone_point(x);
        let y = &y[..x.len()];
        let sector = cone
            .sector_at(y)
            .ok_or_else(|| Error::SectorCoverageGap { point: y.to_vec() })?;
        let base = sector.value(y) + self.offset;
        Ok(match self.kind {
            ClosureKind::FrozenHessianDirichlet => base + self.clock * angle(&sector.hessian)?,
            ClosureKind::StationaryConeDirichlet(kind) => {
                base + kind.sign() * angle(&sector.hessian)?
            }
            ClosureKind::HessianExtrapolation
            | ClosureKind::QuadraticExtrapolation
            | ClosureKind::None => {
                return Err(Error::InvalidArgument(
                    "closure has no Dirichlet ghost values".into(),
                ))
            }
        })
    }
}

/// A field with one ghost layer on every side.
pub(crate) struct Padded {
    pub grid: Grid,
    pub pm: usize,
    pub pstride: [usize; 3],
    pub data: Vec<f64>,
}

impl Padded {
    /// Padded layout of `grid` filled with NaN ghosts (no closure).
    fn empty(grid: &Grid) -> Self {
        let n = grid.dim();
        let pm = grid.points_per_axis() + 2;
        let mut pstride = [0usize; 3];
        for axis in 0..n {
            pstride[axis] = pm.pow((n - 1 - axis) as u32);
        }
        Self {
            grid: *grid,
            pm,
            pstride,
            data: vec![f64::NAN; pm.pow(n as u32)],
        }
    }

    #[inline]
    pub fn index_of(&self, flat: usize) -> usize {
        let idx = self.grid.multi_index(flat);
        (0..self.grid.dim())
            .map(|a| (idx[a] + 1) * self.pstride[a])
            .sum()
    }

    fn padded_multi(&self, p: usize) -> [usize; 3] {
        let n = self.grid.dim();
        let mut idx = [0usize; 3];
        let mut rest = p;
        for axis in (0..n).rev() {
            idx[axis] = rest % self.pm;
            rest /= self.pm;
        }
        idx
    }

    fn padded_coords(&self, idx: &[usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        let h = self.grid.spacing();
        for axis in 0..self.grid.dim() {
            x[axis] = -self.grid.radius() + (idx[axis] as f64 - 1.0) * h;
        }
        x
    }

    pub fn build(field: &ScalarField, closure: &BoundaryClosure) -> Result<Self> {
        let grid = field.grid();
        if let Some(cone) = &closure.cone {
            if cone.dim() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: cone.dim(),
                });
            }
        }
        let mut pad = Self::empty(grid);
        for (k, v) in field.values().iter().enumerate() {
            let p = pad.index_of(k);
            pad.data[p] = *v;
        }
        let n = grid.dim();
        let last = pad.pm - 1;
        match closure.kind {
            ClosureKind::None => {}
            ClosureKind::FrozenHessianDirichlet | ClosureKind::StationaryConeDirichlet(_) => {
                for p in 0..pad.data.len() {
                    let idx = pad.padded_multi(p);
                    if idx[..n].iter().any(|&i| i == 0 || i == last) {
                        let x = pad.padded_coords(&idx);
                        pad.data[p] = closure.ghost_value(&x[..n])?;
                    }
                }
            }
            ClosureKind::HessianExtrapolation | ClosureKind::QuadraticExtrapolation => {
                let pinned = closure.kind == ClosureKind::HessianExtrapolation;
                let cone = if pinned { Some(closure.cone()?) } else { None };
                let h2 = grid.spacing() * grid.spacing();
                for axis in 0..n {
                    let s = pad.pstride[axis];
                    for p in 0..pad.data.len() {
                        let idx = pad.padded_multi(p);
                        let on_face = idx[axis] == 0 || idx[axis] == last;
                        let others_ok = (0..n).filter(|&e| e != axis).all(|e| {
                            e < axis || (idx[e] != 0 && idx[e] != last)
                        });
                        if !on_face || !others_ok {
                            continue;
                        }
                        let (b, bb, bbb) = if idx[axis] == 0 {
                            (p + s, p + 2 * s, p + 3 * s)
                        } else {
                            (p - s, p - 2 * s, p - 3 * s)
                        };
                        pad.data[p] = match cone {
                            Some(cone) => {
                                let x = pad.padded_coords(&idx);
                                let y = closure.cone_point(&x[..n]);
                                let a = cone
                                    .hessian_at(&y[..n])
                                    .ok_or_else(|| Error::SectorCoverageGap {
                                        point: y[..n].to_vec(),
                                    })?
                                    .get(axis, axis);
                                2.0 * pad.data[b] - pad.data[bb] + h2 * a
                            }
                            None => 3.0 * pad.data[b] - 3.0 * pad.data[bb] + pad.data[bbb],
                        };
                    }
                }
            }
        }
        Ok(pad)
    }

    /// Packed upper-triangular Hessian at padded index `p`.
    #[inline]
    pub fn hessian_at(&self, p: usize, out: &mut [f64; 6]) {
        let n = self.grid.dim();
        let h = self.grid.spacing();
        let inv_h2 = 1.0 / (h * h);
        let inv_4h2 = 0.25 * inv_h2;
        let d = &self.data;
        let mut k = 0;
        for i in 0..n {
            let si = self.pstride[i];
            out[k] = (d[p + si] - 2.0 * d[p] + d[p - si]) * inv_h2;
            k += 1;
            for j in i + 1..n {
                let sj = self.pstride[j];
                out[k] = (d[p + si + sj] - d[p + si - sj] - d[p - si + sj] + d[p - si - sj])
                    * inv_4h2;
                k += 1;
            }
        }
    }

    /// Centered gradient at padded index `p`.
    #[inline]
    pub fn gradient_at(&self, p: usize, out: &mut [f64; 3]) {
        let inv_2h = 0.5 / self.grid.spacing();
        for i in 0..self.grid.dim() {
            let s = self.pstride[i];
            out[i] = (self.data[p + s] - self.data[p - s]) * inv_2h;
        }
    }

    /// One-sided first difference along `axis`: forward when `forward`.
    #[inline]
    pub fn one_sided(&self, p: usize, axis: usize, forward: bool) -> f64 {
        let s = self.pstride[axis];
        let h = self.grid.spacing();
        if forward {
            (self.data[p + s] - self.data[p]) / h
        } else {
            (self.data[p] - self.data[p - s]) / h
        }
    }
}
