//! Degree-2 homogeneous piecewise quadratics over coordinate-sign sectors.

use std::fmt::Write as _;
use std::path::Path;

use crate::numfmt::{parse_f64, sci17};
use crate::operator::angle;
use crate::{Error, Grid, Result, ScalarField, SymMatrix};

const CONE_MAGIC: &str = "lagflow-cone v1";

/// One closed sector `{x : sign(x_i) matches pattern_i}` with its quadratic
/// form. A pattern entry of `0` places no constraint on that coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub signs: Vec<i8>,
    pub hessian: SymMatrix,
}

impl Sector {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.signs.iter().zip(x).all(|(&s, &xi)| match s {
            1 => xi >= 0.0,
            -1 => xi <= 0.0,
            _ => true,
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.hessian.dim();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += x[i] * self.hessian.get(i, j) * x[j];
            }
        }
        0.5 * q
    }
}

/// Cone potential `U₀(x) = ½ xᵀ A(x) x`, with `A` constant on each sector.
/// Ties between sectors go to the first sector in list order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    dim: usize,
    sectors: Vec<Sector>,
}

impl ConeSpec {
    pub fn new(dim: usize, sectors: Vec<Sector>) -> Result<Self> {
        if sectors.is_empty() {
            return Err(Error::InvalidArgument("cone needs at least one sector".into()));
        }
        for s in &sectors {
            if s.signs.len() != dim || s.hessian.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.signs.len().max(s.hessian.dim()),
                });
            }
            if s.signs.iter().any(|v| !(-1..=1).contains(v)) {
                return Err(Error::InvalidArgument("sign entries must be -1, 0 or +1".into()));
            }
        }
        Ok(Self { dim, sectors })
    }

    /// Single sector: the smooth cone `½ xᵀ A x`.
    pub fn quadratic(a: SymMatrix) -> Self {
        let dim = a.dim();
        Self {
            dim,
            sectors: vec![Sector {
                signs: vec![0; dim],
                hessian: a,
            }],
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::quadratic(SymMatrix::zeros(dim))
    }

    /// Cone whose `x₁²` coefficient flips sign with `x₁`:
    /// `A = diag(±a₁, a₂, …)` on `±x₁ ≥ 0`.
    pub fn sign_flip(coefficients: &[f64]) -> Result<Self> {
        let dim = coefficients.len();
        let mut pos = SymMatrix::diag(coefficients);
        let mut neg = pos.clone();
        neg.set(0, 0, -coefficients[0]);
        let mut signs_pos = vec![0i8; dim];
        signs_pos[0] = 1;
        let mut signs_neg = vec![0i8; dim];
        signs_neg[0] = -1;
        pos.set(0, 0, coefficients[0]);
        Self::new(
            dim,
            vec![
                Sector {
                    signs: signs_pos,
                    hessian: pos,
                },
                Sector {
                    signs: signs_neg,
                    hessian: neg,
                },
            ],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn sector_at(&self, x: &[f64]) -> Option<&Sector> {
        self.sectors.iter().find(|s| s.contains(x))
    }

    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        self.sector_at(x).map(|s| s.value(x))
    }

    pub fn hessian_at(&self, x: &[f64]) -> Option<&SymMatrix> {
        self.sector_at(x).map(|s| &s.hessian)
    }

    /// `max_s |G(A_s)|` over the sectors.
    pub fn max_abs_angle(&self) -> Result<f64> {
        self.sectors
            .iter()
            .map(|s| angle(&s.hessian).map(f64::abs))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// Largest spectral radius over the sector Hessians.
    pub fn max_spectral_radius(&self) -> Result<f64> {
        self.sectors
            .iter()
            .map(|s| s.hessian.spectral_radius())
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// Largest value mismatch between overlapping sectors at lattice points.
    pub fn continuity_defect(&self, grid: &Grid) -> f64 {
        let n = grid.dim();
        let mut worst: f64 = 0.0;
        for k in 0..grid.len() {
            let x = &grid.point(k)[..n];
            let vals: Vec<f64> = self
                .sectors
                .iter()
                .filter(|s| s.contains(x))
                .map(|s| s.value(x))
                .collect();
            if let (Some(lo), Some(hi)) = (
                vals.iter().copied().reduce(f64::min),
                vals.iter().copied().reduce(f64::max),
            ) {
                worst = worst.max(hi - lo);
            }
        }
        worst
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        s.push_str(CONE_MAGIC);
        s.push('\n');
        for sector in &self.sectors {
            let mut tokens: Vec<String> = sector
                .signs
                .iter()
                .map(|&v| match v {
                    1 => "+1".to_string(),
                    -1 => "-1".to_string(),
                    _ => "0".to_string(),
                })
                .collect();
            tokens.extend(sector.hessian.upper().iter().map(|v| sci17(*v)));
            let _ = writeln!(s, "{}", tokens.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ctx = "cone spec";
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        if lines.next() != Some(CONE_MAGIC) {
            return Err(Error::parse(ctx, format!("first line must be '{CONE_MAGIC}'")));
        }
        let mut dim = None;
        let mut sectors = Vec::new();
        for line in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let n = (1..=3)
                .find(|n| n + n * (n + 1) / 2 == tokens.len())
                .ok_or_else(|| Error::parse(ctx, format!("bad token count in '{line}'")))?;
            if *dim.get_or_insert(n) != n {
                return Err(Error::parse(ctx, "sectors disagree on dimension"));
            }
            let signs = tokens[..n]
                .iter()
                .map(|t| match *t {
                    "+1" | "1" => Ok(1),
                    "-1" => Ok(-1),
                    "0" | "+0" | "-0" => Ok(0),
                    _ => Err(Error::parse(ctx, format!("bad sign token '{t}'"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            let upper = tokens[n..]
                .iter()
                .map(|t| parse_f64(t).ok_or_else(|| Error::parse(ctx, format!("bad number '{t}'"))))
                .collect::<Result<Vec<f64>>>()?;
            sectors.push(Sector {
                signs,
                hessian: SymMatrix::from_upper(n, &upper)?,
            });
        }
        let dim = dim.ok_or_else(|| Error::parse(ctx, "no sectors"))?;
        Self::new(dim, sectors)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }
}

/// Samples the cone on every lattice point.
pub fn sample_cone(spec: &ConeSpec, grid: &Grid) -> Result<ScalarField> {
    if spec.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: spec.dim(),
        });
    }
    let n = grid.dim();
    let values = (0..grid.len())
        .map(|k| {
            let x = &grid.point(k)[..n];
            spec.value_at(x).ok_or_else(|| Error::SectorCoverageGap { point: x.to_vec() })
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(*grid, values)
}
