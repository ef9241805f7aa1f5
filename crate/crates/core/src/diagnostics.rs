//! Derivative monitors, spectrum tracking, minimality and graph export.

use std::io::Write;
use std::path::Path;

use crate::numfmt::sci17;
use crate::parallel::max_over;
use crate::stencil::{angle_field, gradient, hessian, HessianField};
use crate::sym::{eig2, eig3};
use crate::{BoundaryClosure, Error, FlowReport, Result, ScalarField, SymMatrix};

/// Rows of a physical-flow report inside this many steps are a transient.
pub const DECAY_TRANSIENT_STEPS: usize = 10;

fn spectrum_packed(n: usize, p: &[f64]) -> (f64, f64) {
    match n {
        1 => (p[0], p[0]),
        2 => {
            let [a, b] = eig2(p[0], p[1], p[2]);
            (a, b)
        }
        _ => {
            let e = eig3(p[0], p[1], p[2], p[3], p[4], p[5]);
            (e[0], e[2])
        }
    }
}

/// Smallest and largest Hessian eigenvalue over points `margin` cells inside.
pub fn hessian_range(h: &HessianField, margin: usize) -> (f64, f64) {
    let grid = h.grid();
    let n = grid.dim();
    let idx = grid.interior_indices(margin.max(h.undefined_margin()));
    let lo = -max_over(&idx, f64::NEG_INFINITY, |k| {
        -spectrum_packed(n, h.packed(k).expect("defined")).0
    });
    let hi = max_over(&idx, f64::NEG_INFINITY, |k| {
        spectrum_packed(n, h.packed(k).expect("defined")).1
    });
    (lo, hi)
}

/// Sup over `margin`-interior points of the Euclidean norm of the third
/// differences `∂ᵢ(∂ⱼₖu)`, taken as centered differences of the Hessian stencil.
pub fn d3_sup_from_hessian(h: &HessianField, margin: usize) -> Result<f64> {
    let grid = h.grid();
    if grid.points_per_axis() < 7 {
        return Err(Error::GridTooSmall(
            "third differences need at least 7 points per axis".into(),
        ));
    }
    let n = grid.dim();
    let inv_2h = 0.5 / grid.spacing();
    let idx = grid.interior_indices(margin.max(h.undefined_margin() + 1));
    Ok(max_over(&idx, 0.0, |k| {
        let mut s = 0.0;
        for i in 0..n {
            let st = grid.stride(i);
            let plus = h.packed(k + st).expect("defined");
            let minus = h.packed(k - st).expect("defined");
            let mut q = 0;
            for j in 0..n {
                for l in j..n {
                    let t = (plus[q] - minus[q]) * inv_2h;
                    s += if j == l { t * t } else { 2.0 * t * t };
                    q += 1;
                }
            }
        }
        s.sqrt()
    }))
}

pub fn d3_sup(u: &ScalarField, closure: &BoundaryClosure, margin: usize) -> Result<f64> {
    d3_sup_from_hessian(&hessian(u, closure)?, margin)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayMonitor {
    /// `sup d3_sup·√t` over rows with `t > 0`.
    pub constant: f64,
    /// `d3_sup·√t` is non-increasing over rows past the transient.
    pub non_increasing: bool,
}

/// Tracks `|D³u| ≤ C/√t` on a physical-flow report.
pub fn decay_monitor(report: &FlowReport) -> Result<DecayMonitor> {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.time > 0.0).collect();
    if rows.len() < 2 {
        return Err(Error::EmptyReport);
    }
    let constant = rows.iter().map(|r| r.d3_sqrt_t).fold(0.0, f64::max);
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.step > DECAY_TRANSIENT_STEPS)
        .map(|r| r.d3_sqrt_t)
        .collect();
    let non_increasing = tail
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    Ok(DecayMonitor {
        constant,
        non_increasing,
    })
}

/// `sup |G(D²u) − mean G(D²u)|` over the interior: zero iff the discrete
/// Lagrangian angle is constant.
pub fn minimality_defect(u: &ScalarField, closure: &BoundaryClosure, margin: usize) -> Result<f64> {
    let g = angle_field(u, closure)?;
    let idx = u
        .grid()
        .interior_indices(margin.max(closure.undefined_margin()));
    let vals = g.values();
    let mean = idx.iter().map(|&k| vals[k]).sum::<f64>() / idx.len() as f64;
    Ok(idx.iter().map(|&k| (vals[k] - mean).abs()).fold(0.0, f64::max))
}

/// `sup |∇u − ∇u₀|` over the interior.
pub fn lipschitz_gap(
    u: &ScalarField,
    u0: &ScalarField,
    closure: &BoundaryClosure,
    margin: usize,
) -> Result<f64> {
    let g = gradient(u, closure)?;
    let g0 = gradient(u0, closure)?;
    let idx = u
        .grid()
        .interior_indices(margin.max(closure.undefined_margin()));
    Ok(idx
        .iter()
        .map(|&k| {
            g.get(k)
                .unwrap()
                .iter()
                .zip(g0.get(k).unwrap())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}

/// Least-squares quadratic `½ xᵀA x + b·x + c` over interior points.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    pub hessian: SymMatrix,
    pub linear: Vec<f64>,
    pub constant: f64,
    /// Sup distance of the field from the fit over the same points.
    pub distance: f64,
}

pub fn quadratic_fit(u: &ScalarField, margin: usize) -> Result<QuadraticFit> {
    let grid = u.grid();
    let n = grid.dim();
    let idx = grid.interior_indices(margin);
    let p = 1 + n + n * (n + 1) / 2;
    if idx.len() < p {
        return Err(Error::GridTooSmall("not enough interior points for a quadratic fit".into()));
    }
    // Coordinates scaled to unit size keep the normal equations well conditioned.
    let scale = grid.radius();
    let basis = |x: &[f64], out: &mut [f64; 10]| {
        out[0] = 1.0;
        let mut q = 1;
        for xi in x {
            out[q] = xi / scale;
            q += 1;
        }
        for i in 0..n {
            for j in i..n {
                out[q] = x[i] * x[j] / (scale * scale);
                q += 1;
            }
        }
    };
    let mut normal = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    let mut phi = [0.0; 10];
    for &k in &idx {
        basis(&grid.point(k)[..n], &mut phi);
        let v = u.values()[k];
        for a in 0..p {
            rhs[a] += phi[a] * v;
            for b in a..p {
                normal[a][b] += phi[a] * phi[b];
            }
        }
    }
    let mut upper = Vec::with_capacity(p * (p + 1) / 2);
    for (a, row) in normal.iter().enumerate() {
        upper.extend_from_slice(&row[a..]);
    }
    let inv = SymMatrix::from_upper(p, &upper)?
        .inverse_spd()
        .ok_or_else(|| Error::InvalidArgument("singular quadratic fit".into()))?;
    let coef: Vec<f64> = (0..p)
        .map(|a| (0..p).map(|b| inv.get(a, b) * rhs[b]).sum())
        .collect();
    let mut fit_of = |x: &[f64]| {
        basis(x, &mut phi);
        phi[..p].iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()
    };
    let distance = idx
        .iter()
        .map(|&k| (u.values()[k] - fit_of(&grid.point(k)[..n])).abs())
        .fold(0.0, f64::max);
    let constant = coef[0];
    let linear: Vec<f64> = coef[1..=n].iter().map(|b| b / scale).collect();
    let mut hessian = SymMatrix::zeros(n);
    let mut q = 1 + n;
    for i in 0..n {
        for j in i..n {
            let c = coef[q] / (scale * scale);
            hessian.set(i, j, if i == j { 2.0 * c } else { c });
            q += 1;
        }
    }
    Ok(QuadraticFit {
        hessian,
        linear,
        constant,
        distance,
    })
}

/// Writes the Lagrangian graph point cloud `{(x, Du(x))}` over interior
/// points as CSV with header `x1,..,xn,p1,..,pn`.
pub fn graph_export(
    u: &ScalarField,
    closure: &BoundaryClosure,
    margin: usize,
    path: &Path,
) -> Result<usize> {
    let grid = u.grid();
    let n = grid.dim();
    let g = gradient(u, closure)?;
    let idx = grid.interior_indices(margin.max(closure.undefined_margin()));
    let mut out = String::new();
    let header: Vec<String> = (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=n).map(|i| format!("p{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for &k in &idx {
        let x = grid.point(k);
        let cols: Vec<String> = x[..n]
            .iter()
            .chain(g.get(k).unwrap())
            .map(|v| sci17(*v))
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(idx.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::sample_cone;
    use crate::report::ReportRow;
    use crate::{ConeSpec, Grid};
    use approx::assert_abs_diff_eq;

    fn ext(cone: &ConeSpec) -> BoundaryClosure {
        BoundaryClosure::hessian_extrapolation(cone.clone())
    }

    #[test]
    fn d3_zero_on_quadratics() {
        let a = SymMatrix::from_rows(&[vec![0.4, 0.2], vec![0.2, -0.3]]).unwrap();
        let grid = Grid::new(2, 8.0, 65).unwrap();
        let u = ScalarField::quadratic(grid, &a, &[1.0, -2.0], 5.0).unwrap();
        assert!(d3_sup(&u, &ext(&ConeSpec::quadratic(a)), 2).unwrap() <= 1e-12);
    }

    #[test]
    fn d3_exact_on_cubic() {
        let grid = Grid::new(1, 2.0, 41).unwrap();
        let u = ScalarField::from_fn(grid, |x| x[0].powi(3) / 6.0).unwrap();
        let d3 = d3_sup(&u, &BoundaryClosure::none(), 2).unwrap();
        assert_abs_diff_eq!(d3, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn d3_needs_seven_points() {
        let grid = Grid::new(1, 2.0, 5).unwrap();
        assert!(matches!(
            d3_sup(&ScalarField::zeros(grid), &BoundaryClosure::none(), 2),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn d3_invariant_under_adding_quadratics() {
        let grid = Grid::new(2, 3.0, 25).unwrap();
        let u = ScalarField::from_fn(grid, |x| (x[0] * 0.7).sin() * x[1].cos()).unwrap();
        let q = ScalarField::from_fn(grid, |x| 0.3 * x[0] * x[0] - x[0] * x[1] + 2.0 * x[1] + 1.0).unwrap();
        let sum = u.map(|x, v| v + 0.3 * x[0] * x[0] - x[0] * x[1] + 2.0 * x[1] + 1.0).unwrap();
        let c = BoundaryClosure::none();
        let a = d3_sup(&u, &c, 2).unwrap();
        let b = d3_sup(&sum, &c, 2).unwrap();
        assert!((a - b).abs() <= 1e-12);
        assert!(d3_sup(&q, &c, 2).unwrap() <= 1e-12);
    }

    #[test]
    fn minimality_of_quadratics_and_cone() {
        let a = SymMatrix::diag(&[0.5, 0.3]);
        let cone = ConeSpec::quadratic(a.clone());
        let grid = Grid::new(2, 8.0, 129).unwrap();
        let u = sample_cone(&cone, &grid).unwrap();
        assert!(minimality_defect(&u, &ext(&cone), 4).unwrap() <= 1e-12);

        // Sector angles G± = ±arctan(0.5) + arctan(0.3); the interface column
        // has ∂₁₁ = 0 so G = arctan(0.3), which is also the interior mean.
        let cone = ConeSpec::sign_flip(&[0.5, 0.3]).unwrap();
        let p = sample_cone(&cone, &grid).unwrap();
        let d = minimality_defect(&p, &ext(&cone), 4).unwrap();
        assert_abs_diff_eq!(d, 0.46364760900080615, epsilon = 1e-12);
    }

    #[test]
    fn minimality_invariant_under_affine() {
        let grid = Grid::new(2, 3.0, 25).unwrap();
        let u = ScalarField::from_fn(grid, |x| (x[0] * 0.7).sin() * x[1].cos()).unwrap();
        let v = u.map(|x, v| v + 3.0 * x[0] - x[1] + 2.0).unwrap();
        let c = BoundaryClosure::none();
        assert_abs_diff_eq!(
            minimality_defect(&u, &c, 2).unwrap(),
            minimality_defect(&v, &c, 2).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn quadratic_fit_recovers_coefficients() {
        let a = SymMatrix::from_rows(&[vec![0.4, 0.2], vec![0.2, -0.3]]).unwrap();
        let grid = Grid::new(2, 8.0, 65).unwrap();
        let u = ScalarField::quadratic(grid, &a, &[1.0, -2.0], 5.0).unwrap();
        let fit = quadratic_fit(&u, 4).unwrap();
        assert!(fit.distance <= 1e-10);
        for (x, y) in fit.hessian.upper().iter().zip(a.upper()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(fit.linear[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.constant, 5.0, epsilon = 1e-10);
    }

    #[test]
    fn decay_monitor_rules() {
        let row = |step: usize, time: f64, d3: f64| ReportRow {
            step,
            time,
            residual_sup: 0.0,
            hess_min: 0.0,
            hess_max: 0.0,
            d3_sup: d3,
            d3_sqrt_t: d3 * time.sqrt(),
            defect: 0.0,
            change_rate: 0.0,
        };
        let single = FlowReport { rows: vec![row(1, 0.1, 0.0)], ..Default::default() };
        assert!(decay_monitor(&single).is_err());
        let quad = FlowReport {
            rows: (0..20).map(|s| row(s, s as f64 * 0.1, 0.0)).collect(),
            ..Default::default()
        };
        let m = decay_monitor(&quad).unwrap();
        assert_eq!(m.constant, 0.0);
        assert!(m.non_increasing);
        let rising = FlowReport {
            rows: (0..20).map(|s| row(s, s as f64 * 0.1, 1.0)).collect(),
            ..Default::default()
        };
        assert!(!decay_monitor(&rising).unwrap().non_increasing);
    }

    #[test]
    fn graph_export_rows() {
        let a = SymMatrix::diag(&[0.5, 0.3]);
        let cone = ConeSpec::quadratic(a.clone());
        let grid = Grid::new(2, 2.0, 17).unwrap();
        let u = sample_cone(&cone, &grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.csv");
        let rows = graph_export(&u, &ext(&cone), 3, &path).unwrap();
        assert_eq!(rows, (17 - 6) * (17 - 6));
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,p1,p2"));
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
            assert_abs_diff_eq!(v[2], 0.5 * v[0], epsilon = 1e-12);
            assert_abs_diff_eq!(v[3], 0.3 * v[1], epsilon = 1e-12);
        }

        let z = ScalarField::zeros(grid);
        graph_export(&z, &BoundaryClosure::none(), 2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for line in text.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
            assert_eq!(&v[2..], &[0.0, 0.0]);
        }
    }
}
