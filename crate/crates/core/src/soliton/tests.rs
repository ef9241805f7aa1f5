use super::*;
use crate::field::add_compact_bump;

const ANGLE_05_03: f64 = 0.7551044034786732;

fn a() -> SymMatrix {
    SymMatrix::diag(&[0.5, 0.3])
}

fn grid(radius: f64, m: usize) -> Grid {
    Grid::new(2, radius, m).unwrap()
}

fn sign_flip_cone() -> ConeSpec {
    ConeSpec::sign_flip(&[0.5, 0.3]).unwrap()
}

#[test]
fn quadratic_soliton_constants() {
    for kind in [SolitonKind::Expander, SolitonKind::Shrinker] {
        let s = quadratic_soliton(SymMatrix::zeros(2), kind).unwrap();
        assert_eq!(s.constant, 0.0);
        assert!(s.sample(&grid(1.0, 9)).unwrap().values().iter().all(|v| *v == 0.0));
    }
    let e = quadratic_soliton(a(), SolitonKind::Expander).unwrap();
    let s = quadratic_soliton(a(), SolitonKind::Shrinker).unwrap();
    assert!((e.constant - ANGLE_05_03).abs() < 1e-15);
    assert!((s.constant + ANGLE_05_03).abs() < 1e-15);
    assert!(matches!(
        quadratic_soliton(SymMatrix::diag(&[1.0, 0.3]), SolitonKind::Expander),
        Err(Error::SpectralRadius(_))
    ));
}

#[test]
fn quadratic_solitons_zero_their_residual() {
    let matrices = [
        a(),
        SymMatrix::from_rows(&[vec![0.2, -0.4], vec![-0.4, -0.3]]).unwrap(),
        SymMatrix::from_rows(&[vec![-0.9, 0.0, 0.05], vec![0.0, 0.1, 0.2], vec![0.05, 0.2, 0.6]]).unwrap(),
    ];
    for m in matrices {
        let n = m.dim();
        for (radius, points) in [(1.0, 9), (3.0, 13)] {
            let g = Grid::new(n, radius, points).unwrap();
            for kind in [SolitonKind::Expander, SolitonKind::Shrinker] {
                let s = quadratic_soliton(m.clone(), kind).unwrap();
                let field = s.sample(&g).unwrap();
                let r = match kind {
                    SolitonKind::Expander => expander_residual(&field, &s.closure()),
                    SolitonKind::Shrinker => shrinker_residual(&field, &s.closure()),
                }
                .unwrap();
                assert!(r.sup_abs(0) <= 1e-12, "{kind:?} n={n} R={radius}");
            }
        }
    }
}

#[test]
fn make_expander_of_a_quadratic_cone() {
    let g = grid(4.0, 33);
    // The additive constant relaxes like e^{-s}.
    let config = RunConfig {
        end_time: 40.0,
        stationarity_tol: 1e-13,
        residual_tol: 1e-10,
        ..RunConfig::default()
    };
    let (v, cert) = make_expander(&ConeSpec::quadratic(a()), &g, &config).unwrap();
    let exact = quadratic_soliton(a(), SolitonKind::Expander).unwrap().sample(&g).unwrap();
    assert!(v.sup_distance(&exact, 0).unwrap() <= 1e-10);
    assert!(cert.residual_sup_interior <= 1e-10);
    assert!(cert.d3_sup <= 1e-10);
    assert_eq!(cert.flags["stationary"], true);
    assert_eq!(cert.kind, CertificateKind::Expander);
}

#[test]
fn make_expander_of_the_zero_cone() {
    let g = grid(2.0, 17);
    let config = RunConfig {
        interior_margin: 2,
        ..RunConfig::default()
    };
    let (v, cert) = make_expander(&ConeSpec::zero(2), &g, &config).unwrap();
    assert!(v.values().iter().all(|x| *x == 0.0));
    assert_eq!(cert.residual_sup_interior, 0.0);
}

#[test]
fn make_expander_checks_condition_a() {
    let cone = ConeSpec::quadratic(SymMatrix::diag(&[0.9, 0.3]));
    let err = make_expander(&cone, &grid(2.0, 17), &RunConfig::default());
    assert!(matches!(err, Err(Error::ConditionA { .. })));
}

#[test]
fn make_expander_reports_non_convergence() {
    let config = RunConfig {
        end_time: 0.05,
        ..RunConfig::default()
    };
    let err = make_expander(&sign_flip_cone(), &grid(4.0, 33), &config);
    assert!(matches!(err, Err(Error::NonConvergence { .. })));
}

#[test]
fn cone_of_a_quadratic_expander() {
    let g = grid(4.0, 33);
    let s = quadratic_soliton(a(), SolitonKind::Expander).unwrap();
    let v = s.sample(&g).unwrap();
    let est = cone_of_expander(&v, &s.closure(), 4).unwrap();
    assert_eq!(est.radius, 3.0);
    let cone = ScalarField::quadratic(*est.field.grid(), &a(), &[0.0, 0.0], 0.0).unwrap();
    // The additive constant survives as angle(A)/r².
    let gap = est.field.sup_distance(&cone, 0).unwrap();
    assert!(gap <= ANGLE_05_03 / 9.0 + 1e-12);
    assert!((est.defect_bound - ANGLE_05_03 / 9.0).abs() < 1e-12);
    assert_eq!(est.field.grid().radius(), 1.0);
}

#[test]
fn cone_of_zero_is_zero() {
    let g = grid(4.0, 33);
    let est = cone_of_expander(&ScalarField::zeros(g), &BoundaryClosure::quadratic_extrapolation(), 4).unwrap();
    assert!(est.field.values().iter().all(|v| *v == 0.0));
    assert_eq!(est.defect_bound, 0.0);
}

#[test]
fn cone_of_expander_needs_room() {
    let g = grid(1.0, 9);
    assert!(matches!(
        cone_of_expander(&ScalarField::zeros(g), &BoundaryClosure::quadratic_extrapolation(), 4),
        Err(Error::GridTooSmall(_))
    ));
}

#[test]
fn probe_of_a_quadratic_shrinker() {
    let g = grid(4.5, 37);
    let reference = quadratic_soliton(a(), SolitonKind::Shrinker).unwrap();
    let config = RunConfig {
        end_time: 0.5,
        ..RunConfig::default()
    };
    let (cert, report) = probe_shrinker(&reference.sample(&g).unwrap(), &reference, &config).unwrap();
    assert!(report.rows.iter().all(|r| r.d3_sup <= 1e-10 && r.defect <= 1e-10));
    assert!(cert.details["d3_final"] <= 1e-10);
    assert!(cert.details["fit_distance_final"] <= 1e-10);
    assert!(cert.residual_sup_interior <= 1e-12);
}

#[test]
fn probe_shrinker_checks_condition_a() {
    let g = grid(4.5, 37);
    let reference = quadratic_soliton(a(), SolitonKind::Shrinker).unwrap();
    let steep = ScalarField::quadratic(g, &SymMatrix::diag(&[1.2, 0.3]), &[0.0, 0.0], 0.0).unwrap();
    let err = probe_shrinker(&steep, &reference, &RunConfig::default());
    assert!(matches!(err, Err(Error::ConditionA { .. })));
    let expander = quadratic_soliton(a(), SolitonKind::Expander).unwrap();
    assert!(probe_shrinker(&reference.sample(&g).unwrap(), &expander, &RunConfig::default()).is_err());
}

#[test]
fn probe_shrinker_sees_a_bump_decay() {
    let g = grid(4.5, 37);
    let reference = quadratic_soliton(a(), SolitonKind::Shrinker).unwrap();
    let w0 = add_compact_bump(&reference.sample(&g).unwrap(), &[0.0, 0.0], 0.01, 1.0).unwrap();
    let config = RunConfig {
        delta: 0.45,
        end_time: 2.0,
        snapshot_times: vec![1.0, 2.0],
        ..RunConfig::default()
    };
    let (cert, _) = probe_shrinker(&w0, &reference, &config).unwrap();
    assert!(cert.details["d3_ratio"] < 0.1);
    assert!(cert.flags["d3_decreasing"]);
    assert!(cert.flags["fit_distance_decreasing"]);
}

#[test]
fn condition_a_examples() {
    let g = Grid::new(1, 2.0, 17).unwrap();
    let closure = BoundaryClosure::quadratic_extrapolation();
    let half = ScalarField::from_fn(g, |x| 0.25 * x[0] * x[0]).unwrap();
    let ca = check_condition_a(&half, 0.5, &closure).unwrap();
    assert!(ca.pass);
    assert!(ca.margin.abs() < 1e-12);
    let steep = ScalarField::from_fn(g, |x| 0.495 * x[0] * x[0]).unwrap();
    let ca = check_condition_a(&steep, 0.5, &closure).unwrap();
    assert!(!ca.pass);
    assert!((ca.margin + 0.49).abs() < 1e-12);

    let cone = sign_flip_cone();
    let u = sample_cone(&cone, &grid(4.0, 33)).unwrap();
    let ca = check_condition_a(&u, 0.5, &BoundaryClosure::hessian_extrapolation(cone)).unwrap();
    assert!(ca.pass);
    assert!(ca.margin.abs() < 1e-12);
}

#[test]
fn condition_b_examples() {
    let g = grid(4.0, 33);
    let u = sample_cone(&sign_flip_cone(), &g).unwrap();
    assert!(check_condition_b(&u).unwrap() <= 1e-13);
    let bumped = add_compact_bump(&u, &[0.0, 0.0], 1.0, 0.5).unwrap();
    assert!(check_condition_b(&bumped).unwrap() >= 0.5);
    let lifted = ScalarField::quadratic(g, &a(), &[0.0, 0.0], 1.0).unwrap();
    assert!((check_condition_b(&lifted).unwrap() - 0.9375).abs() < 1e-14);
    assert!(matches!(
        check_condition_b(&ScalarField::zeros(grid(1.0, 7))),
        Err(Error::GridTooSmall(_))
    ));
}

#[test]
fn blowdown_of_a_cone_is_constant() {
    let g = grid(4.0, 33);
    let u = sample_cone(&sign_flip_cone(), &g).unwrap();
    let b = blowdown(&u, &[1.0, 2.0, 4.0], false).unwrap();
    assert!(!b.interpolated);
    assert_eq!(b.window.radius(), 1.0);
    for f in &b.fields[1..] {
        assert!(f.sup_distance(&b.fields[0], 0).unwrap() <= 1e-14);
    }
}

#[test]
fn blowdown_of_a_bumped_cone() {
    let g = grid(8.0, 65);
    let base = sample_cone(&sign_flip_cone(), &g).unwrap();
    let u = add_compact_bump(&base, &[0.0, 0.0], 0.05, 1.0).unwrap();
    let b = blowdown(&u, &[2.0, 4.0, 8.0], false).unwrap();
    let cone = base.restrict(&b.window);
    for (l, f) in b.lambdas.iter().zip(&b.fields) {
        assert!(f.sup_distance(&cone, 0).unwrap() <= 0.05 / (l * l) + 1e-15);
    }
}

#[test]
fn blowdown_of_an_affine_perturbation() {
    let g = grid(4.0, 33);
    let bvec = [0.3, -0.4];
    let u = ScalarField::quadratic(g, &a(), &bvec, 0.0).unwrap();
    let b = blowdown(&u, &[2.0, 4.0], false).unwrap();
    let cone = ScalarField::quadratic(b.window, &a(), &[0.0, 0.0], 0.0).unwrap();
    for (l, f) in b.lambdas.iter().zip(&b.fields) {
        // |b·x| on the unit window peaks at |b|₁.
        let gap = f.sup_distance(&cone, 0).unwrap();
        assert!((gap - 0.7 / l).abs() < 1e-12, "lambda {l}: {gap}");
    }
}

#[test]
fn blowdown_needs_a_compatible_lambda() {
    let u = ScalarField::zeros(grid(4.0, 33));
    assert!(blowdown(&u, &[1.5, 2.5], false).is_err());
    let b = blowdown(&u, &[1.5, 2.0], true).unwrap();
    assert!(b.interpolated);
}

#[test]
fn quadratic_translator() {
    let g = grid(4.0, 33);
    let u0 = ScalarField::quadratic(g, &a(), &[0.0, 0.0], 0.0).unwrap();
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let config = RunConfig::default();
    let (cert, _) = check_translator(&u0, &[1.0, 0.0], &[0.5, 0.0], ANGLE_05_03, &closure, &config).unwrap();
    assert!(cert.details["static_residual"] <= 1e-12);
    assert!(cert.details["dynamic_defect"] <= 1e-8);
    assert_eq!(cert.kind, CertificateKind::Translator);
}

#[test]
fn trivial_translator() {
    let g = grid(2.0, 17);
    let config = RunConfig {
        interior_margin: 2,
        ..RunConfig::default()
    };
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::zero(2));
    let (cert, _) =
        check_translator(&ScalarField::zeros(g), &[0.0, 0.0], &[0.0, 0.0], 0.0, &closure, &config).unwrap();
    assert_eq!(cert.details["static_residual"], 0.0);
    assert_eq!(cert.details["dynamic_defect"], 0.0);
}

#[test]
fn translator_residual_is_affine_when_b_is_off() {
    let g = grid(4.0, 33);
    let u0 = ScalarField::quadratic(g, &a(), &[0.0, 0.0], 0.0).unwrap();
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let (av, bv, c) = ([1.0, 0.0], [0.2, 0.1], 0.5);
    let (cert, _) = check_translator(&u0, &av, &bv, c, &closure, &RunConfig::default()).unwrap();
    // (Aa − b)·x + angle(A) − c = 0.3 x₁ − 0.1 x₂ + 0.2551..., sup at the interior corner r = 3.
    let expected = 0.3 * 3.0 + 0.1 * 3.0 + (ANGLE_05_03 - c);
    assert!((cert.details["static_residual"] - expected).abs() < 1e-12);
}

#[test]
fn translator_needs_lattice_shifts() {
    let g = grid(4.0, 33);
    let u0 = ScalarField::quadratic(g, &a(), &[0.0, 0.0], 0.0).unwrap();
    let closure = BoundaryClosure::frozen_hessian(ConeSpec::quadratic(a()));
    let config = RunConfig {
        end_time: 0.1,
        ..RunConfig::default()
    };
    let err = check_translator(&u0, &[1.0, 0.0], &[0.5, 0.0], ANGLE_05_03, &closure, &config);
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
}

#[test]
fn certificate_json_uses_decimal_strings() {
    let g = grid(2.0, 17);
    let config = RunConfig {
        end_time: 30.0,
        interior_margin: 2,
        ..RunConfig::default()
    };
    let (_, cert) = make_expander(&ConeSpec::quadratic(a()), &g, &config).unwrap();
    assert_eq!(cert.recompute_residual_sup(), cert.residual_sup_interior);
    let v: Value = serde_json::from_str(&cert.to_json_string()).unwrap();
    assert_eq!(v["kind"], "expander");
    for key in ["residual_sup_interior", "condition_a_margin", "d3_sup"] {
        let s = v[key].as_str().unwrap();
        assert_eq!(s.parse::<f64>().unwrap(), cert.to_json()[key].as_str().unwrap().parse::<f64>().unwrap());
    }
    assert!(v["run"]["wall_time_s"].is_string());
    assert!(v["run"]["config"]["delta"].is_string());
    assert_eq!(v["run"]["flow"], "rescaled_expander");
    assert_eq!(v["run"]["grid"]["points_per_axis"], 17);
}
