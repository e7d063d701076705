use num_rational::BigRational;
use num_traits::One;
use osc_core::functionals::*;
use osc_core::geodesics::*;
use osc_core::geometry::{fiber_scalar_curvature, relative_csck_spread, KE_TOLERANCE};
use osc_core::slope::ray_grid;
use osc_core::stability::shipped_spec;
use osc_core::*;
use proptest::prelude::*;

fn model(a: i64, n: usize) -> FibrationModel {
    let g = LogGrid::new(10.0, 24.0, n, n, 8).unwrap();
    FibrationModel::new(a, BigRational::one(), g).unwrap()
}

fn bell(s: f64) -> f64 {
    0.6 * (-(s - 0.3f64).powi(2) / 4.0).exp()
}

/// `∫ c'² ds` for [`bell`].
fn bell_dirichlet() -> f64 {
    0.09 * (2.0 * std::f64::consts::PI).sqrt()
}

fn section(m: &FibrationModel, c: impl Fn(f64) -> f64) -> HolomorphySection {
    HolomorphySection::from_fn(&m.omega_x(), c).unwrap()
}

#[test]
fn sections_are_certified() {
    let m = model(1, 128);
    let u = section(&m, bell);
    let (mean, lich) = u.certify(&m.omega_x(), &m.omega_b()).unwrap();
    assert!(mean < 1e-14, "{mean}");
    assert!(lich < 1e-8, "{lich}");
}

#[test]
fn zero_section_gives_constant_path() {
    let m = model(1, 64);
    let geo = flow_geodesic(&m, &section(&m, |_| 0.0), 1.0, 4).unwrap();
    assert!(geo.path.potentials.iter().all(|p| p.max_abs() == 0.0));
    assert_eq!(geo.path.kind, PathKind::FlowGeodesic);
}

#[test]
fn flow_stays_relatively_csck() {
    let m = model(1, 256);
    let geo = flow_geodesic(&m, &section(&m, bell), 1.0, 4).unwrap();
    let wx = m.omega_x();
    for p in &geo.path.potentials {
        let w = wx.add(&geometry::ddbar(p).unwrap()).unwrap();
        let (spread, _) = relative_csck_spread(&w).unwrap();
        assert!(spread < KE_TOLERANCE, "{spread}");
        // fibers are round of area 1 throughout
        let s = fiber_scalar_curvature(&w).unwrap();
        assert!((s.at(128, 128) - 2.0).abs() < 1e-6);
    }
}

#[test]
fn residual_decays_at_stencil_order() {
    let res: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let m = model(1, n);
            let geo = flow_geodesic(&m, &section(&m, bell), 1.0, 16).unwrap();
            geodesic_residual(&geo.path, &m.omega_x()).unwrap().max()
        })
        .collect();
    assert!(res[2] <= 1e-5, "{res:?}");
    // h⁴ at least; eighth-order stencils give about 2⁷ per halving
    assert!(res[0] / res[1] > 16.0 && res[1] / res[2] > 16.0, "{res:?}");
}

#[test]
fn straight_lines_are_not_geodesics() {
    let m = model(1, 128);
    let geo = flow_geodesic(&m, &section(&m, bell), 1.0, 16).unwrap();
    let flow = geodesic_residual(&geo.path, &m.omega_x()).unwrap();
    let line = PotentialPath::straight_line(geo.end(), 16).unwrap();
    let straight = geodesic_residual(&line, &m.omega_x()).unwrap();
    assert!(straight.max() > 1e-2);
    assert!(straight.max() >= 100.0 * flow.max());
    assert_eq!(straight.times.len(), 15);
}

#[test]
fn base_lines_solve_the_geodesic_equation() {
    let m = model(1, 64);
    let g = ScalarField::from_base(m.grid, (0.0, 0.0), |s| 0.4 * (-s * s / 5.0).exp());
    let line = PotentialPath::straight_line(&g, 4).unwrap();
    assert!(geodesic_residual(&line, &m.omega_x()).unwrap().max() < 1e-12);
}

#[test]
fn residual_needs_three_samples() {
    let m = model(0, 32);
    let line = PotentialPath::straight_line(&ScalarField::zeros(m.grid), 1).unwrap();
    assert!(matches!(geodesic_residual(&line, &m.omega_x()), Err(Error::TooFewSamples { need: 3, .. })));
}

#[test]
fn horizon_is_reported() {
    let m = model(1, 64);
    let err = flow_geodesic(&m, &section(&m, |_| 1.0), 20.0, 4).unwrap_err();
    assert!(matches!(err, Error::Horizon { .. }), "{err}");
}

#[test]
fn between_equal_endpoints_is_constant() {
    let m = model(1, 128);
    let phi = m.fiber_shift_potential(|s| 0.3 * (-s * s / 4.0).exp(), |_| 0.0);
    let geo = geodesic_between(&m, &phi, &phi, 8).unwrap();
    assert!(geo.coefficient.iter().all(|c| c.abs() < 1e-9));
    assert!(geo.base.max_abs() < 1e-12);
    for p in &geo.path.potentials {
        assert!(p.sub(&phi).unwrap().max_abs() < 1e-9);
    }
}

#[test]
fn between_base_shift_is_linear() {
    let m = model(1, 128);
    let phi = m.fiber_shift_potential(|s| 0.3 * (-s * s / 4.0).exp(), |_| 0.0);
    let g = ScalarField::from_base(m.grid, (0.0, 0.0), |s| 0.2 * (-(s - 1.0).powi(2) / 3.0).exp());
    let geo = geodesic_between(&m, &phi, &phi.add(&g).unwrap(), 8).unwrap();
    assert!(geo.coefficient.iter().all(|c| c.abs() < 1e-9));
    assert!(geo.base.sub(&g).unwrap().max_abs() < 1e-9);
    for i in 0..geo.path.len() {
        assert!(geo.psi(i).unwrap().max_abs() < 1e-9);
    }
}

#[test]
fn between_recovers_flow_coefficient() {
    let m = FibrationModel::new(1, BigRational::one(), LogGrid::standard()).unwrap();
    let start = m.fiber_shift_potential(|s| 0.2 * (-s * s / 6.0).exp(), |s| 0.1 * (-s * s / 2.0).exp());
    let u = section(&m, bell);
    let geo = flow_geodesic_from(&m, &start, &u, 1.0, 4).unwrap();
    let back = geodesic_between(&m, &start, geo.end(), DEFAULT_STEPS).unwrap();
    assert_eq!(back.path.len(), 65);
    let dc = back.coefficient.iter().zip(&u.coefficient).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dc < 1e-6, "{dc}");
    assert!(back.base.max_abs() < 1e-8);
    assert!(back.end().sub(geo.end()).unwrap().max_abs() < 1e-8);
}

#[test]
fn between_rejects_other_orbits() {
    let m = model(1, 128);
    let phi1 = m.bump_potential(0.05, (0.0, 0.0), (2.0, 2.0));
    let err = geodesic_between(&m, &ScalarField::zeros(m.grid), &phi1, 8).unwrap_err();
    assert!(matches!(err, Error::Matching { .. }), "{err}");
}

#[test]
fn automorphism_flow_is_affine() {
    let m = model(1, 256);
    let ctx = FibrationContext::new(&m).unwrap();
    let geo = flow_geodesic(&m, &section(&m, |_| 0.7), 1.0, 8).unwrap();
    let rep = convexity_check(&geo, &ctx, CONVEXITY_TOL).unwrap();
    assert!(rep.convex() && rep.affine(), "{:?}", rep.second_differences);
    assert!(rep.max_r_norm2() <= 1e-7, "{}", rep.max_r_norm2());
    let sv = second_variation_n(&geo, &ctx).unwrap();
    assert!(sv.iter().all(|v| v.total.abs() < 1e-7));
}

#[test]
fn base_only_geodesic_is_affine() {
    let m = model(1, 128);
    let ctx = FibrationContext::new(&m).unwrap();
    let g = ScalarField::from_base(m.grid, (0.0, 0.0), |s| 0.3 * (-s * s / 4.0).exp());
    let geo = geodesic_between(&m, &ScalarField::zeros(m.grid), &g, 8).unwrap();
    let rep = convexity_check(&geo, &ctx, CONVEXITY_TOL).unwrap();
    assert!(rep.affine(), "{:?}", rep.second_differences);
    let sv = second_variation_n(&geo, &ctx).unwrap();
    assert!(sv.iter().all(|v| v.r_norm2.abs() < 1e-12));
}

#[test]
fn generic_geodesic_is_strictly_convex() {
    let m = model(1, 256);
    let ctx = FibrationContext::new(&m).unwrap();
    let steps = 16;
    let geo = flow_geodesic(&m, &section(&m, bell), 1.0, steps).unwrap();
    let rep = convexity_check(&geo, &ctx, CONVEXITY_TOL).unwrap();
    assert!(rep.convex() && !rep.affine());
    // ‖ℛφ̇‖² = ∫ c'² / 3 and d²𝒩/dt² = 2‖ℛφ̇‖²
    let expect = bell_dirichlet() / 3.0;
    assert!((rep.max_r_norm2() - expect).abs() < 1e-6 * expect, "{} vs {expect}", rep.max_r_norm2());
    let dt2 = (1.0 / steps as f64).powi(2);
    for d in &rep.second_differences {
        assert!((d - 2.0 * expect * dt2).abs() < 1e-6 * expect * dt2, "{d}");
    }
    let sv = second_variation_n(&geo, &ctx).unwrap();
    assert!(sv.iter().all(|v| v.residual_term.abs() < 1e-9 && v.total > 0.0));
}

#[test]
fn geodesics_between_critical_points_are_flat() {
    // both ends are product metrics on P^1 × P^1 (p(θ) = 0)
    let m = model(0, 128);
    let ctx = FibrationContext::new(&m).unwrap();
    let zero = ScalarField::zeros(m.grid);
    let end = flow_geodesic(&m, &section(&m, |_| 0.5), 1.0, 2).unwrap();
    let geo = geodesic_between(&m, &zero, end.end(), 8).unwrap();
    let rep = convexity_check(&geo, &ctx, CONVEXITY_TOL).unwrap();
    assert!(rep.max_r_norm2() < 1e-7 && rep.affine());
}

#[test]
fn base_directions_have_zero_curvature() {
    let m = model(1, 64);
    let psi = section(&m, bell).field();
    let eta = ScalarField::from_base(m.grid, (0.0, 0.0), |s| (-s * s).exp());
    let k = sectional_curvature(&psi, &eta, &m.omega_x()).unwrap();
    assert_eq!(k.k, 0.0);
    assert_eq!(k.bracket.max_abs(), 0.0);
}

fn tangent(n: usize, base: impl Fn(usize) -> f64, h: impl Fn(usize) -> [f64; 3]) -> FiberTangent {
    FiberTangent { base: (0..n).map(&base).collect(), harmonic: (0..n).map(&h).collect() }
}

#[test]
fn independent_harmonics_curve_negatively() {
    let m = model(0, 128);
    let slice = Su2Slice::new(&m);
    let n = slice.b.len();
    let psi = tangent(n, |_| 0.0, |_| [1.0, 0.0, 0.0]);
    let eta = tangent(n, |_| 0.0, |_| [0.0, 1.0, 0.0]);
    let k = slice.sectional_curvature(&psi, &eta).unwrap();
    // −¼ (4π²/12) β / (β/12)² with β = 1
    let expect = -12.0 * std::f64::consts::PI.powi(2);
    assert!((k.k - expect).abs() < 1e-6 * expect.abs(), "{}", k.k);
    let same = slice.sectional_curvature(&psi, &psi).unwrap();
    assert_eq!(same.k, 0.0);
    let swapped = slice.sectional_curvature(&eta, &psi).unwrap();
    assert_eq!(swapped.k, k.k);
    assert!(swapped.bracket.iter().zip(&k.bracket).all(|(a, b)| (0..3).all(|i| a[i] == -b[i])));
    let base = tangent(n, |i| (i as f64 * 0.1).sin(), |_| [0.0; 3]);
    assert_eq!(slice.sectional_curvature(&psi, &base).unwrap().k, 0.0);
}

fn ray_model(a: i64, c: f64) -> FibrationModel {
    let g = LogGrid::new(10.0, 24.0, 128, 128, 8).unwrap();
    FibrationModel::new(a, BigRational::one(), ray_grid(&g, a, c, 8.0).unwrap()).unwrap()
}

#[test]
fn trivial_spec_gives_constant_ray() {
    let m = ray_model(0, 0.0);
    let ray = ray_from_degeneration(&shipped_spec("trivial").unwrap(), &m, 8.0, 1).unwrap();
    assert_eq!(ray.path.kind, PathKind::Ray);
    assert_eq!(ray.path.len(), 9);
    assert!(ray.path.potentials.iter().all(|p| p.max_abs() == 0.0));
}

#[test]
fn summand_weights_give_a_geodesic_ray() {
    let spec = shipped_spec("product-oo").unwrap();
    let m = ray_model(0, 1.0);
    let ray = ray_from_degeneration(&spec, &m, 8.0, 8).unwrap();
    assert!(ray.path.potentials.last().unwrap().max_abs() > 1.0);
    assert!(geodesic_residual(&ray.path, &m.omega_x()).unwrap().max() < 1e-4);
    let ctx = FibrationContext::new(&m).unwrap();
    let rep = convexity_check(&ray, &ctx, CONVEXITY_TOL).unwrap();
    assert!(rep.affine(), "{:?}", rep.second_differences);
}

#[test]
fn automorphism_rays_have_affine_log_norm() {
    let spec = shipped_spec("product-f1").unwrap();
    let m = ray_model(1, 1.0);
    let ctx = FibrationContext::new(&m).unwrap();
    let ray = ray_from_degeneration(&spec, &m, 8.0, 8).unwrap();
    // shifts off the node lattice leave ~1e-7 interpolation ripple in 𝒩
    let rep = convexity_check(&ray, &ctx, 1e-6).unwrap();
    assert!(rep.affine() && rep.max_r_norm2() < 1e-7, "{}", rep.max_r_norm2());
    let slope = rep.n_values[64] - rep.n_values[63];
    assert!((8.0 * slope + 2.0 / 3.0).abs() < 1e-5, "{slope}");
}

#[test]
fn rays_need_aligned_specs() {
    let m = ray_model(0, 1.0);
    let err = ray_from_degeneration(&shipped_spec("euler").unwrap(), &m, 8.0, 1).unwrap_err();
    assert!(matches!(err, Error::NotAligned(_)));
    let err = ray_from_degeneration(&shipped_spec("product-f1").unwrap(), &m, 8.0, 1).unwrap_err();
    assert!(matches!(err, Error::NotAligned(_)));
    let small = model(1, 64);
    let err = ray_from_degeneration(&shipped_spec("product-f1").unwrap(), &small, 8.0, 1).unwrap_err();
    assert!(matches!(err, Error::Horizon { .. }));
}

#[test]
fn geodesic_directory_round_trips() {
    let m = model(1, 32);
    let geo = flow_geodesic(&m, &section(&m, bell), 1.0, 4).unwrap();
    let dir = std::env::temp_dir().join(format!("osc-geodesic-{}", std::process::id()));
    geo.write_dir(&dir).unwrap();
    let back = Geodesic::read_dir(&dir).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(back.path.times, geo.path.times);
    assert_eq!(back.path.potentials, geo.path.potentials);
    assert_eq!(back.coefficient, geo.coefficient);
    assert_eq!(back.path.kind, PathKind::FlowGeodesic);
    assert!(back.base.sub(&geo.base).unwrap().max_abs() == 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn curvature_is_never_positive(
        beta in 0.5f64..3.0,
        coeffs in proptest::collection::vec(-2.0f64..2.0, 16),
    ) {
        let g = LogGrid::new(10.0, 24.0, 33, 16, 4).unwrap();
        let m = FibrationModel::new(0, BigRational::from_float(beta).unwrap(), g).unwrap();
        let slice = Su2Slice::new(&m);
        let n = slice.b.len();
        let c = coeffs.clone();
        let wave = move |k: usize, i: usize| c[k] + c[k + 1] * (0.3 * i as f64).sin();
        let psi = tangent(n, |i| wave(0, i), |i| [wave(2, i), wave(4, i), wave(6, i)]);
        let eta = tangent(n, |i| wave(8, i), |i| [wave(10, i), wave(12, i), wave(14, i)]);
        let k = slice.sectional_curvature(&psi, &eta).unwrap();
        prop_assert!(k.k <= 1e-10, "{}", k.k);
        let back = slice.sectional_curvature(&eta, &psi).unwrap();
        prop_assert_eq!(back.k, k.k);
    }
}
