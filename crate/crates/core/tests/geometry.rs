use num_rational::BigRational;
use num_traits::One;
use osc_core::functionals::topological_constants;
use osc_core::geometry::*;
use osc_core::model::{fs_density, sigmoid, softplus};
use num_traits::ToPrimitive;
use osc_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(a: i64, n: usize) -> FibrationModel {
    let g = LogGrid::new(10.0, 24.0, n, n, 8).unwrap();
    FibrationModel::new(a, BigRational::one(), g).unwrap()
}

/// Smooth compactly-decaying field: a few Gaussians in `(s, u)`.
fn random_field(m: &FibrationModel, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<[f64; 5]> = (0..4)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0)])
        .collect();
    let ans = m.ansatz.clone();
    ScalarField::from_fn(m.grid, Slopes::ZERO, move |s, t| {
        let u = t - ans.lambda(s)[0];
        bumps.iter().map(|b| b[0] * (-((s - b[1]) / b[3]).powi(2) - ((u - b[2]) / b[4]).powi(2)).exp()).sum()
    })
}

/// Zero-mean second Legendre harmonic `6x² − 6x + 1` of the fiber moment map.
fn second_harmonic(m: &FibrationModel) -> ScalarField {
    let ans = m.ansatz.clone();
    ScalarField::from_fn(m.grid, Slopes::ZERO, move |s, t| {
        let x = sigmoid(t - ans.lambda(s)[0]);
        6.0 * x * x - 6.0 * x + 1.0
    })
}

fn max_masked(f: &ScalarField, mask: &[bool]) -> f64 {
    f.values().iter().zip(mask).filter(|(_, m)| **m).fold(0.0f64, |a, (v, _)| a.max(v.abs()))
}

#[test]
fn ddbar_of_pluriharmonic_functions_vanishes() {
    let g = LogGrid::new(8.0, 8.0, 64, 64, 8).unwrap();
    let w = ddbar(&ScalarField::constant(g, 7.0)).unwrap();
    assert_eq!(w.ss.max_abs() + w.st.max_abs() + w.tt.max_abs(), 0.0);
    let t = ScalarField::from_fn(g, Slopes::new(0.0, 0.0, 1.0, 1.0), |_, t| t);
    let w = ddbar(&t).unwrap();
    // stencil weights applied to values of size 8 cancel to roundoff
    assert!(w.ss.max_abs() + w.st.max_abs() + w.tt.max_abs() < 1e-11);
}

#[test]
fn ddbar_of_fiber_fubini_study_potential() {
    // nt odd so t = 0 is a node
    let errs: Vec<f64> = [129, 257]
        .iter()
        .map(|&nt| {
            let g = LogGrid::new(8.0, 16.0, 33, nt, 8).unwrap();
            let f = ScalarField::from_fn(g, Slopes::new(0.0, 0.0, 0.0, 1.0), |_, t| softplus(t));
            let w = ddbar(&f).unwrap();
            assert!(w.ss.max_abs() < 1e-12);
            let exact = ScalarField::from_fn(g, Slopes::ZERO, |_, t| fs_density(t));
            assert!(w.tt.sub(&exact).unwrap().max_abs() < 1e-6);
            (w.tt.at(16, nt / 2) - 0.25).abs()
        })
        .collect();
    assert!(errs[0] < 1e-7 && errs[1] < 1e-9, "{errs:?}");
}

#[test]
fn ricci_of_round_product_is_twice_the_metric() {
    let m = model(0, 256);
    let w = m.kahler_form(1.0).unwrap();
    let ric = ricci(&w).unwrap();
    let err = ric.sub(&w.scale(2.0)).unwrap();
    assert!(err.ss.max_abs() < 1e-7 && err.st.max_abs() < 1e-7 && err.tt.max_abs() < 1e-7);
    let s = scalar_curvature(&w).unwrap();
    // S = Λ_ω Ric divides by the density, so only where ω is resolved
    let interior = |i: usize, j: usize| (64..192).contains(&i) && (96..160).contains(&j);
    for i in 0..256 {
        for j in 0..256 {
            if interior(i, j) {
                assert!((s.at(i, j) - 4.0).abs() < 1e-5, "{}", s.at(i, j));
            }
        }
    }
}

#[test]
fn fiber_scalar_curvature_of_unit_sphere_is_two() {
    let m = model(0, 256);
    let s = fiber_scalar_curvature(&m.omega_x()).unwrap();
    let mask = resolved_mask(&m.omega_x(), RESOLVED_FRACTION);
    assert!(max_masked(&s.add_const(-2.0), &mask) < 1e-6);
}

#[test]
fn ricci_is_scale_invariant_and_scalar_curvature_scales() {
    let m = model(1, 64);
    let w = m.kahler_form(2.0).unwrap();
    let ric = ricci(&w).unwrap();
    let ric3 = ricci(&w.scale(3.0)).unwrap();
    assert!(ric.sub(&ric3).unwrap().ss.max_abs() < 1e-9);
    let s = scalar_curvature(&w).unwrap();
    let s3 = scalar_curvature(&w.scale(3.0)).unwrap();
    let det = w.det();
    let peak = det.max_abs();
    let resolved: Vec<bool> = det.values().iter().map(|d| *d > 1e-3 * peak).collect();
    let gap = max_masked(&s.scale(1.0 / 3.0).sub(&s3).unwrap(), &resolved);
    assert!(gap < 1e-8 * max_masked(&s, &resolved), "{gap}");
}

#[test]
fn ricci_needs_a_kahler_form() {
    let m = model(1, 64);
    assert!(matches!(ricci(&m.omega_x()), Err(Error::Positivity { .. })));
}

#[test]
fn average_scalar_curvature_matches_class_data() {
    let m = model(1, 256);
    let k = 3;
    let w = m.kahler_form(k as f64).unwrap();
    let avg = scalar_curvature_density(&w).unwrap().integrate() / w.wedge(&w).integrate();
    let exact = topological_constants(&m).unwrap().s_hat(&BigRational::from_integer(k.into())).to_f64().unwrap();
    assert!((avg - exact).abs() < 1e-8, "{avg} vs {exact}");
}

#[test]
fn vertical_laplacian_basics() {
    let m = model(1, 128);
    let wx = m.omega_x();
    let base = ScalarField::from_base(m.grid, (0.0, 0.0), |s| (-s * s).exp());
    assert_eq!(vertical_laplacian(&base, &wx).unwrap().max_abs(), 0.0);
    let f = random_field(&m, 7);
    let lap = vertical_laplacian(&f, &wx).unwrap();
    for (i, v) in lap.mul(&wx.tt).unwrap().fiber_integrals().iter().enumerate() {
        assert!(v.abs() < 1e-9, "fiber {i}: {v}");
    }
}

#[test]
fn momentum_harmonic_is_a_laplace_eigenfunction() {
    // Δ_V (x − ½) = σ''/σ' = −2 (x − ½) on round fibers
    let eig: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let m = model(1, n);
            let wx = m.omega_x();
            let e = momentum_harmonic(&wx).unwrap();
            let lap = vertical_laplacian(&e, &wx).unwrap();
            inner_product(&lap, &e, &wx, &m.omega_b()).unwrap() / inner_product(&e, &e, &wx, &m.omega_b()).unwrap()
        })
        .collect();
    let err: Vec<f64> = eig.iter().map(|v| (v + 2.0).abs()).collect();
    assert!(err[0] < 1e-4 && err[1] < 1e-6 && err[2] < 1e-8, "{eig:?}");
    assert!(err[0] > 50.0 * err[1] && err[1] > 50.0 * err[2]);
}

#[test]
fn lambda_base_examples() {
    let m = model(1, 64);
    let (wx, wb) = (m.omega_x(), m.omega_b());
    let one = lambda_base(&wb, &wx, &wb).unwrap();
    assert!(one.add_const(-1.0).max_abs() < 1e-12);
    // the ω_X-vertical part of ω_X: annihilates horizontal lifts
    let vert = Form11::new(wx.st.mul(&wx.st).unwrap().zip_with(&wx.tt, |a, g| a / g, |_, _| 0.0).unwrap(), wx.st.clone(), wx.tt.clone()).unwrap();
    // C²/G cancels against itself: roundoff relative to C²/G
    let size = vert.ss.map(|v| 1.0 + v.abs());
    let zero = lambda_base(&vert, &wx, &wb).unwrap().mul(&wb.ss).unwrap();
    assert!(zero.values().iter().zip(size.values()).all(|(z, s)| z.abs() < 1e-14 * s));
    let two = lambda_base(&wb.scale(2.0).add(&vert).unwrap(), &wx, &wb).unwrap().add_const(-2.0).mul(&wb.ss).unwrap();
    assert!(two.values().iter().zip(size.values()).all(|(z, s)| z.abs() < 1e-14 * s));
}

#[test]
fn symplectic_curvature_examples() {
    let prod = model(0, 128);
    let vd = symplectic_curvature(&prod.omega_x(), &prod.omega_b()).unwrap();
    assert!(vd.mu_f.max_abs() < 1e-12);

    let m = model(1, 128);
    let (wx, wb) = (m.omega_x(), m.omega_b());
    let vd = symplectic_curvature(&wx, &wb).unwrap();
    assert!(vd.mu_f.max_abs() > 0.1);
    for mean in fiber_means(&vd.mu_f, &wx) {
        assert!(mean.abs() < 1e-13, "{mean}");
    }
    let f = ScalarField::from_base(m.grid, (0.0, 0.0), |s| 0.3 * (-s * s / 3.0).exp());
    let shifted = wx.add(&ddbar(&f).unwrap()).unwrap();
    let vd2 = symplectic_curvature(&shifted, &wb).unwrap();
    assert!(vd2.mu_f.sub(&vd.mu_f).unwrap().max_abs() < 1e-10);
}

#[test]
fn symplectic_curvature_matches_lift_commutator() {
    // [∂_s + c∂_t, ∂_θs + c∂_θt] = (c_s + c c_t) ∂_θt, whose fiber Hamiltonian
    // has t-derivative g_V (c_s + c c_t); coarse grid cross-check
    let gap = |n: usize| {
        let m = model(1, n);
        let (wx, wb) = (m.omega_x(), m.omega_b());
        let vd = symplectic_curvature(&wx, &wb).unwrap();
        let c = &vd.horiz_lift;
        let cs = c.derivative_closed(Axis::S, 1, Closure::OneSided).unwrap();
        let ct = c.derivative_closed(Axis::T, 1, Closure::OneSided).unwrap();
        let comm = cs.add(&c.mul(&ct).unwrap()).unwrap().mul(&wx.tt).unwrap();
        let lhs = vd.mu_f.derivative_closed(Axis::T, 1, Closure::OneSided).unwrap().mul(&wb.ss).unwrap();
        let mask = resolved_mask(&wx, RESOLVED_FRACTION);
        let scale = max_masked(&comm, &mask);
        assert!(scale > 1e-2);
        max_masked(&lhs.sub(&comm).unwrap(), &mask) / scale
    };
    let (coarse, fine) = (gap(64), gap(128));
    assert!(coarse < 2e-3 && fine < 2e-5, "{coarse} {fine}");
}

#[test]
fn rho_examples() {
    let m = model(1, 256);
    let wx = m.omega_x();
    let rho = rho_curvature(&wx).unwrap();
    // each fiber is round of unit area: ρ|fiber = Ric = 2 g_V
    let mask = resolved_mask(&wx, RESOLVED_FRACTION);
    let diff = rho.tt.sub(&wx.tt.scale(2.0)).unwrap();
    assert!(max_masked(&diff, &mask) < 1e-7);
    let ints = rho.tt.fiber_integrals();
    for i in (0..256).filter(|&i| m.grid.s(i).abs() < 3.0) {
        assert!((ints[i] - 2.0).abs() < 1e-8, "{}", ints[i]);
    }
    let prod = model(0, 128);
    let rho = rho_curvature(&prod.omega_x()).unwrap();
    let h = lambda_base(&rho, &prod.omega_x(), &prod.omega_b()).unwrap();
    assert!(h.max_abs() < 1e-9);
}

#[test]
fn theta_examples() {
    let prod = model(0, 128);
    let (wx, wb) = (prod.omega_x(), prod.omega_b());
    let p = project_e(&theta(&wx, &wb).unwrap(), &wx, &wb).unwrap();
    assert!(inner_product(&p, &p, &wx, &wb).unwrap() < 1e-16);

    let m = model(1, 256);
    let (wx, wb) = (m.omega_x(), m.omega_b());
    let p = project_e(&theta(&wx, &wb).unwrap(), &wx, &wb).unwrap();
    let norm0 = inner_product(&p, &p, &wx, &wb).unwrap();
    assert!(norm0 > 1e-3, "{norm0}");

    // pulling back by the fiber translation generated by a constant section
    let u = geodesics::HolomorphySection::from_fn(&wx, |_| 0.8).unwrap();
    let geo = geodesics::flow_geodesic(&m, &u, 1.0, 1).unwrap();
    let w1 = wx.add(&ddbar(geo.end()).unwrap()).unwrap();
    let p1 = project_e(&theta(&w1, &wb).unwrap(), &w1, &wb).unwrap();
    let norm1 = inner_product(&p1, &p1, &w1, &wb).unwrap();
    assert!((norm1 - norm0).abs() < 1e-6 * norm0, "{norm0} {norm1}");
}

#[test]
fn theta_requires_relatively_csck() {
    let m = model(1, 128);
    let phi = m.bump_potential(0.1, (0.0, 0.0), (2.0, 1.0));
    let w = m.omega_x().add(&ddbar(&phi).unwrap()).unwrap();
    assert!(matches!(theta(&w, &m.omega_b()), Err(Error::NotRelativelyCsck { .. })));
}

#[test]
fn projection_examples() {
    let m = model(1, 128);
    let (wx, wb) = (m.omega_x(), m.omega_b());
    let base = ScalarField::from_base(m.grid, (0.0, 0.0), |s| (s / 2.0).sin());
    assert!(project_e(&base, &wx, &wb).unwrap().max_abs() < 1e-12);
    let e = momentum_harmonic(&wx).unwrap().mul(&base).unwrap();
    let pe = project_e(&e, &wx, &wb).unwrap();
    assert!(pe.sub(&e).unwrap().max_abs() < 1e-10);
    let h2 = second_harmonic(&m);
    let ph2 = project_e(&h2, &wx, &wb).unwrap();
    // away from |s| = s_range, where the t-window truncates the fiber
    for i in (0..128).filter(|&i| m.grid.s(i).abs() < 3.0) {
        let worst = ph2.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-8, "{} {worst}", m.grid.s(i));
    }
}

#[test]
fn inner_product_examples() {
    let m = FibrationModel::new(1, BigRational::from_integer(3.into()), LogGrid::new(10.0, 24.0, 128, 128, 8).unwrap()).unwrap();
    let (wx, wb) = (m.omega_x(), m.omega_b());
    let one = ScalarField::constant(m.grid, 1.0);
    let vol = inner_product(&one, &one, &wx, &wb).unwrap();
    assert!((vol - 3.0).abs() < 3e-8, "{vol}");
    let f = random_field(&m, 1);
    let g = random_field(&m, 2);
    assert_eq!(inner_product(&f, &g, &wx, &wb).unwrap(), inner_product(&g, &f, &wx, &wb).unwrap());
    let pf = project_e(&f, &wx, &wb).unwrap();
    let rest = f.sub(&pf).unwrap();
    assert!(inner_product(&pf, &rest, &wx, &wb).unwrap().abs() < 1e-10);
}

#[test]
fn lichnerowicz_examples() {
    let res: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let m = model(1, n);
            let e = momentum_harmonic(&m.omega_x()).unwrap();
            lichnerowicz_residual(&e, &m.omega_x(), &m.omega_b()).unwrap()
        })
        .collect();
    assert!(res[2] < 1e-10, "{res:?}");
    assert!(res[2] <= res[0]);
    let m = model(1, 128);
    let (wx, wb) = (m.omega_x(), m.omega_b());
    let base = ScalarField::from_base(m.grid, (0.0, 0.0), |s| (-s * s).exp());
    assert_eq!(lichnerowicz_residual(&base, &wx, &wb).unwrap(), 0.0);
    assert!(lichnerowicz_residual(&second_harmonic(&m), &wx, &wb).unwrap() > 0.1);
}

#[test]
fn operations_are_deterministic() {
    let m = model(1, 128);
    let w = m.kahler_form(2.0).unwrap();
    let a = scalar_curvature_density(&w).unwrap();
    let b = scalar_curvature_density(&w).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.integrate().to_bits(), b.integrate().to_bits());
    let th = theta(&m.omega_x(), &m.omega_b()).unwrap();
    assert_eq!(th, theta(&m.omega_x(), &m.omega_b()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projection_is_idempotent_and_self_adjoint(seed_f in 0u64..1000, seed_g in 1000u64..2000) {
        let m = model(1, 64);
        let (wx, wb) = (m.omega_x(), m.omega_b());
        let f = random_field(&m, seed_f);
        let g = random_field(&m, seed_g);
        let pf = project_e(&f, &wx, &wb).unwrap();
        let ppf = project_e(&pf, &wx, &wb).unwrap();
        prop_assert!(ppf.sub(&pf).unwrap().max_abs() < 1e-10);
        let pg = project_e(&g, &wx, &wb).unwrap();
        let lhs = inner_product(&pf, &g, &wx, &wb).unwrap();
        let rhs = inner_product(&f, &pg, &wx, &wb).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{} {}", lhs, rhs);
    }

    #[test]
    fn vertical_laplacian_is_divergence(seed in 0u64..1000) {
        let m = model(1, 128);
        let f = random_field(&m, seed);
        let lap = vertical_laplacian(&f, &m.omega_x()).unwrap();
        for v in lap.mul(&m.omega_x().tt).unwrap().fiber_integrals() {
            prop_assert!(v.abs() < 1e-8);
        }
    }
}
