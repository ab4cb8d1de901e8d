use llbar_core::diagnostics::rate_fit;
use llbar_core::random::{random_smooth_field, SmoothSpectrum};
use llbar_core::stepper::implicit_symbol;
use llbar_core::{
    integrate, Boundary, Dealiasing, Domain, Field, GalerkinSystem, Grid, Model, ModelParams, Scheme, Source,
    StepperConfig,
};
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::NeumannCosine)]
}

fn small_grid() -> impl Strategy<Value = Grid> {
    (1usize..=2, prop_oneof![Just(1usize), Just(3)], 2usize..=8, 2usize..=8, 0.5f64..5.0, 0.5f64..5.0, boundary())
        .prop_map(|(d, m, a, b, la, lb, bc)| {
            let n = [2 * a, 2 * b];
            Grid::new(d, m, &n[..d], &[la, lb][..d], bc).unwrap()
        })
}

fn vector_grid() -> impl Strategy<Value = Grid> {
    (2usize..=6, 2usize..=6, 2usize..=4, 0.5f64..4.0).prop_map(|(a, b, c, l)| {
        Grid::new(3, 3, &[2 * a, 2 * b, 2 * c], &[l, 1.3 * l, 0.7 * l], Boundary::Periodic).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_and_parseval(grid in small_grid(), seed in any::<u64>(), decay in 0.0f64..3.0) {
        let domain = Domain::new(&grid);
        let shape = SmoothSpectrum { decay, ..Default::default() };
        let u = random_smooth_field(&domain, grid.components(), seed, &shape).unwrap();
        let s = domain.to_spectral(&u).unwrap();
        let back = domain.to_physical(&s).unwrap();
        let scale = u.max_abs().max(1e-300);
        for (a, b) in u.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
        let phys = u.l2_norm().powi(2);
        prop_assert!((phys - s.energy()).abs() <= 1e-10 * phys);
    }

    #[test]
    fn amplitude_is_exact(grid in small_grid(), seed in any::<u64>(), amp in 1e-3f64..1e3) {
        let domain = Domain::new(&grid);
        let shape = SmoothSpectrum { amplitude: Some(amp), ..Default::default() };
        let u = random_smooth_field(&domain, grid.components(), seed, &shape).unwrap();
        prop_assert!((u.l2_norm() / amp - 1.0).abs() < 1e-12);
        let again = random_smooth_field(&domain, grid.components(), seed, &shape).unwrap();
        prop_assert_eq!(u, again);
    }

    #[test]
    fn demag_is_a_contraction(grid in vector_grid(), seed in any::<u64>()) {
        let p = ModelParams { demag: true, ..ModelParams::default() };
        let model = Model::new(&grid, p, Dealiasing::TwoThirds).unwrap();
        let shape = SmoothSpectrum { decay: 0.5, ..Default::default() };
        let u = random_smooth_field(model.domain(), 3, seed, &shape).unwrap();
        let h = model.demag_field(&u).unwrap();
        prop_assert!(h.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn anisotropy_is_one_sided_lipschitz(
        seed in any::<u64>(),
        lambda1 in -2.0f64..2.0,
        lambda2 in 0.0f64..3.0,
        theta in 0.0f64..3.14,
        phi in 0.0f64..6.28,
        av in 0.1f64..5.0,
        aw in 0.1f64..5.0,
    ) {
        let grid = Grid::new(2, 3, &[12, 12], &[2.0, 2.0], Boundary::Periodic).unwrap();
        let e = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let norm = e.iter().map(|c| c * c).sum::<f64>().sqrt();
        let p = ModelParams {
            lambda1,
            lambda2,
            easy_axis: e.map(|c| c / norm),
            anisotropy: true,
            ..ModelParams::default()
        };
        let model = Model::new(&grid, p, Dealiasing::TwoThirds).unwrap();
        let v = random_smooth_field(model.domain(), 3, seed, &SmoothSpectrum { amplitude: Some(av), ..Default::default() }).unwrap();
        let w = random_smooth_field(model.domain(), 3, seed ^ 1, &SmoothSpectrum { amplitude: Some(aw), ..Default::default() }).unwrap();
        let diff = &v - &w;
        let da = &model.anisotropy_field(&v).unwrap() - &model.anisotropy_field(&w).unwrap();
        // the bound needs lambda1 >= 0; for negative lambda1 the linear part is dissipative
        let bound = lambda1.max(0.0) * diff.l2_norm().powi(2);
        prop_assert!(da.inner(&diff).unwrap() <= bound + 1e-10);
    }

    #[test]
    fn source_is_locally_lipschitz(
        grid in small_grid(),
        seed in any::<u64>(),
        a in prop::array::uniform3(-3.0f64..3.0),
        av in 0.1f64..5.0,
    ) {
        let p = ModelParams { source: Source::AffineQuadratic(a), ..ModelParams::default() };
        let model = Model::new(&grid, p, Dealiasing::TwoThirds).unwrap();
        let m = grid.components();
        let shape = SmoothSpectrum { amplitude: Some(av), ..Default::default() };
        let v = random_smooth_field(model.domain(), m, seed, &shape).unwrap();
        let w = random_smooth_field(model.domain(), m, seed.wrapping_add(7), &shape).unwrap();
        let ds = &model.source_term(&v).unwrap() - &model.source_term(&w).unwrap();
        let a_norm = a[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = a_norm.max(1.0);
        let bound = c * (1.0 + v.sup_norm() + w.sup_norm()) * (&v - &w).l2_norm();
        prop_assert!(ds.l2_norm() <= bound + 1e-10);
    }

    #[test]
    fn smallness_condition_is_enforced(sigma in 0.1f64..3.0, kappa2 in 0.1f64..3.0, chi in -3.0f64..3.0) {
        let p = ModelParams { sigma, kappa2, chi, ..ModelParams::default() };
        let ok = 2.0 * chi * chi < kappa2 * sigma * sigma;
        prop_assert_eq!(p.validated(1).is_ok(), ok);
    }

    #[test]
    fn implicit_symbol_is_dissipative(k in prop::collection::vec(-50.0f64..50.0, 1..=3), sigma in 0.01f64..5.0, eps in 0.0f64..2.0) {
        let p = ModelParams { sigma, eps, ..ModelParams::default() };
        prop_assert!(implicit_symbol(&k, &p) <= 0.0);
    }

    #[test]
    fn implicit_solve_never_amplifies(seed in any::<u64>(), log_dt in -4.0f64..3.0, eps in 0.0f64..1.0, bdf2 in any::<bool>()) {
        let grid = Grid::new(1, 1, &[32], &[3.0], Boundary::Periodic).unwrap();
        let model = Model::new(&grid, ModelParams::gradient_flow(1.0, eps, 0.0, 0.0), Dealiasing::TwoThirds).unwrap();
        let u = random_smooth_field(model.domain(), 1, seed, &SmoothSpectrum { decay: 0.0, ..Default::default() }).unwrap();
        let dt = 10f64.powf(log_dt);
        let scheme = if bdf2 { Scheme::ImexBdf2 } else { Scheme::ImexEuler };
        let cfg = StepperConfig { dt, t_end: 5.0 * dt, scheme, ..StepperConfig::default() };
        let out = integrate(&u, &model, &cfg, |_, _| {}).unwrap();
        prop_assert!(out.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn galerkin_projection_contracts(grid in small_grid(), seed in any::<u64>(), n in 1usize..=16) {
        let domain = Domain::new(&grid);
        let u = random_smooth_field(&domain, grid.components(), seed, &SmoothSpectrum { decay: 0.5, ..Default::default() }).unwrap();
        let g = GalerkinSystem::project(&u, n, ModelParams::default());
        prop_assume!(g.is_ok());
        prop_assert!(g.unwrap().l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn rate_fit_recovers_power_laws(c in 1e-3f64..1e3, rate in 0.2f64..3.0) {
        let pairs: Vec<(f64, f64)> = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3].iter().map(|e: &f64| (*e, c * e.powf(rate))).collect();
        let fit = rate_fit(&pairs).unwrap();
        prop_assert!((fit.slope - rate).abs() < 1e-10);
        prop_assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn constant_fields_are_harmonic(grid in small_grid(), c in -5.0f64..5.0) {
        let domain = Domain::new(&grid);
        let u = Field::constant(&grid, &vec![c; grid.components()]);
        // transform roundoff in the nonzero modes is amplified by |k|^2
        let k2max = domain.k2().iter().cloned().fold(1.0, f64::max);
        prop_assert!(domain.laplacian(&u).unwrap().max_abs() <= 1e-14 * k2max * (1.0 + c.abs()));
    }
}
