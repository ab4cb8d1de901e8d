use std::f64::consts::PI;

use llbar_core::random::{random_smooth_field, SmoothSpectrum};
use llbar_core::stepper::implicit_symbol;
use llbar_core::{
    integrate, step, Boundary, Current, Dealiasing, Domain, Error, Field, Grid, Model, ModelParams, Scheme, Source,
    StepperConfig,
};

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn line(m: usize, n: usize, len: f64) -> Grid {
    Grid::new(1, m, &[n], &[len], Boundary::Periodic).unwrap()
}

fn cfg(dt: f64, t_end: f64, scheme: Scheme) -> StepperConfig {
    StepperConfig {
        dt,
        t_end,
        scheme,
        ..StepperConfig::default()
    }
}

#[test]
fn fixed_point_is_preserved() {
    let grid = Grid::new(2, 3, &[8, 8], &[2.0, 2.0], Boundary::Periodic).unwrap();
    let model = Model::new(&grid, ModelParams::gradient_flow(1.0, 0.1, 1.0, 1.0), Dealiasing::TwoThirds).unwrap();
    let u = Field::constant(&grid, &[0.0, 0.6, 0.8]);
    for scheme in [Scheme::ImexEuler, Scheme::ImexBdf2] {
        let out = integrate(&u, &model, &cfg(1e-2, 0.5, scheme), |_, _| {}).unwrap();
        assert!(max_diff(&out, &u) < 1e-12);
    }
    let one = step(&u, &model, &cfg(1e-2, 1e-2, Scheme::ImexEuler)).unwrap();
    assert!(max_diff(&one, &u) < 1e-12);
}

#[test]
fn one_euler_step_matches_symbol_formula() {
    let len = 2.0 * PI;
    let grid = line(1, 32, len);
    let (sigma, eps, kappa1) = (1.0, 0.1, 0.5);
    let p = ModelParams::gradient_flow(sigma, eps, kappa1, 0.0);
    let model = Model::new(&grid, p.clone(), Dealiasing::TwoThirds).unwrap();
    for q in [1.0f64, 3.0] {
        let u = Field::from_fn(&grid, 1, |x, o| o[0] = (q * x[0]).cos());
        let k2 = q * q;
        let growth = (sigma + eps * k2) * (kappa1 - k2);
        let s = implicit_symbol(&[q], &p);
        let mut errors = Vec::new();
        for dt in [1e-3, 5e-4] {
            let next = step(&u, &model, &cfg(dt, dt, Scheme::ImexEuler)).unwrap();
            let factor = (1.0 + dt * (growth - s)) / (1.0 - dt * s);
            assert!(max_diff(&next, &u.scaled(factor)) < 1e-14);
            errors.push(max_diff(&next, &u.scaled((dt * growth).exp())));
        }
        let ratio = errors[0] / errors[1];
        assert!((ratio - 4.0).abs() < 0.2, "local error ratio {ratio}");
    }
}

#[test]
fn decaying_mode_matches_exponential() {
    let grid = line(1, 32, 2.0 * PI);
    let (sigma, eps, kappa1) = (1.0, 0.1, 1.0);
    let model = Model::new(&grid, ModelParams::gradient_flow(sigma, eps, kappa1, 0.0), Dealiasing::TwoThirds).unwrap();
    let q = 2.0;
    let u = Field::from_fn(&grid, 1, |x, o| o[0] = (q * x[0]).sin());
    let t = 1.0;
    let exact = ((sigma + eps * q * q) * (kappa1 - q * q) * t).exp();
    for scheme in [Scheme::ImexEuler, Scheme::ImexBdf2] {
        let out = integrate(&u, &model, &cfg(1e-4, t, scheme), |_, _| {}).unwrap();
        let amp = out.l2_norm() / u.l2_norm();
        assert!((amp / exact - 1.0).abs() < 1e-2, "{scheme:?}: {amp} vs {exact}");
    }
}

#[test]
fn zero_data_stays_zero() {
    let grid = Grid::new(2, 3, &[8, 8], &[1.0, 1.0], Boundary::Periodic).unwrap();
    let p = ModelParams {
        gamma: 0.5,
        beta1: 0.3,
        beta2: 0.2,
        chi: 0.1,
        current: Current::Constant([1.0, 0.5, 0.0]),
        source: Source::AffineQuadratic([0.1, 0.2, 0.3]),
        demag: true,
        anisotropy: true,
        lambda1: 1.0,
        ..ModelParams::default()
    };
    let model = Model::new(&grid, p, Dealiasing::TwoThirds).unwrap();
    let mut seen = 0;
    let out = integrate(&Field::zeros(&grid, 3), &model, &cfg(1e-3, 0.05, Scheme::ImexBdf2), |_, u| {
        assert_eq!(u.max_abs(), 0.0);
        seen += 1;
    })
    .unwrap();
    assert_eq!(out.max_abs(), 0.0);
    assert_eq!(seen, 51);
}

#[test]
fn single_step_horizon_equals_step() {
    let grid = line(3, 16, 3.0);
    let model = Model::new(&grid, ModelParams::default(), Dealiasing::TwoThirds).unwrap();
    let u = random_smooth_field(model.domain(), 3, 9, &SmoothSpectrum::default()).unwrap();
    for scheme in [Scheme::ImexEuler, Scheme::ImexBdf2] {
        let a = integrate(&u, &model, &cfg(1e-3, 1e-3, scheme), |_, _| {}).unwrap();
        let b = step(&u, &model, &cfg(1e-3, 1e-3, scheme)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn implicit_part_is_unconditionally_stable() {
    // kappa1 = kappa2 = 0 leaves only the implicit symbol, so N vanishes
    let grid = Grid::new(2, 1, &[16, 16], &[1.0, 1.0], Boundary::Periodic).unwrap();
    let model = Model::new(&grid, ModelParams::gradient_flow(2.0, 0.5, 0.0, 0.0), Dealiasing::TwoThirds).unwrap();
    let u = random_smooth_field(model.domain(), 1, 3, &SmoothSpectrum { decay: 0.0, ..Default::default() }).unwrap();
    for dt in [1e-3, 1.0, 1e3] {
        for scheme in [Scheme::ImexEuler, Scheme::ImexBdf2] {
            let mut prev = u.l2_norm();
            integrate(&u, &model, &cfg(dt, 10.0 * dt, scheme), |_, v| {
                let n = v.l2_norm();
                if scheme == Scheme::ImexEuler {
                    assert!(n <= prev * (1.0 + 1e-14));
                }
                assert!(n <= u.l2_norm() * (1.0 + 1e-12));
                prev = n;
            })
            .unwrap();
        }
    }
}

#[test]
fn blow_up_is_reported_with_step_index() {
    let grid = line(1, 16, 1.0);
    let model = Model::new(&grid, ModelParams::gradient_flow(1.0, 0.0, 50.0, 0.0), Dealiasing::TwoThirds).unwrap();
    let u = Field::constant(&grid, &[1.0]);
    match integrate(&u, &model, &cfg(1.0, 100.0, Scheme::ImexEuler), |_, _| {}) {
        Err(Error::BlowUp { step, time, norm }) => {
            // each step multiplies the constant mode by 51
            assert_eq!(step, 5);
            assert_eq!(time, 5.0);
            assert!(norm > 1e8);
        }
        other => panic!("expected blow-up, got {other:?}"),
    }
    let mut bad = u.clone();
    bad.values_mut()[3] = f64::NAN;
    assert!(matches!(
        integrate(&bad, &model, &cfg(1.0, 1.0, Scheme::ImexEuler), |_, _| {}),
        Err(Error::BlowUp { step: 0, .. })
    ));
}

fn nonlinear_model() -> (Model, Field) {
    let grid = Grid::new(1, 3, &[32], &[2.0 * PI], Boundary::Periodic).unwrap();
    let p = ModelParams {
        sigma: 1.0,
        eps: 0.05,
        gamma: 0.8,
        kappa1: 1.0,
        kappa2: 1.0,
        lambda1: 0.3,
        lambda2: 0.2,
        beta1: 0.5,
        beta2: 0.4,
        chi: 0.2,
        current: Current::Constant([1.0, 0.0, 0.0]),
        source: Source::AffineQuadratic([0.1, 0.0, -0.2]),
        anisotropy: true,
        demag: true,
        ..ModelParams::default()
    };
    let model = Model::new(&grid, p, Dealiasing::TwoThirds).unwrap();
    let u0 = random_smooth_field(
        model.domain(),
        3,
        5,
        &SmoothSpectrum {
            decay: 2.0,
            max_mode: Some(4),
            amplitude: Some(2.0),
        },
    )
    .unwrap();
    (model, u0)
}

#[test]
fn temporal_self_convergence_orders() {
    let (model, u0) = nonlinear_model();
    let t = 0.2;
    let reference = integrate(&u0, &model, &cfg(2e-5, t, Scheme::ImexBdf2), |_, _| {}).unwrap();
    for (scheme, order, tol) in [(Scheme::ImexEuler, 2.0, 0.2), (Scheme::ImexBdf2, 4.0, 0.3)] {
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|dt| {
                let u = integrate(&u0, &model, &cfg(*dt, t, scheme), |_, _| {}).unwrap();
                (&u - &reference).l2_norm()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio / order - 1.0).abs() < tol, "{scheme:?}: ratio {ratio}, errors {errs:?}");
        }
    }
}

/// Independent semi-implicit Euler for the second-order limit: diffusion
/// implicit, everything else (including the cubic) explicit.
fn second_order_euler(domain: &Domain, u0: &Field, p: &ModelParams, dt: f64, steps: usize) -> Field {
    let mut u = u0.clone();
    for _ in 0..steps {
        let mut cubic = Field::zeros(domain.grid(), 1);
        for (c, v) in cubic.values_mut().iter_mut().zip(u.values()) {
            *c = v * v * v;
        }
        let cubic = domain.dealias_field(&cubic).unwrap();
        let explicit = &u.scaled(p.sigma * p.kappa1) - &cubic.scaled(p.sigma * p.kappa2);
        let mut s = domain.to_spectral(&u.axpy(dt, &explicit).unwrap()).unwrap();
        for (z, k2) in s.coeffs_mut().iter_mut().zip(domain.k2()) {
            *z /= 1.0 + dt * p.sigma * k2;
        }
        u = domain.to_physical(&s).unwrap();
    }
    u
}

#[test]
fn zero_eps_matches_independent_second_order_stepper() {
    let grid = line(1, 64, 8.0);
    let p = ModelParams::gradient_flow(1.5, 0.0, 1.0, 1.0);
    let model = Model::new(&grid, p.clone(), Dealiasing::TwoThirds).unwrap();
    let u0 = random_smooth_field(model.domain(), 1, 11, &SmoothSpectrum { amplitude: Some(2.0), max_mode: Some(10), ..Default::default() }).unwrap();
    let dt = 1e-3;
    let ours = integrate(&u0, &model, &cfg(dt, 50.0 * dt, Scheme::ImexEuler), |_, _| {}).unwrap();
    let theirs = second_order_euler(model.domain(), &u0, &p, dt, 50);
    assert!(max_diff(&ours, &theirs) < 1e-12, "{}", max_diff(&ours, &theirs));
}

#[test]
fn runs_are_deterministic() {
    let (model, u0) = nonlinear_model();
    let a = integrate(&u0, &model, &cfg(1e-3, 0.05, Scheme::ImexBdf2), |_, _| {}).unwrap();
    let b = integrate(&u0, &model, &cfg(1e-3, 0.05, Scheme::ImexBdf2), |_, _| {}).unwrap();
    assert_eq!(a.values(), b.values());
}
