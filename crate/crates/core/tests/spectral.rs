use std::f64::consts::PI;

use llbar_core::random::{random_smooth_field, SmoothSpectrum};
use llbar_core::{Boundary, Dealiasing, Domain, Field, Grid};

fn max_diff(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn grids() -> Vec<Grid> {
    vec![
        Grid::new(1, 1, &[32], &[2.0 * PI], Boundary::Periodic).unwrap(),
        Grid::new(1, 3, &[48], &[5.0], Boundary::NeumannCosine).unwrap(),
        Grid::new(2, 3, &[16, 24], &[3.0, 4.0], Boundary::Periodic).unwrap(),
        Grid::new(2, 1, &[16, 12], &[1.0, 2.5], Boundary::NeumannCosine).unwrap(),
        Grid::new(3, 3, &[8, 8, 12], &[1.0, 2.0, 3.0], Boundary::Periodic).unwrap(),
    ]
}

#[test]
fn round_trip_is_identity() {
    for (i, grid) in grids().into_iter().enumerate() {
        let domain = Domain::new(&grid);
        // rough data exercises every mode including Nyquist
        let shape = SmoothSpectrum {
            decay: 0.0,
            ..Default::default()
        };
        let u = random_smooth_field(&domain, grid.components(), i as u64, &shape).unwrap();
        let raw = Field::from_fn(&grid, grid.components(), |x, out| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = (3.0 * x[0] + c as f64).sin() * (1.0 + x[1] * x[1]) + x[2];
            }
        });
        for f in [u, raw] {
            let back = domain.to_physical(&domain.to_spectral(&f).unwrap()).unwrap();
            let scale = f.max_abs().max(1.0);
            assert!(max_diff(&f, &back) < 1e-12 * scale, "grid {i}");
        }
    }
}

#[test]
fn parseval_matches_quadrature() {
    for (i, grid) in grids().into_iter().enumerate() {
        let domain = Domain::new(&grid);
        let u = random_smooth_field(&domain, grid.components(), 10 + i as u64, &SmoothSpectrum::default()).unwrap();
        let phys = u.l2_norm().powi(2);
        let spec = domain.to_spectral(&u).unwrap().energy();
        assert!((phys - spec).abs() <= 1e-10 * phys, "grid {i}: {phys} vs {spec}");
    }
}

#[test]
fn constant_field_has_only_zero_mode() {
    for grid in grids() {
        let domain = Domain::new(&grid);
        let value: Vec<f64> = (0..grid.components()).map(|c| 1.5 - c as f64).collect();
        let s = domain.to_spectral(&Field::constant(&grid, &value)).unwrap();
        let zero = domain.find_mode(&[0, 0, 0]).unwrap();
        for c in 0..grid.components() {
            for (i, z) in s.component(c).iter().enumerate() {
                let expect = if i == zero { value[c] } else { 0.0 };
                assert!((z.re - expect).abs() < 1e-13 && z.im.abs() < 1e-13);
            }
        }
    }
}

#[test]
fn laplacian_of_constant_and_sine() {
    let grid = Grid::new(1, 1, &[32], &[2.0 * PI], Boundary::Periodic).unwrap();
    let domain = Domain::new(&grid);
    let c = Field::constant(&grid, &[3.0]);
    assert!(domain.laplacian(&c).unwrap().max_abs() < 1e-13);
    let s = Field::from_fn(&grid, 1, |x, o| o[0] = x[0].sin());
    let lap = domain.laplacian(&s).unwrap();
    assert!(max_diff(&lap, &s.scaled(-1.0)) < 1e-13);
    let bi = domain.bilaplacian(&s).unwrap();
    // roundoff in the top modes is amplified by |k|^4
    assert!(max_diff(&bi, &s) < 1e-10);
}

#[test]
fn divergence_of_gradient_is_laplacian() {
    for (i, grid) in grids().into_iter().enumerate() {
        let domain = Domain::new(&grid);
        let shape = SmoothSpectrum {
            max_mode: Some(3),
            ..Default::default()
        };
        let u = random_smooth_field(&domain, grid.components(), 20 + i as u64, &shape).unwrap();
        let m = grid.components();
        let grads = domain.gradient(&u).unwrap();
        let lap = domain.laplacian(&u).unwrap();
        let div = domain.divergence(&grads).unwrap();
        assert_eq!(div.components(), m);
        let scale = lap.max_abs().max(1.0);
        assert!(max_diff(&div, &lap) < 1e-12 * scale, "grid {i}");
    }
}

#[test]
fn neumann_gradient_of_cosine_is_analytic_sine() {
    let len = 3.0;
    let grid = Grid::new(1, 1, &[24], &[len], Boundary::NeumannCosine).unwrap();
    let domain = Domain::new(&grid);
    let k = 2.0 * PI / len;
    let u = Field::from_fn(&grid, 1, |x, o| o[0] = (k * x[0]).cos());
    let g = &domain.gradient(&u).unwrap()[0];
    let expect = Field::from_fn(&grid, 1, |x, o| o[0] = -k * (k * x[0]).sin());
    assert!(max_diff(g, &expect) < 1e-12);
}

#[test]
fn dealias_keeps_low_and_drops_high_modes() {
    let grid = Grid::new(1, 1, &[48], &[2.0 * PI], Boundary::Periodic).unwrap();
    let domain = Domain::new(&grid);
    let low = Field::from_fn(&grid, 1, |x, o| o[0] = (3.0 * x[0]).cos() + (16.0 * x[0]).sin());
    assert!(max_diff(&domain.dealias_field(&low).unwrap(), &low) < 1e-13);
    let high = Field::from_fn(&grid, 1, |x, o| o[0] = (17.0 * x[0]).cos());
    assert!(domain.dealias_field(&high).unwrap().max_abs() < 1e-13);
}

#[test]
fn cubic_of_sine_agrees_between_policies() {
    let grid = Grid::new(1, 1, &[64], &[2.0 * PI], Boundary::Periodic).unwrap();
    let domain = Domain::new(&grid);
    let u = domain
        .to_spectral(&Field::from_fn(&grid, 1, |x, o| o[0] = x[0].sin()))
        .unwrap();
    let cube = |v: &[f64], o: &mut [f64]| o[0] = v[0] * v[0] * v[0];
    let a = domain.pointwise(Dealiasing::TwoThirds, &[&u], 1, cube).unwrap();
    let b = domain.pointwise(Dealiasing::Padded, &[&u], 1, cube).unwrap();
    let b = domain.dealias(&b).unwrap();
    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
        assert!((x - y).norm() < 1e-12);
    }
    // sin^3 = (3 sin x - sin 3x) / 4
    let exact = Field::from_fn(&grid, 1, |x, o| o[0] = (3.0 * x[0].sin() - (3.0 * x[0]).sin()) / 4.0);
    assert!(max_diff(&domain.to_physical(&a).unwrap(), &exact) < 1e-13);
}

#[test]
fn padded_products_are_exact_for_resolved_cubics() {
    // modes up to 10 on n = 32: the cube reaches mode 30 and aliases on the
    // base grid, but not on the padded one
    let grid = Grid::new(1, 1, &[32], &[2.0 * PI], Boundary::Periodic).unwrap();
    let domain = Domain::new(&grid);
    let f = |x: f64| (10.0 * x).cos() + 0.5 * (3.0 * x).sin();
    let u = domain
        .to_spectral(&Field::from_fn(&grid, 1, |x, o| o[0] = f(x[0])))
        .unwrap();
    let s = domain
        .pointwise(Dealiasing::Padded, &[&u], 1, |v, o| o[0] = v[0] * v[0] * v[0])
        .unwrap();
    // oracle: exact Fourier coefficients of the cube by fine quadrature
    let fine = 256;
    for q in 0..16i64 {
        let (mut re, mut im) = (0.0, 0.0);
        for j in 0..fine {
            let x = 2.0 * PI * j as f64 / fine as f64;
            let v = f(x).powi(3);
            re += v * (q as f64 * x).cos() / fine as f64;
            im -= v * (q as f64 * x).sin() / fine as f64;
        }
        let z = s.component(0)[domain.find_mode(&[q]).unwrap()];
        assert!((z.re - re).abs() < 1e-13 && (z.im - im).abs() < 1e-13, "mode {q}");
    }
}

// Analytic trig fields for the product-rule identities.
struct Trig {
    amp: [f64; 3],
    k: [[f64; 2]; 3],
    phase: [f64; 3],
}

impl Trig {
    fn value(&self, x: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|c| self.amp[c] * (self.k[c][0] * x[0] + self.k[c][1] * x[1] + self.phase[c]).sin())
    }
    fn grad(&self, x: &[f64; 3]) -> [[f64; 3]; 2] {
        std::array::from_fn(|j| {
            std::array::from_fn(|c| {
                self.amp[c] * self.k[c][j] * (self.k[c][0] * x[0] + self.k[c][1] * x[1] + self.phase[c]).cos()
            })
        })
    }
    fn lap(&self, x: &[f64; 3]) -> [f64; 3] {
        let v = self.value(x);
        std::array::from_fn(|c| -(self.k[c][0].powi(2) + self.k[c][1].powi(2)) * v[c])
    }
}

#[test]
fn product_rule_identities_on_resolved_fields() {
    let len = 2.0 * PI;
    let grid = Grid::new(2, 3, &[48, 48], &[len, len], Boundary::Periodic).unwrap();
    let domain = Domain::new(&grid);
    let v = Trig {
        amp: [1.0, 0.7, -0.4],
        k: [[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]],
        phase: [0.1, 0.5, 1.3],
    };
    let w = Trig {
        amp: [0.3, -1.2, 0.8],
        k: [[2.0, 1.0], [1.0, 0.0], [0.0, 3.0]],
        phase: [0.0, 2.0, -0.7],
    };
    let v2w = Field::from_fn(&grid, 3, |x, o| {
        let a = v.value(x);
        let b = w.value(x);
        let r2: f64 = a.iter().map(|t| t * t).sum();
        for c in 0..3 {
            o[c] = r2 * b[c];
        }
    });
    let grad = domain.gradient(&v2w).unwrap();
    let lap = domain.laplacian(&v2w).unwrap();
    let np = grid.points();
    let mut worst: f64 = 0.0;
    for p in 0..np {
        let x = grid.point(p);
        let (a, b, ga, gb, la, lb) = (v.value(&x), w.value(&x), v.grad(&x), w.grad(&x), v.lap(&x), w.lap(&x));
        let r2: f64 = a.iter().map(|t| t * t).sum();
        let vdv: [f64; 2] = std::array::from_fn(|j| (0..3).map(|c| a[c] * ga[j][c]).sum());
        for j in 0..2 {
            for c in 0..3 {
                let rhs = 2.0 * b[c] * vdv[j] + r2 * gb[j][c];
                worst = worst.max((grad[j].values()[c * np + p] - rhs).abs());
            }
        }
        let grad_sq: f64 = (0..2).flat_map(|j| (0..3).map(move |c| (j, c))).map(|(j, c)| ga[j][c].powi(2)).sum();
        let v_lap: f64 = (0..3).map(|c| a[c] * la[c]).sum();
        for c in 0..3 {
            let mixed: f64 = (0..2).map(|j| gb[j][c] * vdv[j]).sum();
            let rhs = 2.0 * grad_sq * b[c] + 2.0 * v_lap * b[c] + 4.0 * mixed + r2 * lb[c];
            worst = worst.max((lap.values()[c * np + p] - rhs).abs());
        }
    }
    assert!(worst < 1e-8, "worst defect {worst}");
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = Grid::new(1, 1, &[16], &[1.0], Boundary::Periodic).unwrap();
    let b = Grid::new(1, 1, &[32], &[1.0], Boundary::Periodic).unwrap();
    let domain = Domain::new(&a);
    assert!(domain.to_spectral(&Field::zeros(&b, 1)).is_err());
    assert!(Field::from_values(&a, 1, vec![0.0; 15]).is_err());
}
