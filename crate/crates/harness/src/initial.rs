use llbar_core::random::{random_smooth_field, SmoothSpectrum};
use llbar_core::{Boundary, Domain, Field};

use crate::config::InitialSpec;
use crate::error::Result;

/// Deterministic initial datum on `domain`'s grid.
pub fn seeded_initial_field(spec: &InitialSpec, domain: &Domain, seed: u64) -> Result<Field> {
    let grid = domain.grid();
    let m = grid.components();
    let field = match spec {
        InitialSpec::Random {
            decay,
            amplitude,
            max_mode,
        } => {
            let shape = SmoothSpectrum {
                decay: *decay,
                max_mode: *max_mode,
                amplitude: *amplitude,
            };
            random_smooth_field(domain, m, seed, &shape)?
        }
        InitialSpec::Constant { value } => Field::constant(grid, value),
        InitialSpec::Modes { modes } => {
            let d = grid.dim();
            let units: Vec<f64> = (0..d).map(|a| grid.wavenumber_unit(a)).collect();
            Field::from_fn(grid, m, |x, out| {
                for md in modes {
                    let v = match grid.boundary() {
                        Boundary::Periodic => {
                            let phase: f64 = (0..d).map(|a| md.mode[a] as f64 * units[a] * x[a]).sum();
                            (phase + md.phase).cos()
                        }
                        Boundary::NeumannCosine => (0..d)
                            .map(|a| (md.mode[a] as f64 * units[a] * x[a]).cos())
                            .product(),
                    };
                    out[md.component] += md.amplitude * v;
                }
            })
        }
    };
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModeSpec;
    use llbar_core::Grid;

    fn domain(m: usize, boundary: Boundary) -> Domain {
        Domain::new(&Grid::new(2, m, &[16, 12], &[2.0, 3.0], boundary).unwrap())
    }

    #[test]
    fn constant_spec_gives_constant_field() {
        let d = domain(3, Boundary::Periodic);
        let u = seeded_initial_field(&InitialSpec::Constant { value: vec![0.1, -0.2, 0.3] }, &d, 0).unwrap();
        for p in 0..u.points() {
            assert_eq!(u.at(p), [0.1, -0.2, 0.3]);
        }
    }

    #[test]
    fn same_seed_same_field_and_exact_amplitude() {
        let d = domain(1, Boundary::NeumannCosine);
        let spec = InitialSpec::Random {
            decay: 1.5,
            amplitude: Some(3.25),
            max_mode: None,
        };
        let a = seeded_initial_field(&spec, &d, 42).unwrap();
        let b = seeded_initial_field(&spec, &d, 42).unwrap();
        let c = seeded_initial_field(&spec, &d, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a.l2_norm() / 3.25 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mode_list_is_a_trig_sum() {
        let d = domain(1, Boundary::Periodic);
        let spec = InitialSpec::Modes {
            modes: vec![ModeSpec {
                component: 0,
                mode: vec![1, 2],
                amplitude: 0.5,
                phase: 0.0,
            }],
        };
        let u = seeded_initial_field(&spec, &d, 0).unwrap();
        // ||0.5 cos(k . x)||^2 = 0.25 * |O| / 2
        assert!((u.l2_norm().powi(2) - 0.25 * 6.0 / 2.0).abs() < 1e-12);
        let s = d.to_spectral(&u).unwrap();
        let nonzero = s.coeffs().iter().filter(|z| z.norm() > 1e-12).count();
        assert_eq!(nonzero, 2);
    }
}
