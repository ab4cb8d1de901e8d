//! Seeded random smooth fields.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::spectral::{Domain, Field, MAX_DIM};

/// Shape of a random spectrum: coefficient magnitudes scale like
/// `(1 + |k|^2)^(-decay)`, modes with some `|q_i| > max_mode` are empty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothSpectrum {
    pub decay: f64,
    pub max_mode: Option<i64>,
    /// Exact L2 norm of the result; left unnormalised when `None`.
    pub amplitude: Option<f64>,
}

impl Default for SmoothSpectrum {
    fn default() -> Self {
        Self {
            decay: 2.0,
            max_mode: None,
            amplitude: None,
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_smooth_field(
    domain: &Domain,
    components: usize,
    seed: u64,
    shape: &SmoothSpectrum,
) -> Result<Field> {
    random_smooth_field_with(domain, components, &mut seeded_rng(seed), shape)
}

pub fn random_smooth_field_with<R: Rng + ?Sized>(
    domain: &Domain,
    components: usize,
    rng: &mut R,
    shape: &SmoothSpectrum,
) -> Result<Field> {
    let nm = domain.modes();
    let tshape = domain.shape();
    let admitted: Vec<bool> = (0..nm)
        .map(|i| {
            let q = domain.mode_index(i);
            (0..MAX_DIM).all(|a| {
                let nyquist = tshape[a] > 1 && 2 * q[a].unsigned_abs() as usize >= tshape[a];
                let capped = shape.max_mode.is_some_and(|mm| q[a].abs() > mm);
                !nyquist && !capped
            })
        })
        .collect();
    let mut s = crate::spectral::Spectrum::zeros(domain, components);
    for c in 0..components {
        for (i, z) in s.component_mut(c).iter_mut().enumerate() {
            let re: f64 = rng.gen_range(-1.0..=1.0);
            let im: f64 = rng.gen_range(-1.0..=1.0);
            if admitted[i] {
                let weight = (1.0 + domain.k2()[i]).powf(-shape.decay);
                *z = Complex64::new(re, im) * weight;
            }
        }
    }
    // the real part of a non-Hermitian spectrum is a valid real field; the
    // second pass restores a proper (cosine-consistent) spectrum and the cap
    let field = domain.to_physical(&s)?;
    let mut s = domain.to_spectral(&field)?;
    for c in 0..components {
        for (z, ok) in s.component_mut(c).iter_mut().zip(&admitted) {
            if !ok {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
    let mut field = domain.to_physical(&s)?;
    if let Some(amp) = shape.amplitude {
        let norm = field.l2_norm();
        if norm > 0.0 {
            field = field.scaled(amp / norm);
        }
    }
    Ok(field)
}
