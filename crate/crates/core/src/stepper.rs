//! Implicit-explicit time stepping.
//!
//! The stiff dissipative symbol `s(k) = -sigma |k|^2 - eps |k|^4` is treated
//! implicitly, so the implicit solve is a diagonal division by a factor that
//! is at least one. Everything else, including the sign-indefinite
//! `kappa1` terms, goes into the explicit part `N(u) = rhs(u) - s u`.

use alloc::format;


use crate::error::{Error, Result};
use crate::model::{Model, ModelParams};
use crate::spectral::{Field, Spectrum};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// First order: backward Euler on `s`, forward Euler on `N`.
    ImexEuler,
    /// Second order: BDF2 on `s`, linear extrapolation of `N`.
    #[default]
    ImexBdf2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub record_every: usize,
    pub max_field_norm: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::ImexBdf2,
            record_every: 1,
            max_field_norm: 1e8,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Stepper(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt * (1.0 - 1e-12)) {
            return Err(Error::Stepper(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Stepper("record_every must be at least 1".into()));
        }
        if !(self.max_field_norm > 0.0) {
            return Err(Error::Stepper("max_field_norm must be positive".into()));
        }
        Ok(())
    }

    /// Number of fixed steps covering `[0, t_end]`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// `s(k) = -sigma |k|^2 - eps |k|^4` for a wavevector `k`.
pub fn implicit_symbol(k: &[f64], p: &ModelParams) -> f64 {
    implicit_symbol_k2(k.iter().map(|c| c * c).sum(), p)
}

pub(crate) fn implicit_symbol_k2(k2: f64, p: &ModelParams) -> f64 {
    -p.sigma * k2 - p.eps * k2 * k2
}

/// Stateful integrator; BDF2 keeps the previous state and explicit term.
#[derive(Clone, Debug)]
pub struct Stepper<'a> {
    model: &'a Model,
    cfg: StepperConfig,
    history: Option<(Spectrum, Spectrum)>,
    steps_taken: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a Model, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            model,
            cfg,
            history: None,
            steps_taken: 0,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// `N(u) = rhs(u) - s u`.
    pub fn explicit_part(&self, u: &Spectrum) -> Result<Spectrum> {
        let p = self.model.params();
        let mut n = self.model.rhs_spectrum(u)?;
        let su = self
            .model
            .domain()
            .apply_symbol(u, |k2| implicit_symbol_k2(k2, p))?;
        n.add_scaled(-1.0, &su);
        Ok(n)
    }

    pub fn advance(&mut self, u: &Spectrum) -> Result<Spectrum> {
        let p = self.model.params();
        let dt = self.cfg.dt;
        let n_now = self.explicit_part(u)?;
        let domain = self.model.domain();
        let next = match (self.cfg.scheme, self.history.take()) {
            (Scheme::ImexBdf2, Some((u_prev, n_prev))) => {
                let mut num = u.scaled(4.0);
                num.add_scaled(-1.0, &u_prev);
                num.add_scaled(4.0 * dt, &n_now);
                num.add_scaled(-2.0 * dt, &n_prev);
                domain.apply_symbol(&num, |k2| 1.0 / (3.0 - 2.0 * dt * implicit_symbol_k2(k2, p)))?
            }
            _ => {
                let mut num = u.clone();
                num.add_scaled(dt, &n_now);
                domain.apply_symbol(&num, |k2| 1.0 / (1.0 - dt * implicit_symbol_k2(k2, p)))?
            }
        };
        self.steps_taken += 1;
        let norm = next.energy().sqrt();
        if !next.is_finite() || !norm.is_finite() || norm > self.cfg.max_field_norm {
            return Err(Error::BlowUp {
                step: self.steps_taken,
                time: self.steps_taken as f64 * dt,
                norm,
            });
        }
        if self.cfg.scheme == Scheme::ImexBdf2 {
            self.history = Some((u.clone(), n_now));
        }
        Ok(next.with_parity(Default::default()))
    }
}

/// One first-order IMEX step from `u`, independent of any history.
pub fn step(u: &Field, model: &Model, cfg: &StepperConfig) -> Result<Field> {
    let cfg = StepperConfig {
        scheme: Scheme::ImexEuler,
        ..*cfg
    };
    let mut stepper = Stepper::new(model, cfg)?;
    let s = model.domain().to_spectral(u)?;
    model.domain().to_physical(&stepper.advance(&s)?)
}

/// Advances `u0` to `t_end`. The observer sees `(t, u)` at `t = 0` and after
/// every `record_every` steps.
pub fn integrate(
    u0: &Field,
    model: &Model,
    cfg: &StepperConfig,
    mut observer: impl FnMut(f64, &Field),
) -> Result<Field> {
    let mut stepper = Stepper::new(model, *cfg)?;
    let domain = model.domain();
    if !u0.is_finite() {
        return Err(Error::BlowUp {
            step: 0,
            time: 0.0,
            norm: f64::NAN,
        });
    }
    let mut u = domain.to_spectral(u0)?;
    observer(0.0, u0);
    let steps = cfg.steps();
    for i in 1..=steps {
        u = stepper.advance(&u)?;
        if i % cfg.record_every == 0 {
            observer(i as f64 * cfg.dt, &domain.to_physical(&u)?);
        }
    }
    domain.to_physical(&u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_examples() {
        let p = ModelParams::gradient_flow(1.0, 0.0, 1.0, 1.0);
        assert_eq!(implicit_symbol(&[0.0], &p), 0.0);
        assert_eq!(implicit_symbol(&[2.0], &p), -4.0);
        let p = ModelParams::gradient_flow(1.0, 0.1, 1.0, 1.0);
        assert!((implicit_symbol(&[0.0, 2.0], &p) + 5.6).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let ok = StepperConfig::default();
        assert!(ok.validate().is_ok());
        assert!(StepperConfig { dt: 0.0, ..ok }.validate().is_err());
        assert!(StepperConfig { t_end: 1e-4, ..ok }.validate().is_err());
        assert!(StepperConfig { record_every: 0, ..ok }.validate().is_err());
        assert_eq!(StepperConfig { dt: 0.1, t_end: 1.0, ..ok }.steps(), 10);
    }
}
