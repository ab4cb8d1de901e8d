//! Terms of the fourth-order evolution
//!
//! ```text
//! du/dt = sigma (H + Phi_d(u)) - eps Lap (H + Phi_d(u)) - gamma u x (H + Phi_d(u)) + R(u) + S(u)
//! H     = Lap u + kappa1 u - kappa2 |u|^2 u + Phi_a(u)
//! ```
//!
//! with `m = 3` (Landau-Lifshitz-Baryakhtar) or `m = 1` (convective
//! Cahn-Hilliard/Allen-Cahn, where gyration, anisotropy and demagnetisation
//! are switched off).
//!
//! Every term is evaluated in spectral space. Derivatives are applied as
//! multipliers, products are formed pointwise on the grid and dealiased by
//! the model's [`Dealiasing`] policy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Boundary, Dealiasing, Domain, Field, Grid, Spectrum, MAX_DIM};

/// One travelling-wave component `amplitude * cos(k . x + phase)` of a
/// current density; `k_i = mode_i` times the grid's wavenumber unit.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentWave {
    pub amplitude: [f64; 3],
    pub mode: [i64; 3],
    pub phase: f64,
}

/// Closed-form, time-independent current density `nu : O -> R^d`. Only the
/// first `d` components are used.
#[derive(Clone, Debug, PartialEq)]
pub enum Current {
    Constant([f64; 3]),
    Waves(Vec<CurrentWave>),
}

impl Default for Current {
    fn default() -> Self {
        Current::Constant([0.0; 3])
    }
}

impl Current {
    pub fn is_zero(&self) -> bool {
        match self {
            Current::Constant(v) => v.iter().all(|c| *c == 0.0),
            Current::Waves(w) => w.iter().all(|w| w.amplitude.iter().all(|c| *c == 0.0)),
        }
    }

    fn wavevector(grid: &Grid, mode: &[i64; 3]) -> [f64; 3] {
        core::array::from_fn(|a| {
            if a < grid.dim() {
                mode[a] as f64 * grid.wavenumber_unit(a)
            } else {
                0.0
            }
        })
    }

    pub fn eval(&self, grid: &Grid, x: &[f64; MAX_DIM]) -> [f64; 3] {
        let mut v = match self {
            Current::Constant(c) => *c,
            Current::Waves(waves) => {
                let mut v = [0.0; 3];
                for w in waves {
                    let k = Self::wavevector(grid, &w.mode);
                    let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + w.phase;
                    let c = arg.cos();
                    for i in 0..3 {
                        v[i] += w.amplitude[i] * c;
                    }
                }
                v
            }
        };
        for c in v.iter_mut().skip(grid.dim()) {
            *c = 0.0;
        }
        v
    }

    /// `J[i][j] = d nu_i / d x_j`.
    pub fn jacobian(&self, grid: &Grid, x: &[f64; MAX_DIM]) -> [[f64; 3]; 3] {
        let mut jac = [[0.0; 3]; 3];
        if let Current::Waves(waves) = self {
            for w in waves {
                let k = Self::wavevector(grid, &w.mode);
                let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + w.phase;
                let s = -arg.sin();
                for i in 0..grid.dim() {
                    for j in 0..grid.dim() {
                        jac[i][j] += w.amplitude[i] * k[j] * s;
                    }
                }
            }
        }
        jac
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Source {
    #[default]
    None,
    /// `S(u) = u + (a . u) u`.
    AffineQuadratic([f64; 3]),
}

/// Coefficients of the evolution equation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub sigma: f64,
    pub eps: f64,
    pub gamma: f64,
    pub kappa1: f64,
    /// Zero only for purely linear test configurations.
    pub kappa2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub easy_axis: [f64; 3],
    pub beta1: f64,
    pub beta2: f64,
    pub chi: f64,
    pub current: Current,
    pub source: Source,
    pub demag: bool,
    pub anisotropy: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            eps: 0.1,
            gamma: 0.0,
            kappa1: 1.0,
            kappa2: 1.0,
            lambda1: 0.0,
            lambda2: 0.0,
            easy_axis: [0.0, 0.0, 1.0],
            beta1: 0.0,
            beta2: 0.0,
            chi: 0.0,
            current: Current::default(),
            source: Source::None,
            demag: false,
            anisotropy: false,
        }
    }
}

impl ModelParams {
    /// Pure gradient flow of the Ginzburg-Landau energy: no transport, no
    /// source, no anisotropy or demagnetisation.
    pub fn gradient_flow(sigma: f64, eps: f64, kappa1: f64, kappa2: f64) -> Self {
        Self {
            sigma,
            eps,
            kappa1,
            kappa2,
            ..Self::default()
        }
    }

    /// Checks every coefficient constraint for a field with `components`
    /// components and returns the parameters with the scalar-case switches
    /// applied (`m = 1` disables anisotropy and demagnetisation).
    pub fn validated(mut self, components: usize) -> Result<Self> {
        let finite = [
            self.sigma,
            self.eps,
            self.gamma,
            self.kappa1,
            self.kappa2,
            self.lambda1,
            self.lambda2,
            self.beta1,
            self.beta2,
            self.chi,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("coefficients must be finite".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Model(format!("sigma = {} must be positive", self.sigma)));
        }
        if self.eps < 0.0 {
            return Err(Error::Model(format!("eps = {} must be non-negative", self.eps)));
        }
        if self.gamma < 0.0 {
            return Err(Error::Model(format!("gamma = {} must be non-negative", self.gamma)));
        }
        if self.kappa2 < 0.0 {
            return Err(Error::Model(format!(
                "kappa2 = {} must be non-negative",
                self.kappa2
            )));
        }
        if self.lambda2 < 0.0 {
            return Err(Error::Model(format!(
                "lambda2 = {} must be non-negative",
                self.lambda2
            )));
        }
        let e2: f64 = self.easy_axis.iter().map(|c| c * c).sum();
        if (e2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::Model(format!(
                "easy axis {:?} is not a unit vector",
                self.easy_axis
            )));
        }
        if self.chi != 0.0 && 2.0 * self.chi * self.chi >= self.kappa2 * self.sigma * self.sigma {
            return Err(Error::Model(format!(
                "convection smallness condition 2 chi^2 < kappa2 sigma^2 violated: 2*{}^2 >= {}*{}^2",
                self.chi, self.kappa2, self.sigma
            )));
        }
        match components {
            1 => {
                if self.gamma != 0.0 {
                    return Err(Error::Model(
                        "scalar fields (m = 1) require gamma = 0".into(),
                    ));
                }
                self.anisotropy = false;
                self.demag = false;
            }
            3 => {}
            m => return Err(Error::Model(format!("component count {m} must be 1 or 3"))),
        }
        Ok(self)
    }

    /// Transport, source, anisotropy and demagnetisation all absent.
    pub fn is_gradient_flow(&self) -> bool {
        let no_transport = self.current.is_zero()
            || (self.beta1 == 0.0 && self.beta2 == 0.0 && self.chi == 0.0);
        no_transport
            && self.source == Source::None
            && !self.demag
            && !(self.anisotropy && (self.lambda1 != 0.0 || self.lambda2 != 0.0))
    }
}

/// Model parameters bound to a grid, with the sampled current density.
#[derive(Clone, Debug)]
pub struct Model {
    domain: Domain,
    params: ModelParams,
    dealiasing: Dealiasing,
    current: Spectrum,
    /// Unit current direction, used by the scalar quadratic flux closure.
    current_dir: Spectrum,
    nu_infinity: f64,
}

impl Model {
    pub fn new(grid: &Grid, params: ModelParams, dealiasing: Dealiasing) -> Result<Self> {
        let params = params.validated(grid.components())?;
        if params.demag && grid.boundary() != Boundary::Periodic {
            return Err(Error::Model(
                "the demagnetising field is implemented on periodic grids only".into(),
            ));
        }
        let domain = Domain::new(grid);
        let d = grid.dim();
        let nu = Field::from_fn(grid, d, |x, out| {
            let v = params.current.eval(grid, x);
            out.copy_from_slice(&v[..d]);
        });
        let dir = Field::from_fn(grid, d, |x, out| {
            let v = params.current.eval(grid, x);
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 1e-300 {
                for i in 0..d {
                    out[i] = v[i] / norm;
                }
            }
        });
        let current = domain.to_spectral(&nu)?;
        let current_dir = domain.to_spectral(&dir)?;
        let nu_infinity = {
            let grad: f64 = (0..d)
                .map(|a| Ok(domain.derivative(&current, a)?.energy()))
                .sum::<Result<f64>>()?;
            current.energy() + grad + domain.laplacian_spectrum(&current)?.energy()
        };
        Ok(Self {
            domain,
            params,
            dealiasing,
            current,
            current_dir,
            nu_infinity,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn grid(&self) -> &Grid {
        self.domain.grid()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dealiasing(&self) -> Dealiasing {
        self.dealiasing
    }

    /// Squared H^2 norm of the sampled current density.
    pub fn nu_infinity(&self) -> f64 {
        self.nu_infinity
    }

    /// Same grid and dealiasing with different coefficients.
    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        Self::new(self.grid(), params, self.dealiasing)
    }

    fn components(&self) -> usize {
        self.grid().components()
    }

    fn check_input(&self, u: &Spectrum) -> Result<()> {
        if u.components() != self.components() {
            return Err(Error::Shape(format!(
                "field has {} components, model expects {}",
                u.components(),
                self.components()
            )));
        }
        Ok(())
    }

    fn require_vector(&self, what: &str) -> Result<()> {
        if self.components() != 3 {
            return Err(Error::Model(format!("{what} is defined for m = 3 only")));
        }
        Ok(())
    }

    fn field_op(&self, u: &Field, op: impl Fn(&Self, &Spectrum) -> Result<Spectrum>) -> Result<Field> {
        let s = self.domain.to_spectral(u)?;
        self.domain.to_physical(&op(self, &s)?)
    }

    /// `Lap u + kappa1 u - kappa2 |u|^2 u`.
    pub fn exchange_gl_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        self.check_input(u)?;
        let p = &self.params;
        let mut out = self.domain.apply_symbol(u, |k2| p.kappa1 - k2)?;
        if p.kappa2 != 0.0 {
            let m = self.components();
            let cubic = self.domain.pointwise(self.dealiasing, &[u], m, |v, o| {
                let r2: f64 = v.iter().map(|c| c * c).sum();
                for (oc, vc) in o.iter_mut().zip(v) {
                    *oc = r2 * vc;
                }
            })?;
            out.add_scaled(-p.kappa2, &cubic);
        }
        Ok(out)
    }

    /// `lambda1 (e . u) e - lambda2 (e . u)^3 e`.
    pub fn anisotropy_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        self.check_input(u)?;
        self.require_vector("the anisotropy field")?;
        let p = &self.params;
        let e = p.easy_axis;
        let nm = self.domain.modes();
        let mut out = Spectrum::zeros(&self.domain, 3).with_parity(u.parity());
        for i in 0..nm {
            let dot = (0..3)
                .map(|c| u.component(c)[i] * e[c])
                .fold(Complex64::new(0.0, 0.0), |a, b| a + b);
            for c in 0..3 {
                out.component_mut(c)[i] = dot * (p.lambda1 * e[c]);
            }
        }
        if p.lambda2 != 0.0 {
            let cubic = self.domain.pointwise(self.dealiasing, &[u], 3, |v, o| {
                let a = v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
                let a3 = a * a * a;
                for c in 0..3 {
                    o[c] = a3 * e[c];
                }
            })?;
            out.add_scaled(-p.lambda2, &cubic);
        }
        Ok(out)
    }

    /// Longitudinal projection `-k (k . u_k) / |k|^2` with the zero mode set
    /// to zero. Wavevectors of lower-dimensional grids are embedded in R^3.
    pub fn demag_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        self.check_input(u)?;
        self.require_vector("the demagnetising field")?;
        if self.grid().boundary() != Boundary::Periodic {
            return Err(Error::Model(
                "the demagnetising field is implemented on periodic grids only".into(),
            ));
        }
        let nm = self.domain.modes();
        let mut out = Spectrum::zeros(&self.domain, 3).with_parity(u.parity());
        for i in 0..nm {
            let k2 = self.domain.k2()[i];
            if k2 == 0.0 {
                continue;
            }
            let k = self.domain.wavevector(i);
            let dot = (0..3)
                .map(|c| u.component(c)[i] * k[c])
                .fold(Complex64::new(0.0, 0.0), |a, b| a + b);
            for c in 0..3 {
                out.component_mut(c)[i] = -dot * (k[c] / k2);
            }
        }
        Ok(out)
    }

    /// `H = Psi(u) + Phi_a(u)`; the anisotropy part only when enabled.
    pub fn effective_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        let mut h = self.exchange_gl_spectrum(u)?;
        if self.params.anisotropy {
            h.add_scaled(1.0, &self.anisotropy_spectrum(u)?);
        }
        Ok(h)
    }

    /// `beta1 (nu . grad) u + beta2 u x (nu . grad) u + chi C(u)` where the
    /// quadratic flux is `C(u)_i = d_j (u_i u_j)` for vector fields and
    /// `div(u^2 nu/|nu|)` for scalar fields.
    pub fn convective_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        self.check_input(u)?;
        let p = &self.params;
        let m = self.components();
        let d = self.grid().dim();
        let mut out = Spectrum::zeros(&self.domain, m);
        if p.current.is_zero() {
            return Ok(out);
        }
        let beta2 = if m == 3 { p.beta2 } else { 0.0 };
        if p.beta1 != 0.0 || beta2 != 0.0 {
            let grads = (0..d)
                .map(|a| self.domain.derivative(u, a))
                .collect::<Result<Vec<_>>>()?;
            let mut inputs: Vec<&Spectrum> = vec![&self.current, u];
            inputs.extend(grads.iter());
            let beta1 = p.beta1;
            let term = self.domain.pointwise(self.dealiasing, &inputs, m, |v, o| {
                let (nu, rest) = v.split_at(d);
                let (uu, grad) = rest.split_at(m);
                let mut adv = [0.0; 3];
                for j in 0..d {
                    for c in 0..m {
                        adv[c] += nu[j] * grad[j * m + c];
                    }
                }
                for c in 0..m {
                    o[c] = beta1 * adv[c];
                }
                if beta2 != 0.0 {
                    let x = cross([uu[0], uu[1], uu[2]], adv);
                    for c in 0..3 {
                        o[c] += beta2 * x[c];
                    }
                }
            })?;
            out.add_scaled(1.0, &term);
        }
        if p.chi != 0.0 {
            let fluxes = (0..d)
                .map(|j| {
                    if m == 3 {
                        self.domain.pointwise(self.dealiasing, &[u], 3, |v, o| {
                            for c in 0..3 {
                                o[c] = v[c] * v[j];
                            }
                        })
                    } else {
                        self.domain
                            .pointwise(self.dealiasing, &[u, &self.current_dir], 1, |v, o| {
                                o[0] = v[0] * v[0] * v[1 + j];
                            })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let div = self.domain.divergence_spectrum(&fluxes)?;
            out.add_scaled(p.chi, &self.domain.to_even(&div)?);
        }
        Ok(out)
    }

    /// `S(u)`.
    pub fn source_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        self.check_input(u)?;
        let m = self.components();
        match self.params.source {
            Source::None => Ok(Spectrum::zeros(&self.domain, m)),
            Source::AffineQuadratic(a) => {
                let quad = self.domain.pointwise(self.dealiasing, &[u], m, |v, o| {
                    let dot: f64 = v.iter().zip(&a).map(|(x, y)| x * y).sum();
                    for (oc, vc) in o.iter_mut().zip(v) {
                        *oc = dot * vc;
                    }
                })?;
                let mut out = u.clone().with_parity(Default::default());
                out.add_scaled(1.0, &quad);
                Ok(out)
            }
        }
    }

    /// Full right-hand side of the evolution equation.
    pub fn rhs_spectrum(&self, u: &Spectrum) -> Result<Spectrum> {
        let p = &self.params;
        let mut g = self.effective_spectrum(u)?;
        if p.demag {
            g.add_scaled(1.0, &self.demag_spectrum(u)?);
        }
        let mut out = self.domain.apply_symbol(&g, |k2| p.sigma + p.eps * k2)?;
        if p.gamma != 0.0 && self.components() == 3 {
            let gyro = self.domain.pointwise(self.dealiasing, &[u, &g], 3, |v, o| {
                o.copy_from_slice(&cross([v[0], v[1], v[2]], [v[3], v[4], v[5]]));
            })?;
            out.add_scaled(-p.gamma, &gyro);
        }
        out.add_scaled(1.0, &self.convective_spectrum(u)?);
        out.add_scaled(1.0, &self.source_spectrum(u)?);
        Ok(out)
    }

    pub fn exchange_gl_field(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::exchange_gl_spectrum)
    }

    pub fn anisotropy_field(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::anisotropy_spectrum)
    }

    pub fn demag_field(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::demag_spectrum)
    }

    pub fn effective_field(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::effective_spectrum)
    }

    pub fn convective_term(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::convective_spectrum)
    }

    pub fn source_term(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::source_spectrum)
    }

    pub fn rhs(&self, u: &Field) -> Result<Field> {
        self.field_op(u, Self::rhs_spectrum)
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
