//! Low-mode Faedo-Galerkin reference solver.
//!
//! The solution is expanded in the first `N` eigenfunctions of the Laplacian
//! of the box (real Fourier modes for periodic boxes, cosine products for
//! Neumann boxes), sorted by eigenvalue. Linear terms act on the
//! coefficients exactly; nonlinear terms are sampled on a quadrature grid
//! oversampled four times beyond the highest retained mode, using closed-form
//! basis derivatives, and projected back. Nothing here goes through the FFT,
//! so the module doubles as an independent check of the pseudospectral path.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;


use crate::error::{Error, Result};
use crate::model::{cross, ModelParams, Source};
use crate::spectral::{Boundary, Field, Grid, MAX_DIM};

pub const MAX_GALERKIN_MODES: usize = 64;
const OVERSAMPLING: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisMode {
    pub mode: [i64; MAX_DIM],
    pub trig: Trig,
    /// Eigenvalue of `-Lap`.
    pub eigenvalue: f64,
}

/// Orthonormal eigenbasis together with its quadrature tables.
#[derive(Debug)]
pub struct GalerkinBasis {
    grid: Grid,
    modes: Vec<BasisMode>,
    points: Vec<[f64; MAX_DIM]>,
    weight: f64,
    /// `values[i * P + p]`.
    values: Vec<f64>,
    /// `grads[(i * d + j) * P + p]`.
    grads: Vec<f64>,
}

impl GalerkinBasis {
    /// First `n_modes` eigenfunctions of the box described by `grid` (its
    /// resolution is irrelevant).
    pub fn new(grid: &Grid, n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_GALERKIN_MODES {
            return Err(Error::Model(format!(
                "Galerkin mode count {n_modes} not in 1..={MAX_GALERKIN_MODES}"
            )));
        }
        let modes = lowest_modes(grid, n_modes);
        let d = grid.dim();
        let mut quad_n = [1usize; MAX_DIM];
        for (a, qn) in quad_n.iter_mut().enumerate().take(d) {
            let qmax = modes.iter().map(|m| m.mode[a].unsigned_abs() as usize).max().unwrap_or(0);
            *qn = (OVERSAMPLING * (qmax + 1)).max(8);
        }
        let total: usize = quad_n.iter().product();
        let points: Vec<[f64; MAX_DIM]> = (0..total)
            .map(|mut idx| {
                let mut x = [0.0; MAX_DIM];
                for a in (0..MAX_DIM).rev() {
                    let i = idx % quad_n[a];
                    idx /= quad_n[a];
                    if a < d {
                        let h = grid.lengths()[a] / quad_n[a] as f64;
                        x[a] = match grid.boundary() {
                            Boundary::Periodic => i as f64 * h,
                            Boundary::NeumannCosine => (i as f64 + 0.5) * h,
                        };
                    }
                }
                x
            })
            .collect();
        let weight = grid.volume() / total as f64;
        let mut values = vec![0.0; n_modes * total];
        let mut grads = vec![0.0; n_modes * d * total];
        for (i, mode) in modes.iter().enumerate() {
            for (p, x) in points.iter().enumerate() {
                let (v, g) = eval_mode(grid, mode, x);
                values[i * total + p] = v;
                for j in 0..d {
                    grads[(i * d + j) * total + p] = g[j];
                }
            }
        }
        let basis = Self {
            grid: *grid,
            modes,
            points,
            weight,
            values,
            grads,
        };
        basis.check_orthonormal()?;
        Ok(basis)
    }

    fn check_orthonormal(&self) -> Result<()> {
        let n = self.modes.len();
        let np = self.points.len();
        for i in 0..n {
            for j in 0..=i {
                let g: f64 = (0..np)
                    .map(|p| self.values[i * np + p] * self.values[j * np + p])
                    .sum::<f64>()
                    * self.weight;
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g - expect).abs() > 1e-12 {
                    return Err(Error::Model(format!(
                        "Galerkin basis not orthonormal: <e{i}, e{j}> = {g}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> &[BasisMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn quadrature_points(&self) -> usize {
        self.points.len()
    }

    /// Value of basis function `i` at `x`.
    pub fn eval(&self, i: usize, x: &[f64; MAX_DIM]) -> f64 {
        eval_mode(&self.grid, &self.modes[i], x).0
    }

    /// `out[c * N + i] = <f_c, e_i>` for samples `f[c * P + p]`.
    fn project(&self, f: &[f64], m: usize, out: &mut [f64]) {
        let n = self.len();
        let np = self.points.len();
        for c in 0..m {
            let fc = &f[c * np..(c + 1) * np];
            for i in 0..n {
                let e = &self.values[i * np..(i + 1) * np];
                out[c * n + i] = fc.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() * self.weight;
            }
        }
    }

    fn synthesize(&self, coeffs: &[f64], m: usize, out: &mut [f64]) {
        let n = self.len();
        let np = self.points.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..m {
            for i in 0..n {
                let a = coeffs[c * n + i];
                if a == 0.0 {
                    continue;
                }
                let e = &self.values[i * np..(i + 1) * np];
                for (o, v) in out[c * np..(c + 1) * np].iter_mut().zip(e) {
                    *o += a * v;
                }
            }
        }
    }

    /// `out[(j * m + c) * P + p] = d_j u_c`.
    fn synthesize_gradient(&self, coeffs: &[f64], m: usize, out: &mut [f64]) {
        let n = self.len();
        let d = self.grid.dim();
        let np = self.points.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d {
            for c in 0..m {
                let dst = &mut out[(j * m + c) * np..(j * m + c + 1) * np];
                for i in 0..n {
                    let a = coeffs[c * n + i];
                    if a == 0.0 {
                        continue;
                    }
                    let g = &self.grads[(i * d + j) * np..(i * d + j + 1) * np];
                    for (o, v) in dst.iter_mut().zip(g) {
                        *o += a * v;
                    }
                }
            }
        }
    }
}

fn wave_unit(grid: &Grid, axis: usize) -> f64 {
    match grid.boundary() {
        Boundary::Periodic => 2.0 * PI / grid.lengths()[axis],
        Boundary::NeumannCosine => PI / grid.lengths()[axis],
    }
}

fn lowest_modes(grid: &Grid, n_modes: usize) -> Vec<BasisMode> {
    let d = grid.dim();
    let periodic = grid.boundary() == Boundary::Periodic;
    let min_unit = (0..d).map(|a| wave_unit(grid, a)).fold(f64::INFINITY, f64::min);
    let mut reach: i64 = 1;
    loop {
        let mut modes = Vec::new();
        let lo = if periodic { -reach } else { 0 };
        let span = (reach - lo + 1) as usize;
        let count = span.pow(d as u32);
        for mut idx in 0..count {
            let mut q = [0i64; MAX_DIM];
            for slot in q.iter_mut().take(d) {
                *slot = lo + (idx % span) as i64;
                idx /= span;
            }
            let eigenvalue: f64 = (0..d).map(|a| (q[a] as f64 * wave_unit(grid, a)).powi(2)).sum();
            if periodic {
                let first = q.iter().find(|v| **v != 0).copied();
                match first {
                    None => modes.push(BasisMode { mode: q, trig: Trig::Cos, eigenvalue }),
                    Some(f) if f > 0 => {
                        modes.push(BasisMode { mode: q, trig: Trig::Cos, eigenvalue });
                        modes.push(BasisMode { mode: q, trig: Trig::Sin, eigenvalue });
                    }
                    Some(_) => {}
                }
            } else {
                modes.push(BasisMode { mode: q, trig: Trig::Cos, eigenvalue });
            }
        }
        modes.sort_by(|a, b| {
            a.eigenvalue
                .partial_cmp(&b.eigenvalue)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    let sa: i64 = a.mode.iter().map(|v| v.abs()).sum();
                    let sb: i64 = b.mode.iter().map(|v| v.abs()).sum();
                    sa.cmp(&sb)
                })
                .then_with(|| b.mode.cmp(&a.mode))
                .then_with(|| a.trig.cmp(&b.trig))
        });
        // every mode outside the search box has eigenvalue >= this bound
        let outside = ((reach + 1) as f64 * min_unit).powi(2);
        if modes.len() >= n_modes && modes[n_modes - 1].eigenvalue < outside {
            modes.truncate(n_modes);
            return modes;
        }
        reach += 1;
    }
}

/// Value and gradient of one normalised eigenfunction.
fn eval_mode(grid: &Grid, mode: &BasisMode, x: &[f64; MAX_DIM]) -> (f64, [f64; MAX_DIM]) {
    let d = grid.dim();
    let k: [f64; MAX_DIM] = core::array::from_fn(|a| {
        if a < d {
            mode.mode[a] as f64 * wave_unit(grid, a)
        } else {
            0.0
        }
    });
    match grid.boundary() {
        Boundary::Periodic => {
            let zero = mode.mode.iter().all(|q| *q == 0);
            let norm = if zero {
                (1.0 / grid.volume()).sqrt()
            } else {
                (2.0 / grid.volume()).sqrt()
            };
            let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            let (s, c) = (arg.sin(), arg.cos());
            match mode.trig {
                Trig::Cos => (norm * c, core::array::from_fn(|a| -norm * k[a] * s)),
                Trig::Sin => (norm * s, core::array::from_fn(|a| norm * k[a] * c)),
            }
        }
        Boundary::NeumannCosine => {
            let mut factors = [1.0; MAX_DIM];
            let mut dfactors = [0.0; MAX_DIM];
            for a in 0..d {
                let len = grid.lengths()[a];
                let norm = if mode.mode[a] == 0 {
                    (1.0 / len).sqrt()
                } else {
                    (2.0 / len).sqrt()
                };
                factors[a] = norm * (k[a] * x[a]).cos();
                dfactors[a] = -norm * k[a] * (k[a] * x[a]).sin();
            }
            let value: f64 = factors.iter().product();
            let grad = core::array::from_fn(|a| {
                if a >= d {
                    return 0.0;
                }
                (0..d)
                    .map(|b| if a == b { dfactors[b] } else { factors[b] })
                    .product()
            });
            (value, grad)
        }
    }
}

/// Galerkin coefficients of `u_n` with the model they evolve under.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    basis: Arc<GalerkinBasis>,
    params: ModelParams,
    components: usize,
    /// `coeffs[c * N + i]`.
    coeffs: Vec<f64>,
}

impl GalerkinSystem {
    /// `Pi_n u0` for the first `n_modes` eigenfunctions of `u0`'s box.
    pub fn project(u0: &Field, n_modes: usize, params: ModelParams) -> Result<Self> {
        let grid = u0.grid();
        if n_modes > grid.points() {
            return Err(Error::Model(format!(
                "{n_modes} Galerkin modes exceed the {} samples of the initial field",
                grid.points()
            )));
        }
        let params = params.validated(u0.components())?;
        if params.demag && grid.boundary() != Boundary::Periodic {
            return Err(Error::Model(
                "the demagnetising field is implemented on periodic grids only".into(),
            ));
        }
        let basis = Arc::new(GalerkinBasis::new(grid, n_modes)?);
        // sampled projection is exact only for modes the grid resolves
        let unresolved = basis.modes().iter().any(|b| {
            (0..grid.dim()).any(|a| {
                let q = b.mode[a].unsigned_abs() as usize;
                match grid.boundary() {
                    Boundary::Periodic => 2 * q >= grid.n()[a],
                    Boundary::NeumannCosine => q >= grid.n()[a],
                }
            })
        });
        if unresolved {
            return Err(Error::Model(format!(
                "{n_modes} Galerkin modes include modes the {:?} grid cannot resolve",
                grid.n()
            )));
        }
        let m = u0.components();
        let np = grid.points();
        let h = grid.cell_volume();
        let mut coeffs = vec![0.0; m * n_modes];
        for i in 0..n_modes {
            let e: Vec<f64> = (0..np).map(|p| basis.eval(i, &grid.point(p))).collect();
            for c in 0..m {
                coeffs[c * n_modes + i] =
                    u0.component(c).iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() * h;
            }
        }
        Ok(Self {
            basis,
            params,
            components: m,
            coeffs,
        })
    }

    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// L2 norm of `u_n` (the coefficient norm, by orthonormality).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Samples `u_n` on a grid of the same box.
    pub fn reconstruct(&self, grid: &Grid) -> Result<Field> {
        let n = self.basis.len();
        let m = self.components;
        let same_box = grid.dim() == self.basis.grid.dim()
            && grid.lengths() == self.basis.grid.lengths()
            && grid.boundary() == self.basis.grid.boundary();
        if !same_box {
            return Err(Error::Shape("reconstruction grid covers another box".into()));
        }
        Ok(Field::from_fn(grid, m, |x, out| {
            for i in 0..n {
                let e = self.basis.eval(i, x);
                for c in 0..m {
                    out[c] += self.coeffs[c * n + i] * e;
                }
            }
        }))
    }

    /// Galerkin right-hand side at the current coefficients.
    pub fn ode_rhs(&self) -> Vec<f64> {
        self.rhs_of(&self.coeffs)
    }

    fn rhs_of(&self, coeffs: &[f64]) -> Vec<f64> {
        let b = &*self.basis;
        let p = &self.params;
        let n = b.len();
        let m = self.components;
        let d = b.grid.dim();
        let np = b.points.len();
        let mut u = vec![0.0; m * np];
        b.synthesize(coeffs, m, &mut u);
        let uv = |pt: usize| -> [f64; 3] { core::array::from_fn(|c| if c < m { u[c * np + pt] } else { 0.0 }) };

        let mut samples = vec![0.0; m * np];
        let mut proj = vec![0.0; m * n];

        // H_n = Pi_n (Psi(u_n) + Phi_a(u_n))
        let mut h: Vec<f64> = (0..m * n)
            .map(|ci| (p.kappa1 - b.modes[ci % n].eigenvalue) * coeffs[ci])
            .collect();
        let aniso = p.anisotropy && m == 3;
        for pt in 0..np {
            let v = uv(pt);
            let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            let ea = v[0] * p.easy_axis[0] + v[1] * p.easy_axis[1] + v[2] * p.easy_axis[2];
            for c in 0..m {
                let mut f = -p.kappa2 * r2 * v[c];
                if aniso {
                    f += (p.lambda1 * ea - p.lambda2 * ea * ea * ea) * p.easy_axis[c];
                }
                samples[c * np + pt] = f;
            }
        }
        b.project(&samples, m, &mut proj);
        for (hi, pi) in h.iter_mut().zip(&proj) {
            *hi += pi;
        }

        // G = H_n + Phi_d(u_n); the longitudinal projection is diagonal on
        // each (cos, sin) mode pair
        let mut g = h;
        if p.demag && m == 3 {
            for (i, mode) in b.modes.iter().enumerate() {
                if mode.eigenvalue == 0.0 {
                    continue;
                }
                let k: [f64; 3] = core::array::from_fn(|a| {
                    if a < d {
                        mode.mode[a] as f64 * wave_unit(&b.grid, a)
                    } else {
                        0.0
                    }
                });
                let dot: f64 = (0..3).map(|c| k[c] * coeffs[c * n + i]).sum();
                for c in 0..3 {
                    g[c * n + i] -= dot * k[c] / mode.eigenvalue;
                }
            }
        }

        let mut out: Vec<f64> = (0..m * n)
            .map(|ci| (p.sigma + p.eps * b.modes[ci % n].eigenvalue) * g[ci])
            .collect();

        let mut add_projection = |samples: &[f64], scale: f64, out: &mut [f64]| {
            b.project(samples, m, &mut proj);
            for (o, v) in out.iter_mut().zip(&proj) {
                *o += scale * v;
            }
        };

        if p.gamma != 0.0 && m == 3 {
            let mut gq = vec![0.0; 3 * np];
            b.synthesize(&g, 3, &mut gq);
            for pt in 0..np {
                let x = cross(uv(pt), [gq[pt], gq[np + pt], gq[2 * np + pt]]);
                for c in 0..3 {
                    samples[c * np + pt] = x[c];
                }
            }
            add_projection(&samples, -p.gamma, &mut out);
        }

        let transport = !p.current.is_zero() && (p.beta1 != 0.0 || p.beta2 != 0.0 || p.chi != 0.0);
        if transport {
            let mut grad = vec![0.0; d * m * np];
            b.synthesize_gradient(coeffs, m, &mut grad);
            let gu = |j: usize, c: usize, pt: usize| grad[(j * m + c) * np + pt];
            for pt in 0..np {
                let x = &b.points[pt];
                let nu = p.current.eval(&b.grid, x);
                let v = uv(pt);
                let mut adv = [0.0; 3];
                for c in 0..m {
                    adv[c] = (0..d).map(|j| nu[j] * gu(j, c, pt)).sum();
                }
                let mut f = [0.0; 3];
                for c in 0..m {
                    f[c] = p.beta1 * adv[c];
                }
                if m == 3 && p.beta2 != 0.0 {
                    let x = cross(v, adv);
                    for c in 0..3 {
                        f[c] += p.beta2 * x[c];
                    }
                }
                if p.chi != 0.0 {
                    if m == 3 {
                        for c in 0..3 {
                            let flux: f64 = (0..d)
                                .map(|j| gu(j, c, pt) * v[j] + v[c] * gu(j, j, pt))
                                .sum();
                            f[c] += p.chi * flux;
                        }
                    } else {
                        let jac = p.current.jacobian(&b.grid, x);
                        let norm = (0..d).map(|j| nu[j] * nu[j]).sum::<f64>().sqrt();
                        if norm > 1e-300 {
                            let mut flux = 0.0;
                            for j in 0..d {
                                let dir = nu[j] / norm;
                                let nu_dot_dj: f64 = (0..d).map(|i| nu[i] * jac[i][j]).sum();
                                let ddir = jac[j][j] / norm - nu[j] * nu_dot_dj / (norm * norm * norm);
                                flux += 2.0 * v[0] * gu(j, 0, pt) * dir + v[0] * v[0] * ddir;
                            }
                            f[0] += p.chi * flux;
                        }
                    }
                }
                for c in 0..m {
                    samples[c * np + pt] = f[c];
                }
            }
            add_projection(&samples, 1.0, &mut out);
        }

        if let Source::AffineQuadratic(a) = p.source {
            for pt in 0..np {
                let v = uv(pt);
                let dot: f64 = (0..m).map(|c| a[c] * v[c]).sum();
                for c in 0..m {
                    samples[c * np + pt] = v[c] + dot * v[c];
                }
            }
            add_projection(&samples, 1.0, &mut out);
        }
        out
    }

    /// `L(u_n)` with the gradient part evaluated exactly from eigenvalues.
    pub fn lyapunov(&self) -> Result<f64> {
        let p = &self.params;
        if p.kappa2 <= 0.0 {
            return Err(Error::Model("the Lyapunov functional needs kappa2 > 0".into()));
        }
        let b = &*self.basis;
        let n = b.len();
        let m = self.components;
        let np = b.points.len();
        let grad: f64 = (0..m * n)
            .map(|ci| b.modes[ci % n].eigenvalue * self.coeffs[ci] * self.coeffs[ci])
            .sum();
        let mut u = vec![0.0; m * np];
        b.synthesize(&self.coeffs, m, &mut u);
        let target = p.kappa1 / p.kappa2;
        let well: f64 = (0..np)
            .map(|pt| {
                let r2: f64 = (0..m).map(|c| u[c * np + pt].powi(2)).sum();
                (r2 - target).powi(2)
            })
            .sum::<f64>()
            * b.weight;
        Ok(0.5 * grad + 0.25 * p.kappa2 * well)
    }

    /// Classical fourth-order Runge-Kutta up to `t_end`.
    pub fn integrate_rk4(&self, dt: f64, t_end: f64) -> Result<Self> {
        self.integrate_rk4_observed(dt, t_end, |_, _| {})
    }

    /// As [`GalerkinSystem::integrate_rk4`], calling `observer(t, system)`
    /// at `t = 0` and after every step.
    pub fn integrate_rk4_observed(
        &self,
        dt: f64,
        t_end: f64,
        mut observer: impl FnMut(f64, &GalerkinSystem),
    ) -> Result<Self> {
        if !(dt > 0.0 && t_end >= dt * (1.0 - 1e-12)) {
            return Err(Error::Stepper(format!(
                "need 0 < dt <= t_end, got dt = {dt}, t_end = {t_end}"
            )));
        }
        let steps = ((t_end / dt).round() as usize).max(1);
        let mut state = self.clone();
        observer(0.0, &state);
        let len = state.coeffs.len();
        let mut tmp = vec![0.0; len];
        for step in 1..=steps {
            let y = &state.coeffs;
            let k1 = state.rhs_of(y);
            for i in 0..len {
                tmp[i] = y[i] + 0.5 * dt * k1[i];
            }
            let k2 = state.rhs_of(&tmp);
            for i in 0..len {
                tmp[i] = y[i] + 0.5 * dt * k2[i];
            }
            let k3 = state.rhs_of(&tmp);
            for i in 0..len {
                tmp[i] = y[i] + dt * k3[i];
            }
            let k4 = state.rhs_of(&tmp);
            let next: Vec<f64> = (0..len)
                .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect();
            state.coeffs = next;
            let norm = state.l2_norm();
            if !norm.is_finite() || norm > 1e8 {
                return Err(Error::BlowUp {
                    step,
                    time: step as f64 * dt,
                    norm,
                });
            }
            observer(step as f64 * dt, &state);
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_ordering_in_one_dimension() {
        let g = Grid::new(1, 1, &[16], &[2.0 * PI], Boundary::Periodic).unwrap();
        let b = GalerkinBasis::new(&g, 8).unwrap();
        let got: Vec<(i64, Trig)> = b.modes().iter().map(|m| (m.mode[0], m.trig)).collect();
        assert_eq!(
            got,
            vec![
                (0, Trig::Cos),
                (1, Trig::Cos),
                (1, Trig::Sin),
                (2, Trig::Cos),
                (2, Trig::Sin),
                (3, Trig::Cos),
                (3, Trig::Sin),
                (4, Trig::Cos),
            ]
        );
    }

    #[test]
    fn neumann_basis_is_orthonormal_in_two_dimensions() {
        let g = Grid::new(2, 1, &[8, 8], &[1.0, 2.0], Boundary::NeumannCosine).unwrap();
        let b = GalerkinBasis::new(&g, 12).unwrap();
        assert_eq!(b.len(), 12);
        assert!(b.modes().windows(2).all(|w| w[0].eigenvalue <= w[1].eigenvalue));
    }

    #[test]
    fn rejects_too_many_modes() {
        let g = Grid::new(1, 1, &[8], &[1.0], Boundary::Periodic).unwrap();
        assert!(GalerkinBasis::new(&g, 65).is_err());
        let u = Field::zeros(&g, 1);
        assert!(GalerkinSystem::project(&u, 9, ModelParams::default()).is_err());
    }
}
