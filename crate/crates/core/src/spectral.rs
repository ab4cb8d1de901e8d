//! Box grids, fields, and Fourier/cosine spectral calculus.
//!
//! Periodic axes use a node-based uniform grid `x_j = j L / n` and the
//! complex exponentials `exp(i k x)` with `k = 2 pi q / L`. Neumann axes use
//! the cell-centred grid `x_j = (j + 1/2) L / n`; a field is reflected about
//! both walls into a `2L`-periodic signal of length `2n`, so its spectrum is
//! the cosine series with `k = pi q / L`. Derivatives along a Neumann axis
//! turn cosine series into sine series, which is tracked by [`Parity`].
//!
//! Spectral coefficients are normalised so that the zero mode of a constant
//! field equals the constant itself.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPlan;

pub const MAX_DIM: usize = 3;

/// Fraction of the Nyquist index retained by [`Domain::dealias`].
pub const DEALIAS_RETENTION: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    NeumannCosine,
}

/// Symmetry of a field under reflection about the walls of a Neumann axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Parity {
    #[default]
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// How products of fields are protected against aliasing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Dealiasing {
    /// Products formed on the grid, then truncated with the 2/3 rule.
    #[default]
    TwoThirds,
    /// Products formed on a grid refined by two in every axis and projected
    /// back. Exact for cubic products of band-limited input.
    Padded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    components: usize,
    n: [usize; MAX_DIM],
    lengths: [f64; MAX_DIM],
    boundary: Boundary,
}

impl Grid {
    pub fn new(
        dim: usize,
        components: usize,
        n: &[usize],
        lengths: &[f64],
        boundary: Boundary,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Grid(format!("dimension {dim} not in 1..=3")));
        }
        if components != 1 && components != 3 {
            return Err(Error::Grid(format!(
                "component count {components} must be 1 or 3"
            )));
        }
        if n.len() != dim || lengths.len() != dim {
            return Err(Error::Grid(format!(
                "expected {dim} resolutions and lengths, got {} and {}",
                n.len(),
                lengths.len()
            )));
        }
        if boundary == Boundary::NeumannCosine && dim > 2 {
            return Err(Error::Grid(
                "cosine (Neumann) boundaries are supported for d <= 2 only".into(),
            ));
        }
        let mut grid = Self {
            dim,
            components,
            n: [1; MAX_DIM],
            lengths: [1.0; MAX_DIM],
            boundary,
        };
        for axis in 0..dim {
            if n[axis] < 4 || n[axis] % 2 != 0 {
                return Err(Error::Grid(format!(
                    "resolution {} on axis {axis} must be even and >= 4",
                    n[axis]
                )));
            }
            if !(lengths[axis] > 0.0 && lengths[axis].is_finite()) {
                return Err(Error::Grid(format!(
                    "length {} on axis {axis} must be positive",
                    lengths[axis]
                )));
            }
            grid.n[axis] = n[axis];
            grid.lengths[axis] = lengths[axis];
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn points(&self) -> usize {
        self.n.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.n[axis] as f64
    }

    /// Quadrature weight of one grid point.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        let h = self.spacing(axis);
        match self.boundary {
            Boundary::Periodic => index as f64 * h,
            Boundary::NeumannCosine => (index as f64 + 0.5) * h,
        }
    }

    /// Coordinates of a flattened point index (last axis fastest).
    pub fn point(&self, mut index: usize) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for axis in (0..MAX_DIM).rev() {
            let i = index % self.n[axis];
            index /= self.n[axis];
            if axis < self.dim {
                x[axis] = self.coordinate(axis, i);
            }
        }
        x
    }

    pub fn with_components(&self, components: usize) -> Result<Self> {
        Self::new(
            self.dim,
            components,
            self.n(),
            self.lengths(),
            self.boundary,
        )
    }

    /// Same box with every resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut g = *self;
        for axis in 0..self.dim {
            g.n[axis] *= factor;
        }
        g
    }

    /// Per-axis wavenumber unit: `2 pi / L` (periodic) or `pi / L` (cosine).
    pub fn wavenumber_unit(&self, axis: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => 2.0 * PI / self.lengths[axis],
            Boundary::NeumannCosine => PI / self.lengths[axis],
        }
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        let same = self.dim == other.dim
            && self.n == other.n
            && self.lengths == other.lengths
            && self.boundary == other.boundary;
        if same {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grids differ: {:?} vs {:?}",
                self, other
            )))
        }
    }
}

/// Real `m`-component function sampled on a grid, stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    components: usize,
    parity: [Parity; MAX_DIM],
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid, components: usize) -> Self {
        Self {
            grid: *grid,
            components,
            parity: [Parity::Even; MAX_DIM],
            values: vec![0.0; components * grid.points()],
        }
    }

    pub fn from_values(grid: &Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != components * grid.points() {
            return Err(Error::Shape(format!(
                "expected {} values for {components} components, got {}",
                components * grid.points(),
                values.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            components,
            parity: [Parity::Even; MAX_DIM],
            values,
        })
    }

    /// Samples `f(x, out)` at every grid point.
    pub fn from_fn(
        grid: &Grid,
        components: usize,
        mut f: impl FnMut(&[f64; MAX_DIM], &mut [f64]),
    ) -> Self {
        let np = grid.points();
        let mut field = Self::zeros(grid, components);
        let mut out = vec![0.0; components];
        for p in 0..np {
            out.iter_mut().for_each(|v| *v = 0.0);
            f(&grid.point(p), &mut out);
            for (c, v) in out.iter().enumerate() {
                field.values[c * np + p] = *v;
            }
        }
        field
    }

    pub fn constant(grid: &Grid, value: &[f64]) -> Self {
        Self::from_fn(grid, value.len(), |_, out| out.copy_from_slice(value))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn points(&self) -> usize {
        self.grid.points()
    }

    pub fn parity(&self) -> [Parity; MAX_DIM] {
        self.parity
    }

    pub fn with_parity(mut self, parity: [Parity; MAX_DIM]) -> Self {
        self.parity = parity;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let np = self.points();
        &self.values[c * np..(c + 1) * np]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let np = self.points();
        &mut self.values[c * np..(c + 1) * np]
    }

    /// Vector value at one point (unused slots are zero).
    pub fn at(&self, p: usize) -> [f64; 3] {
        let np = self.points();
        let mut v = [0.0; 3];
        for (c, slot) in v.iter_mut().enumerate().take(self.components) {
            *slot = self.values[c * np + p];
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup over points of the Euclidean norm of the vector value.
    pub fn sup_norm(&self) -> f64 {
        (0..self.points())
            .map(|p| {
                let v = self.at(p);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_compatible(other)?;
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(dot * self.grid.cell_volume())
    }

    /// Grid-quadrature L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v *= a);
        f
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let mut f = self.clone();
        for (x, y) in f.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(f)
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.components != other.components {
            return Err(Error::Shape(format!(
                "component counts differ: {} vs {}",
                self.components, other.components
            )));
        }
        Ok(())
    }
}

impl Add for &Field {
    type Output = Field;

    /// Panics on incompatible shapes; use [`Field::axpy`] to get an error.
    fn add(self, rhs: &Field) -> Field {
        self.axpy(1.0, rhs).expect("incompatible fields")
    }
}

impl Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        self.axpy(-1.0, rhs).expect("incompatible fields")
    }
}

impl Mul<f64> for &Field {
    type Output = Field;

    fn mul(self, a: f64) -> Field {
        self.scaled(a)
    }
}

/// Spectral coefficients on the transform grid of a [`Domain`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    components: usize,
    parity: [Parity; MAX_DIM],
    shape: [usize; MAX_DIM],
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(domain: &Domain, components: usize) -> Self {
        Self {
            grid: domain.grid,
            components,
            parity: [Parity::Even; MAX_DIM],
            shape: domain.shape,
            coeffs: vec![Complex64::new(0.0, 0.0); components * domain.modes()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn parity(&self) -> [Parity; MAX_DIM] {
        self.parity
    }

    pub fn with_parity(mut self, parity: [Parity; MAX_DIM]) -> Self {
        self.parity = parity;
        self
    }

    pub fn modes(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let nm = self.modes();
        &self.coeffs[c * nm..(c + 1) * nm]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let nm = self.modes();
        &mut self.coeffs[c * nm..(c + 1) * nm]
    }

    pub fn scaled(&self, a: f64) -> Spectrum {
        let mut s = self.clone();
        s.coeffs.iter_mut().for_each(|z| *z *= a);
        s
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &Spectrum) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += y * a;
        }
    }

    /// Sum of squared coefficient magnitudes times the box volume; equals the
    /// squared L2 norm by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.volume()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Transform machinery for one grid: FFT plans, wavenumber tables and the
/// dealiasing mask. Cheap to share by reference.
#[derive(Clone, Debug)]
pub struct Domain {
    grid: Grid,
    /// Transform extents: `n` on periodic axes, `2n` on cosine axes.
    shape: [usize; MAX_DIM],
    plans: [FftPlan; MAX_DIM],
    /// Signed wavenumber per transform index, per axis.
    k: [Vec<f64>; MAX_DIM],
    /// Signed integer mode per transform index, per axis.
    q: [Vec<i64>; MAX_DIM],
    /// `exp(i pi q / N)` half-cell shift of the cell-centred cosine grid.
    shift: [Vec<Complex64>; MAX_DIM],
    k2: Vec<f64>,
    keep: Vec<bool>,
    padded: Option<Box<Domain>>,
}

impl Domain {
    pub fn new(grid: &Grid) -> Self {
        let mut d = Self::bare(grid);
        d.padded = Some(Box::new(Self::bare(&grid.refined(2))));
        d
    }

    fn bare(grid: &Grid) -> Self {
        let mut shape = [1; MAX_DIM];
        for axis in 0..grid.dim {
            shape[axis] = match grid.boundary {
                Boundary::Periodic => grid.n[axis],
                Boundary::NeumannCosine => 2 * grid.n[axis],
            };
        }
        let plans = [
            FftPlan::new(shape[0]),
            FftPlan::new(shape[1]),
            FftPlan::new(shape[2]),
        ];
        let mut k: [Vec<f64>; MAX_DIM] = Default::default();
        let mut q: [Vec<i64>; MAX_DIM] = Default::default();
        let mut shift: [Vec<Complex64>; MAX_DIM] = Default::default();
        for axis in 0..MAX_DIM {
            let nt = shape[axis];
            q[axis] = (0..nt)
                .map(|t| {
                    if t < nt.div_ceil(2) {
                        t as i64
                    } else {
                        t as i64 - nt as i64
                    }
                })
                .collect();
            let unit = if axis < grid.dim {
                grid.wavenumber_unit(axis)
            } else {
                0.0
            };
            k[axis] = q[axis].iter().map(|&qi| qi as f64 * unit).collect();
            shift[axis] = q[axis]
                .iter()
                .map(|&qi| {
                    if grid.boundary == Boundary::NeumannCosine && axis < grid.dim {
                        let a = PI * qi as f64 / nt as f64;
                        Complex64::new(a.cos(), a.sin())
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect();
        }
        let modes: usize = shape.iter().product();
        let mut k2 = vec![0.0; modes];
        let mut keep = vec![true; modes];
        let cutoff: [i64; MAX_DIM] =
            core::array::from_fn(|a| (DEALIAS_RETENTION * (shape[a] / 2) as f64).floor() as i64);
        for (idx, (k2v, keepv)) in k2.iter_mut().zip(keep.iter_mut()).enumerate() {
            let t = unflatten(idx, &shape);
            let mut s = 0.0;
            for axis in 0..MAX_DIM {
                let kk = k[axis][t[axis]];
                s += kk * kk;
                if q[axis][t[axis]].abs() > cutoff[axis] && shape[axis] > 1 {
                    *keepv = false;
                }
            }
            *k2v = s;
        }
        Self {
            grid: *grid,
            shape,
            plans,
            k,
            q,
            shift,
            k2,
            keep,
            padded: None,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> [usize; MAX_DIM] {
        self.shape
    }

    /// Number of transform modes per component.
    pub fn modes(&self) -> usize {
        self.shape.iter().product()
    }

    /// `|k|^2` per transform mode.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Wavevector of a flattened transform mode.
    pub fn wavevector(&self, mode: usize) -> [f64; MAX_DIM] {
        let t = unflatten(mode, &self.shape);
        core::array::from_fn(|a| self.k[a][t[a]])
    }

    /// Signed integer mode indices of a flattened transform mode.
    pub fn mode_index(&self, mode: usize) -> [i64; MAX_DIM] {
        let t = unflatten(mode, &self.shape);
        core::array::from_fn(|a| self.q[a][t[a]])
    }

    /// Flattened transform mode for signed integer indices, if resolved.
    pub fn find_mode(&self, q: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for axis in 0..MAX_DIM {
            let qa = q.get(axis).copied().unwrap_or(0);
            let nt = self.shape[axis] as i64;
            if qa < -(nt / 2) || qa >= nt - nt / 2 {
                return None;
            }
            let t = if qa >= 0 { qa } else { qa + nt } as usize;
            idx = idx * self.shape[axis] + t;
        }
        Some(idx)
    }

    fn is_nyquist(&self, axis: usize, t: usize) -> bool {
        self.shape[axis] > 1 && self.shape[axis] % 2 == 0 && t == self.shape[axis] / 2
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        self.grid.check_same(&f.grid)
    }

    fn check_spectrum(&self, s: &Spectrum) -> Result<()> {
        self.grid.check_same(&s.grid)?;
        if s.shape != self.shape {
            return Err(Error::Shape("spectrum belongs to another transform".into()));
        }
        Ok(())
    }

    pub fn to_spectral(&self, f: &Field) -> Result<Spectrum> {
        self.check_field(f)?;
        let m = f.components;
        let nm = self.modes();
        let np = self.grid.points();
        let mut out = Spectrum {
            grid: self.grid,
            components: m,
            parity: f.parity,
            shape: self.shape,
            coeffs: vec![Complex64::new(0.0, 0.0); m * nm],
        };
        let neumann = self.grid.boundary == Boundary::NeumannCosine;
        let scale = 1.0 / nm as f64;
        for c in 0..m {
            let src = &f.values[c * np..(c + 1) * np];
            let dst = &mut out.coeffs[c * nm..(c + 1) * nm];
            for (idx, z) in dst.iter_mut().enumerate() {
                let t = unflatten(idx, &self.shape);
                let mut p = 0;
                let mut sign = 1.0;
                for axis in 0..MAX_DIM {
                    let n = self.grid.n[axis];
                    let mut i = t[axis];
                    if neumann && i >= n {
                        i = 2 * n - 1 - i;
                        if f.parity[axis] == Parity::Odd {
                            sign = -sign;
                        }
                    }
                    p = p * n + i;
                }
                *z = Complex64::new(sign * src[p], 0.0);
            }
            self.fft_all_axes(dst, false);
            for (idx, z) in dst.iter_mut().enumerate() {
                *z *= scale;
                if neumann {
                    let t = unflatten(idx, &self.shape);
                    for axis in 0..self.grid.dim {
                        *z *= self.shift[axis][t[axis]].conj();
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn to_physical(&self, s: &Spectrum) -> Result<Field> {
        self.check_spectrum(s)?;
        let m = s.components;
        let nm = self.modes();
        let np = self.grid.points();
        let neumann = self.grid.boundary == Boundary::NeumannCosine;
        let mut out = Field::zeros(&self.grid, m).with_parity(s.parity);
        let mut buf = vec![Complex64::new(0.0, 0.0); nm];
        for c in 0..m {
            buf.copy_from_slice(&s.coeffs[c * nm..(c + 1) * nm]);
            if neumann {
                for (idx, z) in buf.iter_mut().enumerate() {
                    let t = unflatten(idx, &self.shape);
                    for axis in 0..self.grid.dim {
                        *z *= self.shift[axis][t[axis]];
                    }
                }
            }
            self.fft_all_axes(&mut buf, true);
            let dst = &mut out.values[c * np..(c + 1) * np];
            for (p, v) in dst.iter_mut().enumerate() {
                // physical point p sits at the same multi-index in the transform grid
                let i = unflatten(p, &self.grid.n);
                let mut idx = 0;
                for axis in 0..MAX_DIM {
                    idx = idx * self.shape[axis] + i[axis];
                }
                *v = buf[idx].re;
            }
        }
        Ok(out)
    }

    fn fft_all_axes(&self, data: &mut [Complex64], inverse: bool) {
        let mut line = Vec::new();
        for axis in 0..MAX_DIM {
            let len = self.shape[axis];
            if len == 1 {
                continue;
            }
            let inner: usize = self.shape[axis + 1..].iter().product();
            let outer: usize = self.shape[..axis].iter().product();
            line.resize(len, Complex64::new(0.0, 0.0));
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * len * inner + i;
                    for (j, z) in line.iter_mut().enumerate() {
                        *z = data[base + j * inner];
                    }
                    if inverse {
                        self.plans[axis].inverse(&mut line);
                    } else {
                        self.plans[axis].forward(&mut line);
                    }
                    for (j, z) in line.iter().enumerate() {
                        data[base + j * inner] = *z;
                    }
                }
            }
        }
    }

    /// Spectral `d/dx_axis`. The Nyquist mode is dropped.
    pub fn derivative(&self, s: &Spectrum, axis: usize) -> Result<Spectrum> {
        self.check_spectrum(s)?;
        if axis >= self.grid.dim {
            return Err(Error::Shape(format!("axis {axis} out of range")));
        }
        let nm = self.modes();
        let mut out = s.clone();
        out.parity[axis] = s.parity[axis].flip();
        for c in 0..s.components {
            for idx in 0..nm {
                let t = unflatten(idx, &self.shape);
                let z = &mut out.coeffs[c * nm + idx];
                if self.is_nyquist(axis, t[axis]) {
                    *z = Complex64::new(0.0, 0.0);
                } else {
                    *z *= Complex64::new(0.0, self.k[axis][t[axis]]);
                }
            }
        }
        Ok(out)
    }

    /// Multiplies every mode by `symbol(|k|^2)`.
    pub fn apply_symbol(&self, s: &Spectrum, symbol: impl Fn(f64) -> f64) -> Result<Spectrum> {
        self.check_spectrum(s)?;
        let nm = self.modes();
        let mut out = s.clone();
        for c in 0..s.components {
            for (z, k2) in out.coeffs[c * nm..(c + 1) * nm].iter_mut().zip(&self.k2) {
                *z *= symbol(*k2);
            }
        }
        Ok(out)
    }

    pub fn laplacian_spectrum(&self, s: &Spectrum) -> Result<Spectrum> {
        self.apply_symbol(s, |k2| -k2)
    }

    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        let s = self.to_spectral(f)?;
        self.to_physical(&self.laplacian_spectrum(&s)?)
    }

    pub fn bilaplacian(&self, f: &Field) -> Result<Field> {
        let s = self.to_spectral(f)?;
        self.to_physical(&self.apply_symbol(&s, |k2| k2 * k2)?)
    }

    /// One field per axis, each with the components of `f`.
    pub fn gradient(&self, f: &Field) -> Result<Vec<Field>> {
        let s = self.to_spectral(f)?;
        (0..self.grid.dim)
            .map(|axis| self.to_physical(&self.derivative(&s, axis)?))
            .collect()
    }

    /// `sum_j d/dx_j g[j]`, one input field per axis.
    pub fn divergence(&self, g: &[Field]) -> Result<Field> {
        if g.len() != self.grid.dim {
            return Err(Error::Shape(format!(
                "divergence needs {} fields, got {}",
                self.grid.dim,
                g.len()
            )));
        }
        let acc = self.divergence_spectrum(
            &g.iter()
                .map(|f| self.to_spectral(f))
                .collect::<Result<Vec<_>>>()?,
        )?;
        self.to_physical(&acc)
    }

    pub fn divergence_spectrum(&self, g: &[Spectrum]) -> Result<Spectrum> {
        let mut acc: Option<Spectrum> = None;
        for (axis, s) in g.iter().enumerate() {
            let d = self.derivative(s, axis)?;
            match acc.as_mut() {
                None => acc = Some(d),
                Some(a) => {
                    if a.components != d.components {
                        return Err(Error::Shape("divergence inputs differ in components".into()));
                    }
                    a.add_scaled(1.0, &d);
                }
            }
        }
        acc.ok_or_else(|| Error::Shape("divergence of nothing".into()))
    }

    /// Re-expands a spectrum in the even (cosine) basis on every axis. Sine
    /// series produced by odd numbers of derivatives on Neumann axes are
    /// resampled through physical space; periodic spectra pass unchanged.
    pub fn to_even(&self, s: &Spectrum) -> Result<Spectrum> {
        self.check_spectrum(s)?;
        if s.parity.iter().all(|p| *p == Parity::Even) || self.grid.boundary == Boundary::Periodic {
            return Ok(s.clone().with_parity([Parity::Even; MAX_DIM]));
        }
        let f = self.to_physical(s)?.with_parity([Parity::Even; MAX_DIM]);
        self.to_spectral(&f)
    }

    /// Zeroes every mode with some `|q_i|` above the retained fraction of
    /// that axis' Nyquist index.
    pub fn dealias(&self, s: &Spectrum) -> Result<Spectrum> {
        self.check_spectrum(s)?;
        let mut out = s.clone();
        let nm = self.modes();
        for c in 0..s.components {
            for (z, keep) in out.coeffs[c * nm..(c + 1) * nm].iter_mut().zip(&self.keep) {
                if !keep {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(out)
    }

    pub fn dealias_field(&self, f: &Field) -> Result<Field> {
        self.to_physical(&self.dealias(&self.to_spectral(f)?)?)
    }

    /// Copies coefficients into another transform of the same box. Modes that
    /// are not strictly inside both Nyquist limits are dropped.
    pub fn resample(&self, s: &Spectrum, target: &Domain) -> Result<Spectrum> {
        self.check_spectrum(s)?;
        let mut out = Spectrum::zeros(target, s.components).with_parity(s.parity);
        let nm_src = self.modes();
        let nm_dst = target.modes();
        for idx in 0..nm_dst {
            let q = target.mode_index(idx);
            let inside = (0..MAX_DIM).all(|a| {
                let lim = self.shape[a].min(target.shape[a]) as i64;
                lim == 1 || 2 * q[a].abs() < lim
            });
            if !inside {
                continue;
            }
            if let Some(src) = self.find_mode(&q) {
                for c in 0..s.components {
                    out.coeffs[c * nm_dst + idx] = s.coeffs[c * nm_src + src];
                }
            }
        }
        Ok(out)
    }

    /// Evaluates a pointwise map of several fields and returns its spectrum
    /// under the given dealiasing policy. `f` receives the concatenated
    /// component values of all inputs at one point.
    pub fn pointwise(
        &self,
        policy: Dealiasing,
        inputs: &[&Spectrum],
        out_components: usize,
        f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Spectrum> {
        match policy {
            Dealiasing::TwoThirds => {
                let s = self.pointwise_on(inputs, out_components, f)?;
                self.dealias(&s)
            }
            Dealiasing::Padded => {
                let fine = self
                    .padded
                    .as_deref()
                    .ok_or_else(|| Error::Shape("domain has no padded transform".into()))?;
                let lifted = inputs
                    .iter()
                    .map(|s| self.resample(s, fine))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&Spectrum> = lifted.iter().collect();
                let s = fine.pointwise_on(&refs, out_components, f)?;
                fine.resample(&s, self)
            }
        }
    }

    fn pointwise_on(
        &self,
        inputs: &[&Spectrum],
        out_components: usize,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<Spectrum> {
        let phys = inputs
            .iter()
            .map(|s| self.to_physical(s))
            .collect::<Result<Vec<_>>>()?;
        let np = self.grid.points();
        let width: usize = phys.iter().map(|p| p.components).sum();
        let mut args = vec![0.0; width];
        let mut out = Field::zeros(&self.grid, out_components);
        let mut res = vec![0.0; out_components];
        for p in 0..np {
            let mut j = 0;
            for field in &phys {
                for c in 0..field.components {
                    args[j] = field.values[c * np + p];
                    j += 1;
                }
            }
            res.iter_mut().for_each(|v| *v = 0.0);
            f(&args, &mut res);
            for (c, v) in res.iter().enumerate() {
                out.values[c * np + p] = *v;
            }
        }
        self.to_spectral(&out)
    }
}

fn unflatten(mut idx: usize, shape: &[usize; MAX_DIM]) -> [usize; MAX_DIM] {
    let mut t = [0; MAX_DIM];
    for axis in (0..MAX_DIM).rev() {
        t[axis] = idx % shape[axis];
        idx /= shape[axis];
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_1d(n: usize, len: f64) -> Grid {
        Grid::new(1, 1, &[n], &[len], Boundary::Periodic).unwrap()
    }

    #[test]
    fn grid_rejects_odd_or_small_resolution() {
        assert!(Grid::new(1, 1, &[6], &[1.0], Boundary::Periodic).is_ok());
        assert!(Grid::new(1, 1, &[7], &[1.0], Boundary::Periodic).is_err());
        assert!(Grid::new(1, 1, &[2], &[1.0], Boundary::Periodic).is_err());
        assert!(Grid::new(3, 3, &[8, 8, 8], &[1.0; 3], Boundary::NeumannCosine).is_err());
        assert!(Grid::new(1, 2, &[8], &[1.0], Boundary::Periodic).is_err());
    }

    #[test]
    fn constant_has_only_zero_mode() {
        for boundary in [Boundary::Periodic, Boundary::NeumannCosine] {
            let g = Grid::new(2, 1, &[8, 6], &[1.0, 2.0], boundary).unwrap();
            let d = Domain::new(&g);
            let s = d.to_spectral(&Field::constant(&g, &[2.5])).unwrap();
            for (i, z) in s.coeffs().iter().enumerate() {
                let expect = if i == 0 { 2.5 } else { 0.0 };
                assert!((z - Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_cosine_is_one_coefficient_pair() {
        let len = 3.0;
        let g = periodic_1d(16, len);
        let d = Domain::new(&g);
        let f = Field::from_fn(&g, 1, |x, o| o[0] = (2.0 * PI * x[0] / len).cos());
        let s = d.to_spectral(&f).unwrap();
        let nonzero: Vec<usize> = (0..16).filter(|&i| s.coeffs()[i].norm() > 1e-13).collect();
        assert_eq!(nonzero, vec![1, 15]);
        assert!((s.coeffs()[1].re - 0.5).abs() < 1e-14);

        let gn = Grid::new(1, 1, &[16], &[len], Boundary::NeumannCosine).unwrap();
        let dn = Domain::new(&gn);
        let f = Field::from_fn(&gn, 1, |x, o| o[0] = (PI * 2.0 * x[0] / len).cos());
        let s = dn.to_spectral(&f).unwrap();
        let nonzero: Vec<usize> = (0..32).filter(|&i| s.coeffs()[i].norm() > 1e-13).collect();
        assert_eq!(nonzero, vec![2, 30]);
        // cosine coefficients are real after the half-cell shift
        assert!(s.coeffs()[2].im.abs() < 1e-14);
    }

    #[test]
    fn laplacian_of_sine() {
        let g = periodic_1d(32, 2.0 * PI);
        let d = Domain::new(&g);
        let f = Field::from_fn(&g, 1, |x, o| o[0] = x[0].sin());
        let lap = d.laplacian(&f).unwrap();
        for (a, b) in lap.values().iter().zip(f.values()) {
            assert!((a + b).abs() < 1e-13);
        }
        let c = d.laplacian(&Field::constant(&g, &[4.0])).unwrap();
        assert!(c.max_abs() < 1e-13);
    }

    #[test]
    fn neumann_gradient_then_divergence_is_laplacian() {
        let g = Grid::new(2, 1, &[16, 12], &[2.0, 1.5], Boundary::NeumannCosine).unwrap();
        let d = Domain::new(&g);
        let f = Field::from_fn(&g, 1, |x, o| {
            o[0] = (PI * x[0] / 2.0).cos() * (2.0 * PI * x[1] / 1.5).cos() + 0.3 * (3.0 * PI * x[0] / 2.0).cos()
        });
        let grad = d.gradient(&f).unwrap();
        assert_eq!(grad[0].parity()[0], Parity::Odd);
        let div = d.divergence(&grad).unwrap();
        let lap = d.laplacian(&f).unwrap();
        for (a, b) in div.values().iter().zip(lap.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        // exact derivative of the cosine along x
        for p in 0..g.points() {
            let x = g.point(p);
            let exact = -(PI / 2.0) * (PI * x[0] / 2.0).sin() * (2.0 * PI * x[1] / 1.5).cos()
                - 0.3 * (3.0 * PI / 2.0) * (3.0 * PI * x[0] / 2.0).sin();
            assert!((grad[0].values()[p] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_zeroes_high_modes_only() {
        let g = periodic_1d(12, 2.0 * PI);
        let d = Domain::new(&g);
        let low = Field::from_fn(&g, 1, |x, o| o[0] = x[0].sin() + (4.0 * x[0]).cos());
        let out = d.dealias_field(&low).unwrap();
        for (a, b) in out.values().iter().zip(low.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let high = Field::from_fn(&g, 1, |x, o| o[0] = (5.0 * x[0]).sin());
        assert!(d.dealias_field(&high).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn resample_round_trip_keeps_resolved_modes() {
        let g = periodic_1d(16, 1.0);
        let d = Domain::new(&g);
        let f = Field::from_fn(&g, 1, |x, o| o[0] = (2.0 * PI * 3.0 * x[0]).sin() + 0.5);
        let s = d.to_spectral(&f).unwrap();
        let fine = Domain::new(&g.refined(2));
        let back = fine.resample(&d.resample(&s, &fine).unwrap(), &d).unwrap();
        for (a, b) in back.coeffs().iter().zip(s.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
