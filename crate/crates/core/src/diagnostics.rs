//! Norms, the Ginzburg-Landau Lyapunov functional, residuals, fits and
//! inequality audits.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Model, ModelParams, Source};
use crate::random::{random_smooth_field_with, seeded_rng, SmoothSpectrum};
use crate::spectral::{Boundary, Dealiasing, Domain, Field, Grid, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormKind {
    L2,
    L4,
    H1,
    H2,
}

fn gradient_energy(domain: &Domain, s: &Spectrum) -> Result<f64> {
    let mut acc = 0.0;
    for axis in 0..domain.grid().dim() {
        acc += domain.derivative(s, axis)?.energy();
    }
    Ok(acc)
}

/// L2 and L4 use grid quadrature, the derivative parts of H1 and H2
/// (`||grad u||^2` and `||Lap u||^2`) are spectral.
pub fn norm(domain: &Domain, u: &Field, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::L2 => Ok(u.l2_norm()),
        NormKind::L4 => {
            let np = u.points();
            let s: f64 = (0..np)
                .map(|p| {
                    let r2: f64 = (0..u.components()).map(|c| u.values()[c * np + p].powi(2)).sum();
                    r2 * r2
                })
                .sum();
            Ok((s * u.grid().cell_volume()).powf(0.25))
        }
        NormKind::H1 | NormKind::H2 => {
            let s = domain.to_spectral(u)?;
            let mut acc = u.l2_norm().powi(2) + gradient_energy(domain, &s)?;
            if kind == NormKind::H2 {
                acc += domain.laplacian_spectrum(&s)?.energy();
            }
            Ok(acc.sqrt())
        }
    }
}

/// `L(u) = 1/2 ||grad u||^2 + kappa2/4 || |u|^2 - kappa1/kappa2 ||^2`.
pub fn lyapunov(domain: &Domain, u: &Field, p: &ModelParams) -> Result<f64> {
    if p.kappa2 <= 0.0 {
        return Err(Error::Model(
            "the Lyapunov functional needs kappa2 > 0".into(),
        ));
    }
    let s = domain.to_spectral(u)?;
    let grad = gradient_energy(domain, &s)?;
    let target = p.kappa1 / p.kappa2;
    let np = u.points();
    let well: f64 = (0..np)
        .map(|pt| {
            let r2: f64 = (0..u.components()).map(|c| u.values()[c * np + pt].powi(2)).sum();
            (r2 - target).powi(2)
        })
        .sum::<f64>()
        * u.grid().cell_volume();
    Ok(0.5 * grad + 0.25 * p.kappa2 * well)
}

/// Per-interval defect of the energy law `dL/dt = -sigma ||H||^2 - eps ||grad H||^2`,
/// with `H` evaluated at the average of consecutive samples.
pub fn lyapunov_dissipation_residual(samples: &[(f64, Field)], model: &Model) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::Diagnostic(
            "dissipation residual needs at least two samples".into(),
        ));
    }
    let domain = model.domain();
    let p = model.params();
    let energies = samples
        .iter()
        .map(|(_, u)| lyapunov(domain, u, p))
        .collect::<Result<Vec<_>>>()?;
    samples
        .windows(2)
        .zip(energies.windows(2))
        .map(|(pair, e)| {
            let (t0, u0) = &pair[0];
            let (t1, u1) = &pair[1];
            let dt = t1 - t0;
            if !(dt > 0.0) {
                return Err(Error::Diagnostic("sample times must increase".into()));
            }
            let mid = (u0 + u1).scaled(0.5);
            let (h2, gh2) = dissipation_rates(model, &mid)?;
            Ok((e[1] - e[0]) / dt + p.sigma * h2 + p.eps * gh2)
        })
        .collect()
}

/// `(||H||^2, ||grad H||^2)` at `u`.
pub fn dissipation_rates(model: &Model, u: &Field) -> Result<(f64, f64)> {
    let domain = model.domain();
    let h = model.effective_spectrum(&domain.to_spectral(u)?)?;
    Ok((h.energy(), gradient_energy(domain, &h)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyResidual {
    /// `||H(u)||`, zero exactly at gradient-flow fixed points.
    pub h_residual: f64,
    /// `||rhs(u)||`.
    pub rhs_residual: f64,
}

pub fn steady_residual(u: &Field, model: &Model) -> Result<SteadyResidual> {
    let domain = model.domain();
    let s = domain.to_spectral(u)?;
    Ok(SteadyResidual {
        h_residual: model.effective_spectrum(&s)?.energy().sqrt(),
        rhs_residual: model.rhs_spectrum(&s)?.energy().sqrt(),
    })
}

pub fn trajectory_distance(domain: &Domain, u: &Field, v: &Field, kind: NormKind) -> Result<f64> {
    norm(domain, &u.axpy(-1.0, v)?, kind)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Diagnostic(format!(
            "linear fit needs matching series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Diagnostic("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Fit of `log(distance)` against `log(parameter)`.
pub fn rate_fit(pairs: &[(f64, f64)]) -> Result<LinearFit> {
    if pairs.len() < 3 {
        return Err(Error::Diagnostic("rate fit needs at least three points".into()));
    }
    if pairs.iter().any(|(a, b)| !(*a > 0.0 && *b > 0.0)) {
        return Err(Error::Diagnostic(
            "rate fit needs strictly positive parameters and distances".into(),
        ));
    }
    let x: Vec<f64> = pairs.iter().map(|(a, _)| a.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|(_, b)| b.ln()).collect();
    linear_fit(&x, &y)
}

/// Diagnostic time series of one trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub l4: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// NaN when the Lyapunov functional is undefined (`kappa2 = 0`).
    pub lyapunov: Vec<f64>,
    pub h_residual: Vec<f64>,
    pub meta: Vec<(String, String)>,
}

impl RunRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, u: &Field, model: &Model) -> Result<()> {
        if let Some(last) = self.times.last() {
            if !(t > *last) {
                return Err(Error::Diagnostic(format!(
                    "record times must increase: {t} after {last}"
                )));
            }
        }
        let domain = model.domain();
        let s = domain.to_spectral(u)?;
        let l2 = u.l2_norm();
        let grad = gradient_energy(domain, &s)?;
        let lap = domain.laplacian_spectrum(&s)?.energy();
        self.times.push(t);
        self.l2.push(l2);
        self.l4.push(norm(domain, u, NormKind::L4)?);
        self.h1.push((l2 * l2 + grad).sqrt());
        self.h2.push((l2 * l2 + grad + lap).sqrt());
        self.lyapunov
            .push(lyapunov(domain, u, model.params()).unwrap_or(f64::NAN));
        self.h_residual
            .push(model.effective_spectrum(&s)?.energy().sqrt());
        Ok(())
    }

    /// Checks that every series has the length of `times` and that the
    /// times increase strictly.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        let lens = [
            self.l2.len(),
            self.l4.len(),
            self.h1.len(),
            self.h2.len(),
            self.lyapunov.len(),
            self.h_residual.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(Error::Diagnostic("record series lengths differ".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Diagnostic("record times must increase".into()));
        }
        Ok(())
    }
}

/// First recorded time after which `||u||^2` stays at or below `threshold`
/// until the end of the record.
pub fn absorbing_entry_time(record: &RunRecord, threshold: f64) -> Option<f64> {
    let last_outside = record.l2.iter().rposition(|v| v * v > threshold);
    match last_outside {
        None => record.times.first().copied(),
        Some(i) => record.times.get(i + 1).copied(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    /// Relative pointwise defect of an identity.
    Identity,
    /// Absolute excess of the left side over the right side.
    Inequality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditCheck {
    pub name: &'static str,
    pub kind: CheckKind,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub pairs: usize,
    pub seed: u64,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-8;
pub const INEQUALITY_SLACK: f64 = 1e-10;

pub const CHECK_GRAD_PRODUCT: &str = "grad(|v|^2 w) product rule";
pub const CHECK_LAPLACIAN_PRODUCT: &str = "Lap(|v|^2 w) product rule";
pub const CHECK_ANISOTROPY: &str = "anisotropy one-sided Lipschitz";
pub const CHECK_DEMAG: &str = "demagnetising field L2 bound";
pub const CHECK_SOURCE: &str = "source local Lipschitz";

/// Audit operators built for one grid. The model carries the anisotropy
/// and source coefficients of the parameters being audited.
pub struct Auditor {
    model: Model,
    vector: bool,
    demag: bool,
}

impl Auditor {
    pub fn new(grid: &Grid, params: &ModelParams) -> Result<Self> {
        let vector = grid.components() == 3;
        let demag = vector && grid.boundary() == Boundary::Periodic;
        let p = ModelParams {
            anisotropy: vector,
            demag,
            gamma: if vector { params.gamma } else { 0.0 },
            ..params.clone()
        };
        Ok(Self {
            model: Model::new(grid, p, Dealiasing::TwoThirds)?,
            vector,
            demag,
        })
    }

    pub fn check_names(&self) -> Vec<(&'static str, CheckKind)> {
        let mut names = vec![
            (CHECK_GRAD_PRODUCT, CheckKind::Identity),
            (CHECK_LAPLACIAN_PRODUCT, CheckKind::Identity),
        ];
        if self.vector {
            names.push((CHECK_ANISOTROPY, CheckKind::Inequality));
        }
        if self.demag {
            names.push((CHECK_DEMAG, CheckKind::Inequality));
        }
        names.push((CHECK_SOURCE, CheckKind::Inequality));
        names
    }

    /// Violations for one pair, in the order of [`Auditor::check_names`].
    /// Identity defects are scaled by `max(1, max |lhs|)`; inequality
    /// violations are `max(0, lhs - rhs)`.
    pub fn audit_pair(&self, v: &Field, w: &Field) -> Result<Vec<f64>> {
        v.check_compatible(w)?;
        let domain = self.model.domain();
        let grid = *domain.grid();
        let m = v.components();
        let d = grid.dim();
        let np = grid.points();
        let mut out = Vec::new();

        let gv = domain.gradient(v)?;
        let gw = domain.gradient(w)?;
        let lap_v = domain.laplacian(v)?;
        let lap_w = domain.laplacian(w)?;
        let mut v2w = Field::zeros(&grid, m);
        let mut v2 = vec![0.0; np];
        // (v . d_j v) per axis
        let mut vdv = vec![vec![0.0; np]; d];
        for p in 0..np {
            let a = v.at(p);
            v2[p] = a.iter().map(|x| x * x).sum();
            for j in 0..d {
                let g = gv[j].at(p);
                vdv[j][p] = (0..m).map(|c| a[c] * g[c]).sum();
            }
            let b = w.at(p);
            for c in 0..m {
                v2w.values_mut()[c * np + p] = v2[p] * b[c];
            }
        }

        let lhs = domain.gradient(&v2w)?;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for j in 0..d {
            for p in 0..np {
                let b = w.at(p);
                let gwj = gw[j].at(p);
                for c in 0..m {
                    let l = lhs[j].values()[c * np + p];
                    let r = 2.0 * b[c] * vdv[j][p] + v2[p] * gwj[c];
                    scale = scale.max(l.abs());
                    worst = worst.max((l - r).abs());
                }
            }
        }
        out.push(worst / scale);

        let lhs = domain.laplacian(&v2w)?;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for p in 0..np {
            let a = v.at(p);
            let b = w.at(p);
            let la = lap_v.at(p);
            let lb = lap_w.at(p);
            let grad_v2: f64 = (0..d)
                .map(|j| gv[j].at(p).iter().map(|x| x * x).sum::<f64>())
                .sum();
            let v_lap_v: f64 = (0..m).map(|c| a[c] * la[c]).sum();
            for c in 0..m {
                let mixed: f64 = (0..d).map(|j| gw[j].at(p)[c] * vdv[j][p]).sum();
                let r = 2.0 * grad_v2 * b[c] + 2.0 * v_lap_v * b[c] + 4.0 * mixed + v2[p] * lb[c];
                let l = lhs.values()[c * np + p];
                scale = scale.max(l.abs());
                worst = worst.max((l - r).abs());
            }
        }
        out.push(worst / scale);

        let diff = v.axpy(-1.0, w)?;
        let diff_sq = diff.l2_norm().powi(2);
        if self.vector {
            let pa = self
                .model
                .anisotropy_field(v)?
                .axpy(-1.0, &self.model.anisotropy_field(w)?)?;
            let lhs = pa.inner(&diff)?;
            // the one-sided bound holds with lambda1^+; a negative lambda1 only helps
            let lambda1 = self.model.params().lambda1.max(0.0);
            out.push((lhs - lambda1 * diff_sq).max(0.0));
        }
        if self.demag {
            let pd = self.model.demag_field(v)?;
            out.push((pd.l2_norm() - v.l2_norm()).max(0.0));
        }
        let a = match self.model.params().source {
            Source::None => [0.0; 3],
            Source::AffineQuadratic(a) => a,
        };
        let c_lip = a[..m].iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let ds = self
            .model
            .source_term(v)?
            .axpy(-1.0, &self.model.source_term(w)?)?;
        let bound = c_lip * (1.0 + v.sup_norm() + w.sup_norm()) * diff_sq.sqrt();
        out.push((ds.l2_norm() - bound).max(0.0));
        Ok(out)
    }

    pub fn domain(&self) -> &Domain {
        self.model.domain()
    }
}

/// Evaluates the product-rule identities and the anisotropy, demagnetising
/// and source inequalities on `pairs` seeded random smooth field pairs.
/// Test fields are band-limited to a sixth of the grid so that cubic
/// products stay resolved.
pub fn inequality_audit(grid: &Grid, params: &ModelParams, seed: u64, pairs: usize) -> Result<AuditReport> {
    let auditor = Auditor::new(grid, params)?;
    let names = auditor.check_names();
    let mut worst = vec![0.0f64; names.len()];
    let n_min = grid.n().iter().copied().min().unwrap_or(4) as i64;
    let max_mode = (n_min / 6 - 1).max(1);
    let mut rng = seeded_rng(seed);
    let domain = auditor.domain();
    for _ in 0..pairs {
        let av: f64 = rng.gen_range(0.2..3.0);
        let aw: f64 = rng.gen_range(0.2..3.0);
        let shape = |amp| SmoothSpectrum {
            decay: 2.0,
            max_mode: Some(max_mode),
            amplitude: Some(amp * grid.volume().sqrt()),
        };
        let v = random_smooth_field_with(domain, grid.components(), &mut rng, &shape(av))?;
        let w = random_smooth_field_with(domain, grid.components(), &mut rng, &shape(aw))?;
        for (slot, viol) in worst.iter_mut().zip(auditor.audit_pair(&v, &w)?) {
            *slot = slot.max(viol);
        }
    }
    let checks = names
        .into_iter()
        .zip(worst)
        .map(|((name, kind), max_violation)| {
            let tolerance = match kind {
                CheckKind::Identity => IDENTITY_TOLERANCE,
                CheckKind::Inequality => INEQUALITY_SLACK,
            };
            AuditCheck {
                name,
                kind,
                max_violation,
                tolerance,
                passed: max_violation.is_finite() && max_violation <= tolerance,
            }
        })
        .collect();
    Ok(AuditReport {
        pairs,
        seed,
        checks,
    })
}
