//! The six experiments and the artifacts they write.

use std::path::{Path, PathBuf};

use llbar_core::diagnostics::{
    absorbing_entry_time, dissipation_rates, inequality_audit, linear_fit, lyapunov_dissipation_residual,
    rate_fit, steady_residual, trajectory_distance, AuditReport, LinearFit, NormKind, RunRecord,
};
use llbar_core::random::{random_smooth_field, SmoothSpectrum};
use llbar_core::{integrate, Field, GalerkinSystem, Model, StepperConfig};
use llbar_core::stepper::Stepper;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{self, Checkpoint};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::initial::seeded_initial_field;
use crate::output::{ensure_dir, write_json, write_record, write_table, Provenance};

/// A model, its initial datum and the provenance stamped on every output.
#[derive(Clone, Debug)]
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub model: Model,
    pub u0: Field,
    pub provenance: Provenance,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let model = Model::new(&grid, cfg.model_params()?, cfg.dealiasing())?;
        let u0 = seeded_initial_field(&cfg.initial, model.domain(), cfg.seed)?;
        let provenance = Provenance {
            experiment: cfg.experiment.name().to_string(),
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            nu_infinity: model.nu_infinity(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        Ok(Self {
            cfg: cfg.clone(),
            model,
            u0,
            provenance,
        })
    }

    pub fn stepper(&self) -> StepperConfig {
        self.cfg.stepper_config()
    }
}

/// One acceptance threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("<= {limit:e}"),
            passed: value <= limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!(">= {limit:e}"),
            passed: value >= limit,
        }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("{target} +- {tol}"),
            passed: (value - target).abs() <= tol,
        }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            requirement: "holds".into(),
            passed: ok,
        }
    }
}

/// Integrates `u0` and records diagnostics at every record point.
pub fn trajectory(model: &Model, u0: &Field, cfg: &StepperConfig) -> Result<(RunRecord, Field)> {
    let mut record = RunRecord::new();
    let mut failure = None;
    let last = integrate(u0, model, cfg, |t, u| {
        if failure.is_none() {
            failure = record.push(t, u, model).err();
        }
    })?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok((record, last)),
    }
}

/// Every recorded `(t, u)` and the final field.
pub fn sampled_trajectory(model: &Model, u0: &Field, cfg: &StepperConfig) -> Result<(Vec<(f64, Field)>, Field)> {
    let mut samples = Vec::new();
    let last = integrate(u0, model, cfg, |t, u| samples.push((t, u.clone())))?;
    Ok((samples, last))
}

fn fit_summary(fit: &LinearFit) -> FitSummary {
    FitSummary {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub records: usize,
    pub final_time: f64,
    pub final_l2: f64,
    pub final_h_residual: f64,
    /// `||u||^2` bound `4 kappa1 |O| / kappa2`: four times the squared norm of
    /// the uniform minimisers.
    pub absorbing_radius_sq: Option<f64>,
    pub absorbing_entry_time: Option<f64>,
    /// Largest increase of the Lyapunov functional between records, for
    /// gradient flows.
    pub lyapunov_max_increase: Option<f64>,
    /// `max |r_n| / max sigma ||H||^2` of the energy law, for gradient flows.
    pub dissipation_residual_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SimulateResult {
    pub record: RunRecord,
    pub final_field: Field,
    pub summary: SimulateSummary,
    pub checks: Vec<Check>,
}

pub fn simulate(setup: &Setup) -> Result<SimulateResult> {
    let model = &setup.model;
    let p = model.params();
    let cfg = setup.stepper();
    let gradient = p.is_gradient_flow() && p.kappa2 > 0.0;
    let (record, final_field, residual_ratio) = if gradient {
        let (samples, last) = sampled_trajectory(model, &setup.u0, &cfg)?;
        let mut record = RunRecord::new();
        for (t, u) in &samples {
            record.push(*t, u, model)?;
        }
        let ratio = if samples.len() > 1 {
            let r = lyapunov_dissipation_residual(&samples, model)?;
            let mut scale: f64 = 0.0;
            for (_, u) in &samples {
                scale = scale.max(p.sigma * dissipation_rates(model, u)?.0);
            }
            let worst = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            Some(if scale > 0.0 { worst / scale } else { worst })
        } else {
            None
        };
        (record, last, ratio)
    } else {
        let (record, last) = trajectory(model, &setup.u0, &cfg)?;
        (record, last, None)
    };
    let absorbing_radius_sq =
        (p.kappa2 > 0.0).then(|| 4.0 * p.kappa1.max(0.0) * model.grid().volume() / p.kappa2);
    let lyapunov_max_increase = gradient.then(|| {
        record
            .lyapunov
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let final_state = steady_residual(&final_field, model)?;
    let summary = SimulateSummary {
        records: record.len(),
        final_time: cfg.steps() as f64 * cfg.dt,
        final_l2: final_field.l2_norm(),
        final_h_residual: final_state.h_residual,
        absorbing_radius_sq,
        absorbing_entry_time: absorbing_radius_sq.and_then(|r| absorbing_entry_time(&record, r)),
        lyapunov_max_increase,
        dissipation_residual_ratio: residual_ratio,
    };
    let finite = record.l2.iter().chain(&record.h2).all(|v| v.is_finite());
    let mut checks = vec![Check::holds("finite record", finite)];
    if let (Some(inc), Some(l0)) = (lyapunov_max_increase, record.lyapunov.first()) {
        checks.push(Check::at_most(
            "Lyapunov increase between records",
            inc,
            1e-10 * (1.0 + l0.abs()),
        ));
    }
    Ok(SimulateResult {
        record,
        final_field,
        summary,
        checks,
    })
}

/// Distances between two trajectories at shared record times.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DistanceSeries {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareSummary {
    pub perturbation: f64,
    pub initial_l2: f64,
    pub initial_h1: f64,
    pub initial_h2: f64,
    pub final_l2: f64,
    pub final_h1: f64,
    pub final_h2: f64,
}

#[derive(Clone, Debug)]
pub struct CompareResult {
    pub record_a: RunRecord,
    pub record_b: RunRecord,
    pub distances: DistanceSeries,
    pub summary: CompareSummary,
    pub checks: Vec<Check>,
}

/// Perturbed initial datum: `u0 + w` with `w` a seeded smooth field of
/// size `perturbation` in the configured norm.
pub fn perturbed_initial(setup: &Setup) -> Result<Field> {
    let c = &setup.cfg.compare;
    let domain = setup.model.domain();
    let shape = SmoothSpectrum {
        decay: c.perturbation_decay,
        ..Default::default()
    };
    let seed = setup.cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    let raw = random_smooth_field(domain, setup.u0.components(), seed, &shape)?;
    let size = llbar_core::diagnostics::norm(domain, &raw, c.perturbation_norm.kind())?;
    if !(size > 0.0) {
        return Err(HarnessError::Config("perturbation direction vanishes on this grid".into()));
    }
    Ok(setup.u0.axpy(c.perturbation / size, &raw)?)
}

pub fn compare(setup: &Setup) -> Result<CompareResult> {
    let model = &setup.model;
    let cfg = setup.stepper();
    let v0 = perturbed_initial(setup)?;
    let (a, b) = rayon::join(
        || sampled_trajectory(model, &setup.u0, &cfg),
        || sampled_trajectory(model, &v0, &cfg),
    );
    let ((a, _), (b, _)) = (a?, b?);
    let domain = model.domain();
    let mut record_a = RunRecord::new();
    let mut record_b = RunRecord::new();
    let mut distances = DistanceSeries::default();
    for ((t, u), (_, v)) in a.iter().zip(&b) {
        record_a.push(*t, u, model)?;
        record_b.push(*t, v, model)?;
        distances.times.push(*t);
        distances.l2.push(trajectory_distance(domain, u, v, NormKind::L2)?);
        distances.h1.push(trajectory_distance(domain, u, v, NormKind::H1)?);
        distances.h2.push(trajectory_distance(domain, u, v, NormKind::H2)?);
    }
    let last = distances.times.len() - 1;
    let summary = CompareSummary {
        perturbation: setup.cfg.compare.perturbation,
        initial_l2: distances.l2[0],
        initial_h1: distances.h1[0],
        initial_h2: distances.h2[0],
        final_l2: distances.l2[last],
        final_h1: distances.h1[last],
        final_h2: distances.h2[last],
    };
    let finite = distances.l2.iter().chain(&distances.h2).all(|v| v.is_finite());
    Ok(CompareResult {
        record_a,
        record_b,
        distances,
        summary,
        checks: vec![Check::holds("finite distances", finite)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub t_end: f64,
    pub lambda2_forced_zero: bool,
    pub points: Vec<SweepPoint>,
    pub fit: FitSummary,
    pub checks: Vec<Check>,
}

/// Distance at `t_end` between the run at each `eps` and the `eps = 0` run.
pub fn sweep_eps(setup: &Setup) -> Result<SweepResult> {
    let sweep = &setup.cfg.sweep;
    let cfg = setup.stepper();
    let at = |eps: f64| -> Result<Field> {
        let mut p = setup.model.params().clone();
        p.eps = eps;
        let model = setup.model.with_params(p)?;
        Ok(integrate(&setup.u0, &model, &cfg, |_, _| {})?)
    };
    let mut all: Vec<f64> = vec![0.0];
    all.extend(&sweep.eps);
    let finals = all.par_iter().map(|e| at(*e)).collect::<Vec<_>>();
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let domain = setup.model.domain();
    let points = all[1..]
        .iter()
        .zip(&finals[1..])
        .map(|(eps, u)| {
            Ok(SweepPoint {
                eps: *eps,
                distance: trajectory_distance(domain, u, &finals[0], sweep.norm.kind())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.eps, p.distance)).collect();
    let fit = fit_summary(&rate_fit(&pairs)?);
    let checks = vec![
        Check::within("eps rate slope", fit.slope, sweep.expected_slope, sweep.slope_tolerance),
        Check::at_least("eps rate r^2", fit.r2, sweep.min_r2),
    ];
    Ok(SweepResult {
        t_end: cfg.steps() as f64 * cfg.dt,
        lambda2_forced_zero: setup.cfg.model.lambda2 != 0.0,
        points,
        fit,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteadySummary {
    pub time: f64,
    pub steps: usize,
    pub h_residual: f64,
    pub rhs_residual: f64,
    /// Fit of `ln ||H||` against `t` over the last decade of `||H||`.
    pub decay_fit: Option<FitSummary>,
    pub decay_points: usize,
}

#[derive(Clone, Debug)]
pub struct SteadyResult {
    pub record: RunRecord,
    pub final_field: Field,
    pub summary: SteadySummary,
    pub checks: Vec<Check>,
}

/// Relaxes until `||H||` is a decade below the tolerance or `t_end`.
pub fn steady(setup: &Setup) -> Result<SteadyResult> {
    let model = &setup.model;
    let domain = model.domain();
    let cfg = setup.stepper();
    let stop = setup.cfg.steady.tolerance / 10.0;
    let mut stepper = Stepper::new(model, cfg)?;
    let mut record = RunRecord::new();
    let mut s = domain.to_spectral(&setup.u0)?;
    record.push(0.0, &setup.u0, model)?;
    let mut u = setup.u0.clone();
    let mut steps = 0;
    for i in 1..=cfg.steps() {
        s = stepper.advance(&s)?;
        steps = i;
        if i % cfg.record_every == 0 || i == cfg.steps() {
            u = domain.to_physical(&s)?;
            record.push(i as f64 * cfg.dt, &u, model)?;
            if record.h_residual.last().is_some_and(|h| *h < stop) {
                break;
            }
        }
    }
    let res = steady_residual(&u, model)?;
    let h = &record.h_residual;
    let h_final = *h.last().unwrap();
    let start = h.iter().rposition(|v| *v >= 10.0 * h_final);
    let (decay_fit, decay_points) = match start {
        Some(i) if h.len() - i >= 3 && h_final > 0.0 => {
            let t = &record.times[i..];
            let y: Vec<f64> = h[i..].iter().map(|v| v.ln()).collect();
            (Some(fit_summary(&linear_fit(t, &y)?)), t.len())
        }
        _ => (None, 0),
    };
    let spec = &setup.cfg.steady;
    let checks = vec![
        Check::at_most("final ||H||", res.h_residual, spec.tolerance),
        Check::at_least("last-decade log-linear r^2", decay_fit.map_or(f64::NAN, |f| f.r2), spec.min_r2),
    ];
    Ok(SteadyResult {
        summary: SteadySummary {
            time: steps as f64 * cfg.dt,
            steps,
            h_residual: res.h_residual,
            rhs_residual: res.rhs_residual,
            decay_fit,
            decay_points,
        },
        record,
        final_field: u,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub modes: usize,
    pub times: Vec<f64>,
    /// `||u_pseudospectral - u_galerkin||_L2` at each record time.
    pub discrepancy: Vec<f64>,
    pub max_discrepancy: f64,
    pub checks: Vec<Check>,
}

/// Runs the stepper and the Galerkin RK4 system from the same projected
/// initial datum and compares them on the grid.
pub fn oracle_check(setup: &Setup) -> Result<OracleResult> {
    let spec = &setup.cfg.oracle;
    let model = &setup.model;
    let grid = *model.grid();
    let cfg = setup.stepper();
    let system = GalerkinSystem::project(&setup.u0, spec.modes, model.params().clone())?;
    let start = system.reconstruct(&grid)?;
    let (samples, _) = sampled_trajectory(model, &start, &cfg)?;
    let wanted: Vec<usize> = samples.iter().map(|(t, _)| (t / spec.dt).round() as usize).collect();
    for ((t, _), j) in samples.iter().zip(&wanted) {
        if (*j as f64 * spec.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(HarnessError::Config(format!(
                "oracle.dt = {} does not divide the record time {t}",
                spec.dt
            )));
        }
    }
    let t_end = samples.last().unwrap().0;
    let mut snapshots = Vec::with_capacity(samples.len());
    let mut next = 0;
    let mut capture = |t: f64, sys: &GalerkinSystem| {
        let j = (t / spec.dt).round() as usize;
        while next < wanted.len() && wanted[next] == j {
            snapshots.push(sys.reconstruct(&grid));
            next += 1;
        }
    };
    if t_end > 0.0 {
        system.integrate_rk4_observed(spec.dt, t_end, &mut capture)?;
    } else {
        capture(0.0, &system);
    }
    let mut discrepancy = Vec::with_capacity(samples.len());
    for ((_, u), g) in samples.iter().zip(snapshots) {
        discrepancy.push((u - &g?).l2_norm());
    }
    let max_discrepancy = discrepancy.iter().fold(0.0f64, |a, v| a.max(*v));
    Ok(OracleResult {
        modes: spec.modes,
        times: samples.iter().map(|(t, _)| *t).collect(),
        discrepancy,
        max_discrepancy,
        checks: vec![Check::at_most("max L2 discrepancy", max_discrepancy, spec.tolerance)],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditCheckSummary {
    pub name: String,
    pub kind: String,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditResult {
    pub pairs: usize,
    pub seed: u64,
    pub audit: Vec<AuditCheckSummary>,
    pub checks: Vec<Check>,
}

pub fn audit(setup: &Setup) -> Result<AuditResult> {
    let report: AuditReport = inequality_audit(
        setup.model.grid(),
        setup.model.params(),
        setup.cfg.seed,
        setup.cfg.audit.pairs,
    )?;
    let audit: Vec<AuditCheckSummary> = report
        .checks
        .iter()
        .map(|c| AuditCheckSummary {
            name: c.name.to_string(),
            kind: format!("{:?}", c.kind).to_lowercase(),
            max_violation: c.max_violation,
            tolerance: c.tolerance,
            passed: c.passed,
        })
        .collect();
    let checks = report
        .checks
        .iter()
        .map(|c| Check::at_most(c.name, c.max_violation, c.tolerance))
        .collect();
    Ok(AuditResult {
        pairs: report.pairs,
        seed: report.seed,
        audit,
        checks,
    })
}

/// What a run wrote and whether its thresholds held.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: Experiment,
    pub artifacts: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    experiment: Experiment,
    result: &'a T,
}

fn write_summary<T: Serialize>(path: &Path, prov: &Provenance, experiment: Experiment, result: &T) -> Result<()> {
    write_json(path, prov, &Summary { experiment, result })
}

fn save_final(setup: &Setup, dir: &Path, field: &Field, time: f64, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    if !setup.cfg.output.checkpoint {
        return Ok(());
    }
    let path = dir.join("final.ckpt");
    checkpoint::save(
        &path,
        &Checkpoint {
            field: field.clone(),
            time,
            seed: setup.cfg.seed,
            config_hash: checkpoint::hash_bytes(&setup.provenance.config_hash),
        },
    )?;
    artifacts.push(path);
    Ok(())
}

/// Runs the configured experiment and writes its artifacts under `dir`.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunReport> {
    let setup = Setup::new(cfg)?;
    ensure_dir(dir)?;
    let prov = &setup.provenance;
    let mut artifacts = Vec::new();
    let summary_path = dir.join("summary.json");
    let checks = match cfg.experiment {
        Experiment::Simulate => {
            let r = simulate(&setup)?;
            let path = dir.join("record.csv");
            write_record(&path, prov, &r.record)?;
            artifacts.push(path);
            save_final(&setup, dir, &r.final_field, r.summary.final_time, &mut artifacts)?;
            write_summary(&summary_path, prov, cfg.experiment, &r.summary)?;
            artifacts.push(summary_path.clone());
            r.checks
        }
        Experiment::Compare => {
            let r = compare(&setup)?;
            for (name, rec) in [("record_a.csv", &r.record_a), ("record_b.csv", &r.record_b)] {
                let path = dir.join(name);
                write_record(&path, prov, rec)?;
                artifacts.push(path);
            }
            let d = &r.distances;
            let rows: Vec<Vec<f64>> = (0..d.times.len())
                .map(|i| vec![d.times[i], d.l2[i], d.h1[i], d.h2[i]])
                .collect();
            let path = dir.join("distance.csv");
            write_table(&path, prov, &["t", "l2", "h1", "h2"], &rows)?;
            artifacts.push(path);
            write_summary(&summary_path, prov, cfg.experiment, &r.summary)?;
            artifacts.push(summary_path.clone());
            r.checks
        }
        Experiment::SweepEps => {
            let r = sweep_eps(&setup)?;
            let rows: Vec<Vec<f64>> = r.points.iter().map(|p| vec![p.eps, p.distance]).collect();
            let path = dir.join("sweep.csv");
            write_table(&path, prov, &["eps", "distance"], &rows)?;
            artifacts.push(path);
            write_summary(&summary_path, prov, cfg.experiment, &r)?;
            artifacts.push(summary_path.clone());
            r.checks
        }
        Experiment::Steady => {
            let r = steady(&setup)?;
            let path = dir.join("record.csv");
            write_record(&path, prov, &r.record)?;
            artifacts.push(path);
            save_final(&setup, dir, &r.final_field, r.summary.time, &mut artifacts)?;
            write_summary(&summary_path, prov, cfg.experiment, &r.summary)?;
            artifacts.push(summary_path.clone());
            r.checks
        }
        Experiment::OracleCheck => {
            let r = oracle_check(&setup)?;
            let rows: Vec<Vec<f64>> = r.times.iter().zip(&r.discrepancy).map(|(t, d)| vec![*t, *d]).collect();
            let path = dir.join("oracle.csv");
            write_table(&path, prov, &["t", "l2_discrepancy"], &rows)?;
            artifacts.push(path);
            write_summary(&summary_path, prov, cfg.experiment, &r)?;
            artifacts.push(summary_path.clone());
            r.checks
        }
        Experiment::Audit => {
            let r = audit(&setup)?;
            write_summary(&summary_path, prov, cfg.experiment, &r)?;
            artifacts.push(summary_path.clone());
            r.checks
        }
    };
    Ok(RunReport {
        experiment: cfg.experiment,
        artifacts,
        checks,
    })
}
