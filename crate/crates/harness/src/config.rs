//! TOML experiment configuration.

use std::path::PathBuf;

use llbar_core::diagnostics::NormKind;
use llbar_core::{
    Boundary, Current, CurrentWave, Dealiasing, Grid, ModelParams, Scheme, Source, StepperConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Simulate,
    Compare,
    SweepEps,
    Steady,
    OracleCheck,
    Audit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Compare => "compare",
            Experiment::SweepEps => "sweep-eps",
            Experiment::Steady => "steady",
            Experiment::OracleCheck => "oracle-check",
            Experiment::Audit => "audit",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySpec {
    #[default]
    Periodic,
    Neumann,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DealiasingSpec {
    #[default]
    TwoThirds,
    Padded,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSpec {
    ImexEuler,
    #[default]
    ImexBdf2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSpec {
    L2,
    L4,
    H1,
    H2,
}

impl NormSpec {
    pub fn kind(self) -> NormKind {
        match self {
            NormSpec::L2 => NormKind::L2,
            NormSpec::L4 => NormKind::L4,
            NormSpec::H1 => NormKind::H1,
            NormSpec::H2 => NormKind::H2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of field components, 1 (scalar) or 3 (vector).
    #[serde(default = "one")]
    pub components: usize,
    /// Points per axis; its length is the spatial dimension.
    pub n: Vec<usize>,
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub dealiasing: DealiasingSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub amplitude: [f64; 3],
    pub mode: [i64; 3],
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurrentSpec {
    Constant { value: [f64; 3] },
    Waves { waves: Vec<WaveSpec> },
}

impl Default for CurrentSpec {
    fn default() -> Self {
        CurrentSpec::Constant { value: [0.0; 3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub sigma: f64,
    pub eps: f64,
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub easy_axis: [f64; 3],
    pub beta1: f64,
    pub beta2: f64,
    pub chi: f64,
    pub anisotropy: bool,
    pub demag: bool,
    pub current: CurrentSpec,
    /// `a` in `S(u) = u + (a . u) u`; no source when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<[f64; 3]>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            sigma: p.sigma,
            eps: p.eps,
            gamma: p.gamma,
            kappa1: p.kappa1,
            kappa2: p.kappa2,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            easy_axis: p.easy_axis,
            beta1: p.beta1,
            beta2: p.beta2,
            chi: p.chi,
            anisotropy: p.anisotropy,
            demag: p.demag,
            current: CurrentSpec::default(),
            source: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperSpec {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeSpec,
    pub record_every: usize,
    pub max_field_norm: f64,
}

impl Default for StepperSpec {
    fn default() -> Self {
        let c = StepperConfig::default();
        Self {
            dt: c.dt,
            t_end: c.t_end,
            scheme: SchemeSpec::default(),
            record_every: c.record_every,
            max_field_norm: c.max_field_norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(default)]
    pub component: usize,
    pub mode: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Random Fourier coefficients decaying like `(1 + |k|^2)^(-decay/2)`,
    /// drawn from the top-level seed.
    Random {
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitude: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_mode: Option<i64>,
    },
    Constant {
        value: Vec<f64>,
    },
    /// Sum of `amplitude * cos(k . x + phase)` on periodic grids, or of
    /// `amplitude * prod_a cos(k_a x_a)` on Neumann grids.
    Modes {
        modes: Vec<ModeSpec>,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Random {
            decay: default_decay(),
            amplitude: Some(1.0),
            max_mode: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    /// Size of the perturbation of the second initial datum.
    pub perturbation: f64,
    /// Norm in which the perturbation has that size.
    pub perturbation_norm: NormSpec,
    pub perturbation_decay: f64,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            perturbation: 1e-3,
            perturbation_norm: NormSpec::L2,
            perturbation_decay: default_decay(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub eps: Vec<f64>,
    pub norm: NormSpec,
    pub expected_slope: f64,
    pub slope_tolerance: f64,
    pub min_r2: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            eps: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            norm: NormSpec::H1,
            expected_slope: 1.0,
            slope_tolerance: 0.1,
            min_r2: 0.98,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySpec {
    /// Required final `||H||_L2`.
    pub tolerance: f64,
    /// Required r^2 of the log-linear fit over the last decade of `||H||`.
    pub min_r2: f64,
}

impl Default for SteadySpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            min_r2: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSpec {
    pub modes: usize,
    /// RK4 step of the Galerkin system.
    pub dt: f64,
    pub tolerance: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            modes: 8,
            dt: 1e-4,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    pub pairs: usize,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self { pairs: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Write the final field as a checkpoint.
    pub checkpoint: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            checkpoint: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub stepper: StepperSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub compare: CompareSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub steady: SteadySpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub audit: AuditSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn one() -> usize {
    1
}

fn default_decay() -> f64 {
    2.0
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates TOML text.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Format(e.to_string()))
    }

    /// SHA-256 of the canonical serialization and the crate version.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.to_toml()?.as_bytes());
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        Ok(hex(&h.finalize()))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let params = self.model_params()?;
        if self.experiment == Experiment::SweepEps && grid.dim() > 2 {
            return Err(config_err(format!(
                "the eps sweep needs d <= 2, got d = {}",
                grid.dim()
            )));
        }
        params.validated(grid.components())?;
        self.stepper_config().validate()?;
        self.check_initial(&grid)?;
        let c = &self.compare;
        if !(c.perturbation > 0.0 && c.perturbation.is_finite()) {
            return Err(config_err("compare.perturbation must be positive"));
        }
        let s = &self.sweep;
        if s.eps.len() < 3 || s.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(config_err("sweep.eps needs at least three positive values"));
        }
        if self.oracle.modes == 0 || !(self.oracle.dt > 0.0) {
            return Err(config_err("oracle.modes and oracle.dt must be positive"));
        }
        if self.audit.pairs == 0 {
            return Err(config_err("audit.pairs must be positive"));
        }
        Ok(())
    }

    fn check_initial(&self, grid: &Grid) -> Result<()> {
        let m = grid.components();
        match &self.initial {
            InitialSpec::Random { decay, amplitude, max_mode } => {
                if !decay.is_finite() || amplitude.is_some_and(|a| !(a >= 0.0 && a.is_finite())) {
                    return Err(config_err("initial decay and amplitude must be finite, amplitude >= 0"));
                }
                if max_mode.is_some_and(|k| k < 0) {
                    return Err(config_err("initial.max_mode must be non-negative"));
                }
            }
            InitialSpec::Constant { value } => {
                if value.len() != m {
                    return Err(config_err(format!(
                        "initial constant has {} entries for {m} components",
                        value.len()
                    )));
                }
            }
            InitialSpec::Modes { modes } => {
                for md in modes {
                    if md.component >= m || md.mode.len() != grid.dim() {
                        return Err(config_err(format!(
                            "initial mode {:?} of component {} does not fit a {}-d grid with {m} components",
                            md.mode,
                            md.component,
                            grid.dim()
                        )));
                    }
                    if grid.boundary() == Boundary::NeumannCosine && (md.phase != 0.0 || md.mode.iter().any(|q| *q < 0)) {
                        return Err(config_err("Neumann initial modes need non-negative indices and zero phase"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let boundary = match g.boundary {
            BoundarySpec::Periodic => Boundary::Periodic,
            BoundarySpec::Neumann => Boundary::NeumannCosine,
        };
        Ok(Grid::new(g.n.len(), g.components, &g.n, &g.lengths, boundary)?)
    }

    pub fn dealiasing(&self) -> Dealiasing {
        match self.grid.dealiasing {
            DealiasingSpec::TwoThirds => Dealiasing::TwoThirds,
            DealiasingSpec::Padded => Dealiasing::Padded,
        }
    }

    /// Model coefficients as written, before the scalar-case switches.
    pub fn model_params(&self) -> Result<ModelParams> {
        let s = &self.model;
        let current = match &s.current {
            CurrentSpec::Constant { value } => Current::Constant(*value),
            CurrentSpec::Waves { waves } => Current::Waves(
                waves
                    .iter()
                    .map(|w| CurrentWave {
                        amplitude: w.amplitude,
                        mode: w.mode,
                        phase: w.phase,
                    })
                    .collect(),
            ),
        };
        let mut p = ModelParams {
            sigma: s.sigma,
            eps: s.eps,
            gamma: s.gamma,
            kappa1: s.kappa1,
            kappa2: s.kappa2,
            lambda1: s.lambda1,
            lambda2: s.lambda2,
            easy_axis: s.easy_axis,
            beta1: s.beta1,
            beta2: s.beta2,
            chi: s.chi,
            current,
            source: s.source.map_or(Source::None, Source::AffineQuadratic),
            demag: s.demag,
            anisotropy: s.anisotropy,
        };
        if self.experiment == Experiment::SweepEps {
            p.lambda2 = 0.0;
        }
        Ok(p)
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        StepperConfig {
            dt: s.dt,
            t_end: s.t_end,
            scheme: match s.scheme {
                SchemeSpec::ImexEuler => Scheme::ImexEuler,
                SchemeSpec::ImexBdf2 => Scheme::ImexBdf2,
            },
            record_every: s.record_every,
            max_field_norm: s.max_field_norm,
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = "
experiment = \"simulate\"
[grid]
n = [32]
lengths = [6.0]
";

    #[test]
    fn minimal_scalar_config_fills_defaults() {
        let cfg = ExperimentConfig::parse(SCALAR).unwrap();
        assert_eq!(cfg.grid.components, 1);
        assert_eq!(cfg.model, ModelSpec::default());
        assert_eq!(cfg.model.gamma, 0.0);
        assert_eq!(cfg.stepper, StepperSpec::default());
        assert_eq!(cfg.initial, InitialSpec::default());
        let p = cfg.model_params().unwrap().validated(1).unwrap();
        assert_eq!(p.gamma, 0.0);
    }

    #[test]
    fn scalar_gyration_is_rejected() {
        let text = format!("{SCALAR}[model]\ngamma = 0.5\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("gamma = 0"), "{err}");
    }

    #[test]
    fn smallness_violation_is_rejected() {
        let text = format!("{SCALAR}[model]\nchi = 1.0\nkappa2 = 1.0\nsigma = 1.0\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("2 chi^2 < kappa2 sigma^2"), "{err}");
    }

    #[test]
    fn easy_axis_must_be_unit() {
        let text = "[grid]\ncomponents = 3\nn = [8]\nlengths = [1.0]\n[model]\neasy_axis = [1.0, 1.0, 0.0]\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert!(err.to_string().contains("unit vector"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("[grid]\nn = [8]\nlengths = oops\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = ExperimentConfig::parse("[grid]\nn = [8]\nlengths = [1.0]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let text = "
experiment = \"sweep-eps\"
seed = 17
[grid]
components = 3
n = [16, 8]
lengths = [2.0, 1.5]
boundary = \"periodic\"
dealiasing = \"padded\"
[model]
gamma = 0.3
lambda1 = 0.5
lambda2 = 0.2
anisotropy = true
demag = true
beta1 = 0.1
chi = 0.2
source = [0.1, -0.2, 0.3]
[model.current]
kind = \"waves\"
waves = [{ amplitude = [1.0, 0.5, 0.0], mode = [1, 2, 0], phase = 0.25 }]
[stepper]
dt = 2.5e-4
t_end = 0.5
scheme = \"imex-euler\"
[initial]
kind = \"modes\"
modes = [{ component = 2, mode = [1, -1], amplitude = 0.7 }]
[sweep]
eps = [0.1, 0.03, 0.01]
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash().unwrap(), again.hash().unwrap());
        assert_eq!(cfg.model_params().unwrap().lambda2, 0.0);
        let mut other = cfg.clone();
        other.seed = 18;
        assert_ne!(cfg.hash().unwrap(), other.hash().unwrap());
    }

    #[test]
    fn sweep_needs_low_dimension() {
        let text = "experiment = \"sweep-eps\"\n[grid]\nn = [4, 4, 4]\nlengths = [1.0, 1.0, 1.0]\n";
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn initial_spec_shapes_are_checked() {
        let text = format!("{SCALAR}[initial]\nkind = \"constant\"\nvalue = [1.0, 2.0]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = format!("{SCALAR}[initial]\nkind = \"modes\"\nmodes = [{{ mode = [1, 1], amplitude = 1.0 }}]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
