//! Declarative run configuration (TOML). Every dimensional key names its unit;
//! unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::QubitLevel;
use crate::master_equation::{EvolveOptions, MeasurementSchedule};
use crate::ode::OdeOptions;
use crate::rates::DEFAULT_TABLE_STEP;
use crate::scheduler::{Direction, Engine, ScheduleObjective};
use crate::spectrum::{BathSpectrumSpec, InverseTemperature};
use crate::thermo::CoolingScanOptions;

pub const FIG1: &str = include_str!("../configs/fig1.toml");
pub const FIG_PURITY: &str = include_str!("../configs/fig_purity.toml");
pub const FIG2C: &str = include_str!("../configs/fig2c.toml");

/// Bundled configuration by name.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig1" => Some(FIG1),
        "fig_purity" => Some(FIG_PURITY),
        "fig2c" => Some(FIG2C),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spectrum: SpectrumConfig,
    pub temperature: TemperatureConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverConfig,
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub exact: ExactConfig,
    pub objective: Option<ObjectiveConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    pub cooling: Option<CoolingConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub eta_max_sq_over_omega_a: f64,
    pub omega0_over_omega_a: f64,
    pub t_c_over_inv_omega_a: f64,
    /// Restrict support to ω0 ± this many half-widths.
    pub band_half_widths: Option<f64>,
    pub support_lo_over_omega_a: Option<f64>,
    pub support_hi_over_omega_a: Option<f64>,
}

impl SpectrumConfig {
    pub fn build(&self) -> Result<BathSpectrumSpec> {
        let mut spec =
            BathSpectrumSpec::lorentzian(self.eta_max_sq_over_omega_a, self.omega0_over_omega_a, self.t_c_over_inv_omega_a)?;
        if let Some(c) = self.band_half_widths {
            if self.support_lo_over_omega_a.is_some() || self.support_hi_over_omega_a.is_some() {
                return Err(Error::Config("band_half_widths and explicit support edges are exclusive".into()));
            }
            spec = spec.band_limited(c)?;
        } else if self.support_lo_over_omega_a.is_some() || self.support_hi_over_omega_a.is_some() {
            let lo = self.support_lo_over_omega_a.unwrap_or(spec.support_lo);
            let hi = self.support_hi_over_omega_a.unwrap_or(spec.support_hi);
            spec = spec.with_support(lo, hi)?;
        }
        Ok(spec)
    }
}

/// α = βħω_a; `inf` is zero temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureConfig {
    pub alpha_system_dimensionless: f64,
    pub alpha_bath_dimensionless: f64,
}

pub fn inverse_temperature(alpha: f64) -> Result<InverseTemperature> {
    if alpha == f64::INFINITY {
        Ok(InverseTemperature::zero_temperature())
    } else {
        InverseTemperature::new(alpha)
    }
}

impl TemperatureConfig {
    pub fn system(&self) -> Result<InverseTemperature> {
        inverse_temperature(self.alpha_system_dimensionless)
    }

    pub fn bath(&self) -> Result<InverseTemperature> {
        inverse_temperature(self.alpha_bath_dimensionless)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Defaults to 5 t_c.
    pub horizon_over_inv_omega_a: Option<f64>,
    pub sample_step_over_inv_omega_a: f64,
    pub rethermalize: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { horizon_over_inv_omega_a: None, sample_step_over_inv_omega_a: 0.02, rethermalize: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub table_step_over_inv_omega_a: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = OdeOptions::default();
        SolverConfig { rtol: o.rtol, atol: o.atol, max_steps: o.max_steps, table_step_over_inv_omega_a: DEFAULT_TABLE_STEP }
    }
}

/// Either explicit `times_over_inv_omega_a` or a periodic train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub times_over_inv_omega_a: Option<Vec<f64>>,
    pub start_over_inv_omega_a: Option<f64>,
    pub interval_over_inv_omega_a: Option<f64>,
    pub count: Option<usize>,
    #[serde(default)]
    pub duration_over_inv_omega_a: f64,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<MeasurementSchedule> {
        let d = self.duration_over_inv_omega_a;
        match (&self.times_over_inv_omega_a, self.start_over_inv_omega_a, self.interval_over_inv_omega_a, self.count) {
            (Some(times), None, None, None) => MeasurementSchedule::new(
                times.iter().map(|&time| crate::master_equation::MeasurementEvent { time, duration: d }).collect(),
            ),
            (None, Some(start), Some(interval), Some(count)) => MeasurementSchedule::periodic(start, interval, count, d),
            _ => Err(Error::Config(
                "schedule needs either times_over_inv_omega_a or start/interval/count, not both".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialLevel {
    Ground,
    Excited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub n_modes: usize,
    pub max_quanta: usize,
    pub band_half_widths: f64,
    pub sample_step_over_inv_omega_a: f64,
    /// Mode occupations every this many samples (0 = never).
    pub mode_every: usize,
    pub initial_level: InitialLevel,
}

impl Default for ExactConfig {
    fn default() -> Self {
        ExactConfig {
            n_modes: 40,
            max_quanta: 2,
            band_half_widths: 5.0,
            sample_step_over_inv_omega_a: 0.05,
            mode_every: 20,
            initial_level: InitialLevel::Ground,
        }
    }
}

impl ExactConfig {
    pub fn level(&self) -> QubitLevel {
        match self.initial_level {
            InitialLevel::Ground => QubitLevel::Ground,
            InitialLevel::Excited => QubitLevel::Excited,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Me,
    CoarseGrained,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub direction: Direction,
    #[serde(default = "default_measurements")]
    pub measurements: usize,
    #[serde(default = "default_min_interval")]
    pub min_interval_over_inv_omega_a: f64,
    #[serde(default = "default_max_interval")]
    pub max_interval_over_inv_omega_a: f64,
    /// Defaults to 20 t_c.
    pub horizon_over_inv_omega_a: Option<f64>,
    #[serde(default = "default_engine")]
    pub engine: EngineKind,
}

fn default_measurements() -> usize {
    10
}
fn default_min_interval() -> f64 {
    0.05
}
fn default_max_interval() -> f64 {
    5.0
}
fn default_engine() -> EngineKind {
    EngineKind::Me
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// α grid for `equilibrium` and `sweep`.
    pub alphas_dimensionless: Vec<f64>,
    /// Rate-table span; defaults to 10 t_c.
    pub rates_t_max_over_inv_omega_a: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { alphas_dimensionless: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0], rates_t_max_over_inv_omega_a: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingConfig {
    pub t_min_over_inv_omega_a: f64,
    pub t_max_over_inv_omega_a: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

impl RunConfig {
    /// Parse and validate.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec().map_err(as_config)?;
        self.temperature.system().map_err(as_config)?;
        self.temperature.bath().map_err(as_config)?;
        let horizon = self.horizon(&spec);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be finite and positive, got {horizon}")));
        }
        if !(self.run.sample_step_over_inv_omega_a > 0.0) {
            return Err(Error::Config("sample_step_over_inv_omega_a must be positive".into()));
        }
        let s = &self.solver;
        if !(s.rtol > 0.0 && s.atol > 0.0 && s.max_steps > 0 && s.table_step_over_inv_omega_a > 0.0) {
            return Err(Error::Config("solver tolerances, max_steps and table step must be positive".into()));
        }
        if let Some(sc) = &self.schedule {
            sc.build().map_err(as_config)?.validate(horizon).map_err(as_config)?;
        }
        let e = &self.exact;
        if e.n_modes == 0 || !(e.band_half_widths > 0.0) || !(e.sample_step_over_inv_omega_a > 0.0) {
            return Err(Error::Config("exact: n_modes, band_half_widths and sample step must be positive".into()));
        }
        if let Some(obj) = self.objective(&spec) {
            obj.validate().map_err(as_config)?;
        }
        if self.grid.alphas_dimensionless.is_empty() {
            return Err(Error::Config("grid.alphas_dimensionless is empty".into()));
        }
        for &a in &self.grid.alphas_dimensionless {
            inverse_temperature(a).map_err(as_config)?;
        }
        if let Some(t) = self.grid.rates_t_max_over_inv_omega_a {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config("rates_t_max_over_inv_omega_a must be finite and positive".into()));
            }
        }
        if let Some(c) = &self.cooling {
            if !(c.t_min_over_inv_omega_a > 0.0 && c.t_max_over_inv_omega_a > c.t_min_over_inv_omega_a) || c.points < 2 {
                return Err(Error::Config("cooling scan needs 0 < t_min < t_max and points >= 2".into()));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<BathSpectrumSpec> {
        self.spectrum.build()
    }

    pub fn horizon(&self, spec: &BathSpectrumSpec) -> f64 {
        self.run.horizon_over_inv_omega_a.unwrap_or(5.0 * spec.t_c())
    }

    pub fn schedule(&self) -> Result<MeasurementSchedule> {
        self.schedule.as_ref().map_or(Ok(MeasurementSchedule::empty()), ScheduleConfig::build)
    }

    pub fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.solver.rtol, atol: self.solver.atol, max_steps: self.solver.max_steps }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            ode: self.ode(),
            sample_step: self.run.sample_step_over_inv_omega_a,
            table_step: self.solver.table_step_over_inv_omega_a,
            rethermalize: self.run.rethermalize,
        }
    }

    pub fn objective(&self, spec: &BathSpectrumSpec) -> Option<ScheduleObjective> {
        self.objective.map(|o| ScheduleObjective {
            direction: o.direction,
            measurements: o.measurements,
            min_interval: o.min_interval_over_inv_omega_a,
            max_interval: o.max_interval_over_inv_omega_a,
            horizon: o.horizon_over_inv_omega_a.unwrap_or(20.0 * spec.t_c()),
            engine: match o.engine {
                EngineKind::Me => Engine::MasterEquation,
                EngineKind::CoarseGrained => Engine::CoarseGrained,
                EngineKind::Exact => Engine::Exact {
                    n_modes: self.exact.n_modes,
                    coverage: self.exact.band_half_widths,
                    max_quanta: self.exact.max_quanta,
                },
            },
        })
    }

    pub fn cooling_options(&self, spec: &BathSpectrumSpec) -> CoolingScanOptions {
        match self.cooling {
            Some(c) => CoolingScanOptions {
                t_min: c.t_min_over_inv_omega_a,
                t_max: c.t_max_over_inv_omega_a,
                points: c.points,
                ..CoolingScanOptions::for_spec(spec)
            },
            None => CoolingScanOptions::for_spec(spec),
        }
    }

    pub fn rates_t_max(&self, spec: &BathSpectrumSpec) -> f64 {
        self.grid.rates_t_max_over_inv_omega_a.unwrap_or(10.0 * spec.t_c())
    }

    /// SHA-256 of the canonical TOML rendering (stable under reformatting).
    pub fn hash_hex(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
