//! Population rate equations with measurement-induced clock resets.
//!
//! dρ_ee/dt = R_g(t′)ρ_gg − R_e(t′)ρ_ee, where t′ is the time since the last
//! non-selective measurement (or since t = 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeOptions};
use crate::rates::{RateTable, DEFAULT_TABLE_STEP};
use crate::spectrum::{BathSpectrumSpec, InverseTemperature, OMEGA_A};

/// Diagonal qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitPopulations {
    pub rho_ee: f64,
    pub rho_gg: f64,
}

impl QubitPopulations {
    pub fn new(rho_ee: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_ee) {
            return Err(Error::State(format!("excited population {rho_ee} outside [0, 1]")));
        }
        Ok(QubitPopulations { rho_ee, rho_gg: 1.0 - rho_ee })
    }

    pub fn ground() -> Self {
        QubitPopulations { rho_ee: 0.0, rho_gg: 1.0 }
    }

    /// ρ_ee − ρ_gg.
    pub fn inversion(&self) -> f64 {
        self.rho_ee - self.rho_gg
    }
}

/// Gibbs populations at inverse temperature α_s.
pub fn initial_from_temperature(alpha_s: InverseTemperature) -> QubitPopulations {
    let rho_ee = 0.5 * (1.0 - (0.5 * alpha_s.alpha()).tanh());
    QubitPopulations { rho_ee, rho_gg: 1.0 - rho_ee }
}

/// One non-selective measurement starting at `time` and lasting `duration`
/// (zero for impulsive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementEvent {
    pub time: f64,
    #[serde(default)]
    pub duration: f64,
}

impl MeasurementEvent {
    pub fn impulsive(time: f64) -> Self {
        MeasurementEvent { time, duration: 0.0 }
    }

    /// Instant at which a rate-equation engine applies the event.
    pub fn effective_time(&self) -> f64 {
        self.time + 0.5 * self.duration
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSchedule {
    pub events: Vec<MeasurementEvent>,
}

impl MeasurementSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(events: Vec<MeasurementEvent>) -> Result<Self> {
        let s = MeasurementSchedule { events };
        s.check_order()?;
        Ok(s)
    }

    /// Impulsive events at the given instants.
    pub fn impulsive(times: &[f64]) -> Result<Self> {
        Self::new(times.iter().map(|&t| MeasurementEvent::impulsive(t)).collect())
    }

    /// `count` events at start, start + interval, ...
    pub fn periodic(start: f64, interval: f64, count: usize, duration: f64) -> Result<Self> {
        if !(interval > 0.0) {
            return Err(Error::Schedule(format!("interval must be positive, got {interval}")));
        }
        Self::new(
            (0..count).map(|k| MeasurementEvent { time: start + interval * k as f64, duration }).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Intervals between consecutive event starts, the first measured from 0.
    pub fn intervals(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.events
            .iter()
            .map(|e| {
                let d = e.time - prev;
                prev = e.time;
                d
            })
            .collect()
    }

    fn check_order(&self) -> Result<()> {
        for (k, e) in self.events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::Schedule(format!("event {k}: time {} must be finite and >= 0", e.time)));
            }
            if !e.duration.is_finite() || e.duration < 0.0 {
                return Err(Error::Schedule(format!("event {k}: duration {} must be finite and >= 0", e.duration)));
            }
            if let Some(next) = self.events.get(k + 1) {
                if next.time <= e.time {
                    return Err(Error::Schedule(format!("event times not strictly increasing at index {}", k + 1)));
                }
                if e.duration >= next.time - e.time {
                    return Err(Error::Schedule(format!(
                        "event {k}: duration {} overlaps the next event",
                        e.duration
                    )));
                }
            }
        }
        Ok(())
    }

    /// Order and overlap checks plus containment in [0, horizon].
    pub fn validate(&self, horizon: f64) -> Result<()> {
        self.check_order()?;
        if let Some(last) = self.events.last() {
            if last.time + last.duration > horizon {
                return Err(Error::Schedule(format!(
                    "last event ends at {} beyond horizon {horizon}",
                    last.time + last.duration
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let sched: MeasurementSchedule =
            serde_json::from_str(s).map_err(|e| Error::Schedule(format!("malformed schedule JSON: {e}")))?;
        sched.check_order()?;
        Ok(sched)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Dynamical regime of a trace point, by time since the last reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// t′ < 1/(ω_0 + ω_a): quadratic (Zeno) growth.
    Zeno,
    /// Up to one correlation time: sign-alternating rates possible.
    Transient,
    /// t′ ≥ t_c: rates near their golden-rule values.
    Markov,
}

impl Regime {
    pub fn classify(since_reset: f64, spec: &BathSpectrumSpec) -> Self {
        if since_reset < 1.0 / (spec.omega0 + OMEGA_A) {
            Regime::Zeno
        } else if since_reset < spec.t_c() {
            Regime::Transient
        } else {
            Regime::Markov
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Zeno => "zeno",
            Regime::Transient => "transient",
            Regime::Markov => "markov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub index: usize,
    /// Instant at which the event was applied.
    pub time: f64,
    pub rho_ee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub rho_ee: Vec<f64>,
    /// Right derivative dρ_ee/dt at each point (zero right after an event).
    pub rho_ee_dot: Vec<f64>,
    /// Time since the last clock reset.
    pub since_reset: Vec<f64>,
    pub regime: Vec<Regime>,
    pub events: Vec<EventMarker>,
    /// −dS/dt relative to a reference state, when computed.
    pub sigma: Option<Vec<f64>>,
    /// Largest overshoot of the integrated ρ_ee outside [0, 1] (the stored
    /// values are clamped).
    pub positivity_defect: f64,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_populations(&self) -> QubitPopulations {
        let p = *self.rho_ee.last().expect("trace is never empty");
        QubitPopulations { rho_ee: p, rho_gg: 1.0 - p }
    }

    pub fn rho_gg(&self) -> Vec<f64> {
        self.rho_ee.iter().map(|p| 1.0 - p).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub ode: OdeOptions,
    /// Spacing of the uniform output grid.
    pub sample_step: f64,
    pub table_step: f64,
    /// Reset the rate clock at each event (bath taken as re-thermalized).
    pub rethermalize: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { ode: OdeOptions::default(), sample_step: 0.02, table_step: DEFAULT_TABLE_STEP, rethermalize: true }
    }
}

/// The second-order equations are not positivity preserving: with negative
/// rates ρ_ee can overshoot [0, 1] by O(η⁴). Overshoots up to this size are
/// integrated through and reported clamped; larger ones abort the run.
pub const POSITIVITY_SLACK: f64 = 1e-2;

fn check_population(p: f64, t: f64) -> Result<f64> {
    if !p.is_finite() || !(-POSITIVITY_SLACK..=1.0 + POSITIVITY_SLACK).contains(&p) {
        return Err(Error::Ode { t, reason: format!("excited population {p} left [0, 1]; coupling too strong") });
    }
    Ok(p)
}

fn excursion(p: f64) -> f64 {
    (-p).max(p - 1.0).max(0.0)
}

/// Rate-equation engine bound to one bath spectrum and temperature.
#[derive(Debug, Clone)]
pub struct RateEquation {
    spec: BathSpectrumSpec,
    table: RateTable,
}

impl RateEquation {
    /// Tabulates rates on [0, clock_max].
    pub fn new(spec: &BathSpectrumSpec, beta_bath: InverseTemperature, clock_max: f64, table_step: f64) -> Result<Self> {
        let table = RateTable::build(spec, beta_bath, clock_max.max(table_step), table_step)?;
        Ok(RateEquation { spec: *spec, table })
    }

    pub fn table(&self) -> &RateTable {
        &self.table
    }

    pub fn spec(&self) -> &BathSpectrumSpec {
        &self.spec
    }

    /// dρ_ee/dt at clock time `since_reset`.
    pub fn derivative(&self, since_reset: f64, rho_ee: f64) -> f64 {
        let (re, rg) = self.table.rates_at(since_reset);
        rg * (1.0 - rho_ee) - re * rho_ee
    }

    /// Integrate from clock 0 with ρ_ee = `rho_ee`, returning ρ_ee at each
    /// (ascending, non-negative) clock time in `clock_times`.
    pub fn propagate(&self, rho_ee: f64, clock_times: &[f64], ode: OdeOptions) -> Result<Vec<f64>> {
        let mut solver = Dopri5::new(ode);
        let mut out = Vec::with_capacity(clock_times.len());
        let (mut t, mut p) = (0.0, rho_ee);
        for &target in clock_times {
            if target < t {
                return Err(Error::domain("propagation targets must be ascending"));
            }
            p = solver.integrate(|s, y: &[f64; 1]| [self.derivative(s, y[0])], t, [p], target)?[0];
            p = check_population(p, target)?;
            t = target;
            out.push(p.clamp(0.0, 1.0));
        }
        Ok(out)
    }

    /// Like [`propagate`](Self::propagate) but stops at the first target
    /// where ρ_ee leaves [−slack, 1 + slack]; the result may be shorter.
    pub fn propagate_physical(&self, rho_ee: f64, clock_times: &[f64], ode: OdeOptions) -> Result<Vec<f64>> {
        let mut solver = Dopri5::new(ode);
        let mut out = Vec::with_capacity(clock_times.len());
        let (mut t, mut p) = (0.0, rho_ee);
        for &target in clock_times {
            if target < t {
                return Err(Error::domain("propagation targets must be ascending"));
            }
            p = solver.integrate(|s, y: &[f64; 1]| [self.derivative(s, y[0])], t, [p], target)?[0];
            if check_population(p, target).is_err() {
                break;
            }
            t = target;
            out.push(p.clamp(0.0, 1.0));
        }
        Ok(out)
    }

    /// Full trace over [0, horizon] under `schedule`.
    pub fn run(
        &self,
        initial: QubitPopulations,
        schedule: &MeasurementSchedule,
        horizon: f64,
        opts: &EvolveOptions,
    ) -> Result<SimulationTrace> {
        check_run(initial, schedule, horizon, opts)?;
        let clock_needed = required_clock(schedule, horizon, opts.rethermalize);
        if clock_needed > self.table.t_max() + 1e-9 {
            return Err(Error::domain(format!(
                "rate table covers t' <= {} but the run needs {clock_needed}",
                self.table.t_max()
            )));
        }
        let stops = output_stops(schedule, horizon, opts.sample_step);
        let mut solver = Dopri5::new(opts.ode);
        let mut trace = SimulationTrace {
            times: Vec::with_capacity(stops.len()),
            rho_ee: Vec::with_capacity(stops.len()),
            rho_ee_dot: Vec::with_capacity(stops.len()),
            since_reset: Vec::with_capacity(stops.len()),
            regime: Vec::with_capacity(stops.len()),
            events: Vec::with_capacity(schedule.len()),
            sigma: None,
            positivity_defect: 0.0,
        };
        let mut p = initial.rho_ee;
        let mut t = 0.0;
        let mut origin = 0.0;
        for stop in stops {
            if stop.time > t {
                let (a, b) = (t - origin, stop.time - origin);
                p = solver.integrate(|s, y: &[f64; 1]| [self.derivative(s, y[0])], a, [p], b)?[0];
                p = check_population(p, stop.time)?;
                trace.positivity_defect = trace.positivity_defect.max(excursion(p));
                t = stop.time;
            }
            if let Some(index) = stop.event {
                trace.events.push(EventMarker { index, time: t, rho_ee: p.clamp(0.0, 1.0) });
                if opts.rethermalize {
                    origin = t;
                }
            }
            let clock = t - origin;
            trace.times.push(t);
            trace.rho_ee.push(p.clamp(0.0, 1.0));
            trace.rho_ee_dot.push(self.derivative(clock, p));
            trace.since_reset.push(clock);
            trace.regime.push(Regime::classify(clock, &self.spec));
        }
        Ok(trace)
    }

    /// Coarse-grained population after `since_reset` of free evolution from
    /// `rho_ee`: ρ* + (ρ₀ − ρ*)e^{−Λ} with Λ = J_e + J_g and ρ* = J_g/Λ, i.e.
    /// the rate equation with rates replaced by their interval averages.
    /// Stays in [0, 1] at any coupling. Returns (ρ_ee, dρ_ee/dt).
    pub fn coarse_grained(&self, rho_ee: f64, since_reset: f64) -> (f64, f64) {
        let (j_e, j_g) = self.table.integrated_at(since_reset);
        let (r_e, r_g) = self.table.rates_at(since_reset);
        let lam = (j_e + j_g).max(0.0);
        let r_lam = r_e + r_g;
        // f(Λ) = (1 − e^{−Λ})/Λ and its derivative, series near 0
        let (f, df) = if lam < 1e-6 {
            (1.0 - 0.5 * lam, -0.5 + lam / 3.0)
        } else {
            let f = -(-lam).exp_m1() / lam;
            (f, ((-lam).exp() * (lam + 1.0) - 1.0) / (lam * lam))
        };
        let drive = j_g - lam * rho_ee;
        let p = rho_ee + drive * f;
        let dp = (r_g - r_lam * rho_ee) * f + drive * df * r_lam;
        (p.clamp(0.0, 1.0), dp)
    }

    /// Trace under the coarse-grained map; every event resets the clock.
    pub fn run_coarse_grained(
        &self,
        initial: QubitPopulations,
        schedule: &MeasurementSchedule,
        horizon: f64,
        sample_step: f64,
    ) -> Result<SimulationTrace> {
        let opts = EvolveOptions { sample_step, ..Default::default() };
        check_run(initial, schedule, horizon, &opts)?;
        let clock_needed = required_clock(schedule, horizon, true);
        if clock_needed > self.table.t_max() + 1e-9 {
            return Err(Error::domain(format!(
                "rate table covers t' <= {} but the run needs {clock_needed}",
                self.table.t_max()
            )));
        }
        let stops = output_stops(schedule, horizon, sample_step);
        let mut trace = SimulationTrace {
            times: Vec::with_capacity(stops.len()),
            rho_ee: Vec::with_capacity(stops.len()),
            rho_ee_dot: Vec::with_capacity(stops.len()),
            since_reset: Vec::with_capacity(stops.len()),
            regime: Vec::with_capacity(stops.len()),
            events: Vec::with_capacity(schedule.len()),
            sigma: None,
            positivity_defect: 0.0,
        };
        let (mut origin, mut p0) = (0.0, initial.rho_ee);
        for stop in stops {
            let (mut p, mut dp) = self.coarse_grained(p0, stop.time - origin);
            if let Some(index) = stop.event {
                trace.events.push(EventMarker { index, time: stop.time, rho_ee: p });
                origin = stop.time;
                p0 = p;
                (p, dp) = self.coarse_grained(p0, 0.0);
            }
            let clock = stop.time - origin;
            trace.times.push(stop.time);
            trace.rho_ee.push(p);
            trace.rho_ee_dot.push(dp);
            trace.since_reset.push(clock);
            trace.regime.push(Regime::classify(clock, &self.spec));
        }
        Ok(trace)
    }
}

fn check_run(initial: QubitPopulations, schedule: &MeasurementSchedule, horizon: f64, opts: &EvolveOptions) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(format!("horizon must be finite and positive, got {horizon}")));
    }
    if !(opts.sample_step > 0.0) {
        return Err(Error::domain("sample step must be positive"));
    }
    QubitPopulations::new(initial.rho_ee)?;
    if (initial.rho_ee + initial.rho_gg - 1.0).abs() > 1e-12 {
        return Err(Error::State("initial populations do not sum to 1".into()));
    }
    schedule.validate(horizon)?;
    if schedule.events.iter().any(|e| e.duration > 0.0) {
        log::warn!("finite-duration events are applied as impulsive at their midpoints by the rate-equation engine");
    }
    Ok(())
}

/// Longest clock span the run will request from the rate table.
fn required_clock(schedule: &MeasurementSchedule, horizon: f64, rethermalize: bool) -> f64 {
    if !rethermalize {
        return horizon;
    }
    let mut prev = 0.0;
    let mut longest = 0.0f64;
    for e in &schedule.events {
        let t = e.effective_time();
        longest = longest.max(t - prev);
        prev = t;
    }
    longest.max(horizon - prev)
}

struct Stop {
    time: f64,
    event: Option<usize>,
}

fn output_stops(schedule: &MeasurementSchedule, horizon: f64, step: f64) -> Vec<Stop> {
    let n = (horizon / step).floor() as usize;
    let mut stops: Vec<Stop> = (0..=n).map(|k| Stop { time: step * k as f64, event: None }).collect();
    if stops.last().is_none_or(|s| s.time < horizon - 1e-12) {
        stops.push(Stop { time: horizon, event: None });
    }
    for (i, e) in schedule.events.iter().enumerate() {
        stops.push(Stop { time: e.effective_time(), event: Some(i) });
    }
    stops.sort_by(|a, b| a.time.total_cmp(&b.time));
    // merge coincident grid and event points, keeping the event tag
    let mut merged: Vec<Stop> = Vec::with_capacity(stops.len());
    for s in stops {
        match merged.last_mut() {
            Some(last) if (s.time - last.time).abs() <= 1e-12 * horizon.max(1.0) => {
                if s.event.is_some() {
                    last.event = s.event;
                    last.time = s.time;
                }
            }
            _ => merged.push(s),
        }
    }
    merged
}

/// Evolve with default options.
pub fn evolve(
    initial: QubitPopulations,
    schedule: &MeasurementSchedule,
    horizon: f64,
    spec: &BathSpectrumSpec,
    beta_bath: InverseTemperature,
) -> Result<SimulationTrace> {
    evolve_with(initial, schedule, horizon, spec, beta_bath, &EvolveOptions::default())
}

pub fn evolve_with(
    initial: QubitPopulations,
    schedule: &MeasurementSchedule,
    horizon: f64,
    spec: &BathSpectrumSpec,
    beta_bath: InverseTemperature,
    opts: &EvolveOptions,
) -> Result<SimulationTrace> {
    check_run(initial, schedule, horizon, opts)?;
    let clock = required_clock(schedule, horizon, opts.rethermalize);
    let engine = RateEquation::new(spec, beta_bath, clock + opts.table_step, opts.table_step)?;
    engine.run(initial, schedule, horizon, opts)
}
