//! Greedy measurement scheduling: after each measurement, place the next one
//! at the trough (cooling) or peak (heating) of ρ_ee within a window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{ExactSolver, QubitLevel, TotalState};
use crate::master_equation::{
    initial_from_temperature, EvolveOptions, MeasurementSchedule, QubitPopulations, RateEquation, Regime,
    SimulationTrace,
};
use crate::ode::OdeOptions;
use crate::rates::DEFAULT_TABLE_STEP;
use crate::spectrum::{discretize, BathSpectrumSpec, InverseTemperature};

/// Grid points per window scan.
pub const SCAN_POINTS: usize = 400;
/// Golden-section tolerance on the interval [1/ω_a].
pub const REFINE_TOL: f64 = 1e-4;
/// Sample spacing of the returned trace.
const TRACE_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Cool,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Engine {
    MasterEquation,
    /// Interval-averaged rates (positivity preserving at strong coupling).
    CoarseGrained,
    /// Discrete bath; zero temperature only.
    Exact { n_modes: usize, coverage: f64, max_quanta: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleObjective {
    pub direction: Direction,
    pub measurements: usize,
    pub min_interval: f64,
    pub max_interval: f64,
    /// Cap on the total schedule length.
    pub horizon: f64,
    pub engine: Engine,
}

impl ScheduleObjective {
    /// K = 10, window [0.05, 5]/ω_a, horizon 20t_c, rate-equation engine.
    pub fn new(direction: Direction, spec: &BathSpectrumSpec) -> Self {
        ScheduleObjective {
            direction,
            measurements: 10,
            min_interval: 0.05,
            max_interval: 5.0,
            horizon: 20.0 * spec.t_c(),
            engine: Engine::MasterEquation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_interval > 0.0 && self.max_interval > self.min_interval && self.max_interval.is_finite()) {
            return Err(Error::domain(format!(
                "interval window must satisfy 0 < min < max, got [{}, {}]",
                self.min_interval, self.max_interval
            )));
        }
        if !(self.horizon >= self.min_interval) {
            return Err(Error::domain("horizon shorter than the minimum interval"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub direction: Direction,
    pub schedule: MeasurementSchedule,
    /// Trace over [0, t_K] (or the horizon when no event fits).
    pub trace: SimulationTrace,
    /// ρ_ee at each measurement instant.
    pub measured_rho_ee: Vec<f64>,
    pub final_rho_ee: f64,
    /// Minimum (cool) or maximum (heat) of ρ_ee over measurement instants.
    pub extremal_rho_ee: f64,
    /// Gibbs ρ_ee at the bath temperature.
    pub equilibrium_rho_ee: f64,
}

impl ScheduleResult {
    /// Signed gain in the objective direction relative to equilibrium.
    pub fn gain(&self) -> f64 {
        match self.direction {
            Direction::Cool => self.equilibrium_rho_ee - self.extremal_rho_ee,
            Direction::Heat => self.extremal_rho_ee - self.equilibrium_rho_ee,
        }
    }
}

/// Propagation primitives the greedy search needs.
trait Propagator {
    type State: Clone;
    /// ρ_ee at offsets `dts` (ascending) after a fresh measurement. May stop
    /// early where the model leaves its physical domain.
    fn scan(&self, state: &Self::State, dts: &[f64]) -> Result<Vec<f64>>;
    fn advance_and_measure(&self, state: &Self::State, dt: f64) -> Result<Self::State>;
}

struct RateProp<'a> {
    engine: &'a RateEquation,
    ode: OdeOptions,
}

impl Propagator for RateProp<'_> {
    type State = f64;
    fn scan(&self, rho: &f64, dts: &[f64]) -> Result<Vec<f64>> {
        self.engine.propagate_physical(*rho, dts, self.ode)
    }
    fn advance_and_measure(&self, rho: &f64, dt: f64) -> Result<f64> {
        Ok(self.engine.propagate(*rho, &[dt], self.ode)?[0])
    }
}

struct CoarseProp<'a> {
    engine: &'a RateEquation,
}

impl Propagator for CoarseProp<'_> {
    type State = f64;
    fn scan(&self, rho: &f64, dts: &[f64]) -> Result<Vec<f64>> {
        Ok(dts.iter().map(|&dt| self.engine.coarse_grained(*rho, dt).0).collect())
    }
    fn advance_and_measure(&self, rho: &f64, dt: f64) -> Result<f64> {
        Ok(self.engine.coarse_grained(*rho, dt).0)
    }
}

struct ExactProp<'a> {
    solver: &'a ExactSolver,
}

impl Propagator for ExactProp<'_> {
    type State = TotalState;
    fn scan(&self, state: &TotalState, dts: &[f64]) -> Result<Vec<f64>> {
        let mut s = state.clone();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(dts.len());
        for &dt in dts {
            self.solver.evolve_unitary(&mut s, dt - t)?;
            t = dt;
            out.push(self.solver.observables(&s, false).rho_ee);
        }
        Ok(out)
    }
    fn advance_and_measure(&self, state: &TotalState, dt: f64) -> Result<TotalState> {
        let mut s = state.clone();
        self.solver.evolve_unitary(&mut s, dt)?;
        self.solver.measure_impulsive(&mut s);
        Ok(s)
    }
}

fn better(direction: Direction, candidate: f64, incumbent: f64) -> bool {
    match direction {
        Direction::Cool => candidate < incumbent,
        Direction::Heat => candidate > incumbent,
    }
}

/// Best interval in [lo, hi]: grid scan, earliest extremum, golden-section
/// refinement on the neighbouring bracket.
fn best_interval<P: Propagator>(p: &P, state: &P::State, lo: f64, hi: f64, direction: Direction) -> Result<(f64, f64)> {
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| if k + 1 == SCAN_POINTS { hi } else { lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64 })
        .collect();
    let vals = p.scan(state, &grid)?;
    if vals.is_empty() {
        return Err(Error::domain(format!("no physical interval in [{lo}, {hi}]")));
    }
    let grid = &grid[..vals.len()];
    let mut best = 0;
    for k in 1..vals.len() {
        if better(direction, vals[k], vals[best]) {
            best = k;
        }
    }
    if best == 0 || best + 1 == grid.len() {
        return Ok((grid[best], vals[best]));
    }
    let sign = if direction == Direction::Cool { 1.0 } else { -1.0 };
    // points outside the physical domain never win
    let f = |x: f64| -> Result<f64> { Ok(p.scan(state, &[x])?.first().map_or(f64::INFINITY, |v| sign * v)) };
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > REFINE_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    // keep the grid point if refinement did not improve on it
    if better(direction, sign * fx, vals[best]) {
        Ok((x, sign * fx))
    } else {
        Ok((grid[best], vals[best]))
    }
}

fn greedy_times<P: Propagator>(p: &P, initial: P::State, obj: &ScheduleObjective) -> Result<Vec<f64>> {
    let mut state = initial;
    let mut t = 0.0;
    let mut times = Vec::with_capacity(obj.measurements);
    for _ in 0..obj.measurements {
        let hi = obj.max_interval.min(obj.horizon - t);
        if hi < obj.min_interval {
            break;
        }
        let (dt, _) = best_interval(p, &state, obj.min_interval, hi, obj.direction)?;
        state = p.advance_and_measure(&state, dt)?;
        t += dt;
        times.push(t);
    }
    Ok(times)
}

fn assemble(
    direction: Direction,
    schedule: MeasurementSchedule,
    trace: SimulationTrace,
    equilibrium_rho_ee: f64,
) -> ScheduleResult {
    let measured: Vec<f64> = trace.events.iter().map(|e| e.rho_ee).collect();
    let final_rho_ee = *trace.rho_ee.last().expect("trace is never empty");
    let pool = if measured.is_empty() { vec![final_rho_ee] } else { measured.clone() };
    let extremal = match direction {
        Direction::Cool => pool.iter().copied().fold(f64::INFINITY, f64::min),
        Direction::Heat => pool.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    ScheduleResult {
        direction,
        schedule,
        trace,
        measured_rho_ee: measured,
        final_rho_ee,
        extremal_rho_ee: extremal,
        equilibrium_rho_ee,
    }
}

pub fn greedy_schedule(
    obj: &ScheduleObjective,
    initial: QubitPopulations,
    spec: &BathSpectrumSpec,
    beta_bath: InverseTemperature,
) -> Result<ScheduleResult> {
    obj.validate()?;
    let eq = initial_from_temperature(beta_bath).rho_ee;
    match obj.engine {
        Engine::MasterEquation | Engine::CoarseGrained => {
            // an empty schedule integrates straight to the horizon
            let span = if obj.measurements == 0 { obj.horizon } else { obj.max_interval };
            let clock = span + DEFAULT_TABLE_STEP;
            let engine = RateEquation::new(spec, beta_bath, clock, DEFAULT_TABLE_STEP)?;
            let times = if obj.engine == Engine::CoarseGrained {
                greedy_times(&CoarseProp { engine: &engine }, initial.rho_ee, obj)?
            } else {
                greedy_times(&RateProp { engine: &engine, ode: OdeOptions::default() }, initial.rho_ee, obj)?
            };
            let end = times.last().copied().unwrap_or(obj.horizon);
            let schedule = MeasurementSchedule::impulsive(&times)?;
            let trace = if obj.engine == Engine::CoarseGrained {
                engine.run_coarse_grained(initial, &schedule, end, TRACE_STEP)?
            } else {
                engine.run(initial, &schedule, end, &EvolveOptions { sample_step: TRACE_STEP, ..Default::default() })?
            };
            Ok(assemble(obj.direction, schedule, trace, eq))
        }
        Engine::Exact { n_modes, coverage, max_quanta } => {
            if !beta_bath.is_zero_temperature() {
                return Err(Error::domain("the exact engine supports zero-temperature baths only"));
            }
            let level = if initial.rho_ee == 0.0 {
                QubitLevel::Ground
            } else if initial.rho_ee == 1.0 {
                QubitLevel::Excited
            } else {
                return Err(Error::domain("the exact engine starts from |g> or |e> with the bath in vacuum"));
            };
            let model = discretize(spec, n_modes, coverage)?;
            let solver = ExactSolver::new(&model, max_quanta)?;
            let prop = ExactProp { solver: &solver };
            let start = solver.product_state(level);
            let times = greedy_times(&prop, start.clone(), obj)?;
            let end = times.last().copied().unwrap_or(obj.horizon);
            let schedule = MeasurementSchedule::impulsive(&times)?;
            let exact = solver.run(start, &schedule, end, &crate::exact::ExactOptions { sample_step: TRACE_STEP, mode_every: 0 })?;
            Ok(assemble(obj.direction, schedule, exact_to_trace(&exact, spec), eq))
        }
    }
}

/// Population trace from exact samples; ρ̇_ee by one-sided differences
/// within each inter-event segment.
fn exact_to_trace(exact: &crate::exact::ExactTrace, spec: &BathSpectrumSpec) -> SimulationTrace {
    let times = exact.times();
    let rho = exact.rho_ee();
    let event_times: Vec<f64> = exact.events.iter().map(|e| e.after.time).collect();
    let mut since = Vec::with_capacity(times.len());
    let mut origin = 0.0;
    let mut ev = 0;
    for &t in &times {
        while ev < event_times.len() && event_times[ev] <= t + 1e-12 {
            origin = event_times[ev];
            ev += 1;
        }
        since.push(t - origin);
    }
    let n = times.len();
    let rho_dot = (0..n)
        .map(|i| {
            if since[i] == 0.0 && i > 0 {
                0.0
            } else if i + 1 < n && since[i + 1] > since[i] {
                (rho[i + 1] - rho[i]) / (times[i + 1] - times[i])
            } else if i > 0 {
                (rho[i] - rho[i - 1]) / (times[i] - times[i - 1])
            } else {
                0.0
            }
        })
        .collect();
    SimulationTrace {
        regime: since.iter().map(|&s| Regime::classify(s, spec)).collect(),
        events: exact
            .events
            .iter()
            .map(|e| crate::master_equation::EventMarker { index: e.index, time: e.after.time, rho_ee: e.after.rho_ee })
            .collect(),
        times,
        rho_ee: rho.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        rho_ee_dot: rho_dot,
        since_reset: since,
        sigma: None,
        positivity_defect: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub max_heat: f64,
    pub max_cool: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// α values where max_cool changes sign, by linear interpolation.
    pub critical_alphas: Vec<f64>,
}

/// Heat- and cool-greedy runs from the Gibbs state at each α (system and bath
/// share the temperature). `template` supplies K, window, horizon and engine.
pub fn temperature_sweep(template: &ScheduleObjective, alphas: &[f64], spec: &BathSpectrumSpec) -> Result<SweepTable> {
    template.validate()?;
    let rows = alphas
        .par_iter()
        .map(|&a| {
            let beta = if a.is_infinite() { InverseTemperature::zero_temperature() } else { InverseTemperature::new(a)? };
            let initial = initial_from_temperature(beta);
            let run = |direction| greedy_schedule(&ScheduleObjective { direction, ..*template }, initial, spec, beta);
            let heat = run(Direction::Heat)?;
            let cool = run(Direction::Cool)?;
            Ok(SweepRow { alpha: a, max_heat: heat.gain(), max_cool: cool.gain() })
        })
        .collect::<Result<Vec<_>>>()?;
    let critical_alphas = rows
        .windows(2)
        .filter(|w| (w[0].max_cool > 0.0) != (w[1].max_cool > 0.0) && w[0].alpha.is_finite() && w[1].alpha.is_finite())
        .map(|w| {
            let (a0, a1, c0, c1) = (w[0].alpha, w[1].alpha, w[0].max_cool, w[1].max_cool);
            a0 + (a1 - a0) * c0 / (c0 - c1)
        })
        .collect();
    Ok(SweepTable { rows, critical_alphas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_band() -> BathSpectrumSpec {
        BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap().band_limited(5.0).unwrap()
    }

    #[test]
    fn zeno_window_heating_is_monotone() {
        let spec = fig1_band();
        let b = InverseTemperature::new(2.0).unwrap();
        let obj = ScheduleObjective {
            measurements: 8,
            min_interval: 0.01,
            max_interval: 0.1,
            ..ScheduleObjective::new(Direction::Heat, &spec)
        };
        let r = greedy_schedule(&obj, initial_from_temperature(b), &spec, b).unwrap();
        let iv = r.schedule.intervals();
        assert!(iv.iter().all(|&d| (d - 0.1).abs() < 1e-12), "{iv:?}");
        assert!(r.measured_rho_ee.windows(2).all(|w| w[1] > w[0]));
        assert!(r.gain() > 0.0);
    }

    #[test]
    fn empty_schedule_returns_unmeasured_trace() {
        let spec = fig1_band();
        let b = InverseTemperature::new(1.0).unwrap();
        let obj = ScheduleObjective { measurements: 0, horizon: 5.0, ..ScheduleObjective::new(Direction::Cool, &spec) };
        let r = greedy_schedule(&obj, QubitPopulations::ground(), &spec, b).unwrap();
        assert!(r.schedule.is_empty());
        assert!(r.trace.events.is_empty());
        assert_eq!(*r.trace.times.last().unwrap(), 5.0);
    }

    #[test]
    fn greedy_dominates_uniform_schedules() {
        let spec = fig1_band();
        let b = InverseTemperature::new(1.0).unwrap();
        let p0 = initial_from_temperature(b);
        for direction in [Direction::Cool, Direction::Heat] {
            let obj = ScheduleObjective { measurements: 4, ..ScheduleObjective::new(direction, &spec) };
            let g = greedy_schedule(&obj, p0, &spec, b).unwrap();
            let engine = RateEquation::new(&spec, b, 5.0 + 0.01, 0.01).unwrap();
            for k in 0..40 {
                let dt = 0.05 + (5.0 - 0.05) * k as f64 / 39.0;
                let sched = MeasurementSchedule::periodic(dt, dt, 4, 0.0).unwrap();
                let tr = engine.run(p0, &sched, 4.0 * dt, &EvolveOptions::default()).unwrap();
                let last = tr.events.last().unwrap().rho_ee;
                match direction {
                    Direction::Cool => assert!(g.final_rho_ee <= last + 1e-9),
                    Direction::Heat => assert!(g.final_rho_ee >= last - 1e-9),
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let spec = fig1_band();
        let b = InverseTemperature::new(1.0).unwrap();
        let obj = ScheduleObjective { measurements: 3, ..ScheduleObjective::new(Direction::Cool, &spec) };
        let a = greedy_schedule(&obj, initial_from_temperature(b), &spec, b).unwrap();
        let c = greedy_schedule(&obj, initial_from_temperature(b), &spec, b).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn zero_temperature_cannot_cool() {
        let spec = fig1_band();
        let obj = ScheduleObjective { measurements: 3, ..ScheduleObjective::new(Direction::Cool, &spec) };
        let r = greedy_schedule(&obj, QubitPopulations::ground(), &spec, InverseTemperature::zero_temperature()).unwrap();
        assert!(r.gain() <= 0.0);
    }

    #[test]
    fn invalid_window_rejected() {
        let spec = fig1_band();
        let obj = ScheduleObjective { min_interval: 1.0, max_interval: 0.5, ..ScheduleObjective::new(Direction::Cool, &spec) };
        assert!(obj.validate().is_err());
    }

    #[test]
    fn exact_engine_heats_from_ground() {
        let spec = fig1_band();
        let obj = ScheduleObjective {
            measurements: 2,
            min_interval: 0.5,
            max_interval: 3.0,
            engine: Engine::Exact { n_modes: 6, coverage: 5.0, max_quanta: 2 },
            ..ScheduleObjective::new(Direction::Heat, &spec)
        };
        let r = greedy_schedule(&obj, QubitPopulations::ground(), &spec, InverseTemperature::zero_temperature()).unwrap();
        assert_eq!(r.schedule.len(), 2);
        assert!(r.gain() > 0.0);
        assert!(r.trace.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn coarse_grained_sweep_has_critical_temperature() {
        let spec = BathSpectrumSpec::lorentzian(4.36, 1.0 / 0.7, 10.0).unwrap().band_limited(5.0).unwrap();
        let obj = ScheduleObjective { engine: Engine::CoarseGrained, ..ScheduleObjective::new(Direction::Cool, &spec) };
        let tab = temperature_sweep(&obj, &[1.0, 8.0, f64::INFINITY], &spec).unwrap();
        assert!(tab.rows[0].max_cool > 0.0);
        assert!(tab.rows[1].max_cool < 0.0);
        assert!(tab.rows.iter().all(|r| r.max_heat > 0.0));
        assert_eq!(tab.critical_alphas.len(), 1);
        assert!(tab.critical_alphas[0] > 1.0 && tab.critical_alphas[0] < 8.0);
    }
}
