//! Relative-entropy diagnostics and the post-measurement cooling condition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master_equation::{QubitPopulations, SimulationTrace};
use crate::quad::integrate;
use crate::rates::{frequency_cut, oscillatory_breakpoints, quad_opts, sin2_over};
use crate::spectrum::{occupation, BathSpectrumSpec, InverseTemperature, OMEGA_A};

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

fn check_reference(p0: &QubitPopulations) -> Result<()> {
    if !(p0.rho_ee > 0.0 && p0.rho_ee < 1.0) {
        return Err(Error::domain(format!(
            "reference populations must be strictly interior, got rho_ee = {}",
            p0.rho_ee
        )));
    }
    Ok(())
}

/// S(p‖p0) in nats for diagonal qubit states.
pub fn relative_entropy(p: &QubitPopulations, p0: &QubitPopulations) -> Result<f64> {
    check_reference(p0)?;
    let (a, b) = (p.rho_ee, p0.rho_ee);
    Ok((xlogy_ratio(a, b) + xlogy_ratio(1.0 - a, 1.0 - b)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    /// σ = −dS/dt.
    pub sigma: Vec<f64>,
}

/// σ(t) = −ρ̇_ee·ln[ρ_ee(1 − p0)/((1 − ρ_ee)p0)] from the engine's ρ̇_ee.
pub fn sigma(trace: &SimulationTrace, p0: &QubitPopulations) -> Result<EntropyTrace> {
    check_reference(p0)?;
    let q = p0.rho_ee;
    let mut entropy = Vec::with_capacity(trace.len());
    let mut sig = Vec::with_capacity(trace.len());
    for ((&t, &p), &dp) in trace.times.iter().zip(&trace.rho_ee).zip(&trace.rho_ee_dot) {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("population {p} on the boundary at t = {t}")));
        }
        entropy.push(relative_entropy(&QubitPopulations { rho_ee: p, rho_gg: 1.0 - p }, p0)?);
        let log_ratio = (p / q).ln() - ((1.0 - p) / (1.0 - q)).ln();
        sig.push(if dp == 0.0 { 0.0 } else { -dp * log_ratio });
    }
    Ok(EntropyTrace { times: trace.times.clone(), entropy, sigma: sig })
}

/// Fill the σ channel of `trace`.
pub fn attach_sigma(trace: &mut SimulationTrace, p0: &QubitPopulations) -> Result<EntropyTrace> {
    let e = sigma(trace, p0)?;
    trace.sigma = Some(e.sigma.clone());
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingMargin {
    pub t: f64,
    /// LHS − RHS of the cooling inequality.
    pub margin: f64,
    pub cools: bool,
}

/// Margin of the cooling inequality for a measurement interval t:
/// ∫G_0 sin²(Δ₋t/2)/Δ₋²·(n_a − n) − ∫G_0 sin²(Δ₊t/2)/Δ₊²·(n_a + n + 1).
pub fn cooling_condition(spec: &BathSpectrumSpec, beta: InverseTemperature, t: f64) -> Result<CoolingMargin> {
    spec.validate()?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("interval must be finite and > 0, got {t}")));
    }
    if beta.alpha() == 0.0 {
        return Err(Error::domain("cooling condition needs a finite temperature (alpha > 0)"));
    }
    let b = beta.beta();
    let n_a = occupation(OMEGA_A, b);
    let cut = frequency_cut(spec, t);
    let bp = oscillatory_breakpoints(spec, t, cut);
    let r = integrate(
        |u| {
            let g = spec.g0(u);
            if g == 0.0 {
                return [0.0];
            }
            let n = occupation(u, b);
            // sin2_over is 4sin²(Δt/2)/Δ²
            let lhs = 0.25 * sin2_over(u - OMEGA_A, t) * (n_a - n);
            let rhs = 0.25 * sin2_over(u + OMEGA_A, t) * (n_a + n + 1.0);
            [g * (lhs - rhs)]
        },
        &bp,
        quad_opts(),
    )?;
    let margin = r.value[0];
    Ok(CoolingMargin { t, margin, cools: margin > 0.0 })
}

/// Upper detuning bound Ω with βΩ = 1 + [βω_a + sqrt(4 + 12βω_a + β²ω_a²)]/2.
/// Infinite at α = 0; tends to ω_a at zero temperature.
pub fn high_t_bound(beta: InverseTemperature, omega_a: f64) -> f64 {
    if beta.is_zero_temperature() {
        return omega_a;
    }
    let x = beta.beta() * omega_a;
    if x == 0.0 {
        return f64::INFINITY;
    }
    (1.0 + 0.5 * (x + (4.0 + 12.0 * x + x * x).sqrt())) / beta.beta()
}

#[derive(Debug, Clone, Copy)]
pub struct CoolingScanOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Absolute tolerance on refined zero crossings.
    pub crossing_tol: f64,
}

impl CoolingScanOptions {
    /// Log grid over [10⁻², 20t_c] with 2000 points.
    pub fn for_spec(spec: &BathSpectrumSpec) -> Self {
        CoolingScanOptions { t_min: 1e-2, t_max: 20.0 * spec.t_c(), points: 2000, crossing_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingScan {
    pub margins: Vec<CoolingMargin>,
    /// Refined sign changes of the margin, ascending.
    pub crossings: Vec<f64>,
}

impl CoolingScan {
    pub fn any_cooling(&self) -> bool {
        self.margins.iter().any(|m| m.cools)
    }

    pub fn best(&self) -> Option<CoolingMargin> {
        self.margins.iter().copied().max_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

pub fn cooling_scan(spec: &BathSpectrumSpec, beta: InverseTemperature, opts: &CoolingScanOptions) -> Result<CoolingScan> {
    if !(opts.t_min > 0.0 && opts.t_max > opts.t_min) || opts.points < 2 {
        return Err(Error::domain("cooling scan needs 0 < t_min < t_max and at least two points"));
    }
    let ratio = opts.t_max / opts.t_min;
    let n = opts.points;
    let margins = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = if k + 1 == n { opts.t_max } else { opts.t_min * ratio.powf(k as f64 / (n - 1) as f64) };
            cooling_condition(spec, beta, t)
        })
        .collect::<Result<Vec<_>>>()?;
    let brackets: Vec<(f64, f64, f64)> = margins
        .windows(2)
        .filter(|w| (w[0].margin > 0.0) != (w[1].margin > 0.0))
        .map(|w| (w[0].t, w[1].t, w[0].margin))
        .collect();
    let crossings = brackets
        .into_par_iter()
        .map(|(mut a, mut b, fa)| {
            let positive_left = fa > 0.0;
            while b - a > opts.crossing_tol {
                let m = 0.5 * (a + b);
                if (cooling_condition(spec, beta, m)?.margin > 0.0) == positive_left {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok(0.5 * (a + b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoolingScan { margins, crossings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master_equation::{evolve, initial_from_temperature, MeasurementSchedule};
    use proptest::prelude::*;

    fn pops(p: f64) -> QubitPopulations {
        QubitPopulations { rho_ee: p, rho_gg: 1.0 - p }
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(&pops(0.3), &pops(0.3)).unwrap(), 0.0);
        let v = relative_entropy(&pops(1.0), &pops(0.5)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-6);
        assert!(relative_entropy(&pops(0.2), &pops(0.0)).is_err());
        assert!(relative_entropy(&pops(0.2), &pops(1.0)).is_err());
    }

    #[test]
    fn high_t_bound_examples() {
        let one = InverseTemperature::new(1.0).unwrap();
        assert!((high_t_bound(one, 1.0) - (1.0 + 0.5 * (1.0 + 17f64.sqrt()))).abs() < 1e-14);
        assert!((high_t_bound(one, 1.0) - 3.561553).abs() < 1e-6);
        let tiny = InverseTemperature::new(1e-9).unwrap();
        assert!((tiny.beta() * high_t_bound(tiny, 1.0) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn zero_temperature_never_cools() {
        let spec = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap().band_limited(5.0).unwrap();
        let z = InverseTemperature::zero_temperature();
        for t in [0.01, 0.5, 2.0, 7.0, 30.0] {
            let m = cooling_condition(&spec, z, t).unwrap();
            assert!(m.margin < 0.0 && !m.cools);
        }
    }

    #[test]
    fn margin_matches_integrated_rates() {
        // J_e n_a − J_g (n_a + 1) = 4·margin
        let spec = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap().band_limited(5.0).unwrap();
        let b = InverseTemperature::new(0.7).unwrap();
        let n_a = 1.0 / (0.7f64.exp() - 1.0);
        for t in [0.3, 2.0, 9.0] {
            let (je, jg) = crate::rates::integrated_rate_pair(t, &spec, b).unwrap();
            let m = cooling_condition(&spec, b, t).unwrap().margin;
            assert!((4.0 * m - (je * n_a - jg * (n_a + 1.0))).abs() < 1e-10 * je * n_a);
        }
    }

    #[test]
    fn constant_population_has_zero_sigma() {
        let spec = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap().band_limited(5.0).unwrap();
        let mut tr = evolve(pops(0.3), &MeasurementSchedule::empty(), 1.0, &spec, InverseTemperature::new(1.0).unwrap())
            .unwrap();
        tr.rho_ee_dot.iter_mut().for_each(|d| *d = 0.0);
        let e = sigma(&tr, &pops(0.2)).unwrap();
        assert!(e.sigma.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sigma_sign_tracks_distance_to_reference() {
        let spec = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap().band_limited(5.0).unwrap();
        let b = InverseTemperature::new(1.0).unwrap();
        let p0 = initial_from_temperature(b);
        let sched = MeasurementSchedule::impulsive(&[3.0, 6.5, 12.0]).unwrap();
        let mut tr = evolve(pops(0.45), &sched, 30.0, &spec, b).unwrap();
        let e = attach_sigma(&mut tr, &p0).unwrap();
        assert!(tr.sigma.is_some());
        for i in 0..e.times.len() {
            let toward = tr.rho_ee_dot[i] * (tr.rho_ee[i] - p0.rho_ee) < 0.0;
            if e.sigma[i] != 0.0 {
                assert_eq!(e.sigma[i] > 0.0, toward);
            }
            assert!(e.entropy[i] >= 0.0);
        }
    }

    #[test]
    fn broad_bath_above_omega_bound_never_cools() {
        let b = InverseTemperature::new(0.05).unwrap();
        let omega = high_t_bound(b, 1.0);
        assert!((omega - 41.95).abs() < 0.01);
        let spec = BathSpectrumSpec::lorentzian(0.07, 500.0, 0.02).unwrap().with_support(omega, f64::INFINITY).unwrap();
        let scan = cooling_scan(&spec, b, &CoolingScanOptions::for_spec(&spec)).unwrap();
        assert!(!scan.any_cooling());
    }

    #[test]
    fn narrow_band_above_omega_bound_can_cool() {
        // the bound is not sufficient: a narrow line at 2Ω cools near t = 2π/(ω0 + ω_a)
        let b = InverseTemperature::new(0.05).unwrap();
        let w0 = 2.0 * high_t_bound(b, 1.0);
        let spec = BathSpectrumSpec::lorentzian(0.07, w0, 10.0).unwrap().with_support(w0 - 0.5, w0 + 0.5).unwrap();
        let t = 2.0 * std::f64::consts::PI / (w0 + 1.0);
        assert!(cooling_condition(&spec, b, t).unwrap().cools);
    }

    proptest! {
        #[test]
        fn relative_entropy_nonnegative(p in 0.0f64..=1.0, q in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!(relative_entropy(&pops(p), &pops(q)).unwrap() >= 0.0);
        }

        #[test]
        fn omega_bound_exceeds_temperature_scale(a in 1e-6f64..50.0) {
            let b = InverseTemperature::new(a).unwrap();
            prop_assert!(b.beta() * high_t_bound(b, 1.0) > 1.0);
        }
    }
}
