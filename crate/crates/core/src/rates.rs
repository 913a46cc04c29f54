//! Time-dependent relaxation rates of the second-order master equation.
//!
//! R_{e,g}(t) = 2t∫G_T(ω) sinc[(ω ∓ ω_a)t] dω, folded onto mode frequencies
//! u > 0 with Δ∓ = u ∓ ω_a:
//!
//! R_e = 2∫G_0[(n+1) sin(Δ₋t)/Δ₋ + n sin(Δ₊t)/Δ₊],
//! R_g = 2∫G_0[(n+1) sin(Δ₊t)/Δ₊ + n sin(Δ₋t)/Δ₋].
//!
//! The integrated rates are J(t) = ∫₀ᵗR = ∫G_T·4sin²(Δt/2)/Δ² dω.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, kronrod_nodes, merge_breakpoints, uniform_breakpoints, QuadOptions};
use crate::spectrum::{integrate_over_support, log_breakpoints, occupation, BathSpectrumSpec, InverseTemperature, OMEGA_A};

/// Which level a rate depletes: `Excited` is R_e (e → g), `Ground` is R_g.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    Excited,
    Ground,
}

/// sinc(x) = sin(x)/x with sinc(0) = 1.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// sin(Δt)/Δ, continuous at Δ = 0.
#[inline]
fn sin_over(d: f64, t: f64) -> f64 {
    t * sinc(d * t)
}

/// 4sin²(Δt/2)/Δ², continuous at Δ = 0.
#[inline]
pub(crate) fn sin2_over(d: f64, t: f64) -> f64 {
    let s = sinc(0.5 * d * t);
    t * t * s * s
}

pub(crate) fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 400_000 }
}

/// Upper frequency cut for time t: max(ω_0 + 40Γ, ω_a + 60π/t), clipped to
/// the support.
pub fn frequency_cut(spec: &BathSpectrumSpec, t: f64) -> f64 {
    let w = spec.omega0 + 40.0 * spec.gamma;
    let c = if t > 0.0 { w.max(OMEGA_A + 60.0 * PI / t) } else { w };
    c.min(spec.support_hi)
}

/// Breakpoints for oscillatory integrands at time t: panel width ≤ π/(8t),
/// peak and IR resolution, log panels on the Lorentzian tail.
pub(crate) fn oscillatory_breakpoints(spec: &BathSpectrumSpec, t: f64, cut: f64) -> Vec<f64> {
    let lo = spec.support_lo;
    let w = spec.peak_cut().max(lo);
    let mut pts = spec.peak_breakpoints();
    pts.extend(log_breakpoints(lo, OMEGA_A.min(w), 2));
    if cut > w {
        pts.extend(log_breakpoints(w, cut, 8));
    }
    if t > 0.0 {
        let width = PI / (8.0 * t);
        pts.extend(uniform_breakpoints(lo, cut, width));
    }
    merge_breakpoints(lo, cut, pts)
}

fn check_inputs(t: f64, spec: &BathSpectrumSpec, beta: InverseTemperature) -> Result<()> {
    spec.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    if beta.alpha() == 0.0 {
        return Err(Error::domain("rates diverge at infinite temperature (alpha = 0)"));
    }
    Ok(())
}

/// (R_e(t), R_g(t)) by adaptive oscillatory quadrature.
pub fn rate_pair(t: f64, spec: &BathSpectrumSpec, beta: InverseTemperature) -> Result<(f64, f64)> {
    check_inputs(t, spec, beta)?;
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let b = beta.beta();
    let cut = frequency_cut(spec, t);
    let bp = oscillatory_breakpoints(spec, t, cut);
    let r = integrate(
        |u| {
            let g = spec.g0(u);
            if g == 0.0 {
                return [0.0; 2];
            }
            let n = occupation(u, b);
            let sm = sin_over(u - OMEGA_A, t);
            let sp = sin_over(u + OMEGA_A, t);
            [2.0 * g * ((n + 1.0) * sm + n * sp), 2.0 * g * ((n + 1.0) * sp + n * sm)]
        },
        &bp,
        quad_opts(),
    )?;
    Ok((r.value[0], r.value[1]))
}

pub fn rate(t: f64, which: Level, spec: &BathSpectrumSpec, beta: InverseTemperature) -> Result<f64> {
    let (e, g) = rate_pair(t, spec, beta)?;
    Ok(match which {
        Level::Excited => e,
        Level::Ground => g,
    })
}

/// (J_e(t), J_g(t)) from the sinc² representation.
pub fn integrated_rate_pair(t: f64, spec: &BathSpectrumSpec, beta: InverseTemperature) -> Result<(f64, f64)> {
    check_inputs(t, spec, beta)?;
    if t == 0.0 {
        return Ok((0.0, 0.0));
    }
    let b = beta.beta();
    let cut = frequency_cut(spec, t);
    let bp = oscillatory_breakpoints(spec, t, cut);
    let r = integrate(
        |u| {
            let g = spec.g0(u);
            if g == 0.0 {
                return [0.0; 2];
            }
            let n = occupation(u, b);
            let km = sin2_over(u - OMEGA_A, t);
            let kp = sin2_over(u + OMEGA_A, t);
            [g * ((n + 1.0) * km + n * kp), g * ((n + 1.0) * kp + n * km)]
        },
        &bp,
        quad_opts(),
    )?;
    Ok((r.value[0], r.value[1]))
}

pub fn integrated_rate(t: f64, which: Level, spec: &BathSpectrumSpec, beta: InverseTemperature) -> Result<f64> {
    let (e, g) = integrated_rate_pair(t, spec, beta)?;
    Ok(match which {
        Level::Excited => e,
        Level::Ground => g,
    })
}

/// Zeno slope Ṙ_0 = ∫G_T dω = ∫G_0(2n+1) over the support.
pub fn rdot0(spec: &BathSpectrumSpec, beta: InverseTemperature) -> Result<f64> {
    spec.validate()?;
    if beta.alpha() == 0.0 {
        return Err(Error::domain("Zeno slope diverges at infinite temperature (alpha = 0)"));
    }
    let b = beta.beta();
    let [v] = integrate_over_support(spec, |u| {
        let g = spec.g0(u);
        if g == 0.0 {
            [0.0]
        } else {
            [g * (2.0 * occupation(u, b) + 1.0)]
        }
    })?;
    Ok(v)
}

/// Golden-rule rates (2πG_T(ω_a), 2πG_T(−ω_a)).
pub fn markov_rates(spec: &BathSpectrumSpec, beta: InverseTemperature) -> (f64, f64) {
    (2.0 * PI * spec.g_t(OMEGA_A, beta), 2.0 * PI * spec.g_t(-OMEGA_A, beta))
}

/// Rates tabulated on a uniform grid with derivative data for cubic Hermite
/// interpolation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateTable {
    pub times: Vec<f64>,
    pub r_e: Vec<f64>,
    pub r_g: Vec<f64>,
    pub dr_e: Vec<f64>,
    pub dr_g: Vec<f64>,
    pub j_e: Vec<f64>,
    pub j_g: Vec<f64>,
    pub rdot0: f64,
    pub markov_e: f64,
    pub markov_g: f64,
    pub step: f64,
}

/// Default table spacing [1/ω_a].
pub const DEFAULT_TABLE_STEP: f64 = 0.01;

struct Node {
    /// 2·w·G_0·(n+1) and 2·w·G_0·n
    a: f64,
    b: f64,
    dm: f64,
    dp: f64,
}

impl RateTable {
    /// Tabulate R_{e,g} and dR/dt on [0, t_max] with spacing `step`.
    pub fn build(spec: &BathSpectrumSpec, beta: InverseTemperature, t_max: f64, step: f64) -> Result<Self> {
        check_inputs(t_max, spec, beta)?;
        if !(step > 0.0) || !(t_max > 0.0) {
            return Err(Error::domain("rate table needs t_max > 0 and step > 0"));
        }
        let b = beta.beta();
        let n_steps = (t_max / step).ceil() as usize;
        let rdot0 = rdot0(spec, beta)?;
        let (markov_e, markov_g) = markov_rates(spec, beta);

        // Fixed frequency nodes on [lo, W] resolving the oscillation at t_max.
        let lo = spec.support_lo;
        let w = spec.peak_cut();
        let t_end = n_steps as f64 * step;
        let width = (PI / (2.0 * t_end)).min(spec.gamma / 4.0).min(0.05);
        let c0 = width.max(lo).min(w);
        let mut pts = spec.peak_breakpoints();
        pts.extend(log_breakpoints(lo, c0, 2));
        pts.extend(uniform_breakpoints(c0, w, width));
        let bp = merge_breakpoints(lo, w, pts);
        let mut nodes = Vec::with_capacity(bp.len() * 21);
        for pair in bp.windows(2) {
            for (u, wt) in kronrod_nodes(pair[0], pair[1]) {
                let g = spec.g0(u);
                if g == 0.0 {
                    continue;
                }
                let n = occupation(u, b);
                nodes.push(Node { a: 2.0 * wt * g * (n + 1.0), b: 2.0 * wt * g * n, dm: u - OMEGA_A, dp: u + OMEGA_A });
            }
        }

        let mut times = Vec::with_capacity(n_steps + 1);
        let mut r_e = Vec::with_capacity(n_steps + 1);
        let mut r_g = Vec::with_capacity(n_steps + 1);
        let mut dr_e = Vec::with_capacity(n_steps + 1);
        let mut dr_g = Vec::with_capacity(n_steps + 1);

        // phase rotors e^{iΔt}, advanced by e^{iΔh}; reseeded periodically
        let mut zm: Vec<(f64, f64)> = vec![(1.0, 0.0); nodes.len()];
        let mut zp: Vec<(f64, f64)> = vec![(1.0, 0.0); nodes.len()];
        let rot_m: Vec<(f64, f64)> = nodes.iter().map(|nd| (nd.dm * step).sin_cos()).map(|(s, c)| (c, s)).collect();
        let rot_p: Vec<(f64, f64)> = nodes.iter().map(|nd| (nd.dp * step).sin_cos()).map(|(s, c)| (c, s)).collect();
        const RESEED: usize = 512;

        for k in 0..=n_steps {
            let t = k as f64 * step;
            if k > 0 && k % RESEED == 0 {
                for (i, nd) in nodes.iter().enumerate() {
                    let (s, c) = (nd.dm * t).sin_cos();
                    zm[i] = (c, s);
                    let (s, c) = (nd.dp * t).sin_cos();
                    zp[i] = (c, s);
                }
            }
            let (mut re, mut rg, mut de, mut dg) = (0.0, 0.0, 0.0, 0.0);
            for (i, nd) in nodes.iter().enumerate() {
                let (cm, sm) = zm[i];
                let (cp, sp) = zp[i];
                let qm = if nd.dm.abs() < 1e-12 { t } else { sm / nd.dm };
                let qp = sp / nd.dp;
                re += nd.a * qm + nd.b * qp;
                rg += nd.a * qp + nd.b * qm;
                de += nd.a * cm + nd.b * cp;
                dg += nd.a * cp + nd.b * cm;
            }
            if k == 0 {
                re = 0.0;
                rg = 0.0;
                de = 2.0 * rdot0;
                dg = 2.0 * rdot0;
            } else {
                let cut = frequency_cut(spec, t);
                if cut > w {
                    let tail = tail_terms(spec, b, t, w, cut)?;
                    re += tail[0];
                    rg += tail[1];
                    de += tail[2];
                    dg += tail[3];
                }
            }
            times.push(t);
            r_e.push(re);
            r_g.push(rg);
            dr_e.push(de);
            dr_g.push(dg);
            for i in 0..nodes.len() {
                zm[i] = cmul(zm[i], rot_m[i]);
                zp[i] = cmul(zp[i], rot_p[i]);
            }
        }

        let j_e = hermite_cumulative(&r_e, &dr_e, step);
        let j_g = hermite_cumulative(&r_g, &dr_g, step);
        Ok(RateTable { times, r_e, r_g, dr_e, dr_g, j_e, j_g, rdot0, markov_e, markov_g, step })
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.times.len() - 1;
        let x = (t / self.step).max(0.0);
        let k = (x.floor() as usize).min(last.saturating_sub(1));
        (k, (x - k as f64).min(1.0))
    }

    /// Hermite-interpolated (R_e(t), R_g(t)); t is clamped to the table range.
    pub fn rates_at(&self, t: f64) -> (f64, f64) {
        let (k, s) = self.locate(t);
        let h = self.step;
        let h00 = (2.0 * s - 3.0) * s * s + 1.0;
        let h10 = ((s - 2.0) * s + 1.0) * s;
        let h01 = (3.0 - 2.0 * s) * s * s;
        let h11 = (s - 1.0) * s * s;
        let f = |v: &[f64], d: &[f64]| h00 * v[k] + h10 * h * d[k] + h01 * v[k + 1] + h11 * h * d[k + 1];
        (f(&self.r_e, &self.dr_e), f(&self.r_g, &self.dr_g))
    }

    /// Exact integral of the Hermite interpolant, (J_e(t), J_g(t)).
    pub fn integrated_at(&self, t: f64) -> (f64, f64) {
        let (k, s) = self.locate(t);
        let h = self.step;
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let a00 = 0.5 * s4 - s3 + s;
        let a10 = 0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2;
        let a01 = -0.5 * s4 + s3;
        let a11 = 0.25 * s4 - s3 / 3.0;
        let f = |j: &[f64], v: &[f64], d: &[f64]| {
            j[k] + h * (a00 * v[k] + a10 * h * d[k] + a01 * v[k + 1] + a11 * h * d[k + 1])
        };
        (f(&self.j_e, &self.r_e, &self.dr_e), f(&self.j_g, &self.r_g, &self.dr_g))
    }

    /// First tabulated time with R_g < 0, if any.
    pub fn first_negative_ground_rate(&self) -> Option<f64> {
        self.times.iter().zip(&self.r_g).find(|(_, r)| **r < 0.0).map(|(t, _)| *t)
    }
}

#[inline]
fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn hermite_cumulative(v: &[f64], d: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..v.len() {
        acc += 0.5 * h * (v[k - 1] + v[k]) + h * h / 12.0 * (d[k - 1] - d[k]);
        out.push(acc);
    }
    out
}

/// [R_e, R_g, R_e', R_g'] contributions from the Lorentzian tail [a, b].
fn tail_terms(spec: &BathSpectrumSpec, beta: f64, t: f64, a: f64, b: f64) -> Result<[f64; 4]> {
    let mut pts = log_breakpoints(a, b, 8);
    pts.extend(uniform_breakpoints(a, b, PI / (8.0 * t)));
    let bp = merge_breakpoints(a, b, pts);
    Ok(integrate(
        |u| {
            let g = spec.g0(u);
            if g == 0.0 {
                return [0.0; 4];
            }
            let n = occupation(u, beta);
            let (dm, dp) = (u - OMEGA_A, u + OMEGA_A);
            let (sm, cm) = (dm * t).sin_cos();
            let (sp, cp) = (dp * t).sin_cos();
            let (qm, qp) = (sm / dm, sp / dp);
            let (x, y) = (2.0 * g * (n + 1.0), 2.0 * g * n);
            [x * qm + y * qp, x * qp + y * qm, x * cm + y * cp, x * cp + y * cm]
        },
        &bp,
        quad_opts(),
    )?
    .value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(alpha: f64) -> InverseTemperature {
        InverseTemperature::new(alpha).unwrap()
    }

    fn slow_band() -> BathSpectrumSpec {
        BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap().band_limited(5.0).unwrap()
    }

    #[test]
    fn sinc_basics() {
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc(1e-5) - (1e-5f64).sin() / 1e-5).abs() < 1e-15);
        assert!((sinc(2.0) - 2f64.sin() / 2.0).abs() < 1e-16);
    }

    #[test]
    fn zero_time_and_zero_coupling() {
        let s = slow_band();
        assert_eq!(rate_pair(0.0, &s, b(1.0)).unwrap(), (0.0, 0.0));
        assert_eq!(integrated_rate_pair(0.0, &s, b(1.0)).unwrap(), (0.0, 0.0));
        let z = BathSpectrumSpec::lorentzian(0.0, 1.0, 10.0).unwrap();
        assert_eq!(rdot0(&z, b(1.0)).unwrap(), 0.0);
        assert!(rate_pair(-1.0, &s, b(1.0)).is_err());
    }

    #[test]
    fn rdot0_zero_temperature_closed_form() {
        let s = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap();
        let r = rdot0(&s, InverseTemperature::zero_temperature()).unwrap();
        assert!((r - s.total_weight()).abs() < 1e-13);
    }

    #[test]
    fn rdot0_trapezoid_oracle() {
        // 10⁶-point trapezoid in ln ω over the support up to ω = 10⁶
        let s = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap();
        let r = rdot0(&s, b(1.0)).unwrap();
        let (x0, x1) = (s.support_lo.ln(), 1e6f64.ln());
        let n = 1_000_000;
        let h = (x1 - x0) / n as f64;
        let f = |x: f64| {
            let w = x.exp();
            let n_t = 1.0 / w.exp_m1();
            s.g0(w) * (2.0 * n_t + 1.0) * w
        };
        let mut acc = 0.5 * (f(x0) + f(x1));
        for k in 1..n {
            acc += f(x0 + h * k as f64);
        }
        let oracle = acc * h + s.eta_max_sq() * s.gamma * s.gamma / 1e6;
        assert!((r - oracle).abs() < 1e-7 * r, "{r} vs {oracle}");
    }

    #[test]
    fn markov_kms_ratio() {
        let s = slow_band();
        let (e, g) = markov_rates(&s, b(1.0));
        assert!((g / e - (-1.0f64).exp()).abs() < 1e-14);
        let expected_e = 2.0 * PI * 0.07 * (1.0 + 1.0 / (std::f64::consts::E - 1.0));
        assert!((e - expected_e).abs() < 1e-14);
        let (_, g0) = markov_rates(&s, InverseTemperature::zero_temperature());
        assert_eq!(g0, 0.0);
    }

    #[test]
    fn zeno_linearity() {
        let s = slow_band();
        let beta = b(1.0);
        let slope = rdot0(&s, beta).unwrap();
        for &t in &[1e-3, 3e-3, 1e-2] {
            let (e, g) = rate_pair(t, &s, beta).unwrap();
            assert!((e / (2.0 * slope * t) - 1.0).abs() < 0.01);
            assert!((g / (2.0 * slope * t) - 1.0).abs() < 0.01);
            assert!((e - g).abs() / e < 0.01);
        }
    }

    #[test]
    fn quadrature_stable_under_panel_halving() {
        // reference with half-width panels through a manual breakpoint set
        let s = slow_band();
        let beta = b(1.0);
        for &t in &[0.3, 4.0, 40.0] {
            let (e, g) = rate_pair(t, &s, beta).unwrap();
            let cut = frequency_cut(&s, t);
            let mut pts = oscillatory_breakpoints(&s, t, cut);
            pts.extend(uniform_breakpoints(s.support_lo, cut, PI / (16.0 * t)));
            let bp = merge_breakpoints(s.support_lo, cut, pts);
            let bb = beta.beta();
            let r = integrate(
                |u| {
                    let gg = s.g0(u);
                    let n = occupation(u, bb);
                    let sm = sin_over(u - 1.0, t);
                    let sp = sin_over(u + 1.0, t);
                    [2.0 * gg * ((n + 1.0) * sm + n * sp), 2.0 * gg * ((n + 1.0) * sp + n * sm)]
                },
                &bp,
                quad_opts(),
            )
            .unwrap();
            assert!((r.value[0] - e).abs() < 1e-8 && (r.value[1] - g).abs() < 1e-8);
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let s = slow_band();
        let beta = b(1.0);
        let table = RateTable::build(&s, beta, 60.0, DEFAULT_TABLE_STEP).unwrap();
        for &t in &[0.01, 0.337, 1.0, 7.77, 25.0, 59.99] {
            let (e, g) = table.rates_at(t);
            let (de, dg) = rate_pair(t, &s, beta).unwrap();
            assert!((e - de).abs() < 1e-8, "t={t}: {e} vs {de}");
            assert!((g - dg).abs() < 1e-8, "t={t}: {g} vs {dg}");
        }
        assert_eq!(table.r_e[0], 0.0);
        assert_eq!(table.r_g[0], 0.0);
    }

    #[test]
    fn table_with_unbounded_tail_matches_direct() {
        let s = BathSpectrumSpec::lorentzian(0.07, 1.0, 10.0).unwrap();
        let beta = InverseTemperature::zero_temperature();
        let table = RateTable::build(&s, beta, 10.0, DEFAULT_TABLE_STEP).unwrap();
        for &t in &[0.005, 0.05, 0.5, 3.3, 9.9] {
            let (e, g) = table.rates_at(t);
            let (de, dg) = rate_pair(t, &s, beta).unwrap();
            assert!((e - de).abs() < 1e-8 * de.abs().max(1.0), "t={t}: {e} vs {de}");
            assert!((g - dg).abs() < 1e-8 * dg.abs().max(1.0), "t={t}: {g} vs {dg}");
        }
    }

    #[test]
    fn table_integral_consistent_with_trapezoid() {
        let s = slow_band();
        let table = RateTable::build(&s, b(1.0), 20.0, DEFAULT_TABLE_STEP).unwrap();
        let h = table.step;
        let mut trap = 0.0;
        let mut worst: f64 = 0.0;
        for k in 1..table.times.len() {
            trap += 0.5 * h * (table.r_e[k - 1] + table.r_e[k]);
            worst = worst.max((trap - table.j_e[k]).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn integrated_rate_matches_table() {
        let s = slow_band();
        let beta = b(1.0);
        let table = RateTable::build(&s, beta, 5.0, DEFAULT_TABLE_STEP).unwrap();
        for &t in &[0.5, 1.0, 3.0] {
            let (je, jg) = integrated_rate_pair(t, &s, beta).unwrap();
            let (te, tg) = table.integrated_at(t);
            assert!((je - te).abs() < 1e-8 * je, "{je} {te}");
            assert!((jg - tg).abs() < 1e-8 * jg, "{jg} {tg}");
        }
    }

    #[test]
    fn half_angle_kernel_identity() {
        // 4 sin²(Δt/2)/Δ² = 2(1 − cos Δt)/Δ²
        for &(d, t) in &[(0.3, 2.0), (1.7, 0.4), (-2.2, 5.0)] {
            let lhs = sin2_over(d, t);
            let rhs: f64 = 2.0 * (1.0 - (d * t).cos()) / (d * d);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_exposure_positive_at_zero_temperature() {
        let s = slow_band();
        let (_, jg) = integrated_rate_pair(0.7, &s, InverseTemperature::zero_temperature()).unwrap();
        assert!(jg > 0.0);
    }
}
