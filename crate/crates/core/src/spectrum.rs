//! Bath coupling spectra, thermal occupation and discretization into modes.
//!
//! All frequencies are in units of the qubit gap ω_a (= 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, merge_breakpoints, QuadOptions};

/// Qubit gap in internal units.
pub const OMEGA_A: f64 = 1.0;

/// Default lower support edge of continuum spectra [ω_a].
pub const DEFAULT_IR_EDGE: f64 = 1e-6;

/// Dimensionless inverse temperature α = βħω_a; `f64::INFINITY` is T = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseTemperature {
    alpha: f64,
}

impl InverseTemperature {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(InverseTemperature { alpha })
    }

    pub fn zero_temperature() -> Self {
        InverseTemperature { alpha: f64::INFINITY }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// β in units of 1/ω_a.
    pub fn beta(&self) -> f64 {
        self.alpha / OMEGA_A
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.alpha.is_infinite()
    }
}

/// Bose occupation without the pole check; used inside quadrature loops.
#[inline]
pub(crate) fn occupation(omega: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return if omega > 0.0 { 0.0 } else { -1.0 };
    }
    let x = beta * omega;
    if x > 700.0 {
        0.0
    } else if x < -700.0 {
        -1.0
    } else {
        1.0 / x.exp_m1()
    }
}

/// n_T(ω) = 1/(e^{βω} − 1). Exact zero at T = 0 for ω > 0.
pub fn thermal_occupation(omega: f64, beta: InverseTemperature) -> Result<f64> {
    if omega == 0.0 || omega.is_nan() {
        return Err(Error::domain("thermal occupation has a pole at omega = 0"));
    }
    Ok(occupation(omega, beta.beta()))
}

/// Lorentzian coupling spectrum G_0(ω) = η_max²Γ²/(Γ² + (ω − ω_0)²) on a
/// positive support window `[support_lo, support_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpectrumSpec {
    /// Coupling amplitude; G_0 peaks at η_max² [ω_a].
    pub eta_max: f64,
    /// Spectral peak [ω_a].
    pub omega0: f64,
    /// Half-width Γ = 1/t_c [ω_a].
    pub gamma: f64,
    /// Qubit gap (1 internally).
    pub omega_a: f64,
    /// Lower support edge [ω_a], > 0.
    pub support_lo: f64,
    /// Upper support edge [ω_a], may be infinite.
    pub support_hi: f64,
}

impl BathSpectrumSpec {
    /// Lorentzian with peak height `eta_max_sq`, centre `omega0` and memory
    /// time `t_c` (Γ = 1/t_c), supported on [1e-6, ∞).
    pub fn lorentzian(eta_max_sq: f64, omega0: f64, t_c: f64) -> Result<Self> {
        if !(eta_max_sq >= 0.0) || !eta_max_sq.is_finite() {
            return Err(Error::domain(format!("eta_max^2 must be finite and >= 0, got {eta_max_sq}")));
        }
        if !(t_c > 0.0) || !t_c.is_finite() {
            return Err(Error::domain(format!("t_c must be finite and > 0, got {t_c}")));
        }
        let spec = BathSpectrumSpec {
            eta_max: eta_max_sq.sqrt(),
            omega0,
            gamma: 1.0 / t_c,
            omega_a: OMEGA_A,
            support_lo: DEFAULT_IR_EDGE,
            support_hi: f64::INFINITY,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_max >= 0.0) || !self.eta_max.is_finite() {
            return Err(Error::domain("eta_max must be finite and >= 0"));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::domain("gamma must be finite and > 0"));
        }
        if !(self.omega0 > 0.0) || !self.omega0.is_finite() {
            return Err(Error::domain("omega0 must be finite and > 0"));
        }
        if self.omega_a != OMEGA_A {
            return Err(Error::domain("omega_a must be 1 in internal units"));
        }
        if !(self.support_lo > 0.0) || !(self.support_hi > self.support_lo) {
            return Err(Error::domain(format!(
                "support must satisfy 0 < lo < hi, got [{}, {}]",
                self.support_lo, self.support_hi
            )));
        }
        Ok(())
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.support_lo = lo;
        self.support_hi = hi;
        self.validate()?;
        Ok(self)
    }

    /// Restrict the support to ω_0 ± coverage·Γ (lower edge kept positive).
    pub fn band_limited(self, coverage: f64) -> Result<Self> {
        if !(coverage > 0.0) {
            return Err(Error::domain("coverage must be > 0"));
        }
        let lo = (self.omega0 - coverage * self.gamma).max(self.support_lo);
        let hi = (self.omega0 + coverage * self.gamma).min(self.support_hi);
        self.with_support(lo, hi)
    }

    pub fn eta_max_sq(&self) -> f64 {
        self.eta_max * self.eta_max
    }

    pub fn t_c(&self) -> f64 {
        1.0 / self.gamma
    }

    /// Lorentzian profile without support restriction, normalized to 1 at ω_0.
    #[inline]
    pub fn profile(&self, omega: f64) -> f64 {
        let d = omega - self.omega0;
        let g2 = self.gamma * self.gamma;
        g2 / (g2 + d * d)
    }

    #[inline]
    pub fn g0(&self, omega: f64) -> f64 {
        if omega < self.support_lo || omega > self.support_hi {
            0.0
        } else {
            self.eta_max_sq() * self.profile(omega)
        }
    }

    /// G_T(ω) = G_0(ω)(n(ω)+1) + G_0(−ω)n(−ω); `beta` in units of 1/ω_a.
    #[inline]
    pub fn g_t_raw(&self, omega: f64, beta: f64) -> f64 {
        if omega > 0.0 {
            let g = self.g0(omega);
            if g == 0.0 {
                0.0
            } else {
                g * (occupation(omega, beta) + 1.0)
            }
        } else if omega < 0.0 {
            let g = self.g0(-omega);
            if g == 0.0 {
                0.0
            } else {
                // G_0(−ω)n(−ω) with −ω > 0
                g * occupation(-omega, beta)
            }
        } else {
            0.0
        }
    }

    pub fn g_t(&self, omega: f64, beta: InverseTemperature) -> f64 {
        self.g_t_raw(omega, beta.beta())
    }

    /// ∫G_0 dω over the support, closed form.
    pub fn total_weight(&self) -> f64 {
        let a = ((self.support_lo - self.omega0) / self.gamma).atan();
        let b = if self.support_hi.is_finite() {
            ((self.support_hi - self.omega0) / self.gamma).atan()
        } else {
            std::f64::consts::FRAC_PI_2
        };
        self.eta_max_sq() * self.gamma * (b - a)
    }

    /// Upper frequency beyond which the Lorentzian tail is handled separately.
    pub fn peak_cut(&self) -> f64 {
        (self.omega0 + 40.0 * self.gamma).min(self.support_hi)
    }

    /// Breakpoints resolving the Lorentzian peak inside `[a, b]`.
    pub fn peak_breakpoints(&self) -> Vec<f64> {
        let mut v = vec![self.support_lo, self.omega_a];
        if self.support_hi.is_finite() {
            v.push(self.support_hi);
        }
        for k in [-20.0, -10.0, -3.0, -1.0, -0.3, 0.0, 0.3, 1.0, 3.0, 10.0, 20.0] {
            v.push(self.omega0 + k * self.gamma);
        }
        v
    }
}

pub fn g0(omega: f64, spec: &BathSpectrumSpec) -> f64 {
    spec.g0(omega)
}

pub fn g_t(omega: f64, spec: &BathSpectrumSpec, beta: InverseTemperature) -> f64 {
    spec.g_t(omega, beta)
}

/// Integrate a vector function of the mode frequency over the whole support
/// of `spec`, including the Lorentzian tail beyond ω_0 + 40Γ by the
/// substitution u = W/s.
pub fn integrate_over_support<const N: usize, F>(spec: &BathSpectrumSpec, mut f: F) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 100_000 };
    let lo = spec.support_lo;
    let w = spec.peak_cut();
    let mut pts = spec.peak_breakpoints();
    pts.extend(log_breakpoints(lo, OMEGA_A.min(w), 2));
    let bp = merge_breakpoints(lo, w, pts);
    let mut total = integrate(&mut f, &bp, opts)?.value;
    if spec.support_hi > w {
        // ∫_W^hi f(u) du = ∫_{W/hi}^1 f(W/s) W/s² ds
        let s_lo = if spec.support_hi.is_finite() { w / spec.support_hi } else { 0.0 };
        let tail = integrate(
            |s: f64| {
                if s <= 0.0 {
                    return [0.0; N];
                }
                let u = w / s;
                let mut v = f(u);
                let jac = w / (s * s);
                for x in v.iter_mut() {
                    *x = if *x == 0.0 { 0.0 } else { *x * jac };
                }
                v
            },
            &merge_breakpoints(s_lo, 1.0, [0.1, 0.5]),
            opts,
        )?
        .value;
        for i in 0..N {
            total[i] += tail[i];
        }
    }
    Ok(total)
}

/// Log-spaced breakpoints covering `[lo, hi]` with `per_decade` points per decade.
pub(crate) fn log_breakpoints(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    if !(hi > lo) || lo <= 0.0 {
        return vec![];
    }
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n as f64)).collect()
}

/// A finite set of bath modes with frequencies ω_k and couplings η_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBathModel {
    pub modes: Vec<(f64, f64)>,
    /// Grid spacing Δω [ω_a].
    pub spacing: f64,
    /// Grid window [ω_first, ω_last].
    pub window: (f64, f64),
    pub omega_a: f64,
}

impl DiscreteBathModel {
    pub fn new(modes: Vec<(f64, f64)>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::domain("bath needs at least one mode"));
        }
        if modes.iter().any(|&(w, e)| !(w > 0.0) || !e.is_finite()) {
            return Err(Error::domain("mode frequencies must be > 0 and couplings finite"));
        }
        let lo = modes.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
        let hi = modes.iter().map(|m| m.0).fold(0.0, f64::max);
        let spacing = if modes.len() > 1 { (hi - lo) / (modes.len() - 1) as f64 } else { 0.0 };
        Ok(DiscreteBathModel { modes, spacing, window: (lo, hi), omega_a: OMEGA_A })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Σ_k η_k².
    pub fn coupling_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.1 * m.1).sum()
    }
}

/// Uniform grid of `n_modes` on [max(ω_0 − cΓ, ·), ω_0 + cΓ] with
/// η_k = η_max·sqrt(L(ω_k))·sqrt(Δω).
pub fn discretize(spec: &BathSpectrumSpec, n_modes: usize, coverage: f64) -> Result<DiscreteBathModel> {
    spec.validate()?;
    if n_modes < 2 {
        return Err(Error::domain("discretization needs at least two modes"));
    }
    if !(coverage > 0.0) || !coverage.is_finite() {
        return Err(Error::domain("coverage must be finite and > 0"));
    }
    let hi = (spec.omega0 + coverage * spec.gamma).min(spec.support_hi);
    let mut lo = (spec.omega0 - coverage * spec.gamma).max(spec.support_lo);
    let n = n_modes as f64;
    if spec.omega0 - coverage * spec.gamma <= 0.0 {
        // lo = Δω with Δω = (hi − lo)/(N − 1)  ⇒  lo = hi/N
        let clamped = hi / n;
        log::warn!(
            "discretization window reaches omega <= 0; lower edge clamped to {clamped:.6} (one grid spacing)"
        );
        lo = clamped.max(spec.support_lo);
    }
    if !(hi > lo) {
        return Err(Error::domain("discretization window is empty"));
    }
    let dw = (hi - lo) / (n - 1.0);
    let modes = (0..n_modes)
        .map(|k| {
            let w = if k + 1 == n_modes { hi } else { lo + dw * k as f64 };
            (w, spec.eta_max * (spec.profile(w) * dw).sqrt())
        })
        .collect();
    Ok(DiscreteBathModel { modes, spacing: dw, window: (lo, hi), omega_a: OMEGA_A })
}
