//! Dormand–Prince 5(4) integrator with adaptive steps that lands exactly on
//! the requested end time.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, max_steps: 1_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive integrator state; the last accepted step size is kept between
/// calls so that consecutive segments start with a good guess.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub opts: OdeOptions,
    h: f64,
}

impl Dopri5 {
    pub fn new(opts: OdeOptions) -> Self {
        Dopri5 { opts, h: 0.0 }
    }

    /// Integrate y' = f(t, y) from (t0, y0) to t1 > t0.
    pub fn integrate<const N: usize, F>(&mut self, mut f: F, t0: f64, y0: [f64; N], t1: f64) -> Result<[f64; N]>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        if t1 < t0 {
            return Err(Error::Ode { t: t0, reason: "end time precedes start time".into() });
        }
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(y0);
        }
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        if self.h <= 0.0 || !self.h.is_finite() {
            self.h = (span * 1e-2).min(1e-2).max(1e-10);
        }
        let mut h = self.h.min(span);
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::Ode { t, reason: "step limit exceeded".into() });
            }
            let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
            if last {
                h = t1 - t;
            }
            let stage = |y: &[f64; N], coeffs: &[(f64, &[f64; N])]| {
                let mut out = *y;
                for (c, k) in coeffs {
                    for i in 0..N {
                        out[i] += h * c * k[i];
                    }
                }
                out
            };
            let k2 = f(t + C2 * h, &stage(&y, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &stage(&y, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &stage(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * h, &stage(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + h, &stage(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = stage(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new);
            let mut err = 0.0f64;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::Ode { t, reason: "non-finite derivative".into() });
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * fac;
                } else {
                    // keep the unclipped estimate for the next segment
                    self.h = self.h.max(h * fac.min(1.0));
                }
                if last {
                    return Ok(y);
                }
                h = self.h;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Ode { t, reason: "step size underflow".into() });
                }
            }
        }
    }
}
