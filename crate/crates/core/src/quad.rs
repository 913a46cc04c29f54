//! Adaptive 10/21-point Gauss–Kronrod quadrature for vector-valued
//! integrands on finite intervals with user-supplied breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Kronrod abscissae on [-1, 1] (non-negative half, descending).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 200_000 }
    }
}

impl QuadOptions {
    pub fn with_abs(abs_tol: f64) -> Self {
        QuadOptions { abs_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
}

/// The 21-point Kronrod rule on [a, b] together with the |K21 − G10| error.
pub fn gk21<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64)
where
    F: FnMut(f64) -> [f64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(c);
    for i in 0..N {
        k[i] = WGK[10] * fc[i];
    }
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..N {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).abs());
    }
    (k, err)
}

/// Nodes and weights of the 21-point Kronrod rule mapped to [a, b].
pub fn kronrod_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (0..21).map(move |m| {
        if m == 10 {
            (c, h * WGK[10])
        } else if m < 10 {
            (c - h * XGK[m], h * WGK[m])
        } else {
            (c + h * XGK[20 - m], h * WGK[20 - m])
        }
    })
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration over the panels defined by sorted
/// `breakpoints` (at least two). Convergence is tested on the max-norm of the
/// vector value.
pub fn integrate<const N: usize, F>(
    mut f: F,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    if breakpoints.len() < 2 {
        return Err(Error::domain("quadrature needs at least two breakpoints"));
    }
    let mut heap = BinaryHeap::with_capacity(breakpoints.len() * 2);
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, error) = gk21(&mut f, a, b);
        heap.push(Segment { a, b, value, error });
    }
    let totals = |heap: &BinaryHeap<Segment<N>>| {
        let mut v = [0.0; N];
        let mut e = 0.0;
        for s in heap.iter() {
            for i in 0..N {
                v[i] += s.value[i];
            }
            e += s.error;
        }
        (v, e)
    };
    let (mut value, mut error) = totals(&heap);
    let tol = |v: &[f64; N]| {
        let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        opts.abs_tol.max(opts.rel_tol * norm)
    };
    let mut iterations = 0usize;
    while error > tol(&value) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature { achieved: error, requested: tol(&value) });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(worst);
            return Err(Error::Quadrature { achieved: error, requested: tol(&value) });
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        for i in 0..N {
            value[i] += v1[i] + v2[i] - worst.value[i];
        }
        error += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        iterations += 1;
        if iterations.is_multiple_of(256) {
            // resum to keep the running totals free of drift
            let (v, e) = totals(&heap);
            value = v;
            error = e;
        }
    }
    let (value, error) = totals(&heap);
    Ok(QuadResult { value, error })
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, breakpoints: &[f64], opts: QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| [f(x)], breakpoints, opts).map(|r| r.value[0])
}

/// Breakpoints `a = x0 < ... < xn = b` with no panel wider than `max_width`.
pub fn uniform_breakpoints(a: f64, b: f64, max_width: f64) -> Vec<f64> {
    let n = (((b - a) / max_width).ceil() as usize).max(1);
    (0..=n).map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 }).collect()
}

/// Merge, sort and deduplicate breakpoint lists, keeping only points in [a, b].
pub fn merge_breakpoints(a: f64, b: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = extra.into_iter().filter(|x| x.is_finite() && *x > a && *x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1e-300));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate_scalar(|x| x.powi(5) - 3.0 * x * x, &[0.0, 2.0], QuadOptions::default()).unwrap();
        assert!((r - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn kronrod_nodes_reproduce_rule() {
        let s: f64 = kronrod_nodes(1.0, 3.0).map(|(x, w)| w * x.exp()).sum();
        let (k, _) = gk21(&mut |x: f64| [x.exp()], 1.0, 3.0);
        assert!((s - k[0]).abs() < 1e-14 * k[0]);
    }

    #[test]
    fn log_singular_endpoint() {
        let r = integrate_scalar(|x: f64| x.ln(), &[0.0, 1.0], QuadOptions::default()).unwrap();
        assert!((r + 1.0).abs() < 1e-10);
    }

    #[test]
    fn vector_valued() {
        let r = integrate(|x: f64| [x.sin(), x.cos()], &[0.0, 1.0, std::f64::consts::PI], QuadOptions::default())
            .unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
    }

    #[test]
    fn breakpoint_helpers() {
        let b = uniform_breakpoints(0.0, 1.0, 0.3);
        assert_eq!(b.len(), 5);
        assert_eq!(*b.last().unwrap(), 1.0);
        let m = merge_breakpoints(0.0, 1.0, [0.5, 2.0, -1.0, 0.5]);
        assert_eq!(m, vec![0.0, 0.5, 1.0]);
    }
}
