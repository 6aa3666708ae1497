//! Adaptive Gauss–Kronrod and tanh-sinh quadrature.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    NoConvergence { a: f64, b: f64, estimate: f64, error: f64 },
    #[error("integrand returned a non-finite value at x={0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with its embedded 7-point Gauss error estimate.
pub fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite(c));
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let x = h * XGK[k];
        let (f1, f2) = (f(c - x), f(c + x));
        if !f1.is_finite() {
            return Err(QuadError::NonFinite(c - x));
        }
        if !f2.is_finite() {
            return Err(QuadError::NonFinite(c + x));
        }
        kronrod += WGK[k] * (f1 + f2);
        if k % 2 == 1 {
            gauss += WG[k / 2] * (f1 + f2);
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of f over [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_PANELS: usize = 4000;
    let (value, error) = kronrod15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= MAX_PANELS {
            return Err(QuadError::NoConvergence { a, b, estimate: total, error: total_err });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(QuadError::NoConvergence { a, b, estimate: total, error: total_err });
        }
        let (v1, e1) = kronrod15(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod15(&mut f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation in the running totals
    Ok(heap.iter().map(|p| p.value).sum())
}

/// Point handed to a tanh-sinh integrand: the abscissa and its distances to both ends,
/// the latter computed without cancellation.
#[derive(Debug, Clone, Copy)]
pub struct EndpointPoint {
    pub x: f64,
    pub from_a: f64,
    pub to_b: f64,
}

/// Tanh-sinh quadrature over [a, b]; tolerates integrable endpoint singularities.
pub fn tanh_sinh<F: FnMut(EndpointPoint) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, QuadError> {
    let half = 0.5 * (b - a);
    const T_MAX: f64 = 6.5;
    let mut eval = |t: f64| -> Result<f64, QuadError> {
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let weight = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        // 1 - tanh(u) and 1 + tanh(u) without cancellation
        let to_b = half * 2.0 / (1.0 + (2.0 * u).exp());
        let from_a = half * 2.0 / (1.0 + (-2.0 * u).exp());
        if to_b <= 0.0 || from_a <= 0.0 || weight == 0.0 {
            return Ok(0.0);
        }
        let x = if u > 0.0 { b - to_b } else { a + from_a };
        let v = f(EndpointPoint { x, from_a, to_b }) * weight;
        if !v.is_finite() {
            return Err(QuadError::NonFinite(x));
        }
        Ok(v)
    };
    let mut h = 1.0;
    let mut sum = eval(0.0)?;
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        let t = k as f64 * h;
        sum += eval(t)? + eval(-t)?;
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval(t)? + eval(-t)?;
            k += 2;
        }
        let next = sum * h * half;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= tol.abs.max(tol.rel * next.abs()) && h < 0.1 {
            return Ok(next);
        }
    }
    Err(QuadError::NoConvergence { a, b, estimate, error: f64::NAN })
}
