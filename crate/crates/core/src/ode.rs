//! Adaptive Dormand–Prince 5(4) integrator over fixed-size states.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("step budget of {max_steps} exhausted at t={t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state at t={t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
    pub max_step: f64,
}

impl OdeOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 2_000_000, initial_step: None, max_step: f64::INFINITY }
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.initial_step = Some(h);
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub steps: usize,
    /// true when the observer asked to stop before reaching the end point
    pub interrupted: bool,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y' = f(t, y) from t0 to t1 (either direction).
///
/// `observer` sees every accepted state, starting with (t0, y0); returning false stops early.
pub fn solve<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<Outcome<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    if !observer(t, &y) {
        return Ok(Outcome { t, y, steps: 0, interrupted: true });
    }
    if t0 == t1 {
        return Ok(Outcome { t, y, steps: 0, interrupted: false });
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut k0 = f(t, &y);
    let mut h = match opts.initial_step {
        Some(h) => h.abs().min(span),
        None => initial_step(&y, &k0, opts, span),
    }
    .min(opts.max_step);
    let mut steps = 0;
    let mut k = [[0.0; N]; 7];
    loop {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { t, max_steps: opts.max_steps });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= 1e-14 * t.abs().max(1e-300) && !last {
            return Err(OdeError::StepUnderflow { t });
        }
        let hs = dir * h;
        k[0] = k0;
        for s in 1..7 {
            let mut ys = y;
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ys[i] += hs * acc;
            }
            k[s] = f(t + C[s] * hs, &ys);
        }
        // the 7th stage sits at the new point (first-same-as-last)
        let mut y_new = y;
        for i in 0..N {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += A[6][j] * k[j][i];
            }
            y_new[i] += hs * acc;
        }
        // one scale for the whole state so a component passing through zero does not stall
        let magnitude = y.iter().chain(y_new.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = opts.atol + opts.rtol * magnitude;
        let mut err = 0.0f64;
        for i in 0..N {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            err = err.max((hs * e).abs() / scale);
        }
        if !err.is_finite() {
            if h < 1e-300 {
                return Err(OdeError::NonFinite { t });
            }
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            steps += 1;
            t = if last { t1 } else { t + hs };
            y = y_new;
            k0 = k[6];
            if y.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite { t });
            }
            if !observer(t, &y) {
                return Ok(Outcome { t, y, steps, interrupted: true });
            }
            if last {
                return Ok(Outcome { t, y, steps, interrupted: false });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * factor).min(opts.max_step);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
}

fn initial_step<const N: usize>(y: &[f64; N], dy: &[f64; N], opts: &OdeOptions, span: f64) -> f64 {
    let magnitude = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = opts.atol + opts.rtol * magnitude;
    let d0 = magnitude / scale;
    let d1 = dy.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    guess.min(span).min(0.01 * span.max(1e-300)).max(1e-12 * span)
}

/// Integrates to t1 discarding intermediate states.
pub fn solve_to<const N: usize, F>(f: F, t0: f64, y0: [f64; N], t1: f64, opts: &OdeOptions) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    Ok(solve(f, t0, y0, t1, opts, |_, _| true)?.y)
}
