//! First two eigenpairs of the self-similar linearized operator by matching a
//! regular inner solution to the light-cone-smooth outer solution at ρ = δ₀.
//!
//! Both branches solve the same radial equation written in t = log ρ:
//!
//! (1−ρ²)u_tt − (2λ+1)ρ²u_t − (V(ρ/ν) + λ(λ+1)ρ²)u = −ρ² s
//!
//! The inner branch integrates the remainder w = φ_inn − ΛQ (source s from ΛQ),
//! which keeps the O(ν²) part that decides the eigenvalue at full relative precision.

use std::f64::consts::LN_2;

use serde::Serialize;
use thiserror::Error;

use crate::ode::{self, OdeError, OdeOptions};
use crate::profiles::{self, ProfileError, RadialField, Variable};
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("invalid spectral context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Special(#[from] SpecfunError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("outer solution vanishes at the matching radius")]
    DegenerateMatching,
    #[error("Newton iteration for the analytic root did not converge (j={0})")]
    NewtonDivergence(usize),
    #[error("secant iteration hit the cap of {cap} steps (j={j}, last defect {defect})")]
    IterationCap { j: usize, cap: usize, defect: f64 },
    #[error("eigenvalue left its window (j={j}, lambda={lambda})")]
    BracketLost { j: usize, lambda: f64 },
    #[error("rho={0} outside the branch domain")]
    OutOfDomain(f64),
}

pub type Result<T> = std::result::Result<T, EigenError>;

/// Scale ν and matching radius δ₀ plus the numerical tolerances of one computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralContext {
    pub nu: f64,
    pub delta0: f64,
    pub ode_tol: f64,
    pub root_tol: f64,
    /// inner Frobenius start y₀
    pub series_start: f64,
    /// outer Taylor start z₁
    pub outer_start: f64,
}

pub const DEFAULT_DELTA0: f64 = 0.05;
pub const DEFAULT_ODE_TOL: f64 = 1e-12;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
pub const DEFAULT_SERIES_START: f64 = 1e-4;
pub const DEFAULT_OUTER_START: f64 = 1e-3;

impl SpectralContext {
    pub fn new(nu: f64) -> Result<Self> {
        Self::with_delta0(nu, DEFAULT_DELTA0)
    }

    pub fn with_delta0(nu: f64, delta0: f64) -> Result<Self> {
        Self {
            nu,
            delta0,
            ode_tol: DEFAULT_ODE_TOL,
            root_tol: DEFAULT_ROOT_TOL,
            series_start: DEFAULT_SERIES_START,
            outer_start: DEFAULT_OUTER_START,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        let bad = |m: String| Err(EigenError::InvalidContext(m));
        if !(self.nu > 0.0 && self.nu <= 1e-2) {
            return bad(format!("nu={} must lie in (0, 1e-2]", self.nu));
        }
        if !(0.02..=0.1).contains(&self.delta0) {
            return bad(format!("delta0={} must lie in [0.02, 0.1]", self.delta0));
        }
        if self.nu > self.delta0 / 3.0 {
            return bad(format!("nu={} exceeds delta0/3", self.nu));
        }
        if !(self.ode_tol > 0.0 && self.ode_tol < 1e-4) || !(self.root_tol > 0.0 && self.root_tol < 1e-2) {
            return bad("tolerances must be small and positive".into());
        }
        if !(self.series_start > 0.0 && self.series_start <= 1e-2) || !(self.outer_start > 0.0 && self.outer_start <= 0.1) {
            return bad("series offsets out of range".into());
        }
        Ok(self)
    }

    pub fn log_nu(&self) -> f64 {
        self.nu.ln().abs()
    }

    fn ode_options(&self) -> OdeOptions {
        OdeOptions::new(self.ode_tol, 1e-300)
    }
}

/// p(ν; λ) = λ(λ−1)(|log ν| − 1 − d₀(λ)/2) + λ − 5/6.
pub fn p_value(nu: f64, lambda: f64) -> Result<f64> {
    let l = nu.ln().abs();
    Ok(lambda * (lambda - 1.0) * (l - 1.0 - 0.5 * specfun::d0(lambda)?) + lambda - 5.0 / 6.0)
}

/// Analytic approximation λ̂_j: the root of p near 1 − j.
pub fn lambda_hat(nu: f64, j: usize) -> Result<f64> {
    let window = 2.0 / nu.ln().abs();
    let seed = 1.0 - j as f64;
    let mut lambda = seed;
    for _ in 0..60 {
        let p = p_value(nu, lambda)?;
        if p.abs() <= 1e-13 {
            if (lambda - seed).abs() > window {
                return Err(EigenError::NewtonDivergence(j));
            }
            return Ok(lambda);
        }
        let h = 1e-6;
        let slope = (p_value(nu, lambda + h)? - p_value(nu, lambda - h)?) / (2.0 * h);
        lambda -= p / slope;
        if !lambda.is_finite() || (lambda - seed).abs() > 0.5 {
            return Err(EigenError::NewtonDivergence(j));
        }
    }
    Err(EigenError::NewtonDivergence(j))
}

/// Two-term expansion of λ̂_j in 1/|log ν|.
pub fn lambda_hat_expansion(nu: f64, j: usize) -> f64 {
    let l = nu.ln().abs();
    match j {
        0 => 1.0 - (1.0 / 6.0) / l + (-1.0 / 9.0 + LN_2 / 6.0) / (l * l),
        _ => -(5.0 / 6.0) / l + (-5.0 / 9.0 + 5.0 * LN_2 / 6.0) / (l * l),
    }
}

/// Right-hand side of the radial equation in t = log ρ.
#[derive(Debug, Clone, Copy)]
struct RadialEquation {
    nu: f64,
    lambda: f64,
    /// include the ΛQ source (inner remainder) or not (outer)
    forced: bool,
}

impl RadialEquation {
    fn rhs(&self, t: f64, u: &[f64; 2]) -> [f64; 2] {
        let rho = t.exp();
        let r2 = rho * rho;
        let y = rho / self.nu;
        let l = self.lambda;
        let mut acc = (2.0 * l + 1.0) * r2 * u[1] + (profiles::potential(y) + l * (l + 1.0) * r2) * u[0];
        if self.forced {
            acc += r2 * lambda_q_source(y, l);
        }
        [u[1], acc / (1.0 - r2)]
    }
}

/// (Λ₀+λ)(Λ+λ)ΛQ in the inner variable.
fn lambda_q_source(y: f64, lambda: f64) -> f64 {
    let s = 1.0 + y * y;
    let a = 2.0 * y / s;
    let a_t = 2.0 * y * (1.0 - y * y) / (s * s);
    let a_tt = 2.0 * y * (1.0 - 6.0 * y * y + y.powi(4)) / (s * s * s);
    a_tt + (2.0 * lambda + 1.0) * a_t + lambda * (lambda + 1.0) * a
}

/// Accepted ODE states of one branch, kept sorted by t, used to restart
/// short integrations for evaluation anywhere on the branch.
#[derive(Debug, Clone)]
struct Checkpoints {
    ts: Vec<f64>,
    states: Vec<[f64; 2]>,
}

impl Checkpoints {
    fn from_run(mut ts: Vec<f64>, mut states: Vec<[f64; 2]>) -> Self {
        if ts.len() > 1 && ts[0] > ts[ts.len() - 1] {
            ts.reverse();
            states.reverse();
        }
        Self { ts, states }
    }

    fn range(&self) -> (f64, f64) {
        (self.ts[0], self.ts[self.ts.len() - 1])
    }

    fn state_at(&self, eq: &RadialEquation, opts: &OdeOptions, t: f64) -> Result<[f64; 2]> {
        let (lo, hi) = self.range();
        let slack = 1e-12 * (1.0 + t.abs());
        if t < lo - slack || t > hi + slack {
            return Err(EigenError::OutOfDomain(t.exp()));
        }
        let k = self.ts.partition_point(|&x| x <= t);
        let idx = if k == 0 {
            0
        } else if k == self.ts.len() || (t - self.ts[k - 1]) <= (self.ts[k] - t) {
            k - 1
        } else {
            k
        };
        let t0 = self.ts[idx];
        if t0 == t {
            return Ok(self.states[idx]);
        }
        let opts = opts.with_initial_step((t - t0).abs());
        Ok(ode::solve_to(|s, u| eq.rhs(s, u), t0, self.states[idx], t, &opts)?)
    }
}

const INNER_SERIES_ORDER: usize = 13;

/// Regular inner solution φ_inn(y) = ΛQ(y) + w(y), normalized by φ_inn'(0) = 2.
#[derive(Debug, Clone)]
pub struct InnerBranch {
    eq: RadialEquation,
    opts: OdeOptions,
    /// odd-power coefficients of w: w ≈ Σ coeffs[k] y^(2k+1)
    coeffs: [f64; INNER_SERIES_ORDER],
    y_start: f64,
    checkpoints: Checkpoints,
}

/// Frobenius coefficients of the remainder w about y = 0.
fn inner_series(nu: f64, lambda: f64) -> [f64; INNER_SERIES_ORDER] {
    // ΛQ = Σ q_k y^k with q_{2m+1} = 2(−1)^m; 8/(1+y²)² = Σ e_m y^{2m}
    let q = |k: usize| if (k / 2).is_multiple_of(2) { 2.0 } else { -2.0 };
    let e = |m: usize| 8.0 * (m as f64 + 1.0) * if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let nu2 = nu * nu;
    let mut w = [0.0; INNER_SERIES_ORDER];
    for i in 0..INNER_SERIES_ORDER - 1 {
        let n = 2 * i + 1;
        let nf = n as f64;
        let mut rhs = nu2 * (nf + lambda) * (nf + lambda + 1.0) * (q(n) + w[i]);
        for m in 0..=i {
            rhs -= e(m) * w[i - m];
        }
        let next = nf + 2.0;
        w[i + 1] = rhs / (next * next - 1.0);
    }
    w
}

impl InnerBranch {
    /// Integrates from the series start up to the inner variable y_end.
    pub fn solve(ctx: &SpectralContext, lambda: f64, y_end: f64) -> Result<Self> {
        let eq = RadialEquation { nu: ctx.nu, lambda, forced: true };
        let coeffs = inner_series(ctx.nu, lambda);
        let y0 = ctx.series_start;
        let (w0, wt0) = series_eval(&coeffs, y0);
        let opts = ctx.ode_options();
        let (mut ts, mut states) = (Vec::new(), Vec::new());
        let t0 = (ctx.nu * y0).ln();
        let t1 = (ctx.nu * y_end).ln();
        ode::solve(|t, u| eq.rhs(t, u), t0, [w0, wt0], t1, &opts, |t, u| {
            ts.push(t);
            states.push(*u);
            true
        })?;
        Ok(Self { eq, opts, coeffs, y_start: y0, checkpoints: Checkpoints::from_run(ts, states) })
    }

    /// Remainder (w, y w_y) at inner variable y.
    pub fn remainder(&self, y: f64) -> Result<(f64, f64)> {
        if y <= self.y_start {
            return Ok(series_eval(&self.coeffs, y));
        }
        let s = self.checkpoints.state_at(&self.eq, &self.opts, (self.eq.nu * y).ln())?;
        Ok((s[0], s[1]))
    }

    /// φ_inn and its y-derivative.
    pub fn eval_y(&self, y: f64) -> Result<(f64, f64)> {
        let (w, wt) = self.remainder(y)?;
        let [a, da, _] = profiles::lambda_q_jet(y);
        Ok((a + w, da + wt / y))
    }

    /// φ(ρ) = (1/ν)φ_inn(ρ/ν) and its ρ-derivative.
    pub fn eval_rho(&self, rho: f64) -> Result<(f64, f64)> {
        let nu = self.eq.nu;
        let (v, dv) = self.eval_y(rho / nu)?;
        Ok((v / nu, dv / (nu * nu)))
    }

    pub fn y_max(&self) -> f64 {
        self.checkpoints.range().1.exp() / self.eq.nu
    }
}

/// (Σ c_k y^{2k+1}, Σ (2k+1) c_k y^{2k+1}).
fn series_eval(coeffs: &[f64], y: f64) -> (f64, f64) {
    let y2 = y * y;
    let mut p = y;
    let (mut v, mut vt) = (0.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        v += c * p;
        vt += (2 * k + 1) as f64 * c * p;
        p *= y2;
    }
    (v, vt)
}

const OUTER_SERIES_TERMS: usize = 60;

/// Outer solution φ_out(ρ) = f(1−ρ²)/ρ with f analytic at the light cone, f(0) = 1.
#[derive(Debug, Clone)]
pub struct OuterBranch {
    eq: RadialEquation,
    opts: OdeOptions,
    taylor: Vec<f64>,
    rho_start: f64,
    checkpoints: Checkpoints,
}

/// Taylor coefficients of f in z from the three-term-plus-convolution recurrence.
fn outer_taylor(nu: f64, lambda: f64) -> Vec<f64> {
    let (a, b, c) = (lambda / 2.0, (lambda - 1.0) / 2.0, lambda + 0.5);
    let nu2 = nu * nu;
    let base = 1.0 + nu2;
    // 2ν²/(1+ν²−z)² = Σ g_m z^m
    let g: Vec<f64> = (0..OUTER_SERIES_TERMS)
        .map(|m| 2.0 * nu2 * (m as f64 + 1.0) / base.powi(m as i32 + 2))
        .collect();
    let mut f = vec![0.0; OUTER_SERIES_TERMS];
    f[0] = 1.0;
    for n in 0..OUTER_SERIES_TERMS - 1 {
        let nf = n as f64;
        let mut rhs = (nf + a) * (nf + b) * f[n];
        for m in 0..=n {
            rhs -= g[m] * f[n - m];
        }
        f[n + 1] = rhs / ((nf + 1.0) * (nf + c));
    }
    f
}

fn taylor_eval(coeffs: &[f64], z: f64) -> (f64, f64) {
    let (mut v, mut dv) = (0.0, 0.0);
    for (n, c) in coeffs.iter().enumerate().rev() {
        v = v * z + c;
        if n > 0 {
            dv = dv * z + n as f64 * c;
        }
    }
    (v, dv)
}

impl OuterBranch {
    /// Integrates inward from z₁ down to ρ = rho_end.
    pub fn solve(ctx: &SpectralContext, lambda: f64, rho_end: f64) -> Result<Self> {
        let eq = RadialEquation { nu: ctx.nu, lambda, forced: false };
        let taylor = outer_taylor(ctx.nu, lambda);
        let z1 = ctx.outer_start;
        let rho1 = (1.0 - z1).sqrt();
        let (f, df) = taylor_eval(&taylor, z1);
        let state = [f / rho1, -2.0 * rho1 * df - f / rho1];
        let opts = ctx.ode_options();
        let (mut ts, mut states) = (Vec::new(), Vec::new());
        ode::solve(|t, u| eq.rhs(t, u), rho1.ln(), state, rho_end.ln(), &opts, |t, u| {
            ts.push(t);
            states.push(*u);
            true
        })?;
        Ok(Self { eq, opts, taylor, rho_start: rho1, checkpoints: Checkpoints::from_run(ts, states) })
    }

    /// φ_out and ρ∂_ρφ_out; `gap` is 1 − ρ when known more precisely than from ρ.
    pub fn eval_log(&self, rho: f64, gap: Option<f64>) -> Result<(f64, f64)> {
        if rho >= self.rho_start {
            let d = gap.unwrap_or(1.0 - rho);
            let z = d * (1.0 + rho);
            let (f, df) = taylor_eval(&self.taylor, z);
            return Ok((f / rho, -2.0 * rho * df - f / rho));
        }
        let s = self.checkpoints.state_at(&self.eq, &self.opts, rho.ln())?;
        Ok((s[0], s[1]))
    }

    /// φ_out and its ρ-derivative.
    pub fn eval_rho(&self, rho: f64) -> Result<(f64, f64)> {
        let (v, vt) = self.eval_log(rho, None)?;
        Ok((v, vt / rho))
    }
}

/// Φ(λ) = φ_inn'(δ₀) − (φ_out'/φ_out)(δ₀)·φ_inn(δ₀) together with c = φ_inn(δ₀)/φ_out(δ₀).
pub fn matching_defect(ctx: &SpectralContext, lambda: f64) -> Result<f64> {
    Ok(matching(ctx, lambda)?.0)
}

fn matching(ctx: &SpectralContext, lambda: f64) -> Result<(f64, f64)> {
    let d = ctx.delta0;
    let inner = InnerBranch::solve(ctx, lambda, d / ctx.nu)?;
    let outer = OuterBranch::solve(ctx, lambda, d)?;
    let (wi, wti) = inner.remainder(d / ctx.nu)?;
    let [a, _, _] = profiles::lambda_q_jet(d / ctx.nu);
    let a_t = {
        let y = d / ctx.nu;
        let s = 1.0 + y * y;
        2.0 * y * (1.0 - y * y) / (s * s)
    };
    // both in the log variable and in units of 1/ν
    let (vi, vti) = (a + wi, a_t + wti);
    let (vo, vto) = outer.eval_log(d, None)?;
    if vo == 0.0 || !vo.is_finite() {
        return Err(EigenError::DegenerateMatching);
    }
    let defect = (vti - vto / vo * vi) / (ctx.nu * d * d);
    Ok((defect, vi / ctx.nu / vo))
}

/// An eigenvalue with its matching diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenPair {
    pub j: usize,
    pub lambda: f64,
    pub lambda_hat: f64,
    pub c_match: f64,
    pub defect: f64,
    pub iterations: usize,
}

pub const SECANT_CAP: usize = 40;

/// Secant iteration on the matching defect seeded at λ̂_j.
pub fn find_eigenpair(ctx: &SpectralContext, j: usize) -> Result<EigenPair> {
    let lambda_hat = lambda_hat(ctx.nu, j)?;
    let l = ctx.log_nu();
    let window = 5.0 / l;
    let center = 1.0 - j as f64;
    let target = ctx.root_tol * l;
    let mut x0 = lambda_hat;
    let mut f0 = matching_defect(ctx, x0)?;
    let step = 1e-4 * lambda_hat.abs().max(1e-2);
    let mut x1 = if j == 0 { lambda_hat - step } else { lambda_hat + step };
    let mut f1 = matching_defect(ctx, x1)?;
    for it in 1..=SECANT_CAP {
        if f1.abs() <= target {
            let (defect, c_match) = matching(ctx, x1)?;
            return Ok(EigenPair { j, lambda: x1, lambda_hat, c_match, defect, iterations: it });
        }
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !x2.is_finite() || (x2 - center).abs() > window {
            return Err(EigenError::BracketLost { j, lambda: x2 });
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = matching_defect(ctx, x1)?;
    }
    Err(EigenError::IterationCap { j, cap: SECANT_CAP, defect: f1 })
}

/// The glued eigenfunction φ_j on (0, 1].
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub ctx: SpectralContext,
    pub pair: EigenPair,
    pub inner: InnerBranch,
    pub outer: OuterBranch,
}

impl Eigenfunction {
    pub fn build(ctx: &SpectralContext, pair: EigenPair) -> Result<Self> {
        let inner = InnerBranch::solve(ctx, pair.lambda, 2.0 * ctx.delta0 / ctx.nu)?;
        let outer = OuterBranch::solve(ctx, pair.lambda, 0.5 * ctx.delta0)?;
        Ok(Self { ctx: *ctx, pair, inner, outer })
    }

    pub fn lambda(&self) -> f64 {
        self.pair.lambda
    }

    /// φ_j and ρ∂_ρφ_j; `gap` = 1 − ρ when available to full precision.
    pub fn eval_log(&self, rho: f64, gap: Option<f64>) -> Result<(f64, f64)> {
        if rho < self.ctx.delta0 {
            let (v, dv) = self.inner.eval_rho(rho)?;
            Ok((v, rho * dv))
        } else {
            let (v, vt) = self.outer.eval_log(rho, gap)?;
            Ok((self.pair.c_match * v, self.pair.c_match * vt))
        }
    }

    pub fn try_eval(&self, rho: f64) -> Result<(f64, f64)> {
        let (v, vt) = self.eval_log(rho, None)?;
        Ok((v, vt / rho))
    }

    /// Value and derivative jumps across ρ = δ₀, relative to the value.
    pub fn glue_jumps(&self) -> Result<(f64, f64)> {
        let d = self.ctx.delta0;
        let (vi, di) = self.inner.eval_rho(d)?;
        let (vo, dout) = self.outer.eval_rho(d)?;
        let (vo, dout) = (self.pair.c_match * vo, self.pair.c_match * dout);
        Ok(((vi - vo).abs() / vi.abs(), (di - dout).abs() / (vi.abs() / d)))
    }
}

impl RadialField for Eigenfunction {
    fn variable(&self) -> Variable {
        Variable::SelfSimilarRho
    }

    fn eval(&self, rho: f64) -> (f64, f64) {
        self.try_eval(rho).unwrap_or((f64::NAN, f64::NAN))
    }
}

/// Solve for the eigenpair and assemble its eigenfunction.
pub fn eigenfunction(ctx: &SpectralContext, j: usize) -> Result<Eigenfunction> {
    let pair = find_eigenpair(ctx, j)?;
    Eigenfunction::build(ctx, pair)
}

/// Smooth cutoff equal to 1 on [0,1] and 0 on [2,∞).
pub fn cutoff(r: f64) -> f64 {
    let bump = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (bump(2.0 - r), bump(r - 1.0));
    a / (a + b)
}

/// Sup-norm summary of the deviation of φ_j from its sharp ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnsatzResidual {
    /// sup over ρ ∈ [ν, 1] of |φ_j − ansatz| / (ν²ρ⟨log(ρ/ν)⟩²)
    pub sup_ratio: f64,
    pub argmax_rho: f64,
    /// raw residual at ρ = δ₀
    pub at_delta0: f64,
}

pub const ANSATZ_GRID: usize = 600;

/// Residual of φ_j − [(1/ν)ΛQ + νT₁ + (2λ−1)νS₁ + λ(λ−1)νU₁](ρ/ν) − χ_{≳ν}λ(λ−1)U∞(λ;ρ).
pub fn ansatz_residual(ef: &Eigenfunction) -> Result<AnsatzResidual> {
    let nu = ef.ctx.nu;
    let lambda = ef.lambda();
    let mix = lambda * (lambda - 1.0);
    let raw = |rho: f64| -> Result<f64> {
        let y = rho / nu;
        let c = profiles::inner_correctors(y)?;
        let corr = c.t1 + (2.0 * lambda - 1.0) * c.s1 + mix * c.u1;
        let light_cone = (1.0 - cutoff(y)) * mix * profiles::u_infty(lambda, rho.min(1.0 - 1e-15))?;
        if rho < ef.ctx.delta0 {
            let (w, _) = ef.inner.remainder(y)?;
            Ok((w - nu * nu * corr) / nu - light_cone)
        } else {
            let (v, _) = ef.try_eval(rho)?;
            Ok(v - profiles::lambda_q(y) / nu - nu * corr - light_cone)
        }
    };
    let mut best = AnsatzResidual { sup_ratio: 0.0, argmax_rho: nu, at_delta0: raw(ef.ctx.delta0)? };
    let span = (1.0 / nu).ln();
    for k in 0..ANSATZ_GRID {
        let rho = nu * (span * k as f64 / (ANSATZ_GRID - 1) as f64).exp();
        let rho = rho.min(1.0);
        let bracket = 1.0 + (rho / nu).ln().powi(2);
        let ratio = raw(rho)?.abs() / (nu * nu * rho * bracket);
        if ratio > best.sup_ratio {
            best.sup_ratio = ratio;
            best.argmax_rho = rho;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_anchors() {
        assert!((p_value(1e-3, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((p_value(1e-3, 0.0).unwrap() + 5.0 / 6.0).abs() < 1e-15);
        let lh = lambda_hat(1e-3, 0).unwrap();
        assert!(p_value(1e-3, lh).unwrap().abs() <= 1e-13);
    }

    #[test]
    fn lambda_hat_near_expected() {
        let l0 = lambda_hat(1e-3, 0).unwrap();
        assert!((l0 - 0.9760).abs() < 1e-3, "{l0}");
        let l1 = lambda_hat(1e-3, 1).unwrap();
        assert!(l1 < 0.0 && l1 > -5.0 / 1e-3f64.ln().abs());
    }

    #[test]
    fn context_validation() {
        assert!(SpectralContext::new(1e-3).is_ok());
        assert!(SpectralContext::new(0.05).is_err());
        assert!(SpectralContext::with_delta0(1e-3, 0.2).is_err());
        assert!(SpectralContext::with_delta0(1e-2, 0.02).is_err());
    }

    #[test]
    fn inner_series_solves_equation() {
        let (nu, lambda): (f64, f64) = (0.3, 0.7);
        let c = inner_series(nu, lambda);
        let eq = RadialEquation { nu, lambda, forced: true };
        for y in [0.01, 0.05] {
            let (w, wt) = series_eval(&c, y);
            let h: f64 = 1e-4;
            let (wp, wtp) = series_eval(&c, y * h.exp());
            let (wm, wtm) = series_eval(&c, y * (-h).exp());
            let wtt = (wtp - wtm) / (2.0 * h);
            assert!(((wp - wm) / (2.0 * h) - wt).abs() < 1e-7 * wt.abs().max(1e-12), "{} {}", (wp - wm) / (2.0 * h), wt);
            let r = eq.rhs((nu * y).ln(), &[w, wt]);
            assert!((r[1] - wtt).abs() <= 1e-6 * wtt.abs().max(1e-10), "y={y} {} {}", r[1], wtt);
        }
    }

    #[test]
    fn outer_taylor_solves_equation() {
        let (nu, lambda) = (0.3, 0.9);
        let c = outer_taylor(nu, lambda);
        let eq = RadialEquation { nu, lambda, forced: false };
        let val = |rho: f64| {
            let (f, df) = taylor_eval(&c, 1.0 - rho * rho);
            [f / rho, -2.0 * rho * df - f / rho]
        };
        let rho: f64 = 0.8;
        let h: f64 = 1e-4;
        let (p, m) = (val(rho * h.exp()), val(rho * (-h).exp()));
        let utt = (p[1] - m[1]) / (2.0 * h);
        let r = eq.rhs(rho.ln(), &val(rho));
        assert!((r[1] - utt).abs() < 1e-6 * utt.abs(), "{} {}", r[1], utt);
    }

    #[test]
    fn outer_reduces_to_hypergeometric() {
        let ctx = SpectralContext::new(1e-6).unwrap();
        let outer = OuterBranch::solve(&ctx, 0.97, 0.4).unwrap();
        for rho in [0.5, 0.7, 0.9, 0.99] {
            let (v, _) = outer.eval_rho(rho).unwrap();
            let h = specfun::h1(0.97, 1.0 - rho * rho).unwrap() / rho;
            assert!((v - h).abs() <= 1e-9, "rho={rho} {v} {h}");
        }
        let flat = OuterBranch::solve(&ctx, 1.0, 0.02).unwrap();
        for rho in [0.1, 0.3, 0.6, 1.0] {
            let v = flat.eval_rho(rho).unwrap().0;
            assert!((v - 1.0 / rho).abs() <= 1e-9 / rho, "rho={rho} {}", v * rho - 1.0);
        }
    }

    #[test]
    fn inner_reduces_to_soliton() {
        let ctx = SpectralContext::new(1e-6).unwrap();
        let inner = InnerBranch::solve(&ctx, 0.9, 10.0).unwrap();
        for y in [1e-5, 1e-3, 0.1, 0.5, 1.0] {
            let (v, _) = inner.eval_y(y).unwrap();
            assert!((v - profiles::lambda_q(y)).abs() <= 1e-9);
        }
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(2.5), 0.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expansion_close_to_root() {
        let nu: f64 = 1e-4;
        let l = nu.ln().abs();
        for j in 0..2 {
            let d = lambda_hat(nu, j).unwrap() - lambda_hat_expansion(nu, j);
            assert!(d.abs() < 1.0 / (l * l), "j={j} d={d}");
        }
    }
}
