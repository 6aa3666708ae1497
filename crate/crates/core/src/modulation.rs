//! Reduced modulation dynamics for the scale ν and the rate b in self-similar time τ,
//! with the ε-dependent couplings dropped.
//!
//! β = b/ν − 1 is unstable (β_τ ≈ β); blow-up solutions sit on the stable manifold
//! β ≈ (1/6)/|log ν|, which is found by bisection on β at the start of each window.

use std::f64::consts::{E, LN_2};

use serde::Serialize;
use thiserror::Error;

use crate::ode::{self, OdeError, OdeOptions};

pub const NU_1: f64 = 1.0 / 3.0;
pub const B_MINUS_1: f64 = 0.5;
pub const B_1: f64 = 0.5;
pub const B_2: f64 = 5.0 / 12.0 - LN_2 / 2.0;
/// Second-order coefficient of the closed b equation.
pub const SHARP_B_2: f64 = 0.5 - LN_2 / 2.0;

/// 2/e, the limit of b·e^{√τ}.
pub const UNIVERSAL_CONSTANT: f64 = 2.0 / E;
/// Constant 0.146 whose square root is the competing numerical rate constant.
pub const REFERENCE_SQUARE: f64 = 0.146;

pub fn reference_constant() -> f64 {
    REFERENCE_SQUARE.sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulationError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid modulation input: {0}")]
    Invalid(String),
    #[error("no sign change for the stable manifold at tau={tau} (both ends {side:?})")]
    NoBracket { tau: f64, side: Escape },
    #[error("T - t = {0} outside (0, 1/e)")]
    Domain(f64),
}

pub type Result<T> = std::result::Result<T, ModulationError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulationState {
    pub tau: f64,
    pub nu: f64,
    pub b: f64,
}

impl ModulationState {
    pub fn new(tau: f64, nu: f64, b: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0 && b > 0.0 && b < 1.0) {
            return Err(ModulationError::Invalid(format!("need 0 < nu, b < 1, got nu={nu}, b={b}")));
        }
        Ok(Self { tau, nu, b })
    }

    pub fn beta(&self) -> f64 {
        self.b / self.nu - 1.0
    }

    pub fn mu(&self) -> f64 {
        -self.b.ln()
    }
}

/// (ν_τ, b_τ) of the reduced system.
pub fn system_rhs(s: &ModulationState) -> (f64, f64) {
    let l = s.nu.ln().abs();
    let beta = s.beta();
    let nu_tau = -s.nu * (beta + NU_1 / l);
    let b_tau = -s.b * (beta * B_MINUS_1 / l + B_1 / l + B_2 / (l * l));
    (nu_tau, b_tau)
}

/// β_τ written through |log ν| and β only.
fn beta_rate(l: f64, beta: f64) -> f64 {
    (1.0 + beta) * (beta * (1.0 - B_MINUS_1 / l) + NU_1 / l - B_1 / l - B_2 / (l * l))
}

/// Zero of β_τ at fixed |log ν|, close to (1/6)/|log ν|.
pub fn quasi_static_beta(l: f64) -> f64 {
    ((B_1 - NU_1) / l + B_2 / (l * l)) / (1.0 - B_MINUS_1 / l)
}

/// Which way a trial β leaves the neighbourhood of the stable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Escape {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// τ-length of the bisection window
    pub window: f64,
    /// bound on |β| defining escape
    pub beta_bound: f64,
    /// bracket width at which bisection stops
    pub width: f64,
    pub samples_per_decade: usize,
    pub ode_tol: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { window: 30.0, beta_bound: 0.5, width: 1e-13, samples_per_decade: 40, ode_tol: 1e-12 }
    }
}

/// Default ν at τ₀, from ν ≈ (2/e)e^{−√τ}.
pub fn default_nu0(tau0: f64) -> f64 {
    UNIVERSAL_CONSTANT * (-tau0.sqrt()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub tau: f64,
    pub nu: f64,
    pub b: f64,
    pub beta: f64,
    /// β·|log ν|, tends to 1/6 on the stable manifold
    pub beta_log_nu: f64,
}

impl TrajectorySample {
    fn new(tau: f64, l: f64, beta: f64) -> Self {
        let nu = (-l).exp();
        Self { tau, nu, b: nu * (1.0 + beta), beta, beta_log_nu: beta * l }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// β at τ₀ from bisection over the first window
    pub beta0: f64,
    /// final bisection bracket width
    pub bracket_width: f64,
    /// β at τ₀ read off the stable-manifold curve
    pub manifold_beta0: f64,
}

/// Right-hand side of the full system in the state (log|log ν|, β).
fn reduced_rhs(y: &[f64; 2]) -> [f64; 2] {
    let l = y[0].exp();
    let beta = y[1];
    [(beta + NU_1 / l) / l, beta_rate(l, beta)]
}

/// Forward run of a trial β over one window; reports the escape side.
fn classify(l0: f64, tau: f64, beta: f64, horizon: f64, bound: f64, opts: &OdeOptions) -> Result<Escape> {
    let mut escaped = None;
    let out = ode::solve(
        |_, y| reduced_rhs(y),
        tau,
        [l0.ln(), beta],
        horizon,
        opts,
        |_, y| {
            if y[1].abs() > bound {
                escaped = Some(if y[1] > 0.0 { Escape::High } else { Escape::Low });
                false
            } else {
                true
            }
        },
    )?;
    if let Some(side) = escaped {
        return Ok(side);
    }
    // the quasi-static value is off the true manifold by O(|log ν|⁻³), which the
    // window damps by e^{−window} when mapped back to the start
    Ok(if out.y[1] > quasi_static_beta(out.y[0].exp()) { Escape::High } else { Escape::Low })
}

/// Bisection on β(τ₀) ∈ [−bound, bound]; returns the midpoint and final width.
pub fn bisect_beta(nu0: f64, tau0: f64, o: &ShootingOptions) -> Result<(f64, f64)> {
    let opts = OdeOptions::new(o.ode_tol, 1e-15);
    let l0 = nu0.ln().abs();
    let horizon = tau0 + o.window;
    let (mut lo, mut hi) = (-o.beta_bound, o.beta_bound);
    let lo_side = classify(l0, tau0, lo, horizon, o.beta_bound, &opts)?;
    let hi_side = classify(l0, tau0, hi, horizon, o.beta_bound, &opts)?;
    if lo_side == hi_side {
        return Err(ModulationError::NoBracket { tau: tau0, side: lo_side });
    }
    if lo_side == Escape::High {
        std::mem::swap(&mut lo, &mut hi);
    }
    while (hi - lo).abs() > o.width {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match classify(l0, tau0, mid, horizon, o.beta_bound, &opts)? {
            Escape::Low => lo = mid,
            Escape::High => hi = mid,
        }
    }
    Ok((0.5 * (lo + hi), (hi - lo).abs()))
}

/// Free forward evolution of the full system from (ν₀, β₀), stopped once |β| > bound.
pub fn free_trajectory(nu0: f64, beta0: f64, tau0: f64, tau_end: f64, bound: f64, ode_tol: f64) -> Result<Vec<TrajectorySample>> {
    let opts = OdeOptions::new(ode_tol, 1e-15);
    let mut out = Vec::new();
    ode::solve(|_, y| reduced_rhs(y), tau0, [nu0.ln().abs().ln(), beta0], tau_end, &opts, |t, y| {
        out.push(TrajectorySample::new(t, y[0].exp(), y[1]));
        y[1].abs() <= bound
    })?;
    Ok(out)
}

/// The stable manifold as a curve β = β_m(|log ν|).
///
/// The system is autonomous, so the manifold is an invariant curve. Integrated towards
/// smaller |log ν| (backwards in τ) it attracts, so starting from the quasi-static value
/// far out gives the curve to round-off.
#[derive(Debug, Clone)]
pub struct StableManifold {
    /// (|log ν|, β, dβ/d|log ν|) in increasing |log ν|
    nodes: Vec<[f64; 3]>,
}

fn manifold_slope(l: f64, beta: f64) -> f64 {
    beta_rate(l, beta) / (beta + NU_1 / l)
}

impl StableManifold {
    pub fn build(l_min: f64, l_max: f64, ode_tol: f64) -> Result<Self> {
        if !(l_min > 2.0 && l_max > l_min) {
            return Err(ModulationError::Invalid(format!("manifold range [{l_min}, {l_max}]")));
        }
        // |log ν|² grows like τ; start 100 τ-units beyond l_max
        let l_far = (l_max * l_max + 100.0).sqrt() + 1.0;
        let opts = OdeOptions::new(ode_tol, 1e-15);
        let mut nodes = Vec::new();
        ode::solve(
            |l, y: &[f64; 1]| [manifold_slope(l, y[0])],
            l_far,
            [quasi_static_beta(l_far)],
            0.999 * l_min,
            &opts,
            |l, y| {
                nodes.push([l, y[0], manifold_slope(l, y[0])]);
                true
            },
        )?;
        nodes.reverse();
        Ok(Self { nodes })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0][0], self.nodes[self.nodes.len() - 1][0])
    }

    /// β_m(l) by cubic Hermite interpolation.
    pub fn beta(&self, l: f64) -> f64 {
        let k = self.nodes.partition_point(|n| n[0] <= l).clamp(1, self.nodes.len() - 1);
        let ([x0, y0, d0], [x1, y1, d1]) = (self.nodes[k - 1], self.nodes[k]);
        let h = x1 - x0;
        let t = (l - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }
}

fn sample_times(tau0: f64, tau_end: f64, per_decade: usize) -> Vec<f64> {
    let decades = (tau_end / tau0).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=n).map(|k| if k == n { tau_end } else { tau0 * 10f64.powf(decades * k as f64 / n as f64) }).collect()
}

/// Finds the trajectory from ν(τ₀) = ν₀ that stays on the stable manifold up to τ_end.
///
/// β(τ₀) is bisected over one window. A forward run cannot follow the manifold for
/// long, since any error grows like e^τ, so the trajectory is continued along the
/// invariant curve instead: |log ν|_τ = β_m(|log ν|) + ν₁/|log ν|.
pub fn shoot_stable_manifold(nu0: f64, tau0: f64, tau_end: f64, o: &ShootingOptions) -> Result<Trajectory> {
    if tau0 < 25.0 || tau_end <= tau0 || tau_end > 1e6 {
        return Err(ModulationError::Invalid(format!("need 25 <= tau0 < tau_end <= 1e6, got [{tau0}, {tau_end}]")));
    }
    if !(nu0 > 0.0 && nu0 < 0.1) {
        return Err(ModulationError::Invalid(format!("nu0={nu0} out of range")));
    }
    let (beta0, bracket_width) = bisect_beta(nu0, tau0, o)?;
    let l0 = nu0.ln().abs();
    // |log ν|_τ ≤ 1/|log ν| + O(|log ν|⁻²), so |log ν|² grows by at most ~2.1 per unit τ
    let l_max = (l0 * l0 + 2.1 * (tau_end - tau0)).sqrt() + 1.0;
    let manifold = StableManifold::build(l0, l_max, o.ode_tol)?;
    let opts = OdeOptions::new(o.ode_tol, 1e-15);
    let rhs = |_: f64, y: &[f64; 1]| [manifold.beta(y[0]) + NU_1 / y[0]];
    let mut l = l0;
    let mut t = tau0;
    let mut samples = Vec::new();
    for ts in sample_times(tau0, tau_end, o.samples_per_decade) {
        l = ode::solve_to(rhs, t, [l], ts, &opts)?[0];
        t = ts;
        samples.push(TrajectorySample::new(ts, l, manifold.beta(l)));
    }
    Ok(Trajectory { samples, beta0, bracket_width, manifold_beta0: manifold.beta(l0) })
}

/// One point of the closed b evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub tau: f64,
    /// −log b (b itself underflows for τ ≳ 5·10⁵)
    pub mu: f64,
    pub b: f64,
    /// present when the sample comes from the full (ν, b) system
    pub nu: Option<f64>,
    /// b·e^{√τ}
    pub c_est: f64,
    /// μ² − τ − 2(1 − log 2)√τ
    pub mu_sq_diagnostic: f64,
}

impl RateSample {
    pub fn from_mu(tau: f64, mu: f64, nu: Option<f64>) -> Self {
        let root = tau.sqrt();
        Self {
            tau,
            mu,
            b: (-mu).exp(),
            nu,
            c_est: (root - mu).exp(),
            mu_sq_diagnostic: mu * mu - tau - 2.0 * (1.0 - LN_2) * root,
        }
    }
}

/// μ_τ for μ = −log b under the closed b equation.
pub fn sharp_mu_rate(mu: f64) -> f64 {
    0.5 / mu + SHARP_B_2 / (mu * mu)
}

/// Integrates b_τ/b = −(1/2)/|log b| − (1/2 − log2/2)/|log b|² in s = √τ.
pub fn sharp_b_integrate(b0: f64, tau0: f64, tau_end: f64, samples_per_decade: usize, ode_tol: f64) -> Result<Vec<RateSample>> {
    if !(tau_end > tau0) {
        return Err(ModulationError::Invalid(format!("need tau0 < tau_end, got [{tau0}, {tau_end}]")));
    }
    sharp_b_at(b0, tau0, &sample_times(tau0, tau_end, samples_per_decade), ode_tol)
}

/// The closed b evolution from b(τ₀) = b₀ evaluated at increasing times ≥ τ₀.
pub fn sharp_b_at(b0: f64, tau0: f64, times: &[f64], ode_tol: f64) -> Result<Vec<RateSample>> {
    let mu0 = -b0.ln();
    if !(mu0 >= 5.0) || !(tau0 > 0.0) {
        return Err(ModulationError::Invalid(format!("need -log b0 >= 5 and tau0 > 0, got b0={b0}, tau0={tau0}")));
    }
    if times.first().is_some_and(|&t| t < tau0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(ModulationError::Invalid("sample times must increase from tau0".into()));
    }
    let opts = OdeOptions::new(ode_tol, 1e-15);
    let rhs = |s: f64, y: &[f64; 1]| [2.0 * s * sharp_mu_rate(y[0])];
    let mut mu = mu0;
    let mut s = tau0.sqrt();
    let mut out = Vec::with_capacity(times.len());
    for &tau in times {
        let target = tau.sqrt();
        mu = ode::solve_to(rhs, s, [mu], target, &opts)?[0];
        s = target;
        out.push(RateSample::from_mu(tau, mu, None));
    }
    Ok(out)
}

/// λ(t) = (2/e)(T−t)e^{−√|log(T−t)|}.
pub fn predicted_rate(t: f64, blowup_time: f64) -> Result<f64> {
    let gap = blowup_time - t;
    if !(gap > 0.0 && gap < 1.0 / E) {
        return Err(ModulationError::Domain(gap));
    }
    Ok(UNIVERSAL_CONSTANT * gap * (-gap.ln().abs().sqrt()).exp())
}

/// Rate constant found here against the competing numerical value √0.146.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantComparison {
    pub c_est: f64,
    pub universal: f64,
    pub reference: f64,
    /// universal / reference
    pub ratio: f64,
}

impl ConstantComparison {
    pub fn new(c_est: f64) -> Self {
        let reference = reference_constant();
        Self { c_est, universal: UNIVERSAL_CONSTANT, reference, ratio: UNIVERSAL_CONSTANT / reference }
    }

    pub fn summary(&self) -> String {
        format!(
            "c_est={:.10} universal 2/e={:.4} reference sqrt(0.146)={:.3} ratio={:.4}",
            self.c_est, self.universal, self.reference, self.ratio
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationConfig {
    pub tau0: f64,
    pub tau_end: f64,
    pub nu0: f64,
    /// end of the closed b integration
    pub sharp_tau_end: f64,
    pub shooting: ShootingOptions,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self { tau0: 25.0, tau_end: 1e5, nu0: default_nu0(25.0), sharp_tau_end: 1e8, shooting: ShootingOptions::default() }
    }
}

/// Shooting run, matched closed-b run and the constant comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulationReport {
    pub trajectory: Trajectory,
    pub rates: Vec<RateSample>,
    pub comparison: ConstantComparison,
}

pub fn run(cfg: &ModulationConfig) -> Result<ModulationReport> {
    let trajectory = shoot_stable_manifold(cfg.nu0, cfg.tau0, cfg.tau_end, &cfg.shooting)?;
    let start = trajectory.samples[0];
    let rates = sharp_b_integrate(start.b, start.tau, cfg.sharp_tau_end, 10, cfg.shooting.ode_tol)?;
    let comparison = ConstantComparison::new(rates.last().map_or(f64::NAN, |r| r.c_est));
    Ok(ModulationReport { trajectory, rates, comparison })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_limits() {
        let s = ModulationState::new(30.0, 1e-300, 1e-300).unwrap();
        assert!((system_rhs(&s).0 / s.nu).abs() < 2e-3);
        let nu = (-10.0f64).exp();
        let s = ModulationState::new(30.0, nu, nu).unwrap();
        let want = -0.5 / 10.0 - (5.0 / 12.0 - LN_2 / 2.0) / 100.0;
        assert!((system_rhs(&s).1 / s.b - want).abs() < 1e-15);
    }

    #[test]
    fn beta_rate_matches_finite_differences() {
        let nu = (-12.0f64).exp();
        let s = ModulationState::new(0.0, nu, nu * 1.01).unwrap();
        let (dn, db) = system_rhs(&s);
        let h = 1e-6;
        let next = ModulationState::new(h, nu + h * dn, s.b + h * db).unwrap();
        let fd = (next.beta() - s.beta()) / h;
        assert!((fd - beta_rate(12.0, 0.01)).abs() < 1e-6);
        // β_τ = β + O(1/|log ν|)
        assert!((beta_rate(12.0, 0.01) - 0.01).abs() < 0.02);
    }

    #[test]
    fn sharp_b_leading_balance() {
        let tau: f64 = 400.0;
        let mu = tau.sqrt();
        assert!((0.5 / mu - 1.0 / (2.0 * tau.sqrt())).abs() < 1e-16);
        assert!(sharp_mu_rate(mu) > 0.5 / mu);
    }

    #[test]
    fn predicted_rate_values() {
        let gap = (-100.0f64).exp();
        let v = predicted_rate(-gap, 0.0).unwrap();
        assert!((v / (UNIVERSAL_CONSTANT * gap * (-10.0f64).exp()) - 1.0).abs() < 1e-13);
        assert!(predicted_rate(0.0, 0.5).is_err());
        assert!(predicted_rate(1.0, 0.5).is_err());
    }

    #[test]
    fn comparison_constants() {
        let c = ConstantComparison::new(0.7);
        assert!((c.universal - 0.7357588823).abs() < 1e-10);
        assert!((c.reference - 0.382).abs() < 1e-3);
        assert!((c.ratio - 1.926).abs() < 1e-3);
    }
}
