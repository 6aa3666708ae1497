//! Invariant linear functionals ℓ_j of the linearized flow M_ν and the constants
//! 𝔟_j, 𝔠_j that enter the modulation equations.
//!
//! ℓ_j(ε, ε̇) = ∫₀¹ [(λ_j + Λ₀)ε + ε̇] g_j φ_j ρ dρ with g_j = (1−ρ²)^{λ_j−1/2},
//! Λ = ρ∂_ρ and Λ₀ = ρ∂_ρ + 1.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::eigensolver::{self, EigenError, Eigenfunction, SpectralContext};
use crate::profiles;
use crate::quad::{self, QuadError, Tolerance};
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Special(#[from] SpecfunError),
    #[error("state has no closed-form second derivatives")]
    NotClosedForm,
    #[error("state component lacks a first derivative")]
    MissingDerivative,
}

pub type Result<T> = std::result::Result<T, FunctionalError>;

/// Value of a radial profile with whichever derivatives are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
}

impl Jet {
    pub fn full(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1: Some(d1), d2: Some(d2) }
    }

    pub fn first(value: f64, d1: f64) -> Self {
        Self { value, d1: Some(d1), d2: None }
    }

    pub fn value(value: f64) -> Self {
        Self { value, d1: None, d2: None }
    }

    fn d1_or_nan(&self) -> f64 {
        self.d1.unwrap_or(f64::NAN)
    }

    fn d2_or_nan(&self) -> f64 {
        self.d2.unwrap_or(f64::NAN)
    }
}

pub type Profile = Arc<dyn Fn(f64) -> Jet + Send + Sync>;

/// A state (ε, ε̇) of the first-order system, both in the self-similar variable ρ.
#[derive(Clone)]
pub struct StatePair {
    pub eps: Profile,
    pub eps_dot: Profile,
    /// both components carry exact first and second derivatives
    pub closed_form: bool,
}

impl std::fmt::Debug for StatePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StatePair").field("closed_form", &self.closed_form).finish_non_exhaustive()
    }
}

impl StatePair {
    /// State from closed-form jets (value, first, second derivative).
    pub fn closed<E, D>(eps: E, eps_dot: D) -> Self
    where
        E: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
        D: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        let wrap = |f: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>| -> Profile {
            Arc::new(move |r| {
                let j = f(r);
                Jet::full(j[0], j[1], j[2])
            })
        };
        Self { eps: wrap(Arc::new(eps)), eps_dot: wrap(Arc::new(eps_dot)), closed_form: true }
    }

    /// The eigenvector (φ_j, (λ_j + Λ)φ_j) built from a numerical eigenfunction.
    pub fn eigenvector(ef: Arc<Eigenfunction>) -> Self {
        let lambda = ef.lambda();
        let phi = ef.clone();
        let eps: Profile = Arc::new(move |r| match phi.try_eval(r) {
            Ok((v, d)) => Jet::first(v, d),
            Err(_) => Jet::value(f64::NAN),
        });
        let eps_dot: Profile = Arc::new(move |r| match ef.try_eval(r) {
            Ok((v, d)) => Jet::value(lambda * v + r * d),
            Err(_) => Jet::value(f64::NAN),
        });
        Self { eps, eps_dot, closed_form: false }
    }

    /// Largest relative mismatch between the stored derivatives and central differences at ρ.
    pub fn derivative_mismatch(&self, rho: f64) -> f64 {
        let h = 1e-4 * rho.max(1e-2);
        let mut worst = 0.0f64;
        for p in [&self.eps, &self.eps_dot] {
            let (m, c, q) = (p(rho - h), p(rho), p(rho + h));
            let fd1 = (q.value - m.value) / (2.0 * h);
            let fd2 = (q.value - 2.0 * c.value + m.value) / (h * h);
            if let Some(d1) = c.d1 {
                worst = worst.max((fd1 - d1).abs() / d1.abs().max(1.0));
            }
            if let Some(d2) = c.d2 {
                worst = worst.max((fd2 - d2).abs() / d2.abs().max(1.0));
            }
        }
        worst
    }
}

/// g_j(ρ) = (1−ρ²)^{λ_j−1/2} on (0,1], zero beyond.
///
/// Panics when λ_j < −0.45, where the weight is too close to non-integrable.
pub fn weight_g(lambda: f64, rho: f64) -> f64 {
    assert!(lambda >= -0.45, "weight exponent too singular for lambda={lambda}");
    if rho > 1.0 {
        return 0.0;
    }
    ((lambda - 0.5) * (-rho * rho).ln_1p()).exp()
}

/// [H_ν + (λ+Λ₀)(λ+Λ)]u from the jet (u, u', u'').
pub fn eigen_operator(nu: f64, lambda: f64, rho: f64, jet: [f64; 3]) -> f64 {
    let [u, du, d2u] = jet;
    -(1.0 - rho * rho) * d2u - (1.0 / rho - 2.0 * (lambda + 1.0) * rho) * du
        + (profiles::potential_nu(nu, rho) / (rho * rho) + lambda * (lambda + 1.0)) * u
}

/// Default quadrature budget per panel.
pub const DEFAULT_TOLERANCE: Tolerance = Tolerance { abs: 1e-12, rel: 1e-10 };

/// ∫₀¹ f(ρ) g(ρ) ρ dρ split at ν and 1/2, with a double-exponential rule on the last panel.
pub fn weighted_integral<F: FnMut(f64) -> f64>(lambda: f64, nu: f64, tol: Tolerance, mut f: F) -> Result<f64> {
    assert!(lambda >= -0.45, "weight exponent too singular for lambda={lambda}");
    let split = nu.min(0.25);
    let core = quad::integrate(|r| f(r) * weight_g(lambda, r) * r, 0.0, split, tol)?;
    let middle = quad::integrate(
        |s| {
            let r = s.exp();
            f(r) * weight_g(lambda, r) * r * r
        },
        split.ln(),
        0.5f64.ln(),
        tol,
    )?;
    let edge = quad::tanh_sinh(
        |p| {
            let z = p.to_b * (2.0 - p.to_b);
            f(p.x) * z.powf(lambda - 0.5) * p.x
        },
        0.5,
        1.0,
        tol,
    )?;
    Ok(core + middle + edge)
}

/// M_ν s = (−Λε + ε̇, −H_νε − Λ₀ε̇) for a closed-form state.
///
/// The first component of the result keeps one derivative, the second only its value.
pub fn apply_mnu(nu: f64, s: &StatePair) -> Result<StatePair> {
    if !s.closed_form {
        return Err(FunctionalError::NotClosedForm);
    }
    let (e, ed) = (s.eps.clone(), s.eps_dot.clone());
    let first: Profile = Arc::new(move |r| {
        let (a, b) = (e(r), ed(r));
        Jet::first(-r * a.d1_or_nan() + b.value, -a.d1_or_nan() - r * a.d2_or_nan() + b.d1_or_nan())
    });
    let (e, ed) = (s.eps.clone(), s.eps_dot.clone());
    let second: Profile = Arc::new(move |r| {
        let (a, b) = (e(r), ed(r));
        let h = -a.d2_or_nan() - a.d1_or_nan() / r + profiles::potential_nu(nu, r) * a.value / (r * r);
        Jet::value(-h - r * b.d1_or_nan() - b.value)
    });
    Ok(StatePair { eps: first, eps_dot: second, closed_form: false })
}

/// ℓ_j tied to one computed eigenfunction.
#[derive(Clone)]
pub struct InvariantFunctional {
    pub eigenfunction: Arc<Eigenfunction>,
    pub tol: Tolerance,
}

impl InvariantFunctional {
    pub fn new(eigenfunction: Arc<Eigenfunction>) -> Self {
        Self { eigenfunction, tol: DEFAULT_TOLERANCE }
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.eigenfunction.lambda()
    }

    pub fn nu(&self) -> f64 {
        self.eigenfunction.ctx.nu
    }

    fn phi(&self, r: f64) -> f64 {
        self.eigenfunction.try_eval(r).map(|(v, _)| v).unwrap_or(f64::NAN)
    }

    /// ⟨f, g_jφ_j⟩.
    pub fn pairing<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        weighted_integral(self.lambda(), self.nu(), self.tol, |r| f(r) * self.phi(r))
    }

    pub fn ell(&self, s: &StatePair) -> Result<f64> {
        if (s.eps)(0.5).d1.is_none() {
            return Err(FunctionalError::MissingDerivative);
        }
        let shift = self.lambda() + 1.0;
        self.pairing(|r| {
            let (a, b) = ((s.eps)(r), (s.eps_dot)(r));
            shift * a.value + r * a.d1_or_nan() + b.value
        })
    }

    /// ℓ_j(M_ν s) − λ_j ℓ_j(s), zero up to discretization error.
    pub fn invariance_defect(&self, s: &StatePair) -> Result<InvarianceCheck> {
        let ell = self.ell(s)?;
        let image = self.ell(&apply_mnu(self.nu(), s)?)?;
        Ok(InvarianceCheck { ell, defect: image - self.lambda() * ell })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub ell: f64,
    pub defect: f64,
}

/// (1/ν)ΛQ_ν = 2ρ/(ν²+ρ²) with two derivatives.
pub fn scaled_lambda_q(nu: f64, rho: f64) -> [f64; 3] {
    let j = profiles::lambda_q_jet(rho / nu);
    [j[0] / nu, j[1] / (nu * nu), j[2] / (nu * nu * nu)]
}

/// The state ((1/ν)ΛQ_ν, 0).
pub fn scaling_state(nu: f64) -> StatePair {
    StatePair::closed(move |r| scaled_lambda_q(nu, r), |_| [0.0; 3])
}

/// The three fixed test states used for the invariance identity.
pub fn test_states() -> [(&'static str, StatePair); 3] {
    let s_a = StatePair::closed(
        |r| {
            let e = (-r * r).exp();
            [r * e, (1.0 - 2.0 * r * r) * e, (4.0 * r * r - 6.0) * r * e]
        },
        |_| [0.0; 3],
    );
    let s_b = StatePair::closed(|_| [0.0; 3], |r| [r * r * (1.0 - r * r), 2.0 * r - 4.0 * r.powi(3), 2.0 - 12.0 * r * r]);
    let s_c = StatePair::closed(
        |r| {
            let r2 = r * r;
            [r * (1.0 - r2).powi(2), 1.0 - 6.0 * r2 + 5.0 * r2 * r2, -12.0 * r + 20.0 * r2 * r]
        },
        |r| {
            let e = (-r).exp();
            [r * e, (1.0 - r) * e, (r - 2.0) * e]
        },
    );
    [("gaussian", s_a), ("velocity", s_b), ("mixed", s_c)]
}

/// 𝔟_j = ℓ_j((1/ν)ΛQ_ν, 0).
pub fn frkb(fun: &InvariantFunctional) -> Result<f64> {
    fun.ell(&scaling_state(fun.nu()))
}

/// 𝔠_j = ½{ℓ_j(φ₀) − ℓ_j(φ₁) + ⟨(1/ν)ΛQ_ν, g_jφ_j⟩} given the row ℓ_j(φ_k).
pub fn frkc(fun: &InvariantFunctional, row: [f64; 2]) -> Result<f64> {
    let nu = fun.nu();
    let overlap = fun.pairing(|r| scaled_lambda_q(nu, r)[0])?;
    Ok(0.5 * (row[0] - row[1] + overlap))
}

/// Quadratures that have exact or asymptotic closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossChecks {
    /// ⟨(1/ν)ΛQ_ν, g(1/ν)ΛQ_ν⟩
    pub scaling_norm: f64,
    /// 4|log ν| − 2 + 2(ψ(1) − ψ(λ+1/2))
    pub scaling_norm_formula: f64,
    /// ⟨(1/ν)Λ₀ΛQ_ν, g(1/ν)ΛQ_ν⟩, close to 2
    pub generator_pairing: f64,
    /// ∫₀^{1/ν} 4y³/(1+y²)² dy by quadrature
    pub sub_integral: f64,
    /// 2log(1+1/ν²) − 2/(1+ν²)
    pub sub_integral_exact: f64,
}

pub fn closed_form_crosschecks(nu: f64, lambda: f64, tol: Tolerance) -> Result<CrossChecks> {
    let scaled = |r: f64| scaled_lambda_q(nu, r)[0];
    let scaling_norm = weighted_integral(lambda, nu, tol, |r| scaled(r).powi(2))?;
    let psi = specfun::digamma(lambda + 0.5)?;
    let scaling_norm_formula = 4.0 * nu.ln().abs() - 2.0 + 2.0 * (-specfun::EULER_GAMMA - psi);
    let generator_pairing =
        weighted_integral(lambda, nu, tol, |r| profiles::lambda0_lambda_q(r / nu) / nu * scaled(r))?;
    let density = |y: f64| 4.0 * y.powi(3) / (1.0 + y * y).powi(2);
    let sub_integral = quad::integrate(density, 0.0, 1.0, tol)?
        + quad::integrate(
            |s| {
                let y = s.exp();
                density(y) * y
            },
            0.0,
            -nu.ln(),
            tol,
        )?;
    let sub_integral_exact = 2.0 * (1.0 / (nu * nu)).ln_1p() - 2.0 / (1.0 + nu * nu);
    Ok(CrossChecks { scaling_norm, scaling_norm_formula, generator_pairing, sub_integral, sub_integral_exact })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceRow {
    pub state: &'static str,
    pub j: usize,
    pub ell: f64,
    pub defect: f64,
}

/// Everything the modulation equations need from the spectral side at one ν.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub nu: f64,
    pub lambda: [f64; 2],
    /// entry [j][k] = ℓ_j(φ_k)
    pub transversality: [[f64; 2]; 2],
    pub frkb: [f64; 2],
    pub frkc: [f64; 2],
    pub invariance: Vec<InvarianceRow>,
    pub crosschecks: [CrossChecks; 2],
}

impl FunctionalReport {
    pub fn compute(ctx: &SpectralContext) -> Result<Self> {
        Self::compute_with(ctx, DEFAULT_TOLERANCE)
    }

    pub fn compute_with(ctx: &SpectralContext, tol: Tolerance) -> Result<Self> {
        let efs = [Arc::new(eigensolver::eigenfunction(ctx, 0)?), Arc::new(eigensolver::eigenfunction(ctx, 1)?)];
        let funs = efs.clone().map(|ef| InvariantFunctional::new(ef).with_tolerance(tol));
        let vectors = efs.clone().map(StatePair::eigenvector);
        let mut transversality = [[0.0; 2]; 2];
        for (j, fun) in funs.iter().enumerate() {
            for (k, v) in vectors.iter().enumerate() {
                transversality[j][k] = fun.ell(v)?;
            }
        }
        let frkb = [frkb(&funs[0])?, frkb(&funs[1])?];
        let frkc = [frkc(&funs[0], transversality[0])?, frkc(&funs[1], transversality[1])?];
        let mut invariance = Vec::new();
        for (name, state) in test_states() {
            for (j, fun) in funs.iter().enumerate() {
                let c = fun.invariance_defect(&state)?;
                invariance.push(InvarianceRow { state: name, j, ell: c.ell, defect: c.defect });
            }
        }
        let lambda = [funs[0].lambda(), funs[1].lambda()];
        let crosschecks = [
            closed_form_crosschecks(ctx.nu, lambda[0], tol)?,
            closed_form_crosschecks(ctx.nu, lambda[1], tol)?,
        ];
        Ok(Self { nu: ctx.nu, lambda, transversality, frkb, frkc, invariance, crosschecks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_anchors() {
        assert_eq!(weight_g(0.9, 0.0), 1.0);
        assert!((weight_g(0.5, 0.7) - 1.0).abs() < 1e-15);
        assert!(weight_g(0.98, 1.0 - 1e-12) < 1e-5);
        assert_eq!(weight_g(0.2, 1.5), 0.0);
    }

    #[test]
    fn test_states_have_consistent_derivatives() {
        for (name, s) in test_states() {
            for r in [0.05, 0.3, 0.8] {
                assert!(s.derivative_mismatch(r) < 1e-6, "{name} at {r}");
            }
        }
        assert!(scaling_state(1e-2).derivative_mismatch(0.02) < 1e-6);
    }

    #[test]
    fn mnu_on_pure_states() {
        let nu = 1e-2;
        let s = scaling_state(nu);
        let m = apply_mnu(nu, &s).unwrap();
        for r in [0.005, 0.05, 0.5] {
            let j = scaled_lambda_q(nu, r);
            assert!(((m.eps)(r).value + r * j[1]).abs() < 1e-12 * j[0].abs().max(1.0));
        }
        let v = StatePair::closed(|_| [0.0; 3], |r| [r.sin(), r.cos(), -r.sin()]);
        let m = apply_mnu(nu, &v).unwrap();
        for r in [0.1, 0.6] {
            assert!(((m.eps)(r).value - r.sin()).abs() < 1e-15);
            assert!(((m.eps_dot)(r).value + r * r.cos() + r.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn mnu_rejects_numerical_states() {
        let s = apply_mnu(1e-2, &scaling_state(1e-2)).unwrap();
        assert_eq!(apply_mnu(1e-2, &s).unwrap_err(), FunctionalError::NotClosedForm);
    }

    #[test]
    fn sub_integral_closed_form() {
        let c = closed_form_crosschecks(0.1, 0.9, DEFAULT_TOLERANCE).unwrap();
        assert!((c.sub_integral_exact - 7.2501).abs() < 1e-4, "{}", c.sub_integral_exact);
        assert!((c.sub_integral - c.sub_integral_exact).abs() < 1e-10);
    }

    #[test]
    fn weighted_integral_of_polynomial() {
        // ∫₀¹ (1−ρ²)^{λ−1/2} ρ dρ = 1/(2λ+1)
        for lambda in [-0.3, 0.5, 0.97] {
            let v = weighted_integral(lambda, 1e-3, DEFAULT_TOLERANCE, |_| 1.0).unwrap();
            assert!((v - 1.0 / (2.0 * lambda + 1.0)).abs() < 1e-11, "{lambda}: {v}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn eigen_operator_is_symmetric_for_the_weight(
            lambda in -0.4f64..1.2,
            log_nu in -3.0f64..-2.0,
            a in 0.5f64..3.0,
            b in -1.0f64..1.0,
        ) {
            let nu = 10f64.powf(log_nu);
            let u = move |r: f64| {
                let e = (-a * r * r).exp();
                [r * e, (1.0 - 2.0 * a * r * r) * e, (4.0 * a * a * r.powi(3) - 6.0 * a * r) * e]
            };
            let v = move |r: f64| [r + b * r * r, 1.0 + 2.0 * b * r, 2.0 * b];
            let tol = Tolerance::new(1e-13, 1e-11);
            let lhs = weighted_integral(lambda, nu, tol, |r| eigen_operator(nu, lambda, r, u(r)) * v(r)[0]).unwrap();
            let rhs = weighted_integral(lambda, nu, tol, |r| u(r)[0] * eigen_operator(nu, lambda, r, v(r))).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-7 * lhs.abs().max(1.0), "{} vs {}", lhs, rhs);
        }
    }
}
