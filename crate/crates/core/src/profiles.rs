//! Soliton profiles, the fundamental pair of H, its right inverse, and the
//! inner corrector profiles T₁, S₁, U₁.

use std::sync::OnceLock;

use thiserror::Error;

use crate::quad::{self, QuadError, Tolerance};
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Special(#[from] SpecfunError),
    #[error("y={0} outside the tabulated range")]
    OutOfRange(f64),
}

/// Which radial variable a field is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    InnerY,
    SelfSimilarRho,
}

/// A scalar function of a radial variable with first-derivative access.
pub trait RadialField: Send + Sync {
    fn variable(&self) -> Variable;
    /// Value and first derivative.
    fn eval(&self, x: f64) -> (f64, f64);
    fn second_derivative(&self, _x: f64) -> Option<f64> {
        None
    }
}

/// A field given by closed-form value, first and second derivatives.
#[derive(Clone, Copy)]
pub struct ClosedField {
    pub variable: Variable,
    pub jet: fn(f64) -> [f64; 3],
}

impl RadialField for ClosedField {
    fn variable(&self) -> Variable {
        self.variable
    }
    fn eval(&self, x: f64) -> (f64, f64) {
        let j = (self.jet)(x);
        (j[0], j[1])
    }
    fn second_derivative(&self, x: f64) -> Option<f64> {
        Some((self.jet)(x)[2])
    }
}

/// Values of the ground state and its scaling derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonValues {
    pub q: f64,
    pub lambda_q: f64,
    pub lambda0_lambda_q: f64,
    pub potential: f64,
}

pub fn soliton_profiles(y: f64) -> SolitonValues {
    SolitonValues {
        q: 2.0 * y.atan(),
        lambda_q: lambda_q(y),
        lambda0_lambda_q: lambda0_lambda_q(y),
        potential: potential(y),
    }
}

/// ΛQ = 2y/(1+y²), the zero mode of H.
pub fn lambda_q(y: f64) -> f64 {
    2.0 * y / (1.0 + y * y)
}

/// (ΛQ, ∂ΛQ, ∂²ΛQ).
pub fn lambda_q_jet(y: f64) -> [f64; 3] {
    let s = 1.0 + y * y;
    [
        2.0 * y / s,
        2.0 * (1.0 - y * y) / (s * s),
        4.0 * y * (y * y - 3.0) / (s * s * s),
    ]
}

/// Λ₀ΛQ = (y∂_y + 1)ΛQ = 4y/(1+y²)².
pub fn lambda0_lambda_q(y: f64) -> f64 {
    let s = 1.0 + y * y;
    4.0 * y / (s * s)
}

/// (Λ₀ΛQ, ∂Λ₀ΛQ, ∂²Λ₀ΛQ).
pub fn lambda0_lambda_q_jet(y: f64) -> [f64; 3] {
    let y2 = y * y;
    let s = 1.0 + y2;
    [
        4.0 * y / (s * s),
        4.0 * (1.0 - 3.0 * y2) / (s * s * s),
        48.0 * y * (y2 - 1.0) / (s * s * s * s),
    ]
}

/// Λ₀Λ₀ΛQ = 8y(1−y²)/(1+y²)³.
pub fn lambda0_sq_lambda_q(y: f64) -> f64 {
    let s = 1.0 + y * y;
    8.0 * y * (1.0 - y * y) / (s * s * s)
}

/// V(y) = cos 2Q = 1 − 8y²/(1+y²)².
pub fn potential(y: f64) -> f64 {
    let s = 1.0 + y * y;
    1.0 - 8.0 * y * y / (s * s)
}

/// Rescaled potential in the self-similar variable: V(ρ/ν).
pub fn potential_nu(nu: f64, rho: f64) -> f64 {
    let s = nu * nu + rho * rho;
    1.0 - 8.0 * nu * nu * rho * rho / (s * s)
}

/// H u = −u'' − u'/y + V u/y² from a value/derivative triple.
pub fn apply_h(y: f64, jet: [f64; 3]) -> f64 {
    -jet[2] - jet[1] / y + potential(y) * jet[0] / (y * y)
}

/// J₁ = ΛQ.
pub fn j1(y: f64) -> f64 {
    lambda_q(y)
}

fn j2_antiderivative(y: f64) -> f64 {
    // ∫₁^y (1+s²)²/(4s³) ds
    y * y / 8.0 - 1.0 / (8.0 * y * y) + 0.5 * y.ln()
}

/// J₂ = ΛQ · ∫₁^y ds/(s ΛQ(s)²).
pub fn j2(y: f64) -> f64 {
    lambda_q(y) * j2_antiderivative(y)
}

/// (J₂, J₂').
pub fn j2_with_slope(y: f64) -> (f64, f64) {
    let [q, dq, _] = lambda_q_jet(y);
    let g = j2_antiderivative(y);
    (q * g, dq * g + (1.0 + y * y) / (2.0 * y * y))
}

/// Wronskian y(J₁J₂' − J₁'J₂), identically 1.
pub fn wronskian(y: f64) -> f64 {
    let [q, dq, _] = lambda_q_jet(y);
    let (p, dp) = j2_with_slope(y);
    y * (q * dp - dq * p)
}

/// Cumulative pair (∫₀^y f J₂ s ds, ∫₀^y f J₁ s ds) on fixed geometric panels.
fn green_moments(f: &dyn Fn(f64) -> f64, y: f64) -> Result<(f64, f64), QuadError> {
    if y <= 0.0 {
        return Ok((0.0, 0.0));
    }
    // panels in s = y'/y; fixed layout so the result is smooth in y
    const PANELS: usize = 120;
    const S_MIN: f64 = 1e-9;
    let ratio = (1.0 / S_MIN).powf(1.0 / PANELS as f64);
    let tol = Tolerance::new(1e-300, 1e-13);
    let g2 = |s: f64| {
        let x = y * s;
        f(x) * j2(x) * x * y
    };
    let g1 = |s: f64| {
        let x = y * s;
        f(x) * j1(x) * x * y
    };
    let mut m2 = quad::integrate(g2, 0.0, S_MIN, tol)?;
    let mut m1 = quad::integrate(g1, 0.0, S_MIN, tol)?;
    let mut a = S_MIN;
    for k in 0..PANELS {
        let b = if k + 1 == PANELS { 1.0 } else { a * ratio };
        m2 += quad::integrate(g2, a, b, tol)?;
        m1 += quad::integrate(g1, a, b, tol)?;
        a = b;
    }
    Ok((m2, m1))
}

/// H⁻¹f(y) = J₁∫₀^y f J₂ s ds − J₂∫₀^y f J₁ s ds by direct quadrature.
pub fn apply_hinv(f: &dyn Fn(f64) -> f64, y: f64) -> Result<f64, ProfileError> {
    let (m2, m1) = green_moments(f, y)?;
    Ok(j1(y) * m2 - j2(y) * m1)
}

/// Values of the three inner correctors at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCorrectors {
    pub t1: f64,
    pub s1: f64,
    pub u1: f64,
}

impl InnerCorrectors {
    pub fn as_array(&self) -> [f64; 3] {
        [self.t1, self.s1, self.u1]
    }
}

/// Sources f with T₁ = −H⁻¹f, S₁ = −H⁻¹f, U₁ = −H⁻¹f respectively.
pub fn corrector_sources(y: f64) -> [f64; 3] {
    [lambda0_sq_lambda_q(y), lambda0_lambda_q(y), lambda_q(y)]
}

/// Direct (untabulated) evaluation of the correctors.
pub fn inner_correctors_direct(y: f64) -> Result<InnerCorrectors, ProfileError> {
    let t1 = -apply_hinv(&lambda0_sq_lambda_q, y)?;
    let s1 = -apply_hinv(&lambda0_lambda_q, y)?;
    let u1 = -apply_hinv(&lambda_q, y)?;
    Ok(InnerCorrectors { t1, s1, u1 })
}

pub const TABLE_NODES: usize = 2000;
pub const TABLE_Y_MIN: f64 = 1e-6;
pub const TABLE_Y_MAX: f64 = 1e7;

/// Log-grid table of T₁, S₁, U₁ with exact slopes, interpolated by cubic Hermite in log y.
pub struct CorrectorTable {
    log_y: Vec<f64>,
    /// value and y-derivative per node and profile
    nodes: Vec<[[f64; 2]; 3]>,
}

impl CorrectorTable {
    pub fn build() -> Result<Self, ProfileError> {
        let (lo, hi) = (TABLE_Y_MIN.ln(), TABLE_Y_MAX.ln());
        let step = (hi - lo) / (TABLE_NODES - 1) as f64;
        let log_y: Vec<f64> = (0..TABLE_NODES).map(|k| lo + step * k as f64).collect();
        let tol = Tolerance::new(1e-300, 1e-14);
        // running moments (∫ f J₂ s, ∫ f J₁ s) per source
        let mut moments = [[0.0f64; 2]; 3];
        let mut nodes = Vec::with_capacity(TABLE_NODES);
        let mut prev = 0.0;
        for &u in &log_y {
            let y = u.exp();
            for (src, m) in moments.iter_mut().enumerate() {
                let f = |x: f64| corrector_sources(x)[src];
                m[0] += quad::integrate(|x| f(x) * j2(x) * x, prev, y, tol)?;
                m[1] += quad::integrate(|x| f(x) * j1(x) * x, prev, y, tol)?;
            }
            prev = y;
            let [q, dq, _] = lambda_q_jet(y);
            let (p, dp) = j2_with_slope(y);
            let mut entry = [[0.0; 2]; 3];
            for (e, m) in entry.iter_mut().zip(moments.iter()) {
                *e = [-(q * m[0] - p * m[1]), -(dq * m[0] - dp * m[1])];
            }
            nodes.push(entry);
        }
        Ok(Self { log_y, nodes })
    }

    pub fn node_count(&self) -> usize {
        self.log_y.len()
    }

    /// Node abscissae and values (y, T₁, S₁, U₁).
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        self.log_y
            .iter()
            .zip(&self.nodes)
            .map(|(u, n)| [u.exp(), n[0][0], n[1][0], n[2][0]])
    }

    /// Interpolated (value, y-derivative) of all three profiles.
    pub fn eval_with_slope(&self, y: f64) -> Result<[[f64; 2]; 3], ProfileError> {
        if !(y > 0.0) || y > TABLE_Y_MAX * (1.0 + 1e-12) {
            return Err(ProfileError::OutOfRange(y));
        }
        if y < TABLE_Y_MIN {
            // all three vanish like y³ at the origin
            let r = y / TABLE_Y_MIN;
            let mut out = self.nodes[0];
            for e in out.iter_mut() {
                *e = [e[0] * r * r * r, 3.0 * e[0] * r * r / TABLE_Y_MIN];
            }
            return Ok(out);
        }
        let u = y.ln();
        let lo = self.log_y[0];
        let step = self.log_y[1] - lo;
        let k = (((u - lo) / step).floor() as usize).min(self.log_y.len() - 2);
        let (u0, u1) = (self.log_y[k], self.log_y[k + 1]);
        let (y0, y1) = (u0.exp(), u1.exp());
        let h = u1 - u0;
        let s = (u - u0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = (3.0 * s2 - 4.0 * s + 1.0) / h;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = (3.0 * s2 - 2.0 * s) / h;
        // interpolate v / w with w = y³/(1+y²), which is flat at both ends
        let scaled = |node: &[f64; 2], y: f64| {
            let w = y * y * y / (1.0 + y * y);
            let dlogw = 3.0 / y - 2.0 * y / (1.0 + y * y);
            let r = node[0] / w;
            (r, (node[1] / w - r * dlogw) * y * h)
        };
        let w = y * y * y / (1.0 + y * y);
        let dlogw = 3.0 / y - 2.0 * y / (1.0 + y * y);
        let mut out = [[0.0; 2]; 3];
        for (p, o) in out.iter_mut().enumerate() {
            let (r0, m0) = scaled(&self.nodes[k][p], y0);
            let (r1, m1) = scaled(&self.nodes[k + 1][p], y1);
            let r = h00 * r0 + h10 * m0 + h01 * r1 + h11 * m1;
            let dr = (d00 * r0 + d10 * m0 + d01 * r1 + d11 * m1) / y;
            *o = [r * w, (dr + r * dlogw) * w];
        }
        Ok(out)
    }

    pub fn eval(&self, y: f64) -> Result<InnerCorrectors, ProfileError> {
        let v = self.eval_with_slope(y)?;
        Ok(InnerCorrectors { t1: v[0][0], s1: v[1][0], u1: v[2][0] })
    }
}

static TABLE: OnceLock<CorrectorTable> = OnceLock::new();

/// The process-wide corrector table, built on first use.
pub fn corrector_table() -> &'static CorrectorTable {
    TABLE.get_or_init(|| CorrectorTable::build().expect("corrector table quadrature"))
}

/// T₁, S₁, U₁ at y from the shared table.
pub fn inner_correctors(y: f64) -> Result<InnerCorrectors, ProfileError> {
    corrector_table().eval(y)
}

/// Light-cone correction U∞(λ; ρ).
pub fn u_infty(lambda: f64, rho: f64) -> Result<f64, ProfileError> {
    Ok(specfun::u_infty(lambda, rho)?)
}
