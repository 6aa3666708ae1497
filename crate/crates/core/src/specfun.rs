//! Real special functions: log-Gamma, digamma, Pochhammer, the Gauss series,
//! and the logarithmic connection expansion of the light-cone solution `h1`.

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_EPS: f64 = 1e-16;
const SERIES_MAX_TERMS: usize = 1_000_000;
/// Default truncation cap for the connection expansion.
pub const CONNECTION_MAX_TERMS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("argument {0} outside the domain of {1}")]
    Domain(f64, &'static str),
    #[error("hypergeometric series did not converge after {0} terms")]
    NonConvergence(usize),
    #[error("connection expansion needs more than {max} terms at rho={rho}")]
    Truncation { rho: f64, max: usize },
}

pub type Result<T> = std::result::Result<T, SpecfunError>;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// log Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) for x > 0.
///
/// Shifts up to x ≥ 8 with ψ(x) = ψ(x+1) − 1/x, then sums the asymptotic
/// series in Bernoulli numbers.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecfunError::Domain(x, "digamma"));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 8.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    // B_2k / (2k) for k = 1..7
    const TAIL: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
        1.0 / 12.0,
    ];
    let inv2 = 1.0 / (x * x);
    let mut poly = 0.0;
    for c in TAIL.iter().rev() {
        poly = poly * inv2 + c;
    }
    Ok(shift + x.ln() - 0.5 / x - poly * inv2)
}

/// Rising factorial (z)_n.
pub fn pochhammer(z: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, k| acc * (z + k as f64))
}

/// Parameters of a Gauss series F(a, b; c; z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl HypParams {
    pub fn new(a: f64, b: f64, c: f64, z: f64) -> Self {
        Self { a, b, c, z }
    }
}

fn is_nonpositive_integer(c: f64) -> bool {
    c <= 0.0 && c == c.round()
}

/// Generic hypergeometric-type series sum_n t_n with t_{n+1} = t_n * ratio(n).
/// Stops after three consecutive terms below 1e-16 of the running sum.
fn sum_ratio_series(first: f64, mut ratio: impl FnMut(f64) -> f64) -> Result<f64> {
    let mut term = first;
    let mut sum = first;
    let mut small = 0;
    for n in 0..SERIES_MAX_TERMS {
        term *= ratio(n as f64);
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() || term == 0.0 {
            small += 1;
            if small == 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(SpecfunError::NonConvergence(SERIES_MAX_TERMS))
}

/// Gauss hypergeometric series F(a, b; c; z) for |z| < 1.
pub fn gauss_2f1(p: HypParams) -> Result<f64> {
    let HypParams { a, b, c, z } = p;
    if is_nonpositive_integer(c) {
        return Err(SpecfunError::Domain(c, "gauss_2f1 (c)"));
    }
    if !(z.abs() < 1.0) {
        return Err(SpecfunError::Domain(z, "gauss_2f1 (z)"));
    }
    sum_ratio_series(1.0, |n| (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z)
}

fn check_window(lambda: f64) -> Result<()> {
    if lambda.abs() <= 0.5 || (lambda - 1.0).abs() <= 0.5 {
        Ok(())
    } else {
        Err(SpecfunError::Domain(lambda, "eigenvalue window"))
    }
}

/// h1(λ; z) = F(λ/2, (λ−1)/2; λ+1/2; z), the solution smooth at the light cone z = 0.
///
/// Only the raw series is used, so z is restricted to z ≤ 0.9.
pub fn h1(lambda: f64, z: f64) -> Result<f64> {
    check_window(lambda)?;
    if z > 0.9 || z <= -1.0 {
        return Err(SpecfunError::Domain(z, "h1 (use h1_near_origin near z=1)"));
    }
    gauss_2f1(HypParams::new(lambda / 2.0, (lambda - 1.0) / 2.0, lambda + 0.5, z))
}

/// (h1(λ; z) − 1) / (λ(λ−1)), regular at λ ∈ {0, 1}.
pub fn h1_minus_one_reduced(lambda: f64, z: f64) -> Result<f64> {
    check_window(lambda)?;
    if z > 0.95 || z <= -1.0 {
        return Err(SpecfunError::Domain(z, "h1_minus_one_reduced"));
    }
    let (a, b, c) = (lambda / 2.0 + 1.0, (lambda + 1.0) / 2.0, lambda + 1.5);
    let tail = sum_ratio_series(1.0, |m| (a + m) * (b + m) / ((c + m) * (m + 2.0)) * z)?;
    Ok(z / (4.0 * lambda + 2.0) * tail)
}

/// One coefficient pair of the logarithmic connection expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionCoeffs {
    pub n: usize,
    pub c: f64,
    pub d: f64,
}

pub fn connection_coeffs(lambda: f64, n: usize) -> Result<ConnectionCoeffs> {
    check_window(lambda)?;
    let a = lambda / 2.0 + 1.0;
    let b = (lambda + 1.0) / 2.0;
    let nf = n as f64;
    let mut c = 1.0;
    for k in 0..n {
        let k = k as f64;
        c *= (a + k) * (b + k) / ((k + 1.0) * (k + 2.0));
    }
    let d = -digamma(nf + 1.0)? - digamma(nf + 2.0)? + digamma(a + nf)? + digamma(b + nf)?;
    Ok(ConnectionCoeffs { n, c, d })
}

/// Iterator over (c_n, d_n) using the recurrences in n.
struct CoeffStream {
    a: f64,
    b: f64,
    n: f64,
    c: f64,
    d: f64,
}

impl CoeffStream {
    fn new(lambda: f64) -> Result<Self> {
        let first = connection_coeffs(lambda, 0)?;
        Ok(Self {
            a: lambda / 2.0 + 1.0,
            b: (lambda + 1.0) / 2.0,
            n: 0.0,
            c: first.c,
            d: first.d,
        })
    }

    fn current(&self) -> (f64, f64) {
        (self.c, self.d)
    }

    fn advance(&mut self) {
        let (n, a, b) = (self.n, self.a, self.b);
        self.c *= (a + n) * (b + n) / ((n + 1.0) * (n + 2.0));
        self.d += -1.0 / (n + 1.0) - 1.0 / (n + 2.0) + 1.0 / (a + n) + 1.0 / (b + n);
        self.n += 1.0;
    }
}

/// Σ_{n ≥ first} c_n ρ^{2n} [log ρ + d_n / 2], truncated once the terms drop below 1e-17.
fn log_series(lambda: f64, rho: f64, first: usize, max_terms: usize) -> Result<f64> {
    let mut stream = CoeffStream::new(lambda)?;
    for _ in 0..first {
        stream.advance();
    }
    let log_rho = rho.ln();
    let r2 = rho * rho;
    let mut power = r2.powi(first as i32);
    let mut sum = 0.0;
    let mut small = 0;
    for _ in first..=max_terms {
        let (c, d) = stream.current();
        let term = c * power * (log_rho + 0.5 * d);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) || term == 0.0 {
            small += 1;
            if small == 2 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        power *= r2;
        stream.advance();
    }
    Err(SpecfunError::Truncation { rho, max: max_terms })
}

/// c_conn(λ) = 2Γ(λ/2+1)Γ((λ+1)/2)/Γ(λ+1/2).
pub fn c_conn(lambda: f64) -> Result<f64> {
    check_window(lambda)?;
    let lg = ln_gamma(lambda / 2.0 + 1.0) + ln_gamma((lambda + 1.0) / 2.0) - ln_gamma(lambda + 0.5);
    Ok(2.0 * lg.exp())
}

/// (c_conn(λ) − 2)/(λ(λ−1)), continued through λ ∈ {0, 1} by cubic interpolation.
pub fn c_conn_reduced(lambda: f64) -> Result<f64> {
    check_window(lambda)?;
    let direct = |l: f64| -> Result<f64> { Ok((c_conn(l)? - 2.0) / (l * (l - 1.0))) };
    let root = if lambda.abs() < 0.5 { 0.0 } else { 1.0 };
    const H: f64 = 1e-3;
    let offset = lambda - root;
    if offset.abs() >= H {
        return direct(lambda);
    }
    let nodes = [-2.0 * H, -H, H, 2.0 * H];
    let mut values = [0.0; 4];
    for (v, x) in values.iter_mut().zip(nodes) {
        *v = direct(root + x)?;
    }
    let mut acc = 0.0;
    for i in 0..4 {
        let mut w = 1.0;
        for k in 0..4 {
            if k != i {
                w *= (offset - nodes[k]) / (nodes[i] - nodes[k]);
            }
        }
        acc += w * values[i];
    }
    Ok(acc)
}

/// (1/ρ)·h1(λ; 1−ρ²) through the logarithmic expansion around ρ = 0.
pub fn h1_near_origin(lambda: f64, rho: f64, max_terms: usize) -> Result<f64> {
    check_window(lambda)?;
    if !(rho > 0.0 && rho <= 0.7) {
        return Err(SpecfunError::Domain(rho, "h1_near_origin"));
    }
    let series = log_series(lambda, rho, 0, max_terms)?;
    let inner = 2.0 / rho + lambda * (lambda - 1.0) * rho * series;
    Ok(inner / c_conn(lambda)?)
}

/// d_0(λ) from the connection expansion.
pub fn d0(lambda: f64) -> Result<f64> {
    Ok(connection_coeffs(lambda, 0)?.d)
}

/// Light-cone correction U∞(λ; ρ) = ρ Σ_{n≥1} c_n ρ^{2n} [log ρ + d_n/2].
///
/// Series for ρ ≤ 0.4, closed form through h1 beyond.
pub fn u_infty(lambda: f64, rho: f64) -> Result<f64> {
    if rho <= 0.4 {
        u_infty_series(lambda, rho)
    } else {
        u_infty_closed(lambda, rho)
    }
}

pub fn u_infty_series(lambda: f64, rho: f64) -> Result<f64> {
    check_window(lambda)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SpecfunError::Domain(rho, "u_infty"));
    }
    Ok(rho * log_series(lambda, rho, 1, 4000)?)
}

pub fn u_infty_closed(lambda: f64, rho: f64) -> Result<f64> {
    check_window(lambda)?;
    if !(0.3..=1.0).contains(&rho) {
        return Err(SpecfunError::Domain(rho, "u_infty closed form"));
    }
    let z = (1.0 - rho) * (1.0 + rho);
    let reduced = c_conn(lambda)? * h1_minus_one_reduced(lambda, z)? + c_conn_reduced(lambda)?;
    Ok(reduced / rho - rho * (rho.ln() + 0.5 * d0(lambda)?))
}

/// d_0 at the two unperturbed eigenvalues: d_0(1) = 1 − 2log2, d_0(0) = −1 − 2log2.
pub fn d0_reference(j: usize) -> f64 {
    1.0 - 2.0 * LN_2 - 2.0 * j as f64
}
