//! Mean-value solvers, the inequality suite, improper classification and
//! the multiplicative metric.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::Expr;
use crate::quad::{integrate, integrate_fallible, Interval, QuadError, QuadSettings};
use crate::star::{ln_positive, star_integral_closed, StarError};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Star(#[from] StarError),
    #[error("no sign change found on [{a}, {b}]")]
    NoBracket { a: f64, b: f64 },
    #[error("interval [{a}, {b}] must satisfy a < b with finite endpoints")]
    InvalidInterval { a: f64, b: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("at least one trial is required")]
    NoTrials,
}

impl From<QuadError> for AnalysisError {
    fn from(e: QuadError) -> Self {
        AnalysisError::Star(e.into())
    }
}

impl From<crate::expr::EvalDomainError> for AnalysisError {
    fn from(e: crate::expr::EvalDomainError) -> Self {
        AnalysisError::Star(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MvtFlag {
    /// The target function is flat: every point qualifies, the midpoint is
    /// returned.
    ConstantFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MvtSolution {
    pub c: f64,
    /// Value of the bracketed function at `c`.
    pub residual: f64,
    pub flag: Option<MvtFlag>,
}

pub const SCAN_POINTS: usize = 64;
pub const BISECTION_WIDTH: f64 = 1e-12;

/// Leftmost root of `h` on `(a, b)`: uniform scan, then bisection.
/// Points where `h` is undefined are skipped by the scan.
fn scan_and_bisect<H>(h: H, a: f64, b: f64, tol: f64) -> Result<MvtSolution, AnalysisError>
where
    H: Fn(f64) -> Option<f64>,
{
    let xs: Vec<f64> = (0..=SCAN_POINTS)
        .map(|j| a + (b - a) * j as f64 / SCAN_POINTS as f64)
        .collect();
    let hs: Vec<Option<f64>> = xs.iter().map(|&x| h(x).filter(|v| !v.is_nan())).collect();

    let defined: Vec<f64> = hs.iter().flatten().copied().collect();
    if !defined.is_empty() && defined.iter().all(|v| v.abs() <= tol) {
        let mid = 0.5 * (a + b);
        return Ok(MvtSolution {
            c: mid,
            residual: h(mid).unwrap_or(0.0),
            flag: Some(MvtFlag::ConstantFunction),
        });
    }

    for j in 0..SCAN_POINTS {
        let (Some(h0), Some(h1)) = (hs[j], hs[j + 1]) else {
            continue;
        };
        if j > 0 && h0 == 0.0 {
            return Ok(MvtSolution { c: xs[j], residual: 0.0, flag: None });
        }
        if h0.signum() * h1.signum() >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut h_lo) = (xs[j], xs[j + 1], h0);
        while hi - lo > BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match h(mid) {
                Some(0.0) => {
                    lo = mid;
                    hi = mid;
                }
                Some(v) if v.signum() == h_lo.signum() => {
                    lo = mid;
                    h_lo = v;
                }
                Some(v) if !v.is_nan() => hi = mid,
                _ => break,
            }
        }
        let c = 0.5 * (lo + hi);
        return Ok(MvtSolution {
            c,
            residual: h(c).unwrap_or(f64::NAN),
            flag: None,
        });
    }
    Err(AnalysisError::NoBracket { a, b })
}

fn forward_interval(iv: Interval) -> Result<(), AnalysisError> {
    if iv.is_finite() && iv.a < iv.b {
        Ok(())
    } else {
        Err(AnalysisError::InvalidInterval { a: iv.a, b: iv.b })
    }
}

/// `c` in `(a, b)` with `f(c)^(b-a)` equal to the star-integral, found as a
/// root of `log f(x) - (1/(b-a)) ∫ log f`.
pub fn mvt_star_integral(f: &Expr, iv: Interval, tol: f64) -> Result<MvtSolution, AnalysisError> {
    forward_interval(iv)?;
    let r = integrate_fallible(|x| f.eval_ln(x), iv, &QuadSettings::default())?;
    if !r.converged {
        return Err(StarError::NonConvergence(r).into());
    }
    let mean = r.value / iv.length();
    scan_and_bisect(|x| f.eval_ln(x).ok().map(|l| l - mean), iv.a, iv.b, tol)
}

/// `c` in `(a, b)` with `f*(c) = (f(b)/f(a))^(1/(b-a))`, found as a root of
/// `(log f)'(x) - (log f(b) - log f(a))/(b-a)`.
pub fn mvt_star_derivative(f: &Expr, iv: Interval, tol: f64) -> Result<MvtSolution, AnalysisError> {
    forward_interval(iv)?;
    let slope = (ln_positive(f, iv.b)? - ln_positive(f, iv.a)?) / iv.length();
    let log_derivative = Expr::log(f.clone()).differentiate();
    scan_and_bisect(
        |x| log_derivative.eval(x).ok().map(|d| d - slope),
        iv.a,
        iv.b,
        tol,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum InequalityId {
    #[serde(rename = "Concavity_g")]
    ConcavityG,
    #[serde(rename = "CauchySchwarz_Eq3")]
    CauchySchwarz,
    #[serde(rename = "Lemma_Eq4")]
    Lemma,
    #[serde(rename = "Theorem_Eq5")]
    Theorem,
    #[serde(rename = "AMGM_n")]
    AmGm,
}

impl InequalityId {
    pub const ALL: [InequalityId; 5] = [
        InequalityId::ConcavityG,
        InequalityId::CauchySchwarz,
        InequalityId::Lemma,
        InequalityId::Theorem,
        InequalityId::AmGm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::ConcavityG => "Concavity_g",
            InequalityId::CauchySchwarz => "CauchySchwarz_Eq3",
            InequalityId::Lemma => "Lemma_Eq4",
            InequalityId::Theorem => "Theorem_Eq5",
            InequalityId::AmGm => "AMGM_n",
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "concavity" | "concavity_g" | "g" => Ok(InequalityId::ConcavityG),
            "eq3" | "cauchyschwarz" | "cauchyschwarz_eq3" => Ok(InequalityId::CauchySchwarz),
            "eq4" | "lemma" | "lemma_eq4" => Ok(InequalityId::Lemma),
            "eq5" | "theorem" | "theorem_eq5" => Ok(InequalityId::Theorem),
            "amgm" | "amgm_n" => Ok(InequalityId::AmGm),
            _ => Err(format!("unknown inequality `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub trials: usize,
    pub violations: usize,
    /// Minimum over trials of `(LHS - RHS) / (1 + |RHS|)`.
    pub worst_margin: f64,
    pub seed: u64,
}

/// Relative slack below which `LHS < RHS` counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;

/// `(LHS - RHS) / (1 + |RHS|)`.
pub fn normalized_margin(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / (1.0 + rhs.abs())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_integral<F: Fn(f64) -> f64>(g: F, iv: Interval) -> Result<f64, QuadError> {
    Ok(integrate(g, iv, &QuadSettings::default())?.value)
}

/// Both sides of `∫* (s f + (1-s) g) >= (∫* f^s)(∫* g^(1-s))`, with `f` and
/// `g` given through their logarithms.
pub fn concavity_sides<F, G>(ln_f: F, ln_g: G, s: f64, iv: Interval) -> Result<(f64, f64), QuadError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let (ls, lt) = (s.ln(), (1.0 - s).ln());
    let lhs = log_integral(|x| log_add_exp(ls + ln_f(x), lt + ln_g(x)), iv)?;
    let rhs = s * log_integral(&ln_f, iv)? + (1.0 - s) * log_integral(&ln_g, iv)?;
    Ok((lhs.exp(), rhs.exp()))
}

/// Both sides of `∫* (f + g) >= 2^(b-a) (∫* f g)^(1/2)`.
pub fn cauchy_schwarz_sides<F, G>(ln_f: F, ln_g: G, iv: Interval) -> Result<(f64, f64), QuadError>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let lhs = log_integral(|x| log_add_exp(ln_f(x), ln_g(x)), iv)?;
    let rhs = (iv.b - iv.a) * 2f64.ln() + 0.5 * log_integral(|x| ln_f(x) + ln_g(x), iv)?;
    Ok((lhs.exp(), rhs.exp()))
}

/// Both sides of `(α+β+γ)² >= 8 α sqrt(βγ)`.
pub fn lemma_sides(alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let sum = alpha + beta + gamma;
    (sum * sum, 8.0 * alpha * (beta * gamma).sqrt())
}

/// Both sides of `(Σ a_i)^(2^(k-1)) >= 2^(2^k - 1) sqrt(a_1) Π a_(i+1)^(2^(i-2))`
/// for `a = [a_1, ..., a_(k+1)]`.
pub fn theorem_sides(a: &[f64]) -> (f64, f64) {
    let k = a.len() as i32 - 1;
    let sum: f64 = a.iter().sum();
    let lhs = sum.powf(2f64.powi(k - 1));
    let mut rhs = 2f64.powf(2f64.powi(k) - 1.0) * a[0].sqrt();
    for i in 1..=k {
        rhs *= a[i as usize].powf(2f64.powi(i - 2));
    }
    (lhs, rhs)
}

/// Both sides of `Σ a_i >= n (Π a_i)^(1/n)`.
pub fn amgm_sides(a: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let mean_log = a.iter().map(|v| v.ln()).sum::<f64>() / n;
    (a.iter().sum(), n * mean_log.exp())
}

/// `exp` of a cubic with coefficients in `[-1, 1]`, returned as its log.
fn random_log_function(rng: &mut ChaCha8Rng) -> [f64; 4] {
    std::array::from_fn(|_| rng.gen_range(-1.0..=1.0))
}

fn horner(p: &[f64; 4], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = rng.gen_range(-1.0..=1.0);
    let len = rng.gen_range(0.1..=2.0);
    Interval::new(a, a + len)
}

fn random_constants(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.01..10.0)).collect()
}

/// Deterministic generator for one trial, independent of execution order.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn trial_sides(id: InequalityId, rng: &mut ChaCha8Rng) -> Result<(f64, f64), QuadError> {
    match id {
        InequalityId::ConcavityG => {
            let (p, q) = (random_log_function(rng), random_log_function(rng));
            let s = rng.gen_range(0.0..=1.0);
            let iv = random_interval(rng);
            concavity_sides(|x| horner(&p, x), |x| horner(&q, x), s, iv)
        }
        InequalityId::CauchySchwarz => {
            let (p, q) = (random_log_function(rng), random_log_function(rng));
            let iv = random_interval(rng);
            cauchy_schwarz_sides(|x| horner(&p, x), |x| horner(&q, x), iv)
        }
        InequalityId::Lemma => {
            let mut v = random_constants(rng, 3);
            v.sort_by(|a, b| b.total_cmp(a));
            Ok(lemma_sides(v[0], v[1], v[2]))
        }
        InequalityId::Theorem => {
            let k = rng.gen_range(1..=6);
            let mut v = random_constants(rng, k + 1);
            v.sort_by(f64::total_cmp);
            Ok(theorem_sides(&v))
        }
        InequalityId::AmGm => {
            let n = rng.gen_range(2..=8);
            Ok(amgm_sides(&random_constants(rng, n)))
        }
    }
}

/// Run `trials` seeded random instances of an inequality in parallel.
pub fn inequality_suite(id: InequalityId, trials: usize, seed: u64) -> Result<InequalityReport, AnalysisError> {
    if trials == 0 {
        return Err(AnalysisError::NoTrials);
    }
    let margins: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (lhs, rhs) = trial_sides(id, &mut trial_rng(seed, t))?;
            let violated = lhs < rhs - VIOLATION_TOL * (1.0 + rhs.abs());
            Ok((normalized_margin(lhs, rhs), violated))
        })
        .collect::<Result<_, QuadError>>()?;
    Ok(InequalityReport {
        id,
        trials,
        violations: margins.iter().filter(|(_, v)| *v).count(),
        worst_margin: margins.iter().map(|(m, _)| *m).fold(f64::INFINITY, f64::min),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ImproperClass {
    ConvergesToValue(f64),
    DivergesToInfinity,
}

/// Limit of `∫*_0^X k dx = k^X` as `X` grows.
pub fn classify_improper_constant(k: f64) -> Result<ImproperClass, AnalysisError> {
    if k.is_nan() || k <= 0.0 || k.is_infinite() {
        return Err(AnalysisError::NonPositive { name: "k", value: k });
    }
    Ok(if k < 1.0 {
        ImproperClass::ConvergesToValue(0.0)
    } else if k == 1.0 {
        ImproperClass::ConvergesToValue(1.0)
    } else {
        ImproperClass::DivergesToInfinity
    })
}

/// `log(f) · F` with `F` the closed star-antiderivative: the ordinary
/// derivative of `F`, whose ordinary integral differs from the star-integral.
pub fn area_integrand(f: &Expr) -> Option<Expr> {
    let entry = star_integral_closed(f)?;
    Some((Expr::log(f.clone()) * entry.antiderivative).simplify())
}

/// `max(x/y, y/x)`.
pub fn mult_metric(x: f64, y: f64) -> Result<f64, AnalysisError> {
    for (name, v) in [("x", x), ("y", y)] {
        if v.is_nan() || v <= 0.0 || v.is_infinite() {
            return Err(AnalysisError::NonPositive { name, value: v });
        }
    }
    Ok((x / y).max(y / x))
}
