//! Star-integrals and star-derivatives.
//!
//! The definite star-integral is `exp(∫ log f)` and the star-derivative is
//! `exp(f'/f)`. Both are computed through `log f` so that values far outside
//! the double range are still classified instead of overflowing.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse_with, DomainReason, EvalDomainError, Expr, NodeKind};
use crate::quad::{integrate_fallible, Interval, QuadError, QuadResult, QuadSettings};

/// An inner log-integral below this underflows `exp`.
pub const LOG_UNDERFLOW: f64 = -708.0;
/// An inner log-integral above this overflows `exp`.
pub const LOG_OVERFLOW: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StarClass {
    Finite,
    DivergentToZero,
    DivergentToInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarResult {
    /// `0` for [`StarClass::DivergentToZero`], `+inf` for
    /// [`StarClass::DivergentToInfinity`].
    pub value: f64,
    pub class: StarClass,
    /// Absolute error estimate of the inner log-integral.
    pub error_estimate: f64,
}

impl StarResult {
    /// Classify `exp(log_value)`.
    pub fn from_log(log_value: f64, error_estimate: f64) -> Self {
        let class = if log_value < LOG_UNDERFLOW {
            StarClass::DivergentToZero
        } else if log_value > LOG_OVERFLOW {
            StarClass::DivergentToInfinity
        } else {
            StarClass::Finite
        };
        Self::with_class(class, log_value, error_estimate)
    }

    fn with_class(class: StarClass, log_value: f64, error_estimate: f64) -> Self {
        let value = match class {
            StarClass::Finite => log_value.exp(),
            StarClass::DivergentToZero => 0.0,
            StarClass::DivergentToInfinity => f64::INFINITY,
        };
        Self {
            value,
            class,
            error_estimate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.class == StarClass::Finite
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StarError {
    #[error(transparent)]
    Domain(#[from] EvalDomainError),
    #[error(transparent)]
    Quad(QuadError),
    #[error("quadrature did not converge (estimate {}, error {})", .0.value, .0.error_estimate)]
    NonConvergence(QuadResult),
    #[error("finite-difference step collapsed at x = {x} (h = {h})")]
    StepUnderflow { x: f64, h: f64 },
    #[error("derivative order must be at least 1")]
    InvalidOrder,
    #[error("log-coefficient {value} at order {order} overflows")]
    Overflow { order: usize, value: f64 },
    #[error("interval [{a}, {b}] is reversed; only forward intervals are defined here")]
    ReversedInterval { a: f64, b: f64 },
}

impl From<QuadError> for StarError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::Domain(d) => StarError::Domain(d),
            other => StarError::Quad(other),
        }
    }
}

/// `log f(x)`, rejecting points where `f(x) <= 0`.
pub fn ln_positive(f: &Expr, x: f64) -> Result<f64, EvalDomainError> {
    let v = f.eval_ln(x)?;
    if v > f64::NEG_INFINITY {
        Ok(v)
    } else {
        Err(EvalDomainError {
            node: f.kind(),
            x,
            reason: DomainReason::LogNonPositive,
        })
    }
}

/// Log-integral below which a non-converged pass counts as an endpoint
/// divergence rather than slow convergence.
const TAIL_DIVERGENCE: f64 = 1e-3;

/// `exp(∫_a^b log f)`.
///
/// A degenerate interval gives exactly 1. When quadrature fails to converge
/// because the outermost nodes still carry weight, the integral is classified
/// as divergent in the direction of that tail.
pub fn star_integral_definite(
    f: &Expr,
    iv: Interval,
    s: &QuadSettings,
) -> Result<StarResult, StarError> {
    if iv.is_degenerate() {
        return Ok(StarResult::from_log(0.0, 0.0));
    }
    let r = integrate_fallible(|x| f.eval_ln(x), iv, s)?;
    if r.value.is_nan() {
        return Err(StarError::NonConvergence(r));
    }
    if r.converged {
        return Ok(StarResult::from_log(r.value, r.error_estimate));
    }
    if r.endpoint_tail.abs() > TAIL_DIVERGENCE * (1.0 + r.value.abs()) || r.value.is_infinite() {
        let class = if r.value > 0.0 {
            StarClass::DivergentToInfinity
        } else {
            StarClass::DivergentToZero
        };
        let log_value = if r.value > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(StarResult::with_class(class, log_value, r.error_estimate));
    }
    Err(StarError::NonConvergence(r))
}

/// Entries of the closed-form star-antiderivative table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ClosedFormPattern {
    /// `x^n`
    PowerN { n: f64 },
    /// `e^x`
    ExpX,
    /// `e^(k/x)`
    ExpKOverX { k: f64 },
    /// `e^(e^x)`
    ExpExpX,
    /// `x^x`
    XToX,
    /// `a^x`, `a > 0`
    AToX { a: f64 },
    /// `a*x + b`; `a = 0` covers positive constants.
    Linear { a: f64, b: f64 },
}

impl ClosedFormPattern {
    pub fn name(&self) -> &'static str {
        match self {
            ClosedFormPattern::PowerN { .. } => "PowerN",
            ClosedFormPattern::ExpX => "ExpX",
            ClosedFormPattern::ExpKOverX { .. } => "ExpKOverX",
            ClosedFormPattern::ExpExpX => "ExpExpX",
            ClosedFormPattern::XToX => "XToX",
            ClosedFormPattern::AToX { .. } => "AToX",
            ClosedFormPattern::Linear { .. } => "Linear",
        }
    }

    /// The integrand this entry describes.
    pub fn integrand(&self) -> Expr {
        let x = Expr::Var;
        match *self {
            ClosedFormPattern::PowerN { n } => Expr::pow(x, Expr::Const(n)),
            ClosedFormPattern::ExpX => Expr::exp(x),
            ClosedFormPattern::ExpKOverX { k } => Expr::exp(Expr::Const(k) / x),
            ClosedFormPattern::ExpExpX => Expr::exp(Expr::exp(x)),
            ClosedFormPattern::XToX => Expr::pow(x.clone(), x),
            ClosedFormPattern::AToX { a } => Expr::pow(Expr::Const(a), x),
            ClosedFormPattern::Linear { a, b } => Expr::Const(a) * x + Expr::Const(b),
        }
    }

    /// Star-antiderivative with the multiplicative constant set to 1.
    pub fn antiderivative(&self) -> Expr {
        let (template, bindings): (&str, Vec<(&str, f64)>) = match *self {
            ClosedFormPattern::PowerN { n } => ("(x/e)^(n*x)", vec![("n", n)]),
            ClosedFormPattern::ExpX => ("e^(x^2/2)", vec![]),
            ClosedFormPattern::ExpKOverX { k } => ("x^k", vec![("k", k)]),
            ClosedFormPattern::ExpExpX => ("e^(e^x)", vec![]),
            ClosedFormPattern::XToX => ("(x^2/e)^(x^2/4)", vec![]),
            ClosedFormPattern::AToX { a } => ("a^(x^2/2)", vec![("a", a)]),
            ClosedFormPattern::Linear { a: 0.0, b } => ("b^x", vec![("b", b)]),
            ClosedFormPattern::Linear { a, b } => (
                "((a*x+b)/e)^x*(a*x+b)^(b/a)",
                vec![("a", a), ("b", b)],
            ),
        };
        parse_with(template, &bindings)
            .expect("antiderivative templates are well-formed")
            .simplify()
    }
}

impl fmt::Display for ClosedFormPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        match *self {
            ClosedFormPattern::PowerN { n } => write!(f, "(n={n})"),
            ClosedFormPattern::ExpKOverX { k } => write!(f, "(k={k})"),
            ClosedFormPattern::AToX { a } => write!(f, "(a={a})"),
            ClosedFormPattern::Linear { a, b } => write!(f, "(a={a}, b={b})"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormEntry {
    pub pattern: ClosedFormPattern,
    pub antiderivative: Expr,
}

/// `c` when `e` is `c*x` in one of its canonical spellings.
fn linear_coeff(e: &Expr) -> Option<f64> {
    match e {
        Expr::Var => Some(1.0),
        Expr::Neg(u) => linear_coeff(u).map(|c| -c),
        Expr::Mul(c, u) if **u == Expr::Var => c.as_const(),
        Expr::Div(u, c) if **u == Expr::Var => c.as_const().map(|c| 1.0 / c),
        _ => None,
    }
}

/// `k` when `e` is `k/x`.
fn reciprocal_coeff(e: &Expr) -> Option<f64> {
    match e {
        Expr::Neg(u) => reciprocal_coeff(u).map(|k| -k),
        Expr::Div(k, u) if **u == Expr::Var => k.as_const(),
        _ => None,
    }
}

fn match_pattern(g: &Expr) -> Option<ClosedFormPattern> {
    use ClosedFormPattern::*;
    match g {
        Expr::Const(c) if *c > 0.0 => Some(Linear { a: 0.0, b: *c }),
        Expr::Var => Some(PowerN { n: 1.0 }),
        Expr::Sqrt(u) if **u == Expr::Var => Some(PowerN { n: 0.5 }),
        Expr::Pow(u, n) if **u == Expr::Var => n.as_const().map(|n| PowerN { n }),
        Expr::Div(one, d) if one.as_const() == Some(1.0) => match &**d {
            Expr::Var => Some(PowerN { n: -1.0 }),
            Expr::Pow(u, n) if **u == Expr::Var => n.as_const().map(|n| PowerN { n: -n }),
            _ => None,
        },
        Expr::Exp(u) => match &**u {
            Expr::Var => Some(ExpX),
            Expr::Exp(v) if **v == Expr::Var => Some(ExpExpX),
            Expr::Mul(a, b) if **a == Expr::Var && **b == Expr::log(Expr::Var) => Some(XToX),
            other => {
                if let Some(c) = linear_coeff(other) {
                    Some(AToX { a: c.exp() })
                } else {
                    reciprocal_coeff(other).map(|k| ExpKOverX { k })
                }
            }
        },
        Expr::Add(t, b) | Expr::Sub(t, b) => {
            let b = b.as_const()?;
            let b = if matches!(g, Expr::Sub(..)) { -b } else { b };
            linear_coeff(t).map(|a| Linear { a, b })
        }
        other => linear_coeff(other).map(|a| Linear { a, b: 0.0 }),
    }
}

/// Closed-form star-antiderivative when `f` simplifies to a table pattern.
pub fn star_integral_closed(f: &Expr) -> Option<ClosedFormEntry> {
    let pattern = match_pattern(&f.simplify())?;
    Some(ClosedFormEntry {
        antiderivative: pattern.antiderivative(),
        pattern,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DerivativeMethod {
    /// `exp` of the symbolic `order`-th derivative of `log f`.
    Symbolic,
    /// Central geometric quotient, or a central stencil on `log f`.
    Numeric,
    /// The one-sided quotient `(f(x+h)/f(x))^(1/h)` and forward stencils.
    OneSided,
}

const MIN_STEP: f64 = 9.094947017729282e-13; // 2^-40

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn checked_step(x: f64, h: f64) -> Result<f64, StarError> {
    let effective = (x + h) - x;
    if !effective.is_finite() || effective < MIN_STEP * (1.0 + x.abs()) {
        return Err(StarError::StepUnderflow { x, h });
    }
    Ok(effective)
}

/// `order`-th star-derivative of `f` at `x`.
pub fn star_derivative(
    f: &Expr,
    x: f64,
    order: usize,
    method: DerivativeMethod,
) -> Result<f64, StarError> {
    Ok(log_star_derivative(f, x, order, method)?.exp())
}

/// `log` of the `order`-th star-derivative, i.e. `(d/dx)^order log f`.
pub fn log_star_derivative(
    f: &Expr,
    x: f64,
    order: usize,
    method: DerivativeMethod,
) -> Result<f64, StarError> {
    if order == 0 {
        return Err(StarError::InvalidOrder);
    }
    let ln = |t: f64| ln_positive(f, t);
    let eps = f64::EPSILON;
    let scale = 1.0 + x.abs();
    match method {
        DerivativeMethod::Symbolic => {
            ln(x)?;
            let d = Expr::log(f.clone()).nth_derivative(order);
            Ok(d.eval(x)?)
        }
        DerivativeMethod::Numeric => {
            let p = if order == 1 { 3.0 } else { order as f64 + 2.0 };
            let h = checked_step(x, (eps.powf(1.0 / p) * scale).max(MIN_STEP))?;
            let mut acc = 0.0;
            for k in 0..=order {
                let offset = (order as f64 / 2.0 - k as f64) * h;
                let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
                acc += sign * binomial(order, k) * ln(x + offset)?;
            }
            Ok(acc / h.powi(order as i32))
        }
        DerivativeMethod::OneSided => {
            let p = order as f64 + 1.0;
            let h = checked_step(x, (eps.powf(1.0 / p) * scale).max(MIN_STEP))?;
            let mut acc = 0.0;
            for k in 0..=order {
                let sign = if (order - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                acc += sign * binomial(order, k) * ln(x + k as f64 * h)?;
            }
            Ok(acc / h.powi(order as i32))
        }
    }
}

/// `f* = exp(f'/f)` as a simplified expression.
pub fn star_derivative_closed(f: &Expr) -> Expr {
    Expr::exp(f.differentiate() / f.clone()).simplify()
}

/// `F(b)/F(a)`.
///
/// Endpoint values must be finite; a removable form such as `(x/e)^x` at 0
/// is not resolved as a limit.
pub fn ftc_evaluate(big_f: &Expr, iv: Interval) -> Result<f64, EvalDomainError> {
    if iv.is_degenerate() {
        return Ok(1.0);
    }
    let fa = big_f.eval(iv.a)?;
    if fa == 0.0 {
        return Err(EvalDomainError {
            node: NodeKind::Div,
            x: iv.a,
            reason: DomainReason::DivByZero,
        });
    }
    let fb = big_f.eval(iv.b)?;
    let ratio = fb / fa;
    if ratio.is_finite() && ratio != 0.0 {
        return Ok(ratio);
    }
    // One endpoint overflowed or underflowed: go through log-space.
    match (big_f.eval_ln(iv.a), big_f.eval_ln(iv.b)) {
        (Ok(la), Ok(lb)) if la.is_finite() && lb.is_finite() => Ok((lb - la).exp()),
        _ => Ok(ratio),
    }
}

/// `|g' log f - (g log f)' + g f'/f|` at `x`: the logarithmic form of
/// integration by parts, which vanishes identically.
pub fn by_parts_residual(f: &Expr, g: &Expr, x: f64) -> Result<f64, EvalDomainError> {
    let log_f = Expr::log(f.clone()).simplify();
    let g_prime = g.differentiate();
    let product_prime = (g.clone() * log_f).differentiate();
    let log_star = (f.differentiate() / f.clone()).simplify();
    let lf = ln_positive(f, x)?;
    let value = g_prime.eval(x)? * lf - product_prime.eval(x)? + g.eval(x)? * log_star.eval(x)?;
    Ok(value.abs())
}

/// Every table pattern with representative parameters.
pub fn table_samples() -> Vec<ClosedFormPattern> {
    use ClosedFormPattern::*;
    vec![
        PowerN { n: 3.0 },
        ExpX,
        ExpKOverX { k: 2.0 },
        ExpExpX,
        XToX,
        AToX { a: 2.0 },
        Linear { a: 2.0, b: 3.0 },
    ]
}
