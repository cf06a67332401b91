//! Product-form Taylor expansions `f(x) = Π a_i^((x-c)^i)`.
//!
//! Coefficients are stored as the raw log-Taylor coefficients
//! `b_i = (d^i log f)(c) / i!`, so `a_i = exp(b_i)` is only formed on request.

use serde::Serialize;

use crate::expr::Expr;
use crate::star::{ln_positive, star_derivative_closed, StarError, StarResult, LOG_OVERFLOW};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorProduct {
    pub center: f64,
    /// `f(c)`, kept exactly as evaluated.
    a0: f64,
    /// `b_0 ..= b_n`.
    log_coefficients: Vec<f64>,
}

impl TaylorProduct {
    /// Number of terms beyond the constant one.
    pub fn term_count(&self) -> usize {
        self.log_coefficients.len() - 1
    }

    pub fn log_coefficients(&self) -> &[f64] {
        &self.log_coefficients
    }

    /// `a_0 = f(c)` followed by `a_i = exp(b_i)`.
    pub fn coefficients(&self) -> Vec<f64> {
        std::iter::once(self.a0)
            .chain(self.log_coefficients[1..].iter().map(|b| b.exp()))
            .collect()
    }

    /// The terms `b_i (x-c)^i` of the exponent sum.
    pub fn exponent_terms(&self, x: f64) -> Vec<f64> {
        let dx = x - self.center;
        let mut power = 1.0;
        self.log_coefficients
            .iter()
            .map(|b| {
                let t = if *b == 0.0 { 0.0 } else { b * power };
                power *= dx;
                t
            })
            .collect()
    }
}

fn factorial(i: usize) -> f64 {
    (1..=i).map(|k| k as f64).product()
}

/// Expansion of `f` about `c` up to order `n`.
pub fn taylor_coefficients(f: &Expr, c: f64, n: usize) -> Result<TaylorProduct, StarError> {
    let ln_c = ln_positive(f, c)?;
    let a0 = f.eval(c)?;
    let mut log_coefficients = Vec::with_capacity(n + 1);
    log_coefficients.push(ln_c);
    let mut d = Expr::log(f.clone()).simplify();
    for i in 1..=n {
        d = d.differentiate();
        let b = d.eval(c)? / factorial(i);
        if !b.is_finite() || b.abs() > LOG_OVERFLOW {
            return Err(StarError::Overflow { order: i, value: b });
        }
        log_coefficients.push(b);
    }
    Ok(TaylorProduct {
        center: c,
        a0,
        log_coefficients,
    })
}

/// `exp(Σ b_i (x-c)^i)`, classified like a star-integral when it leaves the
/// double range. At `x = c` this is exactly `a_0`.
pub fn taylor_evaluate(tp: &TaylorProduct, x: f64) -> StarResult {
    if x == tp.center {
        let mut r = StarResult::from_log(tp.log_coefficients[0], 0.0);
        r.value = tp.a0;
        return r;
    }
    let sum: f64 = tp.exponent_terms(x).iter().sum();
    StarResult::from_log(sum, 0.0)
}

/// True when the last two non-trivial exponent terms are growing, which
/// signals evaluation outside the log-series radius.
pub fn terms_growing(tp: &TaylorProduct, x: f64) -> bool {
    let terms = tp.exponent_terms(x);
    let tail: Vec<f64> = terms[1..].iter().map(|t| t.abs()).filter(|t| *t > 0.0).collect();
    match tail.as_slice() {
        [.., prev, last] => last > prev,
        _ => false,
    }
}

/// `|(d^i log f)(c) - log f^{*(i)}(c)|`.
///
/// The right side iterates `g -> g*` symbolically and evaluates the result in
/// log space, so it shares no code path with the left side and cannot
/// underflow when the star-derivative itself is tiny.
pub fn log_identity_residual(f: &Expr, c: f64, i: usize) -> Result<f64, StarError> {
    if i == 0 {
        return Err(StarError::InvalidOrder);
    }
    ln_positive(f, c)?;
    let lhs = Expr::log(f.clone()).nth_derivative(i).eval(c)?;
    let mut g = f.clone();
    for _ in 0..i {
        g = star_derivative_closed(&g);
    }
    let rhs = g.eval_ln(c)?;
    Ok((lhs - rhs).abs())
}
