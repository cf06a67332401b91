//! Univariate real expressions.
//!
//! Every other module consumes [`Expr`] trees: the star-integral samples
//! `log f`, the star-derivative differentiates `log f` symbolically, and the
//! closed-form tables are pattern-matched on simplified trees.
//!
//! Trees are immutable values. Builders such as [`Expr::pow`] apply the two
//! rewrites the rest of the crate relies on: `e^u` becomes `Exp(u)`, and a
//! power whose exponent depends on `x` becomes `exp(g * log f)`.

mod diff;
mod parse;
mod render;
mod simplify;

use std::cmp::Ordering;
use std::f64::consts::E;
use std::fmt;
use std::ops;

use serde::Serialize;
use thiserror::Error;

pub use parse::{parse, parse_with, ParseError};
pub use simplify::simplify;

/// Expression tree over the single variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
    Neg(Box<Expr>),
}

/// Node kind without payload, used in error reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    Const,
    Var,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Exp,
    Log,
    Sqrt,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DomainReason {
    LogNonPositive,
    DivByZero,
    PowIndeterminate,
    SqrtNegative,
}

impl fmt::Display for DomainReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainReason::LogNonPositive => "logarithm of a non-positive value",
            DomainReason::DivByZero => "division by zero",
            DomainReason::PowIndeterminate => "indeterminate power",
            DomainReason::SqrtNegative => "square root of a negative value",
        };
        f.write_str(s)
    }
}

/// Evaluation left the domain of the expression.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{reason} in {node:?} node at x = {x}")]
pub struct EvalDomainError {
    pub node: NodeKind,
    pub x: f64,
    pub reason: DomainReason,
}

impl EvalDomainError {
    fn new(node: NodeKind, x: f64, reason: DomainReason) -> Self {
        Self { node, x, reason }
    }
}

pub(crate) fn is_integer(v: f64) -> bool {
    v.is_finite() && v.fract() == 0.0
}

impl Expr {
    /// Finite constant. Panics on NaN or infinity.
    pub fn constant(c: f64) -> Expr {
        assert!(c.is_finite(), "expression constants must be finite, got {c}");
        Expr::Const(c)
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    #[allow(clippy::should_implement_trait)]
    pub fn exp(u: Expr) -> Expr {
        Expr::Exp(Box::new(u))
    }

    pub fn log(u: Expr) -> Expr {
        Expr::Log(Box::new(u))
    }

    pub fn sqrt(u: Expr) -> Expr {
        Expr::Sqrt(Box::new(u))
    }

    /// `base ^ exponent` with the canonical rewrites applied: a base of
    /// exactly `e` yields `Exp(exponent)`, and an exponent containing `x`
    /// yields `exp(exponent * log(base))`.
    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        if base == Expr::Const(E) {
            Expr::exp(exponent)
        } else if exponent.contains_var() {
            Expr::exp(exponent * Expr::log(base))
        } else {
            Expr::Pow(Box::new(base), Box::new(exponent))
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Expr::Const(_) => NodeKind::Const,
            Expr::Var => NodeKind::Var,
            Expr::Add(..) => NodeKind::Add,
            Expr::Sub(..) => NodeKind::Sub,
            Expr::Mul(..) => NodeKind::Mul,
            Expr::Div(..) => NodeKind::Div,
            Expr::Pow(..) => NodeKind::Pow,
            Expr::Exp(_) => NodeKind::Exp,
            Expr::Log(_) => NodeKind::Log,
            Expr::Sqrt(_) => NodeKind::Sqrt,
            Expr::Neg(_) => NodeKind::Neg,
        }
    }

    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var => true,
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.contains_var() || b.contains_var(),
            Expr::Exp(u) | Expr::Log(u) | Expr::Sqrt(u) | Expr::Neg(u) => u.contains_var(),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => 1 + a.size() + b.size(),
            Expr::Exp(u) | Expr::Log(u) | Expr::Sqrt(u) | Expr::Neg(u) => 1 + u.size(),
        }
    }

    /// IEEE-double value at `x`.
    pub fn eval(&self, x: f64) -> Result<f64, EvalDomainError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let num = a.eval(x)?;
                let den = b.eval(x)?;
                if den == 0.0 {
                    return Err(EvalDomainError::new(NodeKind::Div, x, DomainReason::DivByZero));
                }
                num / den
            }
            Expr::Pow(b, p) => {
                let base = b.eval(x)?;
                let exponent = p.eval(x)?;
                eval_pow(base, exponent, x)?
            }
            Expr::Exp(u) => u.eval(x)?.exp(),
            Expr::Log(u) => {
                let v = u.eval(x)?;
                if v.is_nan() || v <= 0.0 {
                    return Err(EvalDomainError::new(
                        NodeKind::Log,
                        x,
                        DomainReason::LogNonPositive,
                    ));
                }
                v.ln()
            }
            Expr::Sqrt(u) => {
                let v = u.eval(x)?;
                if v < 0.0 {
                    return Err(EvalDomainError::new(
                        NodeKind::Sqrt,
                        x,
                        DomainReason::SqrtNegative,
                    ));
                }
                v.sqrt()
            }
            Expr::Neg(u) => -u.eval(x)?,
        })
    }

    /// Natural logarithm of the value at `x`, computed in log-space where the
    /// tree structure allows it (products, quotients, powers, `exp`), so that
    /// `log f` stays finite when `f` itself would overflow or underflow.
    ///
    /// An exact zero yields `-inf`; a negative value is a
    /// [`DomainReason::LogNonPositive`] error.
    pub fn eval_ln(&self, x: f64) -> Result<f64, EvalDomainError> {
        let (ln_abs, sign) = self.ln_abs(x)?;
        match sign {
            1 => Ok(ln_abs),
            0 => Ok(f64::NEG_INFINITY),
            _ => Err(EvalDomainError::new(
                self.kind(),
                x,
                DomainReason::LogNonPositive,
            )),
        }
    }

    /// `(ln |v|, sign v)` with sign in {-1, 0, 1}.
    fn ln_abs(&self, x: f64) -> Result<(f64, i8), EvalDomainError> {
        fn of_value(v: f64) -> (f64, i8) {
            if v > 0.0 {
                (v.ln(), 1)
            } else if v < 0.0 {
                ((-v).ln(), -1)
            } else if v == 0.0 {
                (f64::NEG_INFINITY, 0)
            } else {
                (f64::NAN, 1)
            }
        }
        Ok(match self {
            Expr::Const(c) => of_value(*c),
            Expr::Var => of_value(x),
            Expr::Mul(a, b) => {
                let (la, sa) = a.ln_abs(x)?;
                let (lb, sb) = b.ln_abs(x)?;
                if sa == 0 || sb == 0 {
                    (f64::NEG_INFINITY, 0)
                } else {
                    (la + lb, sa * sb)
                }
            }
            Expr::Div(a, b) => {
                let (la, sa) = a.ln_abs(x)?;
                let (lb, sb) = b.ln_abs(x)?;
                if sb == 0 {
                    return Err(EvalDomainError::new(NodeKind::Div, x, DomainReason::DivByZero));
                }
                if sa == 0 {
                    (f64::NEG_INFINITY, 0)
                } else {
                    (la - lb, sa * sb)
                }
            }
            Expr::Neg(u) => {
                let (l, s) = u.ln_abs(x)?;
                (l, -s)
            }
            Expr::Exp(u) => (u.eval(x)?, 1),
            Expr::Sqrt(u) => {
                let (l, s) = u.ln_abs(x)?;
                match s {
                    1 => (0.5 * l, 1),
                    0 => (f64::NEG_INFINITY, 0),
                    _ => {
                        return Err(EvalDomainError::new(
                            NodeKind::Sqrt,
                            x,
                            DomainReason::SqrtNegative,
                        ))
                    }
                }
            }
            Expr::Pow(b, p) => {
                let exponent = p.eval(x)?;
                let (l, s) = b.ln_abs(x)?;
                match s {
                    0 if exponent > 0.0 => (f64::NEG_INFINITY, 0),
                    0 if exponent < 0.0 => {
                        return Err(EvalDomainError::new(NodeKind::Pow, x, DomainReason::DivByZero))
                    }
                    0 => {
                        return Err(EvalDomainError::new(
                            NodeKind::Pow,
                            x,
                            DomainReason::PowIndeterminate,
                        ))
                    }
                    1 => (exponent * l, 1),
                    _ if is_integer(exponent) => {
                        let sign = if (exponent / 2.0).fract() == 0.0 { 1 } else { -1 };
                        (exponent * l, sign)
                    }
                    _ => {
                        return Err(EvalDomainError::new(
                            NodeKind::Pow,
                            x,
                            DomainReason::PowIndeterminate,
                        ))
                    }
                }
            }
            Expr::Add(..) | Expr::Sub(..) | Expr::Log(_) => of_value(self.eval(x)?),
        })
    }

    /// Symbolic derivative with respect to `x`, simplified.
    pub fn differentiate(&self) -> Expr {
        simplify(&diff::derivative(self))
    }

    /// `n`-th symbolic derivative, simplifying after every step.
    pub fn nth_derivative(&self, n: usize) -> Expr {
        let mut d = simplify(self);
        for _ in 0..n {
            d = d.differentiate();
        }
        d
    }

    pub fn simplify(&self) -> Expr {
        simplify(self)
    }

    /// Total order used to sort operands into canonical position.
    pub fn canonical_cmp(&self, other: &Expr) -> Ordering {
        fn rank(e: &Expr) -> u8 {
            match e {
                Expr::Var => 0,
                Expr::Const(_) => 1,
                Expr::Pow(..) => 2,
                Expr::Mul(..) => 3,
                Expr::Div(..) => 4,
                Expr::Add(..) => 5,
                Expr::Sub(..) => 6,
                Expr::Neg(_) => 7,
                Expr::Exp(_) => 8,
                Expr::Log(_) => 9,
                Expr::Sqrt(_) => 10,
            }
        }
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Add(a1, b1), Expr::Add(a2, b2))
            | (Expr::Sub(a1, b1), Expr::Sub(a2, b2))
            | (Expr::Mul(a1, b1), Expr::Mul(a2, b2))
            | (Expr::Div(a1, b1), Expr::Div(a2, b2))
            | (Expr::Pow(a1, b1), Expr::Pow(a2, b2)) => {
                a1.canonical_cmp(a2).then_with(|| b1.canonical_cmp(b2))
            }
            (Expr::Exp(a), Expr::Exp(b))
            | (Expr::Log(a), Expr::Log(b))
            | (Expr::Sqrt(a), Expr::Sqrt(b))
            | (Expr::Neg(a), Expr::Neg(b)) => a.canonical_cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    /// Structural equality with constants compared to a relative tolerance.
    pub fn approx_eq(&self, other: &Expr, rel: f64) -> bool {
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => {
                a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
            }
            (Expr::Var, Expr::Var) => true,
            (Expr::Add(a1, b1), Expr::Add(a2, b2))
            | (Expr::Sub(a1, b1), Expr::Sub(a2, b2))
            | (Expr::Mul(a1, b1), Expr::Mul(a2, b2))
            | (Expr::Div(a1, b1), Expr::Div(a2, b2))
            | (Expr::Pow(a1, b1), Expr::Pow(a2, b2)) => {
                a1.approx_eq(a2, rel) && b1.approx_eq(b2, rel)
            }
            (Expr::Exp(a), Expr::Exp(b))
            | (Expr::Log(a), Expr::Log(b))
            | (Expr::Sqrt(a), Expr::Sqrt(b))
            | (Expr::Neg(a), Expr::Neg(b)) => a.approx_eq(b, rel),
            _ => false,
        }
    }
}

fn eval_pow(base: f64, exponent: f64, x: f64) -> Result<f64, EvalDomainError> {
    if base == 0.0 {
        if exponent < 0.0 {
            return Err(EvalDomainError::new(NodeKind::Pow, x, DomainReason::DivByZero));
        }
        if exponent == 0.0 {
            return Err(EvalDomainError::new(NodeKind::Pow, x, DomainReason::PowIndeterminate));
        }
    }
    let v = base.powf(exponent);
    if v.is_nan() && !base.is_nan() && !exponent.is_nan() {
        return Err(EvalDomainError::new(NodeKind::Pow, x, DomainReason::PowIndeterminate));
    }
    Ok(v)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render::render(self))
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::Var
    }

    #[test]
    fn square_at_three() {
        let e = Expr::pow(x(), Expr::constant(2.0));
        assert_eq!(e.eval(3.0).unwrap(), 9.0);
    }

    #[test]
    fn log_at_zero_is_domain_error() {
        let err = Expr::log(x()).eval(0.0).unwrap_err();
        assert_eq!(err.reason, DomainReason::LogNonPositive);
        assert_eq!(err.node, NodeKind::Log);
        assert_eq!(err.x, 0.0);
    }

    #[test]
    fn self_power_matches_exp_log_oracle() {
        let e = Expr::pow(x(), x());
        let oracle = (2.0f64 * 2.0f64.ln()).exp();
        let v = e.eval(2.0).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
        assert!((v - oracle).abs() < 1e-14);
    }

    #[test]
    fn domain_errors_carry_reason_and_point() {
        let div = (Expr::constant(1.0) / x()).eval(0.0).unwrap_err();
        assert_eq!(div.reason, DomainReason::DivByZero);
        let sq = Expr::sqrt(x()).eval(-1.0).unwrap_err();
        assert_eq!(sq.reason, DomainReason::SqrtNegative);
        assert_eq!(sq.x, -1.0);
        let pw = Expr::pow(x(), Expr::constant(0.5)).eval(-2.0).unwrap_err();
        assert_eq!(pw.reason, DomainReason::PowIndeterminate);
    }

    #[test]
    fn pow_builder_rewrites() {
        assert_eq!(
            Expr::pow(Expr::Const(E), x()),
            Expr::exp(x())
        );
        assert_eq!(
            Expr::pow(x(), x()),
            Expr::exp(x() * Expr::log(x()))
        );
        assert!(matches!(Expr::pow(x(), Expr::constant(3.0)), Expr::Pow(..)));
    }

    #[test]
    fn ln_eval_survives_underflow() {
        // x^400 underflows at 1e-10 but its logarithm is ordinary.
        let e = Expr::pow(x(), Expr::constant(400.0));
        assert_eq!(e.eval(1e-10).unwrap(), 0.0);
        let l = e.eval_ln(1e-10).unwrap();
        assert!((l - 400.0 * (1e-10f64).ln()).abs() < 1e-9);
        // exp(-800) underflows too.
        let g = Expr::exp(Expr::constant(-800.0));
        assert_eq!(g.eval_ln(0.3).unwrap(), -800.0);
    }

    #[test]
    fn ln_eval_signs() {
        let e = Expr::Neg(Box::new(x())) * Expr::Neg(Box::new(x()));
        assert!((e.eval_ln(-3.0).unwrap() - 9f64.ln()).abs() < 1e-15);
        assert_eq!(x().eval_ln(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(
            x().eval_ln(-1.0).unwrap_err().reason,
            DomainReason::LogNonPositive
        );
        let cube = Expr::pow(x(), Expr::constant(3.0));
        assert!(cube.eval_ln(-2.0).is_err());
        let square = Expr::pow(x(), Expr::constant(2.0));
        assert!((square.eval_ln(-2.0).unwrap() - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn canonical_order_is_total_on_samples() {
        let items = [x(), Expr::constant(1.0), Expr::log(x()), Expr::exp(x())];
        for a in &items {
            assert_eq!(a.canonical_cmp(a), Ordering::Equal);
            for b in &items {
                assert_eq!(a.canonical_cmp(b), b.canonical_cmp(a).reverse());
            }
        }
    }
}
