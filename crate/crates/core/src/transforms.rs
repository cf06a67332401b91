//! Integrals conjugated by an invertible map: `L(f, G) = G(∫ G⁻¹(f))`.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::expr::{DomainReason, EvalDomainError, Expr, NodeKind};
use crate::quad::{integrate_fallible, Interval, QuadSettings};
use crate::star::{StarError, StarResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GTransform {
    /// `G = exp`, `G⁻¹ = log`: the star-integral.
    Exp,
    /// The ordinary integral.
    Identity,
    /// `G = log`, `G⁻¹ = exp`.
    Log,
    /// `G(u) = u²`, `G⁻¹` the positive square root.
    Square,
}

impl GTransform {
    pub const ALL: [GTransform; 4] = [
        GTransform::Exp,
        GTransform::Identity,
        GTransform::Log,
        GTransform::Square,
    ];

    pub fn forward(self, u: f64) -> f64 {
        match self {
            GTransform::Exp => u.exp(),
            GTransform::Identity => u,
            GTransform::Log => u.ln(),
            GTransform::Square => u * u,
        }
    }

    /// `G⁻¹(y)`, or `None` outside the inverse domain.
    pub fn inverse(self, y: f64) -> Option<f64> {
        if !self.inverse_domain(y) {
            return None;
        }
        Some(match self {
            GTransform::Exp => y.ln(),
            GTransform::Identity => y,
            GTransform::Log => y.exp(),
            GTransform::Square => y.sqrt(),
        })
    }

    pub fn inverse_domain(self, y: f64) -> bool {
        match self {
            GTransform::Exp => y > 0.0,
            GTransform::Identity | GTransform::Log => !y.is_nan(),
            GTransform::Square => y >= 0.0,
        }
    }

    fn domain_reason(self) -> DomainReason {
        match self {
            GTransform::Square => DomainReason::SqrtNegative,
            _ => DomainReason::LogNonPositive,
        }
    }
}

impl fmt::Display for GTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GTransform::Exp => "exp",
            GTransform::Identity => "id",
            GTransform::Log => "log",
            GTransform::Square => "square",
        })
    }
}

impl FromStr for GTransform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exp" => Ok(GTransform::Exp),
            "id" | "identity" => Ok(GTransform::Identity),
            "log" => Ok(GTransform::Log),
            "square" => Ok(GTransform::Square),
            other => Err(format!("unknown transform `{other}`")),
        }
    }
}

/// `G(∫_a^b G⁻¹(f))`.
///
/// With [`GTransform::Exp`] the inner integrand is `log f` in log-space,
/// exactly as the star-integral samples it. [`GTransform::Square`] is only
/// defined on forward intervals.
pub fn g_integral(f: &Expr, g: GTransform, iv: Interval, s: &QuadSettings) -> Result<f64, StarError> {
    if g == GTransform::Square && iv.a > iv.b {
        return Err(StarError::ReversedInterval { a: iv.a, b: iv.b });
    }
    let r = match g {
        GTransform::Exp => integrate_fallible(|x| f.eval_ln(x), iv, s)?,
        _ => integrate_fallible(
            |x| {
                let y = f.eval(x)?;
                g.inverse(y).ok_or(EvalDomainError {
                    node: f.kind(),
                    x,
                    reason: g.domain_reason(),
                })
            },
            iv,
            s,
        )?,
    };
    if !r.converged {
        return Err(StarError::NonConvergence(r));
    }
    Ok(g.forward(r.value))
}

/// `∫*_{y ∈ iv} ∫*_{lower}^{y} f(x, y) dx dy`, i.e. `exp(∫∫ log f)`.
///
/// Every inner star-integral must converge; the outer one is classified.
pub fn double_star_integral<F>(
    f: F,
    inner_lower: f64,
    outer: Interval,
    s: &QuadSettings,
) -> Result<StarResult, StarError>
where
    F: Fn(f64, f64) -> f64,
{
    // The outer integrand can only report domain errors, so any other inner
    // failure is parked here and the outer pass is aborted.
    let failure: Cell<Option<StarError>> = Cell::new(None);
    let abort = |y: f64| EvalDomainError {
        node: NodeKind::Log,
        x: y,
        reason: DomainReason::LogNonPositive,
    };
    let outer_integrand = |y: f64| -> Result<f64, EvalDomainError> {
        let inner = integrate_fallible(
            |x| {
                let v = f(x, y);
                if v > 0.0 {
                    Ok(v.ln())
                } else if v == 0.0 {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Err(EvalDomainError {
                        node: NodeKind::Log,
                        x,
                        reason: DomainReason::LogNonPositive,
                    })
                }
            },
            Interval::new(inner_lower, y),
            s,
        );
        match inner {
            Ok(r) if r.converged => Ok(r.value),
            Ok(r) => {
                failure.set(Some(StarError::NonConvergence(r)));
                Err(abort(y))
            }
            Err(e) => {
                failure.set(Some(e.into()));
                Err(abort(y))
            }
        }
    };
    let outer_result = integrate_fallible(outer_integrand, outer, s);
    if let Some(e) = failure.get() {
        return Err(e);
    }
    let r = outer_result?;
    if !r.converged {
        return Err(StarError::NonConvergence(r));
    }
    Ok(StarResult::from_log(r.value, r.error_estimate))
}
