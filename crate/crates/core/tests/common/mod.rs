#![allow(dead_code)]

use proptest::prelude::*;
use starcalc::expr::Expr;

/// Expressions that are positive on `[0.5, 2]`.
pub fn positive_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Var),
        (0.5f64..3.0).prop_map(Expr::Const),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / b),
            (inner.clone(), -2.0f64..2.0).prop_map(|(a, k)| Expr::pow(a, Expr::Const(k))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::pow(a, b)),
            inner.clone().prop_map(|a| Expr::exp(a / Expr::Const(4.0))),
            inner.clone().prop_map(Expr::sqrt),
        ]
    })
}

/// Expressions that are finite, but not necessarily positive, on `[0.5, 2]`.
pub fn smooth_expr() -> impl Strategy<Value = Expr> {
    prop_oneof![
        positive_expr(),
        (positive_expr(), positive_expr()).prop_map(|(a, b)| a - b),
        positive_expr().prop_map(Expr::log),
        positive_expr().prop_map(|a| -a),
    ]
}

/// `c0 + c2 x^2 + e^(k x)` with `c0, c2 > 0`.
pub fn positive_function() -> impl Strategy<Value = Expr> {
    (0.1f64..3.0, 0.0f64..2.0, -1.5f64..1.5).prop_map(|(c0, c2, k)| {
        Expr::Const(c0)
            + Expr::Const(c2) * Expr::pow(Expr::Var, Expr::Const(2.0))
            + Expr::exp(Expr::Const(k) * Expr::Var)
    })
}

/// `(a, b)` with `-2 <= a < b <= 2` and `b - a >= 0.05`.
pub fn forward_interval() -> impl Strategy<Value = (f64, f64)> {
    (-2.0f64..1.9, 0.05f64..2.0).prop_map(|(a, len)| (a, (a + len).min(2.0)))
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn central_difference(e: &Expr, x: f64, h: f64) -> Option<f64> {
    Some((e.eval(x + h).ok()? - e.eval(x - h).ok()?) / (2.0 * h))
}
