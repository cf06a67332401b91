use super::Expr;

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

/// Unsimplified derivative with respect to `x`.
pub(super) fn derivative(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => c(0.0),
        Expr::Var => c(1.0),
        Expr::Add(a, b) => derivative(a) + derivative(b),
        Expr::Sub(a, b) => derivative(a) - derivative(b),
        Expr::Mul(a, b) => derivative(a) * (**b).clone() + (**a).clone() * derivative(b),
        // k/v as k·v^-1 keeps repeated derivatives of reciprocals compact.
        Expr::Div(a, b) if !a.contains_var() => {
            -((**a).clone() * derivative(b) * Expr::Pow(b.clone(), Box::new(c(-2.0))))
        }
        Expr::Div(a, b) => {
            let num = derivative(a) * (**b).clone() - (**a).clone() * derivative(b);
            num / Expr::Pow(b.clone(), Box::new(c(2.0)))
        }
        Expr::Pow(base, p) if !p.contains_var() => {
            let lowered = Expr::Pow(base.clone(), Box::new((**p).clone() - c(1.0)));
            (**p).clone() * lowered * derivative(base)
        }
        Expr::Pow(base, p) => derivative(&Expr::exp((**p).clone() * Expr::log((**base).clone()))),
        Expr::Exp(u) => e.clone() * derivative(u),
        Expr::Log(u) => derivative(u) / (**u).clone(),
        Expr::Sqrt(u) => derivative(u) / (c(2.0) * e.clone()),
        Expr::Neg(u) => -derivative(u),
    }
}
