//! Text rendering in the same grammar the parser accepts.
//!
//! Output is compact (no spaces) and parenthesised only where the grammar's
//! precedence would otherwise regroup the tree, so
//! `parse(render(parse(t))) == parse(t)`.

use std::f64::consts::{E, PI};

use super::Expr;

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => SUM,
        Expr::Mul(..) | Expr::Div(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Const(c) if *c < 0.0 => UNARY,
        Expr::Pow(..) | Expr::Exp(_) => POWER,
        Expr::Const(_) | Expr::Var | Expr::Log(_) | Expr::Sqrt(_) => ATOM,
    }
}

pub(super) fn render(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn write_at(e: &Expr, min: u8, out: &mut String) {
    if precedence(e) < min {
        out.push('(');
        write(e, out);
        out.push(')');
    } else {
        write(e, out);
    }
}

fn write_number(c: f64, out: &mut String) {
    if c == E {
        out.push('e');
    } else if c == PI {
        out.push_str("pi");
    } else if c == 0.0 {
        out.push('0');
    } else if c < 0.0 {
        out.push('-');
        write_number(-c, out);
    } else {
        // Display for f64 is the shortest round-tripping decimal and never
        // switches to exponent notation.
        out.push_str(&c.to_string());
    }
}

fn write(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(c) => write_number(*c, out),
        Expr::Var => out.push('x'),
        Expr::Add(a, b) => {
            write_at(a, SUM, out);
            out.push('+');
            write_at(b, PRODUCT, out);
        }
        Expr::Sub(a, b) => {
            write_at(a, SUM, out);
            out.push('-');
            write_at(b, PRODUCT, out);
        }
        Expr::Mul(a, b) => {
            write_at(a, PRODUCT, out);
            out.push('*');
            write_at(b, UNARY, out);
        }
        Expr::Div(a, b) => {
            write_at(a, PRODUCT, out);
            out.push('/');
            write_at(b, UNARY, out);
        }
        Expr::Pow(b, p) => {
            write_at(b, ATOM, out);
            out.push('^');
            write_at(p, UNARY, out);
        }
        Expr::Exp(u) => {
            out.push_str("e^");
            write_at(u, UNARY, out);
        }
        Expr::Log(u) => {
            out.push_str("log(");
            write(u, out);
            out.push(')');
        }
        Expr::Sqrt(u) => {
            out.push_str("sqrt(");
            write(u, out);
            out.push(')');
        }
        Expr::Neg(u) => {
            out.push('-');
            write_at(u, UNARY, out);
        }
    }
}
