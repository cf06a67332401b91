//! Canonicalising simplifier.
//!
//! Sums are flattened into `constant + Σ cᵢ·mᵢ` with like monomials merged;
//! products into `coeff · Π baseⱼ^pⱼ · exp(Σ …)` with equal bases merged.
//! Operands are ordered by [`Expr::canonical_cmp`], so two trees that differ
//! only by commutation or constant placement simplify to the same tree.
//!
//! Power merging is restricted to rewrites that hold wherever the input is
//! defined: an integer outer exponent always distributes, a non-integer one
//! only over factors that are known positive (or whose own non-integer
//! exponent already forces a non-negative base). `exp(log u) -> u` is applied
//! unconditionally; it is valid for `u > 0`, which is where the input is
//! defined.

use std::f64::consts::{E, PI};

use super::{is_integer, Expr};

/// Simplified, pointwise-equal tree.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var => e.clone(),
        Expr::Add(..) | Expr::Sub(..) => {
            let mut sum = Sum::default();
            sum.absorb_raw(e, 1.0);
            sum.build()
        }
        Expr::Mul(..) | Expr::Div(..) | Expr::Neg(_) | Expr::Exp(_) | Expr::Pow(..) => {
            let mut p = Product::one();
            p.absorb_raw(e, 1.0);
            p.build()
        }
        Expr::Log(u) => simplify_log(simplify(u)),
        Expr::Sqrt(u) => match simplify(u) {
            Expr::Const(c) if c >= 0.0 => Expr::Const(c.sqrt()),
            other => Expr::sqrt(other),
        },
    }
}

fn simplify_log(u: Expr) -> Expr {
    match u {
        Expr::Const(c) if c > 0.0 => Expr::Const(c.ln()),
        Expr::Exp(v) => *v,
        other => Expr::log(other),
    }
}

fn pow_or_base(base: Expr, p: f64) -> Expr {
    if p == 1.0 {
        base
    } else {
        Expr::Pow(Box::new(base), Box::new(Expr::Const(p)))
    }
}

fn known_positive(e: &Expr) -> bool {
    match e {
        Expr::Const(c) => *c > 0.0,
        Expr::Exp(_) => true,
        _ => false,
    }
}

fn fold_product(items: Vec<Expr>) -> Option<Expr> {
    items.into_iter().reduce(|acc, f| acc * f)
}

/// `constant + Σ coeff·mono` over canonical, non-constant monomials.
#[derive(Debug, Default, Clone)]
struct Sum {
    constant: f64,
    terms: Vec<(f64, Expr)>,
}

impl Sum {
    fn add_term(&mut self, coeff: f64, mono: Expr) {
        if coeff == 0.0 {
            return;
        }
        if let Some(slot) = self.terms.iter_mut().find(|(_, m)| *m == mono) {
            slot.0 += coeff;
        } else {
            self.terms.push((coeff, mono));
        }
    }

    fn add_constant(&mut self, v: f64) {
        let next = self.constant + v;
        if next.is_finite() {
            self.constant = next;
        } else {
            self.add_term(1.0, Expr::Const(v));
        }
    }

    /// Absorb a not-yet-simplified expression.
    fn absorb_raw(&mut self, e: &Expr, scale: f64) {
        match e {
            Expr::Add(a, b) => {
                self.absorb_raw(a, scale);
                self.absorb_raw(b, scale);
            }
            Expr::Sub(a, b) => {
                self.absorb_raw(a, scale);
                self.absorb_raw(b, -scale);
            }
            Expr::Neg(a) => self.absorb_raw(a, -scale),
            _ => self.absorb(&simplify(e), scale),
        }
    }

    /// Absorb a canonical expression.
    fn absorb(&mut self, t: &Expr, scale: f64) {
        match t {
            Expr::Add(a, b) => {
                self.absorb(a, scale);
                self.absorb(b, scale);
            }
            Expr::Sub(a, b) => {
                self.absorb(a, scale);
                self.absorb(b, -scale);
            }
            Expr::Const(c) => self.add_constant(scale * c),
            _ => {
                let p = Product::of(t);
                let coeff = scale * p.coeff;
                if coeff == 0.0 {
                    return;
                }
                if !coeff.is_finite() {
                    self.add_term(scale, t.clone());
                    return;
                }
                match p.single_sum_factor() {
                    Some(inner) => self.absorb(inner, coeff),
                    None => {
                        let mono = p.with_coeff(1.0).build();
                        match mono {
                            Expr::Const(v) => self.add_constant(coeff * v),
                            m => self.add_term(coeff, m),
                        }
                    }
                }
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|(c, _)| *c == 0.0)
    }

    fn build(mut self) -> Expr {
        self.terms.retain(|(c, _)| *c != 0.0);
        self.terms.sort_by(|a, b| a.1.canonical_cmp(&b.1));
        let mut acc: Option<Expr> = None;
        for (c, mono) in self.terms {
            acc = Some(match acc {
                None => scaled(c, &mono),
                Some(prev) if c < 0.0 => prev - scaled(-c, &mono),
                Some(prev) => prev + scaled(c, &mono),
            });
        }
        match acc {
            None => Expr::Const(self.constant),
            Some(e) if self.constant > 0.0 => e + Expr::Const(self.constant),
            Some(e) if self.constant < 0.0 => e - Expr::Const(-self.constant),
            Some(e) => e,
        }
    }
}

fn scaled(c: f64, mono: &Expr) -> Expr {
    let mut p = Product::of(mono);
    let coeff = p.coeff * c;
    if coeff.is_finite() {
        p.coeff = coeff;
        p.build()
    } else {
        Expr::Const(c) * mono.clone()
    }
}

/// `coeff · Π base^p · exp(exponent)`.
#[derive(Debug, Clone)]
struct Product {
    coeff: f64,
    factors: Vec<(Expr, f64)>,
    exponent: Sum,
}

impl Product {
    fn one() -> Self {
        Product {
            coeff: 1.0,
            factors: Vec::new(),
            exponent: Sum::default(),
        }
    }

    /// Decompose a canonical expression.
    fn of(t: &Expr) -> Self {
        let mut p = Product::one();
        p.absorb(t, 1.0);
        p
    }

    fn with_coeff(mut self, c: f64) -> Self {
        self.coeff = c;
        self
    }

    /// The lone `Add`/`Sub` factor when the product is `coeff · (sum)`.
    fn single_sum_factor(&self) -> Option<&Expr> {
        match self.factors.as_slice() {
            [(base @ (Expr::Add(..) | Expr::Sub(..)), p)] if *p == 1.0 && self.exponent.is_zero() => {
                Some(base)
            }
            _ => None,
        }
    }

    fn push_factor(&mut self, base: Expr, p: f64) {
        if p == 0.0 {
            return;
        }
        if let Some(slot) = self.factors.iter_mut().find(|(b, _)| *b == base) {
            slot.1 += p;
        } else {
            self.factors.push((base, p));
        }
    }

    fn scale_coeff(&mut self, v: f64) -> bool {
        let next = self.coeff * v;
        if next.is_finite() && !(next == 0.0 && v != 0.0 && self.coeff != 0.0) {
            self.coeff = next;
            true
        } else {
            false
        }
    }

    /// Absorb a not-yet-simplified expression raised to `p`.
    fn absorb_raw(&mut self, e: &Expr, p: f64) {
        let integral = is_integer(p);
        match e {
            Expr::Mul(a, b) if integral => {
                self.absorb_raw(a, p);
                self.absorb_raw(b, p);
            }
            Expr::Div(a, b) if integral => {
                self.absorb_raw(a, p);
                self.absorb_raw(b, -p);
            }
            Expr::Neg(a) if integral => {
                if (p / 2.0).fract() != 0.0 {
                    self.coeff = -self.coeff;
                }
                self.absorb_raw(a, p);
            }
            Expr::Exp(u) => self.absorb_exp(&simplify(u), p),
            Expr::Pow(b, g) => {
                let g = simplify(g);
                match g {
                    Expr::Const(q) => self.absorb_pow(&simplify(b), q, p),
                    g if g.contains_var() => {
                        let rewritten = Expr::exp(g * Expr::log(simplify(b)));
                        self.absorb_raw(&rewritten, p);
                    }
                    g => self.push_factor(Expr::Pow(Box::new(simplify(b)), Box::new(g)), p),
                }
            }
            _ => self.absorb(&simplify(e), p),
        }
    }

    /// Absorb a canonical expression raised to `p`.
    fn absorb(&mut self, t: &Expr, p: f64) {
        let integral = is_integer(p);
        match t {
            Expr::Const(c) => {
                let v = if p == 1.0 { *c } else { c.powf(p) };
                if !(v.is_finite() && self.scale_coeff(v)) {
                    self.push_factor(t.clone(), p);
                }
            }
            Expr::Mul(a, b) if integral => {
                self.absorb(a, p);
                self.absorb(b, p);
            }
            Expr::Div(a, b) if integral => {
                self.absorb(a, p);
                self.absorb(b, -p);
            }
            Expr::Neg(a) if integral => {
                if (p / 2.0).fract() != 0.0 {
                    self.coeff = -self.coeff;
                }
                self.absorb(a, p);
            }
            Expr::Pow(b, q) => match **q {
                Expr::Const(q) => self.absorb_pow(b, q, p),
                _ => self.push_factor(t.clone(), p),
            },
            Expr::Exp(u) => self.absorb_exp(u, p),
            _ => self.push_factor(t.clone(), p),
        }
    }

    /// `(base^q)^p` for canonical `base`.
    fn absorb_pow(&mut self, base: &Expr, q: f64, p: f64) {
        // (b^q)^p = b^(qp) when p is an integer, when q is not (then b >= 0
        // wherever b^q is defined), or when b is known positive.
        if is_integer(p) || !is_integer(q) || known_positive(base) {
            self.absorb(base, q * p);
        } else {
            self.push_factor(pow_or_base(base.clone(), q), p);
        }
    }

    /// `exp(u)^p` for canonical `u`.
    fn absorb_exp(&mut self, u: &Expr, p: f64) {
        let mut s = Sum::default();
        s.absorb(u, p);
        if s.constant != 0.0 {
            let v = s.constant.exp();
            if !(v.is_finite() && v >= f64::MIN_POSITIVE && self.scale_coeff(v)) {
                self.exponent.add_constant(s.constant);
            }
        }
        for (c, mono) in s.terms {
            match mono {
                Expr::Log(v) => self.absorb(&v, c),
                m => self.exponent.add_term(c, m),
            }
        }
    }

    fn build(self) -> Expr {
        if self.coeff == 0.0 {
            return Expr::Const(0.0);
        }
        let mut num = Vec::new();
        let mut den = Vec::new();
        for (base, p) in self.factors {
            if p > 0.0 {
                num.push(pow_or_base(base, p));
            } else if p < 0.0 {
                den.push(pow_or_base(base, -p));
            }
        }
        if !self.exponent.is_zero() {
            num.push(Expr::exp(self.exponent.build()));
        }
        num.sort_by(|a, b| a.canonical_cmp(b));
        den.sort_by(|a, b| a.canonical_cmp(b));

        let negative = self.coeff < 0.0;
        let magnitude = self.coeff.abs();
        let reciprocal = 1.0 / magnitude;
        let (mut num_coeff, den_coeff) = if magnitude == 1.0 {
            (1.0, 1.0)
        } else if !is_integer(magnitude) && is_integer(reciprocal) {
            (1.0, reciprocal)
        } else if magnitude == 1.0 / E {
            (1.0, E)
        } else if magnitude == 1.0 / PI {
            (1.0, PI)
        } else {
            (magnitude, 1.0)
        };
        let mut sign_applied = false;
        if negative && num_coeff != 1.0 {
            num_coeff = -num_coeff;
            sign_applied = true;
        }

        let num_expr = match (num_coeff == 1.0, fold_product(num)) {
            (_, None) => Expr::Const(num_coeff),
            (true, Some(n)) => n,
            (false, Some(n)) => Expr::Const(num_coeff) * n,
        };
        let den_items: Vec<Expr> = if den_coeff != 1.0 {
            std::iter::once(Expr::Const(den_coeff)).chain(den).collect()
        } else {
            den
        };
        let e = match fold_product(den_items) {
            None => num_expr,
            Some(d) => num_expr / d,
        };
        if negative && !sign_applied {
            match e {
                Expr::Const(c) => Expr::Const(-c),
                other => -other,
            }
        } else {
            e
        }
    }
}
