mod common;

use std::f64::consts::E;

use common::{forward_interval, positive_function, rel_close};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starcalc::analysis::{
    amgm_sides, area_integrand, cauchy_schwarz_sides, classify_improper_constant, concavity_sides,
    inequality_suite, lemma_sides, mult_metric, mvt_star_derivative, mvt_star_integral, theorem_sides,
    ImproperClass, InequalityId, MvtFlag, VIOLATION_TOL,
};
use starcalc::expr::{parse, Expr};
use starcalc::quad::{integrate, Interval, QuadSettings};
use starcalc::star::star_integral_definite;

fn s() -> QuadSettings {
    QuadSettings::default()
}

#[test]
fn mvt_worked_examples() {
    let sol = mvt_star_integral(&parse("e^(1/x)").unwrap(), Interval::new(1.0, 2.0), 1e-12).unwrap();
    assert!((sol.c - 1.0 / 2f64.ln()).abs() < 1e-8);
    assert_eq!(sol.flag, None);

    let sol = mvt_star_integral(&parse("x").unwrap(), Interval::new(0.0, 1.0), 1e-12).unwrap();
    assert!((sol.c - 1.0 / E).abs() < 1e-8);

    let sol = mvt_star_derivative(&parse("x^2").unwrap(), Interval::new(1.0, 2.0), 1e-12).unwrap();
    assert!((sol.c - 1.0 / 2f64.ln()).abs() < 1e-8);

    let sol = mvt_star_integral(&parse("2.5").unwrap(), Interval::new(1.0, 4.0), 1e-12).unwrap();
    assert_eq!((sol.c, sol.flag), (2.5, Some(MvtFlag::ConstantFunction)));
}

#[test]
fn rolle_case_has_unit_star_derivative() {
    // f(0) = f(3) for x(3 - x) + 1.
    let f = parse("x*(3-x)+1").unwrap();
    let sol = mvt_star_derivative(&f, Interval::new(0.0, 3.0), 1e-12).unwrap();
    let star = Expr::exp(f.differentiate() / f.clone()).eval(sol.c).unwrap();
    assert!((star - 1.0).abs() < 1e-10);
    assert!((sol.c - 1.5).abs() < 1e-10);
}

#[test]
fn suite_reports_no_violations() {
    for id in InequalityId::ALL {
        let r = inequality_suite(id, 1000, 20240501).unwrap();
        assert_eq!(r.trials, 1000);
        assert_eq!(r.violations, 0, "{id}: worst margin {}", r.worst_margin);
        assert!(r.worst_margin >= -VIOLATION_TOL, "{id}");
    }
}

#[test]
fn suite_is_reproducible() {
    for id in InequalityId::ALL {
        assert_eq!(inequality_suite(id, 200, 7).unwrap(), inequality_suite(id, 200, 7).unwrap());
        // Per-trial streams: a prefix run sees the same trials.
        let short = inequality_suite(id, 20, 7).unwrap();
        let long = inequality_suite(id, 200, 7).unwrap();
        assert!(long.worst_margin <= short.worst_margin);
    }
}

#[test]
fn equality_cases() {
    let iv = Interval::new(-0.4, 1.3);
    let ln_f = |x: f64| 0.3 - 0.8 * x + 0.2 * x * x * x;
    for s in [0.0, 0.25, 0.5, 1.0] {
        let (l, r) = concavity_sides(ln_f, ln_f, s, iv).unwrap();
        assert!((l - r).abs() <= 1e-10, "s={s}: {l} vs {r}");
    }
    // Equality in the star Cauchy-Schwarz bound needs f = g as well.
    let (l, r) = cauchy_schwarz_sides(ln_f, ln_f, iv).unwrap();
    assert!((l - r).abs() <= 1e-10);

    assert_eq!(theorem_sides(&[1.0, 1.0]), (2.0, 2.0));
    assert_eq!(lemma_sides(1.0, 1.0, 1.0), (9.0, 8.0));
    let (l, r) = amgm_sides(&[0.7; 6]);
    assert!((l - r).abs() <= 1e-10);
}

#[test]
fn theorem_equality_along_doubling_sequence() {
    // a = (1, 1, 2, 4, ..., 2^(k-1)) balances every weighted AM-GM step.
    for k in 1..=6 {
        let mut a = vec![1.0];
        a.extend((0..k).map(|i| 2f64.powi(i)));
        let (l, r) = theorem_sides(&a);
        assert!((l - r).abs() <= 1e-12 * r, "k={k}: {l} vs {r}");
    }
}

#[test]
fn improper_classification_matches_powers() {
    let cases = [
        (0.5, ImproperClass::ConvergesToValue(0.0)),
        (1.0, ImproperClass::ConvergesToValue(1.0)),
        (3.0, ImproperClass::DivergesToInfinity),
    ];
    for (k, class) in cases {
        assert_eq!(classify_improper_constant(k).unwrap(), class);
        let values: Vec<f64> = [10.0, 100.0, 500.0]
            .iter()
            .map(|&x| {
                let v = star_integral_definite(&Expr::Const(k), Interval::new(0.0, x), &s()).unwrap().value;
                assert!(rel_close(v, k.powf(x), 1e-10), "k={k} X={x}");
                v
            })
            .collect();
        match class {
            ImproperClass::ConvergesToValue(0.0) => {
                assert!(values.windows(2).all(|w| w[1] < w[0]) && values[2] < 1e-100)
            }
            ImproperClass::ConvergesToValue(limit) => assert!(values.iter().all(|v| *v == limit)),
            ImproperClass::DivergesToInfinity => {
                assert!(values.windows(2).all(|w| w[1] > w[0]) && values[2] > 1e200)
            }
        }
    }
    assert!(classify_improper_constant(-2.0).is_err());
}

#[test]
fn area_integrand_mismatch() {
    let g = area_integrand(&parse("x").unwrap()).unwrap();
    let area = integrate(|x| g.eval(x).unwrap(), Interval::new(0.0, 1.0), &s()).unwrap().value;
    assert!((area - (1.0 / E - 1.0)).abs() < 1e-6);
    let star = star_integral_definite(&parse("x").unwrap(), Interval::new(0.0, 1.0), &s()).unwrap().value;
    assert!((star - area - 1.0).abs() < 1e-6);

    let c = 3.5f64;
    let g = area_integrand(&Expr::Const(c)).unwrap();
    let area = integrate(|x| g.eval(x).unwrap(), Interval::new(0.0, 1.0), &s()).unwrap().value;
    assert!((area - (c - 1.0)).abs() < 1e-10);
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut draw = || 10f64.powf(rng.gen_range(-3.0..3.0));
    for _ in 0..10_000 {
        let (x, y, z) = (draw(), draw(), draw());
        let dxy = mult_metric(x, y).unwrap();
        assert!(dxy >= 1.0);
        assert_eq!(mult_metric(x, x).unwrap(), 1.0);
        assert!(x == y || dxy > 1.0);
        assert_eq!(dxy, mult_metric(y, x).unwrap());
        let bound = dxy * mult_metric(y, z).unwrap();
        assert!(mult_metric(x, z).unwrap() <= bound * (1.0 + 4.0 * f64::EPSILON));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integral_mvt_solution_reproduces_star_integral(f in positive_function(), (a, b) in forward_interval()) {
        let iv = Interval::new(a, b);
        let sol = mvt_star_integral(&f, iv, 1e-12).unwrap();
        prop_assert!(sol.c >= a && sol.c <= b);
        let star = star_integral_definite(&f, iv, &s()).unwrap().value;
        let via_c = f.eval(sol.c).unwrap().powf(b - a);
        prop_assert!((via_c - star).abs() <= 1e-6 * (1.0 + star), "{} vs {}", via_c, star);
    }

    #[test]
    fn derivative_mvt_solution_matches_secant(f in positive_function(), (a, b) in forward_interval()) {
        let iv = Interval::new(a, b);
        let sol = mvt_star_derivative(&f, iv, 1e-12).unwrap();
        let (fa, fb) = (f.eval(a).unwrap(), f.eval(b).unwrap());
        let target = (fb / fa).powf(1.0 / (b - a));
        let star = Expr::exp(f.differentiate() / f.clone()).eval(sol.c).unwrap();
        if sol.flag.is_none() {
            prop_assert!(rel_close(star, target, 1e-6), "{} vs {}", star, target);
        }
        // In logs this is the ordinary mean value theorem for log f.
        let log_slope = (fb.ln() - fa.ln()) / (b - a);
        let log_derivative = f.differentiate().eval(sol.c).unwrap() / f.eval(sol.c).unwrap();
        prop_assert!((log_derivative - log_slope).abs() <= 1e-6 * (1.0 + log_slope.abs()));
    }
}
