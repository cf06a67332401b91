//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use std::f64::consts::E;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use starcalc::analysis::{
    area_integrand, classify_improper_constant, concavity_sides, inequality_suite, mult_metric,
    mvt_star_integral, normalized_margin, theorem_sides, ImproperClass, InequalityId,
};
use starcalc::expr::{parse, Expr};
use starcalc::quad::{integrate, product_riemann, Interval, QuadSettings};
use starcalc::series::{log_identity_residual, taylor_coefficients, taylor_evaluate};
use starcalc::star::{
    star_derivative, star_derivative_closed, star_integral_closed, star_integral_definite,
    table_samples, DerivativeMethod,
};
use starcalc::transforms::{double_star_integral, g_integral, GTransform};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn settings() -> QuadSettings {
    QuadSettings::default()
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs()
    }
}

fn star(f: &Expr, a: f64, b: f64) -> f64 {
    star_integral_definite(f, Interval::new(a, b), &settings()).unwrap().value
}

fn identity_star_integral() -> Outcome {
    let x = parse("x").unwrap();
    let quad = star(&x, 0.0, 1.0);
    ensure!((quad - 1.0 / E).abs() <= 1e-9, "quadrature gave {quad}");
    let errs: Vec<f64> = [10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| rel_err(product_riemann(|t| t, Interval::new(0.0, 1.0), n).unwrap(), 1.0 / E))
        .collect();
    ensure!(errs[0] <= 1e-2, "n=1e4 relative error {:e}", errs[0]);
    ensure!(errs[2] <= 1e-3, "n=1e6 relative error {:e}", errs[2]);
    ensure!(errs[0] > errs[1] && errs[1] > errs[2], "errors not decreasing: {errs:?}");
    Ok(format!("|quad - 1/e| = {:.1e}, riemann rel errors {:.1e} > {:.1e} > {:.1e}", (quad - 1.0 / E).abs(), errs[0], errs[1], errs[2]))
}

fn reciprocal_exponential() -> Outcome {
    let f = parse("e^(1/x)").unwrap();
    let v = star(&f, 1.0, 2.0);
    ensure!((v - 2.0).abs() <= 1e-10, "star-integral gave {v}");
    let c = mvt_star_integral(&f, Interval::new(1.0, 2.0), 1e-12).map_err(|e| e.to_string())?.c;
    let want = 1.0 / 2f64.ln();
    ensure!((c - want).abs() <= 1e-8, "mvt point {c}, expected {want}");
    Ok(format!("|value - 2| = {:.1e}, |c - 1/log 2| = {:.1e}", (v - 2.0).abs(), (c - want).abs()))
}

fn ftc_round_trip() -> Outcome {
    let patterns = table_samples();
    ensure!(patterns.len() == 7, "expected 7 patterns, found {}", patterns.len());
    let mut worst = 0.0f64;
    for p in &patterns {
        let entry = star_integral_closed(&p.integrand()).ok_or(format!("{p} did not match itself"))?;
        let back = star_derivative_closed(&entry.antiderivative);
        for j in 0..20 {
            let x = 0.3 + 2.7 * j as f64 / 19.0;
            let want = p.integrand().eval(x).map_err(|e| e.to_string())?;
            let got = back.eval(x).map_err(|e| e.to_string())?;
            let r = rel_err(got, want);
            ensure!(r <= 1e-9, "{p} at {x}: {got} vs {want}");
            worst = worst.max(r);
        }
    }
    Ok(format!("7 patterns x 20 points, worst relative error {worst:.1e}"))
}

fn star_derivative_table() -> Outcome {
    let table = [
        ("x^2.5", "e^(2.5/x)", (|x: f64| (2.5 / x).exp()) as fn(f64) -> f64),
        ("e^x", "e", |_| E),
        ("e^(e^x)", "e^(e^x)", |x| x.exp().exp()),
        ("x^x", "e*x", |x| E * x),
        ("(3*x)^x", "e*3*x", |x| E * 3.0 * x),
        ("2^x", "2", |_| 2.0),
        ("2*x+3", "e^(2/(2*x+3))", |x| (2.0 / (2.0 * x + 3.0)).exp()),
    ];
    let mut worst = 0.0f64;
    for (f, closed, oracle) in table {
        let f = parse(f).unwrap();
        let symbolic = star_derivative_closed(&f);
        let expected = parse(closed).unwrap().simplify();
        ensure!(symbolic == expected, "{f}: simplified to {symbolic}, expected {expected}");
        for j in 0..10 {
            let x = 0.4 + 0.2 * j as f64;
            let q = star_derivative(&f, x, 1, DerivativeMethod::Numeric).map_err(|e| e.to_string())?;
            let r = rel_err(q, oracle(x));
            ensure!(r <= 1e-6, "{f} at {x}: numeric {q} vs {}", oracle(x));
            worst = worst.max(r);
        }
    }
    Ok(format!("7 forms match symbolically, numeric quotient worst relative error {worst:.1e}"))
}

fn inequality_suites() -> Outcome {
    let mut parts = Vec::new();
    for id in InequalityId::ALL {
        let r = inequality_suite(id, 1000, 2024).map_err(|e| e.to_string())?;
        ensure!(r.violations == 0, "{id}: {} violations, worst margin {:e}", r.violations, r.worst_margin);
        parts.push(format!("{id} {:.1e}", r.worst_margin));
    }
    let ln_f = |x: f64| 0.2 + 0.5 * x - 0.7 * x * x;
    let (l, r) = concavity_sides(ln_f, ln_f, 0.35, Interval::new(-0.5, 1.5)).map_err(|e| e.to_string())?;
    ensure!((l - r).abs() <= 1e-10, "f = g equality gap {:e}", (l - r).abs());
    let (l2, r2) = theorem_sides(&[1.0, 1.0]);
    ensure!((l2, r2) == (2.0, 2.0) && normalized_margin(l2, r2) == 0.0, "k=1 all-ones gave {l2} vs {r2}");
    Ok(format!("0 violations in 5 x 1000 trials; worst margins: {}", parts.join(", ")))
}

fn taylor_product() -> Outcome {
    let tp = taylor_coefficients(&parse("e^x").unwrap(), 0.0, 6).map_err(|e| e.to_string())?;
    let a = tp.coefficients();
    ensure!(a[0] == 1.0 && a[1] == E && a[2..].iter().all(|v| *v == 1.0), "e^x coefficients {a:?}");
    let at2 = taylor_evaluate(&tp, 2.0).value;
    ensure!(rel_err(at2, E * E) <= 1e-15, "e^x reconstruction at 2 gave {at2}");
    let tp = taylor_coefficients(&parse("x").unwrap(), 1.0, 30).map_err(|e| e.to_string())?;
    let v = taylor_evaluate(&tp, 1.5).value;
    ensure!((v - 1.5).abs() <= 1e-6, "x at 1.5 gave {v}");
    let mut worst = 0.0f64;
    for f in ["x", "e^x", "x^x"] {
        let f = parse(f).unwrap();
        for i in 1..=6 {
            for c in [0.5, 1.0, 2.0] {
                let r = log_identity_residual(&f, c, i).map_err(|e| e.to_string())?;
                ensure!(r <= 1e-10, "{f}, i={i}, c={c}: residual {r:e}");
                worst = worst.max(r);
            }
        }
    }
    Ok(format!("|x series - 1.5| = {:.1e}, worst log-identity residual {worst:.1e}", (v - 1.5).abs()))
}

fn g_transforms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = settings();
    for case in 0..20 {
        let (c0, c2, k) = (rng.gen_range(0.1..3.0), rng.gen_range(0.0..2.0), rng.gen_range(-1.5..1.5));
        let f = parse(&format!("{c0}+{c2}*x^2+e^({k}*x)")).unwrap();
        let a: f64 = rng.gen_range(-2.0..1.0);
        let iv = Interval::new(a, a + rng.gen_range(0.1..2.0));
        let id = g_integral(&f, GTransform::Identity, iv, &s).map_err(|e| e.to_string())?;
        let direct = integrate(|x| f.eval(x).unwrap(), iv, &s).map_err(|e| e.to_string())?.value;
        ensure!((id - direct).abs() <= 1e-12 * direct.abs().max(1.0), "case {case}: identity {id} vs {direct}");
        let ex = g_integral(&f, GTransform::Exp, iv, &s).map_err(|e| e.to_string())?;
        let st = star_integral_definite(&f, iv, &s).map_err(|e| e.to_string())?.value;
        ensure!(rel_err(ex, st) <= 1e-10, "case {case}: exp {ex} vs star {st}");
    }
    let sq = g_integral(&parse("x").unwrap(), GTransform::Square, Interval::new(0.0, 1.0), &s).map_err(|e| e.to_string())?;
    ensure!((sq - 4.0 / 9.0).abs() <= 1e-10, "square gave {sq}");
    let d = double_star_integral(|_, _| 3.0, 0.0, Interval::new(0.0, 2.0), &s).map_err(|e| e.to_string())?;
    ensure!((d.value - 9.0).abs() <= 1e-8, "double star-integral gave {}", d.value);
    Ok(format!("20 random cases agree, |square - 4/9| = {:.1e}, |double - 9| = {:.1e}", (sq - 4.0 / 9.0).abs(), (d.value - 9.0).abs()))
}

fn improper_constants() -> Outcome {
    let expected = [
        (0.5, ImproperClass::ConvergesToValue(0.0)),
        (1.0, ImproperClass::ConvergesToValue(1.0)),
        (3.0, ImproperClass::DivergesToInfinity),
    ];
    for (k, class) in expected {
        let got = classify_improper_constant(k).map_err(|e| e.to_string())?;
        ensure!(got == class, "k={k}: {got:?}");
        let vals: Vec<f64> = [10.0, 100.0, 500.0].iter().map(|&x| star(&Expr::Const(k), 0.0, x)).collect();
        for (v, x) in vals.iter().zip([10.0, 100.0, 500.0]) {
            ensure!(rel_err(*v, k.powf(x)) <= 1e-10, "k={k}, X={x}: {v} vs {}", k.powf(x));
        }
        let trend_ok = match class {
            ImproperClass::ConvergesToValue(0.0) => vals.windows(2).all(|w| w[1] < w[0]),
            ImproperClass::ConvergesToValue(l) => vals.iter().all(|v| *v == l),
            ImproperClass::DivergesToInfinity => vals.windows(2).all(|w| w[1] > w[0]),
        };
        ensure!(trend_ok, "k={k}: k^X values {vals:?} disagree with {class:?}");
    }
    Ok("k = 0.5, 1, 3 classified as ->0, ->1, ->inf and match k^X at X = 10, 100, 500".into())
}

fn area_mismatch() -> Outcome {
    let g = area_integrand(&parse("x").unwrap()).ok_or("x has no closed form")?;
    let area = integrate(|x| g.eval(x).unwrap(), Interval::new(0.0, 1.0), &settings())
        .map_err(|e| e.to_string())?
        .value;
    ensure!((area - (1.0 / E - 1.0)).abs() <= 1e-6, "ordinary integral {area}");
    let st = star(&parse("x").unwrap(), 0.0, 1.0);
    ensure!((st - area - 1.0).abs() <= 1e-6, "difference {}", st - area);
    Ok(format!("area {area:.12}, star-integral {st:.12}, difference {:.12}", st - area))
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for _ in 0..10_000 {
        let [x, y, z]: [f64; 3] = std::array::from_fn(|_| 10f64.powf(rng.gen_range(-4.0..4.0)));
        let d = |p, q| mult_metric(p, q).unwrap();
        let ok = d(x, y) >= 1.0
            && d(x, x) == 1.0
            && (x == y || d(x, y) > 1.0)
            && d(x, y) == d(y, x)
            && d(x, z) <= d(x, y) * d(y, z) * (1.0 + 4.0 * f64::EPSILON);
        if !ok {
            violations += 1;
        }
    }
    ensure!(violations == 0, "{violations} violating triples");
    Ok("10000 triples, 0 violations".into())
}

/// Random expression that stays finite and positive on `[0.5, 2]`.
fn random_positive(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.5) { Expr::Var } else { Expr::Const(rng.gen_range(0.5..3.0)) };
    }
    let mut sub = || random_positive(rng, depth - 1);
    let (a, b) = (sub(), sub());
    match rng.gen_range(0..7) {
        0 => a + b,
        1 => a * b,
        2 => a / b,
        3 => Expr::pow(a, Expr::Const(rng.gen_range(-2.0..2.0))),
        4 => Expr::pow(a, b),
        5 => Expr::exp(a / Expr::Const(4.0)),
        _ => Expr::sqrt(a),
    }
}

fn random_smooth(rng: &mut ChaCha8Rng) -> Expr {
    let a = random_positive(rng, 3);
    match rng.gen_range(0..4) {
        0 => a,
        1 => a - random_positive(rng, 3),
        2 => Expr::log(a),
        _ => -a,
    }
}

/// Central difference refined by Richardson extrapolation over shrinking
/// steps (Ridders' scheme), with its error estimate; `None` if any sample
/// leaves the domain.
fn ridders(f: &Expr, x: f64, h0: f64) -> Option<(f64, f64)> {
    const SHRINK: f64 = 1.4;
    const N: usize = 10;
    let central = |h: f64| Some((f.eval(x + h).ok()? - f.eval(x - h).ok()?) / (2.0 * h));
    let mut table = [[0.0f64; N]; N];
    let mut h = h0;
    table[0][0] = central(h)?;
    let (mut best, mut err) = (table[0][0], f64::INFINITY);
    for i in 1..N {
        h /= SHRINK;
        table[0][i] = central(h)?;
        let mut factor = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * factor - table[j - 1][i - 1]) / (factor - 1.0);
            factor *= SHRINK * SHRINK;
            let e = (table[j][i] - table[j - 1][i]).abs().max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    Some((best, err))
}

/// Best Ridders estimate over a few starting steps, so steep integrands get
/// a step matched to their scale.
fn reference_derivative(f: &Expr, x: f64) -> Option<f64> {
    [0.1, 1e-2, 1e-3, 1e-4]
        .iter()
        .filter_map(|&h| ridders(f, x, h))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(d, _)| d)
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_starcalc")
}

fn envelope_ok(v: &Value) -> bool {
    let Some(obj) = v.as_object() else { return false };
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    keys == ["command", "diagnostics", "inputs", "result", "version"]
        && obj["command"].is_string()
        && obj["version"].is_string()
        && obj["inputs"].is_object()
        && obj["diagnostics"].as_array().is_some_and(|ds| {
            ds.iter().all(|d| {
                d["message"].is_string()
                    && matches!(d["level"].as_str(), Some("info" | "warning" | "error"))
            })
        })
}

fn parser_and_cli() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..500 {
        let e = random_smooth(&mut rng);
        // Round trip through the parser so the corpus exercises it too.
        let f = parse(&e.to_string()).map_err(|err| format!("{e}: {err}"))?;
        let d = f.differentiate();
        for _ in 0..4 {
            let x: f64 = rng.gen_range(0.6..1.9);
            let Ok(exact) = d.eval(x) else { continue };
            let Some(fd) = reference_derivative(&f, x) else { continue };
            ensure!((exact - fd).abs() <= 1e-5 * (1.0 + exact.abs()), "{f} at {x}: {exact} vs {fd}");
            checked += 1;
        }
    }
    let commands: [&[&str]; 9] = [
        &["starint", "x", "--from", "0", "--to", "1"],
        &["starint", "x", "--from", "0", "--to", "1", "--method", "riemann"],
        &["starderiv", "x^x", "--at", "3"],
        &["antiderivative", "e^x"],
        &["taylor", "x", "--center", "1", "--terms", "30", "--eval", "1.5"],
        &["mvt", "e^(1/x)", "--from", "1", "--to", "2", "--kind", "integral"],
        &["check", "--inequality", "eq5", "--trials", "500", "--seed", "7"],
        &["gtransform", "x", "--g", "square", "--from", "0", "--to", "1"],
        &["antiderivative", "x^2+1"],
    ];
    for args in commands {
        let run = || Command::new(binary()).args(args).args(["--format", "json"]).output().unwrap().stdout;
        let first = run();
        ensure!(first == run(), "{args:?} output differs between runs");
        let v: Value = serde_json::from_slice(&first).map_err(|e| format!("{args:?}: {e}"))?;
        ensure!(envelope_ok(&v), "{args:?}: malformed envelope {v}");
    }
    Ok(format!("{checked} derivative samples within 1e-5, {} CLI envelopes valid and bit-identical", commands.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("star-integral of x on [0,1]", identity_star_integral),
        ("star-integral of e^(1/x) on [1,2] and its mean-value point", reciprocal_exponential),
        ("FTC round trip over the closed-form table", ftc_round_trip),
        ("star-derivative table", star_derivative_table),
        ("inequality suite", inequality_suites),
        ("Taylor product", taylor_product),
        ("G-transform consistency", g_transforms),
        ("improper classification", improper_constants),
        ("area versus star-integral mismatch", area_mismatch),
        ("multiplicative metric axioms", metric_axioms),
        ("parser, derivatives and CLI envelopes", parser_and_cli),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        match outcome {
            Ok(detail) => println!("criterion {} PASS: {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL: {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}
