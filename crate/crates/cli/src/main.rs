mod format;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use starcalc::analysis::{
    inequality_suite, mvt_star_derivative, mvt_star_integral, AnalysisError, InequalityId, MvtFlag,
};
use starcalc::expr::{parse, EvalDomainError, Expr, ParseError};
use starcalc::quad::{product_riemann_ln, Interval, QuadError, QuadSettings};
use starcalc::series::{taylor_coefficients, taylor_evaluate, terms_growing};
use starcalc::star::{
    star_derivative, star_integral_closed, star_integral_definite, DerivativeMethod, StarClass,
    StarError, StarResult,
};
use starcalc::transforms::{g_integral, GTransform};

use format::{g17, num, scalar, to_json};

#[derive(Parser)]
#[command(name = "starcalc", version, about = "Multiplicative (star) calculus engine")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IntMethod {
    Quad,
    Riemann,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DerivMethod {
    Symbolic,
    Numeric,
    OneSided,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MvtKind {
    Integral,
    Derivative,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GName {
    Exp,
    Id,
    Log,
    Square,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleOp {
    StarintCumulative,
    Starderiv,
}

#[derive(clap::Args, Clone, Copy)]
struct QuadArgs {
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    abs_tol: f64,
    #[arg(long, default_value_t = 12)]
    max_levels: usize,
}

impl QuadArgs {
    fn settings(&self) -> QuadSettings {
        QuadSettings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_levels: self.max_levels,
        }
    }

    fn echo(&self, inputs: &mut Map<String, Value>) {
        inputs.insert("rel_tol".into(), num(self.rel_tol));
        inputs.insert("abs_tol".into(), num(self.abs_tol));
        inputs.insert("max_levels".into(), json!(self.max_levels));
    }
}

#[derive(Subcommand)]
enum Command {
    /// Definite star-integral exp(∫ log f) over [from, to].
    #[command(allow_negative_numbers = true)]
    Starint {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, value_enum, default_value_t = IntMethod::Quad)]
        method: IntMethod,
        /// Subintervals for the product-Riemann sum.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Star-derivative exp((d/dx)^order log f) at a point.
    #[command(allow_negative_numbers = true)]
    Starderiv {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long)]
        at: f64,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, value_enum, default_value_t = DerivMethod::Symbolic)]
        method: DerivMethod,
    },
    /// Closed-form star-antiderivative, up to a multiplicative constant C.
    Antiderivative {
        #[arg(allow_hyphen_values = true)]
        expr: String,
    },
    /// Product-form Taylor coefficients, optionally evaluated at a point.
    #[command(allow_negative_numbers = true)]
    Taylor {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long)]
        center: f64,
        #[arg(long)]
        terms: usize,
        #[arg(long)]
        eval: Option<f64>,
    },
    /// Mean-value point for the star-integral or the star-derivative.
    #[command(allow_negative_numbers = true)]
    Mvt {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, value_enum)]
        kind: MvtKind,
        /// Flatness threshold below which the function counts as constant.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Seeded randomized check of one inequality.
    Check {
        /// concavity, eq3, eq4, eq5 or amgm.
        #[arg(long)]
        inequality: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// G-conjugated integral G(∫ G⁻¹(f)).
    #[command(allow_negative_numbers = true)]
    Gtransform {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long, value_enum)]
        g: GName,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// CSV samples on (from, to]: x_j = from + j (to - from) / points.
    #[command(allow_negative_numbers = true)]
    Sample {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        #[arg(long, value_enum)]
        op: SampleOp,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        points: usize,
    },
}

/// Failure classes with stable exit codes.
#[derive(Debug)]
enum Failure {
    Parse(String),
    Domain(String),
    Convergence(String),
    NoMatch(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Domain(_) => 3,
            Failure::Convergence(_) => 4,
            Failure::NoMatch(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Domain(m) | Failure::Convergence(m) | Failure::NoMatch(m) => m,
        }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Parse(e.to_string())
    }
}

impl From<EvalDomainError> for Failure {
    fn from(e: EvalDomainError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<QuadError> for Failure {
    fn from(e: QuadError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<StarError> for Failure {
    fn from(e: StarError) -> Self {
        match e {
            StarError::NonConvergence(_) | StarError::StepUnderflow { .. } => {
                Failure::Convergence(e.to_string())
            }
            StarError::Quad(q) => q.into(),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Star(s) => s.into(),
            AnalysisError::NoBracket { .. } => Failure::Convergence(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

struct Envelope {
    command: &'static str,
    inputs: Map<String, Value>,
    result: Value,
    diagnostics: Vec<(&'static str, String)>,
    /// Rows for CSV-shaped commands.
    rows: Option<Vec<(f64, f64)>>,
}

impl Envelope {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            inputs: Map::new(),
            result: Value::Null,
            diagnostics: Vec::new(),
            rows: None,
        }
    }

    fn input(&mut self, key: &str, v: Value) {
        self.inputs.insert(key.into(), v);
    }

    fn warn(&mut self, message: String) {
        self.diagnostics.push(("warning", message));
    }

    fn info(&mut self, message: String) {
        self.diagnostics.push(("info", message));
    }

    fn to_value(&self) -> Value {
        let diagnostics: Vec<Value> = self
            .diagnostics
            .iter()
            .map(|(level, message)| json!({"level": level, "message": message}))
            .collect();
        json!({
            "command": self.command,
            "inputs": Value::Object(self.inputs.clone()),
            "result": self.result,
            "diagnostics": diagnostics,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }
}

fn class_name(c: StarClass) -> &'static str {
    match c {
        StarClass::Finite => "Finite",
        StarClass::DivergentToZero => "DivergentToZero",
        StarClass::DivergentToInfinity => "DivergentToInfinity",
    }
}

fn star_value(r: &StarResult) -> Value {
    json!({
        "value": num(r.value),
        "class": class_name(r.class),
        "error_estimate": num(r.error_estimate),
    })
}

fn interval(a: f64, b: f64) -> Result<Interval, Failure> {
    if a.is_finite() && b.is_finite() {
        Ok(Interval::new(a, b))
    } else {
        Err(Failure::Domain(format!("bounds must be finite, got [{a}, {b}]")))
    }
}

fn class_of_value(v: f64) -> StarClass {
    if v == 0.0 {
        StarClass::DivergentToZero
    } else if v.is_infinite() {
        StarClass::DivergentToInfinity
    } else {
        StarClass::Finite
    }
}

fn run(command: &Command, env: &mut Envelope) -> Result<(), Failure> {
    match *command {
        Command::Starint {
            ref expr,
            from,
            to,
            method,
            n,
            quad,
        } => {
            env.input("expr", json!(expr));
            env.input("from", num(from));
            env.input("to", num(to));
            env.input("method", json!(if method == IntMethod::Quad { "quad" } else { "riemann" }));
            let f = parse(expr)?;
            let iv = interval(from, to)?;
            match method {
                IntMethod::Quad => {
                    quad.echo(&mut env.inputs);
                    let r = star_integral_definite(&f, iv, &quad.settings())?;
                    env.result = star_value(&r);
                }
                IntMethod::Riemann => {
                    env.input("n", json!(n));
                    let v = product_riemann_ln(
                        |x| {
                            let v = f.eval_ln(x)?;
                            if v > f64::NEG_INFINITY {
                                Ok(v)
                            } else {
                                Err(QuadError::NonPositiveSample { x, value: 0.0 })
                            }
                        },
                        iv,
                        n,
                    )?;
                    env.result = json!({
                        "value": num(v),
                        "class": class_name(class_of_value(v)),
                        "n": n,
                    });
                }
            }
        }
        Command::Starderiv {
            ref expr,
            at,
            order,
            method,
        } => {
            env.input("expr", json!(expr));
            env.input("at", num(at));
            env.input("order", json!(order));
            let (m, name) = match method {
                DerivMethod::Symbolic => (DerivativeMethod::Symbolic, "symbolic"),
                DerivMethod::Numeric => (DerivativeMethod::Numeric, "numeric"),
                DerivMethod::OneSided => (DerivativeMethod::OneSided, "one-sided"),
            };
            env.input("method", json!(name));
            let f = parse(expr)?;
            env.result = num(star_derivative(&f, at, order, m)?);
        }
        Command::Antiderivative { ref expr } => {
            env.input("expr", json!(expr));
            let f = parse(expr)?;
            let entry = star_integral_closed(&f)
                .ok_or_else(|| Failure::NoMatch(format!("no closed form in the table for `{f}`")))?;
            env.info(format!("pattern {}", entry.pattern));
            env.result = json!(render_with_constant(&entry.antiderivative));
        }
        Command::Taylor {
            ref expr,
            center,
            terms,
            eval,
        } => {
            env.input("expr", json!(expr));
            env.input("center", num(center));
            env.input("terms", json!(terms));
            if let Some(x) = eval {
                env.input("eval", num(x));
            }
            let f = parse(expr)?;
            let tp = taylor_coefficients(&f, center, terms)?;
            let mut result = Map::new();
            result.insert("center".into(), num(center));
            result.insert(
                "coefficients".into(),
                Value::Array(tp.coefficients().into_iter().map(num).collect()),
            );
            result.insert(
                "log_coefficients".into(),
                Value::Array(tp.log_coefficients().iter().copied().map(num).collect()),
            );
            if let Some(x) = eval {
                let r = taylor_evaluate(&tp, x);
                if terms_growing(&tp, x) {
                    env.warn(format!("terms grow at x = {}; outside the log-series radius", g17(x)));
                }
                result.insert("value".into(), num(r.value));
                result.insert("class".into(), json!(class_name(r.class)));
            }
            env.result = Value::Object(result);
        }
        Command::Mvt {
            ref expr,
            from,
            to,
            kind,
            tol,
        } => {
            env.input("expr", json!(expr));
            env.input("from", num(from));
            env.input("to", num(to));
            env.input("kind", json!(if kind == MvtKind::Integral { "integral" } else { "derivative" }));
            env.input("tol", num(tol));
            let f = parse(expr)?;
            let iv = interval(from, to)?;
            let sol = match kind {
                MvtKind::Integral => mvt_star_integral(&f, iv, tol)?,
                MvtKind::Derivative => mvt_star_derivative(&f, iv, tol)?,
            };
            if sol.flag == Some(MvtFlag::ConstantFunction) {
                env.warn("target is constant on the interval; every point qualifies".into());
            }
            env.result = json!({
                "c": num(sol.c),
                "residual": num(sol.residual),
                "flag": sol.flag.map(|_| "ConstantFunction"),
            });
        }
        Command::Check {
            ref inequality,
            trials,
            seed,
        } => {
            env.input("inequality", json!(inequality));
            env.input("trials", json!(trials));
            env.input("seed", json!(seed));
            let id: InequalityId = inequality.parse().map_err(Failure::Domain)?;
            let report = inequality_suite(id, trials, seed)?;
            if report.violations > 0 {
                env.warn(format!("{} of {} trials violated {}", report.violations, trials, id));
            }
            env.result = json!({
                "id": id.as_str(),
                "trials": report.trials,
                "violations": report.violations,
                "worst_margin": num(report.worst_margin),
                "seed": report.seed,
            });
        }
        Command::Gtransform {
            ref expr,
            g,
            from,
            to,
            quad,
        } => {
            let transform = match g {
                GName::Exp => GTransform::Exp,
                GName::Id => GTransform::Identity,
                GName::Log => GTransform::Log,
                GName::Square => GTransform::Square,
            };
            env.input("expr", json!(expr));
            env.input("g", json!(transform.to_string()));
            env.input("from", num(from));
            env.input("to", num(to));
            quad.echo(&mut env.inputs);
            let f = parse(expr)?;
            let iv = interval(from, to)?;
            env.result = num(g_integral(&f, transform, iv, &quad.settings())?);
        }
        Command::Sample {
            ref expr,
            op,
            from,
            to,
            points,
        } => {
            env.input("expr", json!(expr));
            env.input(
                "op",
                json!(if op == SampleOp::Starderiv { "starderiv" } else { "starint-cumulative" }),
            );
            env.input("from", num(from));
            env.input("to", num(to));
            env.input("points", json!(points));
            let f = parse(expr)?;
            interval(from, to)?;
            if points == 0 {
                return Err(Failure::Domain("at least one point is required".into()));
            }
            let rows = sample(&f, op, from, to, points)?;
            env.result = Value::Array(
                rows.iter()
                    .map(|(x, v)| json!({"x": num(*x), "value": num(*v)}))
                    .collect(),
            );
            env.rows = Some(rows);
        }
    }
    Ok(())
}

fn render_with_constant(e: &Expr) -> String {
    match e {
        Expr::Const(c) if *c == 1.0 => "C".into(),
        _ => format!("C*{e}"),
    }
}

fn sample(f: &Expr, op: SampleOp, from: f64, to: f64, points: usize) -> Result<Vec<(f64, f64)>, Failure> {
    let s = QuadSettings::default();
    let xs = (1..=points).map(|j| from + (to - from) * j as f64 / points as f64);
    let mut rows = Vec::with_capacity(points);
    let mut log_total = 0.0;
    let mut prev = from;
    for x in xs {
        let value = match op {
            SampleOp::Starderiv => star_derivative(f, x, 1, DerivativeMethod::Symbolic)?,
            SampleOp::StarintCumulative => {
                // Chain the pieces: ∫*_a^x = Π ∫*_{x_(j-1)}^{x_j}.
                let piece = star_integral_definite(f, Interval::new(prev, x), &s)?;
                log_total += match piece.class {
                    StarClass::Finite => piece.value.ln(),
                    StarClass::DivergentToZero => f64::NEG_INFINITY,
                    StarClass::DivergentToInfinity => f64::INFINITY,
                };
                prev = x;
                log_total.exp()
            }
        };
        rows.push((x, value));
    }
    Ok(rows)
}

fn print_text(env: &Envelope) {
    match &env.result {
        Value::Null => {}
        Value::Object(map) => {
            for (k, v) in map {
                println!("{k}: {}", scalar(v));
            }
        }
        other => println!("{}", scalar(other)),
    }
}

fn print_csv(env: &Envelope) {
    let mut out = String::new();
    if let Some(rows) = &env.rows {
        out.push_str("x,value\n");
        for (x, v) in rows {
            out.push_str(&format!("{},{}\n", g17(*x), g17(*v)));
        }
    } else {
        out.push_str("key,value\n");
        match &env.result {
            Value::Null => {}
            Value::Object(map) => {
                for (k, v) in map {
                    out.push_str(&format!("{k},{}\n", scalar(v)));
                }
            }
            other => out.push_str(&format!("result,{}\n", scalar(other))),
        }
    }
    print!("{out}");
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Starint { .. } => "starint",
        Command::Starderiv { .. } => "starderiv",
        Command::Antiderivative { .. } => "antiderivative",
        Command::Taylor { .. } => "taylor",
        Command::Mvt { .. } => "mvt",
        Command::Check { .. } => "check",
        Command::Gtransform { .. } => "gtransform",
        Command::Sample { .. } => "sample",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut env = Envelope::new(command_name(&cli.command));
    let outcome = run(&cli.command, &mut env);
    if let Err(failure) = &outcome {
        eprintln!("error: {}", failure.message());
        env.diagnostics.push(("error", failure.message().to_string()));
        env.rows = None;
    }
    if cli.format != Format::Json {
        for (level, message) in env.diagnostics.iter().filter(|(l, _)| *l != "error") {
            eprintln!("{level}: {message}");
        }
    }
    let csv_shaped = matches!(cli.command, Command::Sample { .. });
    match cli.format {
        Format::Json => println!("{}", to_json(&env.to_value())),
        Format::Csv => print_csv(&env),
        Format::Text if csv_shaped && env.rows.is_some() => print_csv(&env),
        Format::Text => print_text(&env),
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(f.exit_code()),
    }
}
