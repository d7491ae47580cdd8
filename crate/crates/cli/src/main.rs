use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use logdm_cli::parse::{parse_expr, parse_index, parse_operator, Value};
use logdm_core::cartier::export_k;
use logdm_core::operator::{center_structural, center_test, centralizer_test, curvature_beta, right_decompose, xi_power};
use logdm_core::suites::{run_cells, DEFAULT_GRID, SUITES};
use logdm_core::{Chart, Error, LevelContext, SuiteParams, SuiteReport};
use serde_json::{json, Value as Json};

#[derive(Parser, Debug)]
#[command(name = "logdm", version, about = "Log differential operators of higher level over F_p")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[arg(long, global = true)]
    p: Option<u32>,
    #[arg(long, global = true)]
    m: Option<u32>,
    #[arg(long, global = true)]
    r: Option<usize>,
    /// Truncation / nilpotence bound.
    #[arg(long = "N", global = true, default_value_t = 2)]
    n: u32,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Degree bound; defaults to 2·p^{m+1}.
    #[arg(long, global = true)]
    deg: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Work on the Frobenius-target chart (level 0, step p^m).
    #[arg(long, global = true)]
    target: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Product of two operators.
    Mul { a: String, b: String },
    /// Commutator [a, b].
    Comm { a: String, b: String },
    /// Action of an operator on a coefficient.
    Act { op: String, x: String },
    /// Center and centralizer membership of an operator.
    Center { a: String },
    /// B-decomposition of a coefficient, or right decomposition of an operator.
    Decompose { x: String },
    /// Image of ξ′_i (coordinate index) or ξ′^b (`[b1,...,br]`) under the curvature map.
    Curvature { which: String },
    /// Run a verification suite (or `all`); the default grid is used without --p/--m/--r.
    Verify { suite: String },
    /// Write the K-module as JSON.
    ExportK { path: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, ok)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{out}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn context(cli: &Cli) -> Result<LevelContext, Error> {
    match (cli.p, cli.m, cli.r) {
        (Some(p), Some(m), Some(r)) => LevelContext::new(p, m, r),
        _ => Err(Error::UnsupportedContext("--p, --m and --r are required".into())),
    }
}

fn chart(cli: &Cli) -> Result<Chart, Error> {
    let ctx = context(cli)?;
    Ok(if cli.target { Chart::frobenius_target(ctx) } else { Chart::base(ctx) })
}

fn ctx_json(chart: &Chart) -> Json {
    let c = chart.ctx();
    json!({ "p": c.p(), "m": c.m(), "r": c.r() })
}

fn single(cli: &Cli, chart: &Chart, verb: &str, result: String) -> String {
    match cli.format {
        Format::Text => result,
        Format::Json => json!({ "verb": verb, "ctx": ctx_json(chart), "result": result }).to_string(),
    }
}

fn run(cli: &Cli) -> Result<(String, bool), Error> {
    match &cli.verb {
        Verb::Mul { a, b } => {
            let c = chart(cli)?;
            let v = parse_operator(a, c)?.mul(&parse_operator(b, c)?)?;
            Ok((single(cli, &c, "mul", Value::from_op(v).to_string()), true))
        }
        Verb::Comm { a, b } => {
            let c = chart(cli)?;
            let v = parse_operator(a, c)?.commutator(&parse_operator(b, c)?)?;
            Ok((single(cli, &c, "comm", Value::from_op(v).to_string()), true))
        }
        Verb::Act { op, x } => {
            let c = chart(cli)?;
            let op = parse_operator(op, c)?;
            let Value::Elem(x) = parse_expr(x, c)? else {
                return Err(Error::ValidationFailure("the acted-on expression must not contain d[...]".into()));
            };
            Ok((single(cli, &c, "act", op.act(&x).to_string()), true))
        }
        Verb::Center { a } => {
            let c = chart(cli)?;
            let op = parse_operator(a, c)?;
            let center = center_test(&op)?;
            let centralizer = centralizer_test(&op)?;
            let structural = center_structural(&op);
            Ok((
                match cli.format {
                    Format::Text => format!("center: {center}\ncentralizer: {centralizer}\nstructural: {structural}"),
                    Format::Json => json!({
                        "verb": "center",
                        "ctx": ctx_json(&c),
                        "input": op.to_string(),
                        "center": center,
                        "centralizer": centralizer,
                        "structural": structural,
                    })
                    .to_string(),
                },
                true,
            ))
        }
        Verb::Decompose { x } => {
            let c = chart(cli)?;
            let parts: BTreeMap<String, String> = match parse_expr(x, c)? {
                Value::Elem(x) => c.b_decompose(&x)?.into_iter().map(|(j, v)| (j.to_string(), v.to_string())).collect(),
                Value::Op(op) => right_decompose(&op)?.into_iter().map(|(i, v)| (i.to_string(), v.to_string())).collect(),
            };
            Ok((
                match cli.format {
                    Format::Text => parts.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n"),
                    Format::Json => json!({ "verb": "decompose", "ctx": ctx_json(&c), "result": parts }).to_string(),
                },
                true,
            ))
        }
        Verb::Curvature { which } => {
            let ctx = context(cli)?;
            let c = Chart::base(ctx);
            let v = if which.trim_start().starts_with('[') {
                xi_power(&parse_index(which, ctx.r())?, &ctx)
            } else {
                let i = which.trim().parse::<usize>().map_err(|_| Error::SyntaxError {
                    position: 0,
                    expected: "coordinate index or '['".into(),
                })?;
                curvature_beta(i, &ctx)?
            };
            Ok((single(cli, &c, "curvature", v.to_string()), true))
        }
        Verb::Verify { suite } => verify(cli, suite),
        Verb::ExportK { path } => {
            let ctx = context(cli)?;
            let k = export_k(ctx, cli.n)?;
            let text = serde_json::to_string_pretty(&k).map_err(|e| Error::IoError(e.to_string()))?;
            std::fs::write(path, text + "\n").map_err(|e| Error::IoError(format!("{path}: {e}")))?;
            Ok((
                match cli.format {
                    Format::Text => format!("wrote {path}"),
                    Format::Json => json!({ "verb": "export-k", "path": path }).to_string(),
                },
                true,
            ))
        }
    }
}

fn max_threads() -> usize {
    std::env::var("LOGDM_MAX_CELLS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn verify(cli: &Cli, suite: &str) -> Result<(String, bool), Error> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let cells = if cli.p.is_none() && cli.m.is_none() && cli.r.is_none() {
        DEFAULT_GRID.iter().map(|&(p, m, r)| LevelContext::new(p, m, r)).collect::<Result<Vec<_>, _>>()?
    } else {
        vec![context(cli)?]
    };
    let params = |ctx: &LevelContext| SuiteParams {
        n: cli.n,
        seed: cli.seed,
        deg: cli.deg.unwrap_or(2 * ctx.period()),
        ..SuiteParams::defaults(ctx)
    };
    let reports = run_cells(&names, &cells, params, max_threads())?;
    let ok = reports.iter().all(SuiteReport::passed);
    let out = match cli.format {
        Format::Json if reports.len() == 1 => serde_json::to_string(&reports[0]),
        Format::Json => serde_json::to_string(&reports),
        Format::Text => Ok(reports.iter().map(text_report).collect::<Vec<_>>().join("\n")),
    }
    .map_err(|e| Error::IoError(e.to_string()))?;
    Ok((out, ok))
}

fn text_report(r: &SuiteReport) -> String {
    let mut s = format!(
        "{} {} (p={}, m={}, r={}): {} cases, {} failed, {} ms",
        if r.passed() { "PASS" } else { "FAIL" },
        r.suite,
        r.ctx.p,
        r.ctx.m,
        r.ctx.r,
        r.cases_total,
        r.cases_failed,
        r.elapsed_ms
    );
    for f in &r.failures {
        s.push_str(&format!("\n  input: {}\n    expected: {}\n    got: {}", f.input, f.expected, f.got));
    }
    s
}
