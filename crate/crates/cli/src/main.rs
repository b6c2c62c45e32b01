//! `elam`: command-line front end for the checker.
//!
//! Exit codes: 0 success, 1 a check failed or a query was answered no or
//! unknown, 2 usage or parse error.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use elam::frontend::{parse_context, parse_file, parse_term, parse_type, ItemKind, ParseError, SourceFile};
use elam::lower::{lower_program, lower_type};
use elam::oracle::{self, EnumBudget, Membership};
use elam::program::{check_annotated_program, infer_program, kind_name, with_big_stack, ItemReport, Options, Report, Status};
use elam::session::{Session, TypeError, Verdict, DEFAULT_FUEL};
use elam::syntax::{check_dialect_type, Context, Dialect, Supply, Term, Type};

#[derive(Parser)]
#[command(name = "elam", version, about = "Checker and evaluator for a calculus of lists with choice")]
struct Cli {
    /// Step budget per item or query.
    #[arg(long, global = true, default_value_t = DEFAULT_FUEL)]
    fuel: u64,
    /// Print a machine-readable JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Check independent file items on several threads.
    #[arg(long, global = true)]
    parallel: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every item of a file.
    Check {
        file: PathBuf,
        /// Include the subtyping rule trace of each item.
        #[arg(long)]
        trace: bool,
    },
    /// Print the inferred type of every def and check term.
    Infer { file: PathBuf },
    /// Run the eval items of a file.
    Eval {
        file: PathBuf,
        #[arg(long, conflicts_with = "script", default_value_t = 0)]
        seed: u64,
        /// File with one value per line, used for the choices in order.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Print the lowered form of every item.
    Lower { file: PathBuf },
    /// Normalize a type, lowering it first if it uses `choose`.
    Norm {
        #[arg(long = "type")]
        ty: String,
        /// Context, as `x: T, y: U`.
        #[arg(long)]
        ctx: Option<String>,
        /// Untangle trail existentials after normalizing.
        #[arg(long)]
        untangle: bool,
    },
    /// Decide whether the first type is a subtype of the second, lowering
    /// types that use `choose`.
    Sub {
        left: String,
        right: String,
        #[arg(long)]
        ctx: Option<String>,
        /// Print the rule trace.
        #[arg(long)]
        trace: bool,
        /// Also compare the two types on enumerated values.
        #[arg(long)]
        oracle: bool,
    },
    /// Read items from standard input, checking each as it arrives.
    Repl,
}

/// A failure that ends the command with exit code 2.
struct Usage {
    message: String,
    json: Value,
}

impl Usage {
    fn parse(source: &str, e: &ParseError) -> Self {
        Usage {
            message: format!("{source}:{e}"),
            json: json!({"kind": "parse", "source": source, "line": e.line, "col": e.col, "message": e.to_string()}),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Usage {
            message: format!("{}: {e}", path.display()),
            json: json!({"kind": "io", "source": path.display().to_string(), "message": e.to_string()}),
        }
    }

    fn other(message: String) -> Self {
        Usage {
            json: json!({"kind": "usage", "message": message}),
            message,
        }
    }
}

fn read_file(path: &Path) -> Result<SourceFile, Usage> {
    let text = std::fs::read_to_string(path).map_err(|e| Usage::io(path, e))?;
    parse_file(&text).map_err(|e| Usage::parse(&path.display().to_string(), &e))
}

fn read_ctx(ctx: Option<&str>) -> Result<Context, Usage> {
    match ctx {
        None => Ok(Context::new()),
        Some(c) => parse_context(c).map_err(|e| Usage::parse("--ctx", &e)),
    }
}

fn read_type(source: &str, text: &str) -> Result<Arc<Type>, Usage> {
    parse_type(text).map(Arc::new).map_err(|e| Usage::parse(source, &e))
}

/// Lowers the types that use `choose`; the others are already core types.
fn lower_surface(ctx: &Context, types: &mut [Arc<Type>]) -> Result<(), Usage> {
    let mut supply = Supply::new();
    for (n, b) in ctx.iter() {
        supply.reserve(n.clone());
        supply.reserve_type(b);
    }
    for t in types.iter() {
        supply.reserve_type(t);
    }
    for t in types.iter_mut() {
        if !check_dialect_type(t, Dialect::Core) {
            *t = lower_type(&mut supply, t).map_err(|e| Usage::other(e.to_string()))?;
        }
    }
    Ok(())
}

fn read_script(path: &Path) -> Result<Vec<Arc<Term>>, Usage> {
    let text = std::fs::read_to_string(path).map_err(|e| Usage::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_term(l).map(Arc::new).map_err(|e| Usage::parse(&format!("{}:{}", path.display(), i + 1), &e)))
        .collect()
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Unknown => "unknown",
    }
}

fn item_json(r: &ItemReport) -> Value {
    json!({
        "line": r.line,
        "kind": kind_name(r.kind),
        "name": r.name.as_ref().map(|n| n.to_string()),
        "status": status_name(r.status),
        "summary": r.summary,
        "choices": r.log.iter().map(|e| json!({
            "site": e.site.to_string(),
            "tag": e.tag.to_string(),
            "value": e.value.to_string(),
        })).collect::<Vec<_>>(),
        "trace": r.trace,
    })
}

fn report_json(command: &str, file: &Path, items: &[&ItemReport]) -> Value {
    json!({
        "command": command,
        "file": file.display().to_string(),
        "ok": items.iter().all(|i| i.status == Status::Pass),
        "items": items.iter().map(|i| item_json(i)).collect::<Vec<_>>(),
    })
}

struct Output {
    text: String,
    json: Value,
    ok: bool,
}

fn emit_report(command: &str, file: &Path, report: &Report, filter: impl Fn(&ItemReport) -> bool, trace: bool) -> Output {
    let items: Vec<&ItemReport> = report.items.iter().filter(|i| filter(i)).collect();
    let mut text = String::new();
    for i in &items {
        text.push_str(&format!("{i}\n"));
        if trace {
            for l in &i.trace {
                text.push_str(&format!("    {l}\n"));
            }
        }
    }
    Output {
        json: report_json(command, file, &items),
        ok: items.iter().all(|i| i.status == Status::Pass),
        text,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Yes => "yes",
        Verdict::No => "no",
        Verdict::Unknown => "unknown",
    }
}

fn membership_name(m: &Membership) -> String {
    match m {
        Membership::True => "true".into(),
        Membership::False => "false".into(),
        Membership::Undecided(r) => format!("undecided ({r})"),
    }
}

fn run_sub(cli: &Cli, left: &str, right: &str, ctx: Option<&str>, trace: bool, use_oracle: bool) -> Result<Output, Usage> {
    let ctx = read_ctx(ctx)?;
    let mut sides = [read_type("left", left)?, read_type("right", right)?];
    lower_surface(&ctx, &mut sides)?;
    let [t1, t2] = sides;
    let (v, lines) = with_big_stack(|| {
        let mut s = Session::new(cli.fuel);
        if trace {
            s = s.with_trace();
        }
        let v = s.subtype_verdict(&ctx, &t1, &t2);
        (v, s.take_trace())
    });
    let mut text = String::new();
    if trace {
        for l in &lines {
            text.push_str(&format!("{l}\n"));
        }
    }
    text.push_str(&format!("{}\n", verdict_name(v)));
    let mut js = json!({
        "command": "sub",
        "left": t1.to_string(),
        "right": t2.to_string(),
        "verdict": verdict_name(v),
        "trace": lines,
    });
    if use_oracle {
        let budget = EnumBudget::default();
        let cex = with_big_stack(|| oracle::inclusion_counterexample(&t1, &t2, &budget));
        let (line, val) = match cex {
            Ok(None) => ("oracle: no counterexample".to_owned(), Value::Null),
            Ok(Some((v, m))) => (
                format!("oracle: {v} is in the left type, right membership {}", membership_name(&m)),
                json!({"value": v.to_string(), "right": membership_name(&m)}),
            ),
            Err(e) => (format!("oracle: {e}"), json!({"error": e.to_string()})),
        };
        text.push_str(&format!("{line}\n"));
        js["oracle"] = val;
    }
    Ok(Output {
        text,
        json: js,
        ok: v == Verdict::Yes,
    })
}

fn run_norm(cli: &Cli, ty: &str, ctx: Option<&str>, untangle: bool) -> Result<Output, Usage> {
    let ctx = read_ctx(ctx)?;
    let mut one = [read_type("--type", ty)?];
    lower_surface(&ctx, &mut one)?;
    let [t] = one;
    let res = with_big_stack(|| {
        let mut s = Session::new(cli.fuel);
        s.supply.reserve_type(&t);
        for (n, b) in ctx.iter() {
            s.supply.reserve(n.clone());
            s.supply.reserve_type(b);
        }
        let n = s.normalize(&ctx, &t)?;
        Ok::<_, TypeError>(if untangle { s.untangle(&n) } else { n })
    });
    Ok(match res {
        Ok(n) => Output {
            text: format!("{n}\n"),
            json: json!({"command": "norm", "input": t.to_string(), "result": n.to_string(), "untangled": untangle}),
            ok: true,
        },
        Err(e) => Output {
            text: format!("{e}\n"),
            json: json!({"command": "norm", "input": t.to_string(), "error": e.to_string()}),
            ok: false,
        },
    })
}

fn run_lower(path: &Path) -> Result<Output, Usage> {
    let file = read_file(path)?;
    let mut text = String::new();
    let mut items = Vec::new();
    for it in &file.items {
        let term = lower_program(&it.term).map_err(|e| Usage::other(format!("{}:{}: {e}", path.display(), it.line)))?;
        let ty = match &it.annot {
            Some(a) => {
                let mut supply = Supply::new();
                supply.reserve_type(a);
                Some(lower_type(&mut supply, a).map_err(|e| Usage::other(e.to_string()))?)
            }
            None => None,
        };
        let head = match &it.name {
            Some(n) => format!("{} {n} =", kind_name(it.kind)),
            None => kind_name(it.kind).to_owned(),
        };
        match &ty {
            Some(ty) => text.push_str(&format!("{head} {term} : {ty}\n")),
            None => text.push_str(&format!("{head} {term}\n")),
        }
        items.push(json!({
            "line": it.line,
            "kind": kind_name(it.kind),
            "name": it.name.as_ref().map(|n| n.to_string()),
            "term": term.to_string(),
            "type": ty.map(|t| t.to_string()),
        }));
    }
    Ok(Output {
        text,
        json: json!({"command": "lower", "file": path.display().to_string(), "items": items}),
        ok: true,
    })
}

fn repl(opts: &Options) -> ExitCode {
    let stdin = io::stdin();
    let mut out = io::stdout();
    let mut src = String::new();
    let mut seen = 0;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == ":quit" || trimmed == ":q" {
            break;
        }
        let candidate = format!("{src}{line}\n");
        match parse_file(&candidate) {
            Ok(file) => {
                let report = check_annotated_program(&file, opts);
                for r in &report.items[seen..] {
                    let _ = writeln!(out, "{r}");
                }
                seen = report.items.len();
                src = candidate;
            }
            Err(e) => eprintln!("error: {e}"),
        }
        let _ = out.flush();
    }
    ExitCode::SUCCESS
}

fn run(cli: &Cli) -> Result<Output, Usage> {
    let mut opts = Options {
        fuel: cli.fuel,
        parallel: cli.parallel,
        ..Options::default()
    };
    match &cli.cmd {
        Cmd::Check { file, trace } => {
            opts.trace = *trace;
            let report = check_annotated_program(&read_file(file)?, &opts);
            Ok(emit_report("check", file, &report, |_| true, *trace))
        }
        Cmd::Infer { file } => {
            let report = infer_program(&read_file(file)?, &opts);
            Ok(emit_report("infer", file, &report, |i| i.kind != ItemKind::Eval, false))
        }
        Cmd::Eval { file, seed, script } => {
            opts.seed = *seed;
            opts.script = script.as_deref().map(read_script).transpose()?;
            let parsed = read_file(file)?;
            let report = check_annotated_program(&parsed, &opts);
            Ok(emit_report("eval", file, &report, |i| i.kind == ItemKind::Eval, false))
        }
        Cmd::Lower { file } => run_lower(file),
        Cmd::Norm { ty, ctx, untangle } => run_norm(cli, ty, ctx.as_deref(), *untangle),
        Cmd::Sub {
            left,
            right,
            ctx,
            trace,
            oracle,
        } => run_sub(cli, left, right, ctx.as_deref(), *trace, *oracle),
        Cmd::Repl => unreachable!("handled by main"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Cmd::Repl = cli.cmd {
        let opts = Options {
            fuel: cli.fuel,
            ..Options::default()
        };
        return repl(&opts);
    }
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("json"));
            } else {
                print!("{}", out.text);
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(u) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&json!({"error": u.json})).expect("json"));
            }
            eprintln!("error: {}", u.message);
            ExitCode::from(2)
        }
    }
}
