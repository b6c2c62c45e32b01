//! Checking whole `.elam` files.
//!
//! Items run in order. A `def` is lowered at a fresh trail variable, which
//! stays in the context, and its name is bound to the inferred singleton.
//! A `check` lowers both sides and runs the checker. An `eval` runs the
//! surface evaluator with every earlier definition substituted in.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::eval::{eval, ChoiceEntry, Chooser, EvalError};
use crate::frontend::{Item, ItemKind, SourceFile};
use crate::lower::{lower_term, lower_type, LowerError};
use crate::session::{Session, TypeError, DEFAULT_FUEL};
use crate::syntax::{Context, Name, Supply, Syntax, Term, Type};

/// Stack size for threads that run the checker; the recursion follows the
/// depth of terms and types.
pub const STACK_SIZE: usize = 512 << 20;

/// Runs `f` on a thread with a large stack and waits for it.
pub fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(STACK_SIZE)
            .spawn_scoped(s, f)
            .expect("spawn checker thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

#[derive(Clone, Debug)]
pub struct Options {
    /// Budget per item, shared by reduction, normalization and subtyping.
    pub fuel: u64,
    pub seed: u64,
    /// Height bound for randomly chosen values.
    pub choice_depth: usize,
    pub parallel: bool,
    pub trace: bool,
    /// Values for `choose`, replayed from the start for every `eval` item.
    /// Overrides the seed.
    pub script: Option<Vec<Arc<Term>>>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            fuel: DEFAULT_FUEL,
            seed: 0,
            choice_depth: 3,
            parallel: false,
            trace: false,
            script: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ItemReport {
    pub line: usize,
    pub kind: ItemKind,
    pub name: Option<Name>,
    pub status: Status,
    /// One line: the value of an `eval`, the type of a `def`, or the reason
    /// a check failed.
    pub summary: String,
    pub log: Vec<ChoiceEntry>,
    pub trace: Vec<String>,
}

impl ItemReport {
    fn new(item: &Item, status: Status, summary: impl Into<String>) -> Self {
        ItemReport {
            line: item.line,
            kind: item.kind,
            name: item.name.clone(),
            status,
            summary: summary.into(),
            log: Vec::new(),
            trace: Vec::new(),
        }
    }
}

pub fn kind_name(k: ItemKind) -> &'static str {
    match k {
        ItemKind::Def => "def",
        ItemKind::Check => "check",
        ItemKind::Eval => "eval",
    }
}

impl fmt::Display for ItemReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, kind_name(self.kind))?;
        if let Some(n) = &self.name {
            write!(f, " {n}")?;
        }
        write!(f, ": {}", self.status)?;
        if !self.summary.is_empty() {
            write!(f, ": {}", self.summary)?;
        }
        for e in &self.log {
            write!(f, "\n  choice {} {} = {}", e.site, e.tag, e.value)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub items: Vec<ItemReport>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.items.iter().all(|i| i.status == Status::Pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            writeln!(f, "{i}")?;
        }
        Ok(())
    }
}

/// What an item is checked against: the context and the definitions that
/// precede it.
#[derive(Clone)]
struct Scope {
    ctx: Context,
    defs: Vec<(Name, Arc<Term>)>,
}

fn file_supply(file: &SourceFile) -> Supply {
    let mut s = Supply::new();
    for it in &file.items {
        s.reserve_term(&it.term);
        if let Some(a) = &it.annot {
            s.reserve_type(a);
        }
        if let Some(n) = &it.name {
            s.reserve(n.clone());
        }
    }
    s
}

fn session(opts: &Options, supply: &Supply) -> Session {
    let mut s = Session::new(opts.fuel);
    s.supply = supply.clone();
    if opts.trace {
        s = s.with_trace();
    }
    s
}

fn type_failure(item: &Item, e: TypeError) -> ItemReport {
    match e {
        TypeError::OutOfFuel => ItemReport::new(item, Status::Unknown, "out of fuel"),
        e => ItemReport::new(item, Status::Fail, e.to_string()),
    }
}

fn lower_failure(item: &Item, e: LowerError) -> ItemReport {
    ItemReport::new(item, Status::Fail, e.to_string())
}

/// Lowers `t` at a fresh trail variable, returning the variable and the
/// lowered term.
fn lower_at_fresh(supply: &mut Supply, t: &Arc<Term>) -> Result<(Name, Arc<Term>), LowerError> {
    let z = supply.fresh("z");
    let low = lower_term(supply, &Term::var(z.clone()), t)?;
    Ok((z, low))
}

/// The trail variable and the name a `def` adds to the context.
type DefBindings = [(Name, Arc<Type>); 2];

/// Lowers and infers a `def`, returning the bindings to add on success.
fn run_def(item: &Item, scope: &Scope, supply: &mut Supply, opts: &Options) -> (ItemReport, Option<DefBindings>) {
    let name = item.name.clone().expect("def items are named");
    if scope.ctx.contains(&name) {
        return (ItemReport::new(item, Status::Fail, format!("{name} is already defined")), None);
    }
    let (z, low) = match lower_at_fresh(supply, &item.term) {
        Ok(x) => x,
        Err(e) => return (lower_failure(item, e), None),
    };
    let ctx = scope.ctx.extend(z.clone(), Type::trail());
    let mut s = session(opts, supply);
    let res = s.infer(&ctx, &low);
    supply.reserve_all(s.supply_names());
    let mut rep = match &res {
        Ok(ty) => ItemReport::new(item, Status::Pass, underlying(ty).to_string()),
        Err(e) => type_failure(item, e.clone()),
    };
    rep.trace = s.take_trace();
    (rep, res.ok().map(|ty| [(z, Type::trail()), (name, ty)]))
}

/// The bound of a singleton, which is what a reader wants to see for a def.
fn underlying(ty: &Arc<Type>) -> &Arc<Type> {
    match &**ty {
        Type::Singleton(_, u) => u,
        _ => ty,
    }
}

fn run_check(item: &Item, scope: &Scope, supply: &Supply, opts: &Options) -> ItemReport {
    let mut supply = supply.clone();
    let annot = item.annot.as_ref().expect("check items are annotated");
    let lowered = lower_at_fresh(&mut supply, &item.term).and_then(|(z, t)| Ok((z, t, lower_type(&mut supply, annot)?)));
    let (z, low, low_ty) = match lowered {
        Ok(x) => x,
        Err(e) => return lower_failure(item, e),
    };
    let ctx = scope.ctx.extend(z, Type::trail());
    let mut s = session(opts, &supply);
    let res = s.well_formed(&ctx, &low_ty).and_then(|()| s.check(&ctx, &low, &low_ty));
    let mut rep = match res {
        Ok(true) => ItemReport::new(item, Status::Pass, ""),
        Ok(false) => ItemReport::new(item, Status::Fail, format!("not a subtype of {low_ty}")),
        Err(e) => type_failure(item, e),
    };
    rep.trace = s.take_trace();
    rep
}

fn run_eval(item: &Item, scope: &Scope, opts: &Options) -> ItemReport {
    let t = scope.defs.iter().rev().fold(item.term.clone(), |t, (n, d)| t.subst(n, d));
    let mut chooser = match &opts.script {
        Some(vals) => Chooser::scripted(vals.clone()),
        None => Chooser::seeded(opts.seed, opts.choice_depth),
    };
    match eval(&t, &mut chooser, opts.fuel) {
        Ok((v, log)) => {
            let mut rep = ItemReport::new(item, Status::Pass, v.to_string());
            rep.log = log.entries;
            rep
        }
        Err(EvalError::OutOfFuel) => ItemReport::new(item, Status::Unknown, "out of fuel"),
        Err(e) => ItemReport::new(item, Status::Fail, e.to_string()),
    }
}

/// Infers the lowered term of a `check` item without checking it against
/// its annotation.
fn run_infer(item: &Item, scope: &Scope, supply: &Supply, opts: &Options) -> ItemReport {
    let mut supply = supply.clone();
    let (z, low) = match lower_at_fresh(&mut supply, &item.term) {
        Ok(x) => x,
        Err(e) => return lower_failure(item, e),
    };
    let ctx = scope.ctx.extend(z, Type::trail());
    let mut s = session(opts, &supply);
    match s.infer(&ctx, &low) {
        Ok(ty) => ItemReport::new(item, Status::Pass, ty.to_string()),
        Err(e) => type_failure(item, e),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Check,
    Infer,
}

fn run(file: &SourceFile, opts: &Options, mode: Mode) -> Report {
    let mut supply = file_supply(file);
    let mut scope = Scope {
        ctx: Context::new(),
        defs: Vec::new(),
    };
    let mut reports: Vec<Option<ItemReport>> = vec![None; file.items.len()];
    let mut jobs = Vec::new();
    for (i, item) in file.items.iter().enumerate() {
        match item.kind {
            ItemKind::Def => {
                let (rep, binds) = run_def(item, &scope, &mut supply, opts);
                if let Some(binds) = binds {
                    for (n, t) in binds {
                        scope.ctx.push(n, t);
                    }
                }
                scope.defs.push((item.name.clone().expect("def items are named"), item.term.clone()));
                reports[i] = Some(rep);
            }
            ItemKind::Check | ItemKind::Eval => jobs.push((i, scope.clone())),
        }
    }
    let job = |(i, scope): &(usize, Scope)| {
        let item = &file.items[*i];
        let rep = match (item.kind, mode) {
            (ItemKind::Check, Mode::Check) => run_check(item, scope, &supply, opts),
            (ItemKind::Check, Mode::Infer) => run_infer(item, scope, &supply, opts),
            (ItemKind::Eval, Mode::Check) => run_eval(item, scope, opts),
            _ => ItemReport::new(item, Status::Pass, "skipped"),
        };
        (*i, rep)
    };
    let done: Vec<(usize, ItemReport)> = if opts.parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .stack_size(STACK_SIZE)
            .build()
            .expect("thread pool");
        pool.install(|| jobs.par_iter().map(job).collect())
    } else {
        jobs.iter().map(job).collect()
    };
    for (i, rep) in done {
        reports[i] = Some(rep);
    }
    Report {
        items: reports.into_iter().map(|r| r.expect("every item ran")).collect(),
    }
}

/// Checks every item of `file`. Runs on a large-stack thread.
pub fn check_annotated_program(file: &SourceFile, opts: &Options) -> Report {
    with_big_stack(|| run(file, opts, Mode::Check))
}

/// Infers the type of every `def` and `check` term; `eval` items are skipped.
pub fn infer_program(file: &SourceFile, opts: &Options) -> Report {
    with_big_stack(|| run(file, opts, Mode::Infer))
}
