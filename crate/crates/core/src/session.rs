//! Per-query checking state: the shared fuel budget, the fresh-name supply
//! and an optional rule trace.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::eval::{EvalError, Fuel};
use crate::syntax::{Context, Name, Supply, Term, Type};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("out of fuel")]
    OutOfFuel,
    #[error("cannot type `{term}`: {reason}")]
    Infer { term: String, reason: String },
}

impl TypeError {
    pub fn infer(term: &Term, reason: impl Into<String>) -> Self {
        TypeError::Infer {
            term: term.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<EvalError> for TypeError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::OutOfFuel => TypeError::OutOfFuel,
            other => TypeError::Infer {
                term: String::new(),
                reason: other.to_string(),
            },
        }
    }
}

/// Three-valued answer; fuel exhaustion is `Unknown`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Yes
    }
}

pub const DEFAULT_FUEL: u64 = 10_000;

pub struct Session {
    pub fuel: Fuel,
    pub supply: Supply,
    trace: Option<Vec<String>>,
    depth: usize,
}

impl Session {
    pub fn new(fuel: u64) -> Self {
        Session {
            fuel: Fuel::new(fuel),
            supply: Supply::new(),
            trace: None,
            depth: 0,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    pub(crate) fn note(&mut self, line: impl FnOnce() -> String) {
        if let Some(tr) = &mut self.trace {
            tr.push(format!("{}{}", "  ".repeat(self.depth), line()));
        }
    }

    pub(crate) fn enter(&mut self) {
        self.depth += 1;
    }

    pub(crate) fn leave(&mut self) {
        self.depth -= 1;
    }

    pub fn tick(&mut self) -> Result<(), TypeError> {
        self.fuel.tick().map_err(|_| TypeError::OutOfFuel)
    }

    /// Names handed out or reserved so far, so a caller can keep a longer
    /// lived supply in step.
    pub(crate) fn supply_names(&self) -> Vec<Name> {
        self.supply.used_names()
    }

    pub(crate) fn reserve_ctx(&mut self, ctx: &Context) {
        self.supply.reserve_all(ctx.names());
    }

    pub(crate) fn reserve_ty(&mut self, t: &Type) {
        self.supply.reserve_type(t);
    }

    pub(crate) fn reserve_term(&mut self, t: &Term) {
        self.supply.reserve_term(t);
    }

    /// Name to use for binder `x` when it is pushed onto `ctx`: `x` itself
    /// unless it clashes with the context or with `avoid`.
    pub(crate) fn binder(&mut self, ctx: &Context, x: &Name, avoid: &BTreeSet<Name>) -> Name {
        if !ctx.contains(x) && !avoid.contains(x) {
            self.supply.reserve(x.clone());
            return x.clone();
        }
        let hint: String = x.as_str().trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'').to_owned();
        self.supply.fresh(if hint.is_empty() { "v" } else { &hint })
    }
}

/// Renames binder `x` to `x2` in `body` (no-op when equal).
pub(crate) fn rename_ty(body: &Arc<Type>, x: &Name, x2: &Name) -> Arc<Type> {
    use crate::syntax::Syntax;
    if x == x2 {
        body.clone()
    } else {
        body.subst(x, &Term::var(x2.clone()))
    }
}

pub(crate) fn rename_term(body: &Arc<Term>, x: &Name, x2: &Name) -> Arc<Term> {
    use crate::syntax::Syntax;
    if x == x2 {
        body.clone()
    } else {
        body.subst(x, &Term::var(x2.clone()))
    }
}
