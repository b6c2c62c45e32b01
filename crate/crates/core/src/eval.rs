//! Call-by-value evaluation for both calculi.
//!
//! Surface terms are evaluated on their term-level lowering, with
//! annotations left alone: `λx.t` is held as `λz:Trail.λx.t'`, each
//! application carries its `p.3` trail argument and each `choose[B]` sits as
//! `unpack[B](p)`. One surface step contracts a whole lowered redex, so the
//! selection path recorded for a choice is exactly the one the lowering
//! assigns to it. Results are erased back to surface syntax.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lower::lower_term_untyped;
use crate::syntax::{Base, Name, Subst, Supply, Syntax, Term};
use crate::trail::{SelPath, Trail};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("stuck term: {0}")]
    StuckTerm(String),
    #[error("out of fuel")]
    OutOfFuel,
    #[error(transparent)]
    Chooser(#[from] ChooserError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChooserError {
    #[error("choice script exhausted")]
    ScriptExhausted,
    #[error("scripted value `{0}` is not a closed value of the requested type")]
    BadScriptValue(String),
}

/// A shared step budget; every contraction costs one unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fuel {
    remaining: u64,
}

impl Fuel {
    pub fn new(units: u64) -> Self {
        Fuel { remaining: units }
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn tick(&mut self) -> Result<(), EvalError> {
        if self.remaining == 0 {
            return Err(EvalError::OutOfFuel);
        }
        self.remaining -= 1;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceEntry {
    pub site: SelPath,
    /// The base type requested by the `choose`.
    pub tag: Base,
    pub value: Arc<Term>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChoiceLog {
    pub entries: Vec<ChoiceEntry>,
}

impl ChoiceLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// All list values with at most `max_size` nils, smallest first.
pub fn list_values(max_size: usize) -> Vec<Arc<Term>> {
    let mut by_size: Vec<Vec<Arc<Term>>> = vec![Vec::new(), vec![Term::nil()]];
    for s in 2..=max_size {
        let mut layer = Vec::new();
        for hs in 1..s {
            for h in &by_size[hs] {
                for t in &by_size[s - hs] {
                    layer.push(Term::cons(h.clone(), t.clone()));
                }
            }
        }
        by_size.push(layer);
    }
    by_size.into_iter().take(max_size + 1).flatten().collect()
}

/// Enumeration cursor: an odometer over `universe`, one digit per choice.
#[derive(Clone, Debug)]
pub struct Enumerator {
    universe: Vec<Arc<Term>>,
    digits: Vec<usize>,
    cursor: usize,
}

/// Source of values for `choose`. Only closed first-order values (lists)
/// are ever produced; `choose[Top]` draws from the same set.
#[derive(Clone, Debug)]
pub enum Chooser {
    Seeded { rng: Box<ChaCha8Rng>, max_depth: usize },
    Scripted { values: Vec<Arc<Term>>, next: usize },
    Enumerating(Enumerator),
}

impl Chooser {
    pub fn seeded(seed: u64, max_depth: usize) -> Self {
        Chooser::Seeded {
            rng: Box::new(ChaCha8Rng::seed_from_u64(seed)),
            max_depth: max_depth.max(1),
        }
    }

    pub fn scripted(values: Vec<Arc<Term>>) -> Self {
        Chooser::Scripted { values, next: 0 }
    }

    /// Never chooses; any `choose` fails with `ScriptExhausted`.
    pub fn none() -> Self {
        Chooser::scripted(Vec::new())
    }

    pub fn enumerating(universe: Vec<Arc<Term>>) -> Self {
        assert!(!universe.is_empty(), "empty choice universe");
        Chooser::Enumerating(Enumerator {
            universe,
            digits: Vec::new(),
            cursor: 0,
        })
    }

    /// Moves an enumerating chooser to the next combination of the choices
    /// made in the last run. Returns false once all combinations are done.
    pub fn next_run(&mut self) -> bool {
        match self {
            Chooser::Enumerating(e) => {
                e.digits.truncate(e.cursor);
                e.cursor = 0;
                while let Some(last) = e.digits.last_mut() {
                    if *last + 1 < e.universe.len() {
                        *last += 1;
                        return true;
                    }
                    e.digits.pop();
                }
                false
            }
            Chooser::Scripted { next, .. } => {
                *next = 0;
                false
            }
            Chooser::Seeded { .. } => true,
        }
    }

    pub fn choose(&mut self, base: Base) -> Result<Arc<Term>, ChooserError> {
        match self {
            Chooser::Seeded { rng, max_depth } => Ok(random_list(rng, *max_depth)),
            Chooser::Scripted { values, next } => {
                let v = values
                    .get(*next)
                    .cloned()
                    .ok_or(ChooserError::ScriptExhausted)?;
                *next += 1;
                let ok = v.free_vars().is_empty()
                    && v.is_value()
                    && (base != Base::List || v.is_list_value());
                if ok {
                    Ok(v)
                } else {
                    Err(ChooserError::BadScriptValue(v.to_string()))
                }
            }
            Chooser::Enumerating(e) => {
                if e.cursor == e.digits.len() {
                    e.digits.push(0);
                }
                let v = e.universe[e.digits[e.cursor]].clone();
                e.cursor += 1;
                Ok(v)
            }
        }
    }
}

/// A random list whose term tree has height at most `depth`.
fn random_list(rng: &mut ChaCha8Rng, depth: usize) -> Arc<Term> {
    if depth <= 1 || rng.gen_bool(0.4) {
        return Term::nil();
    }
    let h = random_list(rng, depth - 1);
    let t = random_list(rng, depth - 1);
    Term::cons(h, t)
}

struct Surface {
    root: Name,
}

impl Surface {
    fn is_value(&self, t: &Term) -> bool {
        match t {
            Term::Var(_) | Term::Abs(..) | Term::Nil => true,
            Term::Cons(h, tl) => self.is_value(h) && self.is_value(tl),
            _ => false,
        }
    }

    fn trail_arg<'a>(&self, t: &'a Term) -> Option<&'a Term> {
        match t {
            Term::Sel(..) => Some(t),
            _ => None,
        }
    }

    fn step(
        &self,
        t: &Arc<Term>,
        chooser: &mut Chooser,
    ) -> Result<Option<Step>, EvalError> {
        let stuck = || EvalError::StuckTerm(erase(t).to_string());
        let out = match &**t {
            Term::Var(_) | Term::Abs(..) | Term::Nil => return Ok(None),
            Term::App(fq, a) => {
                let Term::App(f, q) = &**fq else {
                    return Err(stuck());
                };
                if self.trail_arg(q).is_none() {
                    return Err(stuck());
                }
                if let Some((f2, e)) = self.step(f, chooser)? {
                    (Term::app(Term::app(f2, q.clone()), a.clone()), e)
                } else if let Some((a2, e)) = self.step(a, chooser)? {
                    (Term::app(fq.clone(), a2), e)
                } else {
                    match &**f {
                        Term::Abs(z, _, inner) => match &**inner {
                            Term::Abs(x, _, body) => (body.subst(z, q).subst(x, a), None),
                            _ => return Err(stuck()),
                        },
                        _ => return Err(stuck()),
                    }
                }
            }
            Term::Cons(h, tl) => {
                if let Some((h2, e)) = self.step(h, chooser)? {
                    (Term::cons(h2, tl.clone()), e)
                } else if let Some((t2, e)) = self.step(tl, chooser)? {
                    (Term::cons(h.clone(), t2), e)
                } else {
                    return Ok(None);
                }
            }
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                if let Some((s2, e)) = self.step(scrutinee, chooser)? {
                    let m = Term::Match {
                        scrutinee: s2,
                        nil_case: nil_case.clone(),
                        head: head.clone(),
                        tail: tail.clone(),
                        cons_case: cons_case.clone(),
                    };
                    (Arc::new(m), e)
                } else {
                    match &**scrutinee {
                        Term::Nil => (nil_case.clone(), None),
                        Term::Cons(v1, v2) if v2.is_list_value() => {
                            (bind_pair(cons_case, head, tail, v1, v2), None)
                        }
                        _ => return Err(stuck()),
                    }
                }
            }
            Term::Fix { .. } => (unroll(t), None),
            Term::Unpack(base, q) => {
                let Some((x, path)) = q.as_selection() else {
                    return Err(stuck());
                };
                if *x != self.root {
                    return Err(stuck());
                }
                let value = chooser.choose(*base)?;
                let entry = ChoiceEntry {
                    site: SelPath(path),
                    tag: *base,
                    value: value.clone(),
                };
                (value, Some(entry))
            }
            _ => return Err(stuck()),
        };
        Ok(Some(out))
    }
}

fn bind_pair(body: &Arc<Term>, x: &Name, y: &Name, v1: &Arc<Term>, v2: &Arc<Term>) -> Arc<Term> {
    if x == y {
        return body.subst(y, v2);
    }
    // Substitute through a fresh intermediate name so `v1` mentioning `y`
    // is not captured by the second substitution.
    if v1.has_free(y) {
        let avoid = body.names();
        let tmp = crate::syntax::fresh_variant(y, |n| {
            avoid.contains(n) || v1.has_free(n) || v2.has_free(n)
        });
        let b = body.subst(y, &Term::var(tmp.clone()));
        return b.subst(x, v1).subst(&tmp, v2);
    }
    body.subst(x, v1).subst(y, v2)
}

fn unroll(t: &Arc<Term>) -> Arc<Term> {
    match &**t {
        Term::Fix {
            bound,
            binder,
            annot,
            body,
            default,
        } => {
            if *bound == 0 {
                default.clone()
            } else {
                let smaller = Arc::new(Term::Fix {
                    bound: bound - 1,
                    binder: binder.clone(),
                    annot: annot.clone(),
                    body: body.clone(),
                    default: default.clone(),
                });
                body.subst(binder, &smaller)
            }
        }
        _ => unreachable!("unroll on a non-fix term"),
    }
}

/// Maps an evaluator-internal lowered term back to surface syntax.
fn erase(t: &Arc<Term>) -> Arc<Term> {
    match &**t {
        Term::Var(_) | Term::Nil | Term::Choose(_) | Term::TrailLit(_) | Term::Sel(..) => t.clone(),
        Term::Abs(z, a, inner) => match &**inner {
            Term::Abs(x, a2, body) if a.is_base(Base::Trail) => {
                Term::abs(x.clone(), a2.clone(), erase(body))
            }
            _ => Term::abs(z.clone(), a.clone(), erase(inner)),
        },
        Term::App(fq, a) => match &**fq {
            Term::App(f, q) if matches!(**q, Term::Sel(..)) => Term::app(erase(f), erase(a)),
            _ => Term::app(erase(fq), erase(a)),
        },
        Term::Cons(h, tl) => Term::cons(erase(h), erase(tl)),
        Term::Match {
            scrutinee,
            nil_case,
            head,
            tail,
            cons_case,
        } => Arc::new(Term::Match {
            scrutinee: erase(scrutinee),
            nil_case: erase(nil_case),
            head: head.clone(),
            tail: tail.clone(),
            cons_case: erase(cons_case),
        }),
        Term::Fix {
            bound,
            binder,
            annot,
            body,
            default,
        } => Arc::new(Term::Fix {
            bound: *bound,
            binder: binder.clone(),
            annot: annot.clone(),
            body: erase(body),
            default: erase(default),
        }),
        Term::Unpack(b, _) => Term::choose(*b),
    }
}

fn prepare(t: &Arc<Term>) -> (Surface, Arc<Term>) {
    let mut supply = Supply::new();
    supply.reserve_term(t);
    let root = supply.fresh("z");
    let lowered = lower_term_untyped(&mut supply, &Term::var(root.clone()), t);
    (Surface { root }, lowered)
}

/// The next term, with the choice made if the step was a `choose`.
pub type Step = (Arc<Term>, Option<ChoiceEntry>);

/// One surface reduction step; `None` when `t` is a value. Choice steps
/// report the selection path the lowering assigns to the `choose`.
pub fn step(
    t: &Arc<Term>,
    chooser: &mut Chooser,
) -> Result<Option<Step>, EvalError> {
    let (s, lowered) = prepare(t);
    Ok(s.step(&lowered, chooser)?.map(|(t2, e)| (erase(&t2), e)))
}

/// Evaluates a closed surface term to a value, recording every choice.
pub fn eval(
    t: &Arc<Term>,
    chooser: &mut Chooser,
    fuel: u64,
) -> Result<(Arc<Term>, ChoiceLog), EvalError> {
    let (s, mut cur) = prepare(t);
    let mut fuel = Fuel::new(fuel);
    let mut log = ChoiceLog::default();
    while !s.is_value(&cur) {
        fuel.tick()?;
        match s.step(&cur, chooser)? {
            Some((next, entry)) => {
                log.entries.extend(entry);
                cur = next;
            }
            None => return Err(EvalError::StuckTerm(erase(&cur).to_string())),
        }
    }
    Ok((erase(&cur), log))
}

/// Tail shape accepted by `BMatchCons`: a list constructor or a neutral term.
fn list_like(t: &Term) -> bool {
    matches!(
        t,
        Term::Nil | Term::Cons(..) | Term::Var(_) | Term::Sel(..) | Term::Unpack(..)
    )
}

/// One core reduction step, with `delta` consulted first at variable
/// positions. `None` means `t` is in normal form (a value or stuck).
pub fn step_core(t: &Arc<Term>, delta: &dyn Fn(&Name) -> Option<Arc<Term>>) -> Option<Arc<Term>> {
    match &**t {
        Term::Var(x) => delta(x),
        Term::Abs(..) | Term::Nil | Term::TrailLit(_) | Term::Choose(_) => None,
        Term::App(f, a) => {
            if let Some(f2) = step_core(f, delta) {
                return Some(Term::app(f2, a.clone()));
            }
            if !f.is_value() {
                return None;
            }
            if let Some(a2) = step_core(a, delta) {
                return Some(Term::app(f.clone(), a2));
            }
            match &**f {
                Term::Abs(x, _, body) if a.is_value() => Some(body.subst(x, a)),
                _ => None,
            }
        }
        Term::Cons(h, tl) => {
            if let Some(h2) = step_core(h, delta) {
                return Some(Term::cons(h2, tl.clone()));
            }
            if !h.is_value() {
                return None;
            }
            step_core(tl, delta).map(|t2| Term::cons(h.clone(), t2))
        }
        Term::Match {
            scrutinee,
            nil_case,
            head,
            tail,
            cons_case,
        } => {
            if let Some(s2) = step_core(scrutinee, delta) {
                return Some(Arc::new(Term::Match {
                    scrutinee: s2,
                    nil_case: nil_case.clone(),
                    head: head.clone(),
                    tail: tail.clone(),
                    cons_case: cons_case.clone(),
                }));
            }
            match &**scrutinee {
                Term::Nil => Some(nil_case.clone()),
                Term::Cons(v1, v2) if scrutinee.is_value() && list_like(v2) => {
                    Some(bind_pair(cons_case, head, tail, v1, v2))
                }
                _ => None,
            }
        }
        Term::Fix { .. } => Some(unroll(t)),
        Term::Sel(s, k) => {
            if let Some(s2) = step_core(s, delta) {
                return Some(Term::sel(s2, *k));
            }
            match &**s {
                Term::TrailLit(tr) => Some(Term::trail(tr.child(*k))),
                _ => None,
            }
        }
        Term::Unpack(b, s) => {
            if let Some(s2) = step_core(s, delta) {
                return Some(Term::unpack(*b, s2));
            }
            match &**s {
                Term::TrailLit(tr) => Some(tr.unpack(*b)),
                _ => None,
            }
        }
    }
}

/// Big-step reducer computing the same normal form as iterating
/// [`step_core`], charging one fuel unit per contraction. Normal forms
/// already produced are remembered by address, so values substituted
/// into bodies are not traversed again.
pub struct Reducer<'a> {
    delta: &'a dyn Fn(&Name) -> Option<Arc<Term>>,
    fuel: &'a mut Fuel,
    known: FxHashMap<*const Term, (Arc<Term>, Arc<Term>, bool)>,
    /// Free variables by address, so substituting a long list costs O(1)
    /// once its cells have been seen.
    free: FxHashMap<*const Term, (Arc<Term>, Arc<BTreeSet<Name>>)>,
}

impl<'a> Reducer<'a> {
    pub fn new(delta: &'a dyn Fn(&Name) -> Option<Arc<Term>>, fuel: &'a mut Fuel) -> Self {
        Reducer {
            delta,
            fuel,
            known: FxHashMap::default(),
            free: FxHashMap::default(),
        }
    }

    fn free_vars(&mut self, t: &Arc<Term>) -> Arc<BTreeSet<Name>> {
        if let Some((_, fv)) = self.free.get(&Arc::as_ptr(t)) {
            return fv.clone();
        }
        let union = |parts: &[&Arc<Term>], this: &mut Self| {
            let mut acc = BTreeSet::new();
            for p in parts {
                acc.extend(this.free_vars(p).iter().cloned());
            }
            acc
        };
        let fv = match &**t {
            Term::Cons(a, b) | Term::App(a, b) => union(&[a, b], self),
            Term::Nil | Term::Choose(_) => BTreeSet::new(),
            Term::Sel(a, _) | Term::Unpack(_, a) => union(&[a], self),
            Term::Abs(x, a, b) => {
                let mut fv = union(&[b], self);
                fv.remove(x);
                fv.extend(a.free_vars());
                fv
            }
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                let mut inner = union(&[cons_case], self);
                inner.remove(head);
                inner.remove(tail);
                let mut fv = union(&[scrutinee, nil_case], self);
                fv.extend(inner);
                fv
            }
            Term::Fix {
                binder,
                annot,
                body,
                default,
                ..
            } => {
                let mut fv = union(&[body], self);
                fv.remove(binder);
                fv.extend(annot.free_vars());
                fv.extend(union(&[default], self));
                fv
            }
            _ => t.free_vars(),
        };
        let fv = Arc::new(fv);
        self.free.insert(Arc::as_ptr(t), (t.clone(), fv.clone()));
        fv
    }

    fn subst(&mut self, body: &Arc<Term>, x: &Name, v: &Arc<Term>) -> Arc<Term> {
        let fv = (*self.free_vars(v)).clone();
        let free = &self.free;
        let untouched =
            |t: &Term| free.get(&(t as *const Term)).is_some_and(|(_, fv)| !fv.contains(x));
        body.subst_with(&Subst::with_free_vars(x, v, fv).skipping(&untouched))
    }

    pub fn reduce(&mut self, t: &Arc<Term>) -> Result<Arc<Term>, EvalError> {
        Ok(self.nf(t)?.0)
    }

    /// Normal form of `t` and whether it is a value.
    fn nf(&mut self, t: &Arc<Term>) -> Result<(Arc<Term>, bool), EvalError> {
        if let Some((_, r, v)) = self.known.get(&Arc::as_ptr(t)) {
            return Ok((r.clone(), *v));
        }
        let (r, v) = self.nf_uncached(t)?;
        // Each entry holds its key alive so the address cannot be reused.
        self.known.insert(Arc::as_ptr(t), (t.clone(), r.clone(), v));
        self.known
            .entry(Arc::as_ptr(&r))
            .or_insert((r.clone(), r.clone(), v));
        Ok((r, v))
    }

    fn nf_uncached(&mut self, t: &Arc<Term>) -> Result<(Arc<Term>, bool), EvalError> {
        match &**t {
            Term::Var(x) => match (self.delta)(x) {
                Some(def) => {
                    self.fuel.tick()?;
                    self.nf(&def)
                }
                None => Ok((t.clone(), true)),
            },
            Term::Abs(..) | Term::Nil | Term::TrailLit(_) => Ok((t.clone(), true)),
            Term::Choose(_) => Ok((t.clone(), false)),
            Term::App(f, a) => {
                let (f2, fv) = self.nf(f)?;
                if !fv {
                    return Ok((rebuild2(t, f, a, &f2, a, Term::app), false));
                }
                let (a2, av) = self.nf(a)?;
                match &*f2 {
                    Term::Abs(x, _, body) if av => {
                        self.fuel.tick()?;
                        let r = self.subst(body, x, &a2);
                        self.nf(&r)
                    }
                    _ => Ok((rebuild2(t, f, a, &f2, &a2, Term::app), false)),
                }
            }
            Term::Cons(h, tl) => {
                let (h2, hv) = self.nf(h)?;
                if !hv {
                    return Ok((rebuild2(t, h, tl, &h2, tl, Term::cons), false));
                }
                let (t2, tv) = self.nf(tl)?;
                Ok((rebuild2(t, h, tl, &h2, &t2, Term::cons), tv))
            }
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                let (s2, sv) = self.nf(scrutinee)?;
                match &*s2 {
                    Term::Nil => {
                        self.fuel.tick()?;
                        self.nf(nil_case)
                    }
                    Term::Cons(v1, v2) if sv && list_like(v2) => {
                        self.fuel.tick()?;
                        let body = if head != tail && !self.free_vars(v1).contains(tail) {
                            let b = self.subst(cons_case, head, v1);
                            self.subst(&b, tail, v2)
                        } else {
                            bind_pair(cons_case, head, tail, v1, v2)
                        };
                        self.nf(&body)
                    }
                    _ => {
                        let m = if Arc::ptr_eq(&s2, scrutinee) {
                            t.clone()
                        } else {
                            Arc::new(Term::Match {
                                scrutinee: s2,
                                nil_case: nil_case.clone(),
                                head: head.clone(),
                                tail: tail.clone(),
                                cons_case: cons_case.clone(),
                            })
                        };
                        Ok((m, false))
                    }
                }
            }
            Term::Fix { .. } => {
                self.fuel.tick()?;
                self.nf(&unroll(t))
            }
            Term::Sel(s, k) => {
                let (s2, sv) = self.nf(s)?;
                match &*s2 {
                    Term::TrailLit(tr) => {
                        self.fuel.tick()?;
                        Ok((Term::trail(tr.child(*k)), true))
                    }
                    _ => {
                        let r = if Arc::ptr_eq(&s2, s) {
                            t.clone()
                        } else {
                            Term::sel(s2, *k)
                        };
                        Ok((r, sv))
                    }
                }
            }
            Term::Unpack(b, s) => {
                let (s2, sv) = self.nf(s)?;
                match &*s2 {
                    Term::TrailLit(tr) => {
                        self.fuel.tick()?;
                        self.nf(&tr.unpack(*b))
                    }
                    _ => {
                        let r = if Arc::ptr_eq(&s2, s) {
                            t.clone()
                        } else {
                            Term::unpack(*b, s2)
                        };
                        Ok((r, sv))
                    }
                }
            }
        }
    }
}

fn rebuild2(
    orig: &Arc<Term>,
    a: &Arc<Term>,
    b: &Arc<Term>,
    a2: &Arc<Term>,
    b2: &Arc<Term>,
    mk: fn(Arc<Term>, Arc<Term>) -> Arc<Term>,
) -> Arc<Term> {
    if Arc::ptr_eq(a, a2) && Arc::ptr_eq(b, b2) {
        orig.clone()
    } else {
        mk(a2.clone(), b2.clone())
    }
}

fn no_delta(_: &Name) -> Option<Arc<Term>> {
    None
}

/// Evaluates a closed core term (trail literals allowed) to a value.
pub fn eval_core(t: &Arc<Term>, fuel: u64) -> Result<Arc<Term>, EvalError> {
    let mut fuel = Fuel::new(fuel);
    let r = Reducer::new(&no_delta, &mut fuel).reduce(t)?;
    if r.is_value() {
        Ok(r)
    } else {
        Err(EvalError::StuckTerm(r.to_string()))
    }
}

/// Applies a lowered program to a concrete trail and evaluates it.
pub fn run_lowered(program: &Arc<Term>, trail: Trail, fuel: u64) -> Result<Arc<Term>, EvalError> {
    eval_core(&Term::app(program.clone(), Term::trail(trail)), fuel)
}
