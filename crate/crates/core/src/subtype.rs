//! Algorithmic subtyping.
//!
//! Strategy per query: reflexivity, `Top`, a fast path through `widen`,
//! the structural rules, existential introduction on the right via a
//! greedy `solve`, and finally normalization plus untangling of both sides.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::session::{rename_ty, Session, TypeError, Verdict};
use crate::syntax::{fresh_variant, Base, Context, Name, Syntax, Term, Type};

/// Exposes the function type of a singleton:
/// `widen({t : Πx:S.T}) = Πx:S.{t x : T}`, `widen({t : U}) = widen(U)`.
pub fn widen(ty: &Arc<Type>) -> Arc<Type> {
    match &**ty {
        Type::Singleton(t, u) => match &**u {
            Type::Pi(x, s, body) => {
                let (x2, body) = if t.has_free(x) {
                    let mut taken = t.names();
                    taken.extend(body.names());
                    let x2 = fresh_variant(x, |n| taken.contains(n));
                    let b = rename_ty(body, x, &x2);
                    (x2, b)
                } else {
                    (x.clone(), body.clone())
                };
                let app = Term::app(t.clone(), Term::var(x2.clone()));
                Type::pi(x2, s.clone(), Type::singleton(app, body))
            }
            _ => widen(u),
        },
        _ => ty.clone(),
    }
}

impl Session {
    /// `Γ ⊢ T1 <: T2`. `Err` only for fuel exhaustion.
    pub fn subtype(&mut self, ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>) -> Result<bool, TypeError> {
        self.reserve_ctx(ctx);
        self.reserve_ty(t1);
        self.reserve_ty(t2);
        self.sub_entry(ctx, t1, t2)
    }

    /// Subtyping without re-reserving names; for use inside a session.
    pub(crate) fn sub_entry_pub(&mut self, ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>) -> Result<bool, TypeError> {
        self.sub_entry(ctx, t1, t2)
    }

    /// Structural attempt first, then the normalized and untangled query.
    fn sub_entry(&mut self, ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>) -> Result<bool, TypeError> {
        if self.sub_struct(ctx, t1, t2)? {
            return Ok(true);
        }
        let (n1, n2) = match (self.normalize(ctx, t1), self.normalize(ctx, t2)) {
            (Err(TypeError::OutOfFuel), _) | (_, Err(TypeError::OutOfFuel)) => return Err(TypeError::OutOfFuel),
            (Ok(a), Ok(b)) => (a, b),
            _ => return Ok(false),
        };
        let u1 = self.untangle(&n1);
        let u2 = self.untangle(&n2);
        if u1.alpha_eq(t1) && u2.alpha_eq(t2) {
            return Ok(false);
        }
        self.note(|| format!("SubNorm: {u1} <: {u2}"));
        self.sub_struct(ctx, &u1, &u2)
    }

    fn sub_struct(&mut self, ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>) -> Result<bool, TypeError> {
        self.tick()?;
        if self.tracing() {
            self.note(|| format!("{t1} <: {t2}"));
        }
        self.enter();
        let r = self.sub_rules(ctx, t1, t2);
        self.leave();
        if let Ok(ok) = &r {
            let ok = *ok;
            self.note(|| if ok { "  yes".into() } else { "  no".into() });
        }
        r
    }

    fn sub_rules(&mut self, ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>) -> Result<bool, TypeError> {
        if t1.alpha_eq(t2) {
            self.note(|| "SubRefl".into());
            return Ok(true);
        }
        if t2.is_base(Base::Top) {
            self.note(|| "SubTop".into());
            return Ok(true);
        }
        if let Type::Singleton(_, u) = &**t1 {
            let w = widen(t1);
            self.note(|| "widen".into());
            if self.sub_struct(ctx, &w, t2)? {
                return Ok(true);
            }
            if matches!(**u, Type::Pi(..)) {
                self.note(|| "SubSing".into());
                if self.sub_struct(ctx, u, t2)? {
                    return Ok(true);
                }
            }
        }
        match (&**t1, &**t2) {
            (Type::Exists(x, s, body), _) => {
                self.note(|| "SubExistsLeft".into());
                let x2 = self.binder(ctx, x, &t2.free_vars());
                let inner = ctx.extend(x2.clone(), s.clone());
                return self.sub_entry(&inner, &rename_ty(body, x, &x2), t2);
            }
            (
                Type::Match {
                    nil_type,
                    head,
                    tail,
                    cons_type,
                    ..
                },
                _,
            ) => {
                self.note(|| "SubMatch".into());
                if !self.sub_struct(ctx, nil_type, t2)? {
                    return Ok(false);
                }
                let avoid = t2.free_vars();
                let x = self.binder(ctx, head, &avoid);
                let y = self.binder(ctx, tail, &avoid);
                let branch = rename_ty(&rename_ty(cons_type, head, &x), tail, &y);
                let mut inner = ctx.extend(x, Type::top());
                inner.push(y, Type::list());
                return self.sub_entry(&inner, &branch, t2);
            }
            (Type::Cons(..), Type::Base(Base::List)) => {
                self.note(|| "SubCons1".into());
                return Ok(true);
            }
            (Type::Cons(h1, r1), Type::Cons(h2, r2)) => {
                self.note(|| "SubCons2".into());
                return Ok(self.sub_struct(ctx, h1, h2)? && self.sub_struct(ctx, r1, r2)?);
            }
            (Type::Pi(x, s1, b1), Type::Pi(y, s2, b2)) => {
                self.note(|| "SubPi".into());
                if !self.sub_entry(ctx, s2, s1)? {
                    return Ok(false);
                }
                let mut avoid = t1.free_vars();
                avoid.extend(t2.free_vars());
                let v = self.binder(ctx, x, &avoid);
                let inner = ctx.extend(v.clone(), s2.clone());
                return self.sub_entry(&inner, &rename_ty(b1, x, &v), &rename_ty(b2, y, &v));
            }
            _ => {}
        }
        if let Type::Exists(x, s, body) = &**t2 {
            return self.exists_right(ctx, t1, x, s, body);
        }
        Ok(false)
    }

    fn exists_right(
        &mut self,
        ctx: &Context,
        t1: &Arc<Type>,
        x: &Name,
        s: &Arc<Type>,
        body: &Arc<Type>,
    ) -> Result<bool, TypeError> {
        let x2 = self.binder(ctx, x, &t1.free_vars());
        let body = rename_ty(body, x, &x2);
        let Some(sol) = self.solve(ctx, &x2, t1, &body)? else {
            self.note(|| format!("SubExistsRight: no solution for {x2}"));
            return Ok(false);
        };
        let Type::Singleton(t, _) = &*sol else {
            unreachable!("solve returns singletons")
        };
        self.note(|| format!("SubExistsRight: {x2} := {t}"));
        Ok(self.sub_entry(ctx, &sol, s)? && self.sub_entry(ctx, t1, &body.subst(&x2, t))?)
    }

    /// `solve_x(T1, T2)`: the first term aligned against `x`, as an inferred
    /// singleton, provided it is well formed in `ctx`.
    pub fn solve(&mut self, ctx: &Context, x: &Name, t1: &Arc<Type>, t2: &Arc<Type>) -> Result<Option<Arc<Type>>, TypeError> {
        let mut al = Aligner {
            x,
            left: Vec::new(),
            right: Vec::new(),
            found: None,
        };
        al.ty(t1, t2);
        let Some(Some(cand)) = al.found else {
            return Ok(None);
        };
        let fv = cand.free_vars();
        if fv.contains(x) || fv.iter().any(|v| !ctx.contains(v)) {
            return Ok(None);
        }
        match self.infer(ctx, &cand) {
            Ok(u) => Ok(Some(u)),
            Err(TypeError::OutOfFuel) => Err(TypeError::OutOfFuel),
            Err(_) => Ok(None),
        }
    }

    pub fn subtype_verdict(&mut self, ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>) -> Verdict {
        match self.subtype(ctx, t1, t2) {
            Ok(true) => Verdict::Yes,
            Ok(false) => Verdict::No,
            Err(_) => Verdict::Unknown,
        }
    }
}

/// Simultaneous walk of two types looking for the first position where the
/// right side is the variable `x`. `found` is `Some(None)` once a candidate
/// mentions a binder local to the walk.
struct Aligner<'a> {
    x: &'a Name,
    left: Vec<Name>,
    right: Vec<Name>,
    found: Option<Option<Arc<Term>>>,
}

impl Aligner<'_> {
    fn done(&self) -> bool {
        self.found.is_some()
    }

    fn shadowed(&self) -> bool {
        self.right.contains(self.x)
    }

    fn under(&mut self, l: &[&Name], r: &[&Name], k: impl FnOnce(&mut Self)) {
        self.left.extend(l.iter().map(|n| (*n).clone()));
        self.right.extend(r.iter().map(|n| (*n).clone()));
        k(self);
        self.left.truncate(self.left.len() - l.len());
        self.right.truncate(self.right.len() - r.len());
    }

    fn term(&mut self, a: &Arc<Term>, b: &Arc<Term>) {
        if self.done() {
            return;
        }
        if let Term::Var(v) = &**b {
            if v == self.x && !self.shadowed() {
                let local: BTreeSet<&Name> = self.left.iter().collect();
                let ok = a.free_vars().iter().all(|n| !local.contains(n));
                self.found = Some(ok.then(|| a.clone()));
                return;
            }
        }
        match (&**a, &**b) {
            (Term::Abs(x, s1, b1), Term::Abs(y, s2, b2)) => {
                self.ty(s1, s2);
                self.under(&[x], &[y], |al| al.term(b1, b2));
            }
            (Term::App(a1, b1), Term::App(a2, b2)) | (Term::Cons(a1, b1), Term::Cons(a2, b2)) => {
                self.term(a1, a2);
                self.term(b1, b2);
            }
            (
                Term::Match {
                    scrutinee: s1,
                    nil_case: n1,
                    head: h1,
                    tail: t1,
                    cons_case: c1,
                },
                Term::Match {
                    scrutinee: s2,
                    nil_case: n2,
                    head: h2,
                    tail: t2,
                    cons_case: c2,
                },
            ) => {
                self.term(s1, s2);
                self.term(n1, n2);
                self.under(&[h1, t1], &[h2, t2], |al| al.term(c1, c2));
            }
            (
                Term::Fix {
                    binder: x1,
                    annot: a1,
                    body: b1,
                    default: d1,
                    ..
                },
                Term::Fix {
                    binder: x2,
                    annot: a2,
                    body: b2,
                    default: d2,
                    ..
                },
            ) => {
                self.ty(a1, a2);
                self.under(&[x1], &[x2], |al| al.term(b1, b2));
                self.term(d1, d2);
            }
            (Term::Sel(t1, k1), Term::Sel(t2, k2)) if k1 == k2 => self.term(t1, t2),
            (Term::Unpack(b1, t1), Term::Unpack(b2, t2)) if b1 == b2 => self.term(t1, t2),
            _ => {}
        }
    }

    fn ty(&mut self, a: &Arc<Type>, b: &Arc<Type>) {
        if self.done() {
            return;
        }
        match (&**a, &**b) {
            (Type::Singleton(s1, u1), Type::Singleton(s2, u2)) => {
                self.term(s1, s2);
                self.ty(u1, u2);
            }
            (Type::Exists(x, _, body), _) => self.under(&[x], &[], |al| al.ty(body, b)),
            (_, Type::Exists(y, _, body)) => self.under(&[], &[y], |al| al.ty(a, body)),
            (Type::Singleton(_, u1), _) => self.ty(u1, b),
            (Type::Cons(..), Type::Singleton(_, u2)) => self.ty(a, u2),
            (Type::Pi(x, s1, b1), Type::Pi(y, s2, b2)) => {
                self.ty(s1, s2);
                self.under(&[x], &[y], |al| al.ty(b1, b2));
            }
            (Type::Cons(h1, t1), Type::Cons(h2, t2)) => {
                self.ty(h1, h2);
                self.ty(t1, t2);
            }
            (
                Type::Match {
                    scrutinee: s1,
                    nil_type: n1,
                    head: h1,
                    tail: t1,
                    cons_type: c1,
                },
                Type::Match {
                    scrutinee: s2,
                    nil_type: n2,
                    head: h2,
                    tail: t2,
                    cons_type: c2,
                },
            ) => {
                self.term(s1, s2);
                self.ty(n1, n2);
                self.under(&[h1, t1], &[h2, t2], |al| al.ty(c1, c2));
            }
            _ => {}
        }
    }
}

/// `Γ ⊢ T1 <: T2` with a fresh session; fuel exhaustion counts as `false`.
pub fn subtype(ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>, fuel: u64) -> bool {
    Session::new(fuel).subtype_verdict(ctx, t1, t2).holds()
}

/// Like [`subtype`] but keeps the unknown case apart and returns the rule trace.
pub fn subtype_traced(ctx: &Context, t1: &Arc<Type>, t2: &Arc<Type>, fuel: u64) -> (Verdict, Vec<String>) {
    let mut s = Session::new(fuel).with_trace();
    let v = s.subtype_verdict(ctx, t1, t2);
    (v, s.take_trace())
}

/// `solve_x(T1, S, T2)` with a fresh session. `S` does not influence the
/// candidate; it is checked by the caller of the rule.
pub fn solve_x(ctx: &Context, x: &Name, t1: &Arc<Type>, _s: &Arc<Type>, t2: &Arc<Type>, fuel: u64) -> Option<Arc<Type>> {
    let mut s = Session::new(fuel);
    s.reserve_ctx(ctx);
    s.reserve_ty(t1);
    s.reserve_ty(t2);
    s.solve(ctx, x, t1, t2).ok().flatten()
}
