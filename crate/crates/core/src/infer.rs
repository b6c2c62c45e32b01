//! Bidirectional type inference for core terms.
//!
//! Inference is precise: the result is always a singleton whose term is
//! α-equal to the input.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::session::{rename_term, rename_ty, Session, TypeError};
use crate::subtype::widen;
use crate::syntax::{Base, Context, Syntax, Term, Type};
use crate::trail::Trail;

impl Session {
    /// `Γ ⊢ t ⇑ T`.
    pub fn infer(&mut self, ctx: &Context, t: &Arc<Term>) -> Result<Arc<Type>, TypeError> {
        self.tick()?;
        match &**t {
            Term::Var(x) => match ctx.lookup(x) {
                Some(ty) => Ok(Type::singleton(t.clone(), ty.clone())),
                None => Err(TypeError::infer(t, format!("unbound variable {x}"))),
            },
            Term::Abs(x, s, body) => {
                self.well_formed(ctx, s)?;
                let x2 = self.binder(ctx, x, &BTreeSet::new());
                let body2 = rename_term(body, x, &x2);
                let inner = ctx.extend(x2.clone(), s.clone());
                let bt = self.infer(&inner, &body2)?;
                let term = if x2 == *x { t.clone() } else { Term::abs(x2.clone(), s.clone(), body2) };
                Ok(Type::singleton(term, Type::pi(x2, s.clone(), bt)))
            }
            Term::App(f, a) => {
                let v = self.infer(ctx, f)?;
                let Type::Pi(x, s, body) = &*widen(&v) else {
                    return Err(TypeError::infer(f, format!("not a function: {v}")));
                };
                if !self.check(ctx, a, s)? {
                    return Err(TypeError::infer(a, format!("argument does not have type {s}")));
                }
                Ok(body.subst(x, a))
            }
            Term::Fix {
                binder,
                annot,
                body,
                default,
                ..
            } => {
                self.well_formed(ctx, annot)?;
                let f = self.binder(ctx, binder, &BTreeSet::new());
                let inner = ctx.extend(f.clone(), annot.clone());
                if !self.check(&inner, &rename_term(body, binder, &f), annot)? {
                    return Err(TypeError::infer(body, format!("recursive body does not have type {annot}")));
                }
                if !self.check(ctx, default, annot)? {
                    return Err(TypeError::infer(default, format!("default does not have type {annot}")));
                }
                Ok(Type::singleton(t.clone(), annot.clone()))
            }
            Term::Nil => Ok(Type::singleton(t.clone(), Type::list())),
            Term::Cons(h, tl) => {
                let th = self.infer(ctx, h)?;
                let tt = self.infer(ctx, tl)?;
                if !self.sub_entry_pub(ctx, &tt, &Type::list())? {
                    return Err(TypeError::infer(tl, "tail is not a list"));
                }
                Ok(Type::singleton(t.clone(), Type::cons(th, tt)))
            }
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                if !self.check(ctx, scrutinee, &Type::list())? {
                    return Err(TypeError::infer(scrutinee, "scrutinee is not a list"));
                }
                let tn = self.infer(ctx, nil_case)?;
                let x = self.binder(ctx, head, &BTreeSet::new());
                let y = self.binder(ctx, tail, &BTreeSet::new());
                let case = rename_term(&rename_term(cons_case, head, &x), tail, &y);
                let mut inner = ctx.extend(x.clone(), Type::top());
                inner.push(y.clone(), Type::list());
                let tc = self.infer(&inner, &case)?;
                let m = Arc::new(Type::Match {
                    scrutinee: scrutinee.clone(),
                    nil_type: tn,
                    head: x,
                    tail: y,
                    cons_type: tc,
                });
                Ok(Type::singleton(t.clone(), m))
            }
            Term::Sel(s, _) => {
                if !self.check(ctx, s, &Type::trail())? {
                    return Err(TypeError::infer(s, "selection from a non-trail"));
                }
                Ok(Type::singleton(t.clone(), Type::trail()))
            }
            Term::Unpack(b, s) => {
                if !self.check(ctx, s, &Type::trail())? {
                    return Err(TypeError::infer(s, "unpack of a non-trail"));
                }
                Ok(Type::singleton(t.clone(), Type::base(*b)))
            }
            Term::TrailLit(tr) => {
                check_trail(t, tr)?;
                Ok(Type::singleton(t.clone(), Type::trail()))
            }
            Term::Choose(_) => Err(TypeError::infer(t, "choose must be lowered before type checking")),
        }
    }

    /// `Γ ⊢ t ⇓ T`. Inference failures propagate; a failed subtyping
    /// query is `Ok(false)`.
    pub fn check(&mut self, ctx: &Context, t: &Arc<Term>, ty: &Arc<Type>) -> Result<bool, TypeError> {
        let inferred = self.infer(ctx, t)?;
        self.sub_entry_pub(ctx, &inferred, ty)
    }

    /// Checks that singletons are inhabited by their term and that match
    /// scrutinees are lists, throughout `ty`.
    pub fn well_formed(&mut self, ctx: &Context, ty: &Arc<Type>) -> Result<(), TypeError> {
        match &**ty {
            Type::Base(_) => Ok(()),
            Type::Singleton(t, u) => {
                self.well_formed(ctx, u)?;
                if self.check(ctx, t, u)? {
                    Ok(())
                } else {
                    Err(TypeError::infer(t, format!("does not inhabit {u}")))
                }
            }
            Type::Pi(x, s, body) | Type::Exists(x, s, body) => {
                self.well_formed(ctx, s)?;
                let x2 = self.binder(ctx, x, &BTreeSet::new());
                let inner = ctx.extend(x2.clone(), s.clone());
                self.well_formed(&inner, &rename_ty(body, x, &x2))
            }
            Type::Cons(h, t) => {
                self.well_formed(ctx, h)?;
                self.well_formed(ctx, t)
            }
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => {
                if !self.check(ctx, scrutinee, &Type::list())? {
                    return Err(TypeError::infer(scrutinee, "match scrutinee is not a list"));
                }
                self.well_formed(ctx, nil_type)?;
                let x = self.binder(ctx, head, &BTreeSet::new());
                let y = self.binder(ctx, tail, &BTreeSet::new());
                let branch = rename_ty(&rename_ty(cons_type, head, &x), tail, &y);
                let mut inner = ctx.extend(x, Type::top());
                inner.push(y, Type::list());
                self.well_formed(&inner, &branch)
            }
        }
    }
}

/// Trail literals may only carry closed values, and `List` leaves lists.
fn check_trail(t: &Term, tr: &Trail) -> Result<(), TypeError> {
    match tr {
        Trail::Empty => Ok(()),
        Trail::Leaf(b, v) => {
            if !v.is_value() || !v.free_vars().is_empty() {
                return Err(TypeError::infer(t, format!("trail leaf {v} is not a closed value")));
            }
            if *b == Base::List && !v.is_list_value() {
                return Err(TypeError::infer(t, format!("trail leaf {v} is tagged List but is not a list")));
            }
            Ok(())
        }
        Trail::Node(a, b, c) => {
            check_trail(t, a)?;
            check_trail(t, b)?;
            check_trail(t, c)
        }
    }
}

fn session_for(ctx: &Context, fuel: u64) -> Session {
    let mut s = Session::new(fuel);
    s.reserve_ctx(ctx);
    s
}

/// `Γ ⊢ t ⇑ T` with a fresh session.
pub fn infer(ctx: &Context, t: &Arc<Term>, fuel: u64) -> Result<Arc<Type>, TypeError> {
    let mut s = session_for(ctx, fuel);
    s.reserve_term(t);
    s.infer(ctx, t)
}

/// `Γ ⊢ t ⇓ T` with a fresh session. Fuel exhaustion in the final
/// subtyping query counts as `false`.
pub fn check(ctx: &Context, t: &Arc<Term>, ty: &Arc<Type>, fuel: u64) -> Result<bool, TypeError> {
    let mut s = session_for(ctx, fuel);
    s.reserve_term(t);
    s.reserve_ty(ty);
    match s.check(ctx, t, ty) {
        Err(TypeError::OutOfFuel) => Ok(false),
        r => r,
    }
}

pub fn well_formed(ctx: &Context, ty: &Arc<Type>, fuel: u64) -> Result<(), TypeError> {
    let mut s = session_for(ctx, fuel);
    s.reserve_ty(ty);
    s.well_formed(ctx, ty)
}
