//! Lowering of surface terms and types to the core calculus: every
//! `choose[B]` becomes `unpack[B]` applied to a selection of a trail.

use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{check_dialect, Base, Dialect, Name, Supply, Syntax, Term, Type};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowerError {
    #[error("not a surface term: {0}")]
    Dialect(String),
}

struct Lowering<'a> {
    supply: &'a mut Supply,
    lower_types: bool,
}

impl Lowering<'_> {
    fn fresh_trail(&mut self) -> Name {
        self.supply.fresh("z")
    }

    fn term(&mut self, p: &Arc<Term>, t: &Arc<Term>) -> Arc<Term> {
        match &**t {
            Term::Var(_) | Term::Nil => t.clone(),
            Term::Choose(b) => Term::unpack(*b, p.clone()),
            Term::Abs(x, a, body) => {
                let z = self.fresh_trail();
                let zt = Term::var(z.clone());
                let a = self.annot(a);
                let body = self.term(&zt, body);
                Term::abs(z, Type::trail(), Term::abs(x.clone(), a, body))
            }
            Term::App(f, a) => {
                let f = self.term(&Term::sel(p.clone(), 1), f);
                let a = self.term(&Term::sel(p.clone(), 2), a);
                Term::app(Term::app(f, Term::sel(p.clone(), 3)), a)
            }
            Term::Cons(h, tl) => Term::cons(
                self.term(&Term::sel(p.clone(), 1), h),
                self.term(&Term::sel(p.clone(), 2), tl),
            ),
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => Arc::new(Term::Match {
                scrutinee: self.term(&Term::sel(p.clone(), 1), scrutinee),
                nil_case: self.term(&Term::sel(p.clone(), 2), nil_case),
                head: head.clone(),
                tail: tail.clone(),
                cons_case: self.term(&Term::sel(p.clone(), 3), cons_case),
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
                annot: self.annot(annot),
                body: self.term(&Term::sel(p.clone(), 1), body),
                default: self.term(&Term::sel(p.clone(), 2), default),
            }),
            Term::Sel(..) | Term::Unpack(..) | Term::TrailLit(_) => {
                unreachable!("dialect checked before lowering")
            }
        }
    }

    fn annot(&mut self, a: &Arc<Type>) -> Arc<Type> {
        if self.lower_types {
            self.ty(a)
        } else {
            a.clone()
        }
    }

    fn ty(&mut self, t: &Arc<Type>) -> Arc<Type> {
        match &**t {
            Type::Base(_) => t.clone(),
            Type::Singleton(s, u) => {
                let z = self.fresh_trail();
                let s = self.term(&Term::var(z.clone()), s);
                let u = self.ty(u);
                Type::exists(z, Type::trail(), Type::singleton(s, u))
            }
            Type::Pi(x, s, body) => {
                let z = self.fresh_trail();
                let s = self.ty(s);
                let body = self.ty(body);
                Type::pi(z, Type::trail(), Type::pi(x.clone(), s, body))
            }
            Type::Cons(h, tl) => Type::cons(self.ty(h), self.ty(tl)),
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => {
                let z = self.fresh_trail();
                let scrutinee = self.term(&Term::var(z.clone()), scrutinee);
                let bound = scrutinee.has_free(&z);
                let m = Arc::new(Type::Match {
                    scrutinee,
                    nil_type: self.ty(nil_type),
                    head: head.clone(),
                    tail: tail.clone(),
                    cons_type: self.ty(cons_type),
                });
                if bound {
                    Type::exists(z, Type::trail(), m)
                } else {
                    m
                }
            }
            Type::Exists(x, s, body) => Type::exists(x.clone(), self.ty(s), self.ty(body)),
        }
    }
}

fn ensure_surface(t: &Term) -> Result<(), LowerError> {
    if check_dialect(t, Dialect::Surface) {
        Ok(())
    } else {
        Err(LowerError::Dialect(t.to_string()))
    }
}

/// `⟨t⟩^p`. Fresh trail binders come from `supply`, which must already
/// reserve every name of `t` and `p`.
pub fn lower_term(
    supply: &mut Supply,
    p: &Arc<Term>,
    t: &Arc<Term>,
) -> Result<Arc<Term>, LowerError> {
    ensure_surface(t)?;
    Ok(Lowering {
        supply,
        lower_types: true,
    }
    .term(p, t))
}

/// `⟨T⟩`.
pub fn lower_type(supply: &mut Supply, t: &Arc<Type>) -> Result<Arc<Type>, LowerError> {
    let probe = Term::Abs(Name::from("_"), t.clone(), Term::nil());
    ensure_surface(&probe)?;
    Ok(Lowering {
        supply,
        lower_types: true,
    }
    .ty(t))
}

/// `λz:Trail. ⟨t⟩^z`.
pub fn lower_program(t: &Arc<Term>) -> Result<Arc<Term>, LowerError> {
    let mut supply = Supply::new();
    supply.reserve_term(t);
    let z = supply.fresh("z");
    let body = lower_term(&mut supply, &Term::var(z.clone()), t)?;
    Ok(Term::abs(z, Type::trail(), body))
}

/// Lowers term structure only, leaving annotations untouched. Used by the
/// surface evaluator, which never inspects types.
pub(crate) fn lower_term_untyped(supply: &mut Supply, p: &Arc<Term>, t: &Arc<Term>) -> Arc<Term> {
    Lowering {
        supply,
        lower_types: false,
    }
    .term(p, t)
}

/// Paths at which `unpack` is applied to a selection of `root`, in
/// occurrence order. Used to check the distinct-trails discipline.
pub fn unpack_sites(root: &Name, t: &Term) -> Vec<(Base, Vec<u8>)> {
    fn go(root: &Name, t: &Term, acc: &mut Vec<(Base, Vec<u8>)>) {
        match t {
            Term::Unpack(b, s) => {
                if let Some((x, path)) = s.as_selection() {
                    if x == root {
                        acc.push((*b, path));
                        return;
                    }
                }
                go(root, s, acc)
            }
            Term::Abs(x, _, b) => {
                if x != root {
                    go(root, b, acc)
                }
            }
            Term::App(a, b) | Term::Cons(a, b) => {
                go(root, a, acc);
                go(root, b, acc);
            }
            Term::Match {
                scrutinee,
                nil_case,
                cons_case,
                ..
            } => {
                go(root, scrutinee, acc);
                go(root, nil_case, acc);
                go(root, cons_case, acc);
            }
            Term::Fix { body, default, .. } => {
                go(root, body, acc);
                go(root, default, acc);
            }
            Term::Sel(s, _) => go(root, s, acc),
            Term::Var(_) | Term::Nil | Term::Choose(_) | Term::TrailLit(_) => {}
        }
    }
    let mut acc = Vec::new();
    go(root, t, &mut acc);
    acc
}
