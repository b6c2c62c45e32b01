//! Type normalization and untangling of trail existentials.
//!
//! Normalization reduces the terms embedded in singletons and match types
//! under the context and re-infers precise bounds. Untangling splits an
//! existential over a trail into one existential per independent selection.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::betadelta::bd_reduce_with;
use crate::session::{rename_ty, Session, TypeError};
use crate::syntax::{Base, Context, Name, Supply, Syntax, Term, Type};
use crate::trail::SelPath;

impl Session {
    /// `Γ ⊢ T →N T'`.
    pub fn normalize(&mut self, ctx: &Context, ty: &Arc<Type>) -> Result<Arc<Type>, TypeError> {
        self.tick()?;
        match &**ty {
            Type::Base(_) => Ok(ty.clone()),
            Type::Singleton(t, _) => {
                let t2 = bd_reduce_with(ctx, t, &mut self.fuel)?;
                self.infer(ctx, &t2)
            }
            Type::Pi(x, s, body) | Type::Exists(x, s, body) => {
                let s2 = self.normalize(ctx, s)?;
                let x2 = self.binder(ctx, x, &BTreeSet::new());
                let inner = ctx.extend(x2.clone(), s2.clone());
                let body2 = self.normalize(&inner, &rename_ty(body, x, &x2))?;
                Ok(match &**ty {
                    Type::Pi(..) => Type::pi(x2, s2, body2),
                    _ if body2.has_free(&x2) => Type::exists(x2, s2, body2),
                    _ => body2,
                })
            }
            Type::Cons(h, t) => Ok(Type::cons(self.normalize(ctx, h)?, self.normalize(ctx, t)?)),
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => {
                let s = bd_reduce_with(ctx, scrutinee, &mut self.fuel)?;
                match &*s {
                    Term::Nil => self.normalize(ctx, nil_type),
                    Term::Cons(t1, t2) => {
                        // Binding x:{t1} and y:{t2} would only let δ unfold them
                        // again; substituting up front also lets inference see
                        // the components themselves, so the result is stable.
                        let avoid = s.free_vars();
                        let y = self.binder(ctx, tail, &avoid);
                        let branch = rename_ty(cons_type, tail, &y);
                        let branch = branch.subst(head, t1).subst(&y, t2);
                        self.normalize(ctx, &branch)
                    }
                    _ => Ok(Arc::new(Type::Match {
                        scrutinee: s,
                        nil_type: nil_type.clone(),
                        head: head.clone(),
                        tail: tail.clone(),
                        cons_type: cons_type.clone(),
                    })),
                }
            }
        }
    }

    /// `𝒰(T)`, drawing binder names from the session supply.
    pub fn untangle(&mut self, ty: &Arc<Type>) -> Arc<Type> {
        self.reserve_ty(ty);
        untangle_with(&mut self.supply, ty)
    }
}

/// Normalizes `ty` under `ctx` with a fresh session of the given fuel.
pub fn normalize(ctx: &Context, ty: &Arc<Type>, fuel: u64) -> Result<Arc<Type>, TypeError> {
    let mut s = Session::new(fuel);
    s.reserve_ctx(ctx);
    s.reserve_ty(ty);
    s.normalize(ctx, ty)
}

/// Untangles every trail existential in `ty`.
pub fn untangle(ty: &Arc<Type>) -> Arc<Type> {
    let mut supply = Supply::new();
    supply.reserve_type(ty);
    untangle_with(&mut supply, ty)
}

/// One free occurrence of a selection chain `x..p`, and the tag of the
/// `unpack` directly around it if any.
#[derive(Debug)]
pub(crate) struct Occurrence {
    pub(crate) path: SelPath,
    pub(crate) under: Option<Base>,
}

fn occurrences_term(x: &Name, t: &Term, under: Option<Base>, acc: &mut Vec<Occurrence>) {
    if let Some((y, path)) = t.as_selection() {
        if y == x {
            acc.push(Occurrence {
                path: SelPath(path),
                under,
            });
        }
        return;
    }
    match t {
        Term::Var(_) | Term::Nil | Term::Choose(_) | Term::TrailLit(_) => {}
        Term::Unpack(b, s) => occurrences_term(x, s, Some(*b), acc),
        Term::Sel(s, _) => occurrences_term(x, s, None, acc),
        Term::Abs(y, a, body) => {
            occurrences_type(x, a, acc);
            if y != x {
                occurrences_term(x, body, None, acc);
            }
        }
        Term::App(a, b) | Term::Cons(a, b) => {
            occurrences_term(x, a, None, acc);
            occurrences_term(x, b, None, acc);
        }
        Term::Match {
            scrutinee,
            nil_case,
            head,
            tail,
            cons_case,
        } => {
            occurrences_term(x, scrutinee, None, acc);
            occurrences_term(x, nil_case, None, acc);
            if head != x && tail != x {
                occurrences_term(x, cons_case, None, acc);
            }
        }
        Term::Fix {
            binder,
            annot,
            body,
            default,
            ..
        } => {
            occurrences_type(x, annot, acc);
            occurrences_term(x, default, None, acc);
            if binder != x {
                occurrences_term(x, body, None, acc);
            }
        }
    }
}

pub(crate) fn occurrences_type(x: &Name, t: &Type, acc: &mut Vec<Occurrence>) {
    match t {
        Type::Base(_) => {}
        Type::Singleton(s, u) => {
            occurrences_term(x, s, None, acc);
            occurrences_type(x, u, acc);
        }
        Type::Pi(y, a, b) | Type::Exists(y, a, b) => {
            occurrences_type(x, a, acc);
            if y != x {
                occurrences_type(x, b, acc);
            }
        }
        Type::Cons(a, b) => {
            occurrences_type(x, a, acc);
            occurrences_type(x, b, acc);
        }
        Type::Match {
            scrutinee,
            nil_type,
            head,
            tail,
            cons_type,
        } => {
            occurrences_term(x, scrutinee, None, acc);
            occurrences_type(x, nil_type, acc);
            if head != x && tail != x {
                occurrences_type(x, cons_type, acc);
            }
        }
    }
}

/// The maximal selection paths `p` such that `x..p` occurs free in `ty`.
pub fn trails_of(x: &Name, ty: &Type) -> BTreeSet<SelPath> {
    let mut acc = Vec::new();
    occurrences_type(x, ty, &mut acc);
    acc.into_iter().map(|o| o.path).collect()
}

/// What to replace by the fresh variable: `unpack_B x..p` or bare `x..p`.
struct Replace<'a> {
    x: &'a Name,
    path: &'a [u8],
    tag: Option<Base>,
    by: Arc<Term>,
}

impl Replace<'_> {
    fn hits(&self, t: &Term) -> bool {
        matches!(t.as_selection(), Some((y, p)) if y == self.x && p == self.path)
    }

    fn term(&self, t: &Arc<Term>) -> Arc<Term> {
        match (&**t, self.tag) {
            (Term::Unpack(b, s), Some(tag)) if *b == tag && self.hits(s) => return self.by.clone(),
            (_, None) if self.hits(t) => return self.by.clone(),
            _ => {}
        }
        match &**t {
            Term::Var(_) | Term::Nil | Term::Choose(_) | Term::TrailLit(_) => t.clone(),
            Term::Unpack(b, s) => Term::unpack(*b, self.term(s)),
            Term::Sel(s, k) => Term::sel(self.term(s), *k),
            Term::Abs(y, a, body) => {
                let body = if y == self.x { body.clone() } else { self.term(body) };
                Term::abs(y.clone(), self.ty(a), body)
            }
            Term::App(a, b) => Term::app(self.term(a), self.term(b)),
            Term::Cons(a, b) => Term::cons(self.term(a), self.term(b)),
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => Arc::new(Term::Match {
                scrutinee: self.term(scrutinee),
                nil_case: self.term(nil_case),
                head: head.clone(),
                tail: tail.clone(),
                cons_case: if head == self.x || tail == self.x {
                    cons_case.clone()
                } else {
                    self.term(cons_case)
                },
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
                annot: self.ty(annot),
                body: if binder == self.x { body.clone() } else { self.term(body) },
                default: self.term(default),
            }),
        }
    }

    fn ty(&self, t: &Arc<Type>) -> Arc<Type> {
        match &**t {
            Type::Base(_) => t.clone(),
            Type::Singleton(s, u) => Type::singleton(self.term(s), self.ty(u)),
            Type::Pi(y, a, b) | Type::Exists(y, a, b) => {
                let b2 = if y == self.x { b.clone() } else { self.ty(b) };
                match &**t {
                    Type::Pi(..) => Type::pi(y.clone(), self.ty(a), b2),
                    _ => Type::exists(y.clone(), self.ty(a), b2),
                }
            }
            Type::Cons(a, b) => Type::cons(self.ty(a), self.ty(b)),
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => Arc::new(Type::Match {
                scrutinee: self.term(scrutinee),
                nil_type: self.ty(nil_type),
                head: head.clone(),
                tail: tail.clone(),
                cons_type: if head == self.x || tail == self.x {
                    cons_type.clone()
                } else {
                    self.ty(cons_type)
                },
            }),
        }
    }
}

/// `𝒲_x(ps, T)` for `x` bound by `∃x:Trail` around the already untangled
/// body. Returns `None` when two occurrence paths overlap, in which case the
/// existential is kept as it is.
fn wrap(supply: &mut Supply, x: &Name, body: &Arc<Type>) -> Option<Arc<Type>> {
    let mut occs = Vec::new();
    occurrences_type(x, body, &mut occs);
    let mut tags: BTreeMap<SelPath, BTreeSet<Option<Base>>> = BTreeMap::new();
    for o in occs {
        tags.entry(o.path).or_default().insert(o.under);
    }
    let paths: Vec<&SelPath> = tags.keys().collect();
    for (i, p) in paths.iter().enumerate() {
        if paths[i + 1..].iter().any(|q| !p.independent(q)) {
            return None;
        }
    }
    // Smallest path ends up outermost, so wrap from the largest.
    let mut out = body.clone();
    for (path, under) in tags.iter().rev() {
        let y = supply.fresh("y");
        let tag = match under.iter().collect::<Vec<_>>().as_slice() {
            [Some(b)] => Some(*b),
            _ => None,
        };
        let r = Replace {
            x,
            path: path.as_slice(),
            tag,
            by: Term::var(y.clone()),
        };
        out = Type::exists(y, Type::base(tag.unwrap_or(Base::Trail)), r.ty(&out));
    }
    Some(out)
}

fn untangle_with(supply: &mut Supply, ty: &Arc<Type>) -> Arc<Type> {
    match &**ty {
        Type::Base(_) => ty.clone(),
        Type::Singleton(t, u) => Type::singleton(t.clone(), untangle_with(supply, u)),
        Type::Exists(x, s, body) if s.is_base(Base::Trail) => {
            let body = untangle_with(supply, body);
            wrap(supply, x, &body).unwrap_or_else(|| Type::exists(x.clone(), s.clone(), body))
        }
        Type::Exists(x, s, body) => Type::exists(x.clone(), untangle_with(supply, s), untangle_with(supply, body)),
        Type::Pi(x, s, body) => Type::pi(x.clone(), untangle_with(supply, s), untangle_with(supply, body)),
        Type::Cons(h, t) => Type::cons(untangle_with(supply, h), untangle_with(supply, t)),
        Type::Match {
            scrutinee,
            nil_type,
            head,
            tail,
            cons_type,
        } => Arc::new(Type::Match {
            scrutinee: scrutinee.clone(),
            nil_type: untangle_with(supply, nil_type),
            head: head.clone(),
            tail: tail.clone(),
            cons_type: untangle_with(supply, cons_type),
        }),
    }
}
