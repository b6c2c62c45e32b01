//! Abstract syntax shared by the surface calculus (with `choose[B]`) and the
//! deterministic core calculus (with trail selections and `unpack`).
//!
//! Both dialects live in one AST; [`check_dialect`] tells them apart. Names
//! are kept as written and compared up to α-renaming by [`Syntax::alpha_eq`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::trail::Trail;

/// A variable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Name {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Name {
        Name(Arc::from(s))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Base types. `Trail` only exists in the core calculus; `choose` and
/// `unpack` only accept `Top` and `List`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Base {
    Top,
    List,
    Trail,
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Base::Top => "Top",
            Base::List => "List",
            Base::Trail => "Trail",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(Name),
    Abs(Name, Arc<Type>, Arc<Term>),
    App(Arc<Term>, Arc<Term>),
    Nil,
    Cons(Arc<Term>, Arc<Term>),
    Match {
        scrutinee: Arc<Term>,
        nil_case: Arc<Term>,
        head: Name,
        tail: Name,
        cons_case: Arc<Term>,
    },
    /// Bounded fixpoint: unrolls at most `bound` times, then yields `default`.
    Fix {
        bound: u64,
        binder: Name,
        annot: Arc<Type>,
        body: Arc<Term>,
        default: Arc<Term>,
    },
    Choose(Base),
    /// Trail selection `t.k`, `k` in 1..=3.
    Sel(Arc<Term>, u8),
    Unpack(Base, Arc<Term>),
    TrailLit(Arc<Trail>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Type {
    Base(Base),
    /// `{ t : U }`. Never nests directly: build through [`Type::singleton`].
    Singleton(Arc<Term>, Arc<Type>),
    Pi(Name, Arc<Type>, Arc<Type>),
    Cons(Arc<Type>, Arc<Type>),
    Match {
        scrutinee: Arc<Term>,
        nil_type: Arc<Type>,
        head: Name,
        tail: Name,
        cons_type: Arc<Type>,
    },
    Exists(Name, Arc<Type>, Arc<Type>),
}

pub const TOP: Type = Type::Base(Base::Top);
pub const LIST: Type = Type::Base(Base::List);
pub const TRAIL: Type = Type::Base(Base::Trail);

impl Term {
    pub fn var(name: impl Into<Name>) -> Arc<Term> {
        Arc::new(Term::Var(name.into()))
    }

    pub fn abs(x: impl Into<Name>, annot: Arc<Type>, body: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Abs(x.into(), annot, body))
    }

    pub fn app(f: Arc<Term>, a: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::App(f, a))
    }

    pub fn nil() -> Arc<Term> {
        Arc::new(Term::Nil)
    }

    pub fn cons(h: Arc<Term>, t: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Cons(h, t))
    }

    pub fn sel(t: Arc<Term>, k: u8) -> Arc<Term> {
        debug_assert!((1..=3).contains(&k));
        Arc::new(Term::Sel(t, k))
    }

    /// `t..p`: left-to-right selections along `path`.
    pub fn sel_path(t: Arc<Term>, path: &[u8]) -> Arc<Term> {
        path.iter().fold(t, |acc, &k| Term::sel(acc, k))
    }

    pub fn unpack(base: Base, t: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Unpack(base, t))
    }

    pub fn choose(base: Base) -> Arc<Term> {
        Arc::new(Term::Choose(base))
    }

    pub fn trail(t: Trail) -> Arc<Term> {
        Arc::new(Term::TrailLit(Arc::new(t)))
    }

    /// Builds the list `cons e1 (cons e2 ... nil)`.
    pub fn list(items: impl IntoIterator<Item = Arc<Term>>) -> Arc<Term> {
        let items: Vec<_> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(Term::nil(), |tail, head| Term::cons(head, tail))
    }

    pub fn is_list_value(&self) -> bool {
        let mut cur = self;
        loop {
            match cur {
                Term::Nil => return true,
                Term::Cons(h, t) if h.is_value() => cur = t,
                _ => return false,
            }
        }
    }

    /// Values of either calculus. Variables, selections on non-literal trails
    /// and `unpack` of such selections are neutral and count as values.
    pub fn is_value(&self) -> bool {
        let mut cur = self;
        loop {
            match cur {
                Term::Var(_) | Term::Abs(..) | Term::Nil | Term::TrailLit(_) => return true,
                Term::Cons(h, t) => {
                    if !h.is_value() {
                        return false;
                    }
                    cur = t;
                }
                Term::Sel(t, _) | Term::Unpack(_, t) => {
                    return t.is_value() && !matches!(**t, Term::TrailLit(_));
                }
                _ => return false,
            }
        }
    }

    /// Splits `x.n1...nk` into `(x, [n1, ..., nk])`.
    pub fn as_selection(&self) -> Option<(&Name, Vec<u8>)> {
        let mut path = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Sel(t, k) => {
                    path.push(*k);
                    cur = t;
                }
                Term::Var(x) => {
                    path.reverse();
                    return Some((x, path));
                }
                _ => return None,
            }
        }
    }
}

impl Type {
    pub fn base(b: Base) -> Arc<Type> {
        Arc::new(Type::Base(b))
    }

    pub fn top() -> Arc<Type> {
        Arc::new(TOP)
    }

    pub fn list() -> Arc<Type> {
        Arc::new(LIST)
    }

    pub fn trail() -> Arc<Type> {
        Arc::new(TRAIL)
    }

    /// `{ t : U }`, collapsing a singleton underlying type to its own
    /// underlying type so that singletons never nest.
    pub fn singleton(t: Arc<Term>, underlying: Arc<Type>) -> Arc<Type> {
        let underlying = match &*underlying {
            Type::Singleton(_, inner) => inner.clone(),
            _ => underlying,
        };
        Arc::new(Type::Singleton(t, underlying))
    }

    pub fn pi(x: impl Into<Name>, dom: Arc<Type>, cod: Arc<Type>) -> Arc<Type> {
        Arc::new(Type::Pi(x.into(), dom, cod))
    }

    pub fn exists(x: impl Into<Name>, dom: Arc<Type>, body: Arc<Type>) -> Arc<Type> {
        Arc::new(Type::Exists(x.into(), dom, body))
    }

    pub fn cons(h: Arc<Type>, t: Arc<Type>) -> Arc<Type> {
        Arc::new(Type::Cons(h, t))
    }

    pub fn is_base(&self, b: Base) -> bool {
        matches!(self, Type::Base(x) if *x == b)
    }
}

/// Which calculus a term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    Surface,
    Core,
}

/// True iff `t` (including terms embedded in its annotations) only uses
/// constructs of `dialect`.
pub fn check_dialect(t: &Term, dialect: Dialect) -> bool {
    dialect_term(t, dialect)
}

/// [`check_dialect`] for types.
pub fn check_dialect_type(t: &Type, dialect: Dialect) -> bool {
    dialect_ty(t, dialect)
}

fn dialect_term(t: &Term, d: Dialect) -> bool {
    match t {
        Term::Var(_) | Term::Nil => true,
        Term::Choose(_) => d == Dialect::Surface,
        Term::TrailLit(_) => d == Dialect::Core,
        Term::Sel(t, _) | Term::Unpack(_, t) => d == Dialect::Core && dialect_term(t, d),
        Term::Abs(_, a, b) => dialect_ty(a, d) && dialect_term(b, d),
        Term::App(a, b) | Term::Cons(a, b) => dialect_term(a, d) && dialect_term(b, d),
        Term::Match {
            scrutinee,
            nil_case,
            cons_case,
            ..
        } => dialect_term(scrutinee, d) && dialect_term(nil_case, d) && dialect_term(cons_case, d),
        Term::Fix {
            annot,
            body,
            default,
            ..
        } => dialect_ty(annot, d) && dialect_term(body, d) && dialect_term(default, d),
    }
}

fn dialect_ty(t: &Type, d: Dialect) -> bool {
    match t {
        Type::Base(_) => true,
        Type::Singleton(t, u) => dialect_term(t, d) && dialect_ty(u, d),
        Type::Pi(_, a, b) | Type::Exists(_, a, b) | Type::Cons(a, b) => dialect_ty(a, d) && dialect_ty(b, d),
        Type::Match {
            scrutinee,
            nil_type,
            cons_type,
            ..
        } => dialect_term(scrutinee, d) && dialect_ty(nil_type, d) && dialect_ty(cons_type, d),
    }
}

/// Binding-aware operations common to terms and types.
pub trait Syntax: Sized {
    fn collect_free(&self, bound: &mut Vec<Name>, acc: &mut BTreeSet<Name>);
    fn collect_names(&self, acc: &mut NameAcc<'_>);
    fn subst_with(self: &Arc<Self>, s: &Subst<'_>) -> Arc<Self>;
    fn alpha_with(&self, other: &Self, env: &mut AlphaEnv) -> bool;

    fn free_vars(&self) -> BTreeSet<Name> {
        let mut acc = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut acc);
        acc
    }

    fn has_free(&self, x: &Name) -> bool {
        self.free_vars().contains(x)
    }

    /// Every name occurring in `self`, bound or free.
    fn names(&self) -> HashSet<Name> {
        let mut set = HashSet::new();
        self.collect_names(&mut NameAcc::new(&mut set));
        set
    }

    /// Capture-avoiding `self[x ↦ s]`.
    fn subst(self: &Arc<Self>, x: &Name, s: &Arc<Term>) -> Arc<Self> {
        self.subst_with(&Subst::new(x, s))
    }

    fn alpha_eq(&self, other: &Self) -> bool {
        self.alpha_with(other, &mut AlphaEnv::default())
    }
}

/// Accumulator for [`Syntax::collect_names`]. Shared subtrees are visited
/// once per collection.
pub struct NameAcc<'a> {
    names: &'a mut HashSet<Name>,
    seen: HashSet<usize>,
}

impl<'a> NameAcc<'a> {
    pub fn new(names: &'a mut HashSet<Name>) -> Self {
        NameAcc {
            names,
            seen: HashSet::new(),
        }
    }

    pub fn insert(&mut self, n: Name) {
        self.names.insert(n);
    }

    fn first_visit<T>(&mut self, node: &T) -> bool {
        self.seen.insert(node as *const T as usize)
    }
}

/// A pending substitution `[x ↦ s]`. The free variables of `s` are only
/// computed if a binder is crossed.
pub struct Subst<'a> {
    x: &'a Name,
    s: &'a Arc<Term>,
    fv_s: OnceLock<BTreeSet<Name>>,
    closed: Option<&'a dyn Fn(&Term) -> bool>,
}

impl<'a> Subst<'a> {
    pub fn new(x: &'a Name, s: &'a Arc<Term>) -> Self {
        Subst {
            x,
            s,
            fv_s: OnceLock::new(),
            closed: None,
        }
    }

    /// Lets the substitution skip subterms that `untouched` reports as not
    /// mentioning `x` free. A false negative only costs time.
    pub fn skipping(mut self, untouched: &'a dyn Fn(&Term) -> bool) -> Self {
        self.closed = Some(untouched);
        self
    }

    /// As [`Subst::new`] with the free variables of `s` already known.
    pub fn with_free_vars(x: &'a Name, s: &'a Arc<Term>, fv: BTreeSet<Name>) -> Self {
        Subst {
            x,
            s,
            fv_s: OnceLock::from(fv),
            closed: None,
        }
    }

    fn fv_s(&self) -> &BTreeSet<Name> {
        self.fv_s.get_or_init(|| self.s.free_vars())
    }

    /// Decides what to do with binder `y` scoping over `scope`.
    /// `None`: `x` is shadowed, leave the scope alone. `Some(y')`: continue
    /// with binder `y'`, after renaming `y` to `y'` inside the scope if needed.
    fn binder(
        &self,
        y: &Name,
        taken: &[&Name],
        scope_names: impl FnOnce() -> HashSet<Name>,
    ) -> Option<Name> {
        if y == self.x {
            return None;
        }
        if !self.fv_s().contains(y) {
            return Some(y.clone());
        }
        let in_scope = scope_names();
        Some(fresh_variant(y, |n| {
            self.fv_s().contains(n)
                || in_scope.contains(n)
                || n == self.x
                || taken.contains(&n)
        }))
    }
}

/// `base'`, `base''`, ... until `taken` rejects none.
pub fn fresh_variant(base: &Name, taken: impl Fn(&Name) -> bool) -> Name {
    let mut s = base.as_str().to_owned();
    loop {
        s.push('\'');
        let n = Name::from(s.as_str());
        if !taken(&n) {
            return n;
        }
    }
}

fn rename<T: Syntax>(body: &Arc<T>, from: &Name, to: &Name) -> Arc<T> {
    if from == to {
        body.clone()
    } else {
        body.subst(from, &Term::var(to.clone()))
    }
}

fn same<T>(a: &Arc<T>, b: &Arc<T>) -> bool {
    Arc::ptr_eq(a, b)
}

impl Syntax for Term {
    fn collect_free(&self, bound: &mut Vec<Name>, acc: &mut BTreeSet<Name>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    acc.insert(x.clone());
                }
            }
            Term::Abs(x, a, b) => {
                a.collect_free(bound, acc);
                bound.push(x.clone());
                b.collect_free(bound, acc);
                bound.pop();
            }
            Term::App(a, b) | Term::Cons(a, b) => {
                a.collect_free(bound, acc);
                b.collect_free(bound, acc);
            }
            Term::Nil | Term::Choose(_) => {}
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                scrutinee.collect_free(bound, acc);
                nil_case.collect_free(bound, acc);
                bound.push(head.clone());
                bound.push(tail.clone());
                cons_case.collect_free(bound, acc);
                bound.pop();
                bound.pop();
            }
            Term::Fix {
                binder,
                annot,
                body,
                default,
                ..
            } => {
                annot.collect_free(bound, acc);
                default.collect_free(bound, acc);
                bound.push(binder.clone());
                body.collect_free(bound, acc);
                bound.pop();
            }
            Term::Sel(t, _) | Term::Unpack(_, t) => t.collect_free(bound, acc),
            Term::TrailLit(tr) => tr.for_each_value(&mut |v| v.collect_free(bound, acc)),
        }
    }

    fn collect_names(&self, acc: &mut NameAcc<'_>) {
        if !acc.first_visit(self) {
            return;
        }
        match self {
            Term::Var(x) => {
                acc.insert(x.clone());
            }
            Term::Abs(x, a, b) => {
                acc.insert(x.clone());
                a.collect_names(acc);
                b.collect_names(acc);
            }
            Term::App(a, b) | Term::Cons(a, b) => {
                a.collect_names(acc);
                b.collect_names(acc);
            }
            Term::Nil | Term::Choose(_) => {}
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                acc.insert(head.clone());
                acc.insert(tail.clone());
                scrutinee.collect_names(acc);
                nil_case.collect_names(acc);
                cons_case.collect_names(acc);
            }
            Term::Fix {
                binder,
                annot,
                body,
                default,
                ..
            } => {
                acc.insert(binder.clone());
                annot.collect_names(acc);
                body.collect_names(acc);
                default.collect_names(acc);
            }
            Term::Sel(t, _) | Term::Unpack(_, t) => t.collect_names(acc),
            Term::TrailLit(tr) => tr.for_each_value(&mut |v| v.collect_names(acc)),
        }
    }

    fn subst_with(self: &Arc<Self>, s: &Subst<'_>) -> Arc<Self> {
        if s.closed.is_some_and(|c| c(self)) {
            return self.clone();
        }
        match &**self {
            Term::Var(y) => {
                if y == s.x {
                    s.s.clone()
                } else {
                    self.clone()
                }
            }
            Term::Nil | Term::Choose(_) | Term::TrailLit(_) => self.clone(),
            Term::Abs(y, a, b) => {
                let a2 = a.subst_with(s);
                match s.binder(y, &[], || b.names()) {
                    None if same(a, &a2) => self.clone(),
                    None => Term::abs(y.clone(), a2, b.clone()),
                    Some(y2) => {
                        let b2 = rename(b, y, &y2).subst_with(s);
                        if same(a, &a2) && same(b, &b2) {
                            self.clone()
                        } else {
                            Term::abs(y2, a2, b2)
                        }
                    }
                }
            }
            Term::App(a, b) => {
                let (a2, b2) = (a.subst_with(s), b.subst_with(s));
                if same(a, &a2) && same(b, &b2) {
                    self.clone()
                } else {
                    Term::app(a2, b2)
                }
            }
            Term::Cons(a, b) => {
                let (a2, b2) = (a.subst_with(s), b.subst_with(s));
                if same(a, &a2) && same(b, &b2) {
                    self.clone()
                } else {
                    Term::cons(a2, b2)
                }
            }
            Term::Match {
                scrutinee,
                nil_case,
                head,
                tail,
                cons_case,
            } => {
                let sc2 = scrutinee.subst_with(s);
                let n2 = nil_case.subst_with(s);
                let (h2, t2, c2) = if head == s.x || tail == s.x {
                    (head.clone(), tail.clone(), cons_case.clone())
                } else {
                    let h2 = s
                        .binder(head, &[tail], || cons_case.names())
                        .expect("not shadowed");
                    let c = rename(cons_case, head, &h2);
                    let t2 = s.binder(tail, &[&h2], || c.names()).expect("not shadowed");
                    let c = rename(&c, tail, &t2);
                    (h2, t2, c.subst_with(s))
                };
                if same(scrutinee, &sc2)
                    && same(nil_case, &n2)
                    && same(cons_case, &c2)
                    && &h2 == head
                    && &t2 == tail
                {
                    self.clone()
                } else {
                    Arc::new(Term::Match {
                        scrutinee: sc2,
                        nil_case: n2,
                        head: h2,
                        tail: t2,
                        cons_case: c2,
                    })
                }
            }
            Term::Fix {
                bound,
                binder,
                annot,
                body,
                default,
            } => {
                let a2 = annot.subst_with(s);
                let d2 = default.subst_with(s);
                let (x2, b2) = match s.binder(binder, &[], || body.names()) {
                    None => (binder.clone(), body.clone()),
                    Some(x2) => {
                        let b = rename(body, binder, &x2).subst_with(s);
                        (x2, b)
                    }
                };
                if same(annot, &a2) && same(default, &d2) && same(body, &b2) && &x2 == binder {
                    self.clone()
                } else {
                    Arc::new(Term::Fix {
                        bound: *bound,
                        binder: x2,
                        annot: a2,
                        body: b2,
                        default: d2,
                    })
                }
            }
            Term::Sel(t, k) => {
                let t2 = t.subst_with(s);
                if same(t, &t2) {
                    self.clone()
                } else {
                    Term::sel(t2, *k)
                }
            }
            Term::Unpack(b, t) => {
                let t2 = t.subst_with(s);
                if same(t, &t2) {
                    self.clone()
                } else {
                    Term::unpack(*b, t2)
                }
            }
        }
    }

    fn alpha_with(&self, other: &Self, env: &mut AlphaEnv) -> bool {
        env.memoized(self, other, |env| alpha_term(self, other, env))
    }
}

fn alpha_term(this: &Term, other: &Term, env: &mut AlphaEnv) -> bool {
    match (this, other) {
        (Term::Var(a), Term::Var(b)) => env.var_eq(a, b),
        (Term::Abs(x, a1, b1), Term::Abs(y, a2, b2)) => {
            a1.alpha_with(a2, env) && env.under(&[x], &[y], |env| b1.alpha_with(b2, env))
        }
        (Term::App(a1, b1), Term::App(a2, b2)) | (Term::Cons(a1, b1), Term::Cons(a2, b2)) => {
            a1.alpha_with(a2, env) && b1.alpha_with(b2, env)
        }
        (Term::Nil, Term::Nil) => true,
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
            s1.alpha_with(s2, env)
                && n1.alpha_with(n2, env)
                && env.under(&[h1, t1], &[h2, t2], |env| c1.alpha_with(c2, env))
        }
        (
            Term::Fix {
                bound: n1,
                binder: x1,
                annot: a1,
                body: b1,
                default: d1,
            },
            Term::Fix {
                bound: n2,
                binder: x2,
                annot: a2,
                body: b2,
                default: d2,
            },
        ) => {
            n1 == n2
                && a1.alpha_with(a2, env)
                && d1.alpha_with(d2, env)
                && env.under(&[x1], &[x2], |env| b1.alpha_with(b2, env))
        }
        (Term::Choose(a), Term::Choose(b)) => a == b,
        (Term::Sel(t1, k1), Term::Sel(t2, k2)) => k1 == k2 && t1.alpha_with(t2, env),
        (Term::Unpack(b1, t1), Term::Unpack(b2, t2)) => b1 == b2 && t1.alpha_with(t2, env),
        (Term::TrailLit(a), Term::TrailLit(b)) => a.alpha_with(b, env),
        _ => false,
    }
}

impl Syntax for Type {
    fn collect_free(&self, bound: &mut Vec<Name>, acc: &mut BTreeSet<Name>) {
        match self {
            Type::Base(_) => {}
            Type::Singleton(t, u) => {
                t.collect_free(bound, acc);
                u.collect_free(bound, acc);
            }
            Type::Pi(x, a, b) | Type::Exists(x, a, b) => {
                a.collect_free(bound, acc);
                bound.push(x.clone());
                b.collect_free(bound, acc);
                bound.pop();
            }
            Type::Cons(a, b) => {
                a.collect_free(bound, acc);
                b.collect_free(bound, acc);
            }
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => {
                scrutinee.collect_free(bound, acc);
                nil_type.collect_free(bound, acc);
                bound.push(head.clone());
                bound.push(tail.clone());
                cons_type.collect_free(bound, acc);
                bound.pop();
                bound.pop();
            }
        }
    }

    fn collect_names(&self, acc: &mut NameAcc<'_>) {
        if !acc.first_visit(self) {
            return;
        }
        match self {
            Type::Base(_) => {}
            Type::Singleton(t, u) => {
                t.collect_names(acc);
                u.collect_names(acc);
            }
            Type::Pi(x, a, b) | Type::Exists(x, a, b) => {
                acc.insert(x.clone());
                a.collect_names(acc);
                b.collect_names(acc);
            }
            Type::Cons(a, b) => {
                a.collect_names(acc);
                b.collect_names(acc);
            }
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => {
                acc.insert(head.clone());
                acc.insert(tail.clone());
                scrutinee.collect_names(acc);
                nil_type.collect_names(acc);
                cons_type.collect_names(acc);
            }
        }
    }

    fn subst_with(self: &Arc<Self>, s: &Subst<'_>) -> Arc<Self> {
        match &**self {
            Type::Base(_) => self.clone(),
            Type::Singleton(t, u) => {
                let (t2, u2) = (t.subst_with(s), u.subst_with(s));
                if same(t, &t2) && same(u, &u2) {
                    self.clone()
                } else {
                    Type::singleton(t2, u2)
                }
            }
            Type::Pi(y, a, b) | Type::Exists(y, a, b) => {
                let a2 = a.subst_with(s);
                let (y2, b2) = match s.binder(y, &[], || b.names()) {
                    None => (y.clone(), b.clone()),
                    Some(y2) => {
                        let b2 = rename(b, y, &y2).subst_with(s);
                        (y2, b2)
                    }
                };
                if same(a, &a2) && same(b, &b2) && &y2 == y {
                    self.clone()
                } else if matches!(**self, Type::Pi(..)) {
                    Type::pi(y2, a2, b2)
                } else {
                    Type::exists(y2, a2, b2)
                }
            }
            Type::Cons(a, b) => {
                let (a2, b2) = (a.subst_with(s), b.subst_with(s));
                if same(a, &a2) && same(b, &b2) {
                    self.clone()
                } else {
                    Type::cons(a2, b2)
                }
            }
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => {
                let sc2 = scrutinee.subst_with(s);
                let n2 = nil_type.subst_with(s);
                let (h2, t2, c2) = if head == s.x || tail == s.x {
                    (head.clone(), tail.clone(), cons_type.clone())
                } else {
                    let h2 = s
                        .binder(head, &[tail], || cons_type.names())
                        .expect("not shadowed");
                    let c = rename(cons_type, head, &h2);
                    let t2 = s.binder(tail, &[&h2], || c.names()).expect("not shadowed");
                    let c = rename(&c, tail, &t2);
                    (h2, t2, c.subst_with(s))
                };
                if same(scrutinee, &sc2)
                    && same(nil_type, &n2)
                    && same(cons_type, &c2)
                    && &h2 == head
                    && &t2 == tail
                {
                    self.clone()
                } else {
                    Arc::new(Type::Match {
                        scrutinee: sc2,
                        nil_type: n2,
                        head: h2,
                        tail: t2,
                        cons_type: c2,
                    })
                }
            }
        }
    }

    fn alpha_with(&self, other: &Self, env: &mut AlphaEnv) -> bool {
        env.memoized(self, other, |env| alpha_type(self, other, env))
    }
}

fn alpha_type(this: &Type, other: &Type, env: &mut AlphaEnv) -> bool {
    match (this, other) {
        (Type::Base(a), Type::Base(b)) => a == b,
        (Type::Singleton(t1, u1), Type::Singleton(t2, u2)) => {
            t1.alpha_with(t2, env) && u1.alpha_with(u2, env)
        }
        (Type::Pi(x, a1, b1), Type::Pi(y, a2, b2))
        | (Type::Exists(x, a1, b1), Type::Exists(y, a2, b2)) => {
            a1.alpha_with(a2, env) && env.under(&[x], &[y], |env| b1.alpha_with(b2, env))
        }
        (Type::Cons(a1, b1), Type::Cons(a2, b2)) => {
            a1.alpha_with(a2, env) && b1.alpha_with(b2, env)
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
            s1.alpha_with(s2, env)
                && n1.alpha_with(n2, env)
                && env.under(&[h1, t1], &[h2, t2], |env| c1.alpha_with(c2, env))
        }
        _ => false,
    }
}

/// Binder stacks for α-comparison; a bound variable is identified by the
/// depth of its nearest binder (de Bruijn level).
/// Pairs already found equal outside any binder are remembered by address,
/// which keeps comparison of types with shared subterms linear.
#[derive(Default)]
pub struct AlphaEnv {
    left: Vec<Name>,
    right: Vec<Name>,
    memo: HashSet<(usize, usize)>,
}

impl AlphaEnv {
    fn memoized<T>(&mut self, a: &T, b: &T, k: impl FnOnce(&mut Self) -> bool) -> bool {
        if !self.left.is_empty() {
            return k(self);
        }
        let key = (a as *const T as usize, b as *const T as usize);
        if key.0 == key.1 || self.memo.contains(&key) {
            return true;
        }
        let r = k(self);
        if r {
            self.memo.insert(key);
        }
        r
    }

    fn var_eq(&self, a: &Name, b: &Name) -> bool {
        let la = self.left.iter().rposition(|n| n == a);
        let lb = self.right.iter().rposition(|n| n == b);
        match (la, lb) {
            (None, None) => a == b,
            (Some(i), Some(j)) => i == j,
            _ => false,
        }
    }

    fn under(&mut self, xs: &[&Name], ys: &[&Name], k: impl FnOnce(&mut Self) -> bool) -> bool {
        for (x, y) in xs.iter().zip(ys) {
            self.left.push((*x).clone());
            self.right.push((*y).clone());
        }
        let r = k(self);
        for _ in xs {
            self.left.pop();
            self.right.pop();
        }
        r
    }
}

/// Ordered typing context Γ. Lookup finds the rightmost binding.
#[derive(Clone, Debug, Default)]
pub struct Context {
    bindings: Vec<(Name, Arc<Type>)>,
}

impl Context {
    pub fn new() -> Self {
        Context::default()
    }

    pub fn lookup(&self, x: &Name) -> Option<&Arc<Type>> {
        self.bindings
            .iter()
            .rev()
            .find(|(n, _)| n == x)
            .map(|(_, t)| t)
    }

    pub fn contains(&self, x: &Name) -> bool {
        self.bindings.iter().any(|(n, _)| n == x)
    }

    pub fn extend(&self, x: Name, ty: Arc<Type>) -> Context {
        let mut c = self.clone();
        c.push(x, ty);
        c
    }

    pub fn push(&mut self, x: Name, ty: Arc<Type>) {
        debug_assert!(!self.contains(&x), "context already binds {x}");
        self.bindings.push((x, ty));
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Name, Arc<Type>)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn names(&self) -> HashSet<Name> {
        let mut set = HashSet::new();
        let mut acc = NameAcc::new(&mut set);
        for (n, t) in &self.bindings {
            acc.insert(n.clone());
            t.collect_names(&mut acc);
        }
        set
    }
}

impl FromIterator<(Name, Arc<Type>)> for Context {
    fn from_iter<I: IntoIterator<Item = (Name, Arc<Type>)>>(iter: I) -> Self {
        let mut c = Context::new();
        for (n, t) in iter {
            c.push(n, t);
        }
        c
    }
}

/// Session-local supply of fresh names (`z0`, `z1`, ...). Names handed out
/// never collide with each other or with anything passed to `reserve*`.
#[derive(Clone, Debug, Default)]
pub struct Supply {
    used: HashSet<Name>,
    counters: HashMap<String, u64>,
}

impl Supply {
    pub fn new() -> Self {
        Supply::default()
    }

    pub fn reserve(&mut self, name: Name) {
        self.used.insert(name);
    }

    pub fn reserve_all(&mut self, names: impl IntoIterator<Item = Name>) {
        self.used.extend(names);
    }

    pub fn reserve_term(&mut self, t: &Term) {
        t.collect_names(&mut NameAcc::new(&mut self.used));
    }

    pub fn reserve_type(&mut self, t: &Type) {
        t.collect_names(&mut NameAcc::new(&mut self.used));
    }

    pub fn used_names(&self) -> Vec<Name> {
        self.used.iter().cloned().collect()
    }

    pub fn fresh(&mut self, hint: &str) -> Name {
        let counter = self.counters.entry(hint.to_owned()).or_insert(0);
        loop {
            let n = Name::from(format!("{hint}{counter}"));
            *counter += 1;
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }
}
