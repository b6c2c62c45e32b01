//! Random program and type generators shared by the property tests and the
//! acceptance suite. Everything is driven by a seeded ChaCha stream so
//! failures replay from the seed alone.

#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elam::lower::lower_term;
use elam::syntax::{Base, Name, Supply, Syntax, Term, Type};
use elam::trail::Trail;

/// What a variable in scope can be used as.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    List,
    Top,
    /// `Pi(a: List) => List`.
    Fun,
}

pub fn fun_type() -> Arc<Type> {
    Type::pi("a", Type::list(), Type::list())
}

pub struct Gen {
    pub rng: ChaCha8Rng,
    next: usize,
    /// Allow `choose` in generated terms.
    pub choices: bool,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
            choices: false,
        }
    }

    pub fn with_choices(mut self) -> Self {
        self.choices = true;
        self
    }

    pub fn fresh(&mut self, hint: &str) -> Name {
        self.next += 1;
        Name::from(format!("{hint}{}", self.next))
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn pick_var(&mut self, scope: &[(Name, Shape)], want: &[Shape]) -> Option<Arc<Term>> {
        let vars: Vec<_> = scope.iter().filter(|(_, s)| want.contains(s)).collect();
        if vars.is_empty() {
            None
        } else {
            let i = self.below(vars.len());
            Some(Term::var(vars[i].0.clone()))
        }
    }

    /// A list value with at most `max_size` nils.
    pub fn value(&mut self, max_size: usize) -> Arc<Term> {
        if max_size <= 1 || self.coin(0.35) {
            return Term::nil();
        }
        let h = self.below(max_size - 1) + 1;
        let head = self.value(h);
        let tail = self.value(max_size - h);
        Term::cons(head, tail)
    }

    // Well-typed closed terms, built by shape.

    /// A term of type `List`.
    pub fn list_term(&mut self, depth: usize, scope: &mut Vec<(Name, Shape)>) -> Arc<Term> {
        if depth == 0 {
            return match self.below(4) {
                0 if self.choices => Term::choose(Base::List),
                1 | 2 => self
                    .pick_var(scope, &[Shape::List])
                    .unwrap_or_else(|| self.value(3)),
                _ => self.value(3),
            };
        }
        match self.below(9) {
            0 => Term::nil(),
            1 | 2 => {
                let h = self.top_term(depth - 1, scope);
                let t = self.list_term(depth - 1, scope);
                Term::cons(h, t)
            }
            3 => self
                .pick_var(scope, &[Shape::List])
                .unwrap_or_else(|| self.value(3)),
            4 => {
                let f = self.fun_term(depth - 1, scope);
                let a = self.list_term(depth - 1, scope);
                Term::app(f, a)
            }
            5 | 6 => {
                let scrutinee = self.list_term(depth - 1, scope);
                let nil_case = self.list_term(depth - 1, scope);
                let (head, tail) = (self.fresh("h"), self.fresh("t"));
                scope.push((head.clone(), Shape::Top));
                scope.push((tail.clone(), Shape::List));
                let cons_case = self.list_term(depth - 1, scope);
                scope.truncate(scope.len() - 2);
                Arc::new(Term::Match {
                    scrutinee,
                    nil_case,
                    head,
                    tail,
                    cons_case,
                })
            }
            7 => {
                // A let through a higher-order argument.
                let g = self.fresh("g");
                let arg = self.fun_term(depth - 1, scope);
                scope.push((g.clone(), Shape::Fun));
                let body = self.list_term(depth - 1, scope);
                scope.pop();
                Term::app(Term::abs(g, fun_type(), body), arg)
            }
            _ if self.choices => Term::choose(Base::List),
            _ => self.value(4),
        }
    }

    /// A term of type `Top`.
    pub fn top_term(&mut self, depth: usize, scope: &mut Vec<(Name, Shape)>) -> Arc<Term> {
        match self.below(5) {
            0 => {
                if let Some(v) = self.pick_var(scope, &[Shape::Top]) {
                    return v;
                }
                self.list_term(depth, scope)
            }
            1 if self.choices => Term::choose(Base::Top),
            _ => self.list_term(depth, scope),
        }
    }

    /// A term of type `Pi(a: List) => List`, or of a subtype of it.
    pub fn fun_term(&mut self, depth: usize, scope: &mut Vec<(Name, Shape)>) -> Arc<Term> {
        if depth == 0 {
            if let Some(v) = self.pick_var(scope, &[Shape::Fun]) {
                return v;
            }
        }
        match self.below(5) {
            0 => {
                if let Some(v) = self.pick_var(scope, &[Shape::Fun]) {
                    return v;
                }
                self.lambda(depth, scope)
            }
            1 => {
                // Bounded recursion over the argument.
                let (f, a) = (self.fresh("f"), self.fresh("a"));
                let bound = self.rng.gen_range(1..=4);
                scope.push((f.clone(), Shape::Fun));
                scope.push((a.clone(), Shape::List));
                let step = self.recursive_step(depth.saturating_sub(1), &f, &a, scope);
                scope.truncate(scope.len() - 2);
                let d = self.fresh("d");
                scope.push((d.clone(), Shape::List));
                let default = self.list_term(depth.saturating_sub(1).min(1), scope);
                scope.pop();
                Arc::new(Term::Fix {
                    bound,
                    binder: f,
                    annot: fun_type(),
                    body: Term::abs(a, Type::list(), step),
                    default: Term::abs(d, Type::list(), default),
                })
            }
            _ => self.lambda(depth, scope),
        }
    }

    fn lambda(&mut self, depth: usize, scope: &mut Vec<(Name, Shape)>) -> Arc<Term> {
        let x = self.fresh("x");
        let top = self.coin(0.25);
        scope.push((x.clone(), if top { Shape::Top } else { Shape::List }));
        let body = self.list_term(depth.saturating_sub(1), scope);
        scope.pop();
        Term::abs(x, if top { Type::top() } else { Type::list() }, body)
    }

    /// `match a { nil => _; cons h t => ... f t ... }`.
    fn recursive_step(
        &mut self,
        depth: usize,
        f: &Name,
        a: &Name,
        scope: &mut Vec<(Name, Shape)>,
    ) -> Arc<Term> {
        let nil_case = self.list_term(depth.min(1), scope);
        let (head, tail) = (self.fresh("h"), self.fresh("t"));
        scope.push((head.clone(), Shape::Top));
        scope.push((tail.clone(), Shape::List));
        let rec = Term::app(Term::var(f.clone()), Term::var(tail.clone()));
        let cons_case = match self.below(3) {
            0 => rec,
            1 => Term::cons(Term::var(head.clone()), rec),
            _ => {
                let h = self.top_term(depth.min(1), scope);
                Term::cons(h, rec)
            }
        };
        scope.truncate(scope.len() - 2);
        Arc::new(Term::Match {
            scrutinee: Term::var(a.clone()),
            nil_case,
            head,
            tail,
            cons_case,
        })
    }

    /// A closed program: usually a list, sometimes a function.
    pub fn program(&mut self, depth: usize) -> Arc<Term> {
        let mut scope = Vec::new();
        if self.coin(0.15) {
            self.fun_term(depth, &mut scope)
        } else {
            self.list_term(depth, &mut scope)
        }
    }

    // Types.

    /// A surface type over the variables in `scope`, with embedded terms of
    /// depth at most `term_depth`.
    pub fn ty(&mut self, depth: usize, term_depth: usize, scope: &mut Vec<(Name, Shape)>) -> Arc<Type> {
        let leaf = depth == 0;
        match self.below(if leaf { 4 } else { 9 }) {
            0 => Type::top(),
            1 => Type::list(),
            2 | 3 => {
                let d = self.below(term_depth + 1);
                let t = self.list_term(d, scope);
                let u = if self.coin(0.25) { Type::top() } else { Type::list() };
                Type::singleton(t, u)
            }
            4 | 5 => {
                let h = self.ty(depth - 1, term_depth, scope);
                let t = self.list_type(depth - 1, term_depth, scope);
                Type::cons(h, t)
            }
            6 => {
                let x = self.fresh("e");
                let (dom, shape) = if self.coin(0.5) {
                    (Type::top(), Shape::Top)
                } else {
                    (self.list_type(0, 1, scope), Shape::List)
                };
                scope.push((x.clone(), shape));
                let body = self.ty(depth - 1, term_depth, scope);
                scope.pop();
                Type::exists(x, dom, body)
            }
            7 => {
                let d = self.below(term_depth + 1);
                let scrutinee = self.list_term(d, scope);
                let nil_type = self.ty(depth - 1, term_depth, scope);
                let (head, tail) = (self.fresh("h"), self.fresh("t"));
                scope.push((head.clone(), Shape::Top));
                scope.push((tail.clone(), Shape::List));
                let cons_type = self.ty(depth - 1, term_depth, scope);
                scope.truncate(scope.len() - 2);
                Arc::new(Type::Match {
                    scrutinee,
                    nil_type,
                    head,
                    tail,
                    cons_type,
                })
            }
            _ => {
                let x = self.fresh("p");
                scope.push((x.clone(), Shape::List));
                let body = self.ty(depth - 1, term_depth, scope);
                scope.pop();
                Type::pi(x, Type::list(), body)
            }
        }
    }

    /// A type below `List`.
    pub fn list_type(&mut self, depth: usize, term_depth: usize, scope: &mut Vec<(Name, Shape)>) -> Arc<Type> {
        match self.below(if depth == 0 { 2 } else { 3 }) {
            0 => Type::list(),
            1 => {
                let d = self.below(term_depth + 1);
                Type::singleton(self.list_term(d, scope), Type::list())
            }
            _ => {
                let h = self.ty(depth - 1, term_depth, scope);
                let t = self.list_type(depth - 1, term_depth, scope);
                Type::cons(h, t)
            }
        }
    }

    /// A type likely to be a supertype of `t`: parts are widened, dropped
    /// to their bounds, or have subterms replaced by `choose`.
    pub fn generalize(&mut self, t: &Arc<Type>) -> Arc<Type> {
        if self.coin(0.05) {
            return Type::top();
        }
        match &**t {
            Type::Base(_) => {
                if self.coin(0.2) {
                    Type::top()
                } else {
                    t.clone()
                }
            }
            Type::Singleton(s, u) => match self.below(4) {
                0 => u.clone(),
                1 => t.clone(),
                _ => Type::singleton(self.blur(s, false), u.clone()),
            },
            Type::Cons(h, tl) => match self.below(6) {
                0 => Type::list(),
                _ => Type::cons(self.generalize(h), self.generalize(tl)),
            },
            Type::Exists(x, s, b) => Type::exists(x.clone(), s.clone(), self.generalize(b)),
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => Arc::new(Type::Match {
                scrutinee: scrutinee.clone(),
                nil_type: self.generalize(nil_type),
                head: head.clone(),
                tail: tail.clone(),
                cons_type: self.generalize(cons_type),
            }),
            Type::Pi(..) => t.clone(),
        }
    }

    /// Replaces some list-valued subterms of `t` by `choose`. `head` marks a
    /// cons head, where `choose[Top]` is also allowed.
    pub fn blur(&mut self, t: &Arc<Term>, head: bool) -> Arc<Term> {
        if self.coin(0.3) {
            let b = if head && self.coin(0.5) { Base::Top } else { Base::List };
            return Term::choose(b);
        }
        match &**t {
            Term::Cons(h, tl) => Term::cons(self.blur(h, true), self.blur(tl, false)),
            _ => t.clone(),
        }
    }

    /// A surface type with at least one `choose`, and its lowering.
    pub fn choice_type(&mut self, depth: usize) -> (Arc<Type>, Arc<Type>) {
        loop {
            let mut scope = Vec::new();
            let t = self.ty(depth, 3, &mut scope);
            let t = self.generalize(&t);
            if has_choose_ty(&t) {
                let lowered = lower_type_fresh(&t);
                return (t, lowered);
            }
        }
    }

    /// A core type `exists(z: Trail) => ...` whose body reads the trail at
    /// random paths, sometimes overlapping.
    pub fn trail_exists(&mut self, depth: usize) -> Arc<Type> {
        let z = self.fresh("z");
        let mut paths: Vec<Vec<u8>> = Vec::new();
        let body = self.trail_body(depth, &z, &mut paths);
        Type::exists(z, Type::trail(), body)
    }

    fn trail_body(&mut self, depth: usize, z: &Name, paths: &mut Vec<Vec<u8>>) -> Arc<Type> {
        let t = self.trail_term(2, z, paths, false);
        if depth == 0 || self.coin(0.5) {
            return Type::singleton(t, Type::list());
        }
        match self.below(2) {
            0 => {
                let h = self.trail_body(depth - 1, z, paths);
                Type::cons(h, Type::list())
            }
            _ => {
                let nil_type = self.trail_body(depth - 1, z, paths);
                let (head, tail) = (self.fresh("h"), self.fresh("t"));
                Arc::new(Type::Match {
                    scrutinee: t,
                    nil_type,
                    head,
                    tail,
                    cons_type: Type::list(),
                })
            }
        }
    }

    fn trail_term(&mut self, depth: usize, z: &Name, paths: &mut Vec<Vec<u8>>, head: bool) -> Arc<Term> {
        if depth == 0 || self.coin(0.4) {
            if self.coin(0.15) {
                return Term::nil();
            }
            // Reuse or extend an earlier path now and then.
            let path = if !paths.is_empty() && self.coin(0.2) {
                let mut p = paths[self.below(paths.len())].clone();
                if self.coin(0.5) {
                    p.push(self.rng.gen_range(1..=3));
                }
                p
            } else {
                self.path(3)
            };
            paths.push(path.clone());
            let b = if head && self.coin(0.5) { Base::Top } else { Base::List };
            return Term::unpack(b, Term::sel_path(Term::var(z.clone()), &path));
        }
        let h = self.trail_term(depth - 1, z, paths, true);
        let t = self.trail_term(depth - 1, z, paths, false);
        Term::cons(h, t)
    }

    pub fn path(&mut self, max_len: usize) -> Vec<u8> {
        let n = self.below(max_len + 1);
        (0..n).map(|_| self.rng.gen_range(1..=3)).collect()
    }

    pub fn trail(&mut self, depth: usize) -> Trail {
        if depth == 0 || self.coin(0.3) {
            return match self.below(3) {
                0 => Trail::Empty,
                1 => Trail::leaf(Base::Top, self.value(3)),
                _ => Trail::leaf(Base::List, self.value(3)),
            };
        }
        Trail::node(
            self.trail(depth - 1),
            self.trail(depth - 1),
            self.trail(depth - 1),
        )
    }

    // Untyped syntax for the syntactic properties.

    /// An arbitrary surface term over a small pool of names, so binders
    /// shadow and capture is likely.
    pub fn raw_term(&mut self, depth: usize) -> Arc<Term> {
        const POOL: [&str; 4] = ["x", "y", "z", "w"];
        let var = |g: &mut Gen| Term::var(POOL[g.below(POOL.len())]);
        if depth == 0 {
            return match self.below(3) {
                0 => Term::nil(),
                1 if self.choices => Term::choose(if self.coin(0.5) { Base::Top } else { Base::List }),
                _ => var(self),
            };
        }
        let d = depth - 1;
        match self.below(7) {
            0 => {
                let x = POOL[self.below(POOL.len())];
                let a = self.raw_type(1);
                Term::abs(x, a, self.raw_term(d))
            }
            1 => Term::app(self.raw_term(d), self.raw_term(d)),
            2 => Term::cons(self.raw_term(d), self.raw_term(d)),
            3 => Arc::new(Term::Match {
                scrutinee: self.raw_term(d),
                nil_case: self.raw_term(d),
                head: Name::from(POOL[self.below(POOL.len())]),
                tail: Name::from(POOL[self.below(POOL.len())]),
                cons_case: self.raw_term(d),
            }),
            4 => Arc::new(Term::Fix {
                bound: self.rng.gen_range(0..4),
                binder: Name::from(POOL[self.below(POOL.len())]),
                annot: self.raw_type(1),
                body: self.raw_term(d),
                default: self.raw_term(d),
            }),
            5 if !self.choices => {
                let k = self.rng.gen_range(1..=3);
                Term::unpack(Base::List, Term::sel(self.raw_term(d), k))
            }
            _ => var(self),
        }
    }

    pub fn raw_type(&mut self, depth: usize) -> Arc<Type> {
        if depth == 0 {
            return if self.coin(0.5) { Type::top() } else { Type::list() };
        }
        let d = depth - 1;
        match self.below(6) {
            0 => Type::singleton(self.raw_term(1), self.raw_type(d)),
            1 => Type::pi("x", self.raw_type(d), self.raw_type(d)),
            2 => Type::exists("y", self.raw_type(d), self.raw_type(d)),
            3 => Type::cons(self.raw_type(d), self.raw_type(d)),
            4 => Arc::new(Type::Match {
                scrutinee: self.raw_term(1),
                nil_type: self.raw_type(d),
                head: Name::from("x"),
                tail: Name::from("y"),
                cons_type: self.raw_type(d),
            }),
            _ => self.raw_type(0),
        }
    }
}

pub fn has_choose(t: &Term) -> bool {
    match t {
        Term::Choose(_) => true,
        Term::Var(_) | Term::Nil | Term::TrailLit(_) => false,
        Term::Abs(_, a, b) => has_choose_ty(a) || has_choose(b),
        Term::App(a, b) | Term::Cons(a, b) => has_choose(a) || has_choose(b),
        Term::Match {
            scrutinee,
            nil_case,
            cons_case,
            ..
        } => has_choose(scrutinee) || has_choose(nil_case) || has_choose(cons_case),
        Term::Fix { body, default, .. } => has_choose(body) || has_choose(default),
        Term::Sel(a, _) | Term::Unpack(_, a) => has_choose(a),
    }
}

pub fn has_choose_ty(t: &Type) -> bool {
    match t {
        Type::Base(_) => false,
        Type::Singleton(s, u) => has_choose(s) || has_choose_ty(u),
        Type::Pi(_, a, b) | Type::Exists(_, a, b) | Type::Cons(a, b) => {
            has_choose_ty(a) || has_choose_ty(b)
        }
        Type::Match {
            scrutinee,
            nil_type,
            cons_type,
            ..
        } => has_choose(scrutinee) || has_choose_ty(nil_type) || has_choose_ty(cons_type),
    }
}

pub fn lower_type_fresh(t: &Arc<Type>) -> Arc<Type> {
    let mut supply = Supply::new();
    supply.reserve_type(t);
    elam::lower::lower_type(&mut supply, t).expect("surface type")
}

/// The lowering of a closed surface value. Lambdas ignore the trail they
/// are lowered at, so any root works.
pub fn lower_image(v: &Arc<Term>) -> Arc<Term> {
    let mut supply = Supply::new();
    supply.reserve_term(v);
    let root = supply.fresh("r");
    lower_term(&mut supply, &Term::var(root), v).expect("surface value")
}

/// Whether `t` mentions none of its own free variables. Generated closed
/// terms must satisfy this.
pub fn closed(t: &Term) -> bool {
    t.free_vars().is_empty()
}

// Oracle-backed checks shared by the property tests and the acceptance
// suite.

use elam::eval::{eval_core, list_values};
use elam::normalize::untangle;
use elam::oracle::{enumerate, member, EnumBudget, Membership, Reason};
use elam::syntax::Context;

#[derive(Debug, Default, Clone, Copy)]
pub struct Tally {
    /// Values on which both sides were decided.
    pub decided: usize,
    /// Values skipped because the oracle could not decide.
    pub undecided: usize,
}

impl Tally {
    pub fn add(&mut self, other: Tally) {
        self.decided += other.decided;
        self.undecided += other.undecided;
    }
}

#[derive(Debug)]
pub enum Inclusion {
    /// `t1` has a function type somewhere the oracle cannot enumerate.
    NotEnumerable,
    Holds(Tally),
    Violated(Arc<Term>),
}

/// Every enumerated member of `t1` is a member of `t2`, up to undecided
/// values.
pub fn oracle_inclusion(t1: &Arc<Type>, t2: &Arc<Type>, b: &EnumBudget) -> Inclusion {
    let Ok(values) = enumerate(t1, b) else {
        return Inclusion::NotEnumerable;
    };
    let mut tally = Tally::default();
    for v in values {
        match member(&v, t1, b) {
            Membership::True => {}
            Membership::False => continue,
            Membership::Undecided(_) => {
                tally.undecided += 1;
                continue;
            }
        }
        match member(&v, t2, b) {
            Membership::True => tally.decided += 1,
            Membership::False => return Inclusion::Violated(v),
            Membership::Undecided(_) => tally.undecided += 1,
        }
    }
    Inclusion::Holds(tally)
}

#[derive(Debug)]
pub enum Shadow {
    /// `infer` rejected the term or ran out of fuel.
    Untyped,
    /// The value is in the type; `function` when only a function type
    /// kept the oracle from deciding.
    Sound { function: bool },
    Violated(String),
}

/// If `t` has a type, it evaluates to a value of that type.
pub fn soundness_shadow(t: &Arc<Term>, fuel: u64, b: &EnumBudget) -> Shadow {
    let Ok(ty) = elam::infer::infer(&Context::new(), t, fuel) else {
        return Shadow::Untyped;
    };
    // Stuck terms and running out of fuel both count against the checker:
    // every generated recursion is bounded.
    let v = match eval_core(t, fuel) {
        Ok(v) => v,
        Err(e) => return Shadow::Violated(format!("{t}: {e}")),
    };
    match member(&v, &ty, b) {
        Membership::True => Shadow::Sound { function: false },
        Membership::Undecided(Reason::Function) => Shadow::Sound { function: true },
        m => Shadow::Violated(format!("{t} evaluates to {v}, membership in {ty} is {m:?}")),
    }
}

#[derive(Debug)]
pub enum Agreement {
    Agrees(Tally),
    Differs { value: Arc<Term>, before: Membership, after: Membership },
}

/// Membership in `ty` and in `untangle(ty)` coincide on all list values of
/// the budget's size.
pub fn untangle_agreement(ty: &Arc<Type>, b: &EnumBudget) -> Agreement {
    let after_ty = untangle(ty);
    let mut tally = Tally::default();
    for v in list_values(b.max_value_size) {
        let before = member(&v, ty, b);
        let after = member(&v, &after_ty, b);
        match (before, after) {
            (Membership::Undecided(_), _) | (_, Membership::Undecided(_)) => tally.undecided += 1,
            _ if before == after => tally.decided += 1,
            _ => return Agreement::Differs { value: v, before, after },
        }
    }
    Agreement::Agrees(tally)
}

/// A closed, well-formed pair `(T1, T2)` for the subtyping soundness check.
/// The second component is usually a generalization of the first, so that a
/// good share of pairs are related.
pub fn type_pair(g: &mut Gen, fuel: u64) -> Option<(Arc<Type>, Arc<Type>)> {
    let mut scope = Vec::new();
    let (t1, t2) = match g.below(4) {
        0 => {
            let t1 = g.ty(3, 3, &mut scope);
            let t2 = g.ty(3, 3, &mut scope);
            (t1, t2)
        }
        1 => {
            // A concrete list against a type built from choices.
            let v = g.value(4);
            let (_, lowered) = g.choice_type(2);
            (Type::singleton(v, Type::list()), lowered)
        }
        _ => {
            let t1 = g.ty(3, 3, &mut scope);
            let t2 = g.generalize(&t1);
            let t2 = if has_choose_ty(&t2) { lower_type_fresh(&t2) } else { t2 };
            (t1, t2)
        }
    };
    let wf = |t: &Arc<Type>| elam::infer::well_formed(&Context::new(), t, fuel).is_ok();
    (wf(&t1) && wf(&t2)).then_some((t1, t2))
}
