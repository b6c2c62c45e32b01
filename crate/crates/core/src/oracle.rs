//! Bounded membership oracle: decides `v ∈ T` for closed first-order
//! values by direct evaluation, enumerating witnesses for existentials up
//! to a budget. Used as ground truth in tests.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::betadelta::bd_reduce;
use crate::eval::list_values;
use crate::normalize::occurrences_type;
use crate::syntax::{Base, Context, Name, Syntax, Term, Type};
use crate::trail::{SelPath, Trail};

/// Fuel for reducing the terms inside singleton and match types.
const REDUCE_FUEL: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumBudget {
    /// Largest list value, counted in nils.
    pub max_value_size: usize,
    /// Levels of a trail tree; 1 means a leaf or the empty tree.
    pub max_trail_depth: usize,
    /// Witnesses tried per existential.
    pub max_exists_width: usize,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget {
            max_value_size: 4,
            max_trail_depth: 2,
            max_exists_width: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reason {
    /// A function value or function type is involved.
    Function,
    /// The budget cut an enumeration short.
    Budget,
    /// A term in the type has free variables.
    Open,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::Function => "function",
            Reason::Budget => "budget",
            Reason::Open => "open term",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    True,
    False,
    Undecided(Reason),
}

impl Membership {
    fn of(b: bool) -> Self {
        if b {
            Membership::True
        } else {
            Membership::False
        }
    }

    fn and(self, other: impl FnOnce() -> Membership) -> Membership {
        match self {
            Membership::False => Membership::False,
            Membership::True => other(),
            Membership::Undecided(r) => match other() {
                Membership::False => Membership::False,
                _ => Membership::Undecided(r),
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("cannot enumerate {0}")]
    NotEnumerable(String),
}

/// Values drawn for a quantifier, and whether they cover the budget.
struct Witnesses {
    values: Vec<Arc<Term>>,
    complete: bool,
}

fn dedup(values: Vec<Arc<Term>>) -> Vec<Arc<Term>> {
    let mut seen = HashSet::new();
    values.into_iter().filter(|v| seen.insert(v.to_string())).collect()
}

fn size(v: &Term) -> usize {
    match v {
        Term::Nil => 1,
        Term::Cons(h, t) => size(h) + size(t),
        _ => 1,
    }
}

/// Trails of at most `depth` levels whose leaves hold lists of at most
/// `leaf_size` nils.
fn trails(depth: usize, leaf_size: usize) -> Vec<Trail> {
    let mut out = vec![Trail::Empty];
    for v in list_values(leaf_size) {
        out.push(Trail::leaf(Base::Top, v.clone()));
        out.push(Trail::leaf(Base::List, v));
    }
    if depth <= 1 {
        return out;
    }
    let sub = trails(depth - 1, leaf_size);
    for a in &sub {
        for b in &sub {
            for c in &sub {
                out.push(Trail::node(a.clone(), b.clone(), c.clone()));
            }
        }
    }
    out
}

/// Witness trails for `∃x:Trail. body`. Only the subtrees at the selected
/// paths are observable, so when the paths are independent each is
/// enumerated on its own and the trail is assembled from the parts.
fn trail_witnesses(x: &Name, body: &Type, b: &EnumBudget) -> Witnesses {
    let mut occs = Vec::new();
    occurrences_type(x, body, &mut occs);
    let mut tags: BTreeMap<SelPath, BTreeSet<Option<Base>>> = BTreeMap::new();
    for o in occs {
        tags.entry(o.path).or_default().insert(o.under);
    }
    let paths: Vec<&SelPath> = tags.keys().collect();
    let independent = paths
        .iter()
        .enumerate()
        .all(|(i, p)| paths[i + 1..].iter().all(|q| p.independent(q)));
    let full = |complete: bool| Witnesses {
        values: trails(b.max_trail_depth, b.max_value_size.min(2))
            .into_iter()
            .map(Term::trail)
            .collect(),
        complete,
    };
    if !independent {
        return full(false);
    }
    let mut complete = true;
    let mut locals: Vec<(&SelPath, Vec<Trail>)> = Vec::new();
    for (p, under) in &tags {
        let local: Vec<Trail> = if under.contains(&None) {
            complete = false;
            trails(b.max_trail_depth, b.max_value_size.min(2))
        } else {
            // Size-major, so a smaller budget yields a prefix of this list.
            let mut l = vec![Trail::Empty];
            for v in list_values(b.max_value_size) {
                for tag in under.iter().flatten() {
                    l.push(Trail::leaf(*tag, v.clone()));
                }
            }
            l
        };
        locals.push((p, local));
    }
    let lens: Vec<usize> = locals.iter().map(|(_, l)| l.len()).collect();
    let (tuples, all) = index_tuples(&lens, b.max_exists_width);
    let values = tuples
        .into_iter()
        .map(|idx| {
            let t = locals
                .iter()
                .zip(&idx)
                .fold(Trail::Empty, |t, ((p, l), &i)| t.update(p.as_slice(), l[i].clone()));
            Term::trail(t)
        })
        .collect();
    Witnesses {
        values,
        complete: complete && all,
    }
}

/// Index tuples below `lens`, by increasing sum, at most `limit` of them.
/// Early entries of every list are combined before late ones, so a cutoff
/// drops the largest choices first. Also reports whether all were produced.
fn index_tuples(lens: &[usize], limit: usize) -> (Vec<Vec<usize>>, bool) {
    fn fill(lens: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) {
        if out.len() >= limit {
            return;
        }
        let Some((&n, rest)) = lens.split_first() else {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        };
        let room: usize = rest.iter().map(|l| l - 1).sum();
        for i in left.saturating_sub(room)..n.min(left + 1) {
            cur.push(i);
            fill(rest, left - i, cur, out, limit);
            cur.pop();
        }
    }
    let total = lens.iter().fold(1usize, |a, &l| a.saturating_mul(l));
    let max_sum: usize = lens.iter().map(|l| l - 1).sum();
    let mut out = Vec::new();
    for sum in 0..=max_sum {
        fill(lens, sum, &mut Vec::new(), &mut out, limit);
        if out.len() >= limit {
            break;
        }
    }
    let all = out.len() == total;
    (out, all)
}

fn reduce_closed(t: &Arc<Term>) -> Result<Arc<Term>, Reason> {
    reduce_symbolic(t, &[], &mut BTreeSet::new())
}

/// Reduces `t`, whose free variables must all be in `symbolic`, and
/// insists that the normal form no longer mentions them. The ones it still
/// mentions are added to `blocked`.
fn reduce_symbolic(t: &Arc<Term>, symbolic: &[Name], blocked: &mut BTreeSet<Name>) -> Result<Arc<Term>, Reason> {
    if !t.free_vars().iter().all(|x| symbolic.contains(x)) {
        return Err(Reason::Open);
    }
    let nf = bd_reduce(&Context::new(), t, REDUCE_FUEL).map_err(|_| Reason::Budget)?;
    let left = nf.free_vars();
    if left.is_empty() {
        Ok(nf)
    } else {
        blocked.extend(left);
        Err(Reason::Open)
    }
}

fn first_order(v: &Term) -> bool {
    match v {
        Term::Nil | Term::TrailLit(_) => true,
        Term::Cons(h, t) => first_order(h) && first_order(t),
        _ => false,
    }
}

/// The closed values of `ty` within the budget.
pub fn enumerate(ty: &Arc<Type>, b: &EnumBudget) -> Result<Vec<Arc<Term>>, OracleError> {
    let not = || OracleError::NotEnumerable(ty.to_string());
    Ok(match &**ty {
        Type::Base(Base::Top | Base::List) => list_values(b.max_value_size),
        Type::Base(Base::Trail) => trails(b.max_trail_depth, b.max_value_size.min(2))
            .into_iter()
            .map(Term::trail)
            .collect(),
        Type::Singleton(t, u) => {
            let v = reduce_closed(t).map_err(|_| not())?;
            if !first_order(&v) {
                return Err(not());
            }
            if member(&v, u, b) == Membership::True && size(&v) <= b.max_value_size {
                vec![v]
            } else {
                Vec::new()
            }
        }
        Type::Cons(h, t) => {
            let hs = enumerate(h, b)?;
            let ts = enumerate(t, b)?;
            let mut out = Vec::new();
            for h in &hs {
                for t in ts.iter().filter(|t| t.is_list_value()) {
                    if size(h) + size(t) <= b.max_value_size {
                        out.push(Term::cons(h.clone(), t.clone()));
                    }
                }
            }
            out
        }
        Type::Match {
            scrutinee,
            nil_type,
            head,
            tail,
            cons_type,
        } => match &*reduce_closed(scrutinee).map_err(|_| not())? {
            Term::Nil => enumerate(nil_type, b)?,
            Term::Cons(t1, t2) => enumerate(&cons_type.subst(head, t1).subst(tail, t2), b)?,
            _ => return Err(not()),
        },
        Type::Exists(x, s, body) => {
            let ws = if s.is_base(Base::Trail) {
                trail_witnesses(x, body, b).values
            } else {
                enumerate(s, b)?
            };
            let mut out = Vec::new();
            for w in ws.iter().take(b.max_exists_width) {
                out.extend(enumerate(&body.subst(x, w), b)?);
            }
            dedup(out)
        }
        Type::Pi(..) => return Err(not()),
    })
}

/// `v ∈ ⟦T⟧`, three-valued.
pub fn member(v: &Arc<Term>, ty: &Arc<Type>, b: &EnumBudget) -> Membership {
    Symbolic::default().member(v, ty, b)
}

/// Existential variables left unbound while deciding membership. If no
/// reduction gets stuck on such a variable, the answer is the same for
/// every value it could stand for.
#[derive(Default)]
struct Symbolic {
    vars: Vec<Name>,
    blocked: BTreeSet<Name>,
}

impl Symbolic {
    fn reduce(&mut self, t: &Arc<Term>) -> Result<Arc<Term>, Reason> {
        reduce_symbolic(t, &self.vars, &mut self.blocked)
    }

    /// Membership in `body` for every value of `x`, unless some reduction
    /// needed the value.
    fn for_all(&mut self, v: &Arc<Term>, x: &Name, body: &Arc<Type>, b: &EnumBudget) -> Option<Membership> {
        let outer = std::mem::take(&mut self.blocked);
        self.vars.push(x.clone());
        let m = self.member(v, body, b);
        self.vars.pop();
        let needed = self.blocked.remove(x);
        let inner = std::mem::replace(&mut self.blocked, outer);
        self.blocked.extend(inner);
        (!needed).then_some(m)
    }

    fn member(&mut self, v: &Arc<Term>, ty: &Arc<Type>, b: &EnumBudget) -> Membership {
        match &**ty {
            Type::Base(Base::Top) => Membership::True,
            Type::Base(Base::List) => Membership::of(v.is_list_value()),
            Type::Base(Base::Trail) => Membership::of(matches!(**v, Term::TrailLit(_))),
            Type::Singleton(t, u) => {
                if !first_order(v) {
                    return Membership::Undecided(Reason::Function);
                }
                match self.reduce(t) {
                    Err(r) => Membership::Undecided(r),
                    Ok(nf) if !nf.is_value() => Membership::False,
                    Ok(nf) if !first_order(&nf) => Membership::Undecided(Reason::Function),
                    Ok(nf) => Membership::of(nf.alpha_eq(v)).and(|| self.member(v, u, b)),
                }
            }
            Type::Cons(h, t) => match &**v {
                Term::Cons(vh, vt) => self.member(vh, h, b).and(|| self.member(vt, t, b)),
                _ if first_order(v) => Membership::False,
                _ => Membership::Undecided(Reason::Function),
            },
            Type::Match {
                scrutinee,
                nil_type,
                head,
                tail,
                cons_type,
            } => match self.reduce(scrutinee) {
                Err(r) => Membership::Undecided(r),
                Ok(s) => match &*s {
                    Term::Nil => self.member(v, nil_type, b),
                    Term::Cons(t1, t2) => self.member(v, &cons_type.subst(head, t1).subst(tail, t2), b),
                    _ => Membership::Undecided(Reason::Open),
                },
            },
            Type::Exists(x, s, body) => {
                // Lowered programs often pass selections of a trail to
                // functions that ignore them; then no witness is needed. Base
                // types are inhabited, so the answer is exact.
                if let Type::Base(_) = **s {
                    if let Some(m) = self.for_all(v, x, body, b) {
                        return m;
                    }
                }
                let fv = s.free_vars();
                let needs: Vec<Name> = self.vars.iter().filter(|y| fv.contains(*y)).cloned().collect();
                if !needs.is_empty() {
                    // The domain itself depends on an unbound variable.
                    self.blocked.extend(needs);
                    return Membership::Undecided(Reason::Open);
                }
                let ws = if s.is_base(Base::Trail) {
                    trail_witnesses(x, body, b)
                } else {
                    match enumerate(s, b) {
                        Ok(values) => Witnesses { values, complete: true },
                        Err(_) => return Membership::Undecided(Reason::Function),
                    }
                };
                // A well-formed domain is inhabited, so finding no witness at all
                // means the budget was too small, not that the domain is empty.
                let starved = ws.values.is_empty();
                let mut undecided =
                    (starved || !ws.complete || ws.values.len() > b.max_exists_width).then_some(Reason::Budget);
                for w in ws.values.iter().take(b.max_exists_width) {
                    match self.member(v, &body.subst(x, w), b) {
                        Membership::True => return Membership::True,
                        Membership::False => {}
                        Membership::Undecided(r) => undecided = Some(r),
                    }
                }
                undecided.map_or(Membership::False, Membership::Undecided)
            }
            Type::Pi(..) => match &**v {
                Term::Abs(..) | Term::Fix { .. } => Membership::Undecided(Reason::Function),
                _ => Membership::False,
            },
        }
    }
}

/// A value of `t1` (within the budget) that is definitely not in `t2`.
pub fn inclusion_counterexample(
    t1: &Arc<Type>,
    t2: &Arc<Type>,
    b: &EnumBudget,
) -> Result<Option<(Arc<Term>, Membership)>, OracleError> {
    for v in enumerate(t1, b)? {
        if member(&v, t1, b) != Membership::True {
            continue;
        }
        let m = member(&v, t2, b);
        if m == Membership::False {
            return Ok(Some((v, m)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_term, parse_type};
    use crate::normalize::untangle;

    fn t(s: &str) -> Arc<Term> {
        Arc::new(parse_term(s).unwrap())
    }

    fn ty(s: &str) -> Arc<Type> {
        Arc::new(parse_type(s).unwrap())
    }

    fn small(n: usize) -> EnumBudget {
        EnumBudget {
            max_value_size: n,
            ..EnumBudget::default()
        }
    }

    fn strings(vs: &[Arc<Term>]) -> Vec<String> {
        vs.iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(strings(&enumerate(&ty("List"), &small(2)).unwrap()), ["nil", "cons nil nil"]);
        assert_eq!(strings(&enumerate(&ty("{ nil : List }"), &small(3)).unwrap()), ["nil"]);
        let cons: BTreeSet<String> = strings(&enumerate(&ty("Cons Top List"), &small(3)).unwrap()).into_iter().collect();
        let lists: BTreeSet<String> = strings(&enumerate(&ty("List"), &small(3)).unwrap()).into_iter().collect();
        assert!(cons.is_subset(&lists));
        assert!(!cons.contains("nil"));
        assert_eq!(cons.len(), lists.len() - 1);
        assert!(enumerate(&ty("Pi(x: Top) => Top"), &small(2)).is_err());
    }

    #[test]
    fn member_examples() {
        let b = EnumBudget::default();
        assert_eq!(member(&t("nil"), &ty("{ nil : List }"), &b), Membership::True);
        let pair = ty("exists(x1: Top) => exists(x2: List) => { cons x1 x2 : List }");
        assert_eq!(member(&t("cons nil nil"), &pair, &b), Membership::True);
        assert_eq!(member(&t("nil"), &pair, &b), Membership::False);
        assert_eq!(member(&t("nil"), &ty("Cons Top List"), &b), Membership::False);
    }

    #[test]
    fn trail_existentials() {
        let b = EnumBudget::default();
        let tangled = ty("exists(z: Trail) => { cons (unpack[Top](z.1)) (unpack[List](z.2)) : List }");
        assert_eq!(member(&t("cons (cons nil nil) nil"), &tangled, &b), Membership::True);
        assert_eq!(member(&t("nil"), &tangled, &b), Membership::False);
        let bare = ty("exists(z: Trail) => { z.1 : Trail }");
        let lit = Term::trail(Trail::leaf(Base::Top, Term::nil()));
        assert_eq!(member(&lit, &bare, &b), Membership::True);
        assert_eq!(member(&lit, &untangle(&bare), &b), Membership::True);
    }

    #[test]
    fn functions_are_undecided() {
        let b = EnumBudget::default();
        let id = t("\\(x: Top) => x");
        assert_eq!(member(&id, &ty("Pi(x: Top) => Top"), &b), Membership::Undecided(Reason::Function));
        assert_eq!(member(&id, &ty("Top"), &b), Membership::True);
        assert_eq!(member(&t("nil"), &ty("Pi(x: Top) => Top"), &b), Membership::False);
    }

    #[test]
    fn open_terms_are_undecided() {
        let b = EnumBudget::default();
        assert_eq!(member(&t("nil"), &ty("{ x : List }"), &b), Membership::Undecided(Reason::Open));
    }

    #[test]
    fn unread_trails_need_no_witness() {
        // Three nested trail existentials whose selections are all ignored;
        // enumerating witnesses for each would take billions of steps.
        let ignore = |z: &str, k: u8, r: &str| format!("(\\(w: Trail) => {r}) {z}.{k}");
        let m = ty(&format!(
            "exists(a: Trail) => Match {} {{ nil => exists(b: Trail) => Match {} {{ \
             nil => exists(c: Trail) => {{ {} : List }}; cons h r => List }}; cons h r => List }}",
            ignore("a", 1, "nil"),
            ignore("b", 2, "nil"),
            ignore("c", 3, "cons nil nil"),
        ));
        let b = EnumBudget::default();
        assert_eq!(member(&t("cons nil nil"), &m, &b), Membership::True);
        assert_eq!(member(&t("nil"), &m, &b), Membership::False);
        // A trail that is read still goes through its witnesses.
        let read = ty("exists(z: Trail) => { unpack[List](z.1) : List }");
        assert_eq!(member(&t("cons nil nil"), &read, &b), Membership::True);
        // So does a variable that an inner domain depends on.
        let dep = ty("exists(x: List) => exists(y: { x : List }) => { y : List }");
        assert_eq!(member(&t("cons nil nil"), &dep, &b), Membership::True);
    }

    #[test]
    fn match_types() {
        let b = EnumBudget::default();
        let m = ty("Match cons nil nil { nil => Top; cons h r => { r : List } }");
        assert_eq!(member(&t("nil"), &m, &b), Membership::True);
        assert_eq!(member(&t("cons nil nil"), &m, &b), Membership::False);
    }

    #[test]
    fn self_consistency() {
        let b = EnumBudget::default();
        for v in enumerate(&ty("List"), &b).unwrap() {
            let s = Type::singleton(v.clone(), Type::list());
            assert_eq!(member(&v, &s, &b), Membership::True, "{v}");
        }
    }

    #[test]
    fn counterexamples() {
        let b = EnumBudget::default();
        assert!(inclusion_counterexample(&ty("Cons Top List"), &ty("List"), &b).unwrap().is_none());
        let (v, _) = inclusion_counterexample(&ty("List"), &ty("Cons Top List"), &b).unwrap().unwrap();
        assert_eq!(v.to_string(), "nil");
    }
}
