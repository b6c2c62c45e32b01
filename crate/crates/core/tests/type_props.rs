mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::*;
use elam::betadelta::bd_reduce;
use elam::eval::{eval_core, EvalError};
use elam::infer::{check, infer, well_formed};
use elam::normalize::{normalize, untangle};
use elam::oracle::{enumerate, member, EnumBudget, Membership};
use elam::subtype::{solve_x, subtype};
use elam::syntax::{Base, Context, Name, Syntax, Term, Type};

const FUEL: u64 = 10_000;

fn empty() -> Context {
    Context::new()
}

/// Closed, choose-free core terms of type `List` or a function type.
fn core_terms() -> impl Strategy<Value = Arc<Term>> {
    any::<u64>().prop_map(|s| Gen::new(s).program(3))
}

/// Closed well-formed types, depth at most 3.
fn wf_types() -> impl Strategy<Value = Arc<Type>> {
    any::<u64>().prop_filter_map("ill-formed", |s| {
        let t = Gen::new(s).ty(3, 2, &mut Vec::new());
        well_formed(&empty(), &t, FUEL).is_ok().then_some(t)
    })
}

fn lowered_choice_types() -> impl Strategy<Value = Arc<Type>> {
    any::<u64>().prop_map(|s| Gen::new(s).choice_type(2).1)
}

/// Whether some `unpack` reads a selection rooted at a Trail existential.
fn unpacks_trail_binder(t: &Type, binders: &mut Vec<Name>) -> bool {
    fn term(t: &Term, binders: &[Name]) -> bool {
        match t {
            Term::Unpack(_, s) => {
                s.as_selection().is_some_and(|(x, _)| binders.contains(x)) || term(s, binders)
            }
            Term::Var(_) | Term::Nil | Term::Choose(_) | Term::TrailLit(_) => false,
            Term::Abs(_, _, b) | Term::Sel(b, _) => term(b, binders),
            Term::App(a, b) | Term::Cons(a, b) => term(a, binders) || term(b, binders),
            Term::Match {
                scrutinee,
                nil_case,
                cons_case,
                ..
            } => term(scrutinee, binders) || term(nil_case, binders) || term(cons_case, binders),
            Term::Fix { body, default, .. } => term(body, binders) || term(default, binders),
        }
    }
    match t {
        Type::Base(_) => false,
        Type::Singleton(s, u) => term(s, binders) || unpacks_trail_binder(u, binders),
        Type::Exists(x, s, body) if s.is_base(Base::Trail) => {
            binders.push(x.clone());
            let found = unpacks_trail_binder(body, binders);
            binders.pop();
            found
        }
        Type::Pi(_, a, b) | Type::Exists(_, a, b) | Type::Cons(a, b) => {
            unpacks_trail_binder(a, binders) || unpacks_trail_binder(b, binders)
        }
        Type::Match {
            scrutinee,
            nil_type,
            cons_type,
            ..
        } => {
            term(scrutinee, binders)
                || unpacks_trail_binder(nil_type, binders)
                || unpacks_trail_binder(cons_type, binders)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bd_reduce_matches_evaluation_when_closed(t in core_terms()) {
        match (bd_reduce(&empty(), &t, FUEL), eval_core(&t, FUEL)) {
            (Ok(a), Ok(b)) => prop_assert!(a.alpha_eq(&b), "{a} vs {b}"),
            (Err(EvalError::OutOfFuel), _) | (_, Err(EvalError::OutOfFuel)) => {}
            (a, b) => prop_assert!(false, "{t}: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn normalize_is_idempotent(t in wf_types()) {
        if let Ok(n) = normalize(&empty(), &t, FUEL) {
            let again = normalize(&empty(), &n, FUEL).unwrap();
            prop_assert!(again.alpha_eq(&n), "{n}\n{again}");
        }
    }

    #[test]
    fn normalize_keeps_binders_of_free_variables(t in wf_types()) {
        if let Ok(n) = normalize(&empty(), &t, FUEL) {
            prop_assert!(n.free_vars().is_subset(&t.free_vars()), "{t}\n{n}");
        }
    }

    #[test]
    fn untangled_lowerings_read_no_trail(t in lowered_choice_types()) {
        let u = untangle(&t);
        prop_assert!(!unpacks_trail_binder(&u, &mut Vec::new()), "{t}\n{u}");
    }

    #[test]
    fn untangle_preserves_membership(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let t = if seed % 2 == 0 { g.choice_type(2).1 } else { g.trail_exists(2) };
        match untangle_agreement(&t, &EnumBudget::default()) {
            Agreement::Agrees(_) => {}
            Agreement::Differs { value, before, after } => {
                prop_assert!(false, "{t} at {value}: {before:?} then {after:?}")
            }
        }
    }

    #[test]
    fn subtyping_is_reflexive_and_bounded_by_top(t in wf_types()) {
        prop_assert!(subtype(&empty(), &t, &t, FUEL), "{t}");
        prop_assert!(subtype(&empty(), &t, &Type::top(), FUEL), "{t}");
    }

    #[test]
    fn subtyping_is_sound_for_the_oracle(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        if let Some((t1, t2)) = type_pair(&mut g, FUEL) {
            if subtype(&empty(), &t1, &t2, FUEL) {
                if let Inclusion::Violated(v) = oracle_inclusion(&t1, &t2, &EnumBudget::default()) {
                    prop_assert!(false, "{v} is in {t1} but not {t2}");
                }
            }
        }
    }

    #[test]
    fn inference_is_precise(t in core_terms()) {
        let ty = infer(&empty(), &t, FUEL).unwrap();
        match &*ty {
            Type::Singleton(s, _) => prop_assert!(s.alpha_eq(&t), "{t}: {ty}"),
            _ => prop_assert!(false, "{t}: {ty}"),
        }
    }

    #[test]
    fn typed_terms_evaluate_into_their_type(t in core_terms()) {
        if let Shadow::Violated(why) = soundness_shadow(&t, FUEL, &EnumBudget::default()) {
            prop_assert!(false, "{why}");
        }
    }

    #[test]
    fn checking_is_closed_under_subsumption(t in core_terms(), seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let t1 = infer(&empty(), &t, FUEL).unwrap();
        let t2 = g.generalize(&t1);
        let t2 = if has_choose_ty(&t2) { lower_type_fresh(&t2) } else { t2 };
        if subtype(&empty(), &t1, &t2, FUEL) {
            prop_assert!(check(&empty(), &t, &t2, FUEL).unwrap(), "{t} : {t2}");
        }
    }

    #[test]
    fn oracle_singletons_contain_their_term(t in wf_types()) {
        if let Ok(values) = enumerate(&t, &EnumBudget::default()) {
            for v in values {
                let single = Type::singleton(v.clone(), t.clone());
                prop_assert_eq!(member(&v, &single, &EnumBudget::default()), Membership::True);
            }
        }
    }

    #[test]
    fn oracle_is_monotone_in_budget(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let t = if seed % 2 == 0 { g.ty(3, 2, &mut Vec::new()) } else { g.choice_type(2).1 };
        let small = EnumBudget { max_value_size: 3, max_trail_depth: 1, max_exists_width: 64 };
        let large = EnumBudget::default();
        for v in elam::eval::list_values(3) {
            if member(&v, &t, &small) == Membership::True {
                prop_assert_eq!(member(&v, &t, &large), Membership::True, "{} in {}", v, t);
            }
        }
    }
}

/// `T1 <: exists(x: S) => T2` where `T2` abstracts part of the concrete list
/// in `T1`.
fn abstracted_pair(g: &mut Gen) -> (Arc<Type>, Name, Arc<Type>, Arc<Type>) {
    let v = Term::cons(g.value(2), g.value(2));
    let x = Name::from("x");
    let (s, body) = match g.below(3) {
        0 => (Type::top(), Term::cons(Term::var("x"), tail_of(&v))),
        1 => (Type::list(), Term::cons(head_of(&v), Term::var("x"))),
        _ => (Type::list(), Term::var("x")),
    };
    let t1 = Type::singleton(v, Type::list());
    (t1, x, s, Type::singleton(body, Type::list()))
}

fn head_of(v: &Term) -> Arc<Term> {
    match v {
        Term::Cons(h, _) => h.clone(),
        _ => unreachable!(),
    }
}

fn tail_of(v: &Term) -> Arc<Term> {
    match v {
        Term::Cons(_, t) => t.clone(),
        _ => unreachable!(),
    }
}

#[test]
fn exists_right_instantiations_satisfy_both_premises() {
    let mut solved = 0;
    for seed in 0..300 {
        let mut g = Gen::new(seed);
        let (t1, x, s, body) = abstracted_pair(&mut g);
        let whole = Type::exists(x.clone(), s.clone(), body.clone());
        assert!(subtype(&empty(), &t1, &whole, FUEL), "{t1} <: {whole}");
        if let Some(sol) = solve_x(&empty(), &x, &t1, &s, &body, FUEL) {
            let Type::Singleton(t, _) = &*sol else { panic!("{sol}") };
            assert!(subtype(&empty(), &sol, &s, FUEL), "{sol} <: {s}");
            assert!(subtype(&empty(), &t1, &body.subst(&x, t), FUEL));
            solved += 1;
        }
    }
    assert!(solved >= 150, "only {solved} instantiations found");
}
