//! βδ-reduction: call-by-value β plus unfolding of variables whose
//! context type is a singleton.

use std::sync::Arc;

use crate::eval::{step_core, EvalError, Fuel, Reducer};
use crate::syntax::{Context, Name, Term, Type};

/// The δ-rule for `ctx`: `x ↦ t` when `ctx(x) = { t : U }`.
pub fn delta(ctx: &Context) -> impl Fn(&Name) -> Option<Arc<Term>> + '_ {
    move |x| match ctx.lookup(x).map(|t| &**t) {
        Some(Type::Singleton(t, _)) => Some(t.clone()),
        _ => None,
    }
}

/// One βδ step, or `None` if `t` is βδ-normal under `ctx`.
pub fn bd_step(ctx: &Context, t: &Arc<Term>) -> Option<Arc<Term>> {
    step_core(t, &delta(ctx))
}

/// βδ-normal form of `t`, spending one unit of `fuel` per step.
pub fn bd_reduce_with(ctx: &Context, t: &Arc<Term>, fuel: &mut Fuel) -> Result<Arc<Term>, EvalError> {
    let d = delta(ctx);
    Reducer::new(&d, fuel).reduce(t)
}

pub fn bd_reduce(ctx: &Context, t: &Arc<Term>, fuel: u64) -> Result<Arc<Term>, EvalError> {
    bd_reduce_with(ctx, t, &mut Fuel::new(fuel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_context, parse_term};
    use crate::syntax::Syntax;
    use proptest::prelude::*;

    fn t(s: &str) -> Arc<Term> {
        Arc::new(parse_term(s).unwrap())
    }

    #[test]
    fn step_examples() {
        let ctx = parse_context("x: { nil : List }").unwrap();
        assert_eq!(*bd_step(&ctx, &t("x")).unwrap(), Term::Nil);
        assert!(bd_step(&Context::new(), &t("x")).is_none());
        assert_eq!(*bd_step(&Context::new(), &t("(\\(x: Top) => x) nil")).unwrap(), Term::Nil);
    }

    #[test]
    fn reduce_examples() {
        let ctx = parse_context("x: { nil : List }").unwrap();
        assert!(bd_reduce(&ctx, &t("cons x nil"), 100).unwrap().alpha_eq(&t("cons nil nil")));
        assert_eq!(*bd_reduce(&Context::new(), &t("nil"), 100).unwrap(), Term::Nil);
        let ctx = parse_context("f: { \\(x: List) => x : Pi(x: List) => List }").unwrap();
        assert_eq!(*bd_reduce(&ctx, &t("f nil"), 100).unwrap(), Term::Nil);
    }

    #[test]
    fn non_singleton_bindings_stay_put() {
        let ctx = parse_context("x: List").unwrap();
        assert!(bd_reduce(&ctx, &t("cons x nil"), 100).unwrap().alpha_eq(&t("cons x nil")));
    }

    #[test]
    fn reduce_reports_out_of_fuel() {
        let loop_ = t("fix[100](f: List => cons nil f, nil)");
        assert_eq!(bd_reduce(&Context::new(), &loop_, 10), Err(EvalError::OutOfFuel));
    }

    fn iterate(ctx: &Context, t: &Arc<Term>) -> (Arc<Term>, u64) {
        let mut cur = t.clone();
        let mut n = 0;
        while let Some(next) = bd_step(ctx, &cur) {
            cur = next;
            n += 1;
        }
        (cur, n)
    }

    fn arb_term() -> impl Strategy<Value = Arc<Term>> {
        let leaf = prop_oneof![
            Just(Term::nil()),
            Just(Term::var("x")),
            Just(Term::var("y")),
            Just(t("\\(a: List) => cons a a")),
            Just(t("\\(a: Top) => match a { nil => x; cons h r => r }")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::cons(a, b)),
                (inner.clone(), inner.clone(), inner).prop_map(|(s, n, c)| Arc::new(Term::Match {
                    scrutinee: s,
                    nil_case: n,
                    head: Name::from("h"),
                    tail: Name::from("r"),
                    cons_case: c,
                })),
            ]
        })
    }

    proptest! {
        #[test]
        fn big_step_agrees_with_iterated_steps(s in arb_term()) {
            let ctx = parse_context("x: { cons nil nil : List }, y: List").unwrap();
            let (small, steps) = iterate(&ctx, &s);
            let mut fuel = Fuel::new(1_000_000);
            let big = bd_reduce_with(&ctx, &s, &mut fuel).unwrap();
            prop_assert!(big.alpha_eq(&small), "{} vs {}", big, small);
            // Shared subterms are reduced once, so the big-step reducer never
            // spends more than the step count.
            prop_assert!(1_000_000 - fuel.remaining() <= steps);
        }

        #[test]
        fn delta_matches_substitution(s in arb_term()) {
            let ctx = parse_context("x: { cons nil nil : List }").unwrap();
            let x = Name::from("x");
            let closed = s.subst(&x, &t("cons nil nil"));
            // Bodies of lambdas are not reduced, so δ may leave `x` there.
            let a = bd_reduce(&ctx, &s, 1_000_000).unwrap().subst(&x, &t("cons nil nil"));
            let b = bd_reduce(&Context::new(), &closed, 1_000_000).unwrap();
            prop_assert!(a.alpha_eq(&b), "{} vs {}", a, b);
        }
    }
}
