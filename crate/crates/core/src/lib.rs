//! A small dependently-typed lambda calculus over lists, with singleton
//! types, existentials and a `choose` operator for non-deterministic input.
//!
//! Surface programs are lowered into a core calculus where every choice
//! reads from an explicit trail argument. Type checking happens on the
//! core side; [`oracle`] gives an executable reference semantics for
//! membership that the tests use to cross-check the checker.

pub mod betadelta;
pub mod eval;
pub mod frontend;
pub mod infer;
pub mod lower;
pub mod normalize;
pub mod oracle;
pub mod program;
pub mod session;
pub mod subtype;
pub mod syntax;
pub mod trail;

pub use eval::{ChoiceEntry, ChoiceLog, Chooser, EvalError, Fuel};
pub use frontend::{parse_context, parse_file, parse_term, parse_type, ParseError, SourceFile};
pub use oracle::{EnumBudget, Membership};
pub use program::{Options, Report, Status};
pub use session::{Session, TypeError, Verdict, DEFAULT_FUEL};
pub use syntax::{Base, Context, Dialect, Name, Supply, Syntax, Term, Type};
pub use trail::{SelPath, Trail};
