//! The family-definition language: parsing, printing, symbolic
//! differentiation and evaluation.

pub mod ast;
pub mod diff;
pub mod family;
pub mod kernel;
pub mod parse;
pub mod tape;

pub use ast::{Expr, Func, Rational, Var, E};
pub use diff::{differentiate, Builder};
pub use family::{Family, FamilyError, FamilyKind, FamilyRule, Feature, DEFAULT_MAX_ORDER};
pub use parse::{parse, parse_family_file, print, FamilyDef, ParseError};
pub use tape::{EvalError, Tape};
