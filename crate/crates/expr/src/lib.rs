//! Expression trees for chart-local scalar and metric fields.
//!
//! Expressions are parsed against an ordered list of coordinate names, so
//! every variable is a slot index into the point's coordinate vector.
//! Derivatives are exact: they come from differentiating the tree, never from
//! finite differences.

mod ast;
mod diff;
mod eval;
mod field;
mod parse;

pub use ast::{Expr, Func, Node, NodeKind};
pub use eval::EvalError;
pub use field::{multi_indices, DerivativeTable, FieldError, SymbolicField, MAX_ORDER};
pub use parse::{parse_expression, ParseError};
