//! Exact symbolic q-functions.
//!
//! A [`QFunction`] is a function of the point `x` and the jet `(q0, q1, …)` of
//! a density at that point, possibly also of model parameters and opaque
//! univariate functions `a(x)`. Values are kept in a canonical sum-of-terms
//! form with exact rational coefficients, so operator identities cancel
//! exactly. Floating point only enters through [`QFunction::evaluate`] and
//! [`Compiled`].

mod atom;
mod eval;
mod parse;
mod print;
mod qfunction;
mod tree;
mod zero;

use thiserror::Error;

pub use atom::{Atom, Exponent, Monomial, Var};
pub use eval::{Bindings, Compiled, JetPoint, OpaqueFn, SlotLayout};
pub use parse::{parse_tree, ParseError};
pub use qfunction::{QFunction, Term};
pub use tree::{Leaf, Tree};
pub use zero::{ZeroCheck, ZeroMethod, ZeroTestConfig};

pub(crate) use zero::free_layout;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("opaque function `{0}` cannot be composed with a substituted x")]
    OpaqueComposition(String),
    #[error("evaluation failed at every sample point")]
    SingularSamples,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("no binding for `{0}`")]
    MissingBinding(String),
    #[error("jet point does not supply q{0}")]
    MissingJet(usize),
    #[error("density value q0 must be positive")]
    NonPositiveDensity,
}

/// Parse a q-function in `x`, `q0, q1, …` and opaque functions `a(x)`.
pub fn parse(text: &str) -> Result<QFunction, ExprError> {
    parse_with_params(text, &[])
}

/// Parse allowing the listed bare identifiers as parameters.
pub fn parse_with_params(text: &str, params: &[&str]) -> Result<QFunction, ExprError> {
    parse_tree(text, params)?.canonicalize()
}

/// Identity: [`QFunction`] values are always canonical.
pub fn canonicalize(f: &QFunction) -> QFunction {
    f.clone()
}

/// Partial derivative with respect to `x`, a jet symbol or a parameter.
pub fn partial(f: &QFunction, v: &Var) -> QFunction {
    f.partial(v)
}

impl std::str::FromStr for QFunction {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl serde::Serialize for QFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
