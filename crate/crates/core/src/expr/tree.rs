use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;

use super::atom::{Exponent, Var};
use super::qfunction::{coeff_to_f64, exponent_to_f64};
use super::{ExprError, QFunction};

/// Expression tree as written, before canonicalization.
#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Num(BigRational),
    X,
    Q(u32),
    Param(Arc<str>),
    Func { name: Arc<str>, deriv: u32 },
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Neg(Box<Tree>),
    Pow(Box<Tree>, Exponent),
    Ln(Box<Tree>),
    Exp(Box<Tree>),
}

/// A leaf of an expression handed to a valuation callback.
#[derive(Clone, Copy, Debug)]
pub enum Leaf<'a> {
    X,
    Q(u32),
    Param(&'a str),
    Func(&'a str, u32),
}

impl Tree {
    pub fn canonicalize(&self) -> Result<QFunction, ExprError> {
        Ok(match self {
            Tree::Num(c) => QFunction::constant(c.clone()),
            Tree::X => QFunction::x(),
            Tree::Q(j) => QFunction::q(*j),
            Tree::Param(p) => QFunction::var(&Var::Param(p.clone())),
            Tree::Func { name, deriv } => QFunction::func(name, *deriv),
            Tree::Add(a, b) => a.canonicalize()? + b.canonicalize()?,
            Tree::Sub(a, b) => a.canonicalize()? - b.canonicalize()?,
            Tree::Mul(a, b) => a.canonicalize()? * b.canonicalize()?,
            Tree::Div(a, b) => a.canonicalize()?.try_div(&b.canonicalize()?)?,
            Tree::Neg(a) => -a.canonicalize()?,
            Tree::Pow(a, e) => a.canonicalize()?.pow(*e)?,
            Tree::Ln(a) => a.canonicalize()?.ln()?,
            Tree::Exp(a) => a.canonicalize()?.exp(),
        })
    }

    /// Direct floating point evaluation of the tree.
    pub fn eval_with(&self, leaf: &mut dyn FnMut(Leaf<'_>) -> f64) -> f64 {
        match self {
            Tree::Num(c) => coeff_to_f64(c),
            Tree::X => leaf(Leaf::X),
            Tree::Q(j) => leaf(Leaf::Q(*j)),
            Tree::Param(p) => leaf(Leaf::Param(p)),
            Tree::Func { name, deriv } => leaf(Leaf::Func(name, *deriv)),
            Tree::Add(a, b) => a.eval_with(leaf) + b.eval_with(leaf),
            Tree::Sub(a, b) => a.eval_with(leaf) - b.eval_with(leaf),
            Tree::Mul(a, b) => a.eval_with(leaf) * b.eval_with(leaf),
            Tree::Div(a, b) => a.eval_with(leaf) / b.eval_with(leaf),
            Tree::Neg(a) => -a.eval_with(leaf),
            Tree::Pow(a, e) => {
                let v = a.eval_with(leaf);
                if e.is_integer() {
                    v.powi(e.to_integer() as i32)
                } else {
                    v.powf(exponent_to_f64(e))
                }
            }
            Tree::Ln(a) => a.eval_with(leaf).ln(),
            Tree::Exp(a) => a.eval_with(leaf).exp(),
        }
    }
}

pub(crate) fn write_exponent(f: &mut fmt::Formatter<'_>, e: &Exponent) -> fmt::Result {
    if e.is_integer() && *e.numer() > 0 {
        write!(f, "^{}", e.numer())
    } else if e.is_integer() {
        write!(f, "^({})", e.numer())
    } else {
        write!(f, "^({}/{})", e.numer(), e.denom())
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Num(c) if c.is_integer() => write!(f, "{c}"),
            Tree::Num(c) => write!(f, "({c})"),
            Tree::X => write!(f, "x"),
            Tree::Q(j) => write!(f, "q{j}"),
            Tree::Param(p) => write!(f, "{p}"),
            Tree::Func { name, deriv } => write!(f, "{name}{}(x)", "'".repeat(*deriv as usize)),
            Tree::Add(a, b) => write!(f, "({a} + {b})"),
            Tree::Sub(a, b) => write!(f, "({a} - {b})"),
            Tree::Mul(a, b) => write!(f, "({a}*{b})"),
            Tree::Div(a, b) => write!(f, "({a}/{b})"),
            Tree::Neg(a) => write!(f, "(-{a})"),
            Tree::Pow(a, e) => {
                write!(f, "({a})")?;
                write_exponent(f, e)
            }
            Tree::Ln(a) => write!(f, "ln({a})"),
            Tree::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

