use std::fmt;

use num_traits::{One, Signed};

use super::atom::{Atom, Exponent};
use super::tree::write_exponent;
use super::QFunction;

fn write_atom(f: &mut fmt::Formatter<'_>, a: &Atom, e: &Exponent) -> fmt::Result {
    let needs_parens = match a {
        Atom::Base(inner) => !(inner.is_constant() && inner.as_constant().unwrap().is_integer()),
        _ => false,
    };
    match a {
        Atom::X => write!(f, "x")?,
        Atom::Q(j) => write!(f, "q{j}")?,
        Atom::Param(p) => write!(f, "{p}")?,
        Atom::Func { name, deriv } => write!(f, "{name}{}(x)", "'".repeat(*deriv as usize))?,
        Atom::Ln(inner) => write!(f, "ln({inner})")?,
        Atom::Exp(inner) => write!(f, "exp({inner})")?,
        Atom::Base(inner) if needs_parens => write!(f, "({inner})")?,
        Atom::Base(inner) => write!(f, "{inner}")?,
    }
    if !e.is_one() {
        write_exponent(f, e)?;
    }
    Ok(())
}

impl fmt::Display for QFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let c = t.coeff.abs();
            let num: Vec<_> = t.mono.factors().filter(|(_, e)| *e > Exponent::from_integer(0)).collect();
            let den: Vec<_> = t.mono.factors().filter(|(_, e)| *e < Exponent::from_integer(0)).collect();
            let mut wrote = false;
            if !c.is_one() || num.is_empty() {
                if c.is_integer() {
                    write!(f, "{c}")?;
                } else {
                    write!(f, "({c})")?;
                }
                wrote = true;
            }
            for (a, e) in num.iter().rev() {
                if wrote {
                    write!(f, "*")?;
                }
                write_atom(f, a, e)?;
                wrote = true;
            }
            if !den.is_empty() {
                write!(f, "/")?;
                if den.len() > 1 {
                    write!(f, "(")?;
                }
                for (k, (a, e)) in den.iter().rev().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    write_atom(f, a, &-*e)?;
                }
                if den.len() > 1 {
                    write!(f, ")")?;
                }
            }
        }
        Ok(())
    }
}
