use std::cmp::Ordering;
use std::sync::Arc;

use num_rational::Ratio;
use smallvec::SmallVec;

use super::QFunction;

/// Exponent of an atom inside a monomial.
pub type Exponent = Ratio<i64>;

/// A variable that can be differentiated with respect to or substituted for.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Q(u32),
    Param(Arc<str>),
}

impl Var {
    pub fn param(name: &str) -> Self {
        Var::Param(Arc::from(name))
    }
}

impl std::fmt::Display for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Var::X => write!(f, "x"),
            Var::Q(j) => write!(f, "q{j}"),
            Var::Param(p) => write!(f, "{p}"),
        }
    }
}

/// Indivisible factor of a monomial.
///
/// Declaration order is the atom order used by the canonical form: jet
/// symbols compare greatest, so terms with higher derivatives print first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    X,
    Param(Arc<str>),
    /// Opaque univariate function of `x`, differentiated `deriv` times.
    Func { name: Arc<str>, deriv: u32 },
    Ln(Arc<QFunction>),
    Exp(Arc<QFunction>),
    /// Non-monomial base raised to a non-positive-integer power, kept
    /// normalized (leading coefficient one, no common monomial factor).
    Base(Arc<QFunction>),
    Q(u32),
}

impl Atom {
    pub(crate) fn is_transcendental(&self) -> bool {
        matches!(self, Atom::Ln(_) | Atom::Exp(_) | Atom::Base(_))
    }

    pub(crate) fn inner(&self) -> Option<&QFunction> {
        match self {
            Atom::Ln(e) | Atom::Exp(e) | Atom::Base(e) => Some(e),
            _ => None,
        }
    }

    pub(crate) fn depends_on(&self, v: &Var) -> bool {
        match (self, v) {
            (Atom::X, Var::X) => true,
            (Atom::Func { .. }, Var::X) => true,
            (Atom::Q(i), Var::Q(j)) => i == j,
            (Atom::Param(a), Var::Param(b)) => a == b,
            (Atom::Ln(e) | Atom::Exp(e) | Atom::Base(e), _) => e.depends_on(v),
            _ => false,
        }
    }
}

/// Product of atoms raised to nonzero rational exponents, sorted by atom.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Monomial(pub(crate) SmallVec<[(Atom, Exponent); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn atom(a: Atom, e: Exponent) -> Self {
        let mut m = SmallVec::new();
        if e != Exponent::from_integer(0) {
            m.push((a, e));
        }
        Monomial(m)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = &(Atom, Exponent)> {
        self.0.iter()
    }

    pub fn exponent_of(&self, a: &Atom) -> Exponent {
        match self.0.binary_search_by(|(b, _)| b.cmp(a)) {
            Ok(i) => self.0[i].1,
            Err(_) => Exponent::from_integer(0),
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != Exponent::from_integer(0) {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().cloned());
        Monomial(out)
    }

    pub fn pow(&self, e: Exponent) -> Monomial {
        if e == Exponent::from_integer(0) {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|(a, k)| (a.clone(), k * e)).collect())
    }

    pub fn inverse(&self) -> Monomial {
        self.pow(Exponent::from_integer(-1))
    }

    /// Drop one factor `a^e` and return the remaining monomial multiplied by `a^(e-1)`.
    pub(crate) fn lower(&self, idx: usize) -> Monomial {
        let mut out = self.0.clone();
        let one = Exponent::from_integer(1);
        if out[idx].1 == one {
            out.remove(idx);
        } else {
            out[idx].1 -= one;
        }
        Monomial(out)
    }

    pub fn has_transcendental(&self) -> bool {
        self.0.iter().any(|(a, _)| a.is_transcendental())
    }

    pub fn all_integer_exponents(&self) -> bool {
        self.0.iter().all(|(_, e)| e.is_integer())
    }

    pub fn is_polynomial(&self) -> bool {
        self.0
            .iter()
            .all(|(_, e)| e.is_integer() && *e > Exponent::from_integer(0))
    }

    /// Exponent-wise minimum with zero for missing atoms.
    pub(crate) fn gcd(&self, other: &Monomial) -> Monomial {
        let zero = Exponent::from_integer(0);
        let mut out = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    if a[i].1 < zero {
                        out.push(a[i].clone());
                    }
                    i += 1;
                }
                Ordering::Greater => {
                    if b[j].1 < zero {
                        out.push(b[j].clone());
                    }
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1.min(b[j].1);
                    if e != zero {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Monomial(out)
    }

    /// Exact quotient `self / other` when it has only nonnegative exponents.
    pub(crate) fn divides_into(&self, other: &Monomial) -> Option<Monomial> {
        let q = self.mul(&other.inverse());
        if q.0.iter().all(|(_, e)| *e > Exponent::from_integer(0)) {
            Some(q)
        } else {
            None
        }
    }

    /// Lexicographic order reading atoms from the greatest down; a larger
    /// exponent on a greater atom wins. Missing atoms count as exponent zero.
    pub fn lex_cmp(&self, other: &Monomial) -> Ordering {
        let zero = Exponent::from_integer(0);
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (a.len(), b.len());
        while i > 0 || j > 0 {
            let ord = match (i.checked_sub(1).map(|k| &a[k]), j.checked_sub(1).map(|k| &b[k])) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Greater,
                _ => Ordering::Less,
            };
            let c = match ord {
                Ordering::Greater => {
                    i -= 1;
                    a[i].1.cmp(&zero)
                }
                Ordering::Less => {
                    j -= 1;
                    zero.cmp(&b[j].1)
                }
                Ordering::Equal => {
                    i -= 1;
                    j -= 1;
                    a[i].1.cmp(&b[j].1)
                }
            };
            if c != Ordering::Equal {
                return c;
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lex_cmp(other)
    }
}
