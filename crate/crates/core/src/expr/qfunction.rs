use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::atom::{Atom, Exponent, Monomial, Var};
use super::ExprError;

/// One coefficient-monomial pair of the canonical sum.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub coeff: BigRational,
    pub mono: Monomial,
}

/// A q-function in canonical sum-of-terms form.
///
/// Every value of this type is canonical: terms carry nonzero rational
/// coefficients, distinct monomials, and are sorted in decreasing monomial
/// order. Monomials are Laurent in `x`, the jet symbols `q_j`, parameters and
/// opaque function derivatives, so sums over monomial denominators combine
/// exactly. Logarithms, exponentials and non-monomial bases stay as atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QFunction {
    pub(crate) terms: Vec<Term>,
}

pub(crate) fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl QFunction {
    pub fn zero() -> Self {
        QFunction { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_term(c, Monomial::one())
    }

    pub fn integer(n: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::constant(rat(n, d))
    }

    pub fn x() -> Self {
        Self::from_atom(Atom::X)
    }

    pub fn q(j: u32) -> Self {
        Self::from_atom(Atom::Q(j))
    }

    pub fn param(name: &str) -> Self {
        Self::from_atom(Atom::Param(Arc::from(name)))
    }

    pub fn func(name: &str, deriv: u32) -> Self {
        Self::from_atom(Atom::Func {
            name: Arc::from(name),
            deriv,
        })
    }

    pub fn var(v: &Var) -> Self {
        match v {
            Var::X => Self::x(),
            Var::Q(j) => Self::q(*j),
            Var::Param(p) => Self::from_atom(Atom::Param(p.clone())),
        }
    }

    pub(crate) fn from_atom(a: Atom) -> Self {
        Self::from_term(BigRational::one(), Monomial::atom(a, Exponent::from_integer(1)))
    }

    pub(crate) fn from_atom_power(a: Atom, e: Exponent) -> Self {
        Self::from_term(BigRational::one(), Monomial::atom(a, e))
    }

    pub(crate) fn from_term(coeff: BigRational, mono: Monomial) -> Self {
        if coeff.is_zero() {
            return Self::zero();
        }
        let mut out = QFunction {
            terms: vec![Term { coeff, mono }],
        };
        out.expand_positive_bases();
        out
    }

    /// Build from unsorted, possibly repeated terms.
    pub(crate) fn from_terms(terms: impl IntoIterator<Item = Term>) -> Self {
        let mut acc: HashMap<Monomial, BigRational> = HashMap::new();
        for t in terms {
            if t.coeff.is_zero() {
                continue;
            }
            *acc.entry(t.mono).or_insert_with(BigRational::zero) += t.coeff;
        }
        let mut terms: Vec<Term> = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(mono, coeff)| Term { coeff, mono })
            .collect();
        terms.sort_by(|a, b| b.mono.cmp(&a.mono));
        let mut out = QFunction { terms };
        out.expand_positive_bases();
        out
    }

    /// Base atoms only carry non-positive-integer exponents; multiply out any
    /// positive integer power produced by a product.
    fn expand_positive_bases(&mut self) {
        let needs = self.terms.iter().any(|t| {
            t.mono
                .factors()
                .any(|(a, e)| matches!(a, Atom::Base(_)) && e.is_integer() && *e > Exponent::zero())
        });
        if !needs {
            return;
        }
        let mut acc = QFunction::zero();
        for t in std::mem::take(&mut self.terms) {
            let mut rest = Monomial::one();
            let mut factor = QFunction::constant(t.coeff.clone());
            for (a, e) in t.mono.factors() {
                match a {
                    Atom::Base(b) if e.is_integer() && *e > Exponent::zero() => {
                        factor = &factor * &b.powi(e.to_integer());
                    }
                    _ => rest = rest.mul(&Monomial::atom(a.clone(), *e)),
                }
            }
            acc = &acc + &factor.mul_monomial(&BigRational::one(), &rest);
        }
        *self = acc;
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_literal_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Rational value if the expression is a constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.as_slice() {
            [] => Some(BigRational::zero()),
            [t] if t.mono.is_one() => Some(t.coeff.clone()),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn is_single_term(&self) -> bool {
        self.terms.len() == 1
    }

    /// Highest jet index occurring anywhere, `None` for q-free expressions.
    pub fn order(&self) -> Option<u32> {
        let mut best: Option<u32> = None;
        for t in &self.terms {
            for (a, _) in t.mono.factors() {
                let o = match a {
                    Atom::Q(j) => Some(*j),
                    _ => a.inner().and_then(|e| e.order()),
                };
                best = best.max(o);
            }
        }
        best
    }

    pub fn depends_on(&self, v: &Var) -> bool {
        self.terms
            .iter()
            .any(|t| t.mono.factors().any(|(a, _)| a.depends_on(v)))
    }

    pub fn has_transcendental(&self) -> bool {
        self.terms.iter().any(|t| t.mono.has_transcendental())
    }

    /// Names of opaque function symbols with the highest derivative used.
    pub fn opaque_symbols(&self) -> Vec<(Arc<str>, u32)> {
        let mut out: HashMap<Arc<str>, u32> = HashMap::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Func { name, deriv } = a {
                let e = out.entry(name.clone()).or_insert(0);
                *e = (*e).max(*deriv);
            }
        });
        let mut v: Vec<_> = out.into_iter().collect();
        v.sort();
        v
    }

    /// Parameter names occurring in the expression.
    pub fn params(&self) -> Vec<Arc<str>> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Param(p) = a {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        });
        out.sort();
        out
    }

    pub(crate) fn visit_atoms(&self, f: &mut dyn FnMut(&Atom)) {
        for t in &self.terms {
            for (a, _) in t.mono.factors() {
                f(a);
                if let Some(inner) = a.inner() {
                    inner.visit_atoms(f);
                }
            }
        }
    }

    pub(crate) fn mul_monomial(&self, c: &BigRational, m: &Monomial) -> QFunction {
        if c.is_zero() {
            return QFunction::zero();
        }
        QFunction::from_terms(self.terms.iter().map(|t| Term {
            coeff: &t.coeff * c,
            mono: t.mono.mul(m),
        }))
    }

    pub fn scale(&self, c: &BigRational) -> QFunction {
        if c.is_zero() {
            return QFunction::zero();
        }
        QFunction {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: &t.coeff * c,
                    mono: t.mono.clone(),
                })
                .collect(),
        }
    }

    fn merge(&self, other: &QFunction, sign: bool) -> QFunction {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (a, b) = (&self.terms, &other.terms);
        let (mut i, mut j) = (0, 0);
        let neg = |t: &Term| Term {
            coeff: if sign { t.coeff.clone() } else { -t.coeff.clone() },
            mono: t.mono.clone(),
        };
        while i < a.len() && j < b.len() {
            match a[i].mono.cmp(&b[j].mono) {
                std::cmp::Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Less => {
                    out.push(neg(&b[j]));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = if sign {
                        &a[i].coeff + &b[j].coeff
                    } else {
                        &a[i].coeff - &b[j].coeff
                    };
                    if !c.is_zero() {
                        out.push(Term {
                            coeff: c,
                            mono: a[i].mono.clone(),
                        });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().map(neg));
        QFunction { terms: out }
    }

    pub fn powi(&self, n: i64) -> QFunction {
        if n == 0 {
            return QFunction::one();
        }
        if n > 0 {
            let mut base = self.clone();
            let mut acc = QFunction::one();
            let mut k = n as u64;
            while k > 0 {
                if k & 1 == 1 {
                    acc = &acc * &base;
                }
                k >>= 1;
                if k > 0 {
                    base = &base * &base;
                }
            }
            return acc;
        }
        self.pow(Exponent::from_integer(n))
            .expect("negative power of a nonzero expression")
    }

    /// Rational power. Non-integer powers follow the principal branch and
    /// assume a positive base, as jet densities `q0` are.
    pub fn pow(&self, e: Exponent) -> Result<QFunction, ExprError> {
        if e.is_integer() && e >= Exponent::zero() {
            return Ok(self.powi(e.to_integer()));
        }
        if self.is_literal_zero() {
            return Err(ExprError::DivisionByZero);
        }
        if let [t] = self.terms.as_slice() {
            let (c, extra) = rational_power(&t.coeff, e)?;
            return Ok(QFunction::from_term(c, t.mono.pow(e).mul(&extra)));
        }
        // Normalize the base: S = c * g * S' with S' monic and content free.
        let g = self
            .terms
            .iter()
            .skip(1)
            .fold(self.terms[0].mono.clone(), |acc, t| acc.gcd(&t.mono));
        let lead = self.terms[0].coeff.clone();
        let inv = BigRational::one() / &lead;
        let normalized = self.mul_monomial(&inv, &g.inverse());
        let (c, extra) = rational_power(&lead, e)?;
        let mono = g
            .pow(e)
            .mul(&extra)
            .mul(&Monomial::atom(Atom::Base(Arc::new(normalized)), e));
        Ok(QFunction::from_term(c, mono))
    }

    pub fn recip(&self) -> Result<QFunction, ExprError> {
        self.pow(Exponent::from_integer(-1))
    }

    /// Division; exact polynomial quotients are recognized, otherwise the
    /// divisor becomes a base atom with exponent -1.
    pub fn try_div(&self, den: &QFunction) -> Result<QFunction, ExprError> {
        if den.is_literal_zero() {
            return Err(ExprError::DivisionByZero);
        }
        if den.terms.len() > 1 {
            if let Some(q) = exact_quotient(self, den) {
                return Ok(q);
            }
        }
        Ok(self * &den.recip()?)
    }

    pub fn ln(&self) -> Result<QFunction, ExprError> {
        if let Some(c) = self.as_constant() {
            if !c.is_positive() {
                return Err(ExprError::Domain(format!("ln of nonpositive constant {c}")));
            }
            if c.is_one() {
                return Ok(QFunction::zero());
            }
        }
        if let [t] = self.terms.as_slice() {
            if t.coeff.is_one() {
                if let [(Atom::Exp(inner), e)] = t.mono.0.as_slice() {
                    if *e == Exponent::one() {
                        return Ok((**inner).clone());
                    }
                }
            }
        }
        Ok(QFunction::from_atom(Atom::Ln(Arc::new(self.clone()))))
    }

    pub fn exp(&self) -> QFunction {
        if self.is_literal_zero() {
            return QFunction::one();
        }
        if let [t] = self.terms.as_slice() {
            if t.coeff.is_one() {
                if let [(Atom::Ln(inner), e)] = t.mono.0.as_slice() {
                    if *e == Exponent::one() {
                        return (**inner).clone();
                    }
                }
            }
        }
        QFunction::from_atom(Atom::Exp(Arc::new(self.clone())))
    }

    /// Exact partial derivative.
    pub fn partial(&self, v: &Var) -> QFunction {
        let mut out: Vec<Term> = Vec::new();
        let mut nested = QFunction::zero();
        for t in &self.terms {
            for (idx, (a, e)) in t.mono.factors().enumerate() {
                let coeff = &t.coeff * BigRational::new(BigInt::from(*e.numer()), BigInt::from(*e.denom()));
                let simple = match (a, v) {
                    (Atom::X, Var::X) => true,
                    (Atom::Q(i), Var::Q(j)) => i == j,
                    (Atom::Param(p), Var::Param(q)) => p == q,
                    _ => false,
                };
                if simple {
                    out.push(Term {
                        coeff,
                        mono: t.mono.lower(idx),
                    });
                    continue;
                }
                if !a.depends_on(v) {
                    continue;
                }
                let lowered = t.mono.lower(idx);
                match a {
                    Atom::Func { name, deriv } => {
                        let next = Monomial::atom(
                            Atom::Func {
                                name: name.clone(),
                                deriv: deriv + 1,
                            },
                            Exponent::one(),
                        );
                        out.push(Term {
                            coeff,
                            mono: lowered.mul(&next),
                        });
                    }
                    Atom::Ln(inner) => {
                        let d = inner.partial(v);
                        let quotient = d
                            .try_div(inner)
                            .expect("logarithm argument is nonzero");
                        nested = &nested + &quotient.mul_monomial(&coeff, &lowered);
                    }
                    Atom::Exp(inner) => {
                        let d = inner.partial(v);
                        let m = lowered.mul(&Monomial::atom(a.clone(), Exponent::one()));
                        nested = &nested + &d.mul_monomial(&coeff, &m);
                    }
                    Atom::Base(inner) => {
                        let d = inner.partial(v);
                        nested = &nested + &d.mul_monomial(&coeff, &lowered);
                    }
                    _ => {}
                }
            }
        }
        &QFunction::from_terms(out) + &nested
    }

    /// Replace variables; opaque functions may not be composed with a
    /// substituted `x`.
    pub fn substitute(&self, map: &HashMap<Var, QFunction>) -> Result<QFunction, ExprError> {
        let mut acc = QFunction::zero();
        let mut cache: HashMap<Atom, QFunction> = HashMap::new();
        for t in &self.terms {
            let mut prod = QFunction::constant(t.coeff.clone());
            for (a, e) in t.mono.factors() {
                let base = match cache.get(a) {
                    Some(b) => b.clone(),
                    None => {
                        let b = substitute_atom(a, map)?;
                        cache.insert(a.clone(), b.clone());
                        b
                    }
                };
                prod = &prod * &base.pow(*e)?;
            }
            acc = &acc + &prod;
        }
        Ok(acc)
    }
}

fn substitute_atom(a: &Atom, map: &HashMap<Var, QFunction>) -> Result<QFunction, ExprError> {
    let var = match a {
        Atom::X => Some(Var::X),
        Atom::Q(j) => Some(Var::Q(*j)),
        Atom::Param(p) => Some(Var::Param(p.clone())),
        _ => None,
    };
    if let Some(v) = var {
        return Ok(map.get(&v).cloned().unwrap_or_else(|| QFunction::var(&v)));
    }
    match a {
        Atom::Func { name, .. } => {
            if map.contains_key(&Var::X) {
                Err(ExprError::OpaqueComposition(name.to_string()))
            } else {
                Ok(QFunction::from_atom(a.clone()))
            }
        }
        Atom::Ln(inner) => inner.substitute(map)?.ln(),
        Atom::Exp(inner) => Ok(inner.substitute(map)?.exp()),
        Atom::Base(inner) => Ok(inner.substitute(map)?),
        _ => unreachable!(),
    }
}

/// `c^e` split into a rational part and a monomial of irrational leftovers.
fn rational_power(c: &BigRational, e: Exponent) -> Result<(BigRational, Monomial), ExprError> {
    if c.is_zero() {
        return Err(ExprError::DivisionByZero);
    }
    if e.is_integer() {
        let n = e.to_integer();
        let p = num_traits::pow::Pow::pow(c, n.unsigned_abs() as u32);
        let p = if n < 0 { BigRational::one() / p } else { p };
        return Ok((p, Monomial::one()));
    }
    let root = *e.denom() as u32;
    if c.is_positive() {
        if let (Some(n), Some(d)) = (int_root(c.numer(), root), int_root(c.denom(), root)) {
            let base = BigRational::new(n, d);
            return rational_power(&base, Exponent::from_integer(*e.numer()));
        }
        let atom = Atom::Base(Arc::new(QFunction::constant(c.clone())));
        return Ok((BigRational::one(), Monomial::atom(atom, e)));
    }
    Err(ExprError::Domain(format!("non-integer power of negative constant {c}")))
}

fn int_root(n: &BigInt, k: u32) -> Option<BigInt> {
    let r = n.nth_root(k);
    if num_traits::pow::Pow::pow(&r, k) == *n {
        Some(r)
    } else {
        None
    }
}

/// Multivariate division over the atom order; `None` unless exact.
fn exact_quotient(num: &QFunction, den: &QFunction) -> Option<QFunction> {
    let ints = |f: &QFunction| f.terms.iter().all(|t| t.mono.all_integer_exponents());
    if !ints(num) || !ints(den) || num.is_literal_zero() {
        return None;
    }
    let clear = |f: &QFunction| {
        f.terms
            .iter()
            .fold(Monomial::one(), |acc, t| acc.gcd(&t.mono))
            .inverse()
    };
    let (cn, cd) = (clear(num), clear(den));
    let a = num.mul_monomial(&BigRational::one(), &cn);
    let b = den.mul_monomial(&BigRational::one(), &cd);
    let lead = b.terms[0].clone();
    let mut rem = a;
    let mut quot: Vec<Term> = Vec::new();
    let mut steps = 0usize;
    while let Some(lt) = rem.terms.first().cloned() {
        steps += 1;
        if steps > 10_000 {
            return None;
        }
        let m = lt.mono.divides_into(&lead.mono).or_else(|| {
            (lt.mono == lead.mono).then(Monomial::one)
        })?;
        let c = &lt.coeff / &lead.coeff;
        rem = &rem - &b.mul_monomial(&c, &m);
        quot.push(Term { coeff: c, mono: m });
    }
    let q = QFunction::from_terms(quot);
    Some(q.mul_monomial(&BigRational::one(), &cd.mul(&cn.inverse())))
}

impl Add for &QFunction {
    type Output = QFunction;
    fn add(self, rhs: &QFunction) -> QFunction {
        self.merge(rhs, true)
    }
}

impl Sub for &QFunction {
    type Output = QFunction;
    fn sub(self, rhs: &QFunction) -> QFunction {
        self.merge(rhs, false)
    }
}

impl Mul for &QFunction {
    type Output = QFunction;
    fn mul(self, rhs: &QFunction) -> QFunction {
        if self.is_literal_zero() || rhs.is_literal_zero() {
            return QFunction::zero();
        }
        if let Some(c) = self.as_constant() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.as_constant() {
            return self.scale(&c);
        }
        let mut prods = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                prods.push(Term {
                    coeff: &a.coeff * &b.coeff,
                    mono: a.mono.mul(&b.mono),
                });
            }
        }
        QFunction::from_terms(prods)
    }
}

impl Neg for &QFunction {
    type Output = QFunction;
    fn neg(self) -> QFunction {
        self.scale(&-BigRational::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for QFunction {
            type Output = QFunction;
            fn $m(self, rhs: QFunction) -> QFunction {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&QFunction> for QFunction {
            type Output = QFunction;
            fn $m(self, rhs: &QFunction) -> QFunction {
                (&self).$m(rhs)
            }
        }
        impl $tr<QFunction> for &QFunction {
            type Output = QFunction;
            fn $m(self, rhs: QFunction) -> QFunction {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for QFunction {
    type Output = QFunction;
    fn neg(self) -> QFunction {
        -&self
    }
}

/// Integer part of an exponent for printing and evaluation.
pub(crate) fn exponent_to_f64(e: &Exponent) -> f64 {
    *e.numer() as f64 / *e.denom() as f64
}

pub(crate) fn coeff_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        let n = c.numer().to_f64().unwrap_or(f64::NAN);
        let d = c.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}
