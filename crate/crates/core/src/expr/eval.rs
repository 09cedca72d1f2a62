use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::atom::Atom;
use super::qfunction::{coeff_to_f64, exponent_to_f64};
use super::{EvalError, QFunction};

/// A point of the jet space: `x` and `(q0, …, qM)` with `q0 > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct JetPoint {
    pub x: f64,
    pub q: Vec<f64>,
}

impl JetPoint {
    pub fn new(x: f64, q: Vec<f64>) -> Result<Self, EvalError> {
        match q.first() {
            Some(q0) if *q0 > 0.0 => Ok(JetPoint { x, q }),
            _ => Err(EvalError::NonPositiveDensity),
        }
    }
}

/// Callable for an opaque function: `(derivative order, x) -> value`.
pub type OpaqueFn = Arc<dyn Fn(u32, f64) -> f64 + Send + Sync>;

/// Numeric values for opaque function symbols and parameters.
#[derive(Clone, Default)]
pub struct Bindings {
    funcs: HashMap<String, OpaqueFn>,
    params: HashMap<String, f64>,
}

impl fmt::Debug for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut names: Vec<_> = self.funcs.keys().collect();
        names.sort();
        f.debug_struct("Bindings")
            .field("funcs", &names)
            .field("params", &self.params)
            .finish()
    }
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fn(
        mut self,
        name: &str,
        f: impl Fn(u32, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.funcs.insert(name.to_string(), Arc::new(f));
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn set_param(&mut self, name: &str, value: f64) {
        self.params.insert(name.to_string(), value);
    }

    pub fn func(&self, name: &str) -> Option<&OpaqueFn> {
        self.funcs.get(name)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

/// How leaves of an expression map onto the slot vector of a compiled form.
///
/// Slot 0 is `x`, slots `1..=jets` hold `q0..q_{jets-1}`, then named
/// parameters, then (for free valuations) opaque function derivatives.
#[derive(Clone, Debug, Default)]
pub struct SlotLayout {
    pub jets: usize,
    pub params: Vec<String>,
    /// Opaque derivatives treated as free variables instead of bound calls.
    pub free_funcs: Vec<(String, u32)>,
}

impl SlotLayout {
    pub fn jets(jets: usize) -> Self {
        SlotLayout {
            jets,
            ..Default::default()
        }
    }

    pub fn with_params(mut self, params: &[&str]) -> Self {
        self.params = params.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn len(&self) -> usize {
        1 + self.jets + self.params.len() + self.free_funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn param_slot(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name).map(|i| 1 + self.jets + i)
    }
}

#[derive(Clone)]
enum Node {
    Slot(usize),
    Const(f64),
    Call(OpaqueFn, u32),
    Ln(Box<Compiled>),
    Exp(Box<Compiled>),
    Base(Box<Compiled>),
}

#[derive(Clone, Copy)]
enum Power {
    Int(i32),
    Real(f64),
}

/// Floating point form of a q-function for repeated evaluation.
#[derive(Clone)]
pub struct Compiled {
    terms: Vec<(f64, Vec<(Node, Power)>)>,
}

impl fmt::Debug for Compiled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Compiled({} terms)", self.terms.len())
    }
}

impl Compiled {
    pub fn new(
        expr: &QFunction,
        layout: &SlotLayout,
        bindings: &Bindings,
    ) -> Result<Self, EvalError> {
        let mut terms = Vec::with_capacity(expr.terms.len());
        for t in &expr.terms {
            let mut factors = Vec::new();
            for (a, e) in t.mono.factors() {
                let node = match a {
                    Atom::X => Node::Slot(0),
                    Atom::Q(j) => {
                        let j = *j as usize;
                        if j >= layout.jets {
                            return Err(EvalError::MissingJet(j));
                        }
                        Node::Slot(1 + j)
                    }
                    Atom::Param(p) => match layout.param_slot(p) {
                        Some(s) => Node::Slot(s),
                        None => match bindings.param(p) {
                            Some(v) => Node::Const(v),
                            None => return Err(EvalError::MissingBinding(p.to_string())),
                        },
                    },
                    Atom::Func { name, deriv } => {
                        let free = layout
                            .free_funcs
                            .iter()
                            .position(|(n, d)| n.as_str() == &**name && d == deriv);
                        match free {
                            Some(i) => Node::Slot(1 + layout.jets + layout.params.len() + i),
                            None => match bindings.func(name) {
                                Some(f) => Node::Call(f.clone(), *deriv),
                                None => return Err(EvalError::MissingBinding(name.to_string())),
                            },
                        }
                    }
                    Atom::Ln(inner) => Node::Ln(Box::new(Compiled::new(inner, layout, bindings)?)),
                    Atom::Exp(inner) => Node::Exp(Box::new(Compiled::new(inner, layout, bindings)?)),
                    Atom::Base(inner) => {
                        Node::Base(Box::new(Compiled::new(inner, layout, bindings)?))
                    }
                };
                let p = if e.is_integer() && e.numer().abs() < i32::MAX as i64 {
                    Power::Int(*e.numer() as i32)
                } else {
                    Power::Real(exponent_to_f64(e))
                };
                factors.push((node, p));
            }
            terms.push((coeff_to_f64(&t.coeff), factors));
        }
        Ok(Compiled { terms })
    }

    /// Value and the sum of absolute term values (a magnitude scale).
    pub fn eval_with_magnitude(&self, slots: &[f64]) -> Result<(f64, f64), EvalError> {
        let mut sum = 0.0;
        let mut mag = 0.0;
        for (c, factors) in &self.terms {
            let mut v = *c;
            for (node, p) in factors {
                let base = match node {
                    Node::Slot(s) => slots[*s],
                    Node::Const(c) => *c,
                    Node::Call(f, d) => f(*d, slots[0]),
                    Node::Ln(inner) => {
                        let a = inner.eval(slots)?;
                        if a <= 0.0 {
                            return Err(EvalError::Domain(format!("ln of {a}")));
                        }
                        a.ln()
                    }
                    Node::Exp(inner) => inner.eval(slots)?.exp(),
                    Node::Base(inner) => inner.eval(slots)?,
                };
                v *= match p {
                    Power::Int(n) => {
                        if *n < 0 && base == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        base.powi(*n)
                    }
                    Power::Real(r) => {
                        if base < 0.0 {
                            return Err(EvalError::Domain(format!("{base}^{r}")));
                        }
                        if *r < 0.0 && base == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        base.powf(*r)
                    }
                };
            }
            sum += v;
            mag += v.abs();
        }
        Ok((sum, mag))
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64, EvalError> {
        self.eval_with_magnitude(slots).map(|(v, _)| v)
    }
}

impl QFunction {
    /// Evaluate at a jet point with opaque symbols and parameters bound.
    pub fn evaluate(&self, p: &JetPoint, bindings: &Bindings) -> Result<f64, EvalError> {
        let layout = SlotLayout::jets(p.q.len());
        let c = Compiled::new(self, &layout, bindings)?;
        let mut slots = Vec::with_capacity(1 + p.q.len());
        slots.push(p.x);
        slots.extend_from_slice(&p.q);
        c.eval(&slots)
    }

    pub fn compile(&self, layout: &SlotLayout, bindings: &Bindings) -> Result<Compiled, EvalError> {
        Compiled::new(self, layout, bindings)
    }
}
