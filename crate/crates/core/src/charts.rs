//! Change of representation `x̄ = γ(x)`: jet transport, pull-back of
//! q-functions and the transport laws of the operators.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::density::Domain;
use crate::expr::{Bindings, Compiled, ExprError, QFunction, SlotLayout, Var, ZeroMethod};
use crate::operators::{apply_b, apply_d, apply_l};
use crate::propriety::{boundary_divergence_expr, p_jet, ProprietyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("chart map must be an expression in x only")]
    NotPointMap,
    #[error("gamma' is not positive at x = {0}")]
    NotIncreasing(f64),
    #[error("gamma' could not be evaluated on the domain")]
    NoSamples,
    #[error("delta is not the inverse of gamma")]
    BadInverse,
    #[error("order {order} exceeds the coefficient table size {k}")]
    OrderTooLarge { order: u32, k: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Propriety(#[from] ProprietyError),
}

/// Default size of the coefficient table.
pub const DEFAULT_K: usize = 4;

/// An increasing chart `x̄ = γ(x)` with `α = 1/γ'` and `q̄_k = Σ_r a_kr q_r`.
#[derive(Clone, Debug)]
pub struct ChartMap {
    pub gamma: QFunction,
    pub delta: Option<QFunction>,
    pub alpha: QFunction,
    pub domain: Domain,
    /// `a[k][r]` for `0 ≤ r ≤ k ≤ K`.
    pub coeff: Vec<Vec<QFunction>>,
    /// Inverse table: `q_k = Σ_r inverse[k][r] q̄_r`, as functions of `x`.
    pub inverse: Vec<Vec<QFunction>>,
}

impl ChartMap {
    /// Chart on the real line, or on `(0, ∞)` when `γ'` fails to be
    /// positive on the whole line.
    pub fn new(gamma: QFunction, delta: Option<QFunction>) -> Result<Self, ChartError> {
        match Self::on(gamma.clone(), delta.clone(), Domain::real_line(), DEFAULT_K) {
            Err(ChartError::NotIncreasing(_)) | Err(ChartError::NoSamples) => {
                Self::on(gamma, delta, Domain::positive(), DEFAULT_K)
            }
            other => other,
        }
    }

    pub fn on(
        gamma: QFunction,
        delta: Option<QFunction>,
        domain: Domain,
        k: usize,
    ) -> Result<Self, ChartError> {
        if gamma.order().is_some() || !gamma.params().is_empty() {
            return Err(ChartError::NotPointMap);
        }
        domain.validate().map_err(|_| ChartError::NoSamples)?;
        let dgamma = gamma.partial(&Var::X);
        check_increasing(&dgamma, domain)?;
        if let Some(d) = &delta {
            if d.order().is_some() {
                return Err(ChartError::NotPointMap);
            }
            let mut map = HashMap::new();
            map.insert(Var::X, d.clone());
            let round_trip = &gamma.substitute(&map)? - &QFunction::x();
            if !round_trip.vanishes() {
                return Err(ChartError::BadInverse);
            }
        }
        let alpha = dgamma.recip()?;
        let coeff = coefficient_table(&alpha, k);
        let inverse = invert_lower(&coeff)?;
        Ok(ChartMap {
            gamma,
            delta,
            alpha,
            domain,
            coeff,
            inverse,
        })
    }

    pub fn identity() -> Self {
        Self::on(QFunction::x(), Some(QFunction::x()), Domain::real_line(), DEFAULT_K).expect("identity")
    }

    /// `γ = ln x` on `(0, ∞)`.
    pub fn log() -> Self {
        let gamma = QFunction::x().ln().expect("ln x");
        let delta = QFunction::x().exp();
        Self::on(gamma, Some(delta), Domain::positive(), DEFAULT_K).expect("log chart")
    }

    pub fn k(&self) -> usize {
        self.coeff.len() - 1
    }

    fn require(&self, order: Option<u32>) -> Result<(), ChartError> {
        match order {
            Some(o) if o as usize > self.k() => Err(ChartError::OrderTooLarge { order: o, k: self.k() }),
            _ => Ok(()),
        }
    }

    /// `q̄_k = Σ_r a_kr(x) q_r`.
    pub fn jet_transport(&self, k: usize) -> Result<QFunction, ChartError> {
        self.require(Some(k as u32))?;
        Ok(linear_form(&self.coeff[k], QFunction::q))
    }

    fn transport_map(&self, order: u32, p_order: Option<u32>) -> HashMap<Var, QFunction> {
        let mut map = HashMap::new();
        map.insert(Var::X, self.gamma.clone());
        for k in 0..=order as usize {
            map.insert(Var::Q(k as u32), linear_form(&self.coeff[k], QFunction::q));
        }
        if let Some(po) = p_order {
            for k in 0..=po as usize {
                if let Var::Param(name) = p_var(k as u32) {
                    map.insert(Var::Param(name), linear_form(&self.coeff[k], p_jet));
                }
            }
        }
        map
    }

    /// Rewrite `f̄(x̄, q̄)` in base variables: `x̄ → γ(x)`, `q̄_k → Σ a_kr q_r`.
    pub fn pull_back(&self, f_bar: &QFunction) -> Result<QFunction, ChartError> {
        self.require(f_bar.order())?;
        Ok(f_bar.substitute(&self.transport_map(f_bar.order().unwrap_or(0), None))?)
    }

    /// As [`pull_back`](Self::pull_back), also transporting the `p`-jet
    /// parameters `p0, p1, …`.
    pub fn pull_back_pair(&self, f_bar: &QFunction) -> Result<QFunction, ChartError> {
        let po = p_order(f_bar);
        self.require(f_bar.order().max(po))?;
        let map = self.transport_map(f_bar.order().unwrap_or(0), po);
        Ok(f_bar.substitute(&map)?)
    }

    /// Rewrite a base function in chart variables; needs `δ`.
    pub fn push_forward(&self, f: &QFunction) -> Result<Option<QFunction>, ChartError> {
        let Some(delta) = &self.delta else {
            return Ok(None);
        };
        self.require(f.order())?;
        let mut at_delta = HashMap::new();
        at_delta.insert(Var::X, delta.clone());
        let mut map = HashMap::new();
        map.insert(Var::X, delta.clone());
        for k in 0..=f.order().unwrap_or(0) as usize {
            let row: Vec<QFunction> = self.inverse[k]
                .iter()
                .map(|c| c.substitute(&at_delta))
                .collect::<Result<_, _>>()?;
            map.insert(Var::Q(k as u32), linear_form(&row, QFunction::q));
        }
        Ok(Some(f.substitute(&map)?))
    }

    /// `∂/∂q̄_m = Σ_r ā_rm ∂/∂q_r`, acting on base functions.
    fn bar_partial(&self, m: usize, f: &QFunction) -> QFunction {
        let mut out = QFunction::zero();
        for r in m..self.inverse.len() {
            out = &out + &(&self.inverse[r][m] * &f.partial(&Var::Q(r as u32)));
        }
        out
    }

    /// `D̄ = αD`, acting on base functions.
    fn bar_d(&self, f: &QFunction) -> QFunction {
        &self.alpha * &apply_d(f)
    }

    /// `B̄_r`, acting on base functions through [`bar_partial`] and `D̄`.
    fn bar_b(&self, r: usize, f: &QFunction) -> QFunction {
        let top = self.k();
        let mut acc = QFunction::zero();
        for k in (r + 1..=top).rev() {
            acc = &self.bar_partial(k, f) - &self.bar_d(&acc);
        }
        acc
    }

    /// Checks `D̄ = αD`, `L̄ = L` and `Σ p_r B_r = Σ p̄_k B̄_k α∘` on `f̄`.
    pub fn verify_operator_transport(&self, f_bar: &QFunction) -> Result<TransportReport, ChartError> {
        let m = f_bar.order().unwrap_or(0);
        self.require(Some(m + 1))?;
        let f = self.pull_back(f_bar)?;
        let mut checks = Vec::new();

        let lhs = self.pull_back(&apply_d(f_bar))?;
        let rhs = &self.alpha * &apply_d(&f);
        checks.push(TransportCheck::new("D̄ = αD", &(&lhs - &rhs))?);

        let lf = apply_l(f_bar);
        if lf.order().is_none_or(|o| o as usize <= self.k()) {
            let lhs = self.pull_back(&lf)?;
            checks.push(TransportCheck::new("L̄ = L", &(&lhs - &apply_l(&f)))?);
        }

        let q0 = QFunction::q(0);
        let lhs = &self.pull_back(&(&q0.recip()? * &apply_d(f_bar)))?;
        let rhs = &q0.recip()? * &apply_d(&f);
        checks.push(TransportCheck::new("q̄0⁻¹D̄ = q0⁻¹D", &(lhs - &rhs))?);

        let af = &self.alpha * &f;
        let mut lhs = QFunction::zero();
        for r in 0..m as usize {
            lhs = &lhs + &(&p_jet(r as u32) * &apply_b(r as i64, &f));
        }
        let mut rhs = QFunction::zero();
        for k in 0..self.k() {
            let pbar = linear_form(&self.coeff[k], p_jet);
            rhs = &rhs + &(&pbar * &self.bar_b(k, &af));
        }
        checks.push(TransportCheck::new("Σ p_r B_r = Σ p̄_k B̄_k α∘", &(&lhs - &rhs))?);

        let all_passed = checks.iter().all(|c| c.passed);
        Ok(TransportReport { checks, all_passed })
    }

    /// `d_b` of `φ̄` in chart variables, rewritten in base variables.
    pub fn transport_boundary_condition(&self, phi_bar: &QFunction) -> Result<QFunction, ChartError> {
        let db = boundary_divergence_expr(phi_bar)?;
        self.pull_back_pair(&db)
    }
}

fn p_var(j: u32) -> Var {
    Var::Param(format!("p{j}").as_str().into())
}

fn p_order(f: &QFunction) -> Option<u32> {
    f.params()
        .iter()
        .filter_map(|n| n.strip_prefix('p').and_then(|d| d.parse::<u32>().ok()))
        .max()
}

fn linear_form(row: &[QFunction], var: impl Fn(u32) -> QFunction) -> QFunction {
    let mut out = QFunction::zero();
    for (r, c) in row.iter().enumerate() {
        out = &out + &(c * &var(r as u32));
    }
    out
}

/// `a_00 = α`, `a_{k+1,r} = α (a'_kr + a_{k,r-1})`.
pub fn coefficient_table(alpha: &QFunction, k: usize) -> Vec<Vec<QFunction>> {
    let mut table = vec![vec![alpha.clone()]];
    for n in 0..k {
        let prev = &table[n];
        let row: Vec<QFunction> = (0..=n + 1)
            .map(|r| {
                let d = prev.get(r).map(|a| a.partial(&Var::X)).unwrap_or_else(QFunction::zero);
                let left = if r > 0 { prev[r - 1].clone() } else { QFunction::zero() };
                alpha * &(&d + &left)
            })
            .collect();
        table.push(row);
    }
    table
}

/// Inverse of a lower-triangular table by forward substitution.
fn invert_lower(a: &[Vec<QFunction>]) -> Result<Vec<Vec<QFunction>>, ExprError> {
    let n = a.len();
    let mut inv: Vec<Vec<QFunction>> = Vec::with_capacity(n);
    for k in 0..n {
        let diag = a[k][k].recip()?;
        let mut row = vec![QFunction::zero(); k + 1];
        row[k] = diag.clone();
        for r in 0..k {
            let mut s = QFunction::zero();
            for j in r..k {
                s = &s + &(&a[k][j] * &inv[j][r]);
            }
            row[r] = -(&diag * &s);
        }
        inv.push(row);
    }
    Ok(inv)
}

fn sample_points(domain: Domain) -> Vec<f64> {
    let Domain(a, b) = domain;
    (0..50)
        .map(|i| {
            let t = (i as f64 + 0.5) / 50.0;
            match (a.is_finite(), b.is_finite()) {
                (true, true) => a + (b - a) * t,
                (true, false) => a + 10f64.powf(6.0 * t - 3.0),
                (false, true) => b - 10f64.powf(6.0 * t - 3.0),
                (false, false) => 10.0 * (2.0 * t - 1.0),
            }
        })
        .collect()
}

fn check_increasing(dgamma: &QFunction, domain: Domain) -> Result<(), ChartError> {
    let c = Compiled::new(dgamma, &SlotLayout::jets(0), &Bindings::new()).map_err(|_| ChartError::NoSamples)?;
    let mut ok = 0;
    for x in sample_points(domain) {
        match c.eval(&[x]) {
            Ok(v) if v > 0.0 => ok += 1,
            Ok(v) if v.is_finite() => return Err(ChartError::NotIncreasing(x)),
            _ => {}
        }
    }
    if ok == 0 {
        Err(ChartError::NoSamples)
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportCheck {
    pub name: String,
    pub passed: bool,
    pub method: ZeroMethod,
}

impl TransportCheck {
    fn new(name: &str, residual: &QFunction) -> Result<Self, ChartError> {
        let z = residual.is_zero()?;
        Ok(TransportCheck {
            name: name.to_string(),
            passed: z.is_zero,
            method: z.method,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportReport {
    pub checks: Vec<TransportCheck>,
    pub all_passed: bool,
}
