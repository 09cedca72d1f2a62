//! Propriety diagnostics: concavity of generators and the decomposition of
//! divergence, expected score and entropy into integral and boundary parts.
//!
//! Every integrand here is homogeneous in the jets, so it is evaluated in
//! ratio form: `q_k / q0` comes from the log-density recursion and the
//! density value enters as a single factor. Tails therefore never produce
//! `0/0`.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::density::{Density, DensityError, DensitySpec, Domain};
use crate::expr::{
    Bindings, Compiled, EvalError, Exponent, ExprError, QFunction, SlotLayout, Var,
};
use crate::operators::{apply_b, apply_c, apply_d, apply_lambda, homogeneity_degree, is_homogeneous};
use crate::quadrature::{integrate, QuadConfig, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProprietyError {
    #[error("generator must be 1-homogeneous")]
    NotOneHomogeneous,
    #[error("evaluation failed at every sample point")]
    AllSamplesSingular,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// A q-function compiled for evaluation at `(x, r0, r1, …)`.
struct JetFn {
    c: Compiled,
    jets: usize,
}

impl JetFn {
    fn new(f: &QFunction, jets: usize, bindings: &Bindings) -> Result<Self, ProprietyError> {
        Ok(JetFn {
            c: Compiled::new(f, &SlotLayout::jets(jets), bindings)?,
            jets,
        })
    }

    fn eval(&self, x: f64, r: &[f64]) -> Result<f64, EvalError> {
        let mut slots = Vec::with_capacity(1 + self.jets);
        slots.push(x);
        slots.extend((0..self.jets).map(|j| r.get(j).copied().unwrap_or(0.0)));
        self.c.eval(&slots)
    }
}

fn jets_of(fs: &[&QFunction]) -> usize {
    fs.iter().filter_map(|f| f.order()).max().map_or(1, |m| m as usize + 1)
}

fn require_one_homogeneous(phi: &QFunction) -> Result<(), ProprietyError> {
    if is_homogeneous(phi, Exponent::from_integer(1)) {
        Ok(())
    } else {
        Err(ProprietyError::NotOneHomogeneous)
    }
}

/// `Σ_k a_k f_k(b) - f(a)` pieces for a 1-homogeneous `f`: the partials
/// `f_[k]` and `f` itself, compiled.
struct BregmanParts {
    partials: Vec<JetFn>,
    whole: JetFn,
}

impl BregmanParts {
    fn new(f: &QFunction, bindings: &Bindings) -> Result<Self, ProprietyError> {
        let m = f.order().map_or(0, |m| m as usize);
        let parts: Vec<QFunction> = (0..=m).map(|k| f.partial(&Var::Q(k as u32))).collect();
        let mut all: Vec<&QFunction> = parts.iter().collect();
        all.push(f);
        let jets = jets_of(&all);
        Ok(BregmanParts {
            partials: parts
                .iter()
                .map(|g| JetFn::new(g, jets, bindings))
                .collect::<Result<_, _>>()?,
            whole: JetFn::new(f, jets, bindings)?,
        })
    }

    fn jets(&self) -> usize {
        self.whole.jets
    }

    /// `Σ_k rp_k f_[k](rq)`.
    fn linear(&self, x: f64, rp: &[f64], rq: &[f64]) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (k, g) in self.partials.iter().enumerate() {
            acc += rp[k] * g.eval(x, rq)?;
        }
        Ok(acc)
    }

    /// `Σ_k rp_k f_[k](rq) - f(rp)`, the Bregman gap in ratio form.
    fn gap(&self, x: f64, rp: &[f64], rq: &[f64]) -> Result<f64, EvalError> {
        Ok(self.linear(x, rp, rq)? - self.whole.eval(x, rp)?)
    }
}

/// Value of an integral with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
}

fn quad_config() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-8,
        ..QuadConfig::default()
    }
}

/// Integrate `p(x) g(x)` over the effective support of `p`.
fn integrate_weighted<F>(p: &Density, mut g: F) -> Result<Integral, ProprietyError>
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    let (lo, hi) = p.support();
    let r = integrate(
        |x| {
            let w = p.p(x).map_err(|e| e.to_string())?;
            if w == 0.0 {
                return Ok(0.0);
            }
            g(x).map(|v| w * v).map_err(|e| e.to_string())
        },
        lo,
        hi,
        &quad_config(),
    )?;
    Ok(Integral {
        value: r.value,
        abs_err: r.abs_err,
    })
}

fn prepare_pair(
    p: &DensitySpec,
    q: &DensitySpec,
    jets: usize,
) -> Result<(Density, Density), ProprietyError> {
    Ok((p.prepare(jets - 1)?, q.prepare(jets - 1)?))
}

/// `d0(P, Q) = ∫ [φ(q) + Σ_k (p_k - q_k) φ_[k](q) - φ(p)] dx`.
pub fn integral_divergence(
    phi: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<Integral, ProprietyError> {
    require_one_homogeneous(phi)?;
    let parts = BregmanParts::new(phi, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, parts.jets())?;
    integral_divergence_prepared(&parts, &dp, &dq)
}

fn integral_divergence_prepared(
    parts: &BregmanParts,
    dp: &Density,
    dq: &Density,
) -> Result<Integral, ProprietyError> {
    integrate_weighted(dp, |x| {
        let rp = dp.ratios(x)?;
        let rq = dq.ratios(x)?;
        parts.gap(x, &rp, &rq)
    })
}

/// Symbolic `d_b = Σ_r p_r B_r{φ(q) - φ(p)}` with the `p`-jet written as
/// parameters `p0, p1, …`.
pub fn boundary_divergence_expr(phi: &QFunction) -> Result<QFunction, ProprietyError> {
    let m = phi.order().unwrap_or(0);
    let mut out = QFunction::zero();
    for r in 0..m {
        let b = apply_b(r as i64, phi);
        let at_p = to_p_jets(&b)?;
        out = &out + &(&p_jet(r) * &(&b - &at_p));
    }
    Ok(out)
}

/// The parameter standing for `p_j`.
pub fn p_jet(j: u32) -> QFunction {
    QFunction::param(&format!("p{j}"))
}

/// Substitute `q_j → p_j` throughout.
pub fn to_p_jets(f: &QFunction) -> Result<QFunction, ProprietyError> {
    let m = f.order().unwrap_or(0);
    let map: HashMap<Var, QFunction> = (0..=m).map(|j| (Var::Q(j), p_jet(j))).collect();
    Ok(f.substitute(&map)?)
}

/// Compiled `B_r φ` for `r = 0..order-1`.
struct BoundaryParts {
    b: Vec<JetFn>,
}

impl BoundaryParts {
    fn new(phi: &QFunction, bindings: &Bindings) -> Result<Self, ProprietyError> {
        let m = phi.order().unwrap_or(0);
        let exprs: Vec<QFunction> = (0..m).map(|r| apply_b(r as i64, phi)).collect();
        let jets = jets_of(&exprs.iter().collect::<Vec<_>>()).max(m as usize + 1);
        Ok(BoundaryParts {
            b: exprs
                .iter()
                .map(|e| JetFn::new(e, jets, bindings))
                .collect::<Result<_, _>>()?,
        })
    }

    fn jets(&self) -> usize {
        self.b.first().map_or(1, |f| f.jets)
    }

    /// `Σ_r rp_r B_rφ(ra)`.
    fn apply(&self, x: f64, rp: &[f64], ra: &[f64]) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (r, f) in self.b.iter().enumerate() {
            acc += rp[r] * f.eval(x, ra)?;
        }
        Ok(acc)
    }

    /// `d_b / p0`.
    fn divergence_ratio(&self, x: f64, rp: &[f64], rq: &[f64]) -> Result<f64, EvalError> {
        Ok(self.apply(x, rp, rq)? - self.apply(x, rp, rp)?)
    }
}

/// `d_b(p, q)` at `x`.
pub fn boundary_divergence(
    phi: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
    x: f64,
) -> Result<f64, ProprietyError> {
    require_one_homogeneous(phi)?;
    let parts = BoundaryParts::new(phi, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, parts.jets())?;
    let v = scaled(&dp, x, |x| parts.divergence_ratio(x, &dp.ratios(x)?, &dq.ratios(x)?))?;
    Ok(v)
}

/// `p(x) · g(x)` computed as `sign · exp(ln p + ln|g|)`.
fn scaled<F>(p: &Density, x: f64, g: F) -> Result<f64, EvalError>
where
    F: FnOnce(f64) -> Result<f64, EvalError>,
{
    let v = g(x)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(v.signum() * (p.log_p(x)? + v.abs().ln()).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVerdict {
    Vanishes,
    Nonzero,
    Divergent,
    Inconclusive,
}

/// Values of a boundary expression approaching one end point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointDiagnostic {
    #[serde(serialize_with = "serialize_end")]
    pub end: f64,
    pub points: Vec<(f64, f64)>,
    pub verdict: LimitVerdict,
    /// Estimated limit; exactly 0 when the verdict is `vanishes`.
    pub limit: f64,
}

fn serialize_end<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Geometric approach to an end point: `a + w·10^{-k/2}` for a finite end,
/// `±10^{k/2}` for an infinite one, `k = 1..=12`.
pub fn approach_points(domain: Domain, upper: bool) -> Vec<f64> {
    let Domain(a, b) = domain;
    let w = if a.is_finite() && b.is_finite() { b - a } else { 1.0 };
    (1..=12)
        .map(|k| {
            let s = 10f64.powf(k as f64 / 2.0);
            match (upper, upper && b.is_finite() || !upper && a.is_finite()) {
                (false, true) => a + w / s,
                (false, false) => -s,
                (true, true) => b - w / s,
                (true, false) => s,
            }
        })
        .collect()
}

fn classify(end: f64, points: Vec<(f64, f64)>) -> EndpointDiagnostic {
    let finite: Vec<f64> = points.iter().map(|p| p.1).filter(|v| v.is_finite()).collect();
    let verdict_limit = |verdict, limit| (verdict, limit);
    let (verdict, limit) = if finite.len() < 4 || points.last().is_some_and(|p| !p.1.is_finite()) {
        let last_bad = points.last().is_some_and(|p| p.1.is_infinite());
        if last_bad {
            verdict_limit(LimitVerdict::Divergent, f64::INFINITY)
        } else {
            verdict_limit(LimitVerdict::Inconclusive, finite.last().copied().unwrap_or(0.0))
        }
    } else {
        let tail = &finite[finite.len() - 4..];
        let abs: Vec<f64> = tail.iter().map(|v| v.abs()).collect();
        let last = tail[3];
        let scale = abs.iter().cloned().fold(1.0, f64::max);
        let spread = tail[1..].iter().map(|v| (v - last).abs()).fold(0.0, f64::max);
        if abs.iter().all(|v| *v < 1e-6) && abs[3] <= abs[0] {
            verdict_limit(LimitVerdict::Vanishes, 0.0)
        } else if abs[3] > 1e6 || (abs.windows(2).all(|w| w[1] > w[0]) && abs[3] > 10.0 * abs[0]) {
            verdict_limit(LimitVerdict::Divergent, last)
        } else if spread <= 1e-3 * scale {
            verdict_limit(LimitVerdict::Nonzero, last)
        } else {
            verdict_limit(LimitVerdict::Inconclusive, last)
        }
    };
    EndpointDiagnostic {
        end,
        points,
        verdict,
        limit,
    }
}

fn diagnose<F>(domain: Domain, upper: bool, mut f: F) -> EndpointDiagnostic
where
    F: FnMut(f64) -> Result<f64, EvalError>,
{
    let points = approach_points(domain, upper)
        .into_iter()
        .map(|x| (x, f(x).unwrap_or(f64::NAN)))
        .collect();
    classify(if upper { domain.1 } else { domain.0 }, points)
}

/// Limits of a boundary expression at both end points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryDiagnostics {
    pub lower: EndpointDiagnostic,
    pub upper: EndpointDiagnostic,
}

impl BoundaryDiagnostics {
    /// Both end points vanish.
    pub fn vanishes(&self) -> bool {
        self.lower.verdict == LimitVerdict::Vanishes && self.upper.verdict == LimitVerdict::Vanishes
    }
}

/// `d_b` on approach sequences toward both end points of `P`'s domain.
pub fn boundary_limit_diagnostic(
    phi: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<BoundaryDiagnostics, ProprietyError> {
    require_one_homogeneous(phi)?;
    let parts = BoundaryParts::new(phi, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, parts.jets())?;
    Ok(boundary_prepared(&parts, &dp, &dq))
}

fn boundary_prepared(parts: &BoundaryParts, dp: &Density, dq: &Density) -> BoundaryDiagnostics {
    let f = |x: f64| scaled(dp, x, |x| parts.divergence_ratio(x, &dp.ratios(x)?, &dq.ratios(x)?));
    BoundaryDiagnostics {
        lower: diagnose(dp.domain, false, f),
        upper: diagnose(dp.domain, true, f),
    }
}

/// Limits of an arbitrary boundary expression in `x`, the `q`-jet (taken
/// from `Q`) and the `p`-jet parameters `p0, p1, …` (taken from `P`).
/// Expressions homogeneous in each jet are evaluated on the ratios with the
/// density factors applied in log space.
pub fn boundary_expr_diagnostic(
    expr: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<BoundaryDiagnostics, ProprietyError> {
    let mut names: Vec<String> = expr.params().iter().map(|s| s.to_string()).collect();
    names.retain(|n| n.starts_with('p') && n[1..].parse::<u32>().is_ok());
    let idx: Vec<usize> = names.iter().map(|n| n[1..].parse::<usize>().unwrap()).collect();
    let pj = idx.iter().map(|i| i + 1).max().unwrap_or(1);
    let jets = jets_of(&[expr]).max(pj);
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let layout = SlotLayout::jets(jets).with_params(&refs);
    let c = Compiled::new(expr, &layout, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, jets)?;
    let degrees = jet_degrees(expr, jets as u32)?;
    let eval = |x: f64| -> Result<f64, EvalError> {
        let (pv, qv) = match degrees {
            Some(_) => (dp.ratios(x)?, dq.ratios(x)?),
            None => (dp.jets(x)?, dq.jets(x)?),
        };
        let mut slots = vec![x];
        slots.extend_from_slice(&qv[..jets]);
        slots.extend(idx.iter().map(|i| pv[*i]));
        let v = c.eval(&slots)?;
        match degrees {
            Some((dq_deg, dp_deg)) if v != 0.0 => {
                let log = dq_deg * dq.log_p(x)? + dp_deg * dp.log_p(x)?;
                Ok(v.signum() * (v.abs().ln() + log).exp())
            }
            _ => Ok(v),
        }
    };
    Ok(BoundaryDiagnostics {
        lower: diagnose(dp.domain, false, eval),
        upper: diagnose(dp.domain, true, eval),
    })
}

/// Homogeneity degrees of `f` in the `q`-jet and in the `p`-jet parameters.
fn jet_degrees(f: &QFunction, jets: u32) -> Result<Option<(f64, f64)>, ProprietyError> {
    let Some(dq) = homogeneity_degree(f) else {
        return Ok(None);
    };
    let mut swap = HashMap::new();
    for j in 0..jets {
        swap.insert(Var::Q(j), QFunction::param(&format!("__q{j}")));
        swap.insert(Var::Param(format!("p{j}").as_str().into()), QFunction::q(j));
    }
    let swapped = f.substitute(&swap)?;
    let dp = if swapped.order().is_none() {
        Some(Exponent::from_integer(0))
    } else {
        homogeneity_degree(&swapped)
    };
    Ok(dp.map(|dp| (exponent_f64(dq), exponent_f64(dp))))
}

fn exponent_f64(e: Exponent) -> f64 {
    *e.numer() as f64 / *e.denom() as f64
}

/// `d(P, Q) = d0 + d_+ + d_-` with `d_± = ∓ d_b|_±`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub d0: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub total: f64,
    pub quadrature_abs_err: f64,
    pub boundary_limit_diagnostics: BoundaryDiagnostics,
}

pub fn divergence_report(
    phi: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<DivergenceReport, ProprietyError> {
    require_one_homogeneous(phi)?;
    let parts = BregmanParts::new(phi, &p.bindings)?;
    let bparts = BoundaryParts::new(phi, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, parts.jets().max(bparts.jets()))?;
    let d0 = integral_divergence_prepared(&parts, &dp, &dq)?;
    let diag = boundary_prepared(&bparts, &dp, &dq);
    let d_plus = -diag.upper.limit;
    let d_minus = diag.lower.limit;
    Ok(DivergenceReport {
        d0: d0.value,
        d_plus,
        d_minus,
        total: d0.value + d_plus + d_minus,
        quadrature_abs_err: d0.abs_err,
        boundary_limit_diagnostics: diag,
    })
}

/// `∫ p(x) {s(x, Q) - s(x, P)} dx` for a 0-homogeneous score `s`.
pub fn direct_divergence(
    s: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<Integral, ProprietyError> {
    let jets = jets_of(&[s]);
    let f = JetFn::new(s, jets, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, jets)?;
    integrate_weighted(&dp, |x| Ok(f.eval(x, &dq.ratios(x)?)? - f.eval(x, &dp.ratios(x)?)?))
}

/// `H0 = ∫ φ(p)` and the boundary entropy `H_b = Cφ` near the end points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub h0: f64,
    pub quadrature_abs_err: f64,
    pub hb: BoundaryDiagnostics,
    pub h_plus: f64,
    pub h_minus: f64,
    pub total: f64,
}

pub fn entropy(phi: &QFunction, p: &DensitySpec) -> Result<EntropyReport, ProprietyError> {
    require_one_homogeneous(phi)?;
    let cphi = apply_c(phi);
    let jets = jets_of(&[phi, &cphi]);
    let f = JetFn::new(phi, jets, &p.bindings)?;
    let c = JetFn::new(&cphi, jets, &p.bindings)?;
    let dp = p.prepare(jets - 1)?;
    let h0 = integrate_weighted(&dp, |x| f.eval(x, &dp.ratios(x)?))?;
    let hb_at = |x: f64| scaled(&dp, x, |x| c.eval(x, &dp.ratios(x)?));
    let hb = BoundaryDiagnostics {
        lower: diagnose(dp.domain, false, hb_at),
        upper: diagnose(dp.domain, true, hb_at),
    };
    let (h_plus, h_minus) = (-hb.upper.limit, hb.lower.limit);
    Ok(EntropyReport {
        h0: h0.value,
        quadrature_abs_err: h0.abs_err,
        h_plus,
        h_minus,
        total: h0.value + h_plus + h_minus,
        hb,
    })
}

/// `H_b = Cφ` evaluated at the jet of `P` at `x`.
pub fn boundary_entropy_at(phi: &QFunction, p: &DensitySpec, x: f64) -> Result<f64, ProprietyError> {
    let cphi = apply_c(phi);
    let jets = jets_of(&[&cphi]);
    let c = JetFn::new(&cphi, jets, &p.bindings)?;
    let dp = p.prepare(jets - 1)?;
    Ok(scaled(&dp, x, |x| c.eval(x, &dp.ratios(x)?))?)
}

/// Symbolic `d̂(p, q) = Σ_k p_k ψ_[k](q) - ψ(p)` with `p`-jet parameters.
pub fn d_hat_expr(psi: &QFunction) -> Result<QFunction, ProprietyError> {
    let m = psi.order().unwrap_or(0);
    let mut out = -to_p_jets(psi)?;
    for k in 0..=m {
        out = &out + &(&p_jet(k) * &psi.partial(&Var::Q(k)));
    }
    Ok(out)
}

/// How the integral divergence moves under `φ → φ + Dψ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeShiftReport {
    pub d_hat: BoundaryDiagnostics,
    /// `d̂_+ = d̂|_+`.
    pub d_hat_plus: f64,
    /// `d̂_- = -d̂|_-`.
    pub d_hat_minus: f64,
    pub d0: f64,
    pub d0_star: f64,
    /// `d0 + d̂_+ + d̂_-`.
    pub predicted: f64,
    pub discrepancy: f64,
    pub total: f64,
    pub total_star: f64,
}

pub fn gauge_shift_report(
    phi: &QFunction,
    psi: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<GaugeShiftReport, ProprietyError> {
    require_one_homogeneous(phi)?;
    require_one_homogeneous(psi)?;
    let star = phi + &apply_d(psi);
    let base = divergence_report(phi, p, q)?;
    let moved = divergence_report(&star, p, q)?;
    let hat = BregmanParts::new(psi, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, hat.jets())?;
    let f = |x: f64| scaled(&dp, x, |x| hat.gap(x, &dp.ratios(x)?, &dq.ratios(x)?));
    let d_hat = BoundaryDiagnostics {
        lower: diagnose(dp.domain, false, f),
        upper: diagnose(dp.domain, true, f),
    };
    let d_hat_plus = d_hat.upper.limit;
    let d_hat_minus = -d_hat.lower.limit;
    let predicted = base.d0 + d_hat_plus + d_hat_minus;
    Ok(GaugeShiftReport {
        d_hat,
        d_hat_plus,
        d_hat_minus,
        d0: base.d0,
        d0_star: moved.d0,
        predicted,
        discrepancy: (moved.d0 - predicted).abs(),
        total: base.total,
        total_star: moved.total,
    })
}

/// `S(P, Q) = S0 + S_+ + S_-` compared with direct quadrature of `p s(q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreDecomposition {
    pub direct: f64,
    pub s0: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub sb: BoundaryDiagnostics,
    pub discrepancy: f64,
}

pub fn expected_score_decomposition(
    phi: &QFunction,
    p: &DensitySpec,
    q: &DensitySpec,
) -> Result<ScoreDecomposition, ProprietyError> {
    require_one_homogeneous(phi)?;
    let s = apply_lambda(phi);
    let parts = BregmanParts::new(phi, &p.bindings)?;
    let bparts = BoundaryParts::new(phi, &p.bindings)?;
    let jets = parts.jets().max(bparts.jets()).max(jets_of(&[&s]));
    let sf = JetFn::new(&s, jets, &p.bindings)?;
    let (dp, dq) = prepare_pair(p, q, jets)?;
    let direct = integrate_weighted(&dp, |x| sf.eval(x, &dq.ratios(x)?))?;
    let s0 = integrate_weighted(&dp, |x| parts.linear(x, &dp.ratios(x)?, &dq.ratios(x)?))?;
    let sb_at = |x: f64| scaled(&dp, x, |x| bparts.apply(x, &dp.ratios(x)?, &dq.ratios(x)?));
    let sb = BoundaryDiagnostics {
        lower: diagnose(dp.domain, false, sb_at),
        upper: diagnose(dp.domain, true, sb_at),
    };
    let (s_plus, s_minus) = (-sb.upper.limit, sb.lower.limit);
    Ok(ScoreDecomposition {
        direct: direct.value,
        s0: s0.value,
        s_plus,
        s_minus,
        discrepancy: (direct.value - (s0.value + s_plus + s_minus)).abs(),
        sb,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Concavity {
    StrictlyConcave,
    Concave,
    NotConcave,
}

/// Sample point where a Hessian has a positive eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub x: f64,
    pub point: Vec<f64>,
    pub eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub verdict: Concavity,
    pub witness: Option<Witness>,
    /// Largest Hessian eigenvalue over all samples.
    pub max_eigenvalue: f64,
    pub samples: usize,
    /// Verdicts are decided from sampled Hessians.
    pub sampled: bool,
}

/// Tolerances and sampling for [`check_concavity_with`].
#[derive(Clone, Copy, Debug)]
pub struct ConcavityConfig {
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    pub positive_tol: f64,
    pub strict_tol: f64,
}

impl Default for ConcavityConfig {
    fn default() -> Self {
        ConcavityConfig {
            samples: 200,
            seed: 0xc0_7c_a4,
            step: 1e-2,
            positive_tol: 1e-7,
            strict_tol: 1e-10,
        }
    }
}

/// `Φ(x, u) = φ(x, 1, u)`.
pub fn reduced_generator(phi: &QFunction) -> Result<QFunction, ProprietyError> {
    let mut map = HashMap::new();
    map.insert(Var::Q(0), QFunction::one());
    Ok(phi.substitute(&map)?)
}

/// Second directional derivative by the five-point central stencil.
fn directional<F: Fn(&[f64]) -> Result<f64, EvalError>>(
    f: &F,
    at: &[f64],
    dir: &[f64],
    h: f64,
) -> Result<f64, EvalError> {
    let shifted = |t: f64| -> Vec<f64> { at.iter().zip(dir).map(|(a, d)| a + t * d).collect() };
    let v = [
        f(&shifted(-2.0 * h))?,
        f(&shifted(-h))?,
        f(at)?,
        f(&shifted(h))?,
        f(&shifted(2.0 * h))?,
    ];
    Ok((-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h))
}

/// Finite-difference Hessian; off-diagonals by polarization along `e_i + e_j`.
fn hessian<F: Fn(&[f64]) -> Result<f64, EvalError>>(
    f: &F,
    at: &[f64],
    h: f64,
) -> Result<DMatrix<f64>, EvalError> {
    let n = at.len();
    let mut m = DMatrix::zeros(n, n);
    let unit = |i: usize| -> Vec<f64> { (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    for i in 0..n {
        m[(i, i)] = directional(f, at, &unit(i), h)?;
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut d = unit(i);
            d[j] = 1.0;
            let v = directional(f, at, &d, h)?;
            let off = 0.5 * (v - m[(i, i)] - m[(j, j)]);
            m[(i, j)] = off;
            m[(j, i)] = off;
        }
    }
    Ok(m)
}

fn eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn check_concavity(phi: &QFunction, sample_count: usize) -> Result<ConcavityReport, ProprietyError> {
    check_concavity_with(
        phi,
        &ConcavityConfig {
            samples: sample_count,
            ..ConcavityConfig::default()
        },
    )
}

/// Concavity of `Φ(x, u) = φ(x, 1, u)` in `u` from sampled Hessians. The
/// first sample sits at `u = 0`.
pub fn check_concavity_with(
    phi: &QFunction,
    cfg: &ConcavityConfig,
) -> Result<ConcavityReport, ProprietyError> {
    let big_phi = reduced_generator(phi)?;
    let m = phi.order().unwrap_or(0) as usize;
    let jets = m + 1;
    let c = Compiled::new(&big_phi, &SlotLayout::jets(jets), &Bindings::new())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sample = |rng: &mut ChaCha8Rng, first: bool| -> (f64, Vec<f64>) {
        let x = rng.gen_range(0.1..3.0);
        let u = (0..m)
            .map(|_| if first { 0.0 } else { rng.gen_range(-3.0..3.0) })
            .collect();
        (x, u)
    };
    sampled_verdict(cfg, &mut rng, sample, |x, u| {
        let mut slots = vec![x, 1.0];
        slots.extend_from_slice(u);
        c.eval(&slots)
    }, 0, false)
}

/// Concavity of `φ` itself in `(q0, …, qm)`. A 1-homogeneous function is
/// linear along rays, so one zero eigenvalue is expected; strictness refers
/// to the remaining ones. The positive-eigenvalue tolerance is relative to
/// the Hessian norm here, since entries scale with negative powers of `q0`.
pub fn check_concavity_jets(
    phi: &QFunction,
    cfg: &ConcavityConfig,
) -> Result<ConcavityReport, ProprietyError> {
    let m = phi.order().unwrap_or(0) as usize;
    let c = Compiled::new(phi, &SlotLayout::jets(m + 1), &Bindings::new())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sample = |rng: &mut ChaCha8Rng, first: bool| -> (f64, Vec<f64>) {
        let x = rng.gen_range(0.1..3.0);
        let mut q = vec![rng.gen_range(0.5..3.0)];
        q.extend((0..m).map(|_| if first { 0.0 } else { rng.gen_range(-3.0..3.0) }));
        (x, q)
    };
    sampled_verdict(cfg, &mut rng, sample, |x, q| {
        let mut slots = vec![x];
        slots.extend_from_slice(q);
        c.eval(&slots)
    }, 1, true)
}

fn sampled_verdict<S, F>(
    cfg: &ConcavityConfig,
    rng: &mut ChaCha8Rng,
    mut sample: S,
    f: F,
    expected_zero: usize,
    relative: bool,
) -> Result<ConcavityReport, ProprietyError>
where
    S: FnMut(&mut ChaCha8Rng, bool) -> (f64, Vec<f64>),
    F: Fn(f64, &[f64]) -> Result<f64, EvalError>,
{
    let mut used = 0;
    let mut strict = true;
    let mut max_eig = f64::NEG_INFINITY;
    let mut witness = None;
    let attempts = cfg.samples.max(1) * 5;
    for i in 0..attempts {
        if used == cfg.samples.max(1) {
            break;
        }
        let (x, pt) = sample(rng, i == 0);
        let g = |v: &[f64]| f(x, v);
        let h = match hessian(&g, &pt, cfg.step) {
            Ok(h) if h.iter().all(|v| v.is_finite()) => h,
            _ => continue,
        };
        used += 1;
        let eig = eigenvalues(h);
        let top = eig.first().copied().unwrap_or(0.0);
        max_eig = max_eig.max(top);
        let norm = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = if relative { cfg.positive_tol * norm } else { cfg.positive_tol };
        if top > tol && witness.is_none() {
            witness = Some(Witness {
                x,
                point: pt.clone(),
                eigenvalue: top,
            });
        }
        // Strictness ignores the directions expected to be flat.
        let rest = eig.get(expected_zero).copied();
        if eig.len() <= expected_zero || rest.is_some_and(|v| v >= -cfg.strict_tol) {
            strict = false;
        }
    }
    if used == 0 {
        return Err(ProprietyError::AllSamplesSingular);
    }
    let verdict = if witness.is_some() {
        Concavity::NotConcave
    } else if strict {
        Concavity::StrictlyConcave
    } else {
        Concavity::Concave
    };
    Ok(ConcavityReport {
        verdict,
        witness,
        max_eigenvalue: if max_eig.is_finite() { max_eig } else { 0.0 },
        samples: used,
        sampled: true,
    })
}

#[cfg(test)]
mod tests;
