//! Score matching: minimize the total empirical score `Σ S(x_i, Q_θ)` of a
//! model known only up to a normalizing factor.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{jet_ratios, DensityError, DensitySpec, Domain};
use crate::expr::{
    parse_with_params, Bindings, Compiled, EvalError, Exponent, ExprError, QFunction, SlotLayout,
    Var,
};
use crate::operators::is_homogeneous;
use crate::rules::ScoringRule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("scoring rule is not 0-homogeneous")]
    NotZeroHomogeneous,
    #[error("estimating equation does not depend on the data: sigma = {0}")]
    Degenerate(String),
    #[error("observation {index} = {value} lies outside the domain")]
    OutsideDomain { index: usize, value: f64 },
    #[error("observation {index} is not a finite number")]
    NonFinite { index: usize },
    #[error("no observations")]
    Empty,
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("malformed model: {0}")]
    Model(String),
    #[error("malformed data: {0}")]
    Data(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Unnormalized parametric family `exp ℓ(x; θ)`.
#[derive(Clone, Debug)]
pub struct ParametricModel {
    pub logdensity: QFunction,
    pub domain: Domain,
    pub params: Vec<String>,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub start: Option<Vec<f64>>,
    pub bindings: Bindings,
}

#[derive(Deserialize)]
struct ModelJson {
    logdensity: String,
    domain: Domain,
    params: Vec<String>,
    #[serde(default)]
    bounds: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    start: Option<Vec<f64>>,
}

impl ParametricModel {
    pub fn new(
        logdensity: QFunction,
        domain: Domain,
        params: &[&str],
    ) -> Result<Self, EstimationError> {
        if logdensity.order().is_some() {
            return Err(EstimationError::Model("log-density must not contain jet symbols".into()));
        }
        if params.is_empty() || params.len() > 3 {
            return Err(EstimationError::Model(format!(
                "between 1 and 3 parameters supported, got {}",
                params.len()
            )));
        }
        domain.validate()?;
        Ok(ParametricModel {
            logdensity,
            domain,
            params: params.iter().map(|s| s.to_string()).collect(),
            bounds: None,
            start: None,
            bindings: Bindings::new(),
        })
    }

    pub fn parse(logdensity: &str, domain: Domain, params: &[&str]) -> Result<Self, EstimationError> {
        Self::new(parse_with_params(logdensity, params)?, domain, params)
    }

    /// `{"logdensity": "...", "domain": [a, b], "params": ["t1", ...]}`, with
    /// optional `bounds` and `start`.
    pub fn from_json(text: &str) -> Result<Self, EstimationError> {
        let raw: ModelJson =
            serde_json::from_str(text).map_err(|e| EstimationError::Model(e.to_string()))?;
        let names: Vec<&str> = raw.params.iter().map(|s| s.as_str()).collect();
        let mut m = Self::parse(&raw.logdensity, raw.domain, &names)?;
        if let Some(b) = &raw.bounds {
            if b.len() != names.len() {
                return Err(EstimationError::Model("bounds length differs from params".into()));
            }
        }
        if let Some(s) = &raw.start {
            if s.len() != names.len() {
                return Err(EstimationError::Model("start length differs from params".into()));
            }
        }
        m.bounds = raw.bounds;
        m.start = raw.start;
        Ok(m)
    }

    pub fn with_bindings(mut self, bindings: Bindings) -> Self {
        self.bindings = bindings;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// `ℓ = -x²/2 + t1 x`.
    pub fn normal_mean() -> Self {
        Self::parse("-(1/2)*x^2 + t1*x", Domain::real_line(), &["t1"]).expect("model")
    }

    /// `ℓ = ln t1 - t1 x` on `(0, ∞)`.
    pub fn exponential() -> Self {
        Self::parse("ln(t1) - t1*x", Domain::positive(), &["t1"])
            .expect("model")
            .with_bounds(vec![(1e-9, f64::INFINITY)])
    }

    /// The density at `θ` as a [`DensitySpec`], for sampling and quadrature.
    pub fn at(&self, theta: &[f64]) -> Result<DensitySpec, EstimationError> {
        let mut b = self.bindings.clone();
        for (n, v) in self.params.iter().zip(theta) {
            b.set_param(n, *v);
        }
        Ok(DensitySpec::new(self.logdensity.clone(), self.domain)?.with_bindings(b))
    }

    fn param_vars(&self) -> Vec<Var> {
        self.params.iter().map(|p| Var::Param(Arc::from(p.as_str()))).collect()
    }

    fn layout(&self) -> SlotLayout {
        let refs: Vec<&str> = self.params.iter().map(|s| s.as_str()).collect();
        SlotLayout::jets(0).with_params(&refs)
    }
}

/// `S(x, Q_θ)` as an expression in `x` and the parameters.
pub fn score_of_model(rule: &ScoringRule, model: &ParametricModel) -> Result<QFunction, EstimationError> {
    if !is_homogeneous(&rule.s, Exponent::from_integer(0)) {
        return Err(EstimationError::NotZeroHomogeneous);
    }
    let m = rule.s.order().unwrap_or(0);
    let ratios = jet_ratios(&model.logdensity, m as usize);
    let map: HashMap<Var, QFunction> = ratios
        .into_iter()
        .enumerate()
        .map(|(j, r)| (Var::Q(j as u32), r))
        .collect();
    Ok(rule.s.substitute(&map)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Newton,
    NelderMead,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub total_score: f64,
    /// Norm of the mean estimating function `Σσ(x_i, θ̂)/n`.
    pub score_gradient_norm: f64,
    pub iterations: usize,
    pub method: Method,
}

/// Compiled score with symbolic `θ`-gradient and Hessian.
pub struct ScoreModel {
    pub score: QFunction,
    pub sigma: Vec<QFunction>,
    pub hessian: Vec<Vec<QFunction>>,
    s_c: Compiled,
    sigma_c: Vec<Compiled>,
    hess_c: Vec<Vec<Compiled>>,
    dim: usize,
}

impl ScoreModel {
    pub fn new(rule: &ScoringRule, model: &ParametricModel) -> Result<Self, EstimationError> {
        let score = score_of_model(rule, model)?;
        let vars = model.param_vars();
        let sigma: Vec<QFunction> = vars.iter().map(|v| score.partial(v)).collect();
        let hessian: Vec<Vec<QFunction>> = sigma
            .iter()
            .map(|g| vars.iter().map(|v| g.partial(v)).collect())
            .collect();
        let layout = model.layout();
        let c = |f: &QFunction| Compiled::new(f, &layout, &model.bindings);
        Ok(ScoreModel {
            s_c: c(&score)?,
            sigma_c: sigma.iter().map(c).collect::<Result<_, _>>()?,
            hess_c: hessian
                .iter()
                .map(|row| row.iter().map(c).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()?,
            score,
            sigma,
            hessian,
            dim: vars.len(),
        })
    }

    /// `∂σ/∂x ≡ 0` for every component: the data carry no information.
    pub fn is_degenerate(&self) -> bool {
        self.sigma.iter().all(|g| g.partial(&Var::X).vanishes())
    }

    /// The Hessian does not depend on `θ`, so `S` is quadratic in `θ`.
    pub fn is_quadratic(&self, model: &ParametricModel) -> bool {
        let vars = model.param_vars();
        self.hessian
            .iter()
            .flatten()
            .all(|h| vars.iter().all(|v| h.partial(v).vanishes()))
    }

    fn slots(x: f64, theta: &[f64]) -> Vec<f64> {
        let mut s = Vec::with_capacity(1 + theta.len());
        s.push(x);
        s.extend_from_slice(theta);
        s
    }

    pub fn total(&self, data: &[f64], theta: &[f64]) -> Result<f64, EvalError> {
        data.iter().map(|x| self.s_c.eval(&Self::slots(*x, theta))).sum()
    }

    pub fn sigma_at(&self, x: f64, theta: &[f64]) -> Result<Vec<f64>, EvalError> {
        let s = Self::slots(x, theta);
        self.sigma_c.iter().map(|c| c.eval(&s)).collect()
    }

    pub fn gradient(&self, data: &[f64], theta: &[f64]) -> Result<DVector<f64>, EvalError> {
        let mut g = DVector::zeros(self.dim);
        for x in data {
            for (i, v) in self.sigma_at(*x, theta)?.into_iter().enumerate() {
                g[i] += v;
            }
        }
        Ok(g)
    }

    pub fn hessian_at(&self, data: &[f64], theta: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for x in data {
            let s = Self::slots(*x, theta);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h[(i, j)] += self.hess_c[i][j].eval(&s)?;
                }
            }
        }
        Ok(h)
    }
}

/// Finite values inside the open domain.
pub fn validate_data(data: &[f64], domain: Domain) -> Result<(), EstimationError> {
    if data.is_empty() {
        return Err(EstimationError::Empty);
    }
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(EstimationError::NonFinite { index });
        }
        if !domain.contains(value) {
            return Err(EstimationError::OutsideDomain { index, value });
        }
    }
    Ok(())
}

/// Settings for [`estimate_with`].
#[derive(Clone, Copy, Debug)]
pub struct EstimateConfig {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            max_iterations: 200,
            gradient_tol: 1e-8,
            starts: 5,
            seed: 0,
        }
    }
}

pub fn estimate(
    rule: &ScoringRule,
    model: &ParametricModel,
    data: &[f64],
) -> Result<EstimationResult, EstimationError> {
    estimate_with(rule, model, data, &EstimateConfig::default())
}

/// Minimize `Σ S(x_i; θ)`: one exact Newton step when `S` is quadratic in
/// `θ`, damped Newton otherwise, multi-start Nelder–Mead as the fallback.
pub fn estimate_with(
    rule: &ScoringRule,
    model: &ParametricModel,
    data: &[f64],
    cfg: &EstimateConfig,
) -> Result<EstimationResult, EstimationError> {
    validate_data(data, model.domain)?;
    let sm = ScoreModel::new(rule, model)?;
    if sm.is_degenerate() {
        return Err(EstimationError::Degenerate(sm.sigma.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")));
    }
    let n = data.len() as f64;
    let finish = |theta: Vec<f64>, iterations, method| -> Result<EstimationResult, EstimationError> {
        let g = sm.gradient(data, &theta)?;
        Ok(EstimationResult {
            total_score: sm.total(data, &theta)?,
            score_gradient_norm: g.norm() / n,
            theta_hat: theta,
            iterations,
            method,
        })
    };
    if sm.is_quadratic(model) {
        let zero = vec![0.0; sm.dim];
        let g = sm.gradient(data, &zero)?;
        let h = sm.hessian_at(data, &zero)?;
        if let Some(step) = h.clone().lu().solve(&g) {
            let theta: Vec<f64> = step.iter().map(|v| -v).collect();
            if theta.iter().all(|v| v.is_finite()) && positive_definite(&h) {
                return finish(theta, 1, Method::ClosedForm);
            }
        }
    }
    let start = start_point(model);
    if let Some((theta, it)) = newton(&sm, model, data, start.clone(), cfg) {
        return finish(theta, it, Method::Newton);
    }
    let (theta, it) = nelder_mead_multi(&sm, model, data, &start, cfg)?;
    finish(theta, it, Method::NelderMead)
}

fn positive_definite(h: &DMatrix<f64>) -> bool {
    h.clone().cholesky().is_some()
}

fn start_point(model: &ParametricModel) -> Vec<f64> {
    if let Some(s) = &model.start {
        return s.clone();
    }
    match &model.bounds {
        Some(b) => b
            .iter()
            .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo.max(0.0) + 1.0,
                (false, true) => hi.min(0.0) - 1.0,
                (false, false) => 1.0,
            })
            .collect(),
        None => vec![1.0; model.dim()],
    }
}

fn in_bounds(model: &ParametricModel, theta: &[f64]) -> bool {
    model.bounds.as_ref().is_none_or(|b| {
        b.iter().zip(theta).all(|(&(lo, hi), v)| *v >= lo && *v <= hi)
    })
}

fn newton(
    sm: &ScoreModel,
    model: &ParametricModel,
    data: &[f64],
    mut theta: Vec<f64>,
    cfg: &EstimateConfig,
) -> Option<(Vec<f64>, usize)> {
    let n = data.len() as f64;
    let mut f = sm.total(data, &theta).ok().filter(|v| v.is_finite())?;
    for it in 1..=cfg.max_iterations {
        let g = sm.gradient(data, &theta).ok()?;
        if g.norm() == 0.0 {
            return Some((theta, it - 1));
        }
        let h = sm.hessian_at(data, &theta).ok()?;
        if !positive_definite(&h) {
            return None;
        }
        let step = h.lu().solve(&g)?;
        let scale = 1.0 + theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g.norm() / n < cfg.gradient_tol && step.norm() <= 1e-13 * scale {
            return Some((theta, it - 1));
        }
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            if in_bounds(model, &cand) {
                if let Ok(fc) = sm.total(data, &cand) {
                    if fc.is_finite() && fc <= f + 1e-12 * f.abs().max(1.0) {
                        theta = cand;
                        f = fc;
                        break;
                    }
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
    }
    None
}

fn nelder_mead_multi(
    sm: &ScoreModel,
    model: &ParametricModel,
    data: &[f64],
    start: &[f64],
    cfg: &EstimateConfig,
) -> Result<(Vec<f64>, usize), EstimationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let objective = |t: &[f64]| -> f64 {
        if !in_bounds(model, t) {
            return f64::INFINITY;
        }
        sm.total(data, t).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    };
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    for k in 0..cfg.starts.max(1) {
        let s0: Vec<f64> = if k == 0 {
            start.to_vec()
        } else {
            start.iter().map(|v| v + rng.gen_range(-2.0..2.0) * v.abs().max(1.0)).collect()
        };
        if let Some((x, fx, it)) = nelder_mead(&objective, s0, cfg.max_iterations) {
            if best.as_ref().is_none_or(|b| fx < b.0) {
                best = Some((fx, x, it));
            }
        }
    }
    best.map(|(_, x, it)| (x, it))
        .ok_or(EstimationError::NoConvergence(cfg.max_iterations))
}

/// Nelder–Mead with standard coefficients; `None` if it fails to converge.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: Vec<f64>, max_iter: usize) -> Option<(Vec<f64>, f64, usize)> {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let fx0 = f(&x0);
    if !fx0.is_finite() {
        return None;
    }
    simplex.push((x0.clone(), fx0));
    for i in 0..d {
        let mut x = x0.clone();
        x[i] += 0.1 * x[i].abs().max(0.5);
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(u, v)| u + t * (v - u)).collect()
    };
    for it in 1..=max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = (simplex[d].1 - simplex[0].1).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-14 * simplex[0].1.abs().max(1.0) && size < 1e-10 {
            return Some((simplex[0].0.clone(), simplex[0].1, it));
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(&centroid, &worst.0, -0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst.0, 0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&best, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
            }
        }
    }
    None
}

/// `θ̂ = Σ{x_i - κ'(x_i)}/n` for `ℓ = κ(x) - (x - θ)²/2` under the Hyvärinen
/// rule.
pub fn selection_model_estimator<F: Fn(f64) -> f64>(kappa_prime: F, data: &[f64]) -> f64 {
    data.iter().map(|x| x - kappa_prime(*x)).sum::<f64>() / data.len() as f64
}

/// Inverse-CDF sampler built from a piecewise-linear density on a grid.
#[derive(Clone, Debug)]
pub struct GridSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

pub const SAMPLER_GRID: usize = 4096;

impl GridSampler {
    pub fn new(spec: &DensitySpec) -> Result<Self, EstimationError> {
        let d = spec.prepare(0)?;
        let (lo, hi) = d.support();
        let xs: Vec<f64> = (0..SAMPLER_GRID).map(|i| lo + (hi - lo) * i as f64 / (SAMPLER_GRID - 1) as f64).collect();
        let ps: Vec<f64> = xs
            .iter()
            .map(|x| if spec.domain.contains(*x) { d.p(*x).unwrap_or(0.0) } else { 0.0 })
            .collect();
        let mut cdf = vec![0.0; SAMPLER_GRID];
        for i in 1..SAMPLER_GRID {
            cdf[i] = cdf[i - 1] + 0.5 * (ps[i] + ps[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let total = cdf[SAMPLER_GRID - 1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(EstimationError::Density(DensityError::NoSupport));
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(GridSampler { xs, cdf })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|c| *c < u).clamp(1, self.xs.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }

    pub fn sample_n<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Monte-Carlo mean of `σ(X, θ0)` under `X ~ Q_θ0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `|mean| / stderr` per component.
    pub z: Vec<f64>,
    pub degenerate: bool,
    pub passed: bool,
}

pub fn unbiasedness_check(
    rule: &ScoringRule,
    model: &ParametricModel,
    theta0: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<UnbiasednessReport, EstimationError> {
    let sm = ScoreModel::new(rule, model)?;
    let sampler = GridSampler::new(&model.at(theta0)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = sampler.sample_n(&mut rng, n_mc.max(2));
    let d = sm.dim;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for x in &xs {
        for (i, v) in sm.sigma_at(*x, theta0)?.into_iter().enumerate() {
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    let n = xs.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr: Vec<f64> = (0..d)
        .map(|i| ((sq[i] / n - mean[i] * mean[i]).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    let degenerate = sm.is_degenerate();
    let z: Vec<f64> = mean
        .iter()
        .zip(&stderr)
        .map(|(m, s)| if *s > 0.0 { m.abs() / s } else if *m == 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    let passed = !degenerate && z.iter().all(|v| *v < 3.0);
    Ok(UnbiasednessReport {
        mean,
        stderr,
        z,
        degenerate,
        passed,
    })
}

/// Observations from text: one value per line, or a CSV column chosen by
/// header name or zero-based index.
pub fn read_data(text: &str, column: Option<&str>) -> Result<Vec<f64>, EstimationError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let mut out = Vec::new();
    let first = match rows.next() {
        Some(r) => r.map_err(|e| EstimationError::Data(e.to_string()))?,
        None => return Err(EstimationError::Empty),
    };
    let numeric = |s: &str| s.parse::<f64>().ok();
    let idx = match column {
        None => 0,
        Some(c) => match c.parse::<usize>() {
            Ok(i) => i,
            Err(_) => first
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| EstimationError::Data(format!("no column `{c}`")))?,
        },
    };
    let header = first.get(idx).is_none_or(|v| numeric(v).is_none());
    let mut push = |line: usize, rec: &csv::StringRecord| -> Result<(), EstimationError> {
        let cell = rec
            .get(idx)
            .ok_or_else(|| EstimationError::Data(format!("line {line}: missing column {idx}")))?;
        let v = numeric(cell).ok_or_else(|| EstimationError::Data(format!("line {line}: `{cell}` is not a number")))?;
        if !v.is_finite() {
            return Err(EstimationError::NonFinite { index: out.len() });
        }
        out.push(v);
        Ok(())
    };
    if !header {
        push(1, &first)?;
    }
    for (i, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| EstimationError::Data(e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        push(i + 2, &rec)?;
    }
    if out.is_empty() {
        return Err(EstimationError::Empty);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
