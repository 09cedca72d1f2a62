//! Univariate densities given by a log-density expression in `x`, and the
//! jet ratios `q^(j)/q` derived from it.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{
    parse_with_params, Bindings, Compiled, EvalError, ExprError, QFunction, SlotLayout, Var,
};
use crate::quadrature::{integrate, QuadConfig, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("log-density must not contain jet symbols")]
    JetSymbol,
    #[error("invalid domain ({0}, {1})")]
    BadDomain(f64, f64),
    #[error("density is not positive and finite anywhere on the domain")]
    NoSupport,
    #[error("density is not integrable: {0}")]
    Normalization(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("malformed density specification: {0}")]
    Json(String),
}

/// `r_0 = 1`, `r_{j+1} = r_j' + ℓ' r_j`: the ratios `q^(j)/q` for `q = exp(ℓ)`.
pub fn jet_ratios(logdensity: &QFunction, m: usize) -> Vec<QFunction> {
    let dl = logdensity.partial(&Var::X);
    let mut out = vec![QFunction::one()];
    for j in 0..m {
        let r = &out[j];
        let next = &r.partial(&Var::X) + &(&dl * r);
        out.push(next);
    }
    out
}

/// Interval end points; `±inf` allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain(pub f64, pub f64);

impl Domain {
    pub fn real_line() -> Self {
        Domain(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn positive() -> Self {
        Domain(0.0, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        if self.0.is_nan() || self.1.is_nan() || self.0 >= self.1 {
            Err(DensityError::BadDomain(self.0, self.1))
        } else {
            Ok(())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.0 && x < self.1
    }
}

fn end_to_json(v: f64) -> serde_json::Value {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.into()
    }
}

fn end_from_json(v: &serde_json::Value) -> Result<f64, String> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| format!("bad number {n}")),
        serde_json::Value::String(s) => match s.trim() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            t => t.parse().map_err(|_| format!("bad end point `{t}`")),
        },
        other => Err(format!("bad end point {other}")),
    }
}

impl Serialize for Domain {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [end_to_json(self.0), end_to_json(self.1)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: [serde_json::Value; 2] = Deserialize::deserialize(d)?;
        let a = end_from_json(&v[0]).map_err(serde::de::Error::custom)?;
        let b = end_from_json(&v[1]).map_err(serde::de::Error::custom)?;
        Ok(Domain(a, b))
    }
}

#[derive(Deserialize)]
struct SpecJson {
    logdensity: String,
    domain: Domain,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

/// An unnormalized density `exp(ℓ(x))` on an open interval.
#[derive(Clone, Debug)]
pub struct DensitySpec {
    pub logdensity: QFunction,
    pub domain: Domain,
    pub bindings: Bindings,
}

impl DensitySpec {
    pub fn new(logdensity: QFunction, domain: Domain) -> Result<Self, DensityError> {
        if logdensity.order().is_some() {
            return Err(DensityError::JetSymbol);
        }
        domain.validate()?;
        Ok(DensitySpec {
            logdensity,
            domain,
            bindings: Bindings::new(),
        })
    }

    pub fn parse(logdensity: &str, domain: Domain) -> Result<Self, DensityError> {
        Self::new(crate::expr::parse(logdensity)?, domain)
    }

    pub fn with_bindings(mut self, bindings: Bindings) -> Self {
        self.bindings = bindings;
        self
    }

    /// `N(mu, sigma²)`, with the moments held as bound parameters.
    pub fn gaussian(mu: f64, sigma: f64) -> Self {
        let ell = parse_with_params("-(x - mu)^2/(2*sigma^2)", &["mu", "sigma"]).expect("gaussian");
        DensitySpec {
            logdensity: ell,
            domain: Domain::real_line(),
            bindings: Bindings::new().with_param("mu", mu).with_param("sigma", sigma),
        }
    }

    /// Exponential density with the given rate on `(0, ∞)`.
    pub fn exponential(rate: f64) -> Self {
        let ell = parse_with_params("-rate*x", &["rate"]).expect("exponential");
        DensitySpec {
            logdensity: ell,
            domain: Domain::positive(),
            bindings: Bindings::new().with_param("rate", rate),
        }
    }

    /// `{"logdensity": "<expr in x>", "domain": [a, b], "params": {..}}`.
    pub fn from_json(text: &str) -> Result<Self, DensityError> {
        let raw: SpecJson = serde_json::from_str(text).map_err(|e| DensityError::Json(e.to_string()))?;
        let names: Vec<&str> = raw.params.keys().map(|s| s.as_str()).collect();
        let ell = parse_with_params(&raw.logdensity, &names)?;
        let mut spec = Self::new(ell, raw.domain)?;
        for (k, v) in &raw.params {
            spec.bindings.set_param(k, *v);
        }
        Ok(spec)
    }

    /// Compile with jet ratios up to order `m` and normalize numerically.
    pub fn prepare(&self, m: usize) -> Result<Density, DensityError> {
        let layout = SlotLayout::jets(0);
        let ell = Compiled::new(&self.logdensity, &layout, &self.bindings)?;
        let ratios = jet_ratios(&self.logdensity, m)
            .iter()
            .map(|r| Compiled::new(r, &layout, &self.bindings))
            .collect::<Result<Vec<_>, _>>()?;
        let mut d = Density {
            domain: self.domain,
            ell,
            ratios,
            log_z: 0.0,
            support: (0.0, 0.0),
            bindings: self.bindings.clone(),
        };
        let (lo, hi, lmax) = d.find_support()?;
        d.support = (lo, hi);
        let cfg = QuadConfig {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            ..QuadConfig::default()
        };
        let z = integrate(
            |x| d.log_unnormalized(x).map(|l| (l - lmax).exp()).map_err(|e| e.to_string()),
            lo,
            hi,
            &cfg,
        )
        .map_err(|e| DensityError::Normalization(e.to_string()))?;
        if !(z.value > 0.0 && z.value.is_finite()) {
            return Err(DensityError::Normalization(format!("integral {}", z.value)));
        }
        d.log_z = lmax + z.value.ln();
        Ok(d)
    }
}

/// Prepared density: compiled log-density, jet ratios and normalization.
#[derive(Clone, Debug)]
pub struct Density {
    pub domain: Domain,
    ell: Compiled,
    ratios: Vec<Compiled>,
    log_z: f64,
    support: (f64, f64),
    pub bindings: Bindings,
}

/// Relative density cut-off defining the effective support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

impl Density {
    fn log_unnormalized(&self, x: f64) -> Result<f64, EvalError> {
        self.ell.eval(&[x])
    }

    pub fn log_p(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.log_unnormalized(x)? - self.log_z)
    }

    pub fn p(&self, x: f64) -> Result<f64, EvalError> {
        self.log_p(x).map(f64::exp)
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }

    /// Highest jet order available.
    pub fn max_order(&self) -> usize {
        self.ratios.len() - 1
    }

    /// `(1, p'/p, p''/p, …)` at `x`.
    pub fn ratios(&self, x: f64) -> Result<Vec<f64>, EvalError> {
        self.ratios.iter().map(|r| r.eval(&[x])).collect()
    }

    /// Normalized jet `(p, p', p'', …)` at `x`.
    pub fn jets(&self, x: f64) -> Result<Vec<f64>, EvalError> {
        let p = self.p(x)?;
        Ok(self.ratios(x)?.into_iter().map(|r| p * r).collect())
    }

    /// Interval outside which the density is below `SUPPORT_CUTOFF` times
    /// its maximum.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    fn candidates(&self) -> Vec<f64> {
        let Domain(a, b) = self.domain;
        let mut pts = Vec::new();
        match (a.is_finite(), b.is_finite()) {
            (false, false) => {
                pts.push(0.0);
                for k in -32..=48 {
                    let s = 10f64.powf(k as f64 / 8.0);
                    pts.push(s);
                    pts.push(-s);
                }
            }
            (true, false) => {
                for k in -96..=48 {
                    pts.push(a + 10f64.powf(k as f64 / 8.0));
                }
            }
            (false, true) => {
                for k in -96..=48 {
                    pts.push(b - 10f64.powf(k as f64 / 8.0));
                }
            }
            (true, true) => {
                let w = b - a;
                for i in 1..1000 {
                    pts.push(a + w * i as f64 / 1000.0);
                }
                for k in 24..=96 {
                    let s = w * 10f64.powf(-(k as f64) / 8.0);
                    pts.push(a + s);
                    pts.push(b - s);
                }
            }
        }
        pts.retain(|x| self.domain.contains(*x));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn bracket(&self, pts: &[f64]) -> Option<(f64, f64, f64)> {
        let vals: Vec<Option<f64>> = pts
            .iter()
            .map(|x| self.log_unnormalized(*x).ok().filter(|v| v.is_finite()))
            .collect();
        let lmax = vals.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lmax.is_finite() {
            return None;
        }
        let thr = lmax + SUPPORT_CUTOFF.ln();
        let above: Vec<usize> = (0..pts.len()).filter(|i| vals[*i].is_some_and(|v| v >= thr)).collect();
        let (i0, i1) = (*above.first()?, *above.last()?);
        let open_end = (i0 == 0 && !self.domain.0.is_finite())
            || (i1 + 1 == pts.len() && !self.domain.1.is_finite());
        if open_end {
            return None;
        }
        // Mass up to the first or last grid point means mass up to a
        // finite end of the domain.
        let lo = if i0 == 0 { self.domain.0 } else { pts[i0 - 1] };
        let hi = if i1 + 1 == pts.len() { self.domain.1 } else { pts[i1 + 1] };
        Some((lo, hi, lmax))
    }

    fn find_support(&self) -> Result<(f64, f64, f64), DensityError> {
        let coarse = self.candidates();
        let (lo, hi, _) = self.bracket(&coarse).ok_or(DensityError::NoSupport)?;
        let n = 4000;
        let fine: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
        let inner: Vec<f64> = fine.into_iter().filter(|x| self.domain.contains(*x)).collect();
        let (flo, fhi, lmax) = self.bracket(&inner).ok_or(DensityError::NoSupport)?;
        let step = 2.0 * (hi - lo) / n as f64;
        let flo = if flo - lo <= step { lo } else { flo };
        let fhi = if hi - fhi <= step { hi } else { fhi };
        Ok((flo.max(lo), fhi.min(hi), lmax))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn ratio_recursion_for_gaussian() {
        let r = jet_ratios(&parse("-(1/2)*x^2").unwrap(), 3);
        assert_eq!(r[1], parse("-x").unwrap());
        assert_eq!(r[2], parse("x^2 - 1").unwrap());
        assert_eq!(r[3], parse("-x^3 + 3*x").unwrap());
    }

    #[test]
    fn gaussian_normalizes_and_has_right_jets() {
        let d = DensitySpec::gaussian(1.0, 2.0).prepare(2).unwrap();
        let expected = -(2.0 * std::f64::consts::PI * 4.0).sqrt().ln();
        assert!((d.log_p(1.0).unwrap() - expected).abs() < 1e-10);
        let j = d.jets(2.0).unwrap();
        let p = d.p(2.0).unwrap();
        assert!((j[1] - p * (-(2.0 - 1.0) / 4.0)).abs() < 1e-14);
        assert!((j[2] - p * ((1.0f64 / 4.0).powi(2) - 0.25)).abs() < 1e-14);
        let (lo, hi) = d.support();
        assert!(lo < 1.0 - 2.0 * 7.0 && hi > 1.0 + 2.0 * 7.0);
        assert!(lo > -60.0 && hi < 60.0);
    }

    #[test]
    fn exponential_on_half_line() {
        let d = DensitySpec::exponential(2.0).prepare(1).unwrap();
        assert!((d.p(0.5).unwrap() - 2.0 * (-1.0f64).exp()).abs() < 1e-10);
        assert_eq!(d.ratios(3.0).unwrap(), vec![1.0, -2.0]);
        assert_eq!(d.support().0, 0.0);
    }

    #[test]
    fn finite_domain_beta_like() {
        let spec = DensitySpec::parse("ln(x) + ln(1 - x)", Domain(0.0, 1.0)).unwrap();
        let d = spec.prepare(1).unwrap();
        // x(1-x) integrates to 1/6.
        assert!((d.log_normalizer() - (1.0f64 / 6.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let spec = DensitySpec::from_json(
            r#"{"logdensity": "-(x - m)^2/2", "domain": ["-inf", "inf"], "params": {"m": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(spec.domain, Domain::real_line());
        let d = spec.prepare(1).unwrap();
        assert!((d.ratios(1.0).unwrap()[1] + 0.5).abs() < 1e-15);
        let text = serde_json::to_string(&Domain::positive()).unwrap();
        assert_eq!(text, r#"[0.0,"inf"]"#);
        assert!(DensitySpec::from_json(r#"{"logdensity": "q0", "domain": [0, 1]}"#).is_err());
        assert!(DensitySpec::from_json(r#"{"logdensity": "x", "domain": [1, 0]}"#).is_err());
    }

    #[test]
    fn non_integrable_is_rejected() {
        let spec = DensitySpec::parse("x", Domain::positive()).unwrap();
        assert!(spec.prepare(0).is_err());
    }
}
