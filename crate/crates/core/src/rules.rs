//! Key local scoring rules: generation from 1-homogeneous generators, gauge
//! transformations, the standard gauge, equivalence and order reduction.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse, Atom, ExprError, Exponent, QFunction, Var, ZeroCheck, ZeroMethod};
use crate::operators::{
    apply_d, apply_e, apply_l, apply_lambda, homogeneity_degree, is_homogeneous,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("expected a {expected}-homogeneous function, found degree {found}")]
    NotHomogeneous { expected: String, found: String },
    #[error("key equation L s = 0 fails")]
    KeyEquation,
    #[error("order cannot be reduced: {0}")]
    NoReduction(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeTag {
    User,
    Standard,
    Transformed,
}

/// Outcome of one symbolic or probabilistic check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckStatus {
    pub passed: bool,
    pub method: ZeroMethod,
}

impl From<ZeroCheck> for CheckStatus {
    fn from(z: ZeroCheck) -> Self {
        CheckStatus {
            passed: z.is_zero,
            method: z.method,
        }
    }
}

fn check(f: &QFunction) -> CheckStatus {
    match f.is_zero() {
        Ok(z) => z.into(),
        Err(_) => CheckStatus {
            passed: false,
            method: ZeroMethod::Probabilistic,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RuleChecks {
    /// `L s = λ`, with `λ = 0` for key rules.
    pub key_equation: CheckStatus,
    /// `E s = 0`.
    pub homogeneity: CheckStatus,
}

/// A local scoring rule `S(x, Q) = s(x, q(x), q'(x), …)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoringRule {
    pub s: QFunction,
    pub generator: Option<QFunction>,
    pub gauge_tag: GaugeTag,
    /// Constant `λ` in `L s = λ`: 0 for key rules, 1 for the log score.
    pub lambda: i64,
    pub checks: RuleChecks,
}

impl ScoringRule {
    fn build(s: QFunction, generator: Option<QFunction>, gauge_tag: GaugeTag, lambda: i64) -> Self {
        let key = &apply_l(&s) - &QFunction::integer(lambda);
        let checks = RuleChecks {
            key_equation: check(&key),
            homogeneity: check(&apply_e(&s)),
        };
        ScoringRule {
            s,
            generator,
            gauge_tag,
            lambda,
            checks,
        }
    }

    /// Wrap a user-supplied score function, recording its checks.
    pub fn from_score(s: QFunction) -> Self {
        Self::build(s, None, GaugeTag::User, 0)
    }

    pub fn order(&self) -> Option<u32> {
        self.s.order()
    }

    /// Both the key equation and 0-homogeneity hold.
    pub fn is_key(&self) -> bool {
        self.lambda == 0 && self.checks.key_equation.passed && self.checks.homogeneity.passed
    }
}

fn degree_text(d: Option<Exponent>) -> String {
    d.map_or_else(|| "none".to_string(), |h| h.to_string())
}

fn require_degree(f: &QFunction, h: i64) -> Result<(), RuleError> {
    if is_homogeneous(f, Exponent::from_integer(h)) {
        Ok(())
    } else {
        Err(RuleError::NotHomogeneous {
            expected: h.to_string(),
            found: degree_text(homogeneity_degree(f)),
        })
    }
}

/// `s = Λφ` for a 1-homogeneous generator `φ`.
pub fn generate(phi: &QFunction) -> Result<ScoringRule, RuleError> {
    require_degree(phi, 1)?;
    Ok(ScoringRule::build(
        apply_lambda(phi),
        Some(phi.clone()),
        GaugeTag::User,
        0,
    ))
}

/// `s = (I - L) g` for a 0-homogeneous `g`; the generator is `q0 g`.
pub fn derive_from(g: &QFunction) -> Result<ScoringRule, RuleError> {
    require_degree(g, 0)?;
    let s = g - &apply_l(g);
    Ok(ScoringRule::build(
        s,
        Some(&QFunction::q(0) * g),
        GaugeTag::User,
        0,
    ))
}

/// `φ* = φ + Dψ`. `ψ` must be 1-homogeneous up to an additive constant.
pub fn gauge_transform(phi: &QFunction, psi: &QFunction) -> Result<QFunction, RuleError> {
    let excess = &apply_e(psi) - psi;
    if !apply_d(&excess).vanishes() {
        return Err(RuleError::NotHomogeneous {
            expected: "1".into(),
            found: degree_text(homogeneity_degree(psi)),
        });
    }
    Ok(phi + &apply_d(psi))
}

/// The standard gauge `φ = q0 s` of a key rule.
pub fn standard_gauge(rule: &ScoringRule) -> Result<QFunction, RuleError> {
    if !apply_l(&rule.s).vanishes() {
        return Err(RuleError::KeyEquation);
    }
    Ok(&QFunction::q(0) * &rule.s)
}

/// Rule generated by the standard gauge, tagged as such.
pub fn in_standard_gauge(rule: &ScoringRule) -> Result<ScoringRule, RuleError> {
    let phi = standard_gauge(rule)?;
    let mut out = generate(&phi)?;
    out.gauge_tag = GaugeTag::Standard;
    Ok(out)
}

/// Whether the rules generated by `φ1` and `φ2` differ by a function of `x`.
pub fn equivalent(phi1: &QFunction, phi2: &QFunction) -> bool {
    let diff = &apply_lambda(phi2) - &apply_lambda(phi1);
    match diff.order() {
        None => true,
        Some(m) => (0..=m).all(|j| diff.partial(&Var::Q(j)).vanishes()),
    }
}

/// Antiderivative `∫_0^{q_j} f dz` for `f` polynomial in `q_j` with
/// coefficients free of `q_j`.
fn integrate_in(f: &QFunction, j: u32) -> Result<QFunction, RuleError> {
    let v = Var::Q(j);
    let mut out = QFunction::zero();
    for t in f.terms() {
        let mut rest = QFunction::constant(t.coeff.clone());
        let mut power = 0i64;
        for (a, e) in t.mono.factors() {
            match a {
                Atom::Q(i) if *i == j => {
                    if !e.is_integer() || *e < Exponent::zero() {
                        return Err(RuleError::NoReduction(format!(
                            "q{j}^{e} is not polynomial in q{j}"
                        )));
                    }
                    power = e.to_integer();
                }
                _ => {
                    if a.depends_on(&v) {
                        return Err(RuleError::NoReduction(format!(
                            "antiderivative in q{j} is outside the expression language"
                        )));
                    }
                    rest = &rest * &QFunction::from_atom_power(a.clone(), *e);
                }
            }
        }
        let c = BigRational::new(1.into(), (power + 1).into());
        out = &out + &(&rest * &QFunction::q(j).powi(power + 1)).scale(&c);
    }
    Ok(out)
}

/// One order-reduction step: `φ* = φ + Dψ` with
/// `ψ = -∫_0^{q_{t-1}} φ_[t] dz`, valid when `φ_[tt] = 0`.
pub fn reduce_gauge_order(phi: &QFunction) -> Result<QFunction, RuleError> {
    let t = match phi.order() {
        None | Some(0) => return Ok(phi.clone()),
        Some(t) => t,
    };
    let a = phi.partial(&Var::Q(t));
    if !a.partial(&Var::Q(t)).vanishes() {
        return Err(RuleError::NoReduction(format!("∂²φ/∂q{t}² is not zero")));
    }
    let psi = -integrate_in(&a, t - 1)?;
    Ok(phi + &apply_d(&psi))
}

/// Result of reducing a generator to a gauge of least order.
#[derive(Clone, Debug, Serialize)]
pub struct ParityReport {
    pub generator: QFunction,
    pub reduced: QFunction,
    pub steps: u32,
    pub generator_order: Option<u32>,
    pub score_order: Option<u32>,
    /// `order(s) = 2 order(reduced)`, or `s` is free of jets.
    pub consistent: bool,
}

/// Repeat [`reduce_gauge_order`] while the top second derivative vanishes.
/// A rule of odd order would never reach a consistent end point.
pub fn parity_check(phi: &QFunction) -> Result<ParityReport, RuleError> {
    let s = apply_lambda(phi);
    let mut cur = phi.clone();
    let mut steps = 0;
    while let Some(t) = cur.order().filter(|t| *t > 0) {
        if !cur.partial(&Var::Q(t)).partial(&Var::Q(t)).vanishes() {
            break;
        }
        let next = reduce_gauge_order(&cur)?;
        if next.order() >= Some(t) {
            return Err(RuleError::NoReduction("order did not drop".into()));
        }
        cur = next;
        steps += 1;
    }
    let score_order = s.order();
    let consistent = match (cur.order(), score_order) {
        (_, None) => true,
        (Some(t), Some(o)) => o == 2 * t && o % 2 == 0,
        (None, Some(_)) => false,
    };
    Ok(ParityReport {
        generator: phi.clone(),
        reduced: cur,
        steps,
        generator_order: phi.order(),
        score_order,
        consistent,
    })
}

/// Built-in rules.
pub mod catalogue {
    use super::*;

    /// `s = -ln q0`, solving `L s = 1`.
    pub fn log_score() -> ScoringRule {
        let s = -QFunction::q(0).ln().expect("ln q0");
        ScoringRule::build(s, None, GaugeTag::User, 1)
    }

    /// Generated by `φ = -½ q1²/q0`.
    pub fn hyvarinen() -> ScoringRule {
        generate(&parse("-(1/2)*q1^2/q0").expect("generator")).expect("1-homogeneous")
    }

    /// Generated by `φ = -q1^k / q0^(k-1)`.
    pub fn power_phi(k: u32) -> QFunction {
        let k = k as i64;
        &(-QFunction::q(1).powi(k)) * &QFunction::q(0).powi(1 - k)
    }

    pub fn power(k: u32) -> ScoringRule {
        generate(&power_phi(k)).expect("1-homogeneous")
    }

    /// `g = -½(1 + x q1/q0)²`, the Hyvärinen score re-expressed on `ln x`.
    pub fn modified_hyvarinen_g() -> QFunction {
        parse("-(1/2)*(1 + x*q1/q0)^2").expect("g")
    }

    pub fn modified_hyvarinen() -> ScoringRule {
        derive_from(&modified_hyvarinen_g()).expect("0-homogeneous")
    }

    /// Look up `log`, `hyvarinen`, `modified_hyvarinen` or `power:<k>`.
    pub fn by_name(name: &str) -> Result<ScoringRule, RuleError> {
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "log" | "log_score" => Ok(log_score()),
            "hyvarinen" => Ok(hyvarinen()),
            "modified_hyvarinen" | "modified" => Ok(modified_hyvarinen()),
            _ => lower
                .strip_prefix("power:")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|k| *k >= 1)
                .map(power)
                .ok_or_else(|| RuleError::UnknownRule(name.to_string())),
        }
    }

    pub const NAMES: &[&str] = &["log", "hyvarinen", "modified_hyvarinen", "power:<k>"];
}

#[cfg(test)]
mod tests {
    use super::catalogue::*;
    use super::*;
    use crate::operators::apply_c;
    use crate::random::random_generator;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> QFunction {
        parse(s).unwrap()
    }

    /// `(k-1)(y1^k + k y1^{k-2} y2)` with `y1 = q1/q0`, `y2 = q2/q0 - q1²/q0²`.
    fn power_oracle(k: i64) -> QFunction {
        let y1 = p("q1/q0");
        let y2 = p("q2/q0 - q1^2/q0^2");
        let km1 = QFunction::integer(k - 1);
        let a = y1.pow(Exponent::from_integer(k)).unwrap();
        let b = &QFunction::integer(k) * &(&y1.pow(Exponent::from_integer(k - 2)).unwrap() * &y2);
        &km1 * &(&a + &b)
    }

    #[test]
    fn hyvarinen_generation() {
        let r = hyvarinen();
        assert_eq!(r.s, p("q2/q0 - (1/2)*q1^2/q0^2"));
        assert_eq!(r.s.to_string(), "q2/q0 - (1/2)*q1^2/q0^2");
        assert!(r.is_key());
        assert_eq!(r.checks.key_equation.method, ZeroMethod::Symbolic);
    }

    #[test]
    fn power_family_matches_closed_form() {
        assert!(power(1).s.is_literal_zero());
        for k in 1..=6 {
            assert_eq!(power(k as u32).s, power_oracle(k), "k = {k}");
        }
        assert_eq!(power(2).s, p("2*q2/q0 - q1^2/q0^2"));
    }

    #[test]
    fn constant_rule() {
        let r = generate(&p("3*q0")).unwrap();
        assert_eq!(r.s, QFunction::integer(3));
    }

    #[test]
    fn generate_rejects_wrong_degree() {
        assert!(matches!(
            generate(&p("q1^2/q0^2")),
            Err(RuleError::NotHomogeneous { .. })
        ));
        assert!(matches!(derive_from(&p("q1")), Err(RuleError::NotHomogeneous { .. })));
    }

    #[test]
    fn derive_from_examples() {
        assert_eq!(derive_from(&p("-(1/2)*(q1/q0)^2")).unwrap().s, hyvarinen().s);
        assert!(derive_from(&QFunction::zero()).unwrap().s.is_literal_zero());
        let m = modified_hyvarinen();
        let eq38 = p("x^2*(q2/q0 - (1/2)*(q1/q0)^2) + 2*x*q1/q0 + 1/2");
        assert_eq!(m.s, eq38);
        assert!(m.is_key());
    }

    #[test]
    fn log_score_solves_inhomogeneous_equation() {
        let r = log_score();
        assert!(r.checks.key_equation.passed);
        assert!(!r.checks.homogeneity.passed);
        assert!(!r.is_key());
    }

    #[test]
    fn example_two_gauge() {
        let phi = p("-(1/2)*q1^2/q0");
        let psi = p("-(1/2)*q1*ln(q1/q0)");
        let star = gauge_transform(&phi, &psi).unwrap();
        assert!((&star - &p("-(1/2)*q2*(1 + ln(q1/q0))")).vanishes());
        assert_eq!(star, p("-(1/2)*q2*(1 + ln(q1/q0))"));
        assert!((&apply_lambda(&star) - &hyvarinen().s).vanishes());
        assert!(apply_lambda(&apply_d(&psi)).vanishes());
    }

    #[test]
    fn trivial_gauges() {
        let phi = p("-(1/2)*q1^2/q0");
        assert_eq!(gauge_transform(&phi, &QFunction::zero()).unwrap(), phi);
        assert_eq!(
            gauge_transform(&phi, &p("(2/3)*q0")).unwrap(),
            &phi + &p("(2/3)*q1")
        );
        assert_eq!(
            gauge_transform(&phi, &p("q0 + 5")).unwrap(),
            &phi + &p("q1")
        );
        assert!(gauge_transform(&phi, &p("q1^2")).is_err());
    }

    #[test]
    fn standard_gauge_examples() {
        assert_eq!(standard_gauge(&hyvarinen()).unwrap(), p("q2 - (1/2)*q1^2/q0"));
        let c = ScoringRule::from_score(QFunction::integer(4));
        assert_eq!(standard_gauge(&c).unwrap(), p("4*q0"));
        let phi = standard_gauge(&power(3)).unwrap();
        assert!(apply_c(&phi).is_literal_zero());
        assert!(standard_gauge(&log_score()).is_err());
        assert_eq!(in_standard_gauge(&power(3)).unwrap().s, power(3).s);
    }

    #[test]
    fn equivalence() {
        let phi = p("-(1/2)*q1^2/q0");
        assert!(equivalent(&phi, &(&phi + &p("a(x)*q0"))));
        assert!(equivalent(&phi, &(&phi + &apply_d(&p("x*q1^2/q0")))));
        assert!(!equivalent(&phi, &p("-q1^2/q0")));
        assert!(equivalent(&phi, &(&phi + &p("a(x)*q0 + b(x)*q1 + c(x)*q2"))));
    }

    #[test]
    fn order_reduction() {
        let phi = p("q2*q1/q0");
        let star = reduce_gauge_order(&phi).unwrap();
        assert!(star.order() <= Some(1));
        assert_eq!(apply_lambda(&star), apply_lambda(&phi));
        assert_eq!(star, p("(1/2)*q1^3/q0^2"));
        let phi0 = p("x*q0");
        assert_eq!(reduce_gauge_order(&phi0).unwrap(), phi0);
        assert!(reduce_gauge_order(&p("q2^2/q0")).is_err());
        assert!(matches!(
            reduce_gauge_order(&p("q2*q0^2/q1")),
            Err(RuleError::NoReduction(_))
        ));
    }

    #[test]
    fn linear_top_variable_reduces_all_the_way() {
        let phi = p("q3*q1/q0 + x*q2 + q1^2/q0");
        let rep = parity_check(&phi).unwrap();
        assert!(rep.steps >= 1);
        assert!(rep.consistent);
        assert_eq!(apply_lambda(&rep.reduced), apply_lambda(&phi));
    }

    #[test]
    fn order_one_gauges_differ_by_linear_terms() {
        let phi1 = p("-(1/2)*q1^2/q0 + x*q1^3/q0^2");
        let phi2 = gauge_transform(&phi1, &p("c(x)*q0")).unwrap();
        let diff = &phi2 - &phi1;
        assert_eq!(diff, p("c'(x)*q0 + c(x)*q1"));
        assert_eq!(apply_lambda(&phi1), apply_lambda(&phi2));
        let coeff1 = diff.partial(&Var::Q(1));
        let coeff0 = diff.partial(&Var::Q(0));
        assert_eq!(coeff1.partial(&Var::X), coeff0);
    }

    #[test]
    fn by_name_lookup() {
        assert_eq!(by_name("Hyvarinen").unwrap().s, hyvarinen().s);
        assert_eq!(by_name("power:3").unwrap().s, power(3).s);
        assert!(by_name("power:0").is_err());
        assert!(by_name("nope").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn generated_rules_are_key_and_even(s in any::<u64>()) {
            let phi = random_generator(&mut ChaCha8Rng::seed_from_u64(s), 3);
            let r = generate(&phi).unwrap();
            prop_assert!(r.is_key());
            if let Some(o) = r.order() {
                prop_assert!(o % 2 == 0, "odd order {} from {}", o, phi);
                let t = phi.order().unwrap();
                prop_assert!(o <= 2 * t);
                let top = phi.partial(&Var::Q(t)).partial(&Var::Q(t));
                prop_assert_eq!(o == 2 * t, !top.vanishes());
            }
        }

        #[test]
        fn standard_gauge_reproduces_rule(s in any::<u64>()) {
            let phi = random_generator(&mut ChaCha8Rng::seed_from_u64(s), 2);
            let r = generate(&phi).unwrap();
            let std = standard_gauge(&r).unwrap();
            prop_assert_eq!(apply_lambda(&std), r.s.clone());
            prop_assert!(apply_c(&std).is_literal_zero());
        }

        #[test]
        fn gauge_invariance(a in any::<u64>(), b in any::<u64>()) {
            let phi = random_generator(&mut ChaCha8Rng::seed_from_u64(a), 3);
            let psi = random_generator(&mut ChaCha8Rng::seed_from_u64(b), 2);
            let star = gauge_transform(&phi, &psi).unwrap();
            prop_assert_eq!(apply_lambda(&star), apply_lambda(&phi));
            prop_assert!(equivalent(&phi, &star));
        }

        #[test]
        fn parity_reduction_is_consistent(s in any::<u64>()) {
            let phi = random_generator(&mut ChaCha8Rng::seed_from_u64(s), 3);
            let rep = parity_check(&phi).unwrap();
            prop_assert!(rep.consistent);
        }
    }
}
