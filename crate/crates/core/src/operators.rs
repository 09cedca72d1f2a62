//! Linear differential operators on q-functions.
//!
//! `D` is the total derivative along a fixed density, `E` the Euler operator,
//! `Λ` the Lagrange operator, `L` the key-equation operator, `B_r` the
//! boundary operators and `C = Σ q_r B_r`. Each is computed from its defining
//! sum; the identities relating them live in [`identity_suite`] and serve as
//! independent cross-checks.

use std::fmt;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{free_layout, Bindings, Compiled, Exponent, QFunction, Var, ZeroCheck};

/// `D f = ∂f/∂x + Σ_j q_{j+1} ∂f/∂q_j`.
pub fn apply_d(f: &QFunction) -> QFunction {
    let mut out = f.partial(&Var::X);
    if let Some(m) = f.order() {
        for j in 0..=m {
            let d = f.partial(&Var::Q(j));
            if !d.is_literal_zero() {
                out = &out + &(&QFunction::q(j + 1) * &d);
            }
        }
    }
    out
}

/// `D^n f`.
pub fn apply_d_n(f: &QFunction, n: u32) -> QFunction {
    (0..n).fold(f.clone(), |acc, _| apply_d(&acc))
}

/// `E f = Σ_j q_j ∂f/∂q_j`.
pub fn apply_e(f: &QFunction) -> QFunction {
    let mut out = QFunction::zero();
    if let Some(m) = f.order() {
        for j in 0..=m {
            out = &out + &(&QFunction::q(j) * &f.partial(&Var::Q(j)));
        }
    }
    out
}

/// `Σ_k (-1)^k D^k g_k`, evaluated by nesting `g_0 - D(g_1 - D(g_2 - …))`.
fn alternating_sum(parts: &[QFunction]) -> QFunction {
    let mut acc = QFunction::zero();
    for g in parts.iter().rev() {
        acc = g - &apply_d(&acc);
    }
    acc
}

/// `Λ f = Σ_k (-1)^k D^k ∂f/∂q_k`.
pub fn apply_lambda(f: &QFunction) -> QFunction {
    apply_b(-1, f)
}

/// `L f = Σ_k (-1)^{k+1} D^k (q0 ∂f/∂q_k)`.
pub fn apply_l(f: &QFunction) -> QFunction {
    let Some(m) = f.order() else {
        return QFunction::zero();
    };
    let q0 = QFunction::q(0);
    let parts: Vec<QFunction> = (0..=m).map(|k| &q0 * &f.partial(&Var::Q(k))).collect();
    -alternating_sum(&parts)
}

/// `B_r f = Σ_{k ≥ r+1} (-1)^{k-1-r} D^{k-1-r} ∂f/∂q_k`, with `∂/∂q_k = 0`
/// for negative `k`. `B_{-1} = Λ`.
pub fn apply_b(r: i64, f: &QFunction) -> QFunction {
    let Some(m) = f.order() else {
        return QFunction::zero();
    };
    let m = m as i64;
    if r >= m {
        return QFunction::zero();
    }
    // Index k - 1 - r runs from 0; entries with k < 0 vanish.
    let parts: Vec<QFunction> = (r + 1..=m)
        .map(|k| {
            if k < 0 {
                QFunction::zero()
            } else {
                f.partial(&Var::Q(k as u32))
            }
        })
        .collect();
    alternating_sum(&parts)
}

/// `C f = Σ_{r ≥ 0} q_r B_r f`.
pub fn apply_c(f: &QFunction) -> QFunction {
    let Some(m) = f.order() else {
        return QFunction::zero();
    };
    let mut out = QFunction::zero();
    for r in 0..m {
        out = &out + &(&QFunction::q(r) * &apply_b(r as i64, f));
    }
    out
}

/// Whether `E f = h f`.
pub fn is_homogeneous(f: &QFunction, h: Exponent) -> bool {
    let h = BigRational::new((*h.numer()).into(), (*h.denom()).into());
    (&apply_e(f) - &f.scale(&h)).vanishes()
}

/// Degree `h` with `E f = h f`, or `None` if `f` is not homogeneous.
///
/// The candidate is read off as `Ef / f` at random points, rationalized with
/// a small denominator and then confirmed by a zero test. The zero function
/// has no well-defined degree and gives `None`.
pub fn homogeneity_degree(f: &QFunction) -> Option<Exponent> {
    if f.is_literal_zero() {
        return None;
    }
    if f.is_constant() {
        return Some(Exponent::zero());
    }
    let ef = apply_e(f);
    let layout = free_layout(f);
    let cf = Compiled::new(f, &layout, &Bindings::new()).ok()?;
    let ce = Compiled::new(&ef, &layout, &Bindings::new()).ok()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e_11);
    let mut slots = vec![0.0; layout.len()];
    let mut ratio = None;
    for _ in 0..50 {
        for s in slots.iter_mut() {
            *s = rng.gen_range(0.1..3.0);
        }
        if let (Ok(a), Ok(b)) = (cf.eval(&slots), ce.eval(&slots)) {
            if a.is_finite() && b.is_finite() && a.abs() > 1e-8 {
                ratio = Some(b / a);
                break;
            }
        }
    }
    let h = rationalize(ratio?, 24)?;
    is_homogeneous(f, h).then_some(h)
}

/// Closest fraction with denominator at most `max_den`, if within 1e-6.
fn rationalize(v: f64, max_den: i64) -> Option<Exponent> {
    if !v.is_finite() {
        return None;
    }
    (1..=max_den).find_map(|d| {
        let n = (v * d as f64).round();
        ((v - n / d as f64).abs() < 1e-6 && n.abs() < 1e9)
            .then(|| Exponent::new(n.to_i64().unwrap_or(0), d))
    })
}

/// A primitive operator in an [`OperatorExpr`].
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    D,
    E,
    Lambda,
    L,
    B(i64),
    C,
    MultiplyBy(QFunction),
    Partial(Var),
    Identity,
}

impl Op {
    pub fn apply(&self, f: &QFunction) -> QFunction {
        match self {
            Op::D => apply_d(f),
            Op::E => apply_e(f),
            Op::Lambda => apply_lambda(f),
            Op::L => apply_l(f),
            Op::B(r) => apply_b(*r, f),
            Op::C => apply_c(f),
            Op::MultiplyBy(g) => g * f,
            Op::Partial(v) => f.partial(v),
            Op::Identity => f.clone(),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::D => write!(f, "D"),
            Op::E => write!(f, "E"),
            Op::Lambda => write!(f, "Λ"),
            Op::L => write!(f, "L"),
            Op::B(r) => write!(f, "B[{r}]"),
            Op::C => write!(f, "C"),
            Op::MultiplyBy(g) => write!(f, "({g})∘"),
            Op::Partial(v) => write!(f, "∂/∂{v}"),
            Op::Identity => write!(f, "I"),
        }
    }
}

/// Composition of primitive operators, written left to right and applied
/// right to left: `[Λ, E]` means `Λ(E f)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorExpr(pub Vec<Op>);

impl OperatorExpr {
    pub fn new(ops: impl IntoIterator<Item = Op>) -> Self {
        OperatorExpr(ops.into_iter().collect())
    }

    pub fn apply(&self, f: &QFunction) -> QFunction {
        self.0.iter().rev().fold(f.clone(), |acc, op| op.apply(&acc))
    }

    /// `self ∘ other`.
    pub fn then(&self, other: &OperatorExpr) -> OperatorExpr {
        OperatorExpr(self.0.iter().chain(other.0.iter()).cloned().collect())
    }
}

impl fmt::Display for OperatorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "I");
        }
        for (i, op) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{op}")?;
        }
        Ok(())
    }
}

/// An operator identity `lhs = Σ c_i rhs_i`.
#[derive(Clone, Debug)]
pub struct OperatorIdentity {
    pub name: String,
    pub lhs: OperatorExpr,
    pub rhs: Vec<(i64, OperatorExpr)>,
}

impl OperatorIdentity {
    /// `lhs f - Σ c_i rhs_i f`.
    pub fn residual(&self, f: &QFunction) -> QFunction {
        self.rhs.iter().fold(self.lhs.apply(f), |acc, (c, op)| {
            &acc - &op.apply(f).scale(&BigRational::from_integer((*c).into()))
        })
    }

    pub fn check(&self, f: &QFunction) -> Result<ZeroCheck, crate::expr::ExprError> {
        self.residual(f).is_zero()
    }
}

fn ops(v: &[Op]) -> OperatorExpr {
    OperatorExpr(v.to_vec())
}

/// The catalogue of operator identities checked by the self-test; `B_r`
/// identities are instantiated for `r = 0, 1, 2`.
pub fn identity_suite() -> Vec<OperatorIdentity> {
    use Op::*;
    let q0 = MultiplyBy(QFunction::q(0));
    let id = |name: &str, lhs: OperatorExpr, rhs: Vec<(i64, OperatorExpr)>| OperatorIdentity {
        name: name.to_string(),
        lhs,
        rhs,
    };
    let mut out = vec![
        id("ΛD = 0", ops(&[Lambda, D]), vec![]),
        id("ED = DE", ops(&[E, D]), vec![(1, ops(&[D, E]))]),
        id("EL = LE", ops(&[E, L]), vec![(1, ops(&[L, E]))]),
        id(
            "ΛE = EΛ + Λ",
            ops(&[Lambda, E]),
            vec![(1, ops(&[E, Lambda])), (1, ops(&[Lambda]))],
        ),
        id(
            "ΛE = Λq0Λ",
            ops(&[Lambda, E]),
            vec![(1, ops(&[Lambda, q0.clone(), Lambda]))],
        ),
    ];
    for r in 0..=2i64 {
        let dq = Partial(Var::Q(r as u32));
        out.push(id(
            &format!("B{r}D = ∂/∂q{r}"),
            ops(&[B(r), D]),
            vec![(1, ops(std::slice::from_ref(&dq)))],
        ));
        out.push(id(
            &format!("DB{r} = ∂/∂q{r} - B{}", r - 1),
            ops(&[D, B(r)]),
            vec![(1, ops(&[dq])), (-1, ops(&[B(r - 1)]))],
        ));
    }
    out.push(id("CD = E", ops(&[C, D]), vec![(1, ops(&[E]))]));
    out.push(id(
        "DC = E - q0Λ",
        ops(&[D, C]),
        vec![(1, ops(&[E])), (-1, ops(&[q0.clone(), Lambda]))],
    ));
    out.push(id(
        "L = I - Λq0",
        ops(&[L]),
        vec![(1, ops(&[Identity])), (-1, ops(&[Lambda, q0]))],
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use num_traits::One;
    use crate::random::{random_qfunction, RandomSpec};
    use proptest::prelude::*;

    fn p(s: &str) -> QFunction {
        parse(s).unwrap()
    }

    fn seeded(seed: u64, transcendental: bool) -> QFunction {
        let spec = RandomSpec {
            transcendental,
            ..RandomSpec::default()
        };
        random_qfunction(&mut ChaCha8Rng::seed_from_u64(seed), &spec)
    }

    #[test]
    fn d_examples() {
        assert_eq!(apply_d(&p("ln(q0)")), p("q1/q0"));
        assert_eq!(apply_d(&p("-q1/q0")), p("-q2/q0 + q1^2/q0^2"));
        assert!(apply_d(&p("7/3")).is_literal_zero());
        assert_eq!(apply_d(&p("a(x)*q0")), p("a'(x)*q0 + a(x)*q1"));
    }

    #[test]
    fn d_vanishes_only_on_constants() {
        for text in ["x", "q0", "ln(q0)", "a(x)", "q1/q0", "exp(x) - x"] {
            assert!(!apply_d(&p(text)).vanishes(), "{text}");
        }
    }

    #[test]
    fn e_examples() {
        assert_eq!(apply_e(&p("q0")), p("q0"));
        assert!(apply_e(&p("q1/q0")).is_literal_zero());
        assert_eq!(apply_e(&p("-(1/2)*q1^2/q0")), p("-(1/2)*q1^2/q0"));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(apply_lambda(&p("-(1/2)*q1^2/q0")), p("q2/q0 - (1/2)*q1^2/q0^2"));
        assert_eq!(apply_lambda(&p("(5/2)*q0")), p("5/2"));
        let psi = p("x*q1^2*q2/q0^2 + q2");
        assert!(apply_lambda(&apply_d(&psi)).is_literal_zero());
    }

    #[test]
    fn l_examples() {
        assert_eq!(apply_l(&p("-ln(q0)")), QFunction::one());
        assert!(apply_l(&p("q2/q0 - (1/2)*q1^2/q0^2")).is_literal_zero());
        assert!(apply_l(&p("3")).is_literal_zero());
    }

    #[test]
    fn b_examples() {
        let phi = p("-(1/2)*q1^2/q0");
        assert_eq!(apply_b(0, &phi), p("-q1/q0"));
        assert!(apply_b(1, &phi).is_literal_zero());
        assert!(apply_b(3, &p("q2*q1/q0")).is_literal_zero());
        for s in 0..10 {
            let f = seeded(s, false);
            assert_eq!(apply_b(-1, &f), apply_lambda(&f));
        }
        // B_{-2} = -DΛ
        let f = seeded(3, false);
        assert_eq!(apply_b(-2, &f), -apply_d(&apply_lambda(&f)));
    }

    #[test]
    fn c_examples() {
        assert_eq!(apply_c(&p("-(1/2)*q1^2/q0")), p("-q1"));
        assert!(apply_c(&p("q2 - (1/2)*q1^2/q0")).is_literal_zero());
        assert!(apply_c(&p("4")).is_literal_zero());
        let f = seeded(9, false);
        assert_eq!(apply_c(&apply_d(&f)), apply_e(&f));
    }

    #[test]
    fn degree_examples() {
        assert_eq!(homogeneity_degree(&p("q1/q0")), Some(Exponent::zero()));
        assert_eq!(homogeneity_degree(&p("-(1/2)*q1^2/q0")), Some(Exponent::one()));
        assert_eq!(homogeneity_degree(&p("q0 + q1^2")), None);
        assert_eq!(homogeneity_degree(&p("q1^(1/2)*x")), Some(Exponent::new(1, 2)));
        assert_eq!(
            homogeneity_degree(&p("-(1/2)*q2*(1 + ln(q1/q0))")),
            Some(Exponent::one())
        );
        assert_eq!(homogeneity_degree(&p("ln(q0)")), None);
        assert_eq!(homogeneity_degree(&QFunction::zero()), None);
        assert!(is_homogeneous(&QFunction::zero(), Exponent::zero()));
    }

    #[test]
    fn d_raises_order_by_at_most_one() {
        for s in 0..30 {
            let f = seeded(s, s % 3 == 0);
            let (a, b) = (f.order(), apply_d(&f).order());
            assert!(b <= a.map(|o| o + 1), "{f}");
        }
    }

    #[test]
    fn l_order_at_most_twice_input() {
        for s in 0..20 {
            let f = seeded(s, false);
            if let (Some(a), Some(b)) = (f.order(), apply_l(&f).order()) {
                assert!(b <= 2 * a);
            }
        }
    }

    #[test]
    fn operator_expr_applies_right_to_left() {
        let f = p("q1^2/q0");
        let e = OperatorExpr::new([Op::Lambda, Op::MultiplyBy(QFunction::q(0)), Op::Lambda]);
        let manual = apply_lambda(&(&QFunction::q(0) * &apply_lambda(&f)));
        assert_eq!(e.apply(&f), manual);
        assert_eq!(e.to_string(), "Λ (q0)∘ Λ");
        assert_eq!(OperatorExpr::default().apply(&f), f);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn identities_hold_on_random_inputs(s in any::<u64>()) {
            let f = seeded(s, false);
            for ident in identity_suite() {
                prop_assert!(ident.residual(&f).is_literal_zero(), "{} on {}", ident.name, f);
            }
        }

        #[test]
        fn identities_hold_with_transcendental_atoms(s in any::<u64>()) {
            let f = seeded(s, true);
            for ident in identity_suite() {
                let z = ident.check(&f).unwrap();
                prop_assert!(z.is_zero, "{} on {}", ident.name, f);
            }
        }

        #[test]
        fn d_preserves_degree(s in any::<u64>()) {
            let g = crate::random::random_generator(&mut ChaCha8Rng::seed_from_u64(s), 3);
            prop_assert!(is_homogeneous(&apply_d(&g), Exponent::one()));
        }

        #[test]
        fn key_equation_forces_zero_homogeneity(s in any::<u64>()) {
            let g = crate::random::random_generator(&mut ChaCha8Rng::seed_from_u64(s), 2);
            let sc = apply_lambda(&g);
            prop_assert!(apply_l(&sc).is_literal_zero());
            prop_assert!(apply_e(&sc).is_literal_zero());
        }

        #[test]
        fn l_is_idempotent_on_zero_homogeneous(s in any::<u64>()) {
            let g = crate::random::random_zero_homogeneous(&mut ChaCha8Rng::seed_from_u64(s), 2);
            let lg = apply_l(&g);
            prop_assert_eq!(apply_l(&lg), lg);
        }
    }
}
