//! Seeded generators of random q-functions for identity suites and tests.

use num_rational::BigRational;
use rand::Rng;

use crate::expr::{Exponent, QFunction};

/// Shape of the random q-functions produced by [`random_qfunction`].
#[derive(Clone, Copy, Debug)]
pub struct RandomSpec {
    pub max_order: u32,
    pub max_terms: usize,
    pub max_degree: u32,
    /// Also draw `ln(q0)`, `ln(x)` and `exp(x)` factors.
    pub transcendental: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_order: 3,
            max_terms: 4,
            max_degree: 2,
            transcendental: false,
        }
    }
}

fn coefficient<R: Rng>(rng: &mut R) -> BigRational {
    let mut n: i64 = rng.gen_range(1..=5);
    if rng.gen_bool(0.5) {
        n = -n;
    }
    let d: i64 = rng.gen_range(1..=3);
    BigRational::new(n.into(), d.into())
}

/// Random rational-coefficient posynomial in `x, q0..q_m` divided by a power
/// of `q0`, with the highest jet index exactly `max_order` when it is drawn.
pub fn random_qfunction<R: Rng>(rng: &mut R, spec: &RandomSpec) -> QFunction {
    let terms = rng.gen_range(1..=spec.max_terms.max(1));
    let mut out = QFunction::zero();
    for _ in 0..terms {
        let mut t = QFunction::constant(coefficient(rng));
        let xdeg = rng.gen_range(0..=1);
        if xdeg > 0 {
            t = &t * &QFunction::x();
        }
        for j in 1..=spec.max_order {
            let e = rng.gen_range(0..=spec.max_degree) as i64;
            if e > 0 {
                t = &t * &QFunction::q(j).powi(e);
            }
        }
        let e0: i64 = rng.gen_range(-3..=1);
        t = &t * &QFunction::q(0).powi(e0);
        if spec.transcendental && rng.gen_bool(0.3) {
            let pick = rng.gen_range(0..3);
            let atom = match pick {
                0 => QFunction::q(0).ln().expect("ln q0"),
                1 => QFunction::x().ln().expect("ln x"),
                _ => QFunction::x().exp(),
            };
            t = &t * &atom;
        }
        out = &out + &t;
    }
    if out.is_literal_zero() {
        QFunction::q(0)
    } else {
        out
    }
}

/// Random 1-homogeneous generator: a sum of terms
/// `c x^a q1^b1 … qm^bm q0^(1 - Σb)`.
pub fn random_generator<R: Rng>(rng: &mut R, max_order: u32) -> QFunction {
    let terms = rng.gen_range(1..=3);
    let mut out = QFunction::zero();
    for _ in 0..terms {
        let mut t = QFunction::constant(coefficient(rng));
        if rng.gen_bool(0.3) {
            t = &t * &QFunction::x();
        }
        let order = rng.gen_range(1..=max_order.max(1));
        let mut total = 0i64;
        for j in 1..=order {
            let e: i64 = if j == order {
                rng.gen_range(1..=2)
            } else {
                rng.gen_range(0..=2)
            };
            if e > 0 {
                t = &t * &QFunction::q(j).powi(e);
                total += e;
            }
        }
        t = &t
            * &QFunction::q(0)
                .pow(Exponent::from_integer(1 - total))
                .expect("q0 power");
        out = &out + &t;
    }
    if out.is_literal_zero() {
        QFunction::q(0)
    } else {
        out
    }
}

/// Random 0-homogeneous q-function: a random generator divided by `q0`.
pub fn random_zero_homogeneous<R: Rng>(rng: &mut R, max_order: u32) -> QFunction {
    let g = random_generator(rng, max_order);
    &g * &QFunction::q(0).powi(-1)
}

/// Random generator of order 1 or 2 whose reduced form
/// `Φ(u) = -[a(u1 + b u2)² + c u2² + d u1⁴] + e u1 + f u2 + g` is concave.
pub fn random_concave_generator<R: Rng>(rng: &mut R) -> QFunction {
    let nonneg = |rng: &mut R| -> BigRational {
        BigRational::new(rng.gen_range(0..=4i64).into(), rng.gen_range(1..=3i64).into())
    };
    let u = |j: u32| &QFunction::q(j) * &QFunction::q(0).powi(-1);
    let order2 = rng.gen_bool(0.5);
    let a = BigRational::new(rng.gen_range(1..=4i64).into(), rng.gen_range(1..=3i64).into());
    let mut inner = u(1);
    if order2 {
        inner = &inner + &u(2).scale(&coefficient(rng));
    }
    let mut neg = inner.powi(2).scale(&a);
    if order2 {
        neg = &neg + &u(2).powi(2).scale(&nonneg(rng));
    }
    neg = &neg + &u(1).powi(4).scale(&nonneg(rng));
    let mut big = -neg;
    big = &big + &u(1).scale(&coefficient(rng));
    if order2 {
        big = &big + &u(2).scale(&coefficient(rng));
    }
    big = &big + &QFunction::constant(coefficient(rng));
    &QFunction::q(0) * &big
}
