use super::*;
use crate::expr::parse;
use crate::rules::catalogue;
use proptest::prelude::*;

fn hyv_phi() -> QFunction {
    parse("-(1/2)*q1^2/q0").unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn eval_with_p(f: &QFunction, x: f64, q: &[f64], p: &[f64]) -> f64 {
    let names: Vec<String> = (0..p.len()).map(|j| format!("p{j}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let layout = SlotLayout::jets(q.len()).with_params(&refs);
    let c = Compiled::new(f, &layout, &Bindings::new()).unwrap();
    let mut slots = vec![x];
    slots.extend_from_slice(q);
    slots.extend_from_slice(p);
    c.eval(&slots).unwrap()
}

#[test]
fn hyvarinen_gaussian_mean_shift() {
    for mu in [0.0, 0.5, 1.0, 2.5] {
        let p = DensitySpec::gaussian(0.0, 1.0);
        let q = DensitySpec::gaussian(mu, 1.0);
        let rep = divergence_report(&hyv_phi(), &p, &q).unwrap();
        assert!(close(rep.d0, mu * mu / 2.0, 1e-6), "{mu}: {}", rep.d0);
        assert!(rep.boundary_limit_diagnostics.vanishes());
        assert_eq!(rep.total, rep.d0);
        let direct = direct_divergence(&catalogue::hyvarinen().s, &p, &q).unwrap();
        assert!(close(direct.value, rep.total, 1e-6));
    }
}

#[test]
fn hyvarinen_boundary_divergence_closed_form() {
    let db = boundary_divergence_expr(&hyv_phi()).unwrap();
    let expected = crate::expr::parse_with_params("p0*(p1/p0 - q1/q0)", &["p0", "p1"]).unwrap();
    assert!((&db - &expected).vanishes());
    for (x, q, p) in [(0.3, [1.2, -0.4], [0.7, 2.0]), (1.0, [0.5, 3.0], [2.0, -1.0])] {
        let a = eval_with_p(&db, x, &q, &p);
        let b = p[0] * (p[1] / p[0] - q[1] / q[0]);
        assert!(close(a, b, 1e-12));
    }
}

#[test]
fn order_one_boundary_divergence() {
    // Any order-1 generator: d_b = p0 {φ_1(q) - φ_1(p)}.
    let phi = parse("x*q1^3/q0^2 - q1^2/q0").unwrap();
    let db = boundary_divergence_expr(&phi).unwrap();
    let phi1 = phi.partial(&Var::Q(1));
    for (x, q, p) in [(0.4, [1.5, 0.3], [0.8, -1.1]), (2.0, [0.2, 1.0], [1.0, 0.5])] {
        let ev = |v: &[f64]| phi1.evaluate(&crate::expr::JetPoint::new(x, v.to_vec()).unwrap(), &Bindings::new()).unwrap();
        let want = p[0] * (ev(&q) - ev(&p));
        assert!(close(eval_with_p(&db, x, &q, &p), want, 1e-10));
    }
}

#[test]
fn modified_rule_boundary_divergence() {
    let rule = catalogue::modified_hyvarinen();
    let db = boundary_divergence_expr(rule.generator.as_ref().unwrap()).unwrap();
    for (x, q, p) in [(0.7, [1.3, -0.2], [0.6, 0.9]), (2.5, [0.4, 0.1], [1.7, -2.0])] {
        let want = x * x * p[0] * (p[1] / p[0] - q[1] / q[0]);
        assert!(close(eval_with_p(&db, x, &q, &p), want, 1e-10));
    }
}

#[test]
fn hyvarinen_entropy_of_normal() {
    for sigma in [0.5, 1.0, 2.0] {
        let rep = entropy(&hyv_phi(), &DensitySpec::gaussian(0.3, sigma)).unwrap();
        assert!(close(rep.h0, -1.0 / (2.0 * sigma * sigma), 1e-6), "{sigma}: {}", rep.h0);
        assert!(rep.hb.vanishes());
    }
}

#[test]
fn exponential_pair_has_boundary_term() {
    let (theta, lambda) = (1.0, 2.0);
    let p = DensitySpec::exponential(theta);
    let q = DensitySpec::exponential(lambda);
    let rep = divergence_report(&hyv_phi(), &p, &q).unwrap();
    assert!(close(rep.d0, 0.5 * (theta - lambda) * (theta - lambda), 1e-6));
    let lower = &rep.boundary_limit_diagnostics.lower;
    assert_eq!(lower.verdict, LimitVerdict::Nonzero);
    assert!(close(rep.d_minus, theta * (lambda - theta), 1e-4), "{}", rep.d_minus);
    assert_eq!(rep.d_plus, 0.0);
    let direct = direct_divergence(&catalogue::hyvarinen().s, &p, &q).unwrap();
    assert!(close(rep.total, 0.5 * (lambda * lambda - theta * theta), 1e-4));
    assert!(close(direct.value, rep.total, 1e-4));
}

#[test]
fn gauge_shift_moves_integral_term_only() {
    let p = DensitySpec::exponential(1.0);
    let q = DensitySpec::exponential(2.0);
    let psi = parse("q1^2/q0").unwrap();
    let rep = gauge_shift_report(&hyv_phi(), &psi, &p, &q).unwrap();
    assert!(rep.discrepancy < 1e-4, "{rep:?}");
    assert!(close(rep.d_hat_minus, 1.0, 1e-4));
    assert!(close(rep.total, rep.total_star, 1e-4));
}

#[test]
fn gauge_shift_on_gaussians_leaves_total() {
    let p = DensitySpec::gaussian(0.0, 1.0);
    let q = DensitySpec::gaussian(0.7, 1.3);
    let psi = parse("x*q1^2/q0 + q1").unwrap();
    let rep = gauge_shift_report(&hyv_phi(), &psi, &p, &q).unwrap();
    assert!(close(rep.total, rep.total_star, 1e-6));
    assert!(rep.d_hat.vanishes());
}

#[test]
fn example_gauge_d_hat() {
    let psi = parse("-(1/2)*q1*ln(q1/q0)").unwrap();
    let dh = d_hat_expr(&psi).unwrap();
    for (x, q, p) in [(0.2, [1.0, 0.5], [2.0, 1.5]), (1.0, [0.3, 0.9], [1.1, 0.2])] {
        let (u1, v1): (f64, f64) = (q[1] / q[0], p[1] / p[0]);
        let want = 0.5 * p[0] * (u1 - v1 + v1 * (v1 / u1).ln());
        assert!(close(eval_with_p(&dh, x, &q, &p), want, 1e-12));
    }
}

#[test]
fn score_decomposition_matches_direct() {
    let p = DensitySpec::gaussian(0.2, 0.9);
    let q = DensitySpec::gaussian(-0.4, 1.4);
    let rep = expected_score_decomposition(&hyv_phi(), &p, &q).unwrap();
    assert!(rep.discrepancy < 1e-6, "{rep:?}");
    let p = DensitySpec::exponential(1.5);
    let q = DensitySpec::exponential(0.5);
    let rep = expected_score_decomposition(&hyv_phi(), &p, &q).unwrap();
    assert!(rep.discrepancy < 1e-4, "{rep:?}");
    assert!(rep.s_minus != 0.0);
}

#[test]
fn concavity_examples() {
    let phi = parse("-q1^4/q0^3").unwrap();
    let rep = check_concavity(&phi, 200).unwrap();
    assert_eq!(rep.verdict, Concavity::Concave);
    let s = catalogue::power(4).s;
    assert!(reduced_generator(&s).is_ok());
    let standard = &QFunction::q(0) * &s;
    let rep = check_concavity(&standard, 200).unwrap();
    assert_eq!(rep.verdict, Concavity::NotConcave);
    assert!(rep.witness.is_some());
    assert_eq!(check_concavity(&hyv_phi(), 100).unwrap().verdict, Concavity::StrictlyConcave);
    assert_eq!(check_concavity(&QFunction::q(0), 10).unwrap().verdict, Concavity::Concave);
}

#[test]
fn power_four_score_form() {
    let s = catalogue::power(4).s;
    let want = parse("12*(q1/q0)^2*q2/q0 - 9*(q1/q0)^4").unwrap();
    assert!((&s - &want).vanishes());
}

#[test]
fn not_one_homogeneous_is_rejected() {
    let p = DensitySpec::gaussian(0.0, 1.0);
    assert_eq!(
        integral_divergence(&parse("q1^2").unwrap(), &p, &p),
        Err(ProprietyError::NotOneHomogeneous)
    );
}

#[test]
fn approach_points_head_to_end() {
    let pts = approach_points(Domain(0.0, 2.0), false);
    assert!(pts.windows(2).all(|w| w[1] < w[0]) && pts[11] < 1e-5);
    let pts = approach_points(Domain(0.0, 2.0), true);
    assert!(pts[11] > 2.0 - 1e-5 && pts[11] < 2.0);
    let pts = approach_points(Domain::real_line(), false);
    assert_eq!(pts[11], -1e6);
}

#[test]
fn classify_verdicts() {
    let pts = |f: &dyn Fn(f64) -> f64| -> Vec<(f64, f64)> {
        (1..=12).map(|k| (k as f64, f(k as f64))).collect()
    };
    assert_eq!(classify(0.0, pts(&|k| (-k * 3.0).exp())).verdict, LimitVerdict::Vanishes);
    let c = classify(0.0, pts(&|k| 2.0 + (-k * 3.0).exp()));
    assert_eq!(c.verdict, LimitVerdict::Nonzero);
    assert!(close(c.limit, 2.0, 1e-9));
    assert_eq!(classify(0.0, pts(&|k| k.exp())).verdict, LimitVerdict::Divergent);
    assert_eq!(classify(0.0, pts(&|k| k.sin())).verdict, LimitVerdict::Inconclusive);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn concave_generators_give_nonnegative_divergence(
        seed in 0u64..1000,
        mu in -1.5f64..1.5,
        s1 in 0.6f64..1.6,
        s2 in 0.6f64..1.6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = crate::random::random_concave_generator(&mut rng);
        let rep = check_concavity(&phi, 60).unwrap();
        prop_assert_ne!(rep.verdict, Concavity::NotConcave);
        let p = DensitySpec::gaussian(0.0, s1);
        let q = DensitySpec::gaussian(mu, s2);
        let d0 = integral_divergence(&phi, &p, &q).unwrap();
        prop_assert!(d0.value >= -1e-8, "{phi}: {}", d0.value);
    }

    #[test]
    fn total_divergence_is_gauge_invariant(
        seed in 0u64..1000,
        mu in -1.0f64..1.0,
        s2 in 0.7f64..1.5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = crate::random::random_generator(&mut rng, 1);
        let p = DensitySpec::gaussian(0.0, 1.0);
        let q = DensitySpec::gaussian(mu, s2);
        let a = divergence_report(&hyv_phi(), &p, &q).unwrap();
        let star = &hyv_phi() + &apply_d(&psi);
        let b = divergence_report(&star, &p, &q).unwrap();
        prop_assert!((a.total - b.total).abs() < 1e-6, "{psi}: {} vs {}", a.total, b.total);
    }

    #[test]
    fn concavity_agrees_between_forms(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = if seed % 2 == 0 {
            crate::random::random_concave_generator(&mut rng)
        } else {
            crate::random::random_generator(&mut rng, 2)
        };
        let a = check_concavity(&phi, 40).unwrap();
        let b = check_concavity_jets(&phi, &ConcavityConfig { samples: 40, ..Default::default() }).unwrap();
        prop_assert_eq!(a.verdict == Concavity::NotConcave, b.verdict == Concavity::NotConcave, "{}", phi);
    }
}
