use super::*;
use crate::expr::parse_with_params;
use crate::rules::catalogue;
use proptest::prelude::*;
use rand_distr::{Distribution, Exp, Normal};

fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn hyvarinen_score_for_linear_exponential_family() {
    let model = ParametricModel::parse("a(x) + t1*x", Domain::real_line(), &["t1"]).unwrap();
    let s = score_of_model(&catalogue::hyvarinen(), &model).unwrap();
    let want = parse_with_params("a''(x) + (1/2)*(a'(x) + t1)^2", &["t1"]).unwrap();
    assert!((&s - &want).vanishes(), "{s}");
}

#[test]
fn modified_rule_on_exponential_model() {
    let s = score_of_model(&catalogue::modified_hyvarinen(), &ParametricModel::exponential()).unwrap();
    let want = parse_with_params("(1/2)*x^2*t1^2 - 2*x*t1 + 1/2", &["t1"]).unwrap();
    assert_eq!(s, want);
}

#[test]
fn additive_constants_in_log_density_drop_out() {
    for rule in [catalogue::hyvarinen(), catalogue::modified_hyvarinen(), catalogue::power(3)] {
        let base = ParametricModel::parse("-(1/2)*x^2 + t1*x", Domain::real_line(), &["t1"]).unwrap();
        let shifted =
            ParametricModel::parse("-(1/2)*x^2 + t1*x + ln(t1^2 + 1) - 3*t1", Domain::real_line(), &["t1"]).unwrap();
        assert_eq!(score_of_model(&rule, &base).unwrap(), score_of_model(&rule, &shifted).unwrap());
    }
}

#[test]
fn log_score_is_rejected() {
    assert_eq!(
        score_of_model(&catalogue::log_score(), &ParametricModel::normal_mean()),
        Err(EstimationError::NotZeroHomogeneous)
    );
}

#[test]
fn normal_mean_is_sample_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = Normal::new(0.7, 1.3).unwrap().sample_iter(&mut rng).take(500).collect();
    let r = estimate(&catalogue::hyvarinen(), &ParametricModel::normal_mean(), &xs).unwrap();
    assert_eq!(r.method, Method::ClosedForm);
    assert!((r.theta_hat[0] - sample_mean(&xs)).abs() < 1e-10);
    assert!(r.score_gradient_norm < 1e-8);
}

#[test]
fn exponential_modified_rule_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let xs: Vec<f64> = Exp::new(2.0).unwrap().sample_iter(&mut rng).take(1000).collect();
    let r = estimate(&catalogue::modified_hyvarinen(), &ParametricModel::exponential(), &xs).unwrap();
    let oracle = 2.0 * xs.iter().sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    assert!((r.theta_hat[0] - oracle).abs() < 1e-10);
}

#[test]
fn exponential_hyvarinen_is_degenerate() {
    let xs = [0.5, 1.0, 2.0];
    let err = estimate(&catalogue::hyvarinen(), &ParametricModel::exponential(), &xs).unwrap_err();
    assert!(matches!(err, EstimationError::Degenerate(_)));
    let rep = unbiasedness_check(&catalogue::hyvarinen(), &ParametricModel::exponential(), &[1.0], 1000, 1).unwrap();
    assert!(rep.degenerate && !rep.passed);
    assert!((rep.mean[0] - 1.0).abs() < 1e-12);
}

#[test]
fn newton_and_nelder_mead_agree_with_closed_form() {
    // ℓ = -t1²x²/2 is not linear in θ, so Newton runs.
    let model = ParametricModel::parse("-(1/2)*t1^2*x^2", Domain::real_line(), &["t1"])
        .unwrap()
        .with_bounds(vec![(1e-6, 100.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<f64> = Normal::new(0.0, 0.5).unwrap().sample_iter(&mut rng).take(400).collect();
    let r = estimate(&catalogue::hyvarinen(), &model, &xs).unwrap();
    assert_eq!(r.method, Method::Newton);
    // S = -t² + t⁴x²/2, so Σσ = 0 gives t² = n/Σx².
    let oracle = (xs.len() as f64 / xs.iter().map(|x| x * x).sum::<f64>()).sqrt();
    assert!((r.theta_hat[0] - oracle).abs() < 1e-10, "{r:?}");
    let sm = ScoreModel::new(&catalogue::hyvarinen(), &model).unwrap();
    let cfg = EstimateConfig::default();
    let (nm, _) = nelder_mead_multi(&sm, &model, &xs, &[1.0], &cfg).unwrap();
    assert!((nm[0] - oracle).abs() < 1e-6);
}

#[test]
fn two_parameter_normal() {
    // ℓ = t1 x - t2 x²/2: Σσ = 0 gives t2 = 1/var, t1 = mean/var.
    let model = ParametricModel::parse("t1*x - (1/2)*t2*x^2", Domain::real_line(), &["t1", "t2"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = Normal::new(1.0, 2.0).unwrap().sample_iter(&mut rng).take(300).collect();
    let r = estimate(&catalogue::hyvarinen(), &model, &xs).unwrap();
    let m = sample_mean(&xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    assert!((r.theta_hat[1] - 1.0 / var).abs() < 1e-9);
    assert!((r.theta_hat[0] - m / var).abs() < 1e-9);
}

#[test]
fn data_validation() {
    let model = ParametricModel::exponential();
    let rule = catalogue::modified_hyvarinen();
    assert_eq!(estimate(&rule, &model, &[]), Err(EstimationError::Empty));
    assert_eq!(
        estimate(&rule, &model, &[1.0, -1.0]),
        Err(EstimationError::OutsideDomain { index: 1, value: -1.0 })
    );
    assert_eq!(estimate(&rule, &model, &[f64::NAN]), Err(EstimationError::NonFinite { index: 0 }));
}

#[test]
fn selection_estimator_closed_forms() {
    let xs = [0.5, -1.0, 2.5, 3.0];
    assert!((selection_model_estimator(|_| 0.0, &xs) - sample_mean(&xs)).abs() < 1e-15);
    assert!((selection_model_estimator(|_| -1.0, &xs) - (sample_mean(&xs) + 1.0)).abs() < 1e-15);
    let model = ParametricModel::parse("-x - (x - t1)^2/2", Domain::real_line(), &["t1"]).unwrap();
    let r = estimate(&catalogue::hyvarinen(), &model, &xs).unwrap();
    assert!((r.theta_hat[0] - selection_model_estimator(|_| -1.0, &xs)).abs() < 1e-12);
}

#[test]
fn selection_model_simulation() {
    // exp(κ(x) - (x - 1)²/2) with κ = -x is N(0, 1).
    let model = ParametricModel::parse("-x - (x - t1)^2/2", Domain::real_line(), &["t1"]).unwrap();
    let sampler = GridSampler::new(&model.at(&[1.0]).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let xs = sampler.sample_n(&mut rng, 10_000);
    let th = selection_model_estimator(|_| -1.0, &xs);
    let se = (xs.iter().map(|x| (x - sample_mean(&xs)).powi(2)).sum::<f64>() / 9999.0).sqrt() / 100.0;
    assert!((th - 1.0).abs() < 3.0 * se, "{th} {se}");
    let rep = unbiasedness_check(&catalogue::hyvarinen(), &model, &[1.0], 10_000, 4).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn grid_sampler_moments() {
    let sampler = GridSampler::new(&DensitySpec::exponential(2.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs = sampler.sample_n(&mut rng, 100_000);
    assert!((sample_mean(&xs) - 0.5).abs() < 0.01);
    assert!(xs.iter().all(|x| *x >= 0.0));
}

#[test]
fn reads_plain_and_csv_data() {
    assert_eq!(read_data("1.5\n2\n\n-3e-1\n", None).unwrap(), vec![1.5, 2.0, -0.3]);
    let csv = "id,value\n1,0.25\n2,0.75\n";
    assert_eq!(read_data(csv, Some("value")).unwrap(), vec![0.25, 0.75]);
    assert_eq!(read_data(csv, Some("1")).unwrap(), vec![0.25, 0.75]);
    assert!(matches!(read_data("1\nabc\n", None), Err(EstimationError::Data(_))));
    assert!(matches!(read_data("1\ninf\n", None), Err(EstimationError::NonFinite { .. })));
    assert!(matches!(read_data(csv, Some("nope")), Err(EstimationError::Data(_))));
}

#[test]
fn model_json() {
    let m = ParametricModel::from_json(
        r#"{"logdensity": "-(1/2)*x^2 + t1*x", "domain": ["-inf", "inf"], "params": ["t1"]}"#,
    )
    .unwrap();
    assert_eq!(m.dim(), 1);
    assert!(ParametricModel::from_json(r#"{"logdensity": "q1", "domain": [0, 1], "params": ["t1"]}"#).is_err());
    assert!(ParametricModel::from_json(r#"{"logdensity": "x", "domain": [0, 1], "params": []}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn normal_mean_estimate_matches_oracle(xs in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
        let r = estimate(&catalogue::hyvarinen(), &ParametricModel::normal_mean(), &xs).unwrap();
        prop_assert!((r.theta_hat[0] - sample_mean(&xs)).abs() < 1e-10 * (1.0 + sample_mean(&xs).abs()));
    }

    #[test]
    fn exponential_estimate_matches_oracle(xs in proptest::collection::vec(0.01f64..20.0, 1..40)) {
        let r = estimate(&catalogue::modified_hyvarinen(), &ParametricModel::exponential(), &xs).unwrap();
        let oracle = 2.0 * xs.iter().sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
        prop_assert!((r.theta_hat[0] - oracle).abs() < 1e-10 * oracle.max(1.0));
    }
}
