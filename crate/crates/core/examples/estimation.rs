//! Score-matching estimation without normalizing constants.

use localscore::density::{DensitySpec, Domain};
use localscore::estimation::{
    estimate, selection_model_estimator, unbiasedness_check, GridSampler, ParametricModel,
};
use localscore::rules::catalogue;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let xs = GridSampler::new(&DensitySpec::gaussian(1.5, 1.0))?.sample_n(&mut rng, 2000);
    let fit = estimate(&catalogue::hyvarinen(), &ParametricModel::normal_mean(), &xs)?;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    println!("normal mean: θ̂ = {:.6} ({:?}), sample mean = {mean:.6}", fit.theta_hat[0], fit.method);

    let ys = GridSampler::new(&DensitySpec::exponential(0.7))?.sample_n(&mut rng, 2000);
    let fit = estimate(&catalogue::modified_hyvarinen(), &ParametricModel::exponential(), &ys)?;
    println!("exponential rate: θ̂ = {:.6} ({:?})", fit.theta_hat[0], fit.method);

    // ℓ = κ(x) - (x - θ)²/2 with κ = -x⁴/4, up to terms free of x.
    let model = ParametricModel::parse("t1*x - x^4/4 - x^2/2", Domain::real_line(), &["t1"])?;
    let fit = estimate(&catalogue::hyvarinen(), &model, &xs)?;
    let closed = selection_model_estimator(|x| -x.powi(3), &xs);
    println!("quartic tilt: θ̂ = {:.6}, closed form {closed:.6}", fit.theta_hat[0]);

    let check = unbiasedness_check(&catalogue::hyvarinen(), &ParametricModel::normal_mean(), &[0.3], 4000, 9)?;
    println!("E[∂S/∂θ] at θ0: mean {:?}, z {:?}, passed {}", check.mean, check.z, check.passed);
    Ok(())
}
