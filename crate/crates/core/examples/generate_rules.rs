//! Generate key local scoring rules from 1-homogeneous generators.

use localscore::parse;
use localscore::rules::{catalogue, generate, standard_gauge};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for text in ["-(1/2)*q1^2/q0", "-q1^3/q0^2", "-q1^4/q0^3", "q0*ln(1 + (q1/q0)^2)*x"] {
        let phi = parse(text)?;
        let rule = generate(&phi)?;
        println!("phi = {phi}");
        println!("  s              = {}", rule.s);
        println!("  order          = {:?}", rule.order());
        println!("  L s = 0        : {}", rule.checks.key_equation.passed);
        println!("  E s = 0        : {}", rule.checks.homogeneity.passed);
        println!("  standard gauge = {}", standard_gauge(&rule)?);
    }

    let modified = catalogue::modified_hyvarinen();
    println!("modified Hyvärinen: s = {}", modified.s);

    // A generator that is not 1-homogeneous is rejected.
    let err = generate(&parse("q1^2")?).unwrap_err();
    println!("q1^2 -> {err}");
    Ok(())
}
