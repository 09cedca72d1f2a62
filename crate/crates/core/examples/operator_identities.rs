//! Check the operator identity catalogue on a few expressions.

use localscore::operators::{apply_c, apply_d, apply_lambda, homogeneity_degree, identity_suite};
use localscore::parse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = parse("x*q1^2/q0 + q2*ln(q1/q0) + q0")?;
    println!("f  = {f}");
    println!("Df = {}", apply_d(&f));
    println!("Λf = {}", apply_lambda(&f));
    println!("Cf = {}", apply_c(&f));
    println!("degree = {:?}", homogeneity_degree(&f).map(|h| h.to_string()));

    for id in identity_suite() {
        let z = id.check(&f)?;
        println!("{:<40} {} ({:?})", id.name, if z.is_zero { "ok" } else { "FAILED" }, z.method);
    }
    Ok(())
}
