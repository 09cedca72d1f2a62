//! Sample the Hessian of the reduced generator to classify concavity.

use localscore::parse;
use localscore::propriety::{check_concavity, reduced_generator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for text in [
        "-(1/2)*q1^2/q0",
        "-q1^4/q0^3",
        "q1^2/q0",
        "-(1/2)*q1^2/q0 - q2^2/q0 + x*q1",
    ] {
        let phi = parse(text)?;
        let report = check_concavity(&phi, 200)?;
        println!("phi = {text}");
        println!("  Φ(u) with u_j = q_j/q0: {}", reduced_generator(&phi)?);
        println!("  verdict {:?}, max eigenvalue {:.3e}", report.verdict, report.max_eigenvalue);
        if let Some(w) = report.witness {
            println!("  witness x = {:.3}, u = {:?}, λ = {:.3e}", w.x, w.point, w.eigenvalue);
        }
    }
    Ok(())
}
