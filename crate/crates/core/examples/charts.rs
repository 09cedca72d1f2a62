//! Transport scoring rules through a change of coordinates.

use localscore::charts::ChartMap;
use localscore::parse;
use localscore::rules::{catalogue, generate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chart = ChartMap::log();
    println!("x̄ = {}, α = {}", chart.gamma, chart.alpha);
    for (k, row) in chart.coeff.iter().enumerate() {
        let row: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        println!("  q̄{k} = [{}]", row.join(", "));
    }

    let s = chart.pull_back(&catalogue::hyvarinen().s)?;
    println!("Hyvärinen on ln x: s = {s}");
    println!("matches modified rule: {}", s == catalogue::modified_hyvarinen().s);

    let phi_bar = parse("-(1/2)*q1^2/q0")?;
    println!("boundary condition: {}", chart.transport_boundary_condition(&phi_bar)?);
    let report = chart.verify_operator_transport(&phi_bar)?;
    for c in &report.checks {
        println!("  {:<28} {}", c.name, c.passed);
    }

    // A chart without a closed-form inverse.
    let cubic = ChartMap::new(parse("x^3 + x")?, None)?;
    let generator = cubic.pull_back(&phi_bar)?.try_div(&cubic.alpha)?;
    println!("x̄ = x³ + x: generator {generator}");
    println!("  s = {}", generate(&generator)?.s);
    println!("  transport checks pass: {}", cubic.verify_operator_transport(&phi_bar)?.all_passed);
    Ok(())
}
