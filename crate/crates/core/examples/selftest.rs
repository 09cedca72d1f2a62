//! Run the acceptance suite and print one line per criterion.

use localscore::selftest;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let report = selftest::run(seed);
    for c in &report.criteria {
        println!("{:>2} {} {}", c.id, if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    std::process::exit(if report.all_passed { 0 } else { 1 });
}
