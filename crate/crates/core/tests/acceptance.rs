use std::time::Instant;

use localscore::selftest::{run_criterion, CRITERIA};

const SEED: u64 = 7;

#[test]
fn acceptance_criteria() {
    let start = Instant::now();
    let mut failed = Vec::new();
    for (id, name) in CRITERIA {
        let t = Instant::now();
        let c = run_criterion(id, SEED);
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {mark} {name} ({:.1}s)", t.elapsed().as_secs_f64());
        if !c.passed {
            println!("    {}", c.detail);
            failed.push(id);
        }
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
