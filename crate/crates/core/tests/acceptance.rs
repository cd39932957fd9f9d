//! The acceptance battery: one line per criterion, then a hard assertion.

use spacelab::suite::{run_suite, CRITERIA};

const SEED: u64 = 20240611;

#[test]
fn acceptance_criteria() {
    let report = run_suite(SEED, &[1, 2, 8]);
    assert_eq!(report.criteria.len(), CRITERIA);
    for c in &report.criteria {
        println!(
            "criterion {:>2} {}: {} {}",
            c.id,
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.summary
        );
    }
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({})", c.id, c.name))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
