use lrlab::lab::suites::{run_algebra_suite, run_lemma_suite, AlgebraSuite, LemmaSuite};

#[test]
fn algebra_suite_passes_on_defaults() {
    let report = run_algebra_suite(&AlgebraSuite::default(), 7).unwrap();
    for c in &report.checks {
        println!("{} {} {}", c.name, c.passed, c.detail);
    }
    assert!(report.all_passed());
}

#[test]
fn lemma_suite_passes_on_defaults() {
    let report = run_lemma_suite(&LemmaSuite::default(), 7).unwrap();
    for c in &report.checks {
        println!("{} {} {}", c.name, c.passed, c.detail);
    }
    assert!(report.all_passed());
}
